//! Cross-module physics checks against independent routes to the same number.

use approx::assert_relative_eq;
use heliumjcm::coupled::{assemble_hamiltonian, solve_coupled, DiamagneticMode, ProductBasis};
use heliumjcm::jcm::{
    bethe_cancellation_check, coupling_constant, dressed_pair, full_shift_ghz, lamb_shift_ghz, light_shift_ghz,
};
use heliumjcm::spectroscopy::{line_profile, TransitionLine};
use heliumjcm::units::constants::{ELEMENTARY_CHARGE, GHZ, PLANCK, V_PER_CM};
use heliumjcm::units::{FieldConfiguration, Isotope, MaterialProperties};
use heliumjcm::vertical::{solve_vertical, stark_slope, GridSpec, VerticalSpectrum};

const GRID: GridSpec = GridSpec { z_max: 150.0, n_points: 8000 };

fn he3() -> MaterialProperties {
    MaterialProperties::default_for(Isotope::He3)
}

fn vs(e_vcm: f64, n_max: usize) -> VerticalSpectrum {
    solve_vertical(&he3(), e_vcm * V_PER_CM, n_max, GRID).unwrap()
}

#[test]
fn stark_slope_is_the_dipole_difference() {
    // dE_n/dE = e <z>_nn, so the 1->2 line tunes at e (z22 - z11) / h
    let m = he3();
    for e in [5.0, 15.0, 30.0] {
        let v = vs(e, 3);
        let expect = ELEMENTARY_CHARGE * (v.z(2, 2) - v.z(1, 1)) * m.bohr_radius() * V_PER_CM / PLANCK / GHZ;
        assert_relative_eq!(stark_slope(&m, e, 1, 2, GRID).unwrap(), expect, max_relative = 1e-4);
    }
}

#[test]
fn coupled_levels_obey_hellmann_feynman_in_b_y() {
    let v = vs(15.0, 5);
    let basis = ProductBasis::new(5, 30).unwrap();
    let (b_z, b_y, h) = (0.9, 0.4, 1e-4);
    let at = |b: f64| FieldConfiguration::lab(15.0, b_z, b, 0.3).unwrap();
    let s = solve_coupled(&v, &at(b_y), &basis, DiamagneticMode::Full).unwrap();
    let hp = assemble_hamiltonian(&v, &at(b_y + h), &basis).unwrap();
    let hm = assemble_hamiltonian(&v, &at(b_y - h), &basis).unwrap();
    let dh = (hp - hm) / (2.0 * h);
    let sp = solve_coupled(&v, &at(b_y + h), &basis, DiamagneticMode::Full).unwrap();
    let sm = solve_coupled(&v, &at(b_y - h), &basis, DiamagneticMode::Full).unwrap();
    for k in 0..8 {
        let x = s.vector(k);
        let expect = (x.transpose() * &dh * &x)[(0, 0)];
        let fd = (sp.eigenvalues()[k] - sm.eigenvalues()[k]) / (2.0 * h);
        assert!((fd - expect).abs() < 1e-5 * expect.abs().max(1e-3), "k={k}: {fd} vs {expect}");
    }
}

#[test]
fn resonant_doublet_splits_by_twice_the_coupling() {
    let v = vs(15.0, 4);
    let cfg = FieldConfiguration::lab(15.0, 1.0, 0.2, 0.3).unwrap();
    let g = coupling_constant(&v, &cfg, 1, 2).unwrap();
    for l in 0..4 {
        let p = heliumjcm::jcm::DressedPair::from_energies((1, l + 1), (2, l), 3.0, 3.0, g);
        assert_relative_eq!(p.splitting(), 2.0 * g.abs() * ((l + 1) as f64).sqrt(), max_relative = 1e-12);
        let norm: f64 = p.plus_state().iter().map(|(_, a)| a * a).sum();
        assert_relative_eq!(norm, 1.0, epsilon = 1e-14);
        let overlap: f64 = p.plus_state().iter().zip(p.minus_state()).map(|((_, a), (_, b))| a * b).sum();
        assert!(overlap.abs() < 1e-14);
    }
    let d = dressed_pair(&v, &cfg, 1, 2, 0).unwrap();
    assert_relative_eq!(d.e_plus + d.e_minus, 2.0 * d.e_sigma, max_relative = 1e-14);
}

#[test]
fn weak_tilt_shift_is_second_order() {
    // far from any vertical/cyclotron resonance the exact shift approaches
    // the unreduced second-order sum in the same basis as B_y -> 0; the
    // reduced form differs only by the closure defect of the vertical basis
    let v = vs(15.0, 6);
    let basis = ProductBasis::new(6, 8).unwrap();
    let mut prev = f64::INFINITY;
    for b_y in [0.08, 0.04, 0.02] {
        let cfg = FieldConfiguration::lab(15.0, 2.0, b_y, 0.3).unwrap();
        let raw = |n| bethe_cancellation_check(&v, &cfg, n, 0).unwrap().raw;
        let second = v.scale().energy_to_ghz(raw(2) - raw(1));
        let reduced = light_shift_ghz(&v, &cfg, 0).unwrap();
        let full = full_shift_ghz(&v, &cfg, &basis, 0).unwrap();
        assert_relative_eq!(lamb_shift_ghz(&v, &cfg).unwrap(), reduced, max_relative = 1e-10);
        assert_relative_eq!(full, reduced, max_relative = 2e-2);
        let err = ((full - second) / second).abs();
        assert!(err < prev / 3.0, "error should fall like B_y^2: {err} at {b_y}");
        prev = err;
    }
    assert!(prev < 5e-4, "{prev}");
}

#[test]
fn bethe_residual_shrinks_with_basis() {
    let cfg = FieldConfiguration::lab(15.0, 0.65, 0.1, 0.3).unwrap();
    let r: Vec<f64> = [6, 10, 20]
        .iter()
        .map(|&n| bethe_cancellation_check(&vs(15.0, n), &cfg, 1, 0).unwrap().residual)
        .collect();
    assert!(r[0] > r[1] && r[1] > r[2], "{r:?}");
}

#[test]
fn gaussian_profile_integrates_to_line_strength() {
    let line = TransitionLine {
        initial: (1, 0),
        initial_index: 0,
        weight: 0.7,
        final_index: 3,
        final_dominant: (2, 0),
        final_purity: 0.98,
        frequency_ghz: 88.0,
        moment_sq: 2.5,
        sideband_order: 0,
        stark_slope: 3.1,
        e_perp_vcm: 28.0,
    };
    let p = line_profile(&line, 0.4, 90.0).unwrap();
    // the drive is met where the linearised frequency reaches 90 GHz
    assert_relative_eq!(line.frequency_ghz + line.stark_slope * (p.center - line.e_perp_vcm), 90.0, epsilon = 1e-12);
    let (lo, hi, n) = (p.center - 10.0 * p.sigma, p.center + 10.0 * p.sigma, 4001);
    let dx = (hi - lo) / (n - 1) as f64;
    let area: f64 = (0..n).map(|i| p.at(lo + i as f64 * dx)).sum::<f64>() * dx;
    assert_relative_eq!(area, line.strength(), max_relative = 1e-8);
    let flat = TransitionLine { stark_slope: 0.0, ..line };
    assert!(line_profile(&flat, 0.4, 90.0).is_none());
}
