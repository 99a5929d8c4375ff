//! Randomised invariants of the coupled problem and the spectroscopy model.

use std::sync::OnceLock;

use heliumjcm::coupled::{assemble_hamiltonian, solve_coupled, DiamagneticMode, ProductBasis};
use heliumjcm::spectroscopy::{thermal_populations, BroadeningModel};
use heliumjcm::units::constants::V_PER_CM;
use heliumjcm::units::{FieldConfiguration, Isotope, MaterialProperties};
use heliumjcm::vertical::{solve_vertical, GridSpec, VerticalSpectrum};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn vs15() -> &'static VerticalSpectrum {
    static VS: OnceLock<VerticalSpectrum> = OnceLock::new();
    VS.get_or_init(|| {
        let m = MaterialProperties::default_for(Isotope::He3);
        solve_vertical(&m, 15.0 * V_PER_CM, 5, GridSpec::new(150.0, 6000)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectrum_is_orthonormal_and_trace_preserving(b_z in 0.2f64..3.0, b_y in 0.0f64..1.5) {
        let vs = vs15();
        let basis = ProductBasis::new(5, 24).unwrap();
        let cfg = FieldConfiguration::lab(15.0, b_z, b_y, 0.3).unwrap();
        let h = assemble_hamiltonian(vs, &cfg, &basis).unwrap();
        prop_assert!((&h - h.transpose()).amax() < 1e-12);
        let s = solve_coupled(vs, &cfg, &basis, DiamagneticMode::Full).unwrap();
        let v = s.eigenvectors();
        let err = (v.transpose() * v - DMatrix::<f64>::identity(v.ncols(), v.ncols())).amax();
        prop_assert!(err < 1e-8, "orthonormality {}", err);
        prop_assert!((h.trace() - s.trace()).abs() <= 1e-10 * h.trace().abs().max(1.0));
        prop_assert!(s.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        // reconstruct H from its eigen-decomposition
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(s.eigenvalues()));
        let back = v * d * v.transpose();
        prop_assert!((back - h).amax() < 1e-9);
    }

    #[test]
    fn zero_tilt_spectrum_is_the_fan(b_z in 0.05f64..4.0) {
        let vs = vs15();
        let basis = ProductBasis::new(5, 12).unwrap();
        let cfg = FieldConfiguration::lab(15.0, b_z, 0.0, 0.3).unwrap();
        let s = solve_coupled(vs, &cfg, &basis, DiamagneticMode::Full).unwrap();
        let hw = vs.scale().cyclotron_energy(b_z);
        let mut fan: Vec<f64> = (0..basis.size())
            .map(|i| basis.label(i))
            .map(|(n, l)| vs.energy(n) + hw * l as f64)
            .collect();
        fan.sort_by(f64::total_cmp);
        for (a, b) in fan.iter().zip(s.eigenvalues()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn basis_index_round_trips(n_max in 1usize..9, l_max in 0usize..60) {
        let b = ProductBasis::new(n_max, l_max).unwrap();
        prop_assert_eq!(b.size(), n_max * (l_max + 1));
        for i in 0..b.size() {
            prop_assert_eq!(b.index(b.label(i)), i);
        }
    }

    #[test]
    fn populations_normalised_and_decreasing(b_z in 0.05f64..5.0, t in 0.05f64..2.0, l_cut in 0usize..40) {
        let cfg = FieldConfiguration::lab(20.0, b_z, 0.0, t).unwrap();
        let p = thermal_populations(&cfg, l_cut).unwrap();
        prop_assert_eq!(p.len(), l_cut + 1);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // deep levels may underflow to exactly zero at low T
        prop_assert!(p.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0)));
    }

    #[test]
    fn width_grows_with_in_plane_field(b_z in 0.05f64..3.0, b_y in 0.0f64..1.0, dy in 0.01f64..0.5, kappa in 0.1f64..3.0) {
        let m = BroadeningModel::default();
        let a = FieldConfiguration::lab(20.0, b_z, b_y, 0.3).unwrap();
        let b = FieldConfiguration::lab(20.0, b_z, b_y + dy, 0.3).unwrap();
        prop_assert!(m.width_ghz(&b, kappa) > m.width_ghz(&a, kappa));
        prop_assert!(m.width_ghz(&a, kappa) >= m.base_width_ghz);
    }
}
