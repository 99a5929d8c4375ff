//! Closed-form Jaynes-Cummings layer: coupling constants, two-level dressed
//! states, perturbative shifts, admixed states and interference moments.
//!
//! All energies are in units of `R_e` and lengths in `r_B`, with the same
//! `ħω_c/2` subtraction as [`crate::coupled`], so results compare directly
//! with full diagonalisation.

use nalgebra::DVector;
use serde::Serialize;

use crate::coupled::{pair_states, solve_coupled, DiamagneticMode, FieldScales, Level, ProductBasis};
use crate::error::{invalid, Error, Result};
use crate::units::constants::{ELEMENTARY_CHARGE, HBAR};
use crate::units::FieldConfiguration;
use crate::vertical::{truncation_report, VerticalSpectrum};

/// Default resonance guard: perturbation theory is refused when a detuning
/// is within this multiple of the coupling matrix element.
pub const DEFAULT_GUARD: f64 = 3.0;

fn scales(vs: &VerticalSpectrum, cfg: &FieldConfiguration) -> Result<FieldScales> {
    if cfg.b_z() <= 0.0 {
        return Err(Error::DegenerateField("Jaynes-Cummings coupling"));
    }
    FieldScales::new(&vs.scale(), cfg)
}

fn check_level(vs: &VerticalSpectrum, n: usize) -> Result<()> {
    if n == 0 || n > vs.n_max() {
        return Err(invalid("n", format!("state {n} outside 1..={}", vs.n_max())));
    }
    Ok(())
}

/// `g_nn' = (ħω_y/√2)(z_nn'/l_B)`, scaled.
pub fn coupling_constant(vs: &VerticalSpectrum, cfg: &FieldConfiguration, n: usize, n_prime: usize) -> Result<f64> {
    check_level(vs, n)?;
    check_level(vs, n_prime)?;
    Ok(scales(vs, cfg)?.coupling * vs.z(n, n_prime))
}

/// `Ẽ_{n,l} = E_n + ħω_c l + m ω_y² (z²)_nn / 2`, scaled.
pub fn dressed_level_energy(vs: &VerticalSpectrum, cfg: &FieldConfiguration, (n, l): Level) -> Result<f64> {
    check_level(vs, n)?;
    let fs = FieldScales::new(&vs.scale(), cfg)?;
    Ok(vs.energy(n) + fs.hw_c * l as f64 + fs.diamagnetic * vs.z2(n, n))
}

/// Two-level dressed doublet built from `|n, l+1>` and `|n', l>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DressedPair {
    /// `(n, l+1)`
    pub first: Level,
    /// `(n', l)`
    pub second: Level,
    pub mixing_angle: f64,
    pub e_plus: f64,
    pub e_minus: f64,
    pub g: f64,
    pub e_delta: f64,
    pub e_sigma: f64,
}

impl DressedPair {
    /// Builds the doublet from the bare energies `Ẽ_{n,l+1}`, `Ẽ_{n',l}` and
    /// the effective coupling `g √(l+1)`.
    pub fn from_energies(first: Level, second: Level, e_first: f64, e_second: f64, g: f64) -> Self {
        let l = second.1;
        let coupling = g * ((l + 1) as f64).sqrt();
        let e_sigma = 0.5 * (e_first + e_second);
        let e_delta = 0.5 * (e_first - e_second);
        let r = e_delta.hypot(coupling);
        // |+> = cos(θ/2)|n',l> + sin(θ/2)|n,l+1> is the upper eigenvector of
        // [[Ẽ_{n',l}, g√(l+1)], [g√(l+1), Ẽ_{n,l+1}]].
        let mixing_angle = coupling.atan2(-e_delta);
        Self { first, second, mixing_angle, e_plus: e_sigma + r, e_minus: e_sigma - r, g, e_delta, e_sigma }
    }

    pub fn splitting(&self) -> f64 {
        self.e_plus - self.e_minus
    }

    /// Amplitudes of `|+>` on `(|n',l>, |n,l+1>)`.
    pub fn plus_state(&self) -> [(Level, f64); 2] {
        let h = 0.5 * self.mixing_angle;
        [(self.second, h.cos()), (self.first, h.sin())]
    }

    /// Amplitudes of `|->` on `(|n',l>, |n,l+1>)`.
    pub fn minus_state(&self) -> [(Level, f64); 2] {
        let h = 0.5 * self.mixing_angle;
        [(self.second, -h.sin()), (self.first, h.cos())]
    }
}

/// Dressed doublet of `|n, l+1>` and `|n', l>`.
pub fn dressed_pair(
    vs: &VerticalSpectrum,
    cfg: &FieldConfiguration,
    n: usize,
    n_prime: usize,
    l: usize,
) -> Result<DressedPair> {
    let g = coupling_constant(vs, cfg, n, n_prime)?;
    let first = (n, l + 1);
    let second = (n_prime, l);
    let e1 = dressed_level_energy(vs, cfg, first)?;
    let e2 = dressed_level_energy(vs, cfg, second)?;
    Ok(DressedPair::from_energies(first, second, e1, e2, g))
}

fn guard_check(
    n: usize,
    l: usize,
    n_prime: usize,
    detuning: f64,
    element: f64,
    guard: f64,
) -> Result<()> {
    let limit = guard * element.abs();
    if element != 0.0 && detuning.abs() <= limit {
        return Err(Error::NearResonance { n, l, n_prime, detuning, guard: limit });
    }
    Ok(())
}

/// Second-order shift of `|n, l>` after the Bethe-type cancellation, scaled.
pub fn perturbative_shift(vs: &VerticalSpectrum, cfg: &FieldConfiguration, n: usize, l: usize) -> Result<f64> {
    perturbative_shift_with(vs, cfg, n, l, DEFAULT_GUARD)
}

pub fn perturbative_shift_with(
    vs: &VerticalSpectrum,
    cfg: &FieldConfiguration,
    n: usize,
    l: usize,
    guard: f64,
) -> Result<f64> {
    check_level(vs, n)?;
    let fs = FieldScales::new(&vs.scale(), cfg)?;
    if fs.hw_y == 0.0 {
        return Ok(0.0);
    }
    let fs = scales(vs, cfg)?;
    let (hw, lf) = (fs.hw_c, l as f64);
    let mut sum = 0.0;
    for m in (1..=vs.n_max()).filter(|&m| m != n) {
        let e_nm = vs.energy(n) - vs.energy(m);
        let g = fs.coupling * vs.z(n, m);
        guard_check(n, l, m, e_nm - hw, g * (lf + 1.0).sqrt(), guard)?;
        guard_check(n, l, m, e_nm + hw, g * lf.sqrt(), guard)?;
        let z = vs.z(n, m);
        sum += z * z * (1.0 + hw * lf / (e_nm + hw) + hw * (lf + 1.0) / (e_nm - hw));
    }
    Ok(fs.diamagnetic * sum)
}

/// `Δ_l = (ΔE_{2,l} - ΔE_{1,l})/h` in GHz.
pub fn light_shift_ghz(vs: &VerticalSpectrum, cfg: &FieldConfiguration, l: usize) -> Result<f64> {
    let d = perturbative_shift(vs, cfg, 2, l)? - perturbative_shift(vs, cfg, 1, l)?;
    Ok(vs.scale().energy_to_ghz(d))
}

/// `Δ_0` in GHz from its closed `l = 0` form, written with `E_{n'n} = E_{n'} - E_n`.
pub fn lamb_shift_ghz(vs: &VerticalSpectrum, cfg: &FieldConfiguration) -> Result<f64> {
    if vs.n_max() < 2 {
        return Err(invalid("n_max", "lamb shift needs n = 1, 2"));
    }
    let fs = FieldScales::new(&vs.scale(), cfg)?;
    let hw = fs.hw_c;
    let part = |k: usize| -> f64 {
        (1..=vs.n_max())
            .filter(|&m| m != k)
            .map(|m| {
                let e = vs.energy(m) - vs.energy(k);
                vs.z(k, m).powi(2) * e / (e + hw)
            })
            .sum()
    };
    Ok(vs.scale().energy_to_ghz(fs.diamagnetic * (part(2) - part(1))))
}

/// Shift of the `|1,l> -> |2,l>` transition (GHz) from full diagonalisation,
/// relative to the same basis at `B_y = 0`.
pub fn full_shift_ghz(
    vs: &VerticalSpectrum,
    cfg: &FieldConfiguration,
    basis: &ProductBasis,
    l: usize,
) -> Result<f64> {
    let on = solve_coupled(vs, cfg, basis, DiamagneticMode::Full)?;
    let gap = |s: &crate::coupled::CoupledSpectrum| {
        s.eigenvalues()[s.find_state((2, l))] - s.eigenvalues()[s.find_state((1, l))]
    };
    let bare = vs.energy(2) - vs.energy(1);
    Ok(vs.scale().energy_to_ghz(gap(&on) - bare))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetheCheck {
    /// First-order diamagnetic plus second-order paramagnetic shift.
    pub raw: f64,
    /// Post-cancellation form.
    pub reduced: f64,
    /// `(raw - reduced)` relative to the first-order diamagnetic term.
    pub residual: f64,
    /// The `|z_nn|²` part of the first-order term.
    pub diagonal_part: f64,
}

pub fn bethe_cancellation_check(
    vs: &VerticalSpectrum,
    cfg: &FieldConfiguration,
    n: usize,
    l: usize,
) -> Result<BetheCheck> {
    let reduced = perturbative_shift(vs, cfg, n, l)?;
    let fs = scales(vs, cfg)?;
    let (hw, lf) = (fs.hw_c, l as f64);
    let first = fs.diamagnetic * vs.z2(n, n);
    // paramagnetic part: sum over n' and l' = l ± 1, n' = n included
    let mut second = 0.0;
    for m in 1..=vs.n_max() {
        let e_nm = vs.energy(n) - vs.energy(m);
        let z = vs.z(n, m);
        let c2 = fs.coupling * fs.coupling * z * z;
        second += c2 * (lf + 1.0) / (e_nm - hw);
        if l > 0 {
            second += c2 * lf / (e_nm + hw);
        }
    }
    let raw = first + second;
    let residual = if first == 0.0 { 0.0 } else { (raw - reduced).abs() / first.abs() };
    Ok(BetheCheck { raw, reduced, residual, diagonal_part: fs.diamagnetic * vs.z(n, n).powi(2) })
}

/// First-order admixture of `|n, l>`: amplitudes on `|n', l±1>`.
pub fn admixed_state(
    vs: &VerticalSpectrum,
    cfg: &FieldConfiguration,
    n: usize,
    l: usize,
) -> Result<Vec<(Level, f64)>> {
    admixed_state_with(vs, cfg, n, l, DEFAULT_GUARD)
}

pub fn admixed_state_with(
    vs: &VerticalSpectrum,
    cfg: &FieldConfiguration,
    n: usize,
    l: usize,
    guard: f64,
) -> Result<Vec<(Level, f64)>> {
    check_level(vs, n)?;
    let fs = scales(vs, cfg)?;
    let (hw, lf) = (fs.hw_c, l as f64);
    let mut out = Vec::new();
    for m in 1..=vs.n_max() {
        let e_nm = vs.energy(n) - vs.energy(m);
        let g = fs.coupling * vs.z(n, m);
        let up = g * (lf + 1.0).sqrt();
        guard_check(n, l, m, e_nm - hw, up, guard)?;
        out.push(((m, l + 1), up / (e_nm - hw)));
        if l > 0 {
            let down = g * lf.sqrt();
            guard_check(n, l, m, e_nm + hw, down, guard)?;
            out.push(((m, l - 1), down / (e_nm + hw)));
        }
    }
    Ok(out)
}

/// Normalised admixed state embedded in `basis`; admixtures outside the
/// basis are dropped.
pub fn admixed_vector(
    vs: &VerticalSpectrum,
    cfg: &FieldConfiguration,
    basis: &ProductBasis,
    n: usize,
    l: usize,
) -> Result<DVector<f64>> {
    let mut v = DVector::zeros(basis.size());
    v[basis.index((n, l))] = 1.0;
    for (lv, a) in admixed_state(vs, cfg, n, l)? {
        if basis.contains(lv) {
            v[basis.index(lv)] += a;
        }
    }
    Ok(v.normalize())
}

/// Transition moments from `|1,0>` to the `(2,1)/(3,0)` doublet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterferenceMoments {
    /// Leading-order moment to the upper dressed state, `r_B`.
    pub z_plus: f64,
    /// Leading-order moment to the lower dressed state, `r_B`.
    pub z_minus: f64,
    /// Relative sign of `|2,1>` in the upper dressed state (sign of `g_23`).
    pub sign: f64,
    /// `⟨upper|z|ground⟩` from full diagonalisation.
    pub exact_upper: f64,
    /// `⟨lower|z|ground⟩` from full diagonalisation.
    pub exact_lower: f64,
    /// Eigen-indices of upper and lower doublet states and the ground state.
    pub upper: usize,
    pub lower: usize,
    pub ground: usize,
}

/// Leading-order `(z₊, z₋)` in `r_B`.
///
/// `z_± = (z₂₂ z₂₁ / (√2 l_B)) (B_y/B_z) ± s z₃₁`, where the resonant doublet
/// is `(|3,0> ± s|2,1>)/√2` and `s` is the sign of `g_23`, so `+` always
/// labels the upper branch regardless of wavefunction phases.
pub fn leading_order_moments(vs: &VerticalSpectrum, cfg: &FieldConfiguration) -> Result<(f64, f64, f64)> {
    if vs.n_max() < 3 {
        return Err(invalid("n_max", "interference needs n = 1..3"));
    }
    let fs = scales(vs, cfg)?;
    let r_over_lb = (fs.hw_c / 2.0).sqrt();
    let a = vs.z(2, 2) * vs.z(2, 1) * r_over_lb / std::f64::consts::SQRT_2 * fs.hw_y / fs.hw_c;
    let s = if vs.z(2, 3) < 0.0 { -1.0 } else { 1.0 };
    let z31 = vs.z(3, 1);
    // ⟨±|z|1,0⟩ ∝ (s a ± z31)·s; the overall sign is irrelevant
    Ok((a + s * z31, a - s * z31, s))
}

/// `B_y` (T) where the leading-order `z₊` vanishes, from raw inputs:
/// `z22` in `r_B`, `ratio = |z₃₁/z₂₁|`, `bohr_radius` in m.
pub fn leading_order_zero(z22: f64, ratio: f64, b_z: f64, bohr_radius: f64) -> Result<f64> {
    if !(b_z > 0.0) {
        return Err(Error::DegenerateField("interference zero"));
    }
    if !(z22 > 0.0 && ratio >= 0.0 && bohr_radius > 0.0) {
        return Err(invalid("z22", "need z22 > 0, ratio >= 0, bohr_radius > 0"));
    }
    let l_b = (HBAR / (ELEMENTARY_CHARGE * b_z)).sqrt();
    Ok(std::f64::consts::SQRT_2 * ratio * b_z * l_b / (z22 * bohr_radius))
}

pub fn interference_moments(
    vs: &VerticalSpectrum,
    cfg: &FieldConfiguration,
    basis: &ProductBasis,
) -> Result<InterferenceMoments> {
    let (z_plus, z_minus, sign) = leading_order_moments(vs, cfg)?;
    let spec = solve_coupled(vs, cfg, basis, DiamagneticMode::Full)?;
    let (lower, upper) = pair_states(&spec, (2, 1), (3, 0));
    let ground = spec.find_state((1, 0));
    Ok(InterferenceMoments {
        z_plus,
        z_minus,
        sign,
        exact_upper: spec.z_moment(upper, ground),
        exact_lower: spec.z_moment(lower, ground),
        upper,
        lower,
        ground,
    })
}

/// One point of a doublet scan over `B_y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoubletPoint {
    /// T
    pub b_y: f64,
    /// Transition frequencies from the ground state, GHz.
    pub upper_ghz: f64,
    pub lower_ghz: f64,
    /// `|⟨±|z|ground⟩|²`, `r_B²`.
    pub upper_moment_sq: f64,
    pub lower_moment_sq: f64,
}

/// Follows the `(2,1)/(3,0)` doublet through `b_y_values` by eigenvector
/// overlap and records both transition moments from the ground state.
pub fn doublet_scan(
    vs: &VerticalSpectrum,
    cfg: &FieldConfiguration,
    basis: &ProductBasis,
    b_y_values: &[f64],
) -> Result<Vec<DoubletPoint>> {
    if b_y_values.is_empty() {
        return Err(invalid("b_y", "empty scan"));
    }
    let cfgs: Vec<FieldConfiguration> = b_y_values.iter().map(|&b| cfg.with_b_y(b)).collect::<Result<_>>()?;
    let spectra: Vec<_> = crate::coupled::sweep(vs, &cfgs, basis, DiamagneticMode::Full)
        .into_iter()
        .collect::<Result<_>>()?;
    let (lo, hi) = pair_states(&spectra[0], (2, 1), (3, 0));
    let paths = crate::coupled::track_branches(&spectra, &[hi, lo])?;
    Ok(spectra
        .iter()
        .enumerate()
        .map(|(p, s)| {
            let g = s.find_state((1, 0));
            let (u, l) = (paths[0][p], paths[1][p]);
            let (u, l) = if s.eigenvalues()[u] >= s.eigenvalues()[l] { (u, l) } else { (l, u) };
            DoubletPoint {
                b_y: b_y_values[p],
                upper_ghz: s.energy_ghz(u) - s.energy_ghz(g),
                lower_ghz: s.energy_ghz(l) - s.energy_ghz(g),
                upper_moment_sq: s.z_moment(u, g).powi(2),
                lower_moment_sq: s.z_moment(l, g).powi(2),
            }
        })
        .collect())
}

/// `B_y` of the upper-branch extinction: the first minimum of
/// `|z₊|²` after its maximum, refined by a parabola.
pub fn upper_extinction(points: &[DoubletPoint]) -> Option<f64> {
    let y: Vec<f64> = points.iter().map(|p| p.upper_moment_sq).collect();
    let x: Vec<f64> = points.iter().map(|p| p.b_y).collect();
    let peak = (1..y.len().saturating_sub(1)).find(|&i| y[i] >= y[i - 1] && y[i] > y[i + 1])?;
    let min = (peak + 1..y.len().saturating_sub(1)).find(|&i| y[i] <= y[i - 1] && y[i] < y[i + 1])?;
    Some(crate::spectroscopy::peak_position(&x[min - 1..=min + 1], &[-y[min - 1], -y[min], -y[min + 1]]))
}

/// Truncation residual of state `n` (for comparison with [`BetheCheck::residual`]).
pub fn truncation_residual(vs: &VerticalSpectrum, n: usize) -> f64 {
    truncation_report(vs)[n - 1]
}
