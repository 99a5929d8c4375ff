//! Ripplon-limited relaxation: two-ripplon emission rates, the resonant
//! ripplon wavenumber, the SCBA elastic rate and a strong-coupling summary.
//!
//! Rates use the collinear (`q ≈ -q'`) closed form
//!
//! ```text
//! Γ = m V₀ / (4π l_B² ρ² ħ²) · (∂υ/∂z)_ii (∂υ/∂z)_ff · q̃³ / (ω_q̃² |∂ω/∂q|_q̃)
//! ```
//!
//! with `2ħω_q̃` equal to the released energy.

use serde::Serialize;

use crate::coupled::Level;
use crate::error::{invalid, Error, Result};
use crate::jcm::coupling_constant;
use crate::units::constants::{BOLTZMANN, ELECTRON_MASS, GHZ, HBAR, PLANCK};
use crate::units::{FieldConfiguration, MaterialProperties};
use crate::vertical::VerticalSpectrum;

/// Typical one-ripplon elastic rate, 1/s.
pub const DEFAULT_NU_0: f64 = 1e6;

/// Capillary-wave bath with `ω_q = √(α q³ / ρ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RipplonBath {
    /// N/m
    pub surface_tension: f64,
    /// kg/m³
    pub mass_density: f64,
    /// K
    pub temperature: f64,
}

impl RipplonBath {
    pub fn new(surface_tension: f64, mass_density: f64, temperature: f64) -> Result<Self> {
        if !(surface_tension > 0.0) {
            return Err(invalid("surface_tension", "must be > 0"));
        }
        if !(mass_density > 0.0) {
            return Err(invalid("mass_density", "must be > 0"));
        }
        if !(temperature >= 0.0) {
            return Err(invalid("temperature", "must be >= 0"));
        }
        Ok(Self { surface_tension, mass_density, temperature })
    }

    pub fn for_material(material: &MaterialProperties, temperature: f64) -> Result<Self> {
        Self::new(material.surface_tension(), material.mass_density(), temperature)
    }

    /// rad/s for `q` in 1/m.
    pub fn omega(&self, q: f64) -> f64 {
        (self.surface_tension * q.powi(3) / self.mass_density).sqrt()
    }

    /// `∂ω/∂q = (3/2) ω_q / q`, m/s.
    pub fn group_velocity(&self, q: f64) -> f64 {
        1.5 * self.omega(q) / q
    }

    /// Bose occupation of mode `q`.
    pub fn occupation(&self, q: f64) -> f64 {
        if self.temperature == 0.0 {
            return 0.0;
        }
        1.0 / ((HBAR * self.omega(q) / (BOLTZMANN * self.temperature)).exp_m1())
    }
}

/// `q̃` (1/m) with `2ħω_q̃ = gap` (J).
pub fn resonant_wavenumber(bath: &RipplonBath, gap: f64) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(invalid("energy_gap", "must be > 0"));
    }
    let w = gap / (2.0 * HBAR);
    Ok((bath.mass_density / bath.surface_tension).cbrt() * w.powf(2.0 / 3.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RateOptions {
    /// Include stimulated emission `(N_q̃ + 1)²`.
    pub thermal: bool,
}

/// Two-ripplon emission rate (1/s) for `from -> to`, both uncoupled
/// `|n, l>` states at the fields of `cfg`.
pub fn two_ripplon_rate(
    vs: &VerticalSpectrum,
    bath: &RipplonBath,
    cfg: &FieldConfiguration,
    from: Level,
    to: Level,
) -> Result<f64> {
    two_ripplon_rate_with(vs, bath, cfg, from, to, RateOptions::default())
}

pub fn two_ripplon_rate_with(
    vs: &VerticalSpectrum,
    bath: &RipplonBath,
    cfg: &FieldConfiguration,
    from: Level,
    to: Level,
    opts: RateOptions,
) -> Result<f64> {
    for (n, _) in [from, to] {
        if n == 0 || n > vs.n_max() {
            return Err(invalid("n", format!("state {n} outside 1..={}", vs.n_max())));
        }
    }
    let scale = vs.scale();
    let hw = scale.cyclotron_energy(cfg.b_z());
    let level = |(n, l): Level| vs.energy(n) + hw * l as f64;
    let gap = scale.energy_to_joule(level(from) - level(to));
    if !(gap > 0.0) {
        return Err(Error::NotDownward(format!(
            "({},{}) -> ({},{}) releases {gap:.3e} J",
            from.0, from.1, to.0, to.1
        )));
    }
    let lb = cfg.magnetic_length()?;
    let q = resonant_wavenumber(bath, gap)?;
    let w = bath.omega(q);
    let dv_from = scale.force_to_newton(vs.dvdz(from.0));
    let dv_to = scale.force_to_newton(vs.dvdz(to.0));
    let v0 = vs.material().barrier_height();
    let rho = bath.mass_density;
    let prefactor = ELECTRON_MASS * v0 / (4.0 * std::f64::consts::PI * lb * lb * rho * rho * HBAR * HBAR);
    let mut rate = prefactor * dv_from * dv_to * q.powi(3) / (w * w * bath.group_velocity(q));
    if opts.thermal {
        rate *= (bath.occupation(q) + 1.0).powi(2);
    }
    Ok(rate)
}

/// `ν_B = √(2 ω_c ν₀ / π)`, 1/s.
pub fn scba_elastic_rate(nu_0: f64, cfg: &FieldConfiguration) -> Result<f64> {
    if !(nu_0 >= 0.0) {
        return Err(invalid("nu_0", "must be >= 0"));
    }
    if cfg.b_z() <= 0.0 {
        return Err(Error::DegenerateField("SCBA elastic rate"));
    }
    Ok((2.0 * cfg.omega_c() * nu_0 / std::f64::consts::PI).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayEntry {
    pub from: Level,
    pub to: Level,
    /// 1/s
    pub rate: f64,
    /// 1/m
    pub resonant_wavenumber: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongCouplingReport {
    /// Resonant pair `(n, l+1)`, `(n', l)`.
    pub pair: (Level, Level),
    /// `g √(l+1) / h`, GHz.
    pub g_over_h_ghz: f64,
    pub decays: Vec<DecayEntry>,
    /// 1/s
    pub nu_b: f64,
    /// `g √(l+1) / (ħ Γ_max)`.
    pub ratio: f64,
    /// `(∂υ/∂z)_nn` for the states involved, N.
    pub dvdz: Vec<(usize, f64)>,
}

/// Figure-of-merit summary for the `(n, l+1)/(n', l)` resonance: coupling
/// against the decay of each member into `|1,0>` and the elastic rate.
pub fn strong_coupling_report(
    vs: &VerticalSpectrum,
    bath: &RipplonBath,
    cfg: &FieldConfiguration,
    n: usize,
    n_prime: usize,
    l: usize,
    nu_0: f64,
) -> Result<StrongCouplingReport> {
    let g = coupling_constant(vs, cfg, n, n_prime)?.abs() * ((l + 1) as f64).sqrt();
    let g_joule = vs.scale().energy_to_joule(g);
    let pair = ((n, l + 1), (n_prime, l));
    let mut decays = Vec::new();
    for state in [pair.0, pair.1] {
        if state == (1, 0) {
            continue;
        }
        let rate = two_ripplon_rate(vs, bath, cfg, state, (1, 0))?;
        let hw = vs.scale().cyclotron_energy(cfg.b_z());
        let gap = vs.energy(state.0) + hw * state.1 as f64 - vs.energy(1);
        let q = resonant_wavenumber(bath, vs.scale().energy_to_joule(gap))?;
        decays.push(DecayEntry { from: state, to: (1, 0), rate, resonant_wavenumber: q });
    }
    let max_rate = decays.iter().map(|d| d.rate).fold(0.0, f64::max);
    let ratio = if max_rate > 0.0 { g_joule / HBAR / max_rate } else { f64::INFINITY };
    let mut states: Vec<usize> = vec![1, n, n_prime];
    states.sort_unstable();
    states.dedup();
    Ok(StrongCouplingReport {
        pair,
        g_over_h_ghz: g_joule / PLANCK / GHZ,
        decays,
        nu_b: scba_elastic_rate(nu_0, cfg)?,
        ratio,
        dvdz: states.into_iter().map(|k| (k, vs.scale().force_to_newton(vs.dvdz(k)))).collect(),
    })
}
