//! Physical constants, helium isotope properties and field configurations.
//!
//! Everything downstream works in a scaled unit system: energies in units of
//! the effective Rydberg energy `R_e` and lengths in units of the effective
//! Bohr radius `r_B`. In these units the vertical Hamiltonian reads
//! `-d²/dz² - 2/z + f z` with `f = e E_perp r_B / R_e`, because
//! `ħ²/(2 m_e r_B²) = R_e` and `Λ / r_B = 2 R_e`.
//!
//! All conversions between the scaled system and lab units (GHz, V/cm, T, K)
//! live in [`Scale`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// CODATA 2018 values, SI units.
pub mod constants {
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const PLANCK: f64 = 6.626_070_15e-34;
    pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
    pub const BOLTZMANN: f64 = 1.380_649e-23;
    /// One milli-electronvolt in joules.
    pub const MEV: f64 = 1.0e-3 * ELEMENTARY_CHARGE;
    /// Volts per centimetre to volts per metre.
    pub const V_PER_CM: f64 = 100.0;
    pub const GHZ: f64 = 1.0e9;
}

use constants::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Isotope {
    He3,
    He4,
}

impl Isotope {
    /// Rydberg energy quoted for the isotope, meV.
    pub fn quoted_rydberg_mev(self) -> f64 {
        match self {
            Isotope::He4 => 0.63,
            Isotope::He3 => 0.36,
        }
    }

    /// Bohr radius quoted for the isotope, nm.
    pub fn quoted_bohr_radius_nm(self) -> f64 {
        match self {
            Isotope::He4 => 7.8,
            Isotope::He3 => 10.3,
        }
    }

    /// Bulk dielectric constant of the liquid near 0.3 K.
    pub fn literature_epsilon(self) -> f64 {
        match self {
            Isotope::He4 => 1.0572,
            Isotope::He3 => 1.0427,
        }
    }

    /// Surface tension (N/m) and mass density (kg/m³) near 0.3 K.
    pub fn default_surface(self) -> (f64, f64) {
        match self {
            Isotope::He4 => (3.78e-4, 145.0),
            Isotope::He3 => (1.55e-4, 82.0),
        }
    }

    /// Height of the repulsive barrier at the liquid surface, J.
    pub fn default_barrier_height(self) -> f64 {
        1.0 * ELEMENTARY_CHARGE
    }
}

impl std::fmt::Display for Isotope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Isotope::He3 => f.write_str("He3"),
            Isotope::He4 => f.write_str("He4"),
        }
    }
}

/// Image-charge strength `Λ = (e²/16πε₀)(ε−1)/(ε+1)` for dielectric constant `epsilon`.
pub fn lambda_from_epsilon(epsilon: f64) -> f64 {
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (16.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY)
        * (epsilon - 1.0)
        / (epsilon + 1.0)
}

/// Inverse of [`lambda_from_epsilon`].
pub fn epsilon_from_lambda(lambda: f64) -> f64 {
    let x = lambda * 16.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY
        / (ELEMENTARY_CHARGE * ELEMENTARY_CHARGE);
    (1.0 + x) / (1.0 - x)
}

/// Isotope-specific constants of the electron-on-helium problem (SI units).
///
/// `R_e` and `r_B` are always derived from `Λ`, and `Λ` always agrees with
/// `ε` through the image-charge relation, so the three cannot drift apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialProperties {
    isotope: Isotope,
    epsilon: f64,
    lambda_coupling: f64,
    rydberg_energy: f64,
    bohr_radius: f64,
    barrier_height: f64,
    surface_tension: f64,
    mass_density: f64,
}

impl MaterialProperties {
    /// Builds the material from the image-charge strength `Λ` (J·m).
    pub fn from_lambda(
        isotope: Isotope,
        lambda: f64,
        barrier_height: f64,
        surface_tension: f64,
        mass_density: f64,
    ) -> Result<Self> {
        positive("lambda_coupling", lambda)?;
        positive("barrier_height", barrier_height)?;
        positive("surface_tension", surface_tension)?;
        positive("mass_density", mass_density)?;
        let epsilon = epsilon_from_lambda(lambda);
        if !(epsilon.is_finite() && epsilon > 1.0) {
            return Err(invalid("lambda_coupling", "implies a dielectric constant outside (1, inf)"));
        }
        Ok(Self {
            isotope,
            epsilon,
            lambda_coupling: lambda,
            rydberg_energy: ELECTRON_MASS * lambda * lambda / (2.0 * HBAR * HBAR),
            bohr_radius: HBAR * HBAR / (lambda * ELECTRON_MASS),
            barrier_height,
            surface_tension,
            mass_density,
        })
    }

    /// Calibrates `Λ` so that the effective Rydberg energy equals `rydberg_energy` (J).
    pub fn from_rydberg(
        isotope: Isotope,
        rydberg_energy: f64,
        barrier_height: f64,
        surface_tension: f64,
        mass_density: f64,
    ) -> Result<Self> {
        positive("rydberg_energy", rydberg_energy)?;
        let lambda = (2.0 * HBAR * HBAR * rydberg_energy / ELECTRON_MASS).sqrt();
        Self::from_lambda(isotope, lambda, barrier_height, surface_tension, mass_density)
    }

    pub fn from_epsilon(
        isotope: Isotope,
        epsilon: f64,
        barrier_height: f64,
        surface_tension: f64,
        mass_density: f64,
    ) -> Result<Self> {
        if !(epsilon > 1.0) {
            return Err(invalid("epsilon", format!("must exceed 1, got {epsilon}")));
        }
        Self::from_lambda(
            isotope,
            lambda_from_epsilon(epsilon),
            barrier_height,
            surface_tension,
            mass_density,
        )
    }

    /// Default material for an isotope: quoted `R_e`, literature `α`, `ρ`, `V₀`.
    pub fn default_for(isotope: Isotope) -> Self {
        let (alpha, rho) = isotope.default_surface();
        material_for(isotope, isotope.default_barrier_height(), alpha, rho)
            .expect("built-in constants are valid")
    }

    pub fn isotope(&self) -> Isotope {
        self.isotope
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    /// `Λ`, J·m.
    pub fn lambda_coupling(&self) -> f64 {
        self.lambda_coupling
    }
    /// `R_e`, J.
    pub fn rydberg_energy(&self) -> f64 {
        self.rydberg_energy
    }
    /// `r_B`, m.
    pub fn bohr_radius(&self) -> f64 {
        self.bohr_radius
    }
    /// `V₀`, J.
    pub fn barrier_height(&self) -> f64 {
        self.barrier_height
    }
    /// `α`, N/m.
    pub fn surface_tension(&self) -> f64 {
        self.surface_tension
    }
    /// `ρ`, kg/m³.
    pub fn mass_density(&self) -> f64 {
        self.mass_density
    }

    pub fn with_barrier_height(mut self, v0: f64) -> Result<Self> {
        positive("barrier_height", v0)?;
        self.barrier_height = v0;
        Ok(self)
    }

    pub fn scale(&self) -> Scale {
        Scale { energy: self.rydberg_energy, length: self.bohr_radius }
    }

    /// Compares `Λ` against the value implied by the literature dielectric constant.
    pub fn lambda_consistency(&self) -> LambdaCheck {
        let from_eps = lambda_from_epsilon(self.isotope.literature_epsilon());
        let rel = (self.lambda_coupling - from_eps).abs() / from_eps;
        LambdaCheck {
            lambda_in_use: self.lambda_coupling,
            lambda_from_literature_epsilon: from_eps,
            relative_difference: rel,
            flagged: rel > 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaCheck {
    pub lambda_in_use: f64,
    pub lambda_from_literature_epsilon: f64,
    pub relative_difference: f64,
    /// Set when the two routes disagree by more than 1%.
    pub flagged: bool,
}

/// Material with `Λ` calibrated to the quoted Rydberg energy of the isotope.
pub fn material_for(
    isotope: Isotope,
    barrier_height: f64,
    surface_tension: f64,
    mass_density: f64,
) -> Result<MaterialProperties> {
    MaterialProperties::from_rydberg(
        isotope,
        isotope.quoted_rydberg_mev() * MEV,
        barrier_height,
        surface_tension,
        mass_density,
    )
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and >= 0, got {v}")))
    }
}

/// The experiment knobs, SI units: `e_perp` in V/m, fields in T, temperature in K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfiguration {
    e_perp: f64,
    b_z: f64,
    b_y: f64,
    temperature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedFrequencies {
    /// rad/s
    pub omega_c: f64,
    /// rad/s
    pub omega_y: f64,
    /// m
    pub magnetic_length: f64,
}

impl FieldConfiguration {
    pub fn new(e_perp: f64, b_z: f64, b_y: f64, temperature: f64) -> Result<Self> {
        non_negative("e_perp", e_perp)?;
        non_negative("b_z", b_z)?;
        non_negative("b_y", b_y)?;
        positive("temperature", temperature)?;
        Ok(Self { e_perp, b_z, b_y, temperature })
    }

    /// Lab units: `e_perp` in V/cm.
    pub fn lab(e_perp_vcm: f64, b_z: f64, b_y: f64, temperature: f64) -> Result<Self> {
        Self::new(e_perp_vcm * V_PER_CM, b_z, b_y, temperature)
    }

    pub fn e_perp(&self) -> f64 {
        self.e_perp
    }
    pub fn e_perp_vcm(&self) -> f64 {
        self.e_perp / V_PER_CM
    }
    pub fn b_z(&self) -> f64 {
        self.b_z
    }
    pub fn b_y(&self) -> f64 {
        self.b_y
    }
    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn with_e_perp_vcm(self, e_perp_vcm: f64) -> Result<Self> {
        Self::lab(e_perp_vcm, self.b_z, self.b_y, self.temperature)
    }
    pub fn with_b_z(self, b_z: f64) -> Result<Self> {
        Self::new(self.e_perp, b_z, self.b_y, self.temperature)
    }
    pub fn with_b_y(self, b_y: f64) -> Result<Self> {
        Self::new(self.e_perp, self.b_z, b_y, self.temperature)
    }
    pub fn with_temperature(self, t: f64) -> Result<Self> {
        Self::new(self.e_perp, self.b_z, self.b_y, t)
    }

    pub fn omega_c(&self) -> f64 {
        ELEMENTARY_CHARGE * self.b_z / ELECTRON_MASS
    }

    pub fn omega_y(&self) -> f64 {
        ELEMENTARY_CHARGE * self.b_y / ELECTRON_MASS
    }

    /// `l_B = √(ħ/eB_z)`.
    pub fn magnetic_length(&self) -> Result<f64> {
        if self.b_z > 0.0 {
            Ok((HBAR / (ELEMENTARY_CHARGE * self.b_z)).sqrt())
        } else {
            Err(Error::DegenerateField("magnetic length"))
        }
    }

    pub fn derived_frequencies(&self) -> Result<DerivedFrequencies> {
        Ok(DerivedFrequencies {
            omega_c: self.omega_c(),
            omega_y: self.omega_y(),
            magnetic_length: self.magnetic_length()?,
        })
    }
}

/// Conversion between lab units and the scaled `(R_e, r_B)` system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scale {
    /// `R_e`, J.
    pub energy: f64,
    /// `r_B`, m.
    pub length: f64,
}

impl Scale {
    pub fn energy_to_ghz(&self, e: f64) -> f64 {
        e * self.energy / PLANCK / GHZ
    }
    pub fn ghz_to_energy(&self, f: f64) -> f64 {
        f * GHZ * PLANCK / self.energy
    }
    pub fn energy_to_joule(&self, e: f64) -> f64 {
        e * self.energy
    }
    pub fn length_to_m(&self, z: f64) -> f64 {
        z * self.length
    }
    /// Scaled Stark force `f = e E r_B / R_e` for `e_perp` in V/m.
    pub fn stark_force(&self, e_perp: f64) -> f64 {
        ELEMENTARY_CHARGE * e_perp * self.length / self.energy
    }
    /// `ħω` in units of `R_e` for a cyclotron-type frequency of field `b` (T).
    pub fn cyclotron_energy(&self, b: f64) -> f64 {
        HBAR * ELEMENTARY_CHARGE * b / ELECTRON_MASS / self.energy
    }
    /// Scaled derivative (R_e / r_B) to N.
    pub fn force_to_newton(&self, f: f64) -> f64 {
        f * self.energy / self.length
    }
    /// GHz per (V/cm) for a scaled energy slope per scaled field unit.
    pub fn stark_slope_ghz_per_vcm(&self, de_df: f64) -> f64 {
        // dE/dE_perp = (dE~/df) * (R_e) * (e r_B / R_e) = e r_B dE~/df
        de_df * ELEMENTARY_CHARGE * self.length * V_PER_CM / PLANCK / GHZ
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quoted_rydberg_and_bohr_radius() {
        let he4 = MaterialProperties::default_for(Isotope::He4);
        assert_relative_eq!(he4.rydberg_energy() / MEV, 0.63, max_relative = 1e-12);
        assert_relative_eq!(he4.bohr_radius() * 1e9, 7.8, max_relative = 0.01);

        let he3 = MaterialProperties::default_for(Isotope::He3);
        assert_relative_eq!(he3.rydberg_energy() / MEV, 0.36, max_relative = 1e-12);
        assert_relative_eq!(he3.bohr_radius() * 1e9, 10.3, max_relative = 0.01);
    }

    #[test]
    fn rydberg_and_bohr_are_derived_from_lambda() {
        for iso in [Isotope::He3, Isotope::He4] {
            let m = MaterialProperties::default_for(iso);
            let l = m.lambda_coupling();
            assert_relative_eq!(
                m.rydberg_energy(),
                ELECTRON_MASS * l * l / (2.0 * HBAR * HBAR),
                max_relative = 1e-15
            );
            assert_relative_eq!(m.bohr_radius(), HBAR * HBAR / (l * ELECTRON_MASS), max_relative = 1e-15);
            assert_relative_eq!(2.0 * m.rydberg_energy() * m.bohr_radius(), l, max_relative = 1e-14);
            assert_relative_eq!(lambda_from_epsilon(m.epsilon()), l, max_relative = 1e-12);
            assert!(m.epsilon() > 1.0);
        }
    }

    #[test]
    fn lambda_round_trip_against_literature_epsilon() {
        // He4 agrees within the quoted precision; He3 is off by a bit more than 1%.
        let he4 = MaterialProperties::default_for(Isotope::He4).lambda_consistency();
        assert!(he4.relative_difference < 0.03);
        let he3 = MaterialProperties::default_for(Isotope::He3).lambda_consistency();
        assert!(he3.flagged, "{he3:?}");
        assert!(he3.relative_difference < 0.02);
    }

    #[test]
    fn from_epsilon_matches_hydrogen_scaling() {
        // R_e = Ry * (Λ / (e²/4πε₀))², Ry = 13.605693 eV
        let m = MaterialProperties::from_epsilon(Isotope::He4, 1.0572, 1.6e-19, 3.78e-4, 145.0).unwrap();
        let factor = (1.0572 - 1.0) / (1.0572 + 1.0) / 4.0;
        let expected = 13.605_693_122_994 * factor * factor * 1e3;
        assert_relative_eq!(m.rydberg_energy() / MEV, expected, max_relative = 1e-8);
    }

    #[test]
    fn rejects_non_positive_material() {
        assert!(MaterialProperties::from_rydberg(Isotope::He3, -1.0, 1.0, 1.0, 1.0).is_err());
        assert!(MaterialProperties::from_epsilon(Isotope::He3, 0.9, 1.0, 1.0, 1.0).is_err());
        assert!(material_for(Isotope::He3, 1.0e-19, 0.0, 82.0).is_err());
    }

    #[test]
    fn cyclotron_frequency_per_tesla() {
        let cfg = FieldConfiguration::lab(0.0, 1.0, 0.0, 0.3).unwrap();
        let f = cfg.omega_c() / (2.0 * std::f64::consts::PI) / GHZ;
        assert_relative_eq!(f, 27.992_489_8, max_relative = 1e-8);
    }

    #[test]
    fn cyclotron_gap_in_kelvin() {
        let cfg = FieldConfiguration::lab(0.0, 0.584, 0.0, 0.33).unwrap();
        let t = HBAR * cfg.omega_c() / BOLTZMANN;
        assert!((t - 0.78).abs() < 0.01, "{t}");
    }

    #[test]
    fn zero_in_plane_field() {
        let cfg = FieldConfiguration::lab(10.0, 1.0, 0.0, 0.3).unwrap();
        assert_eq!(cfg.omega_y(), 0.0);
        let d = cfg.derived_frequencies().unwrap();
        assert_relative_eq!(d.magnetic_length, 25.656e-9, max_relative = 1e-4);
    }

    #[test]
    fn magnetic_length_needs_perpendicular_field() {
        let cfg = FieldConfiguration::lab(10.0, 0.0, 0.5, 0.3).unwrap();
        assert_eq!(cfg.magnetic_length(), Err(Error::DegenerateField("magnetic length")));
        assert!(cfg.derived_frequencies().is_err());
    }

    #[test]
    fn field_configuration_invariants() {
        assert!(FieldConfiguration::new(-1.0, 1.0, 0.0, 0.3).is_err());
        assert!(FieldConfiguration::new(0.0, -1.0, 0.0, 0.3).is_err());
        assert!(FieldConfiguration::new(0.0, 1.0, -0.1, 0.3).is_err());
        assert!(FieldConfiguration::new(0.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn scale_identities() {
        let m = MaterialProperties::default_for(Isotope::He3);
        let s = m.scale();
        // ħ²/(2 m r_B²) = R_e
        assert_relative_eq!(
            HBAR * HBAR / (2.0 * ELECTRON_MASS * s.length * s.length),
            s.energy,
            max_relative = 1e-14
        );
        assert_relative_eq!(s.ghz_to_energy(s.energy_to_ghz(0.37)), 0.37, max_relative = 1e-14);
    }
}
