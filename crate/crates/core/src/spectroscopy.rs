//! Stark-spectroscopy forward model: transition catalogs, broadening, line
//! profiles over E⊥ and absorption maps over a swept magnetic field.
//!
//! Lines are Gaussian in E⊥ with area `weight · |⟨k|z|i⟩|²` (in `r_B²`), so
//! integrated map intensity equals the summed line strength. The MW drive is
//! z-polarised.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupled::{solve_coupled, CoupledSpectrum, DiamagneticMode, Level, ProductBasis};
use crate::error::{invalid, Error, Result};
use crate::units::constants::{BOLTZMANN, ELECTRON_MASS, V_PER_CM};
use crate::units::{FieldConfiguration, MaterialProperties};
use crate::vertical::{solve_vertical, GridSpec, VerticalSpectrum};

/// Lines weaker than this (`r_B²`, after thermal weighting) are dropped.
pub const MIN_LINE_STRENGTH: f64 = 1e-12;

/// Boltzmann weights of `|1, l>`, `l = 0..=l_cut`.
pub fn thermal_populations(cfg: &FieldConfiguration, l_cut: usize) -> Result<Vec<f64>> {
    if cfg.b_z() <= 0.0 {
        return Err(Error::DegenerateField("Landau-level populations"));
    }
    let x = crate::units::constants::HBAR * cfg.omega_c() / (BOLTZMANN * cfg.temperature());
    let raw: Vec<f64> = (0..=l_cut).map(|l| (-x * l as f64).exp()).collect();
    let z: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / z).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionLine {
    pub initial: Level,
    pub initial_index: usize,
    pub weight: f64,
    pub final_index: usize,
    /// Dominant product state of the final eigenvector and its weight.
    pub final_dominant: Level,
    pub final_purity: f64,
    pub frequency_ghz: f64,
    /// `|⟨k|z|i⟩|²`, `r_B²`.
    pub moment_sq: f64,
    /// `l_final - l_initial` of the dominant components.
    pub sideband_order: i64,
    /// d(frequency)/dE⊥, GHz per V/cm.
    pub stark_slope: f64,
    /// E⊥ at which the line was evaluated, V/cm.
    pub e_perp_vcm: f64,
}

impl TransitionLine {
    pub fn strength(&self) -> f64 {
        self.weight * self.moment_sq
    }
}

/// Lines from thermally weighted `|1,l>`-like eigenstates into every
/// eigenstate whose transition frequency lies in `[f_min, f_max]` GHz.
pub fn transition_catalog(
    spectrum: &CoupledSpectrum,
    populations: &[f64],
    band: (f64, f64),
) -> Vec<TransitionLine> {
    let scale = spectrum.scale();
    let basis = spectrum.basis();
    let e_vcm = spectrum.config().e_perp_vcm();
    let mut lines = Vec::new();
    for (l, &w) in populations.iter().enumerate() {
        if w <= 0.0 || !basis.contains((1, l)) {
            continue;
        }
        let i = spectrum.find_state((1, l));
        let ei = spectrum.eigenvalues()[i];
        let zi = spectrum.z_moment(i, i);
        for k in 0..spectrum.len() {
            if k == i {
                continue;
            }
            let f = scale.energy_to_ghz(spectrum.eigenvalues()[k] - ei);
            if f < band.0 || f > band.1 {
                continue;
            }
            let m = spectrum.z_moment(k, i);
            let moment_sq = m * m;
            if w * moment_sq < MIN_LINE_STRENGTH {
                continue;
            }
            let (dom, purity) = spectrum.dominant(k);
            let slope = scale.stark_slope_ghz_per_vcm(spectrum.z_moment(k, k) - zi);
            lines.push(TransitionLine {
                initial: (1, l),
                initial_index: i,
                weight: w,
                final_index: k,
                final_dominant: dom,
                final_purity: purity,
                frequency_ghz: f,
                moment_sq,
                sideband_order: dom.1 as i64 - l as i64,
                stark_slope: slope,
                e_perp_vcm: e_vcm,
            });
        }
    }
    lines
}

/// Inhomogeneous broadening, combined in quadrature. Widths are Gaussian
/// standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BroadeningModel {
    /// Intrinsic width, GHz.
    pub base_width_ghz: f64,
    /// Electron areal density, cm⁻².
    pub density_cm2: f64,
    /// `⟨E_f⟩ = c_f · n_s^{3/4}`, V/cm with `n_s` in cm⁻².
    pub c_f: f64,
    /// Thermal Lorentz-field smearing applies only for `b_z` below this, T.
    pub thermal_cutoff_b_z: f64,
}

impl Default for BroadeningModel {
    fn default() -> Self {
        Self { base_width_ghz: 0.2, density_cm2: 5e6, c_f: 4.3e-6, thermal_cutoff_b_z: 0.2 }
    }
}

impl BroadeningModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_width_ghz > 0.0) {
            return Err(invalid("base_width_ghz", "must be > 0"));
        }
        if !(self.density_cm2 > 0.0) {
            return Err(invalid("density_cm2", "must be > 0"));
        }
        if !(self.c_f >= 0.0) {
            return Err(invalid("c_f", "must be >= 0"));
        }
        Ok(())
    }

    /// Mean fluctuating in-plane field, V/cm.
    pub fn fluctuating_field_vcm(&self) -> f64 {
        self.c_f * self.density_cm2.powf(0.75)
    }

    /// Effective vertical field noise from many-electron drift, V/cm.
    pub fn many_electron_field_vcm(&self, cfg: &FieldConfiguration) -> f64 {
        if cfg.b_y() == 0.0 {
            return 0.0;
        }
        if cfg.b_z() == 0.0 {
            return f64::INFINITY;
        }
        cfg.b_y() * self.fluctuating_field_vcm() / cfg.b_z()
    }

    /// rms Lorentz field of thermal motion, V/cm (zero above the cutoff).
    pub fn thermal_field_vcm(&self, cfg: &FieldConfiguration) -> f64 {
        if cfg.b_z() >= self.thermal_cutoff_b_z {
            return 0.0;
        }
        (BOLTZMANN * cfg.temperature() / ELECTRON_MASS).sqrt() * cfg.b_y() / V_PER_CM
    }

    /// Total width in GHz for a line tuning at `kappa` GHz per V/cm.
    pub fn width_ghz(&self, cfg: &FieldConfiguration, kappa: f64) -> f64 {
        let a = self.base_width_ghz;
        let b = kappa.abs() * self.many_electron_field_vcm(cfg);
        let c = kappa.abs() * self.thermal_field_vcm(cfg);
        (a * a + b * b + c * c).sqrt()
    }
}

/// Total linewidth (GHz) with the given model and Stark slope `kappa`.
pub fn broadening_width(cfg: &FieldConfiguration, model: &BroadeningModel, kappa: f64) -> f64 {
    model.width_ghz(cfg, kappa)
}

/// Gaussian profile of a line over E⊥, ready to be sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineProfile {
    /// V/cm
    pub center: f64,
    /// V/cm
    pub sigma: f64,
    /// Integrated area, `r_B²`.
    pub area: f64,
}

impl LineProfile {
    pub fn at(&self, e_perp: f64) -> f64 {
        if self.sigma == 0.0 {
            return if e_perp == self.center { f64::INFINITY } else { 0.0 };
        }
        let x = (e_perp - self.center) / self.sigma;
        self.area * (-0.5 * x * x).exp() / (self.sigma * (2.0 * std::f64::consts::PI).sqrt())
    }
}

/// Profile of `line` against a MW drive at `mw_ghz`: centred where the
/// linearised line frequency equals the drive. `None` for lines that do not
/// tune with E⊥.
pub fn line_profile(line: &TransitionLine, width_ghz: f64, mw_ghz: f64) -> Option<LineProfile> {
    if line.stark_slope.abs() < 1e-9 {
        return None;
    }
    Some(LineProfile {
        center: line.e_perp_vcm + (mw_ghz - line.frequency_ghz) / line.stark_slope,
        sigma: width_ghz / line.stark_slope.abs(),
        area: line.strength(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    BY,
    BZ,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::BY => "b_y",
            SweepAxis::BZ => "b_z",
        }
    }

    pub fn apply(self, cfg: &FieldConfiguration, value: f64) -> Result<FieldConfiguration> {
        match self {
            SweepAxis::BY => cfg.with_b_y(value),
            SweepAxis::BZ => cfg.with_b_z(value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapMode {
    /// One diagonalisation per sweep point at the base E⊥, lines moved
    /// linearly with their Stark slopes.
    #[default]
    Fast,
    /// Re-solve the vertical and coupled problems for every E⊥ cell.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapSpec {
    pub axis: SweepAxis,
    pub sweep_values: Vec<f64>,
    /// V/cm
    pub e_perp_axis: Vec<f64>,
    pub mw_frequency_ghz: f64,
    pub mode: MapMode,
    pub basis: ProductBasis,
    pub n_max: usize,
    pub grid: GridSpec,
    pub l_cut: usize,
    pub broadening: BroadeningModel,
}

impl MapSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sweep_values.is_empty() {
            return Err(invalid("sweep", "no sweep values"));
        }
        if self.e_perp_axis.len() < 2 {
            return Err(invalid("e_perp_axis", "need at least two E⊥ points"));
        }
        if self.e_perp_axis.iter().any(|e| !(*e >= 0.0)) {
            return Err(invalid("e_perp_axis", "E⊥ values must be >= 0"));
        }
        if !(self.mw_frequency_ghz > 0.0) {
            return Err(invalid("mw_frequency_ghz", "must be > 0"));
        }
        if self.basis.n_max() > self.n_max {
            return Err(invalid("n_max", "vertical n_max smaller than basis n_max"));
        }
        self.broadening.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedPoint {
    pub index: usize,
    pub sweep_value: f64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AbsorptionMap {
    pub axis: SweepAxis,
    pub sweep_values: Vec<f64>,
    pub e_perp_axis: Vec<f64>,
    /// `[sweep][e_perp]`, normalised to max 1.
    pub intensity: Vec<Vec<f64>>,
    /// Maximum of the raw intensity (`r_B²` per V/cm) before normalisation.
    pub raw_scale: f64,
    /// Lines contributing at each sweep point (fast mode: at the base E⊥).
    pub lines: Vec<Vec<TransitionLine>>,
    pub config: FieldConfiguration,
    pub mw_frequency_ghz: f64,
    pub mode: MapMode,
    pub failed: Vec<FailedPoint>,
}

/// Raw intensity contributed at each E⊥ by the lines, linearised about
/// their evaluation field.
fn superpose(lines: &[TransitionLine], cfg: &FieldConfiguration, spec: &MapSpec, out: &mut [f64]) {
    for line in lines {
        let width = spec.broadening.width_ghz(cfg, line.stark_slope);
        if let Some(p) = line_profile(line, width, spec.mw_frequency_ghz) {
            for (o, &e) in out.iter_mut().zip(&spec.e_perp_axis) {
                *o += p.at(e);
            }
        }
    }
}

fn band_for(spec: &MapSpec, lines_slope: f64) -> (f64, f64) {
    let (lo, hi) = spec
        .e_perp_axis
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
    let span = (hi - lo) * lines_slope + 10.0;
    (spec.mw_frequency_ghz - span, spec.mw_frequency_ghz + span)
}

fn fast_point(
    vs: &VerticalSpectrum,
    cfg: &FieldConfiguration,
    spec: &MapSpec,
    populations: &[f64],
) -> Result<(Vec<f64>, Vec<TransitionLine>)> {
    let s = solve_coupled(vs, cfg, &spec.basis, DiamagneticMode::Full)?;
    let band = band_for(spec, 3.0);
    let lines = transition_catalog(&s, populations, band);
    let mut row = vec![0.0; spec.e_perp_axis.len()];
    superpose(&lines, cfg, spec, &mut row);
    // keep only lines whose centre falls near the axis
    let (lo, hi) = (spec.e_perp_axis[0].min(*spec.e_perp_axis.last().unwrap()), spec.e_perp_axis[0].max(*spec.e_perp_axis.last().unwrap()));
    let visible = lines
        .into_iter()
        .filter(|l| {
            let w = spec.broadening.width_ghz(cfg, l.stark_slope);
            line_profile(l, w, spec.mw_frequency_ghz)
                .map(|p| p.center + 5.0 * p.sigma >= lo && p.center - 5.0 * p.sigma <= hi)
                .unwrap_or(false)
        })
        .collect();
    Ok((row, visible))
}

fn full_point(
    verticals: &[VerticalSpectrum],
    cfg: &FieldConfiguration,
    spec: &MapSpec,
    populations: &[f64],
) -> Result<(Vec<f64>, Vec<TransitionLine>)> {
    let mut row = vec![0.0; spec.e_perp_axis.len()];
    let mut lines_at_base = Vec::new();
    let base = cfg.e_perp_vcm();
    let mut best = f64::INFINITY;
    for (j, (vs, &e)) in verticals.iter().zip(&spec.e_perp_axis).enumerate() {
        let c = cfg.with_e_perp_vcm(e)?;
        let s = solve_coupled(vs, &c, &spec.basis, DiamagneticMode::Full)?;
        let lines = transition_catalog(&s, populations, band_for(spec, 0.0));
        for line in &lines {
            let width = spec.broadening.width_ghz(&c, line.stark_slope);
            if width == 0.0 || line.stark_slope.abs() < 1e-9 {
                continue;
            }
            // Gaussian in frequency, converted to density per V/cm
            let x = (line.frequency_ghz - spec.mw_frequency_ghz) / width;
            row[j] += line.strength() * (-0.5 * x * x).exp() * line.stark_slope.abs()
                / (width * (2.0 * std::f64::consts::PI).sqrt());
        }
        if (e - base).abs() < best {
            best = (e - base).abs();
            lines_at_base = lines;
        }
    }
    Ok((row, lines_at_base))
}

/// Simulated absorption over `spec.sweep_values` × `spec.e_perp_axis`.
/// `base` supplies the fixed field components, temperature and (for the
/// fast mode) the reference E⊥. Failed sweep points are zero rows listed in
/// [`AbsorptionMap::failed`].
pub fn absorption_map(material: &MaterialProperties, base: &FieldConfiguration, spec: &MapSpec) -> Result<AbsorptionMap> {
    spec.validate()?;
    let configs: Vec<Result<FieldConfiguration>> =
        spec.sweep_values.iter().map(|&v| spec.axis.apply(base, v)).collect();

    let results: Vec<Result<(Vec<f64>, Vec<TransitionLine>)>> = match spec.mode {
        MapMode::Fast => {
            let vs = solve_vertical(material, base.e_perp(), spec.n_max, spec.grid)?;
            configs
                .par_iter()
                .map(|cfg| {
                    let cfg = cfg.clone()?;
                    let pops = thermal_populations(&cfg, spec.l_cut.min(spec.basis.l_max()))?;
                    fast_point(&vs, &cfg, spec, &pops)
                })
                .collect()
        }
        MapMode::Full => {
            let verticals: Vec<VerticalSpectrum> = spec
                .e_perp_axis
                .par_iter()
                .map(|&e| solve_vertical(material, e * V_PER_CM, spec.n_max, spec.grid))
                .collect::<Result<_>>()?;
            configs
                .par_iter()
                .map(|cfg| {
                    let cfg = cfg.clone()?;
                    let pops = thermal_populations(&cfg, spec.l_cut.min(spec.basis.l_max()))?;
                    full_point(&verticals, &cfg, spec, &pops)
                })
                .collect()
        }
    };

    let mut intensity = Vec::with_capacity(results.len());
    let mut lines = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok((row, l)) => {
                intensity.push(row);
                lines.push(l);
            }
            Err(e) => {
                failed.push(FailedPoint { index, sweep_value: spec.sweep_values[index], error: e.to_string() });
                intensity.push(vec![0.0; spec.e_perp_axis.len()]);
                lines.push(Vec::new());
            }
        }
    }
    let raw_scale = intensity.iter().flatten().fold(0.0_f64, |m, &v| m.max(v));
    if raw_scale > 0.0 {
        for v in intensity.iter_mut().flatten() {
            *v /= raw_scale;
        }
    }
    Ok(AbsorptionMap {
        axis: spec.axis,
        sweep_values: spec.sweep_values.clone(),
        e_perp_axis: spec.e_perp_axis.clone(),
        intensity,
        raw_scale,
        lines,
        config: *base,
        mw_frequency_ghz: spec.mw_frequency_ghz,
        mode: spec.mode,
        failed,
    })
}

impl AbsorptionMap {
    /// Long-form CSV: `<axis>, e_perp_vcm, intensity`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([self.axis.name(), "e_perp_vcm", "intensity"])?;
        for (x, row) in self.sweep_values.iter().zip(&self.intensity) {
            for (e, v) in self.e_perp_axis.iter().zip(row) {
                w.write_record(&[x.to_string(), e.to_string(), v.to_string()])?;
            }
        }
        w.flush()
    }

    /// Line traces and map metadata for the JSON sidecar.
    pub fn sidecar(&self) -> serde_json::Value {
        let mut m = BTreeMap::new();
        m.insert("axis", serde_json::json!(self.axis));
        m.insert("mode", serde_json::json!(self.mode));
        m.insert("mw_frequency_ghz", serde_json::json!(self.mw_frequency_ghz));
        m.insert("raw_scale", serde_json::json!(self.raw_scale));
        m.insert("config", serde_json::json!(self.config));
        m.insert("failed", serde_json::json!(self.failed));
        let traces: Vec<_> = self
            .sweep_values
            .iter()
            .zip(&self.lines)
            .map(|(x, ls)| serde_json::json!({ "sweep_value": x, "lines": ls }))
            .collect();
        m.insert("lines", serde_json::Value::Array(traces));
        serde_json::to_value(m).expect("map metadata serialises")
    }

    /// Per sweep point, the E⊥ of the intensity maximum (parabolic refinement).
    pub fn peak_positions(&self) -> Vec<f64> {
        self.intensity.iter().map(|row| peak_position(&self.e_perp_axis, row)).collect()
    }
}

/// Location of the maximum of sampled `y(x)` refined by a three-point parabola.
pub fn peak_position(x: &[f64], y: &[f64]) -> f64 {
    let (i, _) = y.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    if i == 0 || i + 1 >= y.len() {
        return x[i];
    }
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    if denom == 0.0 {
        return x[i];
    }
    let h = x[i + 1] - x[i];
    x[i] + 0.5 * h * (y0 - y2) / denom
}

/// Local maxima of a sampled trace above `threshold`, as `(x, y)`.
pub fn local_maxima(x: &[f64], y: &[f64], threshold: f64) -> Vec<(f64, f64)> {
    (1..y.len().saturating_sub(1))
        .filter(|&i| y[i] >= threshold && y[i] > y[i - 1] && y[i] >= y[i + 1])
        .map(|i| {
            let lo = i - 1;
            (peak_position(&x[lo..lo + 3], &y[lo..lo + 3]), y[i])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupled::{assemble_hamiltonian, diagonalize};
    use crate::units::Isotope;

    fn vs_at(e: f64) -> VerticalSpectrum {
        let m = MaterialProperties::default_for(Isotope::He3);
        solve_vertical(&m, e * V_PER_CM, 6, GridSpec::new(150.0, 8000)).unwrap()
    }

    #[test]
    fn populations_normalised_and_cold_limit() {
        let cfg = FieldConfiguration::lab(23.0, 0.584, 0.0, 0.33).unwrap();
        let p = thermal_populations(&cfg, 20).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!((p[0] - 0.907).abs() < 0.01, "{}", p[0]);
        let cold = thermal_populations(&cfg.with_temperature(0.01).unwrap(), 20).unwrap();
        assert!(cold[0] > 1.0 - 1e-12);
    }

    #[test]
    fn no_coupling_only_diagonal_lines() {
        let vs = vs_at(15.0);
        let cfg = FieldConfiguration::lab(15.0, 1.0, 0.0, 0.5).unwrap();
        let s = solve_coupled(&vs, &cfg, &ProductBasis::new(4, 8).unwrap(), DiamagneticMode::Full).unwrap();
        let pops = thermal_populations(&cfg, 3).unwrap();
        let lines = transition_catalog(&s, &pops, (1.0, 500.0));
        assert!(!lines.is_empty());
        assert!(lines.iter().all(|l| l.sideband_order == 0));
    }

    #[test]
    fn sideband_strength_scales_quadratically() {
        let vs = vs_at(23.0);
        let basis = ProductBasis::new(5, 8).unwrap();
        let ratio = |by: f64| {
            let cfg = FieldConfiguration::lab(23.0, 1.0, by, 0.3).unwrap();
            let s = solve_coupled(&vs, &cfg, &basis, DiamagneticMode::Full).unwrap();
            let lines = transition_catalog(&s, &[1.0], (1.0, 300.0));
            let main = lines.iter().find(|l| l.final_dominant == (2, 0)).unwrap().moment_sq;
            let side = lines.iter().find(|l| l.final_dominant == (2, 1)).unwrap().moment_sq;
            side / main
        };
        let (a, b) = (ratio(0.02), ratio(0.04));
        assert!((b / a - 4.0).abs() < 0.05, "{}", b / a);
    }

    #[test]
    fn sideband_offset_is_cyclotron_frequency() {
        let vs = vs_at(23.0);
        let basis = ProductBasis::new(5, 10).unwrap();
        for bz in [0.3, 0.6, 1.0] {
            let cfg = FieldConfiguration::lab(23.0, bz, 0.05, 0.3).unwrap();
            let s = solve_coupled(&vs, &cfg, &basis, DiamagneticMode::Full).unwrap();
            let lines = transition_catalog(&s, &[1.0], (1.0, 300.0));
            let f = |lv: Level| lines.iter().find(|l| l.final_dominant == lv).unwrap().frequency_ghz;
            let fc = cfg.omega_c() / (2.0 * std::f64::consts::PI) / 1e9;
            // coupling shifts are second order in B_y; compare loosely
            assert!((f((2, 1)) - f((2, 0)) - fc).abs() < 0.02 * fc, "{bz}");
        }
    }

    #[test]
    fn width_model_behaviour() {
        let m = BroadeningModel::default();
        let cfg = FieldConfiguration::lab(23.0, 0.584, 0.0, 0.33).unwrap();
        assert_eq!(m.width_ghz(&cfg, 0.74), m.base_width_ghz);
        let mut prev = m.base_width_ghz;
        for i in 1..10 {
            let w = m.width_ghz(&cfg.with_b_y(0.1 * i as f64).unwrap(), 0.74);
            assert!(w > prev);
            prev = w;
        }
        let double = BroadeningModel { density_cm2: 2.0 * m.density_cm2, ..m };
        let r = double.fluctuating_field_vcm() / m.fluctuating_field_vcm();
        assert!((r - 2f64.powf(0.75)).abs() < 1e-12);
        // thermal term only at low B_z
        let low = cfg.with_b_z(0.1).unwrap().with_b_y(0.2).unwrap();
        assert!(m.thermal_field_vcm(&low) > 1.0);
        assert_eq!(m.thermal_field_vcm(&cfg.with_b_y(0.2).unwrap()), 0.0);
    }

    fn fake_line(strength: f64) -> TransitionLine {
        TransitionLine {
            initial: (1, 0),
            initial_index: 0,
            weight: 1.0,
            final_index: 1,
            final_dominant: (2, 0),
            final_purity: 1.0,
            frequency_ghz: 88.0,
            moment_sq: strength,
            sideband_order: 0,
            stark_slope: 0.74,
            e_perp_vcm: 21.0,
        }
    }

    #[test]
    fn profile_centre_and_area() {
        let l = fake_line(1.0);
        let p = line_profile(&l, 0.3, 90.0).unwrap();
        assert!((p.center - (21.0 + 2.0 / 0.74)).abs() < 1e-12);
        let xs: Vec<f64> = (0..4001).map(|i| 18.0 + i as f64 * 0.0025).collect();
        let area: f64 = xs.iter().map(|&x| p.at(x)).sum::<f64>() * 0.0025;
        assert!((area - 1.0).abs() < 1e-6);
        let p2 = line_profile(&fake_line(2.0), 0.3, 90.0).unwrap();
        let area2: f64 = xs.iter().map(|&x| p2.at(x)).sum::<f64>() * 0.0025;
        assert!((area2 / area - 2.0).abs() < 1e-12);
        let narrow = line_profile(&l, 1e-6, 90.0).unwrap();
        assert!(narrow.at(narrow.center) > 1e5 * p.at(p.center));
    }

    #[test]
    fn sign_of_in_plane_field_is_irrelevant() {
        let vs = vs_at(20.0);
        let basis = ProductBasis::new(4, 6).unwrap();
        let cfg = FieldConfiguration::lab(20.0, 1.18, 0.4, 0.35).unwrap();
        let h = assemble_hamiltonian(&vs, &cfg, &basis).unwrap();
        let mut flipped = h.clone();
        for i in 0..basis.size() {
            for j in 0..basis.size() {
                if basis.label(i).1 != basis.label(j).1 {
                    flipped[(i, j)] = -flipped[(i, j)];
                }
            }
        }
        let a = diagonalize(h, &vs, &cfg, &basis).unwrap();
        let b = diagonalize(flipped, &vs, &cfg, &basis).unwrap();
        let pops = thermal_populations(&cfg, 3).unwrap();
        let la = transition_catalog(&a, &pops, (50.0, 200.0));
        let lb = transition_catalog(&b, &pops, (50.0, 200.0));
        assert_eq!(la.len(), lb.len());
        for (x, y) in la.iter().zip(&lb) {
            assert!((x.frequency_ghz - y.frequency_ghz).abs() < 1e-9);
            assert!((x.moment_sq - y.moment_sq).abs() < 1e-9 * x.moment_sq.max(1e-6));
        }
    }

    #[test]
    fn peak_refinement_recovers_parabola_vertex() {
        let x: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - (v - 2.3f64).powi(2)).collect();
        assert!((peak_position(&x, &y) - 2.3).abs() < 1e-12);
    }
}
