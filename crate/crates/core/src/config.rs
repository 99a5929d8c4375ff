//! Run configuration: TOML file with one section per module, resolved into a
//! fully specified [`Plan`] before any computation starts.
//!
//! Every optional key that falls back to a default is recorded, so `validate`
//! can print the defaults table and sidecars can echo the resolved values.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coupled::{DiamagneticMode, Level, ProductBasis};
use crate::dissipation::DEFAULT_NU_0;
use crate::jcm::DEFAULT_GUARD;
use crate::spectroscopy::{BroadeningModel, MapMode, SweepAxis};
use crate::units::constants::{ELEMENTARY_CHARGE, MEV};
use crate::units::{FieldConfiguration, Isotope, MaterialProperties};
use crate::vertical::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    SpectrumSweep,
    AbsorptionMap,
    Shifts,
    Crossings,
    Rates,
    SelfTest,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::SpectrumSweep => "spectrum-sweep",
            Task::AbsorptionMap => "absorption-map",
            Task::Shifts => "shifts",
            Task::Crossings => "crossings",
            Task::Rates => "rates",
            Task::SelfTest => "self-test",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Option<Task>,
    #[serde(default)]
    pub material: MaterialSection,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub basis: BasisSection,
    #[serde(default)]
    pub grid: GridSection,
    pub sweep: Option<SweepSection>,
    pub map: Option<MapSection>,
    pub broadening: Option<BroadeningModel>,
    pub shifts: Option<ShiftsSection>,
    pub crossings: Option<CrossingsSection>,
    pub rates: Option<RatesSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub isotope: Option<Isotope>,
    /// Overrides the quoted Rydberg energy. Exclusive with `epsilon`.
    pub rydberg_mev: Option<f64>,
    pub epsilon: Option<f64>,
    pub barrier_height_ev: Option<f64>,
    /// N/m
    pub surface_tension: Option<f64>,
    /// kg/m³
    pub mass_density: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub e_perp_vcm: Option<f64>,
    pub b_z: Option<f64>,
    pub b_y: Option<f64>,
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    pub n_max: Option<usize>,
    pub l_max: Option<usize>,
    pub diamagnetic: Option<DiamagneticMode>,
    /// Extra Landau levels for the convergence diagnostic.
    pub drift_check_l_max: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub z_max: Option<f64>,
    pub n_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    BZ,
    BY,
    EPerp,
}

impl AxisName {
    pub fn key(self) -> &'static str {
        match self {
            AxisName::BZ => "b_z",
            AxisName::BY => "b_y",
            AxisName::EPerp => "e_perp_vcm",
        }
    }
}

/// Either explicit `values` or `start`/`stop`/`points` (inclusive, evenly spaced).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Option<AxisName>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    pub e_perp_start: Option<f64>,
    pub e_perp_stop: Option<f64>,
    pub e_perp_points: Option<usize>,
    pub mw_frequency_ghz: Option<f64>,
    pub mode: Option<MapMode>,
    pub l_cut: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftsSection {
    /// Landau indices `l` of the `|1,l> -> |2,l>` transitions to report.
    pub levels: Option<Vec<usize>>,
    pub guard: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingsSection {
    /// `[[n, l], [n', l']]` pairs of uncoupled levels.
    pub pairs: Option<Vec<[[usize; 2]; 2]>>,
    pub b_z_min: Option<f64>,
    pub b_z_max: Option<f64>,
    /// Half-width (T) of the B_z window searched for the minimum gap.
    pub gap_window: Option<f64>,
    pub gap_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub nu_0: Option<f64>,
    pub thermal: Option<bool>,
    /// `[n, n', l]` for the `(n, l+1)/(n', l)` resonance.
    pub pair: Option<[usize; 3]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    /// Eigenvalues written per point by `spectrum-sweep`.
    pub levels: Option<usize>,
}

/// Collected configuration problems; each entry names the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub Vec<String>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "error: {m}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError(vec![format!("parse: {}", e.message().trim())]))
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(vec![format!("cannot read {}: {e}", path.display())]))?;
    parse(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedSweep {
    pub axis: AxisName,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedMap {
    pub e_perp_axis: Vec<f64>,
    pub mw_frequency_ghz: f64,
    pub mode: MapMode,
    pub l_cut: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedCrossings {
    pub pairs: Vec<(Level, Level)>,
    pub b_z_min: f64,
    pub b_z_max: f64,
    pub gap_window: f64,
    pub gap_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedRates {
    pub nu_0: f64,
    pub thermal: bool,
    pub pair: [usize; 3],
    /// Set when `b_z` was not given and is placed on the pair's resonance.
    pub b_z_at_resonance: bool,
}

/// Fully specified run. Field components that a sweep overrides, or that a
/// task does not use, are still set (to 0) so the configuration is valid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plan {
    pub task: Task,
    pub material: MaterialProperties,
    pub field: FieldConfiguration,
    pub basis: ProductBasis,
    pub diamagnetic: DiamagneticMode,
    pub drift_check_l_max: usize,
    pub grid: GridSpec,
    pub sweep: Option<ResolvedSweep>,
    pub map: Option<ResolvedMap>,
    pub broadening: BroadeningModel,
    pub shift_levels: Vec<usize>,
    pub guard: f64,
    pub crossings: Option<ResolvedCrossings>,
    pub rates: Option<ResolvedRates>,
    pub output_levels: usize,
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
    /// `(key, value)` of every default that was filled in.
    #[serde(skip)]
    pub defaults: Vec<(String, String)>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl Plan {
    pub fn map_axis(&self) -> Option<SweepAxis> {
        match self.sweep.as_ref()?.axis {
            AxisName::BY => Some(SweepAxis::BY),
            AxisName::BZ => Some(SweepAxis::BZ),
            AxisName::EPerp => None,
        }
    }
}

struct Resolver {
    errors: Vec<String>,
    defaults: Vec<(String, String)>,
}

impl Resolver {
    fn or<T: fmt::Debug + Clone>(&mut self, v: Option<T>, key: &str, default: T) -> T {
        match v {
            Some(v) => v,
            None => {
                self.defaults.push((key.to_string(), format!("{default:?}")));
                default
            }
        }
    }

    fn required<T>(&mut self, v: Option<T>, key: &str, why: &str) -> Option<T> {
        if v.is_none() {
            self.errors.push(format!("missing `{key}` ({why})"));
        }
        v
    }

    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        if !ok {
            self.errors.push(msg.into());
        }
    }
}

fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![start];
    }
    let h = (stop - start) / (points - 1) as f64;
    (0..points).map(|i| if i + 1 == points { stop } else { start + h * i as f64 }).collect()
}

fn range(
    r: &mut Resolver,
    prefix: &str,
    start: Option<f64>,
    stop: Option<f64>,
    points: Option<usize>,
    values: Option<Vec<f64>>,
) -> Option<Vec<f64>> {
    if let Some(v) = values {
        if start.is_some() || stop.is_some() || points.is_some() {
            r.errors.push(format!("`{prefix}values` cannot be combined with start/stop/points"));
            return None;
        }
        r.check(!v.is_empty(), format!("`{prefix}values` is empty"));
        r.check(v.iter().all(|x| x.is_finite()), format!("`{prefix}values` must be finite"));
        r.check(v.windows(2).all(|w| w[0] < w[1]), format!("`{prefix}values` must be strictly increasing"));
        return Some(v);
    }
    let start = r.required(start, &format!("{prefix}start"), "range start")?;
    let stop = r.required(stop, &format!("{prefix}stop"), "range stop")?;
    let points = r.required(points, &format!("{prefix}points"), "range point count")?;
    if points == 0 {
        r.errors.push(format!("`{prefix}points` must be >= 1"));
        return None;
    }
    if !(start.is_finite() && stop.is_finite()) {
        r.errors.push(format!("`{prefix}start`/`{prefix}stop` must be finite"));
        return None;
    }
    if points == 1 && start != stop {
        r.errors.push(format!("`{prefix}points` = 1 needs start == stop"));
        return None;
    }
    if points > 1 && !(start < stop) {
        r.errors.push(format!("`{prefix}start` must be below `{prefix}stop`"));
        return None;
    }
    Some(linspace(start, stop, points))
}

fn material(r: &mut Resolver, m: &MaterialSection) -> Option<MaterialProperties> {
    let isotope = m.isotope.unwrap_or_else(|| {
        r.defaults.push(("material.isotope".into(), "\"He3\"".into()));
        Isotope::He3
    });
    let (alpha0, rho0) = isotope.default_surface();
    let v0 = r.or(
        m.barrier_height_ev,
        "material.barrier_height_ev",
        isotope.default_barrier_height() / ELEMENTARY_CHARGE,
    );
    let alpha = r.or(m.surface_tension, "material.surface_tension", alpha0);
    let rho = r.or(m.mass_density, "material.mass_density", rho0);
    let v0 = v0 * ELEMENTARY_CHARGE;
    let built = match (m.rydberg_mev, m.epsilon) {
        (Some(_), Some(_)) => {
            r.errors.push("`material.rydberg_mev` and `material.epsilon` are exclusive".into());
            return None;
        }
        (Some(ry), None) => MaterialProperties::from_rydberg(isotope, ry * MEV, v0, alpha, rho),
        (None, Some(eps)) => MaterialProperties::from_epsilon(isotope, eps, v0, alpha, rho),
        (None, None) => {
            r.defaults.push(("material.rydberg_mev".into(), format!("{:?}", isotope.quoted_rydberg_mev())));
            MaterialProperties::from_rydberg(isotope, isotope.quoted_rydberg_mev() * MEV, v0, alpha, rho)
        }
    };
    match built {
        Ok(m) => Some(m),
        Err(e) => {
            r.errors.push(format!("material: {e}"));
            None
        }
    }
}

/// Rough number of Landau levels the in-plane field pulls into the states of
/// interest: `α = (B_y/B_z)·z_ref/(√2 l_B)` with `z_ref` the mean height of
/// `n = 3`, and `l_max ≳ α² + 6α + 10`.
pub fn required_l_max(material: &MaterialProperties, b_z: f64, b_y: f64) -> Option<f64> {
    if b_y == 0.0 {
        return Some(0.0);
    }
    if b_z <= 0.0 {
        return None;
    }
    let scale = material.scale();
    let rb_over_lb = (scale.cyclotron_energy(b_z) / 2.0).sqrt();
    let alpha = b_y / b_z * 13.5 * rb_over_lb / std::f64::consts::SQRT_2;
    Some(alpha * alpha + 6.0 * alpha + 10.0)
}

/// Resolves `cfg` for `task`, filling defaults and checking ranges. No
/// physics is computed.
pub fn resolve(cfg: &RunConfig, task: Task) -> Result<Plan, ConfigError> {
    let mut r = Resolver { errors: Vec::new(), defaults: Vec::new() };
    if let Some(t) = cfg.task {
        r.check(t == task, format!("config declares task `{t}` but `{task}` was requested"));
    }
    let material = material(&mut r, &cfg.material);

    // sweep
    let needs_sweep = matches!(task, Task::SpectrumSweep | Task::AbsorptionMap | Task::Shifts);
    let sweep = match &cfg.sweep {
        Some(s) => {
            let axis = match task {
                Task::Shifts | Task::Crossings => Some(r.or(s.axis, "sweep.axis", AxisName::BY)),
                _ => r.required(s.axis, "sweep.axis", "one of b_z, b_y, e_perp"),
            };
            let values = range(&mut r, "sweep.", s.start, s.stop, s.points, s.values.clone());
            match (axis, values) {
                (Some(axis), Some(values)) => {
                    let ok = match axis {
                        AxisName::EPerp | AxisName::BZ | AxisName::BY => values.iter().all(|v| *v >= 0.0),
                    };
                    r.check(ok, format!("sweep over `{}` must be >= 0", axis.key()));
                    Some(ResolvedSweep { axis, values })
                }
                _ => None,
            }
        }
        None => {
            if needs_sweep {
                r.errors.push(format!("missing [sweep] section (required by `{task}`)"));
            }
            None
        }
    };
    let axis = sweep.as_ref().map(|s| s.axis);
    match (task, axis) {
        (Task::AbsorptionMap, Some(AxisName::EPerp)) => {
            r.errors.push("`sweep.axis` = e_perp is not allowed for maps; E⊥ is the map's own axis".into())
        }
        (Task::Shifts, Some(a)) if a != AxisName::BY => r.errors.push("`sweep.axis` must be b_y for shifts".into()),
        (Task::Crossings, Some(a)) if a != AxisName::BY => {
            r.errors.push("`sweep.axis` must be b_y for the crossings doublet scan".into())
        }
        _ => {}
    }

    // map
    let map = if task == Task::AbsorptionMap {
        match &cfg.map {
            None => {
                r.errors.push("missing [map] section (required by `absorption-map`)".into());
                None
            }
            Some(m) => {
                let axis_values = range(&mut r, "map.e_perp_", m.e_perp_start, m.e_perp_stop, m.e_perp_points, None);
                if let Some(v) = &axis_values {
                    r.check(v.len() >= 2, "`map.e_perp_points` must be >= 2");
                    r.check(v[0] >= 0.0, "`map.e_perp_start` must be >= 0");
                }
                let mw = r.required(m.mw_frequency_ghz, "map.mw_frequency_ghz", "microwave frequency");
                if let Some(f) = mw {
                    r.check(f > 0.0 && f.is_finite(), "`map.mw_frequency_ghz` must be > 0");
                }
                let mode = m.mode.unwrap_or_else(|| {
                    r.defaults.push(("map.mode".into(), "\"fast\"".into()));
                    MapMode::Fast
                });
                let l_cut = r.or(m.l_cut, "map.l_cut", 10);
                match (axis_values, mw) {
                    (Some(e_perp_axis), Some(mw_frequency_ghz)) => {
                        Some(ResolvedMap { e_perp_axis, mw_frequency_ghz, mode, l_cut })
                    }
                    _ => None,
                }
            }
        }
    } else {
        None
    };

    // field
    let f = &cfg.field;
    let swept = |a: AxisName| axis == Some(a);
    let e_perp = if swept(AxisName::EPerp) {
        f.e_perp_vcm.or(Some(0.0))
    } else if let (None, Some(m)) = (f.e_perp_vcm, &map) {
        let mid = 0.5 * (m.e_perp_axis[0] + m.e_perp_axis[m.e_perp_axis.len() - 1]);
        Some(r.or(None, "field.e_perp_vcm", mid))
    } else if task == Task::SelfTest {
        Some(r.or(f.e_perp_vcm, "field.e_perp_vcm", 15.0))
    } else {
        r.required(f.e_perp_vcm, "field.e_perp_vcm", "pressing field, V/cm")
    };
    let mut b_z_at_resonance = false;
    let b_z = if swept(AxisName::BZ) {
        f.b_z.or(Some(0.0))
    } else {
        match task {
            Task::SpectrumSweep | Task::AbsorptionMap | Task::Shifts => {
                let why = match axis {
                    Some(a) => format!("fixed field component, required for a {} sweep", a.key()),
                    None => "fixed field component".to_string(),
                };
                r.required(f.b_z, "field.b_z", &why)
            }
            Task::Crossings if sweep.is_some() => {
                r.required(f.b_z, "field.b_z", "required for the doublet scan over b_y")
            }
            Task::Rates => {
                if f.b_z.is_none() {
                    b_z_at_resonance = true;
                    r.defaults.push(("field.b_z".into(), "resonance of rates.pair".into()));
                }
                Some(f.b_z.unwrap_or(0.0))
            }
            Task::SelfTest => Some(r.or(f.b_z, "field.b_z", 1.0)),
            Task::Crossings => Some(f.b_z.unwrap_or(0.0)),
        }
    };
    let b_y = if swept(AxisName::BY) {
        f.b_y.or(Some(0.0))
    } else {
        match task {
            Task::SpectrumSweep | Task::AbsorptionMap => {
                let why = format!("fixed field component, required for a {} sweep", axis.map_or("", |a| a.key()));
                r.required(f.b_y, "field.b_y", &why)
            }
            Task::SelfTest => Some(r.or(f.b_y, "field.b_y", 0.5)),
            _ => Some(r.or(f.b_y, "field.b_y", 0.0)),
        }
    };
    let temperature = r.or(f.temperature, "field.temperature", 0.3);
    let field = match (e_perp, b_z, b_y) {
        (Some(e), Some(bz), Some(by)) => match FieldConfiguration::lab(e, bz, by, temperature) {
            Ok(c) => Some(c),
            Err(e) => {
                r.errors.push(format!("field: {e}"));
                None
            }
        },
        _ => None,
    };

    // basis and grid
    let n_max = r.or(cfg.basis.n_max, "basis.n_max", 6);
    let l_max = r.or(cfg.basis.l_max, "basis.l_max", 50);
    let min_n = if matches!(task, Task::AbsorptionMap | Task::Crossings) { 3 } else { 2 };
    r.check(n_max >= min_n, format!("`basis.n_max` must be >= {min_n} for `{task}`, got {n_max}"));
    r.check(l_max >= 1, "`basis.l_max` must be >= 1");
    let diamagnetic = cfg.basis.diamagnetic.unwrap_or_else(|| {
        r.defaults.push(("basis.diamagnetic".into(), "\"full\"".into()));
        DiamagneticMode::Full
    });
    let drift_check_l_max = r.or(cfg.basis.drift_check_l_max, "basis.drift_check_l_max", l_max + 30);
    r.check(drift_check_l_max > l_max, "`basis.drift_check_l_max` must exceed `basis.l_max`");
    let basis = ProductBasis::new(n_max.max(1), l_max).ok();
    let default_grid = GridSpec::default();
    let grid = GridSpec::new(
        r.or(cfg.grid.z_max, "grid.z_max", default_grid.z_max),
        r.or(cfg.grid.n_points, "grid.n_points", default_grid.n_points),
    );
    r.check(grid.z_max.is_finite() && grid.z_max > 0.0, "`grid.z_max` must be > 0");
    r.check(grid.n_points >= 100, "`grid.n_points` must be >= 100");
    r.check(n_max + 1 < grid.n_points, "`basis.n_max` exceeds the grid size");

    let broadening = match cfg.broadening {
        Some(b) => b,
        None => {
            let b = BroadeningModel::default();
            if task == Task::AbsorptionMap {
                r.defaults.push(("broadening.base_width_ghz".into(), format!("{:?}", b.base_width_ghz)));
                r.defaults.push(("broadening.density_cm2".into(), format!("{:?}", b.density_cm2)));
                r.defaults.push(("broadening.c_f".into(), format!("{:?}", b.c_f)));
                r.defaults.push(("broadening.thermal_cutoff_b_z".into(), format!("{:?}", b.thermal_cutoff_b_z)));
            }
            b
        }
    };
    if let Err(e) = broadening.validate() {
        r.errors.push(format!("broadening: {e}"));
    }
    if let Some(m) = &map {
        r.check(m.l_cut <= l_max, "`map.l_cut` must not exceed `basis.l_max`");
    }

    let shifts = cfg.shifts.clone().unwrap_or_default();
    let (shift_levels, guard) = if task == Task::Shifts {
        (r.or(shifts.levels, "shifts.levels", vec![0, 1]), r.or(shifts.guard, "shifts.guard", DEFAULT_GUARD))
    } else {
        (shifts.levels.unwrap_or_else(|| vec![0, 1]), shifts.guard.unwrap_or(DEFAULT_GUARD))
    };
    if task == Task::Shifts {
        r.check(!shift_levels.is_empty(), "`shifts.levels` is empty");
        r.check(shift_levels.iter().all(|&l| l + 1 < l_max), "`shifts.levels` must be below `basis.l_max` - 1");
        r.check(guard > 0.0, "`shifts.guard` must be > 0");
    }

    let crossings = if task == Task::Crossings {
        let c = cfg.crossings.clone().unwrap_or_default();
        let pairs: Vec<(Level, Level)> = r
            .or(c.pairs, "crossings.pairs", vec![[[2, 1], [3, 0]], [[1, 1], [2, 0]]])
            .into_iter()
            .map(|[a, b]| ((a[0], a[1]), (b[0], b[1])))
            .collect();
        for &(a, b) in &pairs {
            r.check(
                a.0 >= 1 && b.0 >= 1 && a.0 <= n_max && b.0 <= n_max,
                format!("crossing pair {a:?}/{b:?}: n must lie in 1..=basis.n_max"),
            );
            r.check(a.1 <= l_max && b.1 <= l_max, format!("crossing pair {a:?}/{b:?}: l exceeds basis.l_max"));
            r.check(a.0 != b.0 && a.1 != b.1, format!("crossing pair {a:?}/{b:?}: levels must differ in n and l"));
        }
        let b_z_min = r.or(c.b_z_min, "crossings.b_z_min", 0.05);
        let b_z_max = r.or(c.b_z_max, "crossings.b_z_max", 6.0);
        r.check(b_z_min >= 0.0 && b_z_max > b_z_min, "`crossings.b_z_min` must be >= 0 and below `crossings.b_z_max`");
        let gap_window = r.or(c.gap_window, "crossings.gap_window", 0.04);
        let gap_points = r.or(c.gap_points, "crossings.gap_points", 81);
        r.check(gap_window > 0.0, "`crossings.gap_window` must be > 0");
        r.check(gap_points >= 3, "`crossings.gap_points` must be >= 3");
        Some(ResolvedCrossings { pairs, b_z_min, b_z_max, gap_window, gap_points })
    } else {
        None
    };

    let rates = if task == Task::Rates {
        let c = cfg.rates.clone().unwrap_or_default();
        let nu_0 = r.or(c.nu_0, "rates.nu_0", DEFAULT_NU_0);
        let thermal = r.or(c.thermal, "rates.thermal", false);
        let pair = r.or(c.pair, "rates.pair", [1, 2, 0]);
        r.check(nu_0 > 0.0, "`rates.nu_0` must be > 0");
        r.check(
            pair[0] >= 1 && pair[1] >= 1 && pair[0] != pair[1] && pair[0].max(pair[1]) <= n_max,
            "`rates.pair` needs distinct n, n' in 1..=basis.n_max",
        );
        Some(ResolvedRates { nu_0, thermal, pair, b_z_at_resonance })
    } else {
        None
    };

    let output_levels = if task == Task::SpectrumSweep {
        r.or(cfg.output.levels, "output.levels", 40)
    } else {
        cfg.output.levels.unwrap_or(40)
    };

    // convergence warning, evaluated at the most demanding sweep point
    let mut warnings = Vec::new();
    if let (Some(m), Some(fc)) = (&material, &field) {
        let values = |a: AxisName, fixed: f64| -> Vec<f64> {
            match &sweep {
                Some(s) if s.axis == a => s.values.clone(),
                _ => vec![fixed],
            }
        };
        let b_ys = values(AxisName::BY, fc.b_y());
        let b_zs = values(AxisName::BZ, fc.b_z());
        let by = b_ys.iter().cloned().fold(0.0, f64::max);
        let bz = b_zs.iter().cloned().filter(|b| *b > 0.0).fold(f64::INFINITY, f64::min);
        if by > 0.0 && bz.is_finite() {
            if let Some(need) = required_l_max(m, bz, by) {
                if (l_max as f64) < need {
                    warnings.push(format!(
                        "basis.l_max = {l_max} is small for B_y = {by} T at B_z = {bz} T \
                         (estimate needs about {:.0}); convergence check will likely fail",
                        need.ceil()
                    ));
                }
            }
        }
        if b_zs.iter().any(|&b| b == 0.0) && by > 0.0 {
            warnings.push("sweep includes B_z = 0 with B_y > 0; those points will fail (no Landau quantisation)".into());
        }
        if map.is_some() && bz < broadening.thermal_cutoff_b_z {
            warnings.push(format!(
                "B_z below {} T: thermal-motion broadening is only a rough rms estimate in this regime",
                broadening.thermal_cutoff_b_z
            ));
        }
    }

    if !r.errors.is_empty() {
        return Err(ConfigError(r.errors));
    }
    Ok(Plan {
        task,
        material: material.expect("checked"),
        field: field.expect("checked"),
        basis: basis.expect("checked"),
        diamagnetic,
        drift_check_l_max,
        grid,
        sweep,
        map,
        broadening,
        shift_levels,
        guard,
        crossings,
        rates,
        output_levels,
        output_dir: cfg.output.dir.clone(),
        defaults: r.defaults,
        warnings,
    })
}
