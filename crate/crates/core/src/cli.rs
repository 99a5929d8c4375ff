//! Batch front-end: resolves a [`RunConfig`](crate::config::RunConfig), runs
//! one task and writes CSV/JSON artifacts with a provenance block.
//!
//! Output is deterministic: parallel sweeps collect in input order, JSON
//! objects are key-sorted, and nothing time- or host-dependent is written.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{self, AxisName, ConfigError, Plan, Task};
use crate::coupled::{
    self, find_crossing, minimum_gap, solve_coupled, truncation_drift, write_spectrum_csv, CoupledSpectrum,
    DiamagneticMode, Level, ProductBasis,
};
use crate::dissipation::{
    resonant_wavenumber, strong_coupling_report, two_ripplon_rate_with, RateOptions, RipplonBath,
};
use crate::jcm;
use crate::spectroscopy::{absorption_map, MapSpec};
use crate::units::constants::{self as k, V_PER_CM};
use crate::units::{FieldConfiguration, MaterialProperties};
use crate::vertical::{solve_vertical, truncation_report, GridSpec, VerticalSpectrum};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_SELF_TEST: i32 = 4;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "HELIUMJCM_OUT_DIR";

/// Largest acceptable eigenvalue drift (GHz) when `l_max` is enlarged.
pub const DRIFT_LIMIT_GHZ: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointFailure {
    pub index: usize,
    pub sweep_value: Option<f64>,
    pub error: String,
}

/// Files produced by a task plus any per-point failures.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub failures: Vec<PointFailure>,
    pub self_test_failed: bool,
}

impl Artifacts {
    fn add_json(&mut self, name: &str, v: &Value) {
        let mut bytes = serde_json::to_vec_pretty(v).expect("json serialises");
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
    }
}

/// Output directory: explicit flag, then the environment, then the config, then `out`.
pub fn output_dir(flag: Option<&Path>, plan_dir: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|s| !s.is_empty()) {
        return PathBuf::from(p);
    }
    plan_dir.map_or_else(|| PathBuf::from("out"), Path::to_path_buf)
}

/// Loads and resolves a config. `self-test` may run without a file.
pub fn plan_for(task: Task, path: Option<&Path>) -> Result<Plan, ConfigError> {
    let cfg = match path {
        Some(p) => config::load(p)?,
        None if task == Task::SelfTest => config::RunConfig::default(),
        None => return Err(ConfigError(vec![format!("`{task}` needs --config <path>")])),
    };
    config::resolve(&cfg, task)
}

/// Runs `task` and writes its artifacts; returns the process exit code.
pub fn run(task: Task, path: Option<&Path>, out: Option<&Path>) -> i32 {
    let plan = match plan_for(task, path) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    for w in &plan.warnings {
        eprintln!("warning: {w}");
    }
    let dir = output_dir(out, plan.output_dir.as_deref());
    let result = execute(&plan);
    let mut artifacts = match result {
        Ok(a) => a,
        Err(e) => Artifacts {
            failures: vec![PointFailure { index: 0, sweep_value: None, error: e.to_string() }],
            ..Default::default()
        },
    };
    if !artifacts.failures.is_empty() {
        let manifest = json!({
            "task": plan.task,
            "failures": artifacts.failures,
        });
        artifacts.add_json("failures.json", &manifest);
    }
    if let Err(e) = write_all(&dir, &artifacts.files) {
        eprintln!("error: cannot write to {}: {e}", dir.display());
        return EXIT_NUMERICAL;
    }
    for (name, _) in &artifacts.files {
        println!("{}", dir.join(name).display());
    }
    if artifacts.self_test_failed {
        EXIT_SELF_TEST
    } else if !artifacts.failures.is_empty() {
        for f in &artifacts.failures {
            eprintln!("failed point {}: {}", f.index, f.error);
        }
        EXIT_NUMERICAL
    } else {
        EXIT_OK
    }
}

fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in files {
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

/// Schema and range check with no physics; returns exit code and report text.
pub fn validate(path: &Path, task: Option<Task>) -> (i32, String) {
    let cfg = match config::load(path) {
        Ok(c) => c,
        Err(e) => return (EXIT_CONFIG, e.to_string()),
    };
    let Some(task) = task.or(cfg.task) else {
        return (EXIT_CONFIG, "error: missing `task` (set it in the config or pass it on the command line)".into());
    };
    match config::resolve(&cfg, task) {
        Err(e) => (EXIT_CONFIG, e.to_string()),
        Ok(plan) => {
            let mut s = String::new();
            for w in &plan.warnings {
                s.push_str(&format!("warning: {w}\n"));
            }
            s.push_str(&format!("ok: task {task}\n"));
            if plan.defaults.is_empty() {
                s.push_str("no defaults applied\n");
            } else {
                s.push_str("defaults applied:\n");
                let width = plan.defaults.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                for (key, value) in &plan.defaults {
                    s.push_str(&format!("  {key:<width$}  {value}\n"));
                }
            }
            (EXIT_OK, s)
        }
    }
}

pub fn execute(plan: &Plan) -> crate::Result<Artifacts> {
    match plan.task {
        Task::SpectrumSweep => spectrum_sweep(plan),
        Task::AbsorptionMap => map_task(plan),
        Task::Shifts => shifts_task(plan),
        Task::Crossings => crossings_task(plan),
        Task::Rates => rates_task(plan),
        Task::SelfTest => self_test(plan),
    }
}

fn material_summary(m: &MaterialProperties) -> Value {
    json!({
        "isotope": m.isotope(),
        "rydberg_energy_mev": m.rydberg_energy() / k::MEV,
        "bohr_radius_nm": m.bohr_radius() * 1e9,
        "epsilon": m.epsilon(),
        "lambda_coupling": m.lambda_coupling(),
        "barrier_height_ev": m.barrier_height() / k::ELEMENTARY_CHARGE,
        "surface_tension": m.surface_tension(),
        "mass_density": m.mass_density(),
        "lambda_check": m.lambda_consistency(),
    })
}

/// The provenance block shared by every sidecar.
pub fn provenance(plan: &Plan, diagnostics: Value) -> Value {
    let defaults: BTreeMap<&str, &str> = plan.defaults.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    json!({
        "program": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "task": plan.task,
        "config": plan,
        "defaults_applied": defaults,
        "warnings": plan.warnings,
        "constants": {
            "elementary_charge": k::ELEMENTARY_CHARGE,
            "electron_mass": k::ELECTRON_MASS,
            "hbar": k::HBAR,
            "planck": k::PLANCK,
            "vacuum_permittivity": k::VACUUM_PERMITTIVITY,
            "boltzmann": k::BOLTZMANN,
        },
        "material": material_summary(&plan.material),
        "basis": {
            "n_max": plan.basis.n_max(),
            "l_max": plan.basis.l_max(),
            "size": plan.basis.size(),
        },
        "diagnostics": diagnostics,
    })
}

fn vertical(plan: &Plan, e_perp_vcm: f64) -> crate::Result<VerticalSpectrum> {
    solve_vertical(&plan.material, e_perp_vcm * V_PER_CM, plan.basis.n_max(), plan.grid)
}

/// Sum-rule residuals of the vertical basis and the `l_max` drift at `cfg`.
fn convergence(plan: &Plan, vs: &VerticalSpectrum, cfg: &FieldConfiguration) -> Value {
    let drift = if cfg.b_z() > 0.0 {
        truncation_drift(vs, cfg, plan.basis.n_max(), plan.basis.l_max(), plan.drift_check_l_max)
    } else {
        Err(Error::DegenerateField("drift check"))
    };
    let drift = match drift {
        Ok(d) => json!({
            "b_z": cfg.b_z(),
            "b_y": cfg.b_y(),
            "l_max": plan.basis.l_max(),
            "l_max_check": plan.drift_check_l_max,
            "max_drift_ghz": d,
            "limit_ghz": DRIFT_LIMIT_GHZ,
            "converged": d < DRIFT_LIMIT_GHZ,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    json!({
        "vertical_sum_rule_residuals": truncation_report(vs),
        "landau_truncation": drift,
    })
}

/// The sweep point with the largest `B_y/B_z`, where truncation bites first.
fn hardest(plan: &Plan, configs: &[FieldConfiguration]) -> FieldConfiguration {
    configs
        .iter()
        .filter(|c| c.b_z() > 0.0)
        .max_by(|a, b| (a.b_y() / a.b_z()).total_cmp(&(b.b_y() / b.b_z())))
        .copied()
        .unwrap_or(plan.field)
}

fn sweep_configs(plan: &Plan) -> (AxisName, Vec<f64>, Vec<crate::Result<FieldConfiguration>>) {
    let s = plan.sweep.as_ref().expect("resolved sweep");
    let cfgs = s
        .values
        .iter()
        .map(|&v| match s.axis {
            AxisName::BZ => plan.field.with_b_z(v),
            AxisName::BY => plan.field.with_b_y(v),
            AxisName::EPerp => plan.field.with_e_perp_vcm(v),
        })
        .collect();
    (s.axis, s.values.clone(), cfgs)
}

fn spectrum_sweep(plan: &Plan) -> crate::Result<Artifacts> {
    use rayon::prelude::*;
    let (axis, values, cfgs) = sweep_configs(plan);
    let base_vs = vertical(plan, plan.field.e_perp_vcm())?;
    let results: Vec<crate::Result<CoupledSpectrum>> = cfgs
        .par_iter()
        .map(|c| {
            let c = c.clone()?;
            if axis == AxisName::EPerp {
                let vs = vertical(plan, c.e_perp_vcm())?;
                solve_coupled(&vs, &c, &plan.basis, plan.diamagnetic)
            } else {
                solve_coupled(&base_vs, &c, &plan.basis, plan.diamagnetic)
            }
        })
        .collect();
    let mut art = Artifacts::default();
    let mut rows = Vec::new();
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok(s) => rows.push((values[i], s)),
            Err(e) => art.failures.push(PointFailure { index: i, sweep_value: Some(values[i]), error: e.to_string() }),
        }
    }
    let mut csv = Vec::new();
    write_spectrum_csv(&mut csv, axis.key(), &rows, plan.output_levels).map_err(io_err)?;
    art.files.push(("spectrum.csv".into(), csv));
    let ok: Vec<FieldConfiguration> = rows.iter().map(|(_, s)| *s.config()).collect();
    let worst = hardest(plan, &ok);
    let vs = if axis == AxisName::EPerp { vertical(plan, worst.e_perp_vcm())? } else { base_vs };
    let diag = convergence(plan, &vs, &worst);
    art.add_json("spectrum.json", &provenance(plan, diag));
    Ok(art)
}

fn map_task(plan: &Plan) -> crate::Result<Artifacts> {
    let m = plan.map.as_ref().expect("resolved map");
    let s = plan.sweep.as_ref().expect("resolved sweep");
    let spec = MapSpec {
        axis: plan.map_axis().expect("map axis checked"),
        sweep_values: s.values.clone(),
        e_perp_axis: m.e_perp_axis.clone(),
        mw_frequency_ghz: m.mw_frequency_ghz,
        mode: m.mode,
        basis: plan.basis,
        n_max: plan.basis.n_max(),
        grid: plan.grid,
        l_cut: m.l_cut,
        broadening: plan.broadening,
    };
    let map = absorption_map(&plan.material, &plan.field, &spec)?;
    let mut art = Artifacts::default();
    let mut csv = Vec::new();
    map.write_csv(&mut csv).map_err(io_err)?;
    art.files.push(("map.csv".into(), csv));
    art.failures = map
        .failed
        .iter()
        .map(|f| PointFailure { index: f.index, sweep_value: Some(f.sweep_value), error: f.error.clone() })
        .collect();
    let (_, _, cfgs) = sweep_configs(plan);
    let cfgs: Vec<_> = cfgs.into_iter().filter_map(|c| c.ok()).collect();
    let vs = vertical(plan, plan.field.e_perp_vcm())?;
    let diag = convergence(plan, &vs, &hardest(plan, &cfgs));
    let mut doc = provenance(plan, diag);
    doc["map"] = map.sidecar();
    art.add_json("map.json", &doc);
    Ok(art)
}

fn shifts_task(plan: &Plan) -> crate::Result<Artifacts> {
    use rayon::prelude::*;
    let vs = vertical(plan, plan.field.e_perp_vcm())?;
    let (_, values, cfgs) = sweep_configs(plan);
    type Row = (f64, usize, Option<f64>, Option<f64>, f64, String);
    let per_point: Vec<crate::Result<Vec<Row>>> = cfgs
        .par_iter()
        .zip(&values)
        .map(|(c, &b_y)| {
            let c = c.clone()?;
            let mut out = Vec::new();
            for &l in &plan.shift_levels {
                let pert = jcm::perturbative_shift_with(&vs, &c, 2, l, plan.guard)
                    .and_then(|a| Ok(a - jcm::perturbative_shift_with(&vs, &c, 1, l, plan.guard)?));
                let (pert, status) = match pert {
                    Ok(d) => (Some(vs.scale().energy_to_ghz(d)), "ok".to_string()),
                    Err(Error::NearResonance { .. }) => (None, "near-resonance".to_string()),
                    Err(e) => return Err(e),
                };
                let full = if b_y == 0.0 { 0.0 } else { jcm::full_shift_ghz(&vs, &c, &plan.basis, l)? };
                let lamb = if l == 0 { Some(jcm::lamb_shift_ghz(&vs, &c)?) } else { None };
                out.push((b_y, l, pert, lamb, full, status));
            }
            Ok(out)
        })
        .collect();
    let mut art = Artifacts::default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["b_y", "l", "perturbative_ghz", "closed_form_ghz", "full_ghz", "status"]).map_err(csv_err)?;
    for (i, r) in per_point.into_iter().enumerate() {
        match r {
            Ok(rows) => {
                for (b_y, l, pert, lamb, full, status) in rows {
                    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                    w.write_record([b_y.to_string(), l.to_string(), opt(pert), opt(lamb), full.to_string(), status])
                        .map_err(csv_err)?;
                }
            }
            Err(e) => art.failures.push(PointFailure { index: i, sweep_value: Some(values[i]), error: e.to_string() }),
        }
    }
    art.files.push(("shifts.csv".into(), w.into_inner().map_err(|e| io_err(e.into_error()))?));
    let cfgs: Vec<_> = cfgs.into_iter().filter_map(|c| c.ok()).collect();
    let worst = hardest(plan, &cfgs);
    let mut diag = convergence(plan, &vs, &worst);
    let bethe: Vec<Value> = plan
        .shift_levels
        .iter()
        .flat_map(|&l| [(1, l), (2, l)])
        .map(|(n, l)| match jcm::bethe_cancellation_check(&vs, &worst, n, l) {
            Ok(b) => json!({ "n": n, "l": l, "check": b }),
            Err(e) => json!({ "n": n, "l": l, "error": e.to_string() }),
        })
        .collect();
    diag["bethe_cancellation"] = Value::Array(bethe);
    art.add_json("shifts.json", &provenance(plan, diag));
    Ok(art)
}

fn crossings_task(plan: &Plan) -> crate::Result<Artifacts> {
    let c = plan.crossings.as_ref().expect("resolved crossings");
    let vs = vertical(plan, plan.field.e_perp_vcm())?;
    let mut art = Artifacts::default();
    let mut reports = Vec::new();
    for (i, &(a, b)) in c.pairs.iter().enumerate() {
        match crossing_report(plan, &vs, a, b) {
            Ok(v) => reports.push(v),
            Err(e) => {
                art.failures.push(PointFailure { index: i, sweep_value: None, error: e.to_string() });
                reports.push(json!({ "pair": [a, b], "error": e.to_string() }));
            }
        }
    }
    let mut doc = provenance(plan, convergence(plan, &vs, &plan.field));
    doc["crossings"] = Value::Array(reports);
    if let Some(s) = &plan.sweep {
        let points = jcm::doublet_scan(&vs, &plan.field, &plan.basis, &s.values)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["b_y", "upper_ghz", "lower_ghz", "upper_moment_sq", "lower_moment_sq"]).map_err(csv_err)?;
        for p in &points {
            w.write_record([
                p.b_y.to_string(),
                p.upper_ghz.to_string(),
                p.lower_ghz.to_string(),
                p.upper_moment_sq.to_string(),
                p.lower_moment_sq.to_string(),
            ])
            .map_err(csv_err)?;
        }
        art.files.push(("doublet.csv".into(), w.into_inner().map_err(|e| io_err(e.into_error()))?));
        doc["doublet"] = json!({
            "b_z": plan.field.b_z(),
            "upper_extinction_b_y": jcm::upper_extinction(&points),
        });
    }
    art.add_json("crossings.json", &doc);
    Ok(art)
}

fn crossing_report(plan: &Plan, vs: &VerticalSpectrum, a: Level, b: Level) -> crate::Result<Value> {
    let c = plan.crossings.as_ref().expect("resolved crossings");
    let b_star = find_crossing(vs, a, b, c.b_z_min, c.b_z_max, 1e-9)?;
    let at = plan.field.with_b_z(b_star)?;
    let scale = vs.scale();
    let hw = scale.cyclotron_energy(b_star);
    let (upper, lower) = if a.1 > b.1 { (a, b) } else { (b, a) };
    let e_from_ground = scale.energy_to_ghz(vs.energy(a.0) + hw * a.1 as f64 - vs.energy(1));
    let mut v = json!({
        "pair": [a, b],
        "b_z_crossing": b_star,
        "transition_from_ground_ghz": e_from_ground,
    });
    if plan.field.b_y() > 0.0 {
        let g = jcm::coupling_constant(vs, &at, upper.0, lower.0)?.abs();
        let expected = 2.0 * g * ((lower.1 + 1) as f64).sqrt();
        let n = c.gap_points;
        let b_zs: Vec<f64> = (0..n)
            .map(|i| b_star - c.gap_window + 2.0 * c.gap_window * i as f64 / (n - 1) as f64)
            .collect();
        let cfgs: Vec<_> = b_zs.iter().map(|&x| at.with_b_z(x)).collect::<crate::Result<_>>()?;
        let spectra: Vec<_> =
            coupled::sweep(vs, &cfgs, &plan.basis, plan.diamagnetic).into_iter().collect::<crate::Result<_>>()?;
        let gap = minimum_gap(&spectra, &b_zs, a, b)?;
        v["b_y"] = json!(plan.field.b_y());
        v["g_over_h_ghz"] = json!(scale.energy_to_ghz(g));
        v["jcm_gap_ghz"] = json!(scale.energy_to_ghz(expected));
        v["minimum_gap"] = json!(gap);
        v["gap_ratio"] = json!(gap.gap / expected);
    }
    Ok(v)
}

fn rates_task(plan: &Plan) -> crate::Result<Artifacts> {
    let r = plan.rates.as_ref().expect("resolved rates");
    let vs = vertical(plan, plan.field.e_perp_vcm())?;
    let [n, n_prime, l] = r.pair;
    let mut cfg = plan.field;
    if r.b_z_at_resonance {
        cfg = cfg.with_b_z(find_crossing(&vs, (n, l + 1), (n_prime, l), 0.01, 20.0, 1e-9)?)?;
    }
    let bath = RipplonBath::for_material(&plan.material, cfg.temperature())?;
    let opts = RateOptions { thermal: r.thermal };
    let report = strong_coupling_report(&vs, &bath, &cfg, n, n_prime, l, r.nu_0)?;
    let (hi, lo) = (n.max(n_prime), n.min(n_prime));
    let gap = vs.scale().energy_to_joule(vs.energy(hi) - vs.energy(lo));
    let rates: Vec<Value> = report
        .decays
        .iter()
        .map(|d| {
            let rate = two_ripplon_rate_with(&vs, &bath, &cfg, d.from, d.to, opts);
            json!({
                "from": d.from,
                "to": d.to,
                "rate": rate.as_ref().ok(),
                "resonant_wavenumber_per_cm": d.resonant_wavenumber / 100.0,
            })
        })
        .collect();
    let mut doc = provenance(plan, json!({ "vertical_sum_rule_residuals": truncation_report(&vs) }));
    doc["rates"] = json!({
        "b_z": cfg.b_z(),
        "b_y": cfg.b_y(),
        "pair": report.pair,
        "g_over_h_ghz": report.g_over_h_ghz,
        "decays": rates,
        "q_tilde_per_cm": resonant_wavenumber(&bath, gap)? / 100.0,
        "nu_b": report.nu_b,
        "nu_0": r.nu_0,
        "coupling_to_decay_ratio": report.ratio,
        "dvdz_newton": report.dvdz,
        "thermal_occupation": r.thermal,
    });
    let mut art = Artifacts::default();
    art.add_json("rates.json", &doc);
    Ok(art)
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    limit: f64,
    pass: bool,
}

fn check(name: &'static str, value: f64, limit: f64) -> Check {
    Check { name, value, limit, pass: value.is_finite() && value <= limit }
}

fn self_test(plan: &Plan) -> crate::Result<Artifacts> {
    let mut checks = Vec::new();
    // hydrogenic limit, in a box wide enough for n = 10 at zero field
    let grid = GridSpec::new(400.0, 40_000);
    let h = solve_vertical(&plan.material, 0.0, 6, grid)?;
    let energy_err = (1..=4).map(|n| (h.energy(n) * (n * n) as f64 + 1.0).abs()).fold(0.0, f64::max);
    checks.push(check("hydrogenic_energy_rel_error", energy_err, 1e-3));
    let z_err = (1..=4).map(|n| (h.z(n, n) / (1.5 * (n * n) as f64) - 1.0).abs()).fold(0.0, f64::max);
    checks.push(check("hydrogenic_mean_height_rel_error", z_err, 1e-3));
    // sum rules
    let res = truncation_report(&h);
    checks.push(check("ground_state_closure_residual", res[0], 0.15));
    let h10 = solve_vertical(&plan.material, 0.0, 10, grid)?;
    let res10 = truncation_report(&h10);
    checks.push(check("closure_residual_growth_with_n_max", res10[0] - res[0], 0.0));
    // B_y = 0 fan
    let vs = vertical(plan, plan.field.e_perp_vcm())?;
    let basis = ProductBasis::new(plan.basis.n_max(), plan.basis.l_max().min(20))?;
    let bare = plan.field.with_b_y(0.0)?;
    let s = solve_coupled(&vs, &bare, &basis, DiamagneticMode::Full)?;
    let hw = vs.scale().cyclotron_energy(bare.b_z());
    let mut fan: Vec<f64> = (0..basis.size())
        .map(|i| {
            let (n, l) = basis.label(i);
            vs.energy(n) + hw * l as f64
        })
        .collect();
    fan.sort_by(f64::total_cmp);
    let fan_err = fan.iter().zip(s.eigenvalues()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.push(check("zero_tilt_fan_error", fan_err, 1e-10));
    // orthonormality and trace with tilt
    let tilted = plan.field.with_b_y(plan.field.b_y().max(0.5))?;
    let t = solve_coupled(&vs, &tilted, &basis, DiamagneticMode::Full)?;
    let v = t.eigenvectors();
    let gram = v.transpose() * v;
    let ortho = (&gram - nalgebra::DMatrix::<f64>::identity(gram.nrows(), gram.ncols())).amax();
    checks.push(check("eigenvector_orthonormality", ortho, 1e-8));
    let hmat = coupled::assemble_hamiltonian(&vs, &tilted, &basis)?;
    let trace_err = (hmat.trace() - t.trace()).abs() / hmat.trace().abs().max(1.0);
    checks.push(check("trace_preservation", trace_err, 1e-10));

    let mut art = Artifacts::default();
    art.self_test_failed = checks.iter().any(|c| !c.pass);
    for c in &checks {
        eprintln!("{} {} = {:.3e} (limit {:.1e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
    }
    let mut doc = provenance(plan, json!({}));
    doc["checks"] = json!(checks);
    doc["passed"] = json!(!art.self_test_failed);
    art.add_json("selftest.json", &doc);
    Ok(art)
}

fn io_err(e: std::io::Error) -> Error {
    Error::InvalidParameter { name: "output", reason: e.to_string() }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidParameter { name: "output", reason: e.to_string() }
}
