use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_heliumjcm");

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], cfg: &Path, out: Option<&Path>) -> Output {
    let mut c = Command::new(BIN);
    c.args(args).arg("--config").arg(cfg).env_remove("HELIUMJCM_OUT_DIR");
    if let Some(o) = out {
        c.arg("--out").arg(o);
    }
    c.output().unwrap()
}

const SWEEP: &str = r#"
task = "spectrum-sweep"
[field]
e_perp_vcm = 15.0
b_y = 0.2
[basis]
l_max = 16
[grid]
n_points = 5000
[sweep]
axis = "b_z"
start = 0.6
stop = 1.4
points = 5
"#;

#[test]
fn validate_ok_lists_defaults() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "a.cfg", SWEEP);
    let o = run(&["validate"], &cfg, None);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("ok: task spectrum-sweep"), "{text}");
    assert!(text.contains("field.temperature") && text.contains("basis.n_max"), "{text}");
}

#[test]
fn missing_b_z_in_b_y_sweep_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let text = SWEEP.replace("b_y = 0.2", "b_z = 1.0").replace("axis = \"b_z\"", "axis = \"b_y\"");
    let text = text.replace("b_z = 1.0", "");
    let cfg = write(d.path(), "a.cfg", &text);
    for args in [&["validate"][..], &["spectrum-sweep"][..]] {
        let o = run(args, &cfg, Some(&d.path().join("out")));
        assert_eq!(o.status.code(), Some(2));
        assert!(String::from_utf8(o.stderr).unwrap().contains("`field.b_z`"));
    }
    assert!(!d.path().join("out").exists(), "nothing is written on config errors");
}

#[test]
fn malformed_and_unknown_keys_are_config_errors() {
    let d = tempfile::tempdir().unwrap();
    let bad = write(d.path(), "bad.cfg", "task = \"rates\"\n[field\n");
    assert_eq!(run(&["validate"], &bad, None).status.code(), Some(2));
    let typo = write(d.path(), "typo.cfg", &SWEEP.replace("e_perp_vcm", "e_perp"));
    let o = run(&["validate"], &typo, None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("e_perp"));
}

#[test]
fn small_l_max_warns_without_failing() {
    let d = tempfile::tempdir().unwrap();
    let text = SWEEP.replace("b_y = 0.2", "b_y = 1.0").replace("l_max = 16", "l_max = 10");
    let cfg = write(d.path(), "a.cfg", &text);
    let o = run(&["validate"], &cfg, None);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8(o.stdout).unwrap().contains("convergence check will likely fail"));
}

#[test]
fn sweep_outputs_are_deterministic_across_thread_counts() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "a.cfg", SWEEP);
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert_eq!(run(&["spectrum-sweep", "--threads", "1"], &cfg, Some(&a)).status.code(), Some(0));
    assert_eq!(run(&["spectrum-sweep", "--threads", "3"], &cfg, Some(&b)).status.code(), Some(0));
    for f in ["spectrum.csv", "spectrum.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("spectrum.csv")).unwrap();
    assert!(csv.starts_with("b_z,k,energy_ghz,dominant_n,dominant_l,dominant_weight"));
    assert_eq!(csv.lines().count(), 1 + 5 * 40);
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("spectrum.json")).unwrap()).unwrap();
    assert_eq!(side["config"]["basis"]["l_max"], 16);
    assert_eq!(side["version"], env!("CARGO_PKG_VERSION"));
    assert!(side["diagnostics"]["landau_truncation"]["max_drift_ghz"].is_number());
}

#[test]
fn failed_points_exit_3_with_manifest() {
    let d = tempfile::tempdir().unwrap();
    // B_z = 0 with an in-plane field has no Landau quantisation
    let text = SWEEP.replace("start = 0.6", "start = 0.0");
    let cfg = write(d.path(), "a.cfg", &text);
    let out = d.path().join("o");
    let o = run(&["spectrum-sweep"], &cfg, Some(&out));
    assert_eq!(o.status.code(), Some(3));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("failures.json")).unwrap()).unwrap();
    let failures = manifest["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0]["index"], 0);
    assert!(failures[0]["error"].as_str().unwrap().contains("degenerate"));
    // surviving points are still written
    let csv = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 40);
}

#[test]
fn self_test_passes_and_honours_env_out_dir() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("env-out");
    let o = Command::new(BIN).arg("self-test").env("HELIUMJCM_OUT_DIR", &out).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("selftest.json")).unwrap()).unwrap();
    assert_eq!(doc["passed"], true);
}

#[test]
fn rates_report_contains_quoted_quantities() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "r.cfg",
        "task = \"rates\"\n[field]\ne_perp_vcm = 15.0\nb_z = 2.82\nb_y = 1.5\n[grid]\nn_points = 8000\n",
    );
    let out = d.path().join("o");
    assert_eq!(run(&["rates"], &cfg, Some(&out)).status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("rates.json")).unwrap()).unwrap();
    let r = &doc["rates"];
    let g = r["g_over_h_ghz"].as_f64().unwrap();
    assert!(g > 5.0 && g < 20.0, "{g}");
    assert_eq!(r["decays"].as_array().unwrap().len(), 2);
    assert!(r["nu_b"].as_f64().unwrap() > 1e8);
    assert!(r["coupling_to_decay_ratio"].as_f64().unwrap() > 1e3);
}

#[test]
fn small_map_has_long_form_csv_and_lines() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "m.cfg",
        r#"
task = "absorption-map"
[field]
e_perp_vcm = 29.4
b_z = 0.584
[basis]
l_max = 20
[grid]
n_points = 6000
[sweep]
axis = "b_y"
values = [0.0, 0.3]
[map]
e_perp_start = 26.0
e_perp_stop = 32.0
e_perp_points = 61
mw_frequency_ghz = 90.0
l_cut = 4
"#,
    );
    let out = d.path().join("o");
    assert_eq!(run(&["absorption-map"], &cfg, Some(&out)).status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("map.csv")).unwrap();
    assert!(csv.starts_with("b_y,e_perp_vcm,intensity"));
    assert_eq!(csv.lines().count(), 1 + 2 * 61);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("map.json")).unwrap()).unwrap();
    assert!(!doc["map"]["lines"][0]["lines"].as_array().unwrap().is_empty());
    assert_eq!(doc["config"]["map"]["mw_frequency_ghz"], 90.0);
    assert_eq!(doc["config"]["broadening"]["c_f"], 4.3e-6);
}
