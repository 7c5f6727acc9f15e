use std::path::Path;

use levy_passage::expcli::{
    emit_plot_data, read_plot_csv, run_cli, run_experiment, ExperimentConfig, RunResult, EXIT_CHECK_FAILED,
    EXIT_INVALID_CONFIG, EXIT_OK, EXIT_ZERO_SURVIVAL,
};
use levy_passage::passage_mc::SurvivalCurve;

fn bm_config(dir: &Path, n_paths: u64) -> String {
    format!(
        r#"{{
  "process": {{"sigma2": 1.0, "drift": 0.0}},
  "boundary": {{"kind": "constant", "value": 1.0}},
  "horizons": {{"T_min": 1, "T_max": 100, "points_per_decade": 4}},
  "n_paths": {n_paths},
  "seed": 11,
  "dt_max": 0.05,
  "bridge_correction": true,
  "output_dir": "{}"
}}"#,
        dir.display()
    )
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn brownian_run_fits_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(&bm_config(dir.path(), 20_000)).unwrap();
    let run = run_experiment(&cfg).unwrap();
    let d = run.fit.fit.delta_hat;
    assert!((0.45..=0.55).contains(&d), "{d}");
    for p in [run.curve_path(), run.fit_path(), run.manifest_path()] {
        assert!(p.exists(), "{}", p.display());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.manifest_path()).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], run.config_hash.as_str());
    assert_eq!(manifest["seed"], 11);
    assert!(manifest["code_version"].is_string() && manifest["wall_time_s"].is_number());
}

#[test]
fn identical_configs_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_experiment(&ExperimentConfig::from_json(&bm_config(a.path(), 1_000)).unwrap()).unwrap();
    let rb = run_experiment(&ExperimentConfig::from_json(&bm_config(b.path(), 1_000)).unwrap()).unwrap();
    assert_eq!(ra.config_hash, rb.config_hash);
    assert_eq!(ra.curve_path().file_name(), rb.curve_path().file_name());
    assert_eq!(std::fs::read(ra.curve_path()).unwrap(), std::fs::read(rb.curve_path()).unwrap());
    assert_eq!(std::fs::read(ra.fit_path()).unwrap(), std::fs::read(rb.fit_path()).unwrap());
}

#[test]
fn hash_tracks_numeric_fields_only() {
    let dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig::from_json(&bm_config(dir.path(), 1_000)).unwrap();
    let mut more = base.clone();
    more.n_paths = 2_000;
    let mut moved = base.clone();
    moved.output_dir = dir.path().join("elsewhere");
    assert_ne!(base.hash().unwrap(), more.hash().unwrap());
    assert_eq!(base.hash().unwrap(), moved.hash().unwrap());
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = write(a.path(), "c.json", &bm_config(&a.path().join("out"), 1_000));
    let cb = write(b.path(), "c.json", &bm_config(&b.path().join("out"), 1_000));
    assert_eq!(run_cli(["levy-passage", "--threads", "1", "run", &ca]), EXIT_OK);
    assert_eq!(run_cli(["levy-passage", "--threads", "3", "run", &cb]), EXIT_OK);
    let name = |d: &Path| {
        let mut v: Vec<_> = std::fs::read_dir(d.join("out")).unwrap().map(|e| e.unwrap().path()).collect();
        v.sort();
        v.into_iter().find(|p| p.to_string_lossy().ends_with("_curve.csv")).unwrap()
    };
    assert_eq!(std::fs::read(name(a.path())).unwrap(), std::fs::read(name(b.path())).unwrap());
}

#[test]
fn degenerate_horizons_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let body = bm_config(dir.path(), 1_000).replace("\"T_max\": 100", "\"T_max\": 1");
    let p = write(dir.path(), "bad.json", &body);
    assert_eq!(run_cli(["levy-passage", "run", &p]), EXIT_INVALID_CONFIG);
    assert_eq!(run_cli(["levy-passage", "run", "/no/such/file.json"]), EXIT_INVALID_CONFIG);
    assert_eq!(run_cli(["levy-passage", "frobnicate"]), EXIT_INVALID_CONFIG);
}

#[test]
fn zero_survival_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let body = bm_config(dir.path(), 100)
        .replace("\"drift\": 0.0", "\"drift\": 5.0")
        .replace("\"T_max\": 100", "\"T_max\": 1000");
    let p = write(dir.path(), "rare.json", &body);
    assert_eq!(run_cli(["levy-passage", "run", &p]), EXIT_ZERO_SURVIVAL);
}

#[test]
fn importance_method_runs() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        r#"{{
  "process": {{"sigma2": 1.0, "drift": 0.5, "atoms": [[-0.5, 1.0]]}},
  "boundary": {{"kind": "power", "gamma": 0.25, "sign": "minus", "offset": 1.0}},
  "horizons": {{"T_min": 1, "T_max": 100, "points_per_decade": 3}},
  "n_paths": 2000,
  "seed": 3,
  "dt_max": 0.1,
  "bridge_correction": true,
  "method": "importance",
  "output_dir": "{}"
}}"#,
        dir.path().display()
    );
    let run = run_experiment(&ExperimentConfig::from_json(&body).unwrap()).unwrap();
    assert_eq!(run.fit.diagnostics.len(), run.curve.len());
    assert!(run.fit.fit.delta_hat > 0.0);
}

#[test]
fn plot_data_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(&bm_config(dir.path(), 1_000)).unwrap();
    let run = run_experiment(&cfg).unwrap();
    let plot = emit_plot_data(&run).unwrap();
    assert!(plot.csv.exists() && plot.script.exists());
    assert_eq!(plot.censored, 0);
    let header = std::fs::read_to_string(&plot.csv).unwrap().lines().next().unwrap().to_string();
    assert!(header.starts_with("lnT,lnp,lncilow,lncihigh"), "{header}");
    assert_eq!(read_plot_csv(&plot.csv).unwrap(), run.curve);

    let reloaded = RunResult::load(dir.path(), &run.config_hash).unwrap();
    assert_eq!(reloaded.curve, run.curve);
    assert!(RunResult::load(&dir.path().join("nothing"), &run.config_hash).is_err());
}

#[test]
fn zero_rows_are_censored() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(&bm_config(dir.path(), 1_000)).unwrap();
    let mut run = run_experiment(&cfg).unwrap();
    run.curve = SurvivalCurve::from_values(&[1.0, 10.0, 100.0], &[0.5, 0.0, 0.1], 1_000);
    let plot = emit_plot_data(&run).unwrap();
    assert_eq!(plot.censored, 1);
    assert_eq!(read_plot_csv(&plot.csv).unwrap().len(), 2);
    assert!(std::fs::read_to_string(plot.script).unwrap().contains("censored rows (p = 0): 1"));
}

#[test]
fn suite_runs_files_and_inline_configs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    write(dir.path(), "one.json", &bm_config(&out, 500));
    let inline = bm_config(&out, 600);
    let suite = write(dir.path(), "suite.json", &format!(r#"{{"experiments": ["one.json", {inline}]}}"#));
    assert_eq!(run_cli(["levy-passage", "suite", &suite]), EXIT_OK);
    let fits = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().to_string_lossy().ends_with("_fit.json"))
        .count();
    assert_eq!(fits, 2);
}

#[test]
fn check_boundary_and_verify_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let b = write(dir.path(), "b.json", r#"{"kind": "power", "gamma": 0.25, "sign": "minus", "offset": 1}"#);
    assert_eq!(run_cli(["levy-passage", "check-boundary", &b]), EXIT_OK);
    let bad = write(dir.path(), "bad.json", r#"{"kind": "power", "gamma": -1, "sign": "minus"}"#);
    assert_eq!(run_cli(["levy-passage", "check-boundary", &bad]), EXIT_INVALID_CONFIG);

    let c = write(dir.path(), "c.json", r#"{"boundary": {"kind": "power", "gamma": 0.25, "sign": "plus"}, "samples": 200}"#);
    assert_eq!(run_cli(["levy-passage", "verify-bounds", &c]), EXIT_OK);
    let steep = write(dir.path(), "s.json", r#"{"boundary": {"kind": "power", "gamma": 0.75, "sign": "plus"}}"#);
    assert_eq!(run_cli(["levy-passage", "verify-bounds", &steep]), EXIT_INVALID_CONFIG);
}

#[test]
fn calibrate_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cal.csv");
    let code = run_cli([
        "levy-passage",
        "calibrate",
        "--paths",
        "5000",
        "--levels",
        "1",
        "--horizons",
        "1,4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(code == EXIT_OK || code == EXIT_CHECK_FAILED);
    assert_eq!(std::fs::read_to_string(out).unwrap().lines().count(), 3);
}
