use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nls_lab::config::{DtChoice, PotentialConfig, SweepConfig};
use nls_lab::{RunConfig, RunManifest};

fn nsolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsolab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, cfg: &RunConfig) -> String {
    let path = dir.join(name);
    fs::write(&path, cfg.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

fn small_transport() -> RunConfig {
    let mut cfg = RunConfig::flagship();
    cfg.experiment = nls_lab::config::ExperimentKind::Transport;
    cfg.model.h = 0.5;
    cfg.grid.n = 1024;
    cfg.time.t_end = 0.5;
    cfg.time.cadence = 10;
    cfg.time.dt = DtChoice::Fixed(1e-3);
    cfg
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn templates_are_valid_configs() {
    for kind in ["flagship", "stationary", "stability"] {
        let out = nsolab(&["template", kind]);
        assert_eq!(out.status.code(), Some(0));
        let cfg = RunConfig::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
        assert!(!cfg.h_values().is_empty());
    }
}

#[test]
fn validate_passes_for_flagship() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "flagship.json", &RunConfig::flagship());
    let out = nsolab(&["validate", &path]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"experiment": "sweep", "unknown": 1}"#).unwrap();
    assert_eq!(nsolab(&["evolve", bad.to_str().unwrap(), "--out", "x"]).status.code(), Some(2));

    let path = write_config(dir.path(), "no_out.json", &small_transport());
    let out = nsolab(&["evolve", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("output"));

    let mut trapped = RunConfig::stationary_default();
    trapped.model.potential = PotentialConfig::Harmonic { kappa: 1.0 };
    let path = write_config(dir.path(), "trapped.json", &trapped);
    assert_eq!(nsolab(&["evolve", &path, "--out", dir.path().join("t").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn inadmissible_data_aborts_and_still_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_transport();
    cfg.model.v = vec![1.0];
    cfg.model.k = 0.5;
    let path = write_config(dir.path(), "fast.json", &cfg);
    let out_dir = dir.path().join("run");
    let out = nsolab(&["evolve", &path, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let m = manifest(&out_dir);
    assert!(!m.passed);
    assert!(m.abort.unwrap().contains("phase_gradient"));
}

#[test]
fn transport_writes_series_matching_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "transport.json", &small_transport());
    let out_dir = dir.path().join("run");
    let out = nsolab(&["--quiet", "evolve", &path, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let m = manifest(&out_dir);
    assert!(m.passed);
    assert_eq!(m.dt.len(), 1);
    let series = fs::read_to_string(out_dir.join("series.csv")).unwrap();
    let mut lines = series.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, m.columns);
    assert_eq!(lines.count(), 51);
    for f in ["particle.csv", "initial.nsef", "final.nsef"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn failed_assertion_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::stability_default();
    cfg.time.t_end = 1.0;
    cfg.stability.delta = 0.0;
    cfg.stability.exact_bound = 1e-30;
    let path = write_config(dir.path(), "stab.json", &cfg);
    let out_dir = dir.path().join("run");
    let out = nsolab(&["stability", &path, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL sup distance (exact data)"));
    assert!(out_dir.join("stability.csv").exists());
}

#[test]
fn ground_state_command_stores_profile_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_transport();
    cfg.sweep = SweepConfig { h: vec![0.5] };
    let path = write_config(dir.path(), "gs.json", &cfg);
    let out_dir = dir.path().join("gs");
    let out = nsolab(&["ground-state", &path, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("ground_state.json")).unwrap()).unwrap();
    assert!((meta["mu"].as_f64().unwrap() + 0.5).abs() < 1e-6);
    let bytes = fs::read(out_dir.join("ground_state.nsef")).unwrap();
    assert_eq!(&bytes[..5], b"NSEF1");
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 5);
}
