use nls_lab::config::{DtChoice, PotentialConfig, SweepConfig};
use nls_lab::experiments::{self, HARMONIC_HH_LIMIT};
use nls_lab::RunConfig;

fn short_sweep() -> RunConfig {
    let mut cfg = RunConfig::flagship();
    cfg.time.t_end = 0.4;
    cfg.time.cadence = 20;
    cfg.time.dt = DtChoice::Fixed(1e-3);
    cfg.sweep = SweepConfig { h: vec![0.5, 0.25] };
    cfg
}

#[test]
fn parallel_sweep_is_bitwise_identical_to_serial() {
    let cfg = short_sweep();
    let (_, serial) = experiments::run_sweep_with(&cfg, None, false).unwrap();
    let (_, parallel) = experiments::run_sweep_with(&cfg, None, true).unwrap();
    for (a, b) in serial.runs.iter().zip(&parallel.runs) {
        assert_eq!(a.h, b.h);
        for (x, y) in a.final_state.values().iter().zip(b.final_state.values()) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
        for (r, s) in a.series.records.iter().zip(&b.series.records) {
            assert_eq!(r.hh[0].to_bits(), s.hh[0].to_bits());
        }
    }
}

#[test]
fn sweep_writes_one_directory_per_h() {
    let dir = tempfile::tempdir().unwrap();
    let (m, sweep) = experiments::run_sweep(&short_sweep(), Some(dir.path())).unwrap();
    assert_eq!(sweep.rows.len(), 2);
    assert!(m.assertions.iter().any(|a| a.name.contains("decreases")));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    for h in ["h_0.5", "h_0.25"] {
        assert!(dir.path().join(h).join("series.csv").exists());
    }
}

#[test]
fn harmonic_sweep_checks_the_vanishing_residual() {
    let mut cfg = short_sweep();
    cfg.model.potential = PotentialConfig::Harmonic { kappa: 1.0 };
    cfg.time.dt = DtChoice::Fixed(2.5e-4);
    let (m, sweep) = experiments::run_sweep(&cfg, None).unwrap();
    let failed: Vec<_> = m.failures().map(|a| format!("{} {}", a.name, a.detail)).collect();
    assert!(m.passed, "{failed:?}");
    assert!(sweep.rows.iter().all(|r| r.sup_hh < HARMONIC_HH_LIMIT));
    assert!(!m.assertions.iter().any(|a| a.name.contains("decreases")));
}

#[test]
fn concentration_reports_every_h() {
    let mut cfg = short_sweep();
    cfg.experiment = nls_lab::config::ExperimentKind::Concentration;
    let (m, runs) = experiments::run_concentration(&cfg, None).unwrap();
    assert!(m.passed);
    assert_eq!(runs.len(), 2);
    assert_eq!(m.assertions.iter().filter(|a| a.name.contains("fraction outside")).count(), 2);
}

#[test]
fn auto_dt_is_recorded_per_h() {
    let mut cfg = short_sweep();
    cfg.time.dt = DtChoice::Auto;
    let (m, sweep) = experiments::run_sweep(&cfg, None).unwrap();
    assert_eq!(m.dt.len(), 2);
    assert!(sweep.rows[1].dt < sweep.rows[0].dt, "{:?}", m.dt);
}
