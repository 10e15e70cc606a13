use convexify::config::{AutoOr, RunConfig};
use convexify::io::{read_csv, read_dataset, read_json, write_dataset};
use convexify::pipeline::{
    invert, run_pipeline, run_stability_study, write_outcome, PipelineError, RunReport,
};

/// a₀ error of the default inversion when the medium is empty, so every
/// nonzero a₀ comes from the method itself.
const ZERO_MEDIUM_A0_FLOOR: f64 = 5.83e-2;

fn small() -> RunConfig {
    let mut c = RunConfig::default();
    c.grid.n1 = 17;
    c.grid.n2 = 17;
    c.source.samples = 32;
    c.optimizer.max_iter = 100;
    c
}

#[test]
fn identical_configs_give_identical_outputs() {
    let mut cfg = small();
    cfg.noise.level = 0.01;
    cfg.noise.seed = 11;
    let a = run_pipeline(&cfg).unwrap();
    let b = run_pipeline(&cfg).unwrap();
    assert_eq!(a.report.without_timings(), b.report.without_timings());
    assert_eq!(a.a0, b.a0);
    assert_eq!(a.data, b.data);
}

#[test]
fn noise_seed_changes_data_only_when_noisy() {
    let mut cfg = small();
    let a = run_pipeline(&cfg).unwrap();
    cfg.noise.seed = 5;
    let b = run_pipeline(&cfg).unwrap();
    assert_eq!(a.data.g0, b.data.g0);
    cfg.noise.level = 0.05;
    let c = run_pipeline(&cfg).unwrap();
    assert_ne!(a.data.g0, c.data.g0);
}

#[test]
fn noiseless_error_is_below_noisy_error() {
    let clean = run_pipeline(&RunConfig::default()).unwrap();
    let mut cfg = RunConfig::default();
    cfg.noise.level = 0.01;
    cfg.noise.seed = 3;
    let noisy = run_pipeline(&cfg).unwrap();
    let e = |o: &convexify::pipeline::RunOutcome| o.report.errors.as_ref().unwrap().v_h1_omega_dc;
    assert!(e(&clean) <= e(&noisy), "{} vs {}", e(&clean), e(&noisy));
    assert!(clean.report.beta_min.unwrap() > 0.0);
    assert!(clean.sigma.iter().all(|&s| s > 0.0));
}

#[test]
fn zero_medium_floor() {
    let mut cfg = RunConfig::default();
    cfg.truth.background = 0.0;
    cfg.truth.inclusions.clear();
    let out = run_pipeline(&cfg).unwrap();
    let floor = out.report.errors.unwrap().a0_l2_omega_dc;
    assert!(
        (floor / ZERO_MEDIUM_A0_FLOOR - 1.0).abs() < 0.05,
        "a0 floor {floor:e}"
    );
}

#[test]
fn inverting_a_written_dataset_matches_the_full_run() {
    let cfg = small();
    let full = run_pipeline(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &full.grid, &full.data).unwrap();
    let (_, data) = read_dataset(dir.path()).unwrap();
    let again = invert(&cfg, data, false).unwrap();
    assert_eq!(again.a0, full.a0);
    assert!(again.report.errors.is_none());
}

#[test]
fn outputs_are_written_and_readable() {
    let cfg = small();
    let out = run_pipeline(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outcome(dir.path(), &out, true).unwrap();
    let report: RunReport = read_json(&dir.path().join("report.json")).unwrap();
    assert_eq!(report.without_timings(), out.report.without_timings());
    let hist = read_csv(
        &dir.path().join("history.csv"),
        &["n", "J", "grad_norm", "err_H1_omega_dc"],
    )
    .unwrap();
    assert_eq!(hist.len(), out.history.history.len());
    let a0 = read_csv(
        &dir.path().join("a0.csv"),
        &["i", "j", "x1", "x2", "a0", "a0_true"],
    )
    .unwrap();
    assert_eq!(a0.len(), out.grid.omega_len());
    for name in [
        "sigma.csv",
        "V.csv",
        "p.csv",
        "W.csv",
        "V_star.csv",
        "cwf.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    read_dataset(&dir.path().join("data")).unwrap();
}

#[test]
fn study_rejects_too_few_levels_and_reports_rows() {
    let cfg = small();
    assert!(run_stability_study(&cfg, &[0.01, 0.1]).is_err());
    let s = run_stability_study(&cfg, &[0.1, 0.001, 0.01]).unwrap();
    let levels: Vec<f64> = s.rows.iter().map(|r| r.level).collect();
    assert_eq!(levels, vec![0.001, 0.01, 0.1]);
    assert!(s.rho_theory > 0.0 && s.rho_theory < 1.0);
}

#[test]
fn invalid_config_is_a_config_error() {
    let mut cfg = small();
    cfg.cwf.lambda = AutoOr::Value(-1.0);
    match run_pipeline(&cfg) {
        Err(e @ PipelineError::Config(_)) => assert_eq!(e.exit_code(), 2),
        other => panic!("expected a config error, got {:?}", other.map(|_| ())),
    }
}
