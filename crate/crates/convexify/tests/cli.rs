use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str =
    "[grid]\nn1 = 17\nn2 = 17\n[source]\nsamples = 32\n[optimizer]\nmax_iter = 30\n";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convexify"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    fs::write(&p, SMALL).unwrap();
    p.display().to_string()
}

#[test]
fn basis_report_lists_every_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--out", "r", "basis-report", "--max-n", "6"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("N=")).count(), 6);
    assert!(dir.path().join("r/basis_report.json").exists());
}

#[test]
fn invalid_config_exits_with_2_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(&p, "[truth]\nbackground = 1.0\n[basis]\nn = 12\n").unwrap();
    let out = run(
        dir.path(),
        &["--config", p.to_str().unwrap(), "full-pipeline"],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("truth.background"), "{err}");
    assert!(err.contains("basis.n"), "{err}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("typo.toml");
    fs::write(&p, "[grid]\nnx = 17\n").unwrap();
    let out = run(dir.path(), &["--config", p.to_str().unwrap(), "synth"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_dataset_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["invert", "--data", "nowhere"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_then_invert() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = run(
        dir.path(),
        &["--config", &cfg, "--out", "run", "--seed", "4", "synth"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("run/dataset.csv").exists());
    let out = run(
        dir.path(),
        &["--config", &cfg, "--out", "inv", "invert", "--data", "run"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["report.json", "history.csv", "a0.csv", "sigma.csv", "V.csv"] {
        assert!(dir.path().join("inv").join(f).exists(), "{f}");
    }
}

#[test]
fn full_pipeline_dumps_intermediates_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = run(
        dir.path(),
        &[
            "--config",
            &cfg,
            "--out",
            "o",
            "--dump-intermediates",
            "full-pipeline",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "data/dataset.csv",
        "p.csv",
        "W.csv",
        "V_star.csv",
        "cwf.csv",
    ] {
        assert!(dir.path().join("o").join(f).exists(), "{f}");
    }
}

#[test]
fn probes_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = run(
        dir.path(),
        &[
            "--out",
            "p",
            "probe-carleman",
            "--trials",
            "50",
            "--lambdas",
            "1,2",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("p/carleman.json")).unwrap())
            .unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert!(dir.path().join("p/cwf.csv").exists());

    let out = run(
        dir.path(),
        &[
            "--config",
            &cfg,
            "--out",
            "p",
            "probe-convexity",
            "--pairs",
            "50",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("p/convexity.json").exists());

    let out = run(
        dir.path(),
        &["--config", &cfg, "--out", "p", "gradient-check"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("p/gradient_check.json").exists());
}

#[test]
fn too_few_carleman_trials_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["probe-carleman", "--trials", "3"]);
    assert_eq!(out.status.code(), Some(4));
}
