use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Proc;

use homog_cli::{run, CliError, Command, RunOptions};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn homog(args: &[&str]) -> (i32, String, String) {
    let out = Proc::new(env!("CARGO_BIN_EXE_homog")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn passing_run_exits_zero_and_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let cfg = configs().join("verify-action.toml");
    let (code, stdout, _) = homog(&["verify-action", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(code, 0, "{stdout}");
    let json = fs::read_to_string(tmp.path().join("verify-action.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["header"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(doc["header"]["config_sha256"].as_str().unwrap().len(), 64);
    let csv = fs::read_to_string(tmp.path().join("verify-action-absorption.csv")).unwrap();
    assert!(csv.starts_with("# homog "));
    assert!(csv.contains("# seed 7\n"));
    assert!(tmp.path().join("plot/verify-action-absorption.dat").exists());
}

#[test]
fn wrong_factor_map_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("homogeneity-wrong-factor.toml");
    let (code, _, _) = homog(&["homogeneity", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn malformed_config_exits_two_with_a_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[group]\nkind = \"positive-multiplicative\"\n\n[action]\nkind = \"diagonal-scaling\"\nexponnts = [1]\n").unwrap();
    let (code, _, stderr) = homog(&["contract", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code, 2);
    // tagged tables report the position of their header
    assert!(stderr.contains("line 4") && stderr.contains("exponnts"), "{stderr}");

    fs::write(&cfg, "[group]\nkind = \"positive-multiplicative\"\n[action\n").unwrap();
    let (code, _, stderr) = homog(&["contract", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn unknown_field_reference_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let src = fs::read_to_string(configs().join("sigma-periodic.toml")).unwrap();
    let bad = src.replace("battery = [\"phi\", \"phi-sin\", \"phi-e\"]", "battery = [\"phi\", \"missing\"]");
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, &bad).unwrap();
    let err = run(Command::Sigma, &cfg, &tmp.path().join("out"), &RunOptions::default()).unwrap_err();
    let line = bad.lines().position(|l| l.contains("missing")).unwrap() + 1;
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains(&format!("line {line}")), "{err}");
}

#[test]
fn under_resolved_grid_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let src = fs::read_to_string(configs().join("sigma-periodic.toml")).unwrap();
    let cfg = tmp.path().join("coarse.toml");
    fs::write(&cfg, src.replace("panels = [16384]", "panels = [64]")).unwrap();
    let err = run(Command::Sigma, &cfg, &tmp.path().join("out"), &RunOptions::default()).unwrap_err();
    assert!(matches!(err, CliError::Numerical(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn tolerance_overrides_apply_and_are_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("contract.toml");
    let opts = RunOptions {
        jobs: Some(1),
        tol_overrides: vec!["fixed-point=1e-10".into()],
    };
    let outcome = run(Command::Contract, &cfg, tmp.path(), &opts).unwrap();
    assert!(outcome.pass);
    let csv = fs::read_to_string(tmp.path().join("contract-fixed-points.csv")).unwrap();
    assert!(csv.contains("# override fixed-point=1e-10\n"));

    let bad = RunOptions {
        jobs: None,
        tol_overrides: vec!["no-such-key=1".into()],
    };
    assert_eq!(run(Command::Contract, &cfg, tmp.path(), &bad).unwrap_err().exit_code(), 2);
}

#[test]
fn thread_count_does_not_change_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("construct-measure.toml");
    let one = tmp.path().join("one");
    let many = tmp.path().join("many");
    run(Command::ConstructMeasure, &cfg, &one, &RunOptions { jobs: Some(1), ..Default::default() }).unwrap();
    run(Command::ConstructMeasure, &cfg, &many, &RunOptions { jobs: Some(4), ..Default::default() }).unwrap();
    for name in ["construct-measure.json", "construct-measure-oracle.csv", "construct-measure-homogeneity.csv"] {
        assert_eq!(fs::read(one.join(name)).unwrap(), fs::read(many.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn missing_block_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let err = run(Command::Mean, &configs().join("contract.toml"), tmp.path(), &RunOptions::default()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
