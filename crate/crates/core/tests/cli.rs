//! End-to-end runs of the `mee` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mee(args: &[&str], config: &str, dir: &Path) -> Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    let mut full: Vec<&str> = args.to_vec();
    full.push("--config");
    full.push(cfg.to_str().unwrap());
    Command::new(env!("CARGO_BIN_EXE_mee"))
        .args(&full)
        .env("MEE_THREADS", "2")
        .output()
        .unwrap()
}

#[test]
fn generate_then_fit_matches_fit_on_a_fresh_sample() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let out = mee(
        &["generate", "--out", data.to_str().unwrap()],
        "command = generate\nmodel_id = counterexample\nn = 10\nseed = 3\n",
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().count(), 11);
    for line in text.lines().skip(1) {
        let x: f64 = line.split(',').next().unwrap().parse().unwrap();
        assert!((0.0..=0.5).contains(&x) || (1.0..=1.5).contains(&x), "{x}");
    }

    let from_file = dir.path().join("a.json");
    let cfg = format!(
        "command = fit\ndata = {}\nspace = piecewise_constant(0.75)\nh = 0.5\nseed = 3\n",
        data.display()
    );
    assert!(mee(&["fit", "--out", from_file.to_str().unwrap()], &cfg, dir.path()).status.success());
    let fresh = dir.path().join("b.json");
    let cfg = "command = fit\nmodel_id = counterexample\nn = 10\nh = 0.5\nseed = 3\n";
    assert!(mee(&["fit", "--out", fresh.to_str().unwrap()], cfg, dir.path()).status.success());
    assert_eq!(fs::read(&from_file).unwrap(), fs::read(&fresh).unwrap());
    let json: serde_json::Value = serde_json::from_slice(&fs::read(&fresh).unwrap()).unwrap();
    for key in ["space_kind", "theta", "b_z", "objective", "h", "seed"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    let residuals = fs::read_to_string(dir.path().join("b.json.residuals.csv")).unwrap();
    assert!(residuals.starts_with("i,e_i\n"));
    assert_eq!(residuals.lines().count(), 11);
}

#[test]
fn generate_zero_rows_writes_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = mee(&["generate"], "command = generate\nmodel_id = gaussian\nn = 0\n", dir.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "x,y\n");
}

#[test]
fn oracle_and_entropy_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = mee(&["oracle"], "command = oracle\nmodel_id = counterexample\ntheta = 0, -1\n", dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() + 0.625).abs() < 1e-12);
    assert_eq!(v["model_id"], "counterexample");
    assert!(v["method"].is_string() && v["est_abs_error"].is_number());
    assert_eq!(v["hypothesis_params"].as_array().unwrap().len(), 2);

    let out = mee(&["entropy"], "command = entropy\nmodel_id = counterexample\n", dir.path());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() + (0.375f64).ln()).abs() < 1e-12);
}

#[test]
fn counterexample_table_and_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = mee(&["counterexample"], "command = counterexample\ngrid = 9\n", dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 10);
    assert!(text.starts_with("t,v11,v22,v12,v_total,r\n"));
    let out = mee(&["counterexample"], "command = counterexample\ntheta = 0, -1\n", dir.path());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["r"].as_f64().unwrap() - 0.470_003_629_245_735_5).abs() < 1e-12);
}

#[test]
fn sweep_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = sweep\nmodel_id = counterexample\nschedule = power_law(1, -1/6)\nregime = shrinking\nn_list = 32, 64, 128\nseeds = 0..2\nrestarts = 2\n";
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(mee(&["sweep", "--out", a.to_str().unwrap()], cfg, dir.path()).status.success());
    let out = mee(&["sweep", "--out", b.to_str().unwrap()], cfg, dir.path());
    assert!(out.status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read_to_string(&a).unwrap().lines().count(), 7);
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("a.csv.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rates"].as_array().unwrap().len(), 4);
    assert!(summary["failures"].as_array().unwrap().is_empty());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // unknown key
    assert_eq!(mee(&["oracle"], "command = oracle\nmodel_id = gaussian\nfoo = 1\n", dir.path()).status.code(), Some(2));
    // subcommand and config disagree
    assert_eq!(mee(&["fit"], "command = oracle\nmodel_id = gaussian\n", dir.path()).status.code(), Some(2));
    // missing data file
    let cfg = "command = fit\ndata = /nonexistent/data.csv\nspace = piecewise_constant(0.5)\nh = 1\n";
    assert_eq!(mee(&["fit"], cfg, dir.path()).status.code(), Some(4));
    // unwritable output
    let out = mee(
        &["generate", "--out", "/nonexistent/dir/x.csv"],
        "command = generate\nmodel_id = gaussian\nn = 3\n",
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/dir/x.csv"));
    // missing config file
    let out = Command::new(env!("CARGO_BIN_EXE_mee"))
        .args(["oracle", "--config", "/nonexistent.cfg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}
