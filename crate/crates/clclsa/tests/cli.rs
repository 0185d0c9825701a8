use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use clclsa::manifest::RunManifest;
use clclsa_core::eval::MetricsReport;

fn clclsa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clclsa"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = clclsa(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn synth(dir: &Path) {
    ok(dir, &["synth", "--n", "90", "--views", "3", "--classes", "3", "--seed", "7", "--out", "ds"]);
}

#[test]
fn synth_train_eval_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    ok(d, &["split", "--data", "ds", "--out", "sp", "--seed", "7"]);
    ok(d, &["mask", "--data", "sp/train", "--out", "tr", "--eta", "0.3", "--seed", "7"]);
    ok(d, &["train", "--data", "tr", "--out", "run", "--seed", "7", "--epochs", "20"]);
    let out = clclsa(d, &["eval", "--model", "run/model.json", "--data", "sp/test", "--out", "ev"]);
    assert!(out.status.success());
    let printed: MetricsReport = serde_json::from_slice(&out.stdout).unwrap();
    let written: MetricsReport =
        serde_json::from_str(&fs::read_to_string(d.join("ev/metrics.json")).unwrap()).unwrap();
    assert_eq!(printed, written);
    assert_eq!(written.n_subjects, 27);
    assert_eq!(fs::read_to_string(d.join("run/epochs.csv")).unwrap().lines().count(), 21);

    ok(d, &["train", "--data", "tr", "--out", "runb", "--seed", "7", "--epochs", "20", "--binary"]);
    let a = clclsa::checkpoint::load(&d.join("run/model.json")).unwrap();
    let b = clclsa::checkpoint::load(&d.join("runb/model.bin")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let out = clclsa(d, &["train", "--data", "ds", "--out", "run"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
    assert_eq!(code(&clclsa(d, &["synth", "--out", "x"])), 1);
    assert_eq!(code(&clclsa(d, &["frobnicate"])), 1);
    assert_eq!(code(&clclsa(d, &["train", "--data", "ds", "--out", "r", "--seed", "1", "--bogus"])), 1);
    assert_eq!(code(&clclsa(d, &["train", "--data", "ds", "--out", "r", "--seed", "1", "--set", "train.nope=1"])), 1);
    assert_eq!(code(&clclsa(d, &["train", "--data", "ds", "--out", "r", "--seed", "1", "--preset", "nope"])), 1);
    assert_eq!(code(&clclsa(d, &[])), 1);
    assert_eq!(code(&clclsa(d, &["--help"])), 0);
    assert_eq!(code(&clclsa(d, &["--version"])), 0);
}

#[test]
fn runtime_failures_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let out = clclsa(
        d,
        &["train", "--data", "ds", "--out", "run", "--seed", "1", "--lr", "1e300", "--set", "train.schedule={\"kind\":\"constant\"}"],
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("aborted"));
    assert!(d.join("run/epochs.csv").exists());
    assert_eq!(code(&clclsa(d, &["train", "--data", "missing", "--out", "r", "--seed", "1"])), 2);
    // A preset whose dimensions do not fit the data.
    assert_eq!(code(&clclsa(d, &["train", "--data", "ds", "--out", "r", "--seed", "1", "--preset", "rosmap"])), 1);
}

#[test]
fn config_file_then_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    fs::write(
        d.join("cfg.json"),
        r#"{"train": {"epochs": 3, "lr": 0.002}, "model": {"dropout": 0.1}}"#,
    )
    .unwrap();
    ok(d, &["train", "--config", "cfg.json", "--data", "ds", "--out", "run", "--seed", "5", "--epochs", "4"]);
    let m = RunManifest::read(&d.join("run/manifest.json")).unwrap();
    assert_eq!(m.config.train.epochs, 4);
    assert_eq!(m.config.train.lr, 0.002);
    assert_eq!(m.config.model.dropout, 0.1);
    assert_eq!(m.config.train.seed, 5);
    assert_eq!(m.seeds, [5]);
    assert!(m.inputs.keys().any(|k| k.ends_with("cfg.json")));
    assert!(m.inputs.values().all(|h| h.len() == 64));
}

fn strip_duration(path: &Path) -> String {
    let mut m = RunManifest::read(path).unwrap();
    m.duration_secs = 0.0;
    serde_json::to_string(&m).unwrap()
}

#[test]
fn reruns_are_bitwise_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let sweep = |out: &str, threads: &str| {
        ok(
            d,
            &["sweep", "--data", "ds", "--out", out, "--seed", "2", "--etas", "0,0.5", "--trials", "2", "--threads", threads, "--set", "train.epochs=8"],
        )
    };
    sweep("s", "1");
    let first = fs::read(d.join("s/results.csv")).unwrap();
    let first_json = fs::read(d.join("s/results.json")).unwrap();
    let manifest = strip_duration(&d.join("s/manifest.json"));
    sweep("s", "1");
    assert_eq!(fs::read(d.join("s/results.csv")).unwrap(), first);
    assert_eq!(fs::read(d.join("s/results.json")).unwrap(), first_json);
    assert_eq!(strip_duration(&d.join("s/manifest.json")), manifest);
    sweep("t", "2");
    assert_eq!(fs::read(d.join("t/results.csv")).unwrap(), first);

    let train = |out: &str| ok(d, &["train", "--data", "ds", "--out", out, "--seed", "3", "--epochs", "10"]);
    train("a");
    train("b");
    for f in ["model.json", "epochs.csv"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap());
    }
}

#[test]
fn experiment_commands_write_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    ok(d, &["ablate", "--data", "ds", "--out", "ab", "--seed", "1", "--trials", "1", "--etas", "0.2", "--set", "train.epochs=3"]);
    let rows = clclsa::report::read_report_csv(&d.join("ab/results.csv")).unwrap();
    assert_eq!(rows.iter().filter(|r| r.seed.is_some()).count(), 4);
    ok(
        d,
        &["surface", "--data", "ds", "--out", "su", "--seed", "1", "--set", "train.epochs=3", "--set", "surface.first=[0.0,0.1]", "--set", "surface.second=[0.01]"],
    );
    let rows = clclsa::report::read_report_csv(&d.join("su/results.csv")).unwrap();
    assert_eq!(rows.iter().filter(|r| r.seed.is_some()).count(), 2);
    ok(
        d,
        &["grid", "--data", "ds", "--out", "gr", "--seed", "1", "--set", "train.epochs=3", "--set", "grid.lambda_al=[0.0,0.1]", "--set", "grid.lambda_cl=[0.01]"],
    );
    assert_eq!(fs::read_to_string(d.join("gr/grid.csv")).unwrap().lines().count(), 3);
    assert!(d.join("gr/best_config.json").exists());
    ok(d, &["sweep", "--data", "ds", "--out", "sub", "--seed", "1", "--etas", "0.3", "--trials", "1", "--set", "train.epochs=3", "--set", "sweep.view_subsets=[[0,1],[1,2]]"]);
    let rows = clclsa::report::read_report_csv(&d.join("sub/results.csv")).unwrap();
    assert!(rows.iter().any(|r| r.variant == "clclsa[0+1]"));
}
