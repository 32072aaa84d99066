use std::fs;
use std::process::Output;

mod common;

use common::{run_pipeline, workspace};

fn edgecast(args: &[&str]) -> Output {
    common::run_cli(env!("CARGO_BIN_EXE_edgecast"), args)
}

#[test]
fn pipeline_outputs_are_byte_identical_across_runs() {
    let ws = workspace();
    let (a, b) = (ws.root.join("a"), ws.root.join("b"));
    run_pipeline(env!("CARGO_BIN_EXE_edgecast"), &ws, &a);
    run_pipeline(env!("CARGO_BIN_EXE_edgecast"), &ws, &b);
    let names = common::listing(&a);
    assert_eq!(names, common::listing(&b));
    for expected in [
        "dataset.tsv",
        "train_trace.csv",
        "weights.json",
        "schema.txt",
        "predictions.csv",
        "cache_plan.csv",
        "allocation.csv",
        "allocation.json",
        "dvp_sweep.csv",
        "fig4_uhr.csv",
        "replicates.csv",
    ] {
        assert!(names.iter().any(|n| n == expected), "missing {expected}");
    }
    for name in &names {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
    let csv = fs::read_to_string(a.join("allocation.csv")).unwrap();
    assert!(csv.starts_with("# edgecast v"), "{csv}");
    assert!(csv.contains("config="));
}

#[test]
fn missing_dataset_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    fs::write(&config, format!("[data]\npath = \"{}\"\n", dir.path().join("absent").display())).unwrap();
    let out = edgecast(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
        "ingest",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    for (name, body) in [
        ("unknown.toml", "[channel]\nbandwith_hz = 1e6\n"),
        ("negative.toml", "[channel]\nbandwidth_hz = -5.0\n"),
        ("prob.toml", "[delay]\nviolation_prob = 1.5\n"),
    ] {
        let path = dir.path().join(name);
        fs::write(&path, body).unwrap();
        let out = edgecast(&["--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "simulate"]);
        assert!(!out.status.success(), "{name} accepted");
    }
    let out = edgecast(&["--config", dir.path().join("nope.toml").to_str().unwrap(), "simulate"]);
    assert!(!out.status.success());
}

#[test]
fn malformed_problem_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    fs::write(&path, r#"{"users": [{"distance_m": 10.0, "cached": true, "colour": 1}]}"#).unwrap();
    let out = edgecast(&["--out", dir.path().to_str().unwrap(), "allocate", "--problem", path.to_str().unwrap()]);
    assert!(!out.status.success());
}
