#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const SMALL_CONFIG: &str = r#"{
  "grid": {
    "times": [2e-10, 4e-10, 6e-10, 8e-10, 1e-9, 1.2e-9, 1.4e-9, 1.6e-9, 1.8e-9, 2e-9, 2.2e-9, 2.4e-9],
    "v_wl": [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
    "v_dd": [1.08, 1.2, 1.32],
    "temp": [253.0, 300.0, 358.0]
  },
  "n_mc_fit": 100,
  "corners": {"tau0": [2e-10, 2.4e-10], "v_dac0": [0.3, 0.35], "v_dac_fs": [0.8, 1.0]},
  "n_mc_sweep": 20,
  "n_mc_final": 100,
  "task": {"n_test": 100},
  "bench_draws": 20,
  "tau0": 2e-10
}"#;

pub const PIPELINE: [&[&str]; 8] = [
    &["oracle-gen"],
    &["fit"],
    &["explore"],
    &["pvt"],
    &["mc"],
    &["dnn", "--stochastic"],
    &["bench"],
    &["report"],
];

pub fn imc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn imc")
}

pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = imc(dir, args);
    assert!(
        o.status.success(),
        "imc {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

pub fn write_small_config(dir: &Path) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, SMALL_CONFIG).unwrap();
    p
}

/// Runs the whole pipeline with the small config into `dir/<out>`.
pub fn run_pipeline(dir: &Path, out: &str, jobs: usize) {
    write_small_config(dir);
    let j = jobs.to_string();
    for step in PIPELINE {
        let mut args = vec!["--config", "config.json", "--out", out, "--jobs", &j];
        args.extend_from_slice(step);
        ok(dir, &args);
    }
}

/// Every output file except run manifests and timing results.
pub fn deterministic_outputs(out: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            let n = p.file_name().unwrap().to_string_lossy();
            !n.starts_with("manifest_") && n != "bench.json" && n != "report.md"
        })
        .collect();
    v.sort();
    v
}
