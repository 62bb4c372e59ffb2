#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

pub const BIN: &str = env!("CARGO_BIN_EXE_gbt-trust");

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn gbt(args: &[&str]) -> Run {
    gbt_in(Path::new("."), args, &[])
}

pub fn gbt_in(cwd: &Path, args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(BIN);
    cmd.args(args).current_dir(cwd);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out: Output = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn ok(args: &[&str]) -> Run {
    let r = gbt(args);
    assert_eq!(r.code, 0, "{args:?} failed: {}", r.stderr);
    r
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub fn spec(n_firms: usize, n_periods: usize, seed: u64) -> Value {
    spec_with(n_firms, n_periods, seed, (0.05, 0.8))
}

pub fn spec_with(n_firms: usize, n_periods: usize, seed: u64, recovery: (f64, f64)) -> Value {
    json!({
        "model": {
            "coefficients": [-4.0, 2.0, 0.8, -0.3, -0.3, 0.0],
            "feature_names": ["leverage", "volatility", "equity_return", "size", "noise"]
        },
        "panel": {
            "n_firms": n_firms,
            "n_periods": n_periods,
            "seed": seed,
            "covariates": [
                { "name": "leverage", "low": 0.0, "high": 1.0 },
                { "name": "volatility", "low": 0.0, "high": 1.0 },
                { "name": "equity_return", "low": -1.0, "high": 1.0 },
                { "name": "size", "low": 0.0, "high": 1.0 },
                { "name": "noise", "low": 0.0, "high": 1.0 }
            ],
            "recovery_range": [recovery.0, recovery.1],
            "missing_rate": 0.0
        }
    })
}

pub fn write_json(path: &Path, v: &Value) -> PathBuf {
    std::fs::write(path, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    path.to_path_buf()
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// Generates a panel under `dir/gen` and returns the CSV path.
pub fn panel(dir: &Path, n_firms: usize, n_periods: usize, seed: u64) -> PathBuf {
    let spec = write_json(&dir.join("spec.json"), &spec(n_firms, n_periods, seed));
    let out = dir.join("gen");
    ok(&["generate", "--config", s(&spec), "--out", s(&out)]);
    out.join("panel.csv")
}

pub fn small_config(dir: &Path, n_trees: usize) -> PathBuf {
    write_json(
        &dir.join(format!("config-{n_trees}.json")),
        &json!({ "n_trees": n_trees, "max_depth": 3 }),
    )
}
