//! The trustworthiness audit: every property of the three groups gets an
//! entry, backed by whatever evidence earlier runs left in the directory.

use std::fs;
use std::path::{Path, PathBuf};

use gbt_trust_core::data::Table;
use gbt_trust_core::gbt::rmse;
use gbt_trust_core::rng::stream;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::{json, Value};

use super::explain::load_model;
use super::load_data;
use super::train::{holdout_split, TrainSnapshot, MODEL_FILE, TRACE_FILE};
use super::tune::LEADERBOARD_FILE;
use super::summarize::SUMMARY_FILE;
use super::record;
use crate::error::{CliError, Result};
use crate::manifest::{digest_file, Manifest, Outputs, MANIFEST_PREFIX};
use crate::{AuditArgs, Context, DataArgs};

pub const AUDIT_FILE: &str = "audit.json";
pub const AUDIT_FORMAT: &str = "gbt-trust-audit/1";
const AUDIT_MANIFEST: &str = "manifest-audit.json";

pub const EVALUATED: &str = "evaluated";
pub const EVIDENCE_ONLY: &str = "evidence only";
pub const NOT_EVALUATED: &str = "not evaluated";
pub const OUT_OF_SCOPE: &str = "out of scope — not evaluated";

/// Stream index for the robustness noise draws.
const NOISE_STREAM: u64 = 0x0B05;

#[derive(Debug, Clone, Serialize)]
pub struct Evidence {
    pub artifact: String,
    pub metrics: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyEntry {
    pub property: String,
    pub status: String,
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub format: String,
    pub directory: String,
    pub manifests: Vec<String>,
    pub value: Vec<PropertyEntry>,
    pub evaluation: Vec<PropertyEntry>,
    pub selection: Vec<PropertyEntry>,
}

impl AuditReport {
    pub fn entries(&self) -> impl Iterator<Item = &PropertyEntry> {
        self.value.iter().chain(&self.evaluation).chain(&self.selection)
    }
}

struct Found {
    path: PathBuf,
    rel: String,
    manifest: Manifest,
}

impl Found {
    fn dir(&self) -> &Path {
        self.path.parent().expect("manifest has a parent")
    }

    fn artifact(&self, name: &str) -> Option<(PathBuf, String)> {
        let p = self.manifest.artifact_path(self.dir(), name)?;
        p.is_file().then(|| {
            let rel = Path::new(&self.rel).with_file_name(name);
            (p, rel.display().to_string())
        })
    }
}

fn collect(root: &Path, dir: &Path, found: &mut Vec<Found>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir.display(), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect(root, &p, found)?;
            continue;
        }
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if !name.starts_with(MANIFEST_PREFIX) || !name.ends_with(".json") || name == AUDIT_MANIFEST {
            continue;
        }
        let manifest = Manifest::load(&p)?;
        let rel = p.strip_prefix(root).unwrap_or(&p).display().to_string();
        found.push(Found { path: p, rel, manifest });
    }
    Ok(())
}

/// Adds `noise · σ_j · z` to every present cell, with `σ_j` the population
/// std of feature `j` and `z` standard normal, drawn row by row.
pub fn perturb(t: &Table, noise: f64, seed: u64) -> Result<Table> {
    let d = t.n_features();
    let sigma: Vec<f64> = (0..d)
        .map(|j| {
            let col = t.present_column(j);
            if col.is_empty() {
                return 0.0;
            }
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt()
        })
        .collect();
    let mut rng = stream(seed, &[NOISE_STREAM]);
    let rows: Vec<Vec<f64>> = t
        .rows()
        .map(|row| {
            row.iter()
                .zip(&sigma)
                .map(|(&v, &s)| {
                    if v.is_nan() {
                        v
                    } else {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        v + noise * s * z
                    }
                })
                .collect()
        })
        .collect();
    Ok(Table::from_rows(
        t.feature_names().to_vec(),
        &rows,
        t.target().to_vec(),
        t.target_name(),
    )?)
}

/// Reruns a recorded training setup's evaluation set with and without noise.
fn robustness(f: &Found, noise: f64, seed: u64) -> Result<Value> {
    let snap: TrainSnapshot = serde_json::from_value(f.manifest.config.clone())
        .map_err(|e| CliError::Schema(format!("{}: train config: {e}", f.rel)))?;
    let data = f
        .manifest
        .input("data")
        .ok_or_else(|| CliError::Schema(format!("{}: no data input", f.rel)))?;
    if digest_file(&data.path)? != data.sha256 {
        return Err(CliError::Mismatch(format!(
            "{} changed since {}",
            data.path.display(),
            f.rel
        )));
    }
    let (model_path, _) = f
        .artifact(MODEL_FILE)
        .ok_or_else(|| CliError::Schema(format!("{}: model artifact missing", f.rel)))?;
    let model = load_model(&model_path)?;
    let t = load_data(&DataArgs {
        data: data.path.clone(),
        target: snap.target.clone(),
        log_target: snap.log_target,
    })?;
    let (fit, hold) = holdout_split(&t, snap.holdout, snap.train_config.seed)?;
    let (eval, set) = match hold {
        Some(h) => (h, "holdout"),
        None => (fit, "training"),
    };
    let clean = rmse(&model.predict_table(&eval)?, eval.target())?;
    let noisy_t = perturb(&eval, noise, seed)?;
    let noisy = rmse(&model.predict_table(&noisy_t)?, noisy_t.target())?;
    Ok(json!({
        "evaluation_set": set,
        "rows": eval.n_rows(),
        "noise": noise,
        "seed": seed,
        "rmse": clean,
        "rmse_perturbed": noisy,
        "rmse_delta": noisy - clean,
    }))
}

/// Last row of a trace CSV as `{column: value}`.
fn last_trace_row(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let last = lines.last().unwrap_or("");
    let mut m = serde_json::Map::new();
    for (h, v) in header.iter().zip(last.split(',')) {
        m.insert(h.to_string(), json!(v.parse::<f64>().ok()));
    }
    Ok(Value::Object(m))
}

/// Best leaderboard row's mean and std of fold RMSE.
fn leaderboard_top(path: &Path) -> Result<(Option<f64>, Option<f64>, usize)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let top: Vec<&str> = rows.first().map(|r| r.split(',').collect()).unwrap_or_default();
    let get = |c: Option<usize>| c.and_then(|c| top.get(c)).and_then(|v| v.parse::<f64>().ok());
    Ok((get(col("mean_rmse")), get(col("std_rmse")), rows.len()))
}

fn entry(property: &str, status: &str, evidence: Vec<Evidence>) -> PropertyEntry {
    PropertyEntry {
        property: property.to_string(),
        status: status.to_string(),
        evidence,
    }
}

fn out_of_scope(property: &str) -> PropertyEntry {
    entry(property, OUT_OF_SCOPE, Vec::new())
}

fn status_for(evidence: &[Evidence], present: &str) -> &'static str {
    match (evidence.is_empty(), present) {
        (true, _) => NOT_EVALUATED,
        (false, EVIDENCE_ONLY) => EVIDENCE_ONLY,
        (false, _) => EVALUATED,
    }
}

pub fn build_report(dir: &Path, noise: f64, seed: u64) -> Result<AuditReport> {
    if !dir.is_dir() {
        return Err(CliError::Io(format!("{} is not a directory", dir.display())));
    }
    let mut found = Vec::new();
    collect(dir, dir, &mut found)?;
    if found.is_empty() {
        return Err(CliError::Io(format!(
            "no run manifests found under {}",
            dir.display()
        )));
    }
    let by = |cmd: &'static str| found.iter().filter(move |f| f.manifest.command == cmd);

    let mut explain = Vec::new();
    for f in by("explain") {
        for a in &f.manifest.artifacts {
            if let Some((_, rel)) = f.artifact(&a.path) {
                let method = f.manifest.config.get("method").cloned().unwrap_or(Value::Null);
                explain.push(Evidence {
                    artifact: rel,
                    metrics: json!({ "method": method, "present": true }),
                });
            }
        }
    }
    let mut methods: Vec<String> = explain
        .iter()
        .filter_map(|e| e.metrics["method"].as_str().map(String::from))
        .collect();
    methods.sort();
    methods.dedup();

    let mut transparency = Vec::new();
    for f in &found {
        transparency.push(Evidence {
            artifact: f.rel.clone(),
            metrics: json!({ "command": f.manifest.command, "present": true }),
        });
    }
    for f in by("train") {
        if let Some((_, rel)) = f.artifact(MODEL_FILE) {
            transparency.push(Evidence {
                artifact: rel,
                metrics: json!({ "model_format": "gbt-trust/1", "present": true }),
            });
        }
    }

    let mut accuracy = Vec::new();
    let mut robust = Vec::new();
    for f in by("train") {
        if let Some((path, rel)) = f.artifact(TRACE_FILE) {
            accuracy.push(Evidence { artifact: rel, metrics: last_trace_row(&path)? });
        }
        if f.artifact(MODEL_FILE).is_some() {
            let metrics = match robustness(f, noise, seed) {
                Ok(m) => m,
                Err(e) => json!({ "error": e.to_string() }),
            };
            let ok = metrics.get("rmse_delta").is_some();
            let artifact = Path::new(&f.rel).with_file_name(MODEL_FILE).display().to_string();
            if ok {
                robust.push(Evidence { artifact, metrics });
            } else {
                eprintln!("gbt-trust: robustness skipped for {}: {}", f.rel, metrics["error"]);
            }
        }
    }
    let mut reliability = Vec::new();
    for f in by("tune") {
        if let Some((path, rel)) = f.artifact(LEADERBOARD_FILE) {
            let (mean, std, trials) = leaderboard_top(&path)?;
            accuracy.push(Evidence {
                artifact: rel.clone(),
                metrics: json!({ "best_mean_rmse": mean, "trials": trials }),
            });
            reliability.push(Evidence {
                artifact: rel,
                metrics: json!({
                    "best_std_rmse": std,
                    "k": f.manifest.config.get("k").cloned().unwrap_or(Value::Null),
                }),
            });
        }
    }

    let mut usability = Vec::new();
    for f in by("summarize") {
        if let Some((_, rel)) = f.artifact(SUMMARY_FILE) {
            usability.push(Evidence { artifact: rel, metrics: json!({ "present": true }) });
        }
    }

    let mut reproducibility = Vec::new();
    for f in &found {
        let inputs_intact = f
            .manifest
            .inputs
            .iter()
            .all(|i| digest_file(&i.path).is_ok_and(|d| d == i.sha256));
        reproducibility.push(Evidence {
            artifact: f.rel.clone(),
            metrics: json!({
                "command": f.manifest.command,
                "seeds": f.manifest.seeds,
                "artifacts": f.manifest.artifacts.len(),
                "inputs_intact": inputs_intact,
            }),
        });
    }

    let explain_status = status_for(&explain, EVALUATED);
    let mut explainability = entry("explainability/interpretability", explain_status, explain);
    if !methods.is_empty() {
        explainability.evidence.insert(
            0,
            Evidence {
                artifact: String::new(),
                metrics: json!({ "methods": methods }),
            },
        );
    }

    Ok(AuditReport {
        format: AUDIT_FORMAT.to_string(),
        directory: fs::canonicalize(dir)
            .unwrap_or_else(|_| dir.to_path_buf())
            .display()
            .to_string(),
        manifests: found.iter().map(|f| f.rel.clone()).collect(),
        value: vec![
            out_of_scope("justice"),
            explainability,
            entry("transparency", status_for(&transparency, EVALUATED), transparency),
            out_of_scope("fairness"),
        ],
        evaluation: vec![
            entry("accuracy", status_for(&accuracy, EVALUATED), accuracy),
            entry("usability", status_for(&usability, EVIDENCE_ONLY), usability),
            out_of_scope("security/privacy"),
            out_of_scope("availability"),
        ],
        selection: vec![
            entry("robustness", status_for(&robust, EVALUATED), robust),
            entry("reproducibility", status_for(&reproducibility, EVALUATED), reproducibility),
            entry("reliability", status_for(&reliability, EVALUATED), reliability),
            out_of_scope("accountability"),
        ],
    })
}

pub fn run(args: &AuditArgs, ctx: &Context) -> Result<String> {
    if !(args.noise.is_finite() && args.noise >= 0.0) {
        return Err(CliError::Config(format!(
            "--noise must be a nonnegative number, got {}",
            args.noise
        )));
    }
    let report = build_report(&args.dir, args.noise, args.seed)?;
    let out_dir = args.out.clone().unwrap_or_else(|| args.dir.clone());
    let mut out = Outputs::new(&out_dir)?;
    out.write_json(AUDIT_FILE, &report)?;
    let inputs = report
        .manifests
        .iter()
        .map(|rel| crate::manifest::input_digest("manifest", &args.dir.join(rel)))
        .collect::<Result<Vec<_>>>()?;
    let run = record(
        ctx,
        "audit",
        "audit",
        &[("noise", args.seed)],
        inputs,
        json!({ "noise": args.noise }),
    );
    out.finish(run)?;
    let evaluated = report.entries().filter(|e| e.status == EVALUATED).count();
    Ok(format!(
        "properties={} evaluated={} manifests={}",
        report.entries().count(),
        evaluated,
        report.manifests.len()
    ))
}
