use gbt_trust_core::data::{train_test_split, Table};
use gbt_trust_core::gbt::{serialize_model, train, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{data_input, load_data, record, train_config};
use crate::error::{CliError, Result};
use crate::manifest::Outputs;
use crate::{Context, TrainArgs};

pub const MODEL_FILE: &str = "model.json";
pub const TRACE_FILE: &str = "trace.csv";

/// Config snapshot stored in the train manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSnapshot {
    pub target: String,
    pub log_target: bool,
    pub holdout: f64,
    pub train_config: TrainConfig,
}

/// Splits off the holdout part the same way `train` does.
pub fn holdout_split(t: &Table, holdout: f64, seed: u64) -> Result<(Table, Option<Table>)> {
    if holdout == 0.0 {
        return Ok((t.clone(), None));
    }
    if !(holdout > 0.0 && holdout < 1.0) {
        return Err(CliError::Config(format!(
            "--holdout must be 0 or lie in (0, 1), got {holdout}"
        )));
    }
    let (fit, hold) = train_test_split(t, 1.0 - holdout, seed)?;
    Ok((fit, Some(hold)))
}

pub fn run(args: &TrainArgs, ctx: &Context) -> Result<String> {
    let mut cfg = train_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let t = load_data(&args.data)?;
    let (fit, hold) = holdout_split(&t, args.holdout, cfg.seed)?;
    let (model, trace) = train(&fit, &cfg, hold.as_ref())?;

    let mut out = Outputs::new(&args.out)?;
    out.write(MODEL_FILE, &serialize_model(&model))?;
    out.write(TRACE_FILE, trace.to_csv().as_bytes())?;
    let snapshot = TrainSnapshot {
        target: args.data.target.clone(),
        log_target: args.data.log_target,
        holdout: args.holdout,
        train_config: cfg.clone(),
    };
    let run = record(
        ctx,
        "train",
        "train",
        &[("train", cfg.seed), ("split", cfg.seed)],
        vec![data_input(&args.data)?],
        json!(snapshot),
    );
    out.finish(run)?;

    let last = trace.records.last().expect("at least one tree");
    let mut summary = format!("trees={} train_rmse={}", trace.len(), last.train_rmse);
    if let Some(v) = last.valid_rmse {
        summary.push_str(&format!(" holdout_rmse={v}"));
    }
    Ok(summary)
}
