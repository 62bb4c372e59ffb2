pub mod audit;
pub mod explain;
pub mod generate;
pub mod replay;
pub mod summarize;
pub mod train;
pub mod tune;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use gbt_trust_core::data::{load_csv, Table};
use gbt_trust_core::gbt::TrainConfig;
use serde::de::DeserializeOwned;

use crate::error::{CliError, Result};
use crate::manifest::{input_digest, InputDigest, RunRecord};
use crate::{Context, DataArgs};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))
}

/// Parses a JSON file; parse failures become `invalid(message)`.
pub(crate) fn read_json<T: DeserializeOwned>(
    path: &Path,
    invalid: impl Fn(String) -> CliError,
) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Loads the data file, applying the log transform when requested.
pub(crate) fn load_data(args: &DataArgs) -> Result<Table> {
    let loaded = load_csv(&args.data, &args.target)?;
    if loaded.dropped_rows > 0 {
        eprintln!(
            "gbt-trust: dropped {} row(s) with a missing `{}`",
            loaded.dropped_rows, args.target
        );
    }
    if !args.log_target {
        return Ok(loaded.table);
    }
    let t = loaded.table;
    if let Some(i) = t.target().iter().position(|&y| y <= 0.0) {
        return Err(CliError::Schema(format!(
            "--log-target needs positive targets; row {i} has {}",
            t.target()[i]
        )));
    }
    Ok(t.map_target(f64::ln)?)
}

pub(crate) fn train_config(path: Option<&Path>) -> Result<TrainConfig> {
    let cfg = match path {
        Some(p) => read_json(p, CliError::Config)?,
        None => TrainConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub(crate) fn data_input(args: &DataArgs) -> Result<InputDigest> {
    input_digest("data", &args.data)
}

pub(crate) fn record(
    ctx: &Context,
    command: &str,
    stem: &str,
    seeds: &[(&str, u64)],
    inputs: Vec<InputDigest>,
    config: serde_json::Value,
) -> RunRecord {
    RunRecord {
        command: command.to_string(),
        stem: stem.to_string(),
        seeds: seeds
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect::<BTreeMap<_, _>>(),
        inputs,
        config,
        invocation: ctx.invocation.clone(),
    }
}
