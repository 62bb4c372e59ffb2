use gbt_trust_core::synthgen::{generate_panel, IntensityModel, PanelSpec};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{read_json, record};
use crate::error::{CliError, Result};
use crate::manifest::{input_digest, Outputs};
use crate::{Context, GenerateArgs};

pub const PANEL_FILE: &str = "panel.csv";
pub const LAMBDA_FILE: &str = "lambda.csv";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub model: IntensityModel,
    pub panel: PanelSpec,
}

pub fn run(args: &GenerateArgs, ctx: &Context) -> Result<String> {
    let spec: GenerateSpec = read_json(&args.config, |m| CliError::Io(format!("invalid spec: {m}")))?;
    let panel = generate_panel(&spec.model, &spec.panel)?;

    let mut out = Outputs::new(&args.out)?;
    let mut csv = Vec::new();
    panel.table.write_csv(&mut csv)?;
    out.write(PANEL_FILE, &csv)?;
    let mut lambdas = Vec::new();
    panel.write_lambda_csv(&mut lambdas)?;
    out.write(LAMBDA_FILE, &lambdas)?;

    let run = record(
        ctx,
        "generate",
        "generate",
        &[("panel", spec.panel.seed)],
        vec![input_digest("spec", &args.config)?],
        json!(spec),
    );
    out.finish(run)?;
    Ok(format!(
        "rows={} features={}",
        panel.table.n_rows(),
        panel.table.n_features()
    ))
}
