use gbt_trust_core::data::Table;
use gbt_trust_core::explain::{
    ice, importance_gain, importance_permutation, lime_explain, pdp, sample_background,
    shap_exact, shap_sampled, threshold_scan, LimeConfig, MAX_EXACT_FEATURES,
};
use gbt_trust_core::gbt::{deserialize_model, Ensemble};
use serde_json::{json, Value};

use super::{data_input, load_data, record};
use crate::error::{CliError, Result};
use crate::manifest::{input_digest, Outputs};
use crate::{Context, ExplainArgs, Method};

pub const EXPLAIN_FORMAT: &str = "gbt-trust-explain/1";

pub fn load_model(path: &std::path::Path) -> Result<Ensemble> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path.display(), e))?;
    Ok(deserialize_model(&bytes)?)
}

fn feature_index(t: &Table, args: &ExplainArgs) -> Result<(usize, String)> {
    let name = args.feature.clone().ok_or_else(|| {
        CliError::Config(format!("--method {} needs --feature", args.method.name()))
    })?;
    let j = t.feature_index(&name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown feature `{name}`; features are: {}",
            t.feature_names().join(", ")
        ))
    })?;
    Ok((j, name))
}

fn row_index(t: &Table, args: &ExplainArgs) -> Result<usize> {
    let row = args.row.ok_or_else(|| {
        CliError::Config(format!("--method {} needs --row", args.method.name()))
    })?;
    if row >= t.n_rows() {
        return Err(CliError::Config(format!(
            "--row {row} is out of range for {} rows",
            t.n_rows()
        )));
    }
    Ok(row)
}

pub fn run(args: &ExplainArgs, ctx: &Context) -> Result<String> {
    let model = load_model(&args.model)?;
    let t = load_data(&args.data)?;
    if model.feature_names() != t.feature_names() {
        return Err(CliError::Schema(format!(
            "data features [{}] differ from model features [{}]",
            t.feature_names().join(", "),
            model.feature_names().join(", ")
        )));
    }

    let (stem, params, result, summary) = match args.method {
        Method::Vi => {
            let gain = importance_gain(&model);
            let perm = importance_permutation(&model, &t, args.repeats, args.seed)?;
            let summary = format!(
                "top_gain={} top_permutation={}",
                gain.entries[0].feature, perm.entries[0].feature
            );
            (
                "explain-vi".to_string(),
                json!({ "repeats": args.repeats, "seed": args.seed }),
                json!({ "gain": gain, "permutation": perm }),
                summary,
            )
        }
        Method::Pdp => {
            let (j, name) = feature_index(&t, args)?;
            let curve = pdp(&model, &t, j, args.grid_points)?;
            let findings = threshold_scan(&curve, args.min_jump_ratio);
            let summary = format!("grid_points={} thresholds={}", curve.grid.len(), findings.len());
            (
                format!("explain-pdp-{name}"),
                json!({ "feature": name, "grid_points": args.grid_points, "min_jump_ratio": args.min_jump_ratio }),
                json!({ "curve": curve, "thresholds": findings }),
                summary,
            )
        }
        Method::Ice => {
            let (j, name) = feature_index(&t, args)?;
            let bundle = ice(&model, &t, j, args.grid_points, args.centered)?;
            let summary = format!("curves={} grid_points={}", bundle.curves.len(), bundle.grid.len());
            (
                format!("explain-ice-{name}"),
                json!({ "feature": name, "grid_points": args.grid_points, "centered": args.centered }),
                json!(bundle),
                summary,
            )
        }
        Method::Lime => {
            let row = row_index(&t, args)?;
            let cfg = LimeConfig {
                n_samples: args.samples,
                top_features: args.top,
                kernel_width: args.kernel_width,
                seed: args.seed,
            };
            let e = lime_explain(&model, t.row(row), &t, &cfg)?;
            let summary = format!("r_squared={} intercept={}", e.r_squared, e.intercept);
            (
                format!("explain-lime-row{row}"),
                json!({ "row": row, "config": cfg }),
                json!(e),
                summary,
            )
        }
        Method::Shap => {
            let row = row_index(&t, args)?;
            let d = t.n_features();
            let exact = args.exact || (!args.sampled && d <= MAX_EXACT_FEATURES);
            let bg = sample_background(&t, args.background, args.seed)?;
            let x = t.row(row);
            let attr = if exact {
                shap_exact(&model, x, &bg)?
            } else {
                shap_sampled(&model, x, &bg, args.permutations, args.seed)?
            };
            let summary = format!(
                "baseline={} prediction={} efficiency_gap={}",
                attr.baseline,
                attr.prediction,
                attr.efficiency_gap()
            );
            (
                format!("explain-shap-row{row}"),
                json!({
                    "row": row,
                    "exact": exact,
                    "background_rows": bg.n_rows(),
                    "permutations": if exact { Value::Null } else { json!(args.permutations) },
                    "seed": args.seed,
                }),
                json!(attr),
                summary,
            )
        }
    };

    let model_input = input_digest("model", &args.model)?;
    let data = data_input(&args.data)?;
    let artifact = json!({
        "format": EXPLAIN_FORMAT,
        "method": args.method.name(),
        "model_sha256": model_input.sha256,
        "data_sha256": data.sha256,
        "target": args.data.target,
        "log_target": args.data.log_target,
        "params": params,
        "result": result,
    });
    let mut out = Outputs::new(&args.out)?;
    out.write_json(&format!("{stem}.json"), &artifact)?;
    let run = record(
        ctx,
        "explain",
        &stem,
        &[("explain", args.seed)],
        vec![model_input, data],
        json!({
            "method": args.method.name(),
            "target": args.data.target,
            "log_target": args.data.log_target,
            "params": artifact["params"],
        }),
    );
    out.finish(run)?;
    Ok(summary)
}
