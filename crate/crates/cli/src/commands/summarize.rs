use gbt_trust_core::data::summarize;
use serde_json::json;

use super::{data_input, load_data, record};
use crate::error::Result;
use crate::manifest::Outputs;
use crate::{Context, SummarizeArgs};

pub const SUMMARY_FILE: &str = "summary.json";

pub fn run(args: &SummarizeArgs, ctx: &Context) -> Result<String> {
    let t = load_data(&args.data)?;
    let summary = summarize(&t);
    let mut out = Outputs::new(&args.out)?;
    out.write_json(SUMMARY_FILE, &summary)?;
    let run = record(
        ctx,
        "summarize",
        "summarize",
        &[],
        vec![data_input(&args.data)?],
        json!({ "target": args.data.target, "log_target": args.data.log_target }),
    );
    out.finish(run)?;
    Ok(format!(
        "rows={} features={} trainable={}",
        summary.n_rows,
        summary.n_features,
        summary.trainable_features().len()
    ))
}
