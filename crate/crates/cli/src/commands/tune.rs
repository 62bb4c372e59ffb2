use gbt_trust_core::tune::{run_search, select_best, Grid};
use serde_json::json;

use super::{data_input, load_data, read_text, record, train_config};
use crate::error::Result;
use crate::manifest::{input_digest, Outputs};
use crate::{Context, TuneArgs};

pub const LEADERBOARD_FILE: &str = "leaderboard.csv";
pub const BEST_FILE: &str = "best_config.json";

pub fn run(args: &TuneArgs, ctx: &Context) -> Result<String> {
    let base = train_config(args.config.as_deref())?;
    let grid = Grid::from_json(&read_text(&args.grid)?, base.clone())?;
    let t = load_data(&args.data)?;
    let workers = ctx.workers(args.workers);
    let board = run_search(&t, &grid, args.k, workers, args.seed)?;
    let best = select_best(&board)?;

    let mut out = Outputs::new(&args.out)?;
    out.write(LEADERBOARD_FILE, board.to_csv().as_bytes())?;
    out.write_json(BEST_FILE, &best)?;
    let mut inputs = vec![data_input(&args.data)?, input_digest("grid", &args.grid)?];
    if let Some(c) = &args.config {
        inputs.push(input_digest("config", c)?);
    }
    let run = record(
        ctx,
        "tune",
        "tune",
        &[("search", args.seed)],
        inputs,
        json!({
            "target": args.data.target,
            "log_target": args.data.log_target,
            "k": args.k,
            "workers": workers,
            "base": base,
            "grid": serde_json::from_str::<serde_json::Value>(&grid.to_json()).expect("grid json"),
        }),
    );
    out.finish(run)?;
    let top = &board.entries[0];
    Ok(format!(
        "trials={} best_mean_rmse={} best_std_rmse={}",
        board.entries.len(),
        top.mean_rmse,
        top.std_rmse
    ))
}
