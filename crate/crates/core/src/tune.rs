//! Cross-validated hyperparameter grid search.
//!
//! Every trial trains on the same fold plan. A trial's boosting seed is
//! derived from `(search seed, config index)` and results are sorted once all
//! trials finish, so the leaderboard does not depend on the worker count.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{kfold_split, DataError, FoldPlan, Table};
use crate::gbt::{rmse, train, GbtError, TrainConfig};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TuneError {
    #[error("grid has no parameter values")]
    EmptyGrid,
    #[error("invalid grid value for {param}: {reason}")]
    InvalidValue { param: &'static str, reason: String },
    #[error("unknown grid parameter `{0}`")]
    UnknownParameter(String),
    #[error("leaderboard has no successful trial")]
    AllTrialsFailed,
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Gbt(#[from] GbtError),
}

pub type Result<T> = std::result::Result<T, TuneError>;

/// Tunable fields of [`TrainConfig`]. Variant order is alphabetical by name,
/// which fixes the enumeration order of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Param {
    BagFraction,
    ColumnSample,
    MaxDepth,
    MinNodeRows,
    NTrees,
    Shrinkage,
}

impl Param {
    pub const ALL: [Param; 6] = [
        Param::BagFraction,
        Param::ColumnSample,
        Param::MaxDepth,
        Param::MinNodeRows,
        Param::NTrees,
        Param::Shrinkage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::BagFraction => "bag_fraction",
            Param::ColumnSample => "column_sample",
            Param::MaxDepth => "max_depth",
            Param::MinNodeRows => "min_node_rows",
            Param::NTrees => "n_trees",
            Param::Shrinkage => "shrinkage",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    fn is_integer(self) -> bool {
        matches!(self, Param::MaxDepth | Param::MinNodeRows | Param::NTrees)
    }

    fn apply(self, cfg: &mut TrainConfig, v: f64) {
        match self {
            Param::BagFraction => cfg.bag_fraction = v,
            Param::ColumnSample => cfg.column_sample = v,
            Param::MaxDepth => cfg.max_depth = v as usize,
            Param::MinNodeRows => cfg.min_node_rows = v as usize,
            Param::NTrees => cfg.n_trees = v as usize,
            Param::Shrinkage => cfg.shrinkage = v,
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Value lists per tuned parameter; unlisted fields come from `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub base: TrainConfig,
    axes: BTreeMap<Param, Vec<f64>>,
}

impl Grid {
    pub fn new(base: TrainConfig) -> Self {
        Self {
            base,
            axes: BTreeMap::new(),
        }
    }

    /// Adds (or replaces) the value list for `param`.
    pub fn with(mut self, param: Param, values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let values: Vec<f64> = values.into_iter().collect();
        if values.is_empty() {
            return Err(TuneError::EmptyGrid);
        }
        for &v in &values {
            let mut probe = self.base.clone();
            if param.is_integer() && (v.fract() != 0.0 || v < 1.0) {
                return Err(TuneError::InvalidValue {
                    param: param.name(),
                    reason: format!("{v} is not a positive integer"),
                });
            }
            param.apply(&mut probe, v);
            probe.validate().map_err(|e| TuneError::InvalidValue {
                param: param.name(),
                reason: e.to_string(),
            })?;
        }
        self.axes.insert(param, values);
        Ok(self)
    }

    /// Parses a `{"parameter": [values…]}` map.
    pub fn from_json(text: &str, base: TrainConfig) -> Result<Self> {
        let map: BTreeMap<String, Vec<f64>> =
            serde_json::from_str(text).map_err(|e| TuneError::InvalidValue {
                param: "grid",
                reason: e.to_string(),
            })?;
        let mut grid = Grid::new(base);
        for (name, values) in map {
            let p = Param::from_name(&name).ok_or(TuneError::UnknownParameter(name))?;
            grid = grid.with(p, values)?;
        }
        if grid.axes.is_empty() {
            return Err(TuneError::EmptyGrid);
        }
        Ok(grid)
    }

    pub fn to_json(&self) -> String {
        let map: BTreeMap<&str, &Vec<f64>> = self.axes.iter().map(|(p, v)| (p.name(), v)).collect();
        serde_json::to_string_pretty(&map).expect("grid serializes")
    }

    pub fn axes(&self) -> impl Iterator<Item = (Param, &[f64])> {
        self.axes.iter().map(|(p, v)| (*p, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.axes.values().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }

    /// The 36-point exploratory boosting grid: shrinkage × depth × min rows × bag fraction.
    pub fn initial_search() -> Self {
        Grid::new(TrainConfig {
            n_trees: 500,
            ..TrainConfig::default()
        })
        .with(Param::Shrinkage, [0.01, 0.1, 0.3])
        .and_then(|g| g.with(Param::MaxDepth, [1.0, 3.0, 5.0]))
        .and_then(|g| g.with(Param::MinNodeRows, [1.0, 5.0]))
        .and_then(|g| g.with(Param::BagFraction, [0.85, 1.0]))
        .expect("static grid is valid")
    }

    /// The 243-point (3⁵) full search around the tuned configuration.
    pub fn full_search() -> Self {
        Grid::new(TrainConfig::default())
            .with(Param::Shrinkage, [0.05, 0.1, 0.3])
            .and_then(|g| g.with(Param::MaxDepth, [3.0, 5.0, 7.0]))
            .and_then(|g| g.with(Param::MinNodeRows, [1.0, 3.0, 5.0]))
            .and_then(|g| g.with(Param::BagFraction, [0.7, 0.8, 1.0]))
            .and_then(|g| g.with(Param::ColumnSample, [0.6, 0.8, 1.0]))
            .expect("static grid is valid")
    }
}

/// Cartesian product of the grid, with the alphabetically first parameter
/// varying slowest and each axis in its listed order.
pub fn enumerate_grid(g: &Grid) -> Result<Vec<TrainConfig>> {
    if g.axes.is_empty() || g.axes.values().any(Vec::is_empty) {
        return Err(TuneError::EmptyGrid);
    }
    let mut configs = vec![g.base.clone()];
    for (&param, values) in &g.axes {
        configs = configs
            .into_iter()
            .flat_map(|cfg| {
                values.iter().map(move |&v| {
                    let mut c = cfg.clone();
                    param.apply(&mut c, v);
                    c
                })
            })
            .collect();
    }
    Ok(configs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    /// Position in `enumerate_grid` order.
    pub index: usize,
    pub config: TrainConfig,
    pub fold_rmses: Vec<f64>,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    pub wall_time: f64,
    pub error: Option<String>,
}

impl TrialResult {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// Equality on every field except `wall_time`.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.index == other.index
            && self.config == other.config
            && bits(&self.fold_rmses) == bits(&other.fold_rmses)
            && self.mean_rmse.to_bits() == other.mean_rmse.to_bits()
            && self.std_rmse.to_bits() == other.std_rmse.to_bits()
            && self.error == other.error
    }
}

/// Mean and sample standard deviation, summed left to right.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().fold(0.0, |acc, v| acc + v) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().fold(0.0, |acc, v| acc + (v - mean) * (v - mean)) / (n - 1.0);
    (mean, var.sqrt())
}

fn config_key(c: &TrainConfig) -> [f64; 7] {
    [
        c.bag_fraction,
        c.column_sample,
        c.max_depth as f64,
        c.min_node_rows as f64,
        c.n_trees as f64,
        c.shrinkage,
        c.seed as f64,
    ]
}

/// Leaderboard order: successful trials by ascending mean RMSE, ties broken by
/// fewer trees, then shallower depth, then the config fields in name order;
/// failed trials last, in grid order.
pub fn compare_trials(a: &TrialResult, b: &TrialResult) -> std::cmp::Ordering {
    b.is_ok()
        .cmp(&a.is_ok())
        .then_with(|| {
            if a.is_ok() {
                a.mean_rmse.total_cmp(&b.mean_rmse)
            } else {
                std::cmp::Ordering::Equal
            }
        })
        .then(a.config.n_trees.cmp(&b.config.n_trees))
        .then(a.config.max_depth.cmp(&b.config.max_depth))
        .then_with(|| {
            config_key(&a.config)
                .iter()
                .zip(config_key(&b.config).iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .then(a.index.cmp(&b.index))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub entries: Vec<TrialResult>,
}

impl Leaderboard {
    pub fn from_trials(mut entries: Vec<TrialResult>) -> Self {
        entries.sort_by(compare_trials);
        Self { entries }
    }

    pub fn same_outcome(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.same_outcome(b))
    }

    /// One row per trial: rank, grid index, config fields, per-fold RMSEs,
    /// mean, std, wall time and error text.
    pub fn to_csv(&self) -> String {
        let k = self
            .entries
            .iter()
            .map(|e| e.fold_rmses.len())
            .max()
            .unwrap_or(0);
        let mut out = String::from(
            "rank,index,n_trees,shrinkage,max_depth,min_node_rows,bag_fraction,column_sample,seed",
        );
        for f in 0..k {
            out.push_str(&format!(",fold{f}_rmse"));
        }
        out.push_str(",mean_rmse,std_rmse,wall_time,error\n");
        for (rank, e) in self.entries.iter().enumerate() {
            let c = &e.config;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}",
                rank + 1,
                e.index,
                c.n_trees,
                c.shrinkage,
                c.max_depth,
                c.min_node_rows,
                c.bag_fraction,
                c.column_sample,
                c.seed
            ));
            for f in 0..k {
                match e.fold_rmses.get(f) {
                    Some(v) => out.push_str(&format!(",{v}")),
                    None => out.push(','),
                }
            }
            out.push_str(&format!(
                ",{},{},{},{}\n",
                e.mean_rmse,
                e.std_rmse,
                e.wall_time,
                e.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
            ));
        }
        out
    }
}

/// Trains `cfg` on each fold's complement and scores RMSE on the fold.
pub fn cross_validate(t: &Table, plan: &FoldPlan, cfg: &TrainConfig) -> Result<Vec<f64>> {
    (0..plan.k)
        .map(|fold| {
            let train_part = t.select_rows(&plan.train_indices(fold))?;
            let test_part = t.select_rows(&plan.test_indices(fold))?;
            let (model, _) = train(&train_part, cfg, None)?;
            let pred = model.predict_table(&test_part)?;
            Ok(rmse(&pred, test_part.target())?)
        })
        .collect()
}

fn run_trial(t: &Table, plan: &FoldPlan, index: usize, mut config: TrainConfig, seed: u64) -> TrialResult {
    config.seed = rng::derive_seed(seed, &[index as u64]);
    let start = Instant::now();
    let outcome = cross_validate(t, plan, &config);
    let wall_time = start.elapsed().as_secs_f64();
    match outcome {
        Ok(fold_rmses) => {
            let (mean_rmse, std_rmse) = mean_std(&fold_rmses);
            TrialResult {
                index,
                config,
                fold_rmses,
                mean_rmse,
                std_rmse,
                wall_time,
                error: None,
            }
        }
        Err(e) => TrialResult {
            index,
            config,
            fold_rmses: Vec::new(),
            mean_rmse: f64::NAN,
            std_rmse: f64::NAN,
            wall_time,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every grid point under k-fold CV on `workers` threads.
pub fn run_search(t: &Table, g: &Grid, k: usize, workers: usize, seed: u64) -> Result<Leaderboard> {
    if workers == 0 {
        return Err(TuneError::NoWorkers);
    }
    let configs = enumerate_grid(g)?;
    let plan = kfold_split(t, k, seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| TuneError::ThreadPool(e.to_string()))?;
    let trials: Vec<TrialResult> = pool.install(|| {
        configs
            .into_par_iter()
            .enumerate()
            .map(|(i, cfg)| run_trial(t, &plan, i, cfg, seed))
            .collect()
    });
    Ok(Leaderboard::from_trials(trials))
}

pub fn select_best(lb: &Leaderboard) -> Result<TrainConfig> {
    lb.entries
        .iter()
        .find(|e| e.is_ok())
        .map(|e| e.config.clone())
        .ok_or(TuneError::AllTrialsFailed)
}
