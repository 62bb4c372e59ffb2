//! Gradient-boosted regression trees under squared-error loss.
//!
//! The ensemble is `f(x) = base + γ Σ_b tree_b(x)` with `base = mean(y)`.
//! For `L = ½ Σ (y − f)²` the gradient at the current fit is `g = f − y`, so
//! the steepest-descent step `f_b = f_{b−1} − γ g_b` amounts to fitting each
//! tree to the residuals `y − f_{b−1}` and adding it with weight `γ`.

mod model_io;
mod split;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Table};
use crate::rng;
use crate::Predictor;

pub use model_io::{deserialize_model, serialize_model, MODEL_FORMAT};
pub use split::{best_split, SplitCandidate};
pub use tree::{Node, RegressionTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GbtError {
    #[error("training table is empty")]
    EmptyTable,
    #[error("config out of range: {0}")]
    ConfigOutOfRange(String),
    #[error("feature names differ from the training features")]
    FeatureMismatch,
    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("vectors are empty")]
    EmptyVectors,
    #[error("model format `{found}` is not supported (expected `{expected}`)")]
    VersionMismatch { found: String, expected: String },
    #[error("corrupt model: {0}")]
    CorruptModel(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T> = std::result::Result<T, GbtError>;

/// Boosting hyperparameters. Defaults are the tuned configuration reported
/// for the technology-sector CDS panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub shrinkage: f64,
    pub max_depth: usize,
    pub min_node_rows: usize,
    pub bag_fraction: f64,
    pub column_sample: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_trees: 500,
            shrinkage: 0.10,
            max_depth: 5,
            min_node_rows: 1,
            bag_fraction: 0.8,
            column_sample: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(GbtError::ConfigOutOfRange(format!("{name} = {v} must lie in (0, 1]")))
            }
        };
        let positive = |name: &str, v: usize| {
            if v >= 1 {
                Ok(())
            } else {
                Err(GbtError::ConfigOutOfRange(format!("{name} must be at least 1")))
            }
        };
        positive("n_trees", self.n_trees)?;
        positive("max_depth", self.max_depth)?;
        positive("min_node_rows", self.min_node_rows)?;
        unit("shrinkage", self.shrinkage)?;
        unit("bag_fraction", self.bag_fraction)?;
        unit("column_sample", self.column_sample)
    }
}

/// A fitted boosted model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    base_score: f64,
    shrinkage: f64,
    trees: Vec<RegressionTree>,
    feature_names: Vec<String>,
    train_config: TrainConfig,
}

impl Ensemble {
    /// Assembles a model from parts, e.g. a hand-built or deserialized one.
    pub fn from_parts(
        base_score: f64,
        shrinkage: f64,
        trees: Vec<RegressionTree>,
        feature_names: Vec<String>,
        train_config: TrainConfig,
    ) -> Result<Self> {
        if !base_score.is_finite() || !shrinkage.is_finite() {
            return Err(GbtError::CorruptModel("non-finite base score or shrinkage".into()));
        }
        if feature_names.is_empty() {
            return Err(GbtError::CorruptModel("no feature names".into()));
        }
        for tree in &trees {
            RegressionTree::from_nodes(tree.nodes().to_vec(), tree.root(), feature_names.len())
                .map_err(GbtError::CorruptModel)?;
        }
        Ok(Self {
            base_score,
            shrinkage,
            trees,
            feature_names,
            train_config,
        })
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.train_config
    }

    /// `base + γ Σ tree(x)`; `NaN` cells follow each node's default direction.
    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_names.len() {
            return Err(GbtError::DimensionMismatch {
                expected: self.feature_names.len(),
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        self.base_score + self.shrinkage * sum
    }

    /// Predictions for every row of `t`, which must carry the training features.
    pub fn predict_table(&self, t: &Table) -> Result<Vec<f64>> {
        if t.feature_names() != self.feature_names.as_slice() {
            return Err(GbtError::FeatureMismatch);
        }
        Ok(t.rows().map(|r| self.predict_unchecked(r)).collect())
    }
}

impl Predictor for Ensemble {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn predict(&self, x: &[f64]) -> f64 {
        self.predict_unchecked(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Euclidean norm of the gradient `f_{b−1} − y` over the training rows.
    pub gradient_norm: f64,
    pub train_rmse: f64,
    pub valid_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_validation(&self) -> bool {
        self.records.first().is_some_and(|r| r.valid_rmse.is_some())
    }

    /// CSV with columns `iteration,gradient_norm,train_rmse[,valid_rmse]`.
    pub fn to_csv(&self) -> String {
        let valid = self.has_validation();
        let mut out = String::from("iteration,gradient_norm,train_rmse");
        if valid {
            out.push_str(",valid_rmse");
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{},{},{}", r.iteration, r.gradient_norm, r.train_rmse));
            if let (true, Some(v)) = (valid, r.valid_rmse) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(GbtError::LengthMismatch(predicted.len(), actual.len()));
    }
    if predicted.is_empty() {
        return Err(GbtError::EmptyVectors);
    }
    let sse: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok((sse / predicted.len() as f64).sqrt())
}

/// Fits `cfg.n_trees` trees by steepest descent on squared error. Iteration
/// `b` draws its row bag and feature subset from substreams `(seed, b, ·)`.
pub fn train(
    t: &Table,
    cfg: &TrainConfig,
    holdout: Option<&Table>,
) -> Result<(Ensemble, TrainTrace)> {
    cfg.validate()?;
    let n = t.n_rows();
    if n == 0 {
        return Err(GbtError::EmptyTable);
    }
    if let Some(h) = holdout {
        if h.feature_names() != t.feature_names() {
            return Err(GbtError::FeatureMismatch);
        }
    }
    let d = t.n_features();
    let y = t.target();
    let base_score = y.iter().sum::<f64>() / n as f64;

    let n_bag = ((cfg.bag_fraction * n as f64).round() as usize).clamp(1, n);
    let n_cols = ((cfg.column_sample * d as f64).round() as usize).clamp(1, d);

    let mut fitted = vec![base_score; n];
    let mut holdout_fit = holdout.map(|h| vec![base_score; h.n_rows()]);
    let mut residuals = vec![0.0; n];
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut trace = TrainTrace::default();

    for b in 0..cfg.n_trees {
        // negative gradient of ½Σ(y − f)² at f_{b−1}
        for ((r, &yi), &fi) in residuals.iter_mut().zip(y).zip(&fitted) {
            *r = yi - fi;
        }
        let gradient_norm = residuals.iter().map(|r| r * r).sum::<f64>().sqrt();

        let rows = if n_bag == n {
            (0..n).collect()
        } else {
            rng::sample_sorted(n, n_bag, &mut rng::stream(cfg.seed, &[b as u64, 0]))
        };
        let features: Vec<usize> = if n_cols == d {
            (0..d).collect()
        } else {
            rng::sample_sorted(d, n_cols, &mut rng::stream(cfg.seed, &[b as u64, 1]))
        };
        let tree = tree::grow(
            &tree::GrowParams {
                table: t,
                residuals: &residuals,
                features: &features,
                max_depth: cfg.max_depth,
                min_node_rows: cfg.min_node_rows,
            },
            rows,
        );

        for (f, row) in fitted.iter_mut().zip(t.rows()) {
            *f += cfg.shrinkage * tree.predict(row);
        }
        let valid_rmse = match (holdout, holdout_fit.as_mut()) {
            (Some(h), Some(hf)) => {
                for (f, row) in hf.iter_mut().zip(h.rows()) {
                    *f += cfg.shrinkage * tree.predict(row);
                }
                Some(rmse(hf, h.target())?)
            }
            _ => None,
        };
        trace.records.push(TraceRecord {
            iteration: b + 1,
            gradient_norm,
            train_rmse: rmse(&fitted, y)?,
            valid_rmse,
        });
        trees.push(tree);
    }

    let ensemble = Ensemble {
        base_score,
        shrinkage: cfg.shrinkage,
        trees,
        feature_names: t.feature_names().to_vec(),
        train_config: cfg.clone(),
    };
    Ok((ensemble, trace))
}
