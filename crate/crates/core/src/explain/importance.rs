use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_width, ExplainError, Result};
use crate::data::Table;
use crate::gbt::{rmse, Ensemble, Node};
use crate::rng;
use crate::Predictor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ImportanceMode {
    Gain,
    Permutation { repeats: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub feature_index: usize,
    /// Raw score. Permutation scores may be negative.
    pub score: f64,
    /// Share of the total clamped score, in percent.
    pub relative_percent: f64,
    /// Spread of the per-repeat permutation scores (sample std).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
}

impl ImportanceEntry {
    fn ranking_score(&self) -> f64 {
        self.score.max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    #[serde(flatten)]
    pub mode: ImportanceMode,
    /// Descending by clamped score, ties by feature index.
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceReport {
    fn from_scores(mode: ImportanceMode, names: &[String], scores: Vec<(f64, Option<f64>)>) -> Self {
        let total: f64 = scores.iter().map(|(s, _)| s.max(0.0)).sum();
        let mut entries: Vec<ImportanceEntry> = scores
            .into_iter()
            .enumerate()
            .map(|(j, (score, std))| ImportanceEntry {
                feature: names[j].clone(),
                feature_index: j,
                score,
                relative_percent: if total > 0.0 {
                    100.0 * score.max(0.0) / total
                } else {
                    0.0
                },
                std,
            })
            .collect();
        entries.sort_by(|a, b| {
            b.ranking_score()
                .total_cmp(&a.ranking_score())
                .then(a.feature_index.cmp(&b.feature_index))
        });
        ImportanceReport { mode, entries }
    }

    /// Up to `k` leading entries with a positive clamped score.
    pub fn top(&self, k: usize) -> Vec<&ImportanceEntry> {
        self.entries
            .iter()
            .filter(|e| e.ranking_score() > 0.0)
            .take(k)
            .collect()
    }

    /// 1-based rank of a feature in the report.
    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.feature == feature).map(|p| p + 1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,feature,score,relative_percent,std\n");
        for (i, e) in self.entries.iter().enumerate() {
            let std = e.std.map(|s| s.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i + 1,
                e.feature,
                e.score,
                e.relative_percent,
                std
            ));
        }
        out
    }
}

/// Total split gain per feature over every tree.
pub fn importance_gain(e: &Ensemble) -> ImportanceReport {
    let mut scores = vec![0.0; e.n_features()];
    for tree in e.trees() {
        for node in tree.nodes() {
            if let Node::Split { feature, gain, .. } = node {
                scores[*feature] += gain;
            }
        }
    }
    ImportanceReport::from_scores(
        ImportanceMode::Gain,
        e.feature_names(),
        scores.into_iter().map(|s| (s, None)).collect(),
    )
}

/// Mean increase in RMSE when one column is shuffled, over `repeats` seeded
/// shuffles per feature.
pub fn importance_permutation<P: Predictor>(
    model: &P,
    t: &Table,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    check_width(model.n_features(), t.n_features())?;
    if t.n_rows() < 2 {
        return Err(ExplainError::InvalidArgument(
            "permutation importance needs at least 2 rows".into(),
        ));
    }
    if repeats == 0 {
        return Err(ExplainError::InvalidArgument("repeats must be ≥ 1".into()));
    }
    let n = t.n_rows();
    let d = t.n_features();
    let baseline_pred: Vec<f64> = (0..n).into_par_iter().map(|i| model.predict(t.row(i))).collect();
    let baseline = rmse(&baseline_pred, t.target())?;
    let values = t.values();

    let scores = (0..d)
        .into_par_iter()
        .map(|j| {
            let reps = (0..repeats)
                .map(|r| {
                    let perm = rng::permutation(n, &mut rng::stream(seed, &[j as u64, r as u64]));
                    let pred: Vec<f64> = (0..n)
                        .map(|i| {
                            let mut x = t.row(i).to_vec();
                            x[j] = values[perm[i] * d + j];
                            model.predict(&x)
                        })
                        .collect();
                    rmse(&pred, t.target()).map(|e| e - baseline)
                })
                .collect::<std::result::Result<Vec<f64>, _>>()?;
            let mean = reps.iter().sum::<f64>() / repeats as f64;
            let std = if repeats > 1 {
                let ss: f64 = reps.iter().map(|s| (s - mean) * (s - mean)).sum();
                (ss / (repeats - 1) as f64).sqrt()
            } else {
                0.0
            };
            Ok((mean, Some(std)))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ImportanceReport::from_scores(
        ImportanceMode::Permutation { repeats, seed },
        t.feature_names(),
        scores,
    ))
}
