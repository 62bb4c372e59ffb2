use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_width, ExplainError, Result};
use crate::data::Table;
use crate::rng;
use crate::Predictor;

pub const MAX_EXACT_FEATURES: usize = 12;
pub const DEFAULT_BACKGROUND_ROWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ShapMethod {
    Exact,
    Permutation {
        n_permutations: usize,
        seed: u64,
        /// `v(full) − v(∅) − Σφ` before it was spread evenly over features.
        efficiency_residual: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapAttribution {
    pub feature_names: Vec<String>,
    pub anchor: Vec<f64>,
    pub phi: Vec<f64>,
    /// Mean prediction over the background rows.
    pub baseline: f64,
    /// Model prediction at the anchor.
    pub prediction: f64,
    #[serde(flatten)]
    pub method: ShapMethod,
    pub background_rows: usize,
}

impl ShapAttribution {
    /// `baseline + Σφ − prediction`.
    pub fn efficiency_gap(&self) -> f64 {
        self.baseline + self.phi.iter().sum::<f64>() - self.prediction
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,value,phi\n");
        for (j, name) in self.feature_names.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", name, self.anchor[j], self.phi[j]));
        }
        out
    }
}

/// Up to `n` rows drawn without replacement, kept in table order.
pub fn sample_background(t: &Table, n: usize, seed: u64) -> Result<Table> {
    if n >= t.n_rows() {
        return Ok(t.clone());
    }
    let rows = rng::sample_sorted(t.n_rows(), n, &mut rng::stream(seed, &[0xBAC6]));
    Ok(t.select_rows(&rows)?)
}

struct ValueFunction<'a, P> {
    model: &'a P,
    anchor: &'a [f64],
    background: &'a Table,
}

impl<P: Predictor> ValueFunction<'_, P> {
    /// Mean over background rows of the prediction on the row that takes the
    /// anchor's value where `in_coalition` is set.
    fn eval(&self, in_coalition: impl Fn(usize) -> bool) -> f64 {
        let d = self.anchor.len();
        let mut x = vec![0.0; d];
        let mut total = 0.0;
        for z in self.background.rows() {
            for j in 0..d {
                x[j] = if in_coalition(j) { self.anchor[j] } else { z[j] };
            }
            total += self.model.predict(&x);
        }
        total / self.background.n_rows() as f64
    }
}

fn prepare<'a, P: Predictor>(
    model: &'a P,
    anchor: &'a [f64],
    background: &'a Table,
) -> Result<ValueFunction<'a, P>> {
    check_width(model.n_features(), anchor.len())?;
    check_width(model.n_features(), background.n_features())?;
    if background.n_rows() == 0 {
        return Err(ExplainError::EmptyBackground);
    }
    Ok(ValueFunction {
        model,
        anchor,
        background,
    })
}

/// Shapley values by enumerating all 2^d coalitions.
pub fn shap_exact<P: Predictor>(
    model: &P,
    anchor: &[f64],
    background: &Table,
) -> Result<ShapAttribution> {
    let d = model.n_features();
    if d > MAX_EXACT_FEATURES {
        return Err(ExplainError::TooManyFeatures {
            d,
            max: MAX_EXACT_FEATURES,
        });
    }
    let vf = prepare(model, anchor, background)?;
    let v: Vec<f64> = (0..1usize << d)
        .into_par_iter()
        .map(|mask| vf.eval(|j| mask >> j & 1 == 1))
        .collect();

    let fact: Vec<f64> = (0..=d)
        .scan(1.0, |acc, k| {
            if k > 0 {
                *acc *= k as f64;
            }
            Some(*acc)
        })
        .collect();
    let weight: Vec<f64> = (0..d).map(|s| fact[s] * fact[d - s - 1] / fact[d]).collect();

    let phi: Vec<f64> = (0..d)
        .map(|j| {
            let bit = 1usize << j;
            (0..1usize << d)
                .filter(|mask| mask & bit == 0)
                .fold(0.0, |acc, mask| {
                    acc + weight[mask.count_ones() as usize] * (v[mask | bit] - v[mask])
                })
        })
        .collect();

    Ok(ShapAttribution {
        feature_names: background.feature_names().to_vec(),
        anchor: anchor.to_vec(),
        phi,
        baseline: v[0],
        prediction: model.predict(anchor),
        method: ShapMethod::Exact,
        background_rows: background.n_rows(),
    })
}

/// Monte-Carlo Shapley values from `n_permutations` seeded feature orderings.
/// Coalition values are computed exactly and cached.
pub fn shap_sampled<P: Predictor>(
    model: &P,
    anchor: &[f64],
    background: &Table,
    n_permutations: usize,
    seed: u64,
) -> Result<ShapAttribution> {
    if n_permutations == 0 {
        return Err(ExplainError::InvalidArgument("n_permutations must be ≥ 1".into()));
    }
    let vf = prepare(model, anchor, background)?;
    let d = anchor.len();
    let words = d.div_ceil(64).max(1);
    let member = |key: &[u64], j: usize| key[j / 64] >> (j % 64) & 1 == 1;

    let orders: Vec<Vec<usize>> = (0..n_permutations)
        .map(|p| rng::permutation(d, &mut rng::stream(seed, &[p as u64])))
        .collect();

    let mut coalitions: Vec<Vec<u64>> = Vec::new();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut walks: Vec<Vec<usize>> = Vec::with_capacity(n_permutations);
    for order in &orders {
        let mut key = vec![0u64; words];
        let mut walk = Vec::with_capacity(d + 1);
        for step in 0..=d {
            if step > 0 {
                let j = order[step - 1];
                key[j / 64] |= 1 << (j % 64);
            }
            let next = coalitions.len();
            let id = *index.entry(key.clone()).or_insert(next);
            if id == next {
                coalitions.push(key.clone());
            }
            walk.push(id);
        }
        walks.push(walk);
    }
    let values: Vec<f64> = coalitions
        .par_iter()
        .map(|key| vf.eval(|j| member(key, j)))
        .collect();

    let mut phi = vec![0.0; d];
    for (order, walk) in orders.iter().zip(&walks) {
        for (step, &j) in order.iter().enumerate() {
            phi[j] += values[walk[step + 1]] - values[walk[step]];
        }
    }
    for p in &mut phi {
        *p /= n_permutations as f64;
    }

    let v_empty = values[walks[0][0]];
    let v_full = values[walks[0][d]];
    let residual = v_full - v_empty - phi.iter().sum::<f64>();
    if d > 0 {
        let share = residual / d as f64;
        for p in &mut phi {
            *p += share;
        }
    }

    Ok(ShapAttribution {
        feature_names: background.feature_names().to_vec(),
        anchor: anchor.to_vec(),
        phi,
        baseline: v_empty,
        prediction: model.predict(anchor),
        method: ShapMethod::Permutation {
            n_permutations,
            seed,
            efficiency_residual: residual,
        },
        background_rows: background.n_rows(),
    })
}
