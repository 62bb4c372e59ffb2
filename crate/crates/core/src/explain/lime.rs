use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_width, ExplainError, Result};
use crate::data::Table;
use crate::rng;
use crate::Predictor;

const RIDGE_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_samples: usize,
    pub top_features: usize,
    /// Defaults to 0.75·√d when absent.
    pub kernel_width: Option<f64>,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            n_samples: 5000,
            top_features: 10,
            kernel_width: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeWeight {
    pub feature: String,
    pub feature_index: usize,
    /// Slope in the feature's original units.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeExplanation {
    pub anchor: Vec<f64>,
    pub anchor_prediction: f64,
    pub intercept: f64,
    /// Largest |weight| first.
    pub weights: Vec<LimeWeight>,
    /// Weighted R² of the surrogate over the perturbation sample. Taken as 1
    /// when every sampled prediction is identical.
    pub r_squared: f64,
    pub n_samples: usize,
    pub kernel_width: f64,
    pub seed: u64,
    /// The normal equations were singular and were solved with a small ridge.
    pub ridge_jitter: bool,
}

fn feature_stds(t: &Table) -> Vec<f64> {
    (0..t.n_features())
        .map(|j| {
            let col = t.present_column(j);
            if col.len() < 2 {
                return 0.0;
            }
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
        })
        .collect()
}

/// Weighted least-squares surrogate fit around `anchor`.
///
/// Perturbations are `x + σ·z` with `z` standard normal and `σ` the feature's
/// population std over `t`; distances are measured in `z`. Features with zero
/// std or a missing anchor value are held fixed and get weight 0.
pub fn lime_explain<P: Predictor>(
    model: &P,
    anchor: &[f64],
    t: &Table,
    cfg: &LimeConfig,
) -> Result<LimeExplanation> {
    let d = model.n_features();
    check_width(d, anchor.len())?;
    check_width(d, t.n_features())?;
    if cfg.n_samples < d + 2 {
        return Err(ExplainError::InvalidArgument(format!(
            "n_samples must be ≥ d + 2 = {}, got {}",
            d + 2,
            cfg.n_samples
        )));
    }
    let width = cfg.kernel_width.unwrap_or(0.75 * (d as f64).sqrt());
    if !(width.is_finite() && width > 0.0) {
        return Err(ExplainError::InvalidArgument(format!(
            "kernel width must be positive, got {width}"
        )));
    }
    let sigma = feature_stds(t);
    let active: Vec<usize> = (0..d)
        .filter(|&j| sigma[j] > 0.0 && anchor[j].is_finite())
        .collect();

    let mut rng = rng::stream(cfg.seed, &[0x11E]);
    let z: Vec<Vec<f64>> = (0..cfg.n_samples)
        .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let preds: Vec<f64> = z
        .par_iter()
        .map(|zs| {
            let mut x = anchor.to_vec();
            for &j in &active {
                x[j] += sigma[j] * zs[j];
            }
            model.predict(&x)
        })
        .collect();
    let kernel: Vec<f64> = z
        .iter()
        .map(|zs| {
            let dist2: f64 = active.iter().map(|&j| zs[j] * zs[j]).sum();
            (-dist2 / (width * width)).exp()
        })
        .collect();

    let anchor_prediction = model.predict(anchor);
    let names = t.feature_names();
    let flat = preds.iter().all(|&p| p == preds[0]);
    let (intercept, slopes, r_squared, ridge_jitter) = if flat {
        (preds[0], vec![0.0; d], 1.0, false)
    } else {
        fit(&z, &preds, &kernel, &active, &sigma, anchor, d)
    };

    let mut order: Vec<usize> = active.clone();
    order.sort_by(|&a, &b| slopes[b].abs().total_cmp(&slopes[a].abs()).then(a.cmp(&b)));
    if flat {
        order = (0..d).collect();
    }
    let weights = order
        .into_iter()
        .take(cfg.top_features)
        .map(|j| LimeWeight {
            feature: names[j].clone(),
            feature_index: j,
            weight: slopes[j],
        })
        .collect();

    Ok(LimeExplanation {
        anchor: anchor.to_vec(),
        anchor_prediction,
        intercept,
        weights,
        r_squared,
        n_samples: cfg.n_samples,
        kernel_width: width,
        seed: cfg.seed,
        ridge_jitter,
    })
}

fn fit(
    z: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
    active: &[usize],
    sigma: &[f64],
    anchor: &[f64],
    d: usize,
) -> (f64, Vec<f64>, f64, bool) {
    let n = z.len();
    let p = active.len() + 1;
    let design = DMatrix::from_fn(n, p, |i, c| if c == 0 { 1.0 } else { z[i][active[c - 1]] });
    let mut weighted = design.clone();
    for i in 0..n {
        weighted.row_mut(i).scale_mut(w[i]);
    }
    let gram = design.transpose() * &weighted;
    let rhs = weighted.transpose() * DVector::from_column_slice(y);

    let (coef, ridge_jitter) = match gram.clone().cholesky() {
        Some(ch) => (ch.solve(&rhs), false),
        None => {
            let mut g = gram;
            for k in 1..p {
                g[(k, k)] += RIDGE_JITTER;
            }
            let coef = g
                .clone()
                .cholesky()
                .map(|ch| ch.solve(&rhs))
                .or_else(|| g.lu().solve(&rhs))
                .unwrap_or_else(|| DVector::zeros(p));
            (coef, true)
        }
    };

    let fitted = &design * &coef;
    let wsum: f64 = w.iter().sum();
    let ybar = w.iter().zip(y).map(|(wi, yi)| wi * yi).sum::<f64>() / wsum;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for i in 0..n {
        ss_res += w[i] * (y[i] - fitted[i]).powi(2);
        ss_tot += w[i] * (y[i] - ybar).powi(2);
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    let mut slopes = vec![0.0; d];
    let mut intercept = coef[0];
    for (c, &j) in active.iter().enumerate() {
        slopes[j] = coef[c + 1] / sigma[j];
        intercept -= slopes[j] * anchor[j];
    }
    (intercept, slopes, r_squared, ridge_jitter)
}
