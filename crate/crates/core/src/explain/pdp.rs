use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_feature, check_width, ExplainError, Result};
use crate::data::Table;
use crate::Predictor;

pub const DEFAULT_GRID_POINTS: usize = 20;

/// Mean prediction as one feature sweeps a grid, other cells as observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpCurve {
    pub feature: String,
    pub feature_index: usize,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub n_rows: usize,
}

/// Per-row prediction curves on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IceBundle {
    pub feature: String,
    pub feature_index: usize,
    pub grid: Vec<f64>,
    /// `curves[row][grid point]`.
    pub curves: Vec<Vec<f64>>,
    /// Each curve has its value at the lowest grid point subtracted.
    pub centered: bool,
}

impl IceBundle {
    /// Mean over rows at each grid point, summing rows in order.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.curves.len() as f64;
        (0..self.grid.len())
            .map(|g| self.curves.iter().fold(0.0, |acc, c| acc + c[g]) / n)
            .collect()
    }
}

/// Empirical quantiles of the present values of `feature` at levels
/// `i / (n_grid − 1)`, linear interpolation between order statistics,
/// with repeated points removed.
pub fn quantile_grid(t: &Table, feature: usize, n_grid: usize) -> Result<Vec<f64>> {
    check_feature(feature, t.n_features())?;
    if n_grid < 2 {
        return Err(ExplainError::InvalidArgument(format!(
            "grid needs at least 2 points, got {n_grid}"
        )));
    }
    let mut col = t.present_column(feature);
    col.sort_by(f64::total_cmp);
    let constant = || ExplainError::ConstantFeature(t.feature_names()[feature].clone());
    if col.len() < 2 || col[0] == col[col.len() - 1] {
        return Err(constant());
    }
    let m = col.len();
    let mut grid: Vec<f64> = Vec::with_capacity(n_grid);
    for i in 0..n_grid {
        let h = (m - 1) as f64 * i as f64 / (n_grid - 1) as f64;
        let lo = (h.floor() as usize).min(m - 1);
        let hi = (lo + 1).min(m - 1);
        let q = (col[lo] + (h - lo as f64) * (col[hi] - col[lo])).clamp(col[lo], col[hi]);
        if grid.last().is_none_or(|&last| q > last) {
            grid.push(q);
        }
    }
    Ok(grid)
}

fn row_curves<P: Predictor>(model: &P, t: &Table, feature: usize, grid: &[f64]) -> Vec<Vec<f64>> {
    (0..t.n_rows())
        .into_par_iter()
        .map(|i| {
            let mut x = t.row(i).to_vec();
            grid.iter()
                .map(|&v| {
                    x[feature] = v;
                    model.predict(&x)
                })
                .collect()
        })
        .collect()
}

pub fn ice<P: Predictor>(
    model: &P,
    t: &Table,
    feature: usize,
    n_grid: usize,
    centered: bool,
) -> Result<IceBundle> {
    check_width(model.n_features(), t.n_features())?;
    let grid = quantile_grid(t, feature, n_grid)?;
    let mut curves = row_curves(model, t, feature, &grid);
    if centered {
        for c in &mut curves {
            let anchor = c[0];
            for v in c.iter_mut() {
                *v -= anchor;
            }
        }
    }
    Ok(IceBundle {
        feature: t.feature_names()[feature].clone(),
        feature_index: feature,
        grid,
        curves,
        centered,
    })
}

pub fn pdp<P: Predictor>(model: &P, t: &Table, feature: usize, n_grid: usize) -> Result<PdpCurve> {
    let bundle = ice(model, t, feature, n_grid, false)?;
    Ok(PdpCurve {
        values: bundle.column_means(),
        n_rows: bundle.curves.len(),
        feature: bundle.feature,
        feature_index: feature,
        grid: bundle.grid,
    })
}
