//! Synthetic CDS panels driven by an exponential-affine forward intensity.
//!
//! Each firm-period draws covariates uniformly from configured ranges, sets a
//! constant default intensity `λ = exp(β₀ + Σ βⱼ xⱼ)`, and prices the five-year
//! spread with the credit triangle `λ (1 − R)` expressed in basis points. The
//! true intensities are kept alongside the table so downstream explanations
//! can be checked against the generating process.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Table};
use crate::rng;

/// Spreads are quoted in basis points.
pub const BASIS_POINTS: f64 = 1.0e4;
pub const RECOVERY_FEATURE: &str = "recovery";
pub const SPREAD_TARGET: &str = "spread5";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("intensity must be positive and finite, got {0}")]
    NonPositiveLambda(f64),
    #[error("time step must be positive and finite, got {0}")]
    NonPositiveDt(f64),
    #[error("tau index {tau} exceeds path length {len}")]
    TauOutOfRange { tau: usize, len: usize },
    #[error("recovery {0} is outside [0, 1]")]
    RecoveryOutOfRange(f64),
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("invalid panel spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T> = std::result::Result<T, SynthError>;

/// Coefficients `[β₀, β₁, …, βₖ]` of the log-intensity, intercept first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityModel {
    pub coefficients: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl IntensityModel {
    pub fn new(coefficients: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        let m = Self {
            coefficients,
            feature_names,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coefficients.len() != self.feature_names.len() + 1 {
            return Err(SynthError::DimensionMismatch {
                expected: self.feature_names.len() + 1,
                got: self.coefficients.len(),
            });
        }
        if self.coefficients.iter().any(|b| !b.is_finite()) {
            return Err(SynthError::NonFinite("coefficients".into()));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// `B′X` with the leading constant 1 folded into the intercept.
    pub fn log_intensity(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(SynthError::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SynthError::NonFinite("covariates".into()));
        }
        Ok(self.coefficients[1..]
            .iter()
            .zip(x)
            .fold(self.coefficients[0], |acc, (b, v)| acc + b * v))
    }

    /// Coefficient-wise sum; intensities of the sum multiply.
    pub fn combine(&self, other: &Self) -> Result<Self> {
        if self.feature_names != other.feature_names {
            return Err(SynthError::InvalidSpec("feature names differ".into()));
        }
        Self::new(
            self.coefficients
                .iter()
                .zip(&other.coefficients)
                .map(|(a, b)| a + b)
                .collect(),
            self.feature_names.clone(),
        )
    }
}

/// `λ = exp(β₀ + Σ βⱼ xⱼ)`.
pub fn forward_intensity(m: &IntensityModel, x: &[f64]) -> Result<f64> {
    let lambda = m.log_intensity(x)?.exp();
    if lambda > 0.0 && lambda.is_finite() {
        Ok(lambda)
    } else {
        Err(SynthError::NonPositiveLambda(lambda))
    }
}

/// `exp(−Σ_{i<τ} λᵢ dt)`, the left-Riemann discretization of the integrated hazard.
pub fn survival_probability(lambda_path: &[f64], dt: f64, tau_index: usize) -> Result<f64> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SynthError::NonPositiveDt(dt));
    }
    if let Some(&bad) = lambda_path.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(SynthError::NonPositiveLambda(bad));
    }
    if tau_index > lambda_path.len() {
        return Err(SynthError::TauOutOfRange {
            tau: tau_index,
            len: lambda_path.len(),
        });
    }
    let hazard: f64 = lambda_path[..tau_index].iter().map(|l| l * dt).sum();
    Ok((-hazard).exp())
}

/// Discrete survival curve on the grid `0, dt, 2dt, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
}

impl SurvivalCurve {
    pub fn from_path(lambda_path: &[f64], dt: f64) -> Result<Self> {
        let mut times = Vec::with_capacity(lambda_path.len() + 1);
        let mut survival = Vec::with_capacity(lambda_path.len() + 1);
        for tau in 0..=lambda_path.len() {
            times.push(tau as f64 * dt);
            survival.push(survival_probability(lambda_path, dt, tau)?);
        }
        Ok(Self { times, survival })
    }
}

/// Credit-triangle spread `λ (1 − R)` in basis points.
pub fn spread_from_intensity(lambda: f64, recovery: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&recovery) {
        return Err(SynthError::RecoveryOutOfRange(recovery));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(SynthError::NonPositiveLambda(lambda));
    }
    Ok(lambda * (1.0 - recovery) * BASIS_POINTS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateRange {
    pub name: String,
    pub low: f64,
    pub high: f64,
}

/// Panel layout. The table's columns are `covariates` in order followed by
/// `recovery`, which is drawn from `recovery_range`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    pub n_firms: usize,
    pub n_periods: usize,
    pub seed: u64,
    pub covariates: Vec<CovariateRange>,
    pub recovery_range: (f64, f64),
    pub missing_rate: f64,
}

impl PanelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SynthError::InvalidSpec(msg));
        if self.n_firms == 0 {
            return bad("n_firms must be positive".into());
        }
        if self.n_periods == 0 {
            return bad("n_periods must be positive".into());
        }
        for (i, c) in self.covariates.iter().enumerate() {
            if c.name.is_empty() || c.name == RECOVERY_FEATURE {
                return bad(format!(
                    "covariates[{i}].name must be non-empty and not `{RECOVERY_FEATURE}`"
                ));
            }
            if !(c.low.is_finite() && c.high.is_finite() && c.low < c.high) {
                return bad(format!(
                    "covariates[{i}] ({}): low must be < high (got {} .. {})",
                    c.name, c.low, c.high
                ));
            }
            if self.covariates[..i].iter().any(|o| o.name == c.name) {
                return bad(format!("covariates[{i}] ({}): duplicate name", c.name));
            }
        }
        let (lo, hi) = self.recovery_range;
        if !(lo < hi && lo >= 0.0 && hi <= 1.0) {
            return bad(format!(
                "recovery_range: need 0 <= low < high <= 1 (got {lo} .. {hi})"
            ));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return bad(format!(
                "missing_rate: must lie in [0, 1) (got {})",
                self.missing_rate
            ));
        }
        Ok(())
    }

    /// Column names of the generated table.
    pub fn column_names(&self) -> Vec<String> {
        self.covariates
            .iter()
            .map(|c| c.name.clone())
            .chain(std::iter::once(RECOVERY_FEATURE.to_string()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaRecord {
    pub firm: usize,
    pub period: usize,
    pub lambda: f64,
}

/// Generated panel plus the true intensity per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub table: Table,
    pub lambdas: Vec<LambdaRecord>,
}

impl Panel {
    /// Writes the `firm,period,lambda` sidecar.
    pub fn write_lambda_csv<W: Write>(&self, writer: W) -> std::result::Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| DataError::Csv(e.to_string());
        w.write_record(["firm", "period", "lambda"]).map_err(io)?;
        for r in &self.lambdas {
            w.write_record([r.firm.to_string(), r.period.to_string(), format!("{}", r.lambda)])
                .map_err(io)?;
        }
        w.flush().map_err(|e| DataError::Io(e.to_string()))
    }
}

struct FirmRows {
    values: Vec<f64>,
    missing: Vec<bool>,
    target: Vec<f64>,
    lambdas: Vec<LambdaRecord>,
}

/// Draws a firm-major panel (row = firm · n_periods + period). Each firm reads
/// from its own substream of `spec.seed`, so firms generate independently.
pub fn generate_panel(m: &IntensityModel, spec: &PanelSpec) -> Result<Panel> {
    m.validate()?;
    spec.validate()?;
    let columns = spec.column_names();
    let recovery_col = columns.len() - 1;
    let model_cols: Vec<usize> = m
        .feature_names
        .iter()
        .map(|name| {
            columns.iter().position(|c| c == name).ok_or_else(|| {
                SynthError::InvalidSpec(format!("model feature `{name}` has no covariate range"))
            })
        })
        .collect::<Result<_>>()?;
    let ranges: Vec<(f64, f64)> = spec
        .covariates
        .iter()
        .map(|c| (c.low, c.high))
        .chain(std::iter::once(spec.recovery_range))
        .collect();

    let firms: Vec<FirmRows> = (0..spec.n_firms)
        .into_par_iter()
        .map(|firm| {
            let mut draw = rng::stream(spec.seed, &[firm as u64, 0]);
            let mut mask = rng::stream(spec.seed, &[firm as u64, 1]);
            let d = columns.len();
            let mut out = FirmRows {
                values: Vec::with_capacity(spec.n_periods * d),
                missing: Vec::with_capacity(spec.n_periods * d),
                target: Vec::with_capacity(spec.n_periods),
                lambdas: Vec::with_capacity(spec.n_periods),
            };
            let mut x = vec![0.0; model_cols.len()];
            for period in 0..spec.n_periods {
                let row: Vec<f64> = ranges
                    .iter()
                    .map(|&(lo, hi)| lo + (hi - lo) * rng::unit(&mut draw))
                    .collect();
                for (slot, &c) in x.iter_mut().zip(&model_cols) {
                    *slot = row[c];
                }
                let lambda = forward_intensity(m, &x)?;
                let spread = spread_from_intensity(lambda, row[recovery_col])?;
                for (c, &v) in row.iter().enumerate() {
                    let absent = c != recovery_col
                        && spec.missing_rate > 0.0
                        && rng::unit(&mut mask) < spec.missing_rate;
                    out.values.push(if absent { f64::NAN } else { v });
                    out.missing.push(absent);
                }
                out.target.push(spread);
                out.lambdas.push(LambdaRecord {
                    firm,
                    period,
                    lambda,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut values = Vec::new();
    let mut missing = Vec::new();
    let mut target = Vec::new();
    let mut lambdas = Vec::new();
    for f in firms {
        values.extend(f.values);
        missing.extend(f.missing);
        target.extend(f.target);
        lambdas.extend(f.lambdas);
    }
    let table = Table::new(columns, values, missing, target, SPREAD_TARGET)?;
    Ok(Panel { table, lambdas })
}
