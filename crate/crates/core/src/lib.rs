//! Gradient-boosted regression trees for CDS spread modelling, with the
//! tooling around them: tabular ingestion and splits, a forward-intensity
//! panel generator, cross-validated grid search, and model explanations
//! (importance, partial dependence, ICE, local surrogates, Shapley values).

pub mod data;
pub mod explain;
pub mod gbt;
pub mod rng;
pub mod synthgen;
pub mod tune;

/// Anything that maps a feature row to a real prediction. Rows use `NaN` for
/// missing cells and always have `n_features()` entries.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;
    fn predict(&self, x: &[f64]) -> f64;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }

    fn predict(&self, x: &[f64]) -> f64 {
        (**self).predict(x)
    }
}
