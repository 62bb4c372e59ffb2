#![allow(dead_code)]

use gbt_trust_core::data::Table;
use gbt_trust_core::gbt::{Node, RegressionTree};
use gbt_trust_core::synthgen::{generate_panel, CovariateRange, IntensityModel, PanelSpec};

/// Five priced covariates, one inert column, recovery last.
pub fn panel_spec(n_firms: usize, n_periods: usize, seed: u64) -> PanelSpec {
    let cov = |name: &str, low: f64, high: f64| CovariateRange {
        name: name.into(),
        low,
        high,
    };
    PanelSpec {
        n_firms,
        n_periods,
        seed,
        covariates: vec![
            cov("leverage", 0.0, 1.0),
            cov("volatility", 0.0, 1.0),
            cov("equity_return", -1.0, 1.0),
            cov("size", 0.0, 1.0),
            cov("noise", 0.0, 1.0),
        ],
        recovery_range: (0.05, 0.8),
        missing_rate: 0.0,
    }
}

pub fn intensity_model() -> IntensityModel {
    IntensityModel::new(
        vec![-4.0, 2.0, 0.8, -0.3, -0.3, 0.0],
        ["leverage", "volatility", "equity_return", "size", "noise"]
            .map(String::from)
            .to_vec(),
    )
    .unwrap()
}

pub fn panel(n_firms: usize, n_periods: usize, seed: u64) -> Table {
    generate_panel(&intensity_model(), &panel_spec(n_firms, n_periods, seed))
        .unwrap()
        .table
}

/// Independent tree walk used as a prediction oracle.
pub fn walk(tree: &RegressionTree, i: usize, x: &[f64]) -> f64 {
    match &tree.nodes()[i] {
        Node::Leaf { value, .. } => *value,
        Node::Split {
            feature,
            threshold,
            default_left,
            left,
            right,
            ..
        } => {
            let v = x[*feature];
            let next = if v.is_nan() {
                if *default_left {
                    *left
                } else {
                    *right
                }
            } else if v < *threshold {
                *left
            } else {
                *right
            };
            walk(tree, next, x)
        }
    }
}

/// Splitmix-style generator for test inputs, kept apart from the crate's RNG.
pub struct TestRng(pub u64);

impl TestRng {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * ((self.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
    }
}

pub fn random_table(rng: &mut TestRng, n: usize, d: usize, missing: f64) -> Table {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| {
                    if rng.uniform(0.0, 1.0) < missing {
                        f64::NAN
                    } else {
                        rng.uniform(-5.0, 5.0)
                    }
                })
                .collect()
        })
        .collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(j, v)| if v.is_nan() { 0.5 } else { v.sin() * (j + 1) as f64 })
                .sum::<f64>()
                + rng.uniform(-0.1, 0.1)
        })
        .collect();
    let names = (0..d).map(|j| format!("x{j}")).collect();
    Table::from_rows(names, &rows, y, "y").unwrap()
}
