use serde::{Deserialize, Serialize};

use super::PdpCurve;

/// How the curve moves as the feature crosses the threshold upward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Rise,
    Drop,
}

impl Direction {
    /// Desk reading for a price-like target: protection is cheap on the low
    /// side of a rise and on the high side of a drop.
    pub fn annotation(self) -> &'static str {
        match self {
            Direction::Rise => "buy below, sell above",
            Direction::Drop => "sell below, buy above",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFinding {
    pub feature: String,
    /// Midpoint of the bracketing grid points.
    pub threshold: f64,
    pub lower: f64,
    pub upper: f64,
    pub value_below: f64,
    pub value_above: f64,
    /// `value_above − value_below`.
    pub change: f64,
    /// Larger over smaller of the two values.
    pub ratio: f64,
    pub direction: Direction,
    pub annotation: String,
}

/// Adjacent grid pairs whose curve values differ by a factor of at least
/// `min_jump_ratio`, largest ratio first. Pairs where either value is not
/// positive have no ratio and are skipped.
pub fn threshold_scan(c: &PdpCurve, min_jump_ratio: f64) -> Vec<ThresholdFinding> {
    let mut out: Vec<ThresholdFinding> = c
        .grid
        .windows(2)
        .zip(c.values.windows(2))
        .filter_map(|(g, v)| {
            let (a, b) = (v[0], v[1]);
            if !(a > 0.0 && b > 0.0) || a == b {
                return None;
            }
            let ratio = a.max(b) / a.min(b);
            if ratio < min_jump_ratio {
                return None;
            }
            let direction = if b > a { Direction::Rise } else { Direction::Drop };
            Some(ThresholdFinding {
                feature: c.feature.clone(),
                threshold: g[0] + (g[1] - g[0]) / 2.0,
                lower: g[0],
                upper: g[1],
                value_below: a,
                value_above: b,
                change: b - a,
                ratio,
                direction,
                annotation: direction.annotation().to_string(),
            })
        })
        .collect();
    out.sort_by(|x, y| y.ratio.total_cmp(&x.ratio).then(x.lower.total_cmp(&y.lower)));
    out
}
