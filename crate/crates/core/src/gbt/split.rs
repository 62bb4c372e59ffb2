//! Exact squared-error split search with learned missing-value direction.

use crate::data::Table;

/// Gains at or below this fraction of the node's `Σ r²` are treated as zero,
/// absorbing round-off when every residual is equal.
const GAIN_RELATIVE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub threshold: f64,
    pub gain: f64,
    pub default_left: bool,
}

#[derive(Clone, Copy, Default)]
struct Stats {
    sum: f64,
    count: usize,
}

impl Stats {
    fn add(&mut self, r: f64) {
        self.sum += r;
        self.count += 1;
    }

    fn plus(self, o: Stats) -> Stats {
        Stats {
            sum: self.sum + o.sum,
            count: self.count + o.count,
        }
    }

    /// `(Σr)² / n`; SSE = Σr² − this, so gains only need these terms.
    fn score(self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum * self.sum / self.count as f64
        }
    }
}

/// Best threshold on `feature` for the residuals of `rows`.
///
/// Candidates are midpoints of consecutive distinct present values; the gain
/// is `SSE(parent) − SSE(left) − SSE(right)`. Rows missing `feature` are tried
/// on both sides and the better side becomes the default direction. Without
/// missing rows the default points at the child with more rows (left on a tie).
/// Equal gains keep the lower threshold. `residuals` is indexed by table row.
pub fn best_split(
    table: &Table,
    rows: &[usize],
    feature: usize,
    residuals: &[f64],
    min_node_rows: usize,
) -> Option<SplitCandidate> {
    let min_rows = min_node_rows.max(1);
    if rows.len() < 2 * min_rows {
        return None;
    }
    let mut present: Vec<(f64, f64)> = Vec::with_capacity(rows.len());
    let mut missing = Stats::default();
    let mut sum_sq = 0.0;
    for &i in rows {
        let r = residuals[i];
        sum_sq += r * r;
        match table.value(i, feature) {
            Some(v) => present.push((v, r)),
            None => missing.add(r),
        }
    }
    if present.len() < 2 {
        return None;
    }
    present.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut total_present = Stats::default();
    for &(_, r) in &present {
        total_present.add(r);
    }
    let parent = total_present.plus(missing);
    let parent_score = parent.score();
    let tolerance = GAIN_RELATIVE_TOLERANCE * sum_sq;

    let mut best: Option<SplitCandidate> = None;
    let mut left = Stats::default();
    for k in 0..present.len() - 1 {
        left.add(present[k].1);
        let (lo, hi) = (present[k].0, present[k + 1].0);
        if lo == hi {
            continue;
        }
        let right = Stats {
            sum: total_present.sum - left.sum,
            count: total_present.count - left.count,
        };
        let mut options = [(true, left.plus(missing), right), (false, left, right.plus(missing))];
        if missing.count == 0 && right.count > left.count {
            options.swap(0, 1);
        }
        for (default_left, l, r) in options {
            if l.count < min_rows || r.count < min_rows {
                continue;
            }
            let gain = l.score() + r.score() - parent_score;
            if gain <= tolerance || best.is_some_and(|b| gain <= b.gain) {
                continue;
            }
            best = Some(SplitCandidate {
                threshold: midpoint(lo, hi),
                gain,
                default_left,
            });
        }
    }
    best
}

/// A threshold `t` with `lo < t <= hi`, so `x < t` sends `lo` left and `hi` right.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo && mid <= hi {
        mid
    } else {
        hi
    }
}
