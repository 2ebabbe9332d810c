//! Exact greedy split search over presorted feature columns.

use crate::error::{Error, Result};
use crate::gbdt::loss::GradientPair;
use crate::matrix::Matrix;

/// Relative tolerance under which two gains count as tied.
pub(crate) const GAIN_TIE_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCriterion {
    pub lambda: f64,
    pub gamma: f64,
    /// Minimum hessian sum on each side of a candidate.
    pub min_child_weight: f64,
}

/// `½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)] − γ`
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let g = gl + gr;
    let h = hl + hr;
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma
}

/// True when `new` is larger than `best` by more than the tie tolerance.
#[inline]
pub(crate) fn beats(new: f64, best: f64) -> bool {
    new - best > GAIN_TIE_REL * new.abs().max(best.abs())
}

/// Threshold strictly between two consecutive distinct values, `lo <= t < hi`.
#[inline]
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) / 2.0;
    if t >= hi {
        lo
    } else {
        t
    }
}

/// Rows of one tree node, with one row list per feature sorted by value
/// (ties by row id). `rows` is ascending.
#[derive(Debug, Clone)]
pub(crate) struct NodeRows {
    pub rows: Vec<u32>,
    pub sorted: Vec<Vec<u32>>,
}

impl NodeRows {
    pub fn presort(x: &Matrix, mut rows: Vec<u32>) -> NodeRows {
        rows.sort_unstable();
        let sorted = (0..x.n_cols())
            .map(|j| {
                let mut s = rows.clone();
                s.sort_by(|&a, &b| {
                    x.get(a as usize, j)
                        .total_cmp(&x.get(b as usize, j))
                        .then(a.cmp(&b))
                });
                s
            })
            .collect();
        NodeRows { rows, sorted }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// `(Σ num, Σ den)` over the node rows.
    pub fn sums(&self, num: &[f64], den: &[f64]) -> (f64, f64) {
        self.rows.iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + num[r as usize], h + den[r as usize])
        })
    }

    /// Split into (left, right), preserving every sorted order.
    pub fn partition(&self, x: &Matrix, feature: usize, threshold: f64) -> (NodeRows, NodeRows) {
        let goes_left = |r: &u32| x.get(*r as usize, feature) <= threshold;
        let part = |list: &Vec<u32>| -> (Vec<u32>, Vec<u32>) { list.iter().partition(|r| goes_left(r)) };
        let (rows_l, rows_r) = part(&self.rows);
        let (mut sorted_l, mut sorted_r) = (Vec::new(), Vec::new());
        for list in &self.sorted {
            let (l, r) = part(list);
            sorted_l.push(l);
            sorted_r.push(r);
        }
        (
            NodeRows {
                rows: rows_l,
                sorted: sorted_l,
            },
            NodeRows {
                rows: rows_r,
                sorted: sorted_r,
            },
        )
    }
}

/// Best split of a node by scanning every feature's sorted rows once.
///
/// `num` and `den` are per-row first- and second-order statistics indexed by
/// row id. Candidates are midpoints between consecutive distinct values; ties
/// go to the lower feature, then the lower threshold. Returns `None` when no
/// candidate has positive gain.
pub(crate) fn find_best_split(
    x: &Matrix,
    node: &NodeRows,
    num: &[f64],
    den: &[f64],
    crit: &SplitCriterion,
) -> Option<Split> {
    if node.len() < 2 {
        return None;
    }
    let (g_tot, h_tot) = node.sums(num, den);
    let parent = g_tot * g_tot / (h_tot + crit.lambda);
    let mut best: Option<Split> = None;
    for (j, list) in node.sorted.iter().enumerate() {
        let (mut gl, mut hl) = (0.0, 0.0);
        for w in list.windows(2) {
            let (r, next) = (w[0] as usize, w[1] as usize);
            gl += num[r];
            hl += den[r];
            let (v, v_next) = (x.get(r, j), x.get(next, j));
            if !(v_next > v) {
                continue;
            }
            let (gr, hr) = (g_tot - gl, h_tot - hl);
            if hl < crit.min_child_weight || hr < crit.min_child_weight {
                continue;
            }
            let (dl, dr) = (hl + crit.lambda, hr + crit.lambda);
            if !(dl > 0.0 && dr > 0.0) {
                continue;
            }
            let (left, right) = (gl * gl / dl, gr * gr / dr);
            let gain = 0.5 * (left + right - parent) - crit.gamma;
            // guard against rounding noise on mathematically zero gains
            if !(gain > GAIN_TIE_REL * (left + right + parent)) {
                continue;
            }
            if best.is_none_or(|b| beats(gain, b.gain)) {
                best = Some(Split {
                    feature: j,
                    threshold: midpoint(v, v_next),
                    gain,
                });
            }
        }
    }
    best
}

/// Best regularised split of `rows` (indices into `x` and `grads`).
pub fn best_split_exact(
    rows: &[usize],
    grads: &[GradientPair],
    x: &Matrix,
    lambda: f64,
    gamma: f64,
) -> Result<Option<Split>> {
    best_split_with(
        rows,
        grads,
        x,
        &SplitCriterion {
            lambda,
            gamma,
            min_child_weight: 0.0,
        },
    )
}

pub fn best_split_with(
    rows: &[usize],
    grads: &[GradientPair],
    x: &Matrix,
    crit: &SplitCriterion,
) -> Result<Option<Split>> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("split search on an empty row set".into()));
    }
    if crit.lambda < 0.0 {
        return Err(Error::param("lambda must be >= 0"));
    }
    if grads.len() != x.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            found: grads.len(),
        });
    }
    let g: Vec<f64> = grads.iter().map(|p| p.g).collect();
    let h: Vec<f64> = grads.iter().map(|p| p.h).collect();
    let node = NodeRows::presort(x, rows.iter().map(|&r| r as u32).collect());
    Ok(find_best_split(x, &node, &g, &h, crit))
}
