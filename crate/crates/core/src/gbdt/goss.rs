//! Gradient-based one-side sampling and leaf-wise tree growth.
//!
//! Each boosting round keeps the `⌈a·N⌉` rows with the largest |g|, draws
//! `⌈b·N⌉` of the remaining rows uniformly, and up-weights the drawn rows by
//! `(1−a)/b`. Splits are chosen by the sampled variance gain
//!
//! ```text
//! V(d) = ( (Σ_{A_l} g + k·Σ_{B_l} g)² / n_l  +  (Σ_{A_r} g + k·Σ_{B_r} g)² / n_r ) / n
//! ```
//!
//! where `k = (1−a)/b` and `n_l`, `n_r`, `n` are the sampled row counts with
//! the same up-weighting. Leaves are split best-first until `max_leaves`.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::ProcessDataset;
use crate::error::{Error, Result};
use crate::gbdt::ensemble::{BoostedEnsemble, Variant};
use crate::gbdt::exact::check_trainable;
use crate::gbdt::loss::{init_base_score, logistic_grad_hess, weight_from_sums, GradientPair};
use crate::gbdt::split::{beats, find_best_split, NodeRows, Split, SplitCriterion};
use crate::gbdt::tree::{Tree, TreeNode};
use crate::matrix::Matrix;

/// Slack for products like `0.1 · 30` landing just above an integer.
const CEIL_SLACK: f64 = 1e-9;

fn sample_size(frac: f64, n: usize) -> usize {
    ((frac * n as f64 - CEIL_SLACK).ceil().max(0.0)) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct GossSample {
    /// Large-gradient rows, by descending |g|.
    pub top: Vec<usize>,
    /// Randomly drawn rows from the rest, ascending.
    pub rest: Vec<usize>,
    /// Weight applied to `rest` rows: `(1−a)/b`.
    pub multiplier: f64,
}

impl GossSample {
    /// Per-row weight over `0..n`: 1 for `top`, `multiplier` for `rest`, 0 otherwise.
    pub fn weights(&self, n: usize) -> Vec<f64> {
        let mut w = vec![0.0; n];
        for &i in &self.top {
            w[i] = 1.0;
        }
        for &i in &self.rest {
            w[i] = self.multiplier;
        }
        w
    }
}

fn validate_rates(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::param(format!("goss a must lie in (0, 1), got {a}")));
    }
    if !(b > 0.0 && b <= 1.0) {
        return Err(Error::param(format!("goss b must lie in (0, 1], got {b}")));
    }
    if a + b > 1.0 + 1e-12 {
        return Err(Error::param(format!("goss a + b must not exceed 1, got {}", a + b)));
    }
    Ok(())
}

pub fn goss_sample(grads: &[GradientPair], a: f64, b: f64, seed: u64) -> Result<GossSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    goss_sample_with(grads, a, b, &mut rng)
}

pub(crate) fn goss_sample_with(
    grads: &[GradientPair],
    a: f64,
    b: f64,
    rng: &mut ChaCha8Rng,
) -> Result<GossSample> {
    validate_rates(a, b)?;
    let n = grads.len();
    let top_n = sample_size(a, n);
    let rand_n = sample_size(b, n);
    if top_n >= n {
        return Err(Error::param(format!(
            "goss keeps all {n} rows as top gradients; nothing left to sample"
        )));
    }
    if rand_n > n - top_n {
        return Err(Error::param(format!(
            "goss needs {rand_n} random rows but only {} remain",
            n - top_n
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal |g| keeps the lower row index first
    order.sort_by(|&i, &j| grads[j].g.abs().total_cmp(&grads[i].g.abs()));
    let top = order[..top_n].to_vec();
    let remainder = &order[top_n..];
    let mut rest: Vec<usize> = index::sample(rng, remainder.len(), rand_n)
        .into_iter()
        .map(|k| remainder[k])
        .collect();
    rest.sort_unstable();
    Ok(GossSample {
        top,
        rest,
        multiplier: (1.0 - a) / b,
    })
}

/// Gradient sums for one side of a candidate split, kept apart by sample part.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SideSums {
    pub top_sum: f64,
    pub top_count: usize,
    pub rest_sum: f64,
    pub rest_count: usize,
}

impl SideSums {
    fn amplified(&self, multiplier: f64) -> (f64, f64) {
        (
            self.top_sum + multiplier * self.rest_sum,
            self.top_count as f64 + multiplier * self.rest_count as f64,
        )
    }
}

/// Sampled variance gain `V(d)` of a candidate. `None` when a side is empty.
pub fn goss_split_gain(left: &SideSums, right: &SideSums, multiplier: f64) -> Option<f64> {
    if left.top_count + left.rest_count == 0 || right.top_count + right.rest_count == 0 {
        return None;
    }
    let (gl, nl) = left.amplified(multiplier);
    let (gr, nr) = right.amplified(multiplier);
    Some((gl * gl / nl + gr * gr / nr) / (nl + nr))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GossParams {
    pub n_trees: usize,
    pub max_leaves: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    /// Minimum amplified row count on each side of a split.
    pub min_child_samples: f64,
    pub seed: u64,
}

impl Default for GossParams {
    fn default() -> Self {
        GossParams {
            n_trees: 100,
            max_leaves: 31,
            learning_rate: 0.1,
            lambda: 1.0,
            a: 0.2,
            b: 0.1,
            min_child_samples: 20.0,
            seed: 0,
        }
    }
}

impl GossParams {
    fn validate(&self) -> Result<()> {
        validate_rates(self.a, self.b)?;
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::param("learning_rate must lie in (0, 1]"));
        }
        if self.max_leaves < 1 {
            return Err(Error::param("max_leaves must be >= 1"));
        }
        if self.lambda < 0.0 || self.min_child_samples < 0.0 {
            return Err(Error::param("lambda and min_child_samples must be >= 0"));
        }
        Ok(())
    }
}

struct OpenLeaf {
    id: usize,
    rows: NodeRows,
    best: Option<Split>,
}

/// Grow one tree best-first. `g_amp` and `count_w` carry the sample weights
/// (zero for rows outside the sample); `g_w`, `h_w` feed the leaf weights.
#[allow(clippy::too_many_arguments)]
pub(crate) fn grow_leafwise(
    x: &Matrix,
    g_amp: &[f64],
    count_w: &[f64],
    h_w: &[f64],
    rows: Vec<u32>,
    max_leaves: usize,
    lambda: f64,
    min_child_samples: f64,
) -> Result<Tree> {
    // ½·(GL²/nL + GR²/nR − G²/n) is the regularised gain with counts for
    // hessians and λ = 0; its argmax within a node equals the argmax of V(d).
    let crit = SplitCriterion {
        lambda: 0.0,
        gamma: 0.0,
        min_child_weight: min_child_samples.max(f64::MIN_POSITIVE),
    };
    let root = NodeRows::presort(x, rows);
    let best = if max_leaves > 1 {
        find_best_split(x, &root, g_amp, count_w, &crit)
    } else {
        None
    };
    let mut nodes = vec![TreeNode::Leaf { weight: 0.0 }];
    // kept in left-to-right order
    let mut leaves = vec![OpenLeaf {
        id: 0,
        rows: root,
        best,
    }];
    while leaves.len() < max_leaves {
        let mut pick: Option<usize> = None;
        for (pos, leaf) in leaves.iter().enumerate() {
            if let Some(s) = leaf.best {
                if pick.is_none_or(|p| beats(s.gain, leaves[p].best.unwrap().gain)) {
                    pick = Some(pos);
                }
            }
        }
        let Some(pos) = pick else { break };
        let leaf = leaves.remove(pos);
        let s = leaf.best.unwrap();
        let (l, r) = leaf.rows.partition(x, s.feature, s.threshold);
        let (lid, rid) = (nodes.len(), nodes.len() + 1);
        nodes.push(TreeNode::Leaf { weight: 0.0 });
        nodes.push(TreeNode::Leaf { weight: 0.0 });
        nodes[leaf.id] = TreeNode::Split {
            feature: s.feature,
            threshold: s.threshold,
            left: lid,
            right: rid,
        };
        let room = leaves.len() + 2 < max_leaves;
        let best_l = if room { find_best_split(x, &l, g_amp, count_w, &crit) } else { None };
        let best_r = if room { find_best_split(x, &r, g_amp, count_w, &crit) } else { None };
        leaves.insert(
            pos,
            OpenLeaf {
                id: rid,
                rows: r,
                best: best_r,
            },
        );
        leaves.insert(
            pos,
            OpenLeaf {
                id: lid,
                rows: l,
                best: best_l,
            },
        );
    }
    for leaf in &leaves {
        let (gs, hs) = leaf.rows.sums(g_amp, h_w);
        nodes[leaf.id] = TreeNode::Leaf {
            weight: weight_from_sums(gs, hs, lambda)?,
        };
    }
    Tree::from_nodes(nodes)
}

pub fn train_goss_leafwise(train: &ProcessDataset, params: &GossParams) -> Result<BoostedEnsemble> {
    params.validate()?;
    check_trainable(train)?;
    let x = train.features();
    let y = train.target();
    let n = train.n_rows();
    let base = init_base_score(y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut raw = vec![base; n];
    let mut grads = vec![GradientPair { g: 0.0, h: 0.0 }; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        for i in 0..n {
            grads[i] = logistic_grad_hess(y[i], raw[i]);
        }
        let sample = goss_sample_with(&grads, params.a, params.b, &mut rng)?;
        let w = sample.weights(n);
        let g_amp: Vec<f64> = grads.iter().zip(&w).map(|(p, w)| p.g * w).collect();
        let h_amp: Vec<f64> = grads.iter().zip(&w).map(|(p, w)| p.h * w).collect();
        let rows: Vec<u32> = sample
            .top
            .iter()
            .chain(&sample.rest)
            .map(|&i| i as u32)
            .collect();
        let tree = grow_leafwise(
            x,
            &g_amp,
            &w,
            &h_amp,
            rows,
            params.max_leaves,
            params.lambda,
            params.min_child_samples,
        )?;
        for (i, r) in raw.iter_mut().enumerate() {
            *r += params.learning_rate * tree.predict(x.row(i));
        }
        trees.push(tree);
    }
    BoostedEnsemble::new(
        Variant::GossLeafwise,
        base,
        params.learning_rate,
        train.feature_names().to_vec(),
        trees,
    )
}
