//! Level-wise boosting with exact greedy second-order splits.

use serde::{Deserialize, Serialize};

use crate::dataset::ProcessDataset;
use crate::error::{Error, Result};
use crate::gbdt::ensemble::{BoostedEnsemble, Variant};
use crate::gbdt::loss::{init_base_score, logistic_grad_hess, weight_from_sums};
use crate::gbdt::split::{find_best_split, NodeRows, SplitCriterion};
use crate::gbdt::tree::{Tree, TreeNode};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactGreedyParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
}

impl Default for ExactGreedyParams {
    fn default() -> Self {
        ExactGreedyParams {
            n_trees: 100,
            max_depth: 6,
            learning_rate: 0.1,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
        }
    }
}

impl ExactGreedyParams {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::param("learning_rate must lie in (0, 1]"));
        }
        if self.lambda < 0.0 || self.gamma < 0.0 || self.min_child_weight < 0.0 {
            return Err(Error::param("lambda, gamma and min_child_weight must be >= 0"));
        }
        Ok(())
    }
}

pub(crate) fn check_trainable(train: &ProcessDataset) -> Result<()> {
    if train.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    let (normal, defective) = train.class_counts();
    if normal == 0 || defective == 0 {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Grow one tree level by level. Nodes without a positive-gain split, or at
/// `max_depth`, become leaves with weight `-G/(H+λ)`.
pub(crate) fn grow_levelwise(
    x: &Matrix,
    g: &[f64],
    h: &[f64],
    rows: Vec<u32>,
    max_depth: usize,
    crit: &SplitCriterion,
) -> Result<Tree> {
    let mut nodes = vec![TreeNode::Leaf { weight: 0.0 }];
    let mut frontier = vec![(0usize, NodeRows::presort(x, rows))];
    for depth in 0..=max_depth {
        let mut next = Vec::new();
        for (id, node) in frontier {
            let split = if depth < max_depth {
                find_best_split(x, &node, g, h, crit)
            } else {
                None
            };
            match split {
                Some(s) => {
                    let (l, r) = node.partition(x, s.feature, s.threshold);
                    let (lid, rid) = (nodes.len(), nodes.len() + 1);
                    nodes.push(TreeNode::Leaf { weight: 0.0 });
                    nodes.push(TreeNode::Leaf { weight: 0.0 });
                    nodes[id] = TreeNode::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left: lid,
                        right: rid,
                    };
                    next.push((lid, l));
                    next.push((rid, r));
                }
                None => {
                    let (gs, hs) = node.sums(g, h);
                    nodes[id] = TreeNode::Leaf {
                        weight: weight_from_sums(gs, hs, crit.lambda)?,
                    };
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Tree::from_nodes(nodes)
}

pub fn train_exact_greedy(
    train: &ProcessDataset,
    params: &ExactGreedyParams,
) -> Result<BoostedEnsemble> {
    params.validate()?;
    check_trainable(train)?;
    let x = train.features();
    let y = train.target();
    let n = train.n_rows();
    let base = init_base_score(y)?;
    let crit = SplitCriterion {
        lambda: params.lambda,
        gamma: params.gamma,
        min_child_weight: params.min_child_weight,
    };

    let mut raw = vec![base; n];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let all_rows: Vec<u32> = (0..n as u32).collect();
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        for i in 0..n {
            let gp = logistic_grad_hess(y[i], raw[i]);
            g[i] = gp.g;
            h[i] = gp.h;
        }
        let tree = grow_levelwise(x, &g, &h, all_rows.clone(), params.max_depth, &crit)?;
        for (i, r) in raw.iter_mut().enumerate() {
            *r += params.learning_rate * tree.predict(x.row(i));
        }
        trees.push(tree);
    }
    BoostedEnsemble::new(
        Variant::ExactGreedy,
        base,
        params.learning_rate,
        train.feature_names().to_vec(),
        trees,
    )
}
