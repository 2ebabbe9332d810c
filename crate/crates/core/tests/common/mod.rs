#![allow(dead_code)]

use procxai::gbdt::{BoostedEnsemble, GradientPair, Tree, TreeNode, Variant};
use procxai::Matrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random tree of depth ≤ 3 splitting only on `features`, with thresholds
/// between the integer values 0..=3 used for data.
pub fn random_tree(rng: &mut ChaCha8Rng, features: &[usize]) -> Tree {
    fn grow(rng: &mut ChaCha8Rng, features: &[usize], depth: usize, nodes: &mut Vec<TreeNode>) -> usize {
        let id = nodes.len();
        nodes.push(TreeNode::Leaf { weight: 0.0 });
        if depth == 0 || features.is_empty() || rng.random_bool(0.25) {
            nodes[id] = TreeNode::Leaf {
                weight: rng.random_range(-1.0..1.0),
            };
            return id;
        }
        let feature = features[rng.random_range(0..features.len())];
        let threshold = rng.random_range(0..3) as f64 + 0.5;
        let left = grow(rng, features, depth - 1, nodes);
        let right = grow(rng, features, depth - 1, nodes);
        nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
    let mut nodes = Vec::new();
    grow(rng, features, 3, &mut nodes);
    Tree::from_nodes(nodes).unwrap()
}

pub fn ensemble(trees: Vec<Tree>, n: usize, base: f64, lr: f64) -> BoostedEnsemble {
    let names = (0..n).map(|j| format!("f{j}")).collect();
    BoostedEnsemble::new(Variant::ExactGreedy, base, lr, names, trees).unwrap()
}

pub fn random_rows(rng: &mut ChaCha8Rng, rows: usize, n: usize) -> Matrix {
    let data = (0..rows * n).map(|_| rng.random_range(0..4) as f64).collect();
    Matrix::new(rows, n, data).unwrap()
}

/// Every (feature, midpoint) candidate scored with the textbook gain formula.
pub fn brute_force(
    x: &Matrix,
    grads: &[GradientPair],
    lambda: f64,
    gamma: f64,
) -> Option<(usize, f64, f64)> {
    let n = x.n_rows();
    let score = |g: f64, h: f64| g * g / (h + lambda);
    let (gt, ht) = grads.iter().fold((0.0, 0.0), |(a, b), p| (a + p.g, b + p.h));
    let mut cands = Vec::new();
    for f in 0..x.n_cols() {
        let mut vals = x.column(f);
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 0..n {
                if x.get(i, f) <= t {
                    gl += grads[i].g;
                    hl += grads[i].h;
                }
            }
            let gain = 0.5 * (score(gl, hl) + score(gt - gl, ht - hl) - score(gt, ht)) - gamma;
            cands.push((f, t, gain));
        }
    }
    let best = cands.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    if !(best > 1e-9) {
        return None;
    }
    cands
        .into_iter()
        .filter(|c| (c.2 - best).abs() <= 1e-9 * best.abs().max(1.0))
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)))
}

