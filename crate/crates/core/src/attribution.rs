//! Shapley-value attribution with an interventional value function.
//!
//! For an instance `x` and a background sample `Z`,
//!
//! ```text
//! v(S) = mean_z f(x_S, z_~S) − mean_z f(z)
//! φ_i  = Σ_{S ⊆ N∖{i}} |S|!(n−|S|−1)!/n! · (v(S ∪ {i}) − v(S))
//! ```
//!
//! where `f` is the model's raw score. Three estimators are provided: full
//! subset enumeration, permutation sampling, and a tree-path algorithm that
//! returns the enumeration result for tree ensembles in polynomial time.
//! Feature importance is the per-feature mean of |φ| over explained rows.

use std::io::Write;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gbdt::{BoostedEnsemble, Tree, TreeNode};
use crate::matrix::Matrix;
use crate::Scorer;

/// Largest feature count accepted by [`shapley_exact`].
pub const MAX_EXACT_FEATURES: usize = 16;

pub const DEFAULT_SELECTION_THRESHOLD: f64 = 0.70;

fn check_inputs(x: &[f64], background: &Matrix) -> Result<()> {
    if background.is_empty() {
        return Err(Error::InsufficientData("empty background set".into()));
    }
    if background.n_cols() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: background.n_cols(),
            found: x.len(),
        });
    }
    Ok(())
}

/// `mean_z f(x_S, z_~S)` with `S` given as a membership mask.
fn coalition_mean<M: Scorer + ?Sized>(
    model: &M,
    in_s: impl Fn(usize) -> bool,
    x: &[f64],
    background: &Matrix,
    buf: &mut Vec<f64>,
) -> f64 {
    let mut total = 0.0;
    for z in background.rows() {
        buf.clear();
        buf.extend((0..x.len()).map(|j| if in_s(j) { x[j] } else { z[j] }));
        total += model.raw_score(buf);
    }
    total / background.n_rows() as f64
}

/// `v(S)` for the coalition marked `true` in `coalition`.
pub fn value_function<M: Scorer + ?Sized>(
    model: &M,
    coalition: &[bool],
    x: &[f64],
    background: &Matrix,
) -> Result<f64> {
    check_inputs(x, background)?;
    if coalition.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: coalition.len(),
        });
    }
    let mut buf = Vec::with_capacity(x.len());
    let with_s = coalition_mean(model, |j| coalition[j], x, background, &mut buf);
    let baseline = coalition_mean(model, |_| false, x, background, &mut buf);
    Ok(with_s - baseline)
}

/// Shapley values by enumerating all `2^n` coalitions.
pub fn shapley_exact<M: Scorer + ?Sized>(
    model: &M,
    x: &[f64],
    background: &Matrix,
) -> Result<Vec<f64>> {
    check_inputs(x, background)?;
    let n = x.len();
    if n > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures {
            n,
            max: MAX_EXACT_FEATURES,
        });
    }
    let means: Vec<f64> = (0..1usize << n)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |buf, mask| coalition_mean(model, |j| mask >> j & 1 == 1, x, background, buf),
        )
        .collect();
    let v = |mask: usize| means[mask] - means[0];

    let mut fact = vec![1.0f64; n + 1];
    for k in 1..=n {
        fact[k] = fact[k - 1] * k as f64;
    }
    let weight: Vec<f64> = (0..n)
        .map(|s| fact[s] * fact[n - s - 1] / fact[n])
        .collect();

    let mut phi = vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        for mask in 0..1usize << n {
            if mask & bit != 0 {
                continue;
            }
            *p += weight[mask.count_ones() as usize] * (v(mask | bit) - v(mask));
        }
    }
    Ok(phi)
}

/// Monte Carlo estimate from `n_permutations` random feature orderings.
pub fn shapley_sampled<M: Scorer + ?Sized>(
    model: &M,
    x: &[f64],
    background: &Matrix,
    n_permutations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_inputs(x, background)?;
    if n_permutations == 0 {
        return Err(Error::param("need at least one permutation"));
    }
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut member = vec![false; n];
    let mut buf = Vec::with_capacity(n);
    let mut phi = vec![0.0; n];
    let empty = coalition_mean(model, |_| false, x, background, &mut buf);
    for _ in 0..n_permutations {
        order.shuffle(&mut rng);
        member.fill(false);
        let mut prev = empty;
        for &i in &order {
            member[i] = true;
            let cur = coalition_mean(model, |j| member[j], x, background, &mut buf);
            phi[i] += cur - prev;
            prev = cur;
        }
    }
    for p in &mut phi {
        *p /= n_permutations as f64;
    }
    Ok(phi)
}

/// Exact interventional Shapley values of a tree ensemble.
///
/// For one background row `z`, a tree's output on the hybrid `(x_S, z_~S)`
/// reaches a leaf only when every feature on which `x` and `z` part ways along
/// the path is either in `S` (the `x` side) or outside it (the `z` side). Each
/// leaf is therefore a game `1[A ⊆ S, B ∩ S = ∅]`, whose Shapley value is
/// `(|A|−1)!|B|!/(|A|+|B|)!` for members of `A` and `−|A|!(|B|−1)!/(|A|+|B|)!`
/// for members of `B`.
pub fn shapley_tree(ens: &BoostedEnsemble, x: &[f64], background: &Matrix) -> Result<Vec<f64>> {
    check_inputs(x, background)?;
    if x.len() != ens.n_features() {
        return Err(Error::DimensionMismatch {
            expected: ens.n_features(),
            found: x.len(),
        });
    }
    let n = x.len();
    let max_depth = ens.trees().iter().map(Tree::depth).max().unwrap_or(0);
    let mut fact = vec![1.0f64; max_depth + 2];
    for k in 1..fact.len() {
        fact[k] = fact[k - 1] * k as f64;
    }
    let mut phi = vec![0.0; n];
    let mut walker = PathWalker {
        x,
        z: x,
        side: vec![Side::Free; n],
        on_x: Vec::with_capacity(max_depth),
        on_z: Vec::with_capacity(max_depth),
        fact: &fact,
    };
    for tree in ens.trees() {
        for z in background.rows() {
            walker.z = z;
            walker.walk(tree, 0, &mut phi);
        }
    }
    let scale = ens.learning_rate() / background.n_rows() as f64;
    for p in &mut phi {
        *p *= scale;
    }
    Ok(phi)
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Free,
    X,
    Z,
}

struct PathWalker<'a> {
    x: &'a [f64],
    z: &'a [f64],
    side: Vec<Side>,
    on_x: Vec<usize>,
    on_z: Vec<usize>,
    fact: &'a [f64],
}

impl PathWalker<'_> {
    fn walk(&mut self, tree: &Tree, id: usize, phi: &mut [f64]) {
        match *tree.node(id) {
            TreeNode::Leaf { weight } => {
                let (a, b) = (self.on_x.len(), self.on_z.len());
                if a + b == 0 {
                    return;
                }
                let f = self.fact;
                if a > 0 {
                    let w = weight * f[a - 1] * f[b] / f[a + b];
                    for &j in &self.on_x {
                        phi[j] += w;
                    }
                }
                if b > 0 {
                    let w = weight * f[a] * f[b - 1] / f[a + b];
                    for &j in &self.on_z {
                        phi[j] -= w;
                    }
                }
            }
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let child = |v: f64| if v <= threshold { left } else { right };
                let (cx, cz) = (child(self.x[feature]), child(self.z[feature]));
                match self.side[feature] {
                    Side::X => self.walk(tree, cx, phi),
                    Side::Z => self.walk(tree, cz, phi),
                    Side::Free if cx == cz => self.walk(tree, cx, phi),
                    Side::Free => {
                        self.side[feature] = Side::X;
                        self.on_x.push(feature);
                        self.walk(tree, cx, phi);
                        self.on_x.pop();
                        self.side[feature] = Side::Z;
                        self.on_z.push(feature);
                        self.walk(tree, cz, phi);
                        self.on_z.pop();
                        self.side[feature] = Side::Free;
                    }
                }
            }
        }
    }
}

/// How per-instance Shapley values are computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    /// Subset enumeration; at most [`MAX_EXACT_FEATURES`] features.
    Exact,
    /// Tree-path algorithm; same values as `Exact`, any feature count.
    Tree,
    /// Permutation sampling. Instance `i` uses seed `seed + i`.
    Sampled { permutations: usize, seed: u64 },
}

/// Shapley matrix (instances × features) for every row of `instances`.
/// Rows are computed in parallel; the result does not depend on scheduling.
pub fn explain(
    ens: &BoostedEnsemble,
    instances: &Matrix,
    background: &Matrix,
    estimator: Estimator,
) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = (0..instances.n_rows())
        .into_par_iter()
        .map(|i| {
            let x = instances.row(i);
            match estimator {
                Estimator::Exact => shapley_exact(ens, x, background),
                Estimator::Tree => shapley_tree(ens, x, background),
                Estimator::Sampled { permutations, seed } => {
                    shapley_sampled(ens, x, background, permutations, seed.wrapping_add(i as u64))
                }
            }
        })
        .collect::<Result<_>>()?;
    Matrix::from_rows_with_width(&rows, instances.n_cols())
}

/// At most `max_rows` rows of `m`, drawn without replacement and kept in
/// source order. Returns `m` unchanged when it is small enough.
pub fn subsample_rows(m: &Matrix, max_rows: usize, seed: u64) -> Matrix {
    if m.n_rows() <= max_rows {
        return m.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, m.n_rows(), max_rows).into_vec();
    idx.sort_unstable();
    m.select_rows(&idx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Importance {
    pub mean_abs: Vec<f64>,
    /// Feature indices by descending `mean_abs`; ties keep the lower index first.
    pub order: Vec<usize>,
    /// Running share of total importance along `order`.
    pub cumulative_ratio: Vec<f64>,
}

pub fn aggregate(phi: &Matrix) -> Result<Importance> {
    if phi.is_empty() {
        return Err(Error::InsufficientData("no Shapley rows to aggregate".into()));
    }
    let n = phi.n_rows() as f64;
    let mut mean_abs = vec![0.0; phi.n_cols()];
    for r in phi.rows() {
        for (m, v) in mean_abs.iter_mut().zip(r) {
            *m += v.abs();
        }
    }
    for m in &mut mean_abs {
        *m /= n;
    }
    let mut order: Vec<usize> = (0..mean_abs.len()).collect();
    order.sort_by(|&a, &b| mean_abs[b].total_cmp(&mean_abs[a]).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&j| mean_abs[j]).sum();
    let mut running = 0.0;
    let cumulative_ratio = order
        .iter()
        .map(|&j| {
            running += mean_abs[j];
            if total > 0.0 {
                running / total
            } else {
                0.0
            }
        })
        .collect();
    Ok(Importance {
        mean_abs,
        order,
        cumulative_ratio,
    })
}

/// Longest prefix of `order` whose cumulative ratio stays within `threshold`,
/// never shorter than one feature. Empty when all importances are zero.
pub fn select_main_features(
    order: &[usize],
    cumulative_ratio: &[f64],
    threshold: f64,
) -> Result<Vec<usize>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::param(format!(
            "selection threshold must lie in (0, 1], got {threshold}"
        )));
    }
    if order.len() != cumulative_ratio.len() {
        return Err(Error::DimensionMismatch {
            expected: order.len(),
            found: cumulative_ratio.len(),
        });
    }
    if cumulative_ratio.last().is_none_or(|&r| r == 0.0) {
        return Ok(Vec::new());
    }
    let len = cumulative_ratio
        .iter()
        .take_while(|&&r| r <= threshold + 1e-12)
        .count()
        .max(1);
    Ok(order[..len].to_vec())
}

/// Per-instance Shapley values with their aggregate ranking and selection.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyReport {
    pub feature_names: Vec<String>,
    pub phi: Matrix,
    pub mean_abs: Vec<f64>,
    pub order: Vec<usize>,
    pub cumulative_ratio: Vec<f64>,
    pub main_features: Vec<usize>,
    pub threshold: f64,
}

impl ShapleyReport {
    pub fn from_phi(phi: Matrix, feature_names: Vec<String>, threshold: f64) -> Result<Self> {
        if phi.n_cols() != feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: feature_names.len(),
                found: phi.n_cols(),
            });
        }
        let imp = aggregate(&phi)?;
        let main_features = select_main_features(&imp.order, &imp.cumulative_ratio, threshold)?;
        Ok(ShapleyReport {
            feature_names,
            phi,
            mean_abs: imp.mean_abs,
            order: imp.order,
            cumulative_ratio: imp.cumulative_ratio,
            main_features,
            threshold,
        })
    }

    pub fn main_feature_names(&self) -> Vec<String> {
        self.main_features
            .iter()
            .map(|&j| self.feature_names[j].clone())
            .collect()
    }

    /// One row per feature in rank order: rank, name, mean |φ|, cumulative
    /// ratio, selected flag.
    pub fn write_importance_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rank", "feature", "mean_abs_shap", "cumulative_ratio", "selected"])?;
        for (rank, (&j, ratio)) in self.order.iter().zip(&self.cumulative_ratio).enumerate() {
            w.write_record([
                (rank + 1).to_string(),
                self.feature_names[j].clone(),
                self.mean_abs[j].to_string(),
                ratio.to_string(),
                u8::from(rank < self.main_features.len()).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Raw Shapley matrix, one row per explained instance.
    pub fn write_values_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["instance".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for (i, r) in self.phi.rows().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(r.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}
