//! Gradient-boosted tree classifiers for the binary normal/defective target.
//!
//! Two growth strategies share the logistic loss, the tree type and the
//! ensemble: level-wise exact greedy boosting ([`train_exact_greedy`]) and
//! leaf-wise boosting on one-side gradient samples ([`train_goss_leafwise`]).

mod ensemble;
mod exact;
mod goss;
pub mod io;
mod loss;
mod split;
mod tree;

pub use ensemble::{evaluate, BoostedEnsemble, ConfusionMatrix, Prediction, Variant};
pub use exact::{train_exact_greedy, ExactGreedyParams};
pub use goss::{goss_sample, goss_split_gain, train_goss_leafwise, GossParams, GossSample, SideSums};
pub use loss::{
    init_base_score, leaf_weight, log_loss, logistic_grad_hess, sigmoid, GradientPair,
    BASE_SCORE_CLAMP,
};
pub use split::{best_split_exact, best_split_with, split_gain, Split, SplitCriterion};
pub use tree::{Tree, TreeNode};

use crate::dataset::{cv_folds, ProcessDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    ExactGreedy(ExactGreedyParams),
    GossLeafwise(GossParams),
}

impl ModelParams {
    pub fn variant(&self) -> Variant {
        match self {
            ModelParams::ExactGreedy(_) => Variant::ExactGreedy,
            ModelParams::GossLeafwise(_) => Variant::GossLeafwise,
        }
    }

    pub fn train(&self, ds: &ProcessDataset) -> Result<BoostedEnsemble> {
        match self {
            ModelParams::ExactGreedy(p) => train_exact_greedy(ds, p),
            ModelParams::GossLeafwise(p) => train_goss_leafwise(ds, p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    /// `None` when the fold's training part lacks one of the classes.
    pub accuracy: Option<f64>,
    pub holdout_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldOutcome>,
    /// Mean accuracy over non-degenerate folds.
    pub mean: Option<f64>,
}

/// k-fold cross-validation: train on k−1 folds, score the holdout.
pub fn cross_validate(
    train: &ProcessDataset,
    params: &ModelParams,
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    let mut folds = Vec::with_capacity(k);
    for (fit, holdout) in cv_folds(train, k, seed)? {
        let accuracy = match params.train(&fit) {
            Ok(model) => Some(evaluate(&model, &holdout)?.accuracy()),
            Err(Error::SingleClass) => None,
            Err(e) => return Err(e),
        };
        folds.push(FoldOutcome {
            accuracy,
            holdout_rows: holdout.n_rows(),
        });
    }
    let scored: Vec<f64> = folds.iter().filter_map(|f| f.accuracy).collect();
    let mean = (!scored.is_empty()).then(|| scored.iter().sum::<f64>() / scored.len() as f64);
    Ok(CvReport { folds, mean })
}
