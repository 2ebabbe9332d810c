//! Explainable process control for binary defect prediction on tabular
//! manufacturing data.
//!
//! The pipeline balances the training data with SMOTE, fits a boosted tree
//! classifier, ranks features by mean absolute Shapley value, reads control
//! ranges for the main features off their partial-dependence curves and
//! checks that restricting production to those ranges lowers the defect rate.

pub mod attribution;
pub mod dataset;
pub mod error;
pub mod gbdt;
pub mod ice;
pub mod matrix;
pub mod pipeline;
pub mod smote;
pub mod synth;
pub mod validate;

pub use error::{Error, Result};
pub use matrix::Matrix;

/// A model that maps a feature row to a raw (log-odds) score.
pub trait Scorer: Sync {
    fn raw_score(&self, row: &[f64]) -> f64;

    fn probability(&self, row: &[f64]) -> f64 {
        gbdt::sigmoid(self.raw_score(row))
    }
}

impl Scorer for gbdt::BoostedEnsemble {
    fn raw_score(&self, row: &[f64]) -> f64 {
        gbdt::BoostedEnsemble::raw_score(self, row)
    }
}

impl<F> Scorer for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn raw_score(&self, row: &[f64]) -> f64 {
        self(row)
    }
}
