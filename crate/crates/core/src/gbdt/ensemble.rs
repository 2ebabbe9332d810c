use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{ProcessDataset, NORMAL};
use crate::error::{Error, Result};
use crate::gbdt::loss::sigmoid;
use crate::gbdt::tree::Tree;

/// Tree growth strategy the ensemble was trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Level-wise growth with exact greedy second-order splits.
    ExactGreedy,
    /// Leaf-wise growth on gradient-based one-side samples.
    GossLeafwise,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::ExactGreedy => "exact-greedy",
            Variant::GossLeafwise => "goss-leafwise",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-greedy" => Ok(Variant::ExactGreedy),
            "goss-leafwise" => Ok(Variant::GossLeafwise),
            other => Err(Error::param(format!(
                "unknown model variant `{other}` (expected exact-greedy or goss-leafwise)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub raw: f64,
    pub probability: f64,
    pub label: u8,
}

/// Additive tree model: `raw = base_score + learning_rate · Σ trees(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostedEnsemble {
    variant: Variant,
    base_score: f64,
    learning_rate: f64,
    feature_names: Vec<String>,
    trees: Vec<Tree>,
}

impl BoostedEnsemble {
    pub fn new(
        variant: Variant,
        base_score: f64,
        learning_rate: f64,
        feature_names: Vec<String>,
        trees: Vec<Tree>,
    ) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate <= 1.0) {
            return Err(Error::param(format!(
                "learning rate must lie in (0, 1], got {learning_rate}"
            )));
        }
        if !base_score.is_finite() {
            return Err(Error::param("base score must be finite"));
        }
        if let Some(f) = trees.iter().filter_map(Tree::max_feature).max() {
            if f >= feature_names.len() {
                return Err(Error::param(format!(
                    "tree references feature {f} but the model has {} features",
                    feature_names.len()
                )));
            }
        }
        Ok(BoostedEnsemble {
            variant,
            base_score,
            learning_rate,
            feature_names,
            trees,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// The first `n` trees only.
    pub fn truncated(&self, n: usize) -> BoostedEnsemble {
        BoostedEnsemble {
            trees: self.trees[..n.min(self.trees.len())].to_vec(),
            ..self.clone()
        }
    }

    /// Raw log-odds without a dimension check.
    #[inline]
    pub fn raw_score(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        self.base_score + self.learning_rate * sum
    }

    pub fn predict(&self, row: &[f64]) -> Result<Prediction> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: row.len(),
            });
        }
        let raw = self.raw_score(row);
        Ok(Prediction {
            raw,
            probability: sigmoid(raw),
            label: u8::from(raw >= 0.0),
        })
    }
}

/// Counts with the normal class (target 1) as positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// Accuracy in percent, rounded half-up to two decimals.
    pub fn accuracy_percent(&self) -> f64 {
        let total = self.total() as u128;
        let correct = (self.tp + self.tn) as u128;
        // hundredths of a percent: 10000·correct/total, rounded half-up
        let hundredths = (20000 * correct + total) / (2 * total);
        hundredths as f64 / 100.0
    }

    pub fn record(&mut self, actual: u8, predicted: u8) {
        match (actual == NORMAL, predicted == NORMAL) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }
}

pub fn evaluate(ens: &BoostedEnsemble, ds: &ProcessDataset) -> Result<ConfusionMatrix> {
    if ds.is_empty() {
        return Err(Error::InsufficientData("cannot evaluate on an empty dataset".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (i, &y) in ds.target().iter().enumerate() {
        cm.record(y, ens.predict(ds.row(i))?.label);
    }
    Ok(cm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::tree::TreeNode;

    #[test]
    fn empty_ensemble_predicts_base() {
        let e = BoostedEnsemble::new(Variant::ExactGreedy, 0.0, 0.1, vec!["a".into()], vec![])
            .unwrap();
        let p = e.predict(&[3.0]).unwrap();
        assert_eq!(p.probability, 0.5);
        assert_eq!(p.label, 1);
        assert!(e.predict(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn single_leaf_probability() {
        let w = -0.7;
        let e = BoostedEnsemble::new(
            Variant::GossLeafwise,
            0.0,
            1.0,
            vec!["a".into()],
            vec![Tree::leaf(w)],
        )
        .unwrap();
        let p = e.predict(&[0.0]).unwrap();
        assert_eq!(p.probability, sigmoid(w));
        assert_eq!(p.label, 0);
    }

    #[test]
    fn rejects_out_of_range_feature() {
        let t = Tree::from_nodes(vec![
            TreeNode::Split {
                feature: 3,
                threshold: 0.0,
                left: 1,
                right: 2,
            },
            TreeNode::Leaf { weight: 0.0 },
            TreeNode::Leaf { weight: 0.0 },
        ])
        .unwrap();
        assert!(BoostedEnsemble::new(Variant::ExactGreedy, 0.0, 0.1, vec!["a".into()], vec![t])
            .is_err());
        assert!(BoostedEnsemble::new(Variant::ExactGreedy, 0.0, 0.0, vec![], vec![]).is_err());
    }

    #[test]
    fn published_confusion_matrix_accuracy() {
        let cm = ConfusionMatrix {
            tp: 3941,
            fn_: 14,
            fp: 25,
            tn: 15,
        };
        assert_eq!(cm.total(), 3995);
        assert_eq!(cm.accuracy_percent(), 99.02);
    }

    #[test]
    fn constant_normal_predictor_accuracy() {
        let cm = ConfusionMatrix {
            tp: 3955,
            fp: 40,
            tn: 0,
            fn_: 0,
        };
        // 98.9987... rounds up
        assert_eq!(cm.accuracy_percent(), 99.0);
        let perfect = ConfusionMatrix {
            tp: 10,
            tn: 3,
            ..Default::default()
        };
        assert_eq!(perfect.accuracy_percent(), 100.0);
    }

    #[test]
    fn variant_round_trip() {
        for v in [Variant::ExactGreedy, Variant::GossLeafwise] {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("xgb".parse::<Variant>().is_err());
    }
}
