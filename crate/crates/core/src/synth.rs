//! Synthetic process data with a planted defect mechanism.
//!
//! Features are drawn uniformly over their ranges. A product is defective with
//! probability `out_defect_prob` when any relevant feature falls outside its
//! sweet interval and with `base_defect_prob` otherwise, so the true control
//! ranges are known.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{ProcessDataset, DEFECTIVE, NORMAL};
use crate::error::{Error, Result};
use crate::ice::ControlRange;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedInterval {
    pub feature: usize,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_rows: usize,
    pub n_features: usize,
    /// Sampling range per feature; a single entry is shared by all features.
    pub ranges: Vec<(f64, f64)>,
    pub relevant: Vec<PlantedInterval>,
    pub base_defect_prob: f64,
    pub out_defect_prob: f64,
    /// Standard deviation of Gaussian measurement noise added to the recorded
    /// values after labelling; 0 disables it.
    pub noise_scale: f64,
    /// Values are rounded to multiples of this step, like a sensor reading;
    /// 0 keeps full precision.
    pub resolution: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// Ten features on [0, 100] and 8,000 rows. Features 2 and 5 are relevant
    /// with sweet interval [5, 95], so about 19% of rows fall outside one.
    fn default() -> Self {
        SynthConfig {
            n_rows: 8000,
            n_features: 10,
            ranges: vec![(0.0, 100.0)],
            relevant: vec![
                PlantedInterval {
                    feature: 2,
                    lower: 5.0,
                    upper: 95.0,
                },
                PlantedInterval {
                    feature: 5,
                    lower: 5.0,
                    upper: 95.0,
                },
            ],
            base_defect_prob: 0.005,
            out_defect_prob: 0.6,
            noise_scale: 0.0,
            resolution: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub feature_names: Vec<String>,
    pub relevant: Vec<PlantedInterval>,
}

impl GroundTruth {
    pub fn relevant_names(&self) -> Vec<String> {
        self.relevant
            .iter()
            .map(|p| self.feature_names[p.feature].clone())
            .collect()
    }

    pub fn interval_for(&self, name: &str) -> Option<&PlantedInterval> {
        self.relevant
            .iter()
            .find(|p| self.feature_names[p.feature] == name)
    }
}

pub fn feature_name(j: usize) -> String {
    format!("x{j:02}")
}

impl SynthConfig {
    fn range(&self, j: usize) -> (f64, f64) {
        if self.ranges.len() == 1 {
            self.ranges[0]
        } else {
            self.ranges[j]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synth: {m}")));
        if self.n_rows == 0 || self.n_features == 0 {
            return bad("n_rows and n_features must be positive".into());
        }
        if self.ranges.len() != 1 && self.ranges.len() != self.n_features {
            return bad(format!(
                "expected 1 or {} ranges, got {}",
                self.n_features,
                self.ranges.len()
            ));
        }
        for &(lo, hi) in &self.ranges {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("invalid range [{lo}, {hi}]"));
            }
        }
        let (b, o) = (self.base_defect_prob, self.out_defect_prob);
        if !(0.0 <= b && b <= o && o <= 1.0) {
            return bad(format!(
                "need 0 <= base_defect_prob <= out_defect_prob <= 1, got {b} and {o}"
            ));
        }
        for (i, p) in self.relevant.iter().enumerate() {
            if p.feature >= self.n_features {
                return bad(format!("relevant feature {} out of range", p.feature));
            }
            if self.relevant[..i].iter().any(|q| q.feature == p.feature) {
                return bad(format!("relevant feature {} listed twice", p.feature));
            }
            let (lo, hi) = self.range(p.feature);
            if !(lo <= p.lower && p.lower <= p.upper && p.upper <= hi) {
                return bad(format!(
                    "sweet interval [{}, {}] not inside [{lo}, {hi}]",
                    p.lower, p.upper
                ));
            }
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return bad("noise_scale must be non-negative".into());
        }
        if !(self.resolution >= 0.0 && self.resolution.is_finite()) {
            return bad("resolution must be non-negative".into());
        }
        Ok(())
    }

    fn quantize(&self, v: f64) -> f64 {
        if self.resolution > 0.0 {
            (v / self.resolution).round() * self.resolution
        } else {
            v
        }
    }

    /// Probability that a row with these true values is defective.
    pub fn defect_prob(&self, row: &[f64]) -> f64 {
        let outside = self
            .relevant
            .iter()
            .any(|p| row[p.feature] < p.lower || row[p.feature] > p.upper);
        if outside {
            self.out_defect_prob
        } else {
            self.base_defect_prob
        }
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<(ProcessDataset, GroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = (cfg.noise_scale > 0.0)
        .then(|| Normal::new(0.0, cfg.noise_scale).map_err(|e| Error::Config(e.to_string())))
        .transpose()?;
    let mut data = Vec::with_capacity(cfg.n_rows * cfg.n_features);
    let mut target = Vec::with_capacity(cfg.n_rows);
    let mut row = vec![0.0; cfg.n_features];
    for _ in 0..cfg.n_rows {
        for (j, v) in row.iter_mut().enumerate() {
            let (lo, hi) = cfg.range(j);
            *v = cfg.quantize(rng.random_range(lo..=hi)).clamp(lo, hi);
        }
        let defective = rng.random::<f64>() < cfg.defect_prob(&row);
        target.push(if defective { DEFECTIVE } else { NORMAL });
        if let Some(n) = &noise {
            for v in &mut row {
                *v = cfg.quantize(*v + n.sample(&mut rng));
            }
        }
        data.extend_from_slice(&row);
    }
    let names: Vec<String> = (0..cfg.n_features).map(feature_name).collect();
    let ds = ProcessDataset::new(
        Matrix::new(cfg.n_rows, cfg.n_features, data)?,
        names.clone(),
        target,
    )?;
    Ok((
        ds,
        GroundTruth {
            feature_names: names,
            relevant: cfg.relevant.clone(),
        },
    ))
}

/// Length of the intersection over length of the union of two closed
/// intervals. A zero-length union counts as 1 for identical intervals.
pub fn jaccard(a: (f64, f64), b: (f64, f64)) -> f64 {
    let union = a.1.max(b.1) - a.0.min(b.0);
    if union <= 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    inter / union
}

pub fn ground_truth_overlap(planted: &PlantedInterval, recovered: &ControlRange) -> f64 {
    jaccard(
        (planted.lower, planted.upper),
        (recovered.lower, recovered.upper),
    )
}
