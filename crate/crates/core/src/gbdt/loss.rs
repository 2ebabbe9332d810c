//! Binary logistic loss on the raw (log-odds) scale.

use crate::error::{Error, Result};

/// Raw score assigned when the training labels contain a single class.
pub const BASE_SCORE_CLAMP: f64 = 15.0;

/// First- and second-order derivatives of the loss w.r.t. the raw score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientPair {
    pub g: f64,
    pub h: f64,
}

#[inline]
pub fn sigmoid(raw: f64) -> f64 {
    if raw >= 0.0 {
        1.0 / (1.0 + (-raw).exp())
    } else {
        let e = raw.exp();
        e / (1.0 + e)
    }
}

/// `-[y·ln p + (1-y)·ln(1-p)]` with `p = sigmoid(raw)`, evaluated stably.
pub fn log_loss(label: u8, raw: f64) -> f64 {
    // ln(1 + e^z) without overflow
    let softplus = |z: f64| if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    if label == 1 {
        softplus(-raw)
    } else {
        softplus(raw)
    }
}

#[inline]
pub fn logistic_grad_hess(label: u8, raw: f64) -> GradientPair {
    let p = sigmoid(raw);
    GradientPair {
        g: p - f64::from(label),
        h: p * (1.0 - p),
    }
}

/// Optimal constant raw score: log-odds of the positive rate.
pub fn init_base_score(labels: &[u8]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::InsufficientData("no labels to initialise from".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 {
        return Ok(-BASE_SCORE_CLAMP);
    }
    if pos == labels.len() {
        return Ok(BASE_SCORE_CLAMP);
    }
    let p = pos as f64 / labels.len() as f64;
    Ok((p / (1.0 - p)).ln().clamp(-BASE_SCORE_CLAMP, BASE_SCORE_CLAMP))
}

/// `-G / (H + λ)`.
pub fn leaf_weight(grads: &[GradientPair], lambda: f64) -> Result<f64> {
    let (g, h) = grads.iter().fold((0.0, 0.0), |(g, h), p| (g + p.g, h + p.h));
    weight_from_sums(g, h, lambda)
}

pub(crate) fn weight_from_sums(g: f64, h: f64, lambda: f64) -> Result<f64> {
    let denom = h + lambda;
    if !(denom > 0.0) {
        return Err(Error::param(format!("H + lambda must be positive, got {denom}")));
    }
    Ok(-g / denom)
}
