//! Loss functions: binary cross-entropy for occupancy probabilities and
//! error-weighted MSE for attribute residuals. Each returns the scalar
//! loss together with its gradient, ready for backpropagation.

use super::LearnerError;

const BCE_EPS: f64 = 1e-7;

/// Mean binary cross-entropy and its gradient with respect to `probs`.
/// Probabilities are clamped to `[1e-7, 1 - 1e-7]` before the logs so the
/// loss stays finite at the extremes.
pub fn bce_loss(probs: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>), LearnerError> {
    if probs.is_empty() {
        return Err(LearnerError::EmptyInput);
    }
    if probs.len() != labels.len() {
        return Err(LearnerError::LengthMismatch {
            left: probs.len(),
            right: labels.len(),
        });
    }
    let n = probs.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(probs.len());
    for (&p, &y) in probs.iter().zip(labels) {
        let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
        loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        grad.push((-y / p + (1.0 - y) / (1.0 - p)) / n);
    }
    Ok((loss / n, grad))
}

/// Per-sample weighting for the error-weighted MSE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WmseConfig {
    /// Weight applied to samples whose error exceeds the quantile threshold.
    pub w_high: f64,
    /// Weight applied to all other samples.
    pub w_low: f64,
    /// Quantile in (0,1) that sets the threshold.
    pub q: f64,
}

impl Default for WmseConfig {
    fn default() -> Self {
        Self {
            w_high: 2.0,
            w_low: 0.5,
            q: 0.4,
        }
    }
}

impl WmseConfig {
    pub fn new(w_high: f64, w_low: f64, q: f64) -> Result<Self, LearnerError> {
        let config = Self { w_high, w_low, q };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        if !(self.w_high > 0.0 && self.w_high.is_finite()) {
            return Err(LearnerError::BadConfig(format!(
                "w_high must be positive, got {}",
                self.w_high
            )));
        }
        if !(self.w_low > 0.0 && self.w_low.is_finite()) {
            return Err(LearnerError::BadConfig(format!(
                "w_low must be positive, got {}",
                self.w_low
            )));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(LearnerError::BadConfig(format!(
                "q must lie in (0,1), got {}",
                self.q
            )));
        }
        Ok(())
    }
}

/// Per-sample weights from per-sample errors: the threshold T is the
/// nearest-rank q-quantile (the value at ascending 1-based index ⌈q·N⌉),
/// and a sample weighs `w_high` when its error strictly exceeds T,
/// `w_low` otherwise.
pub fn wmse_weights(errors: &[f64], config: &WmseConfig) -> Vec<f64> {
    assert!(!errors.is_empty(), "wmse_weights requires at least one error");
    config.validate().expect("invalid weighting config");
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("errors must not be NaN"));
    let rank = ((config.q * errors.len() as f64).ceil() as usize).max(1);
    let threshold = sorted[rank - 1];
    errors
        .iter()
        .map(|&e| if e > threshold { config.w_high } else { config.w_low })
        .collect()
}

/// Weighted mean squared error over 3-channel samples and its gradient
/// with respect to `pred`: (1/N) Σ wᵢ · ‖predᵢ − targetᵢ‖².
pub fn wmse_loss(
    pred: &[[f64; 3]],
    target: &[[f64; 3]],
    weights: &[f64],
) -> Result<(f64, Vec<[f64; 3]>), LearnerError> {
    if pred.is_empty() {
        return Err(LearnerError::EmptyInput);
    }
    if pred.len() != target.len() {
        return Err(LearnerError::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    if pred.len() != weights.len() {
        return Err(LearnerError::LengthMismatch {
            left: pred.len(),
            right: weights.len(),
        });
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for ((p, t), &w) in pred.iter().zip(target).zip(weights) {
        let mut g = [0.0; 3];
        for c in 0..3 {
            let d = p[c] - t[c];
            loss += w * d * d;
            g[c] = 2.0 * w * d / n;
        }
        grad.push(g);
    }
    Ok((loss / n, grad))
}
