//! Aggregators over `T` stochastic forward passes.

use serde::{Deserialize, Serialize};

use crate::baseline::entropy;
use crate::error::{Error, Result};
use crate::types::McSamples;

/// Probabilities are clamped to `[BALD_EPS, 1]` inside the BALD logarithms.
pub const BALD_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McAggregate {
    pub mean_probs: Vec<f64>,
    /// Unbiased (`T - 1`) per-class variance; all zeros when `T = 1`.
    pub variance: Vec<f64>,
    /// True when all passes are bitwise identical.
    pub constant: bool,
}

impl McAggregate {
    pub fn new(t: &McSamples) -> Self {
        let passes = t.passes();
        let first = t.row(0);
        let constant = t.rows().all(|r| r == first);
        if constant {
            return Self { mean_probs: first.to_vec(), variance: vec![0.0; t.classes()], constant };
        }
        let mut mean = vec![0.0; t.classes()];
        for row in t.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= passes as f64);
        let mut variance = vec![0.0; t.classes()];
        if passes > 1 {
            for row in t.rows() {
                for ((s, v), m) in variance.iter_mut().zip(row).zip(&mean) {
                    *s += (v - m).powi(2);
                }
            }
            variance.iter_mut().for_each(|s| *s /= (passes - 1) as f64);
        }
        Self { mean_probs: mean, variance, constant }
    }
}

/// Sampled maximum probability: `1 - max_c mean_t p_t^c`.
pub fn score_smp(t: &McSamples) -> f64 {
    let agg = McAggregate::new(t);
    1.0 - agg.mean_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Mean over classes of the unbiased per-class variance across passes.
pub fn score_pv(t: &McSamples) -> Result<f64> {
    if t.passes() < 2 {
        return Err(Error::TooFewPasses(t.passes()));
    }
    let agg = McAggregate::new(t);
    Ok(agg.variance.iter().sum::<f64>() / t.classes() as f64)
}

/// Mutual information between prediction and model parameters: entropy of
/// the mean minus mean of the per-pass entropies. Clipped at zero.
pub fn score_bald(t: &McSamples) -> f64 {
    let agg = McAggregate::new(t);
    if agg.constant {
        return 0.0;
    }
    let clamped_entropy = |p: &[f64]| -> f64 {
        -p.iter().map(|&v| {
            let v = v.clamp(BALD_EPS, 1.0);
            v * v.ln()
        }).sum::<f64>()
    };
    let h_mean = clamped_entropy(&agg.mean_probs);
    let mean_h = t.rows().map(clamped_entropy).sum::<f64>() / t.passes() as f64;
    (h_mean - mean_h).max(0.0)
}

/// Entropy of the mean distribution, the upper bound on BALD.
pub fn entropy_of_mean(t: &McSamples) -> f64 {
    entropy(&McAggregate::new(t).mean_probs)
}
