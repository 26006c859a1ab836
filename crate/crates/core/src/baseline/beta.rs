use serde::{Deserialize, Serialize};

use super::CLAMP_EPS;
use crate::error::{Error, Result};
use crate::types::{ClassProbability, LabeledSplit};

/// Upper bound on fitted shape parameters. Zero-variance samples push the
/// likelihood maximum to infinity; the fit stops here and reports it.
pub const SHAPE_CAP: f64 = 1e4;
const NEWTON_TOL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaFit {
    Newton,
    GridSearch,
    Capped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaShape {
    pub alpha: f64,
    pub gamma: f64,
    pub fit: BetaFit,
}

impl BetaShape {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && gamma > 0.0 && alpha.is_finite() && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Beta shapes must be positive and finite, got ({alpha}, {gamma})"
            )));
        }
        Ok(Self { alpha, gamma, fit: BetaFit::Newton })
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let x = x.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS);
        (self.alpha - 1.0) * x.ln() + (self.gamma - 1.0) * (1.0 - x).ln() - ln_beta(self.alpha, self.gamma)
    }
}

/// Class-conditional Beta densities of the max-probability for correct and
/// incorrect predictions, plus the empirical priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaModel {
    pub correct: BetaShape,
    pub incorrect: BetaShape,
    pub p_correct: f64,
    pub p_incorrect: f64,
}

impl BetaModel {
    pub fn new(correct: BetaShape, incorrect: BetaShape, p_correct: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_correct) {
            return Err(Error::InvalidParameter(format!("prior {p_correct} outside [0, 1]")));
        }
        BetaShape::new(correct.alpha, correct.gamma)?;
        BetaShape::new(incorrect.alpha, incorrect.gamma)?;
        Ok(Self { correct, incorrect, p_correct, p_incorrect: 1.0 - p_correct })
    }

    pub fn is_capped(&self) -> bool {
        self.correct.fit == BetaFit::Capped || self.incorrect.fit == BetaFit::Capped
    }

    /// Posterior probability that a prediction with this max-probability is wrong.
    pub fn uncertainty(&self, max_prob: f64) -> f64 {
        if self.p_correct <= 0.0 {
            return 1.0;
        }
        if self.p_incorrect <= 0.0 {
            return 0.0;
        }
        let log_c = self.correct.ln_pdf(max_prob) + self.p_correct.ln();
        let log_i = self.incorrect.ln_pdf(max_prob) + self.p_incorrect.ln();
        // 1 - c / (c + i) = 1 / (1 + exp(log_c - log_i))
        1.0 / (1.0 + (log_c - log_i).exp())
    }
}

fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    acc + x.ln() - 0.5 / x
        - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))))
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + inv
        + inv2 / 2.0
        + inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0)))
}

/// Sufficient statistics of a Beta sample: `mean ln x` and `mean ln (1 - x)`.
struct BetaStats {
    mean_ln_x: f64,
    mean_ln_1mx: f64,
}

impl BetaStats {
    fn log_lik(&self, a: f64, b: f64) -> f64 {
        (a - 1.0) * self.mean_ln_x + (b - 1.0) * self.mean_ln_1mx - ln_beta(a, b)
    }
}

fn capped_shape(mean: f64) -> BetaShape {
    let scale = SHAPE_CAP / mean.max(1.0 - mean);
    BetaShape { alpha: mean * scale, gamma: (1.0 - mean) * scale, fit: BetaFit::Capped }
}

/// Maximum-likelihood Beta fit: Newton iterations on the digamma score
/// equations from a method-of-moments start, with a bounded log-grid search
/// when Newton fails to converge.
pub fn fit_beta_mle(samples: &[f64]) -> Result<BetaShape> {
    if samples.len() < 2 {
        return Err(Error::DegenerateSplit(format!(
            "Beta fit needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let xs: Vec<f64> = samples.iter().map(|x| x.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS)).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let stats = BetaStats {
        mean_ln_x: xs.iter().map(|x| x.ln()).sum::<f64>() / n,
        mean_ln_1mx: xs.iter().map(|x| (1.0 - x).ln()).sum::<f64>() / n,
    };

    let k = if var > 0.0 { mean * (1.0 - mean) / var - 1.0 } else { f64::INFINITY };
    if !k.is_finite() || mean * k >= SHAPE_CAP || (1.0 - mean) * k >= SHAPE_CAP {
        return Ok(capped_shape(mean));
    }
    let (mut a, mut b) = if k > 0.0 { (mean * k, (1.0 - mean) * k) } else { (1.0, 1.0) };

    for _ in 0..NEWTON_MAX_ITER {
        let ds = digamma(a + b);
        let g = [ds - digamma(a) + stats.mean_ln_x, ds - digamma(b) + stats.mean_ln_1mx];
        let ts = trigamma(a + b);
        let h = [[ts - trigamma(a), ts], [ts, ts - trigamma(b)]];
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let step = [
            (h[1][1] * g[0] - h[0][1] * g[1]) / det,
            (h[0][0] * g[1] - h[1][0] * g[0]) / det,
        ];
        let mut t = 1.0;
        let (mut na, mut nb) = (a - step[0], b - step[1]);
        while (na <= 0.0 || nb <= 0.0) && t > 1e-12 {
            t *= 0.5;
            na = a - t * step[0];
            nb = b - t * step[1];
        }
        if na <= 0.0 || nb <= 0.0 {
            break;
        }
        let moved = (na - a).abs().max((nb - b).abs());
        a = na;
        b = nb;
        if a >= SHAPE_CAP || b >= SHAPE_CAP {
            return Ok(capped_shape(mean));
        }
        if moved < NEWTON_TOL * (1.0 + a.max(b)) {
            return Ok(BetaShape { alpha: a, gamma: b, fit: BetaFit::Newton });
        }
    }
    Ok(grid_search(&stats))
}

fn grid_search(stats: &BetaStats) -> BetaShape {
    let (lo, hi) = (1e-2f64.ln(), SHAPE_CAP.ln());
    let steps = 200;
    let at = |i: usize, lo: f64, hi: f64| (lo + (hi - lo) * i as f64 / steps as f64).exp();
    let mut best = (f64::NEG_INFINITY, 1.0, 1.0);
    let (mut la, mut ha, mut lb, mut hb) = (lo, hi, lo, hi);
    for _round in 0..3 {
        for i in 0..=steps {
            let a = at(i, la, ha);
            for j in 0..=steps {
                let b = at(j, lb, hb);
                let ll = stats.log_lik(a, b);
                if ll > best.0 {
                    best = (ll, a, b);
                }
            }
        }
        let wa = (ha - la) / steps as f64 * 2.0;
        let wb = (hb - lb) / steps as f64 * 2.0;
        la = (best.1.ln() - wa).max(lo);
        ha = (best.1.ln() + wa).min(hi);
        lb = (best.2.ln() - wb).max(lo);
        hb = (best.2.ln() + wb).min(hi);
    }
    let fit = if best.1 >= SHAPE_CAP * 0.999 || best.2 >= SHAPE_CAP * 0.999 {
        BetaFit::Capped
    } else {
        BetaFit::GridSearch
    };
    BetaShape { alpha: best.1, gamma: best.2, fit }
}

/// Fits the Beta model from per-instance max-probabilities and correctness.
pub fn fit_beta_from(max_probs: &[f64], correct: &[bool]) -> Result<BetaModel> {
    if max_probs.len() != correct.len() {
        return Err(Error::LengthMismatch {
            what: "correctness flags",
            expected: max_probs.len(),
            got: correct.len(),
        });
    }
    let (good, bad): (Vec<_>, Vec<_>) =
        max_probs.iter().copied().zip(correct.iter().copied()).partition(|(_, c)| *c);
    if good.len() < 2 || bad.len() < 2 {
        return Err(Error::DegenerateSplit(format!(
            "need at least 2 correct and 2 incorrect predictions, got {} and {}",
            good.len(),
            bad.len()
        )));
    }
    let good: Vec<f64> = good.into_iter().map(|(x, _)| x).collect();
    let bad: Vec<f64> = bad.into_iter().map(|(x, _)| x).collect();
    let p_correct = good.len() as f64 / max_probs.len() as f64;
    Ok(BetaModel {
        correct: fit_beta_mle(&good)?,
        incorrect: fit_beta_mle(&bad)?,
        p_correct,
        p_incorrect: 1.0 - p_correct,
    })
}

/// Fits the Beta model on a multiclass validation split.
pub fn fit_beta(validation: &LabeledSplit) -> Result<BetaModel> {
    let correct = validation.correctness()?;
    let max_probs: Vec<f64> = validation.records().iter().map(|r| r.probs.max_prob()).collect();
    fit_beta_from(&max_probs, &correct)
}

pub fn score_beta(p: &ClassProbability, model: &BetaModel) -> Result<f64> {
    super::require_multiclass(p)?;
    Ok(model.uncertainty(p.max_prob()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::distr::Distribution;

    #[test]
    fn digamma_matches_known_values() {
        // psi(1) = -euler_gamma, psi(1/2) = -euler_gamma - 2 ln 2
        let euler = 0.577_215_664_901_532_9;
        assert_abs_diff_eq!(digamma(1.0), -euler, epsilon = 1e-13);
        assert_abs_diff_eq!(digamma(0.5), -euler - 2.0 * 2f64.ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(digamma(10.0), 2.251_752_589_066_721, epsilon = 1e-13);
    }

    #[test]
    fn trigamma_matches_known_values() {
        // psi_1(1) = pi^2 / 6, psi_1(1/2) = pi^2 / 2
        let pi2 = std::f64::consts::PI.powi(2);
        assert_abs_diff_eq!(trigamma(1.0), pi2 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(trigamma(0.5), pi2 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_variance_is_capped() {
        let shape = fit_beta_mle(&[0.5; 10]).unwrap();
        assert_eq!(shape.fit, BetaFit::Capped);
        assert_abs_diff_eq!(shape.alpha, SHAPE_CAP);
        assert_abs_diff_eq!(shape.gamma, SHAPE_CAP);
    }

    #[test]
    fn recovers_shapes_from_large_sample() {
        let mut rng = crate::rng::seeded_rng(11);
        let dist = rand_distr::Beta::new(2.0, 3.0).unwrap();
        let xs: Vec<f64> = (0..20_000).map(|_| dist.sample(&mut rng)).collect();
        let s = fit_beta_mle(&xs).unwrap();
        assert_eq!(s.fit, BetaFit::Newton);
        assert_abs_diff_eq!(s.alpha, 2.0, epsilon = 0.1);
        assert_abs_diff_eq!(s.gamma, 3.0, epsilon = 0.15);
    }

    #[test]
    fn grid_fallback_agrees_with_newton() {
        let mut rng = crate::rng::seeded_rng(3);
        let dist = rand_distr::Beta::new(0.7, 1.8).unwrap();
        let xs: Vec<f64> = (0..5_000).map(|_| dist.sample(&mut rng)).collect();
        let newton = fit_beta_mle(&xs).unwrap();
        let n = xs.len() as f64;
        let stats = BetaStats {
            mean_ln_x: xs.iter().map(|x| x.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS).ln()).sum::<f64>() / n,
            mean_ln_1mx: xs.iter().map(|x| (1.0 - x.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS)).ln()).sum::<f64>() / n,
        };
        let grid = grid_search(&stats);
        assert_abs_diff_eq!(newton.alpha, grid.alpha, epsilon = 1e-2);
        assert_abs_diff_eq!(newton.gamma, grid.gamma, epsilon = 1e-2);
    }

    #[test]
    fn priors_are_frequencies() {
        let probs: Vec<f64> = (0..100).map(|i| 0.5 + 0.004 * i as f64).collect();
        let correct: Vec<bool> = (0..100).map(|i| i >= 20).collect();
        let m = fit_beta_from(&probs, &correct).unwrap();
        assert_abs_diff_eq!(m.p_correct, 0.8);
        assert_abs_diff_eq!(m.p_incorrect, 0.2);
        assert_abs_diff_eq!(m.p_correct + m.p_incorrect, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn empty_group_is_degenerate() {
        let err = fit_beta_from(&[0.9, 0.8, 0.7], &[true, true, true]).unwrap_err();
        assert!(matches!(err, Error::DegenerateSplit(_)));
    }

    #[test]
    fn symmetric_model_gives_half() {
        let s = BetaShape::new(3.0, 2.0).unwrap();
        let m = BetaModel::new(s, s, 0.5).unwrap();
        for x in [0.1, 0.5, 0.93] {
            assert_abs_diff_eq!(m.uncertainty(x), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn certain_prior_dominates() {
        let m = BetaModel::new(BetaShape::new(2.0, 8.0).unwrap(), BetaShape::new(8.0, 2.0).unwrap(), 1.0)
            .unwrap();
        assert_eq!(m.uncertainty(0.6), 0.0);
    }

    #[test]
    fn posterior_matches_direct_density_evaluation() {
        let m = BetaModel::new(BetaShape::new(8.0, 2.0).unwrap(), BetaShape::new(2.0, 8.0).unwrap(), 0.5)
            .unwrap();
        // Beta(8,2) pdf at 0.9 = 72 * 0.9^7 * 0.1; Beta(2,8) pdf at 0.9 = 72 * 0.9 * 0.1^7
        let fc = 72.0 * 0.9f64.powi(7) * 0.1;
        let fi = 72.0 * 0.9 * 0.1f64.powi(7);
        assert_abs_diff_eq!(m.uncertainty(0.9), 1.0 - fc / (fc + fi), epsilon = 1e-12);
    }
}
