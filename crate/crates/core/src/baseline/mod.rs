//! Output-distribution baselines: softmax response, label-wise maximum
//! probability, top-two margin, entropy and the Bayes-Beta posterior.

mod beta;

pub use beta::{fit_beta, fit_beta_from, fit_beta_mle, score_beta, BetaFit, BetaModel, BetaShape};

use crate::error::{Error, Result};
use crate::types::{ClassProbability, Task};

/// Probabilities are clamped to `[CLAMP_EPS, 1 - CLAMP_EPS]` before any log
/// or density evaluation in the Beta model.
pub const CLAMP_EPS: f64 = 1e-6;

fn require_multiclass(p: &ClassProbability) -> Result<()> {
    match p.task() {
        Task::Multiclass => Ok(()),
        Task::Multilabel => Err(Error::WrongTask { expected: "multiclass", got: "multilabel" }),
    }
}

/// `1 - max_c p_c`.
pub fn score_sr(p: &ClassProbability) -> Result<f64> {
    require_multiclass(p)?;
    Ok(1.0 - p.max_prob())
}

/// `1 - max(p_i, 1 - p_i)` for one label of a sigmoid output vector.
pub fn score_mp_labelwise(p: &ClassProbability, label: usize) -> Result<f64> {
    let probs = p.as_slice();
    let pi = *probs.get(label).ok_or(Error::IndexOutOfRange { index: label, len: probs.len() })?;
    Ok(mp_uncertainty(pi))
}

pub(crate) fn mp_uncertainty(pi: f64) -> f64 {
    1.0 - pi.max(1.0 - pi)
}

/// One minus the gap between the two largest probabilities.
pub fn score_delta(p: &ClassProbability) -> Result<f64> {
    require_multiclass(p)?;
    let probs = p.as_slice();
    if probs.len() < 2 {
        return Err(Error::TooFewClasses { min: 2, got: probs.len() });
    }
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in probs {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    Ok(1.0 - (first - second))
}

/// Shannon entropy in nats with `0 log 0 = 0`.
pub fn score_entropy(p: &ClassProbability) -> Result<f64> {
    require_multiclass(p)?;
    Ok(entropy(p.as_slice()))
}

pub(crate) fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn mc(v: &[f64]) -> ClassProbability {
        ClassProbability::multiclass(v.to_vec()).unwrap()
    }

    #[test]
    fn sr_examples() {
        assert_eq!(score_sr(&mc(&[1.0, 0.0, 0.0])).unwrap(), 0.0);
        assert_abs_diff_eq!(score_sr(&mc(&[0.25; 4])).unwrap(), 0.75);
        assert_abs_diff_eq!(score_sr(&mc(&[0.7, 0.3])).unwrap(), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn sr_rejects_multilabel() {
        let p = ClassProbability::multilabel(vec![0.9, 0.9]).unwrap();
        assert!(score_sr(&p).is_err());
    }

    #[test]
    fn mp_examples() {
        let p = ClassProbability::multilabel(vec![0.5, 1.0, 0.2]).unwrap();
        assert_eq!(score_mp_labelwise(&p, 0).unwrap(), 0.5);
        assert_eq!(score_mp_labelwise(&p, 1).unwrap(), 0.0);
        assert_abs_diff_eq!(score_mp_labelwise(&p, 2).unwrap(), 0.2, epsilon = 1e-15);
        assert!(matches!(score_mp_labelwise(&p, 3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn delta_examples() {
        assert_eq!(score_delta(&mc(&[0.5, 0.5])).unwrap(), 1.0);
        assert_eq!(score_delta(&mc(&[1.0, 0.0])).unwrap(), 0.0);
        assert_abs_diff_eq!(score_delta(&mc(&[0.5, 0.3, 0.2])).unwrap(), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(score_entropy(&mc(&[0.0, 1.0, 0.0])).unwrap(), 0.0);
        assert_abs_diff_eq!(score_entropy(&mc(&[0.5, 0.5])).unwrap(), 2f64.ln(), epsilon = 1e-15);
        // -0.7 ln 0.7 - 0.3 ln 0.3
        assert_abs_diff_eq!(score_entropy(&mc(&[0.7, 0.3])).unwrap(), 0.6108643020548935, epsilon = 1e-12);
    }

    fn simplex(c: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, c).prop_filter_map("zero mass", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-9).then(|| w.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn entropy_bounded_by_log_c(p in (2usize..8).prop_flat_map(simplex)) {
            let h = entropy(&p);
            prop_assert!(h <= (p.len() as f64).ln() + 1e-9);
            prop_assert!(h >= 0.0);
        }

        #[test]
        fn binary_scores_are_increasing_in_sr(a in 0.5f64..=1.0, b in 0.5f64..=1.0) {
            let (pa, pb) = (mc(&[a, 1.0 - a]), mc(&[b, 1.0 - b]));
            let sr = (score_sr(&pa).unwrap(), score_sr(&pb).unwrap());
            let de = (score_delta(&pa).unwrap(), score_delta(&pb).unwrap());
            let en = (score_entropy(&pa).unwrap(), score_entropy(&pb).unwrap());
            if sr.0 < sr.1 {
                prop_assert!(de.0 < de.1);
                prop_assert!(en.0 <= en.1);
            }
        }
    }

    #[test]
    fn entropy_max_only_at_uniform() {
        let c = 5usize;
        assert_abs_diff_eq!(entropy(&[0.2; 5]), (c as f64).ln(), epsilon = 1e-9);
        assert!(entropy(&[0.3, 0.2, 0.2, 0.2, 0.1]) < (c as f64).ln() - 1e-9);
    }
}
