//! Rank-based combinations of one aleatoric and one epistemic score.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rank::RankTable;
use crate::selective::{build_curve, Mode, Span, UnitOutcome};

pub const MIN_CALIBRATION: usize = 20;

const ALPHA_STEPS: usize = 20;
const DELTA_MIN_QUANTILES: [f64; 8] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 1.0];
const DELTA_MAX_QUANTILES: [f64; 6] = [0.0, 0.5, 0.7, 0.8, 0.9, 0.95];
const C_GRID: [u8; 3] = [1, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Huq,
    Huq2,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Huq => "HUQ",
            Variant::Huq2 => "HUQ2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Area under the risk curve, minimized.
    RcAuc,
    /// Area under the F1-micro curve, maximized.
    FrAuc,
}

impl Objective {
    fn mode(self) -> Mode {
        match self {
            Objective::RcAuc => Mode::Risk,
            Objective::FrAuc => Mode::F1Micro,
        }
    }

    /// Loss to minimize for a given area.
    fn loss(self, auc: f64) -> f64 {
        match self {
            Objective::RcAuc => auc,
            Objective::FrAuc => -auc,
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rc_auc" => Ok(Objective::RcAuc),
            "fr_auc" => Ok(Objective::FrAuc),
            other => Err(Error::InvalidParameter(format!("unknown objective {other:?}, expected rc_auc or fr_auc"))),
        }
    }
}

/// Fitted hyperparameters plus the frozen validation rank tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub variant: Variant,
    pub alpha: f64,
    /// Threshold on the epistemic score separating in- from out-of-distribution.
    #[serde(with = "crate::serde_float::scalar")]
    pub delta_min: f64,
    /// Threshold on the aleatoric score marking ambiguous in-distribution instances.
    #[serde(with = "crate::serde_float::scalar")]
    pub delta_max: f64,
    pub c: u8,
    /// Validation size.
    pub n: usize,
    pub ua_all: RankTable,
    /// Aleatoric scores of validation instances with `U_E <= delta_min`.
    pub ua_id: RankTable,
    pub ue_all: RankTable,
    /// Objective value of this configuration on validation, when fitted.
    pub objective: Option<f64>,
}

impl HybridConfig {
    pub fn new(
        variant: Variant,
        ua_val: &[f64],
        ue_val: &[f64],
        alpha: f64,
        delta_min: f64,
        delta_max: f64,
        c: u8,
    ) -> Result<Self> {
        if ua_val.len() != ue_val.len() {
            return Err(Error::LengthMismatch { what: "epistemic scores", expected: ua_val.len(), got: ue_val.len() });
        }
        if ua_val.is_empty() {
            return Err(Error::EmptyRankTable);
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("alpha {alpha} outside [0, 1]")));
        }
        if !C_GRID.contains(&c) {
            return Err(Error::InvalidParameter(format!("c must be 1, 2 or 3, got {c}")));
        }
        let id: Vec<f64> = ua_val.iter().zip(ue_val).filter(|(_, &e)| e <= delta_min).map(|(&a, _)| a).collect();
        Ok(Self {
            variant,
            alpha,
            delta_min,
            delta_max,
            c,
            n: ua_val.len(),
            ua_all: RankTable::new(ua_val.to_vec())?,
            ua_id: RankTable::new(id)?,
            ue_all: RankTable::new(ue_val.to_vec())?,
            objective: None,
        })
    }

    pub fn score(&self, ua: f64, ue: f64) -> Result<f64> {
        match self.variant {
            Variant::Huq => self.score_huq(ua, ue),
            Variant::Huq2 => self.score_huq2(ua, ue),
        }
    }

    /// Three-case rule. Case outputs are offset by multiples of `N + 2` so
    /// clean in-distribution < ambiguous < out-of-distribution.
    pub fn score_huq(&self, ua: f64, ue: f64) -> Result<f64> {
        let band = (self.n + 2) as f64;
        if ue > self.delta_min {
            let total = (1.0 - self.alpha) * self.ue_all.rank(ue)? as f64 + self.alpha * self.ua_all.rank(ua)? as f64;
            Ok(2.0 * band + total)
        } else if ua > self.delta_max {
            Ok(band + self.ua_all.rank(ua)? as f64)
        } else if self.ua_id.is_empty() {
            Err(Error::EmptyInDistribution)
        } else {
            Ok(self.ua_id.rank(ua)? as f64)
        }
    }

    /// `(1 - a) R(U_E)^2 l(U_A) + a R(U_A)^2 l(U_E)` with `l(u) = 1 - R(u) / (c N)`.
    pub fn score_huq2(&self, ua: f64, ue: f64) -> Result<f64> {
        let cn = self.c as f64 * self.n as f64;
        let ra = self.ua_all.rank(ua)? as f64;
        let re = self.ue_all.rank(ue)? as f64;
        let l_a = 1.0 - ra / cn;
        let l_e = 1.0 - re / cn;
        Ok((1.0 - self.alpha) * re * re * l_a + self.alpha * ra * ra * l_e)
    }

    pub fn score_all(&self, ua: &[f64], ue: &[f64]) -> Result<Vec<f64>> {
        if ua.len() != ue.len() {
            return Err(Error::LengthMismatch { what: "epistemic scores", expected: ua.len(), got: ue.len() });
        }
        ua.iter().zip(ue).map(|(&a, &e)| self.score(a, e)).collect()
    }
}

/// Nearest-rank order statistic: the `ceil(q n)`-th smallest value (the
/// minimum for `q = 0`).
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

pub fn alpha_grid() -> Vec<f64> {
    (0..=ALPHA_STEPS).map(|i| i as f64 / ALPHA_STEPS as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub alpha_idx: usize,
    pub delta_min_idx: usize,
    pub delta_max_idx: usize,
    pub c: u8,
    pub loss: f64,
}

impl GridPoint {
    fn key(&self) -> (usize, usize, usize, u8) {
        (self.alpha_idx, self.delta_min_idx, self.delta_max_idx, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub objective: Objective,
    pub span: Span,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { objective: Objective::RcAuc, span: Span::First50 }
    }
}

/// Every grid point evaluated for `variant`, in grid order.
pub fn evaluate_grid(
    ua: &[f64],
    ue: &[f64],
    outcomes: &[UnitOutcome],
    variant: Variant,
    opts: &FitOptions,
) -> Result<Vec<(GridPoint, HybridConfig)>> {
    if ua.len() != outcomes.len() || ue.len() != outcomes.len() {
        return Err(Error::LengthMismatch {
            what: "validation scores",
            expected: outcomes.len(),
            got: ua.len().min(ue.len()),
        });
    }
    if outcomes.len() < MIN_CALIBRATION {
        return Err(Error::InsufficientCalibration { got: outcomes.len(), need: MIN_CALIBRATION });
    }
    let mut ua_sorted = ua.to_vec();
    ua_sorted.sort_by(f64::total_cmp);
    let mut ue_sorted = ue.to_vec();
    ue_sorted.sort_by(f64::total_cmp);
    let alphas = alpha_grid();

    let mut keys = Vec::new();
    for ai in 0..alphas.len() {
        match variant {
            Variant::Huq => {
                for di in 0..DELTA_MIN_QUANTILES.len() {
                    for xi in 0..DELTA_MAX_QUANTILES.len() {
                        keys.push((ai, di, xi, 1u8));
                    }
                }
            }
            Variant::Huq2 => keys.extend(C_GRID.iter().map(|&c| (ai, 0, 0, c))),
        }
    }
    let mode = opts.objective.mode();
    keys.into_par_iter()
        .map(|(ai, di, xi, c)| {
            let (delta_min, delta_max) = match variant {
                Variant::Huq => (
                    nearest_rank(&ue_sorted, DELTA_MIN_QUANTILES[di]),
                    nearest_rank(&ua_sorted, DELTA_MAX_QUANTILES[xi]),
                ),
                Variant::Huq2 => (f64::INFINITY, f64::NEG_INFINITY),
            };
            let mut cfg = HybridConfig::new(variant, ua, ue, alphas[ai], delta_min, delta_max, c)?;
            let scores = cfg.score_all(ua, ue)?;
            let auc = build_curve(&scores, outcomes, mode)?.auc(opts.span);
            cfg.objective = Some(auc);
            let point = GridPoint { alpha_idx: ai, delta_min_idx: di, delta_max_idx: xi, c, loss: opts.objective.loss(auc) };
            Ok((point, cfg))
        })
        .collect()
}

/// Grid search on validation scores. Ties go to the smallest alpha, then the
/// smallest threshold quantiles, then the smallest `c`.
pub fn fit_hybrid(
    ua: &[f64],
    ue: &[f64],
    outcomes: &[UnitOutcome],
    variant: Variant,
    opts: &FitOptions,
) -> Result<HybridConfig> {
    evaluate_grid(ua, ue, outcomes, variant, opts)?
        .into_iter()
        .min_by(|(a, _), (b, _)| a.loss.total_cmp(&b.loss).then(a.key().cmp(&b.key())))
        .map(|(_, cfg)| cfg)
        .ok_or(Error::InsufficientCalibration { got: 0, need: MIN_CALIBRATION })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn huq_reduces_to_aleatoric() {
        let ua = [0.1, 0.4, 0.2, 0.3];
        let ue = [5.0, 1.0, 3.0, 2.0];
        let cfg = HybridConfig::new(Variant::Huq, &ua, &ue, 1.0, f64::INFINITY, f64::NEG_INFINITY, 1).unwrap();
        let s = cfg.score_all(&ua, &ue).unwrap();
        assert_eq!(crate::selective::rejection_order(&s), crate::selective::rejection_order(&ua));
    }

    #[test]
    fn huq_reduces_to_epistemic() {
        let ua = [0.1, 0.4, 0.2, 0.3];
        let ue = [5.0, 1.0, 3.0, 2.0];
        let cfg = HybridConfig::new(Variant::Huq, &ua, &ue, 0.0, f64::NEG_INFINITY, 0.0, 1).unwrap();
        let s = cfg.score_all(&ua, &ue).unwrap();
        assert_eq!(crate::selective::rejection_order(&s), crate::selective::rejection_order(&ue));
    }

    #[test]
    fn weight_vanishes_at_top_rank() {
        // N = 3, c = 1, u ranked 3 gives l = 1 - 3 / 3 = 0
        let cfg = HybridConfig::new(Variant::Huq2, &[0.1, 0.2, 0.3], &[1.0, 2.0, 3.0], 0.0, 0.0, 0.0, 1).unwrap();
        assert_eq!(cfg.ua_all.rank(0.3).unwrap(), 3);
        assert_abs_diff_eq!(cfg.score_huq2(0.3, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn invalid_c_rejected() {
        assert!(HybridConfig::new(Variant::Huq2, &[0.1], &[1.0], 0.5, 0.0, 0.0, 4).is_err());
    }

    #[test]
    fn nearest_rank_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(nearest_rank(&v, 0.0), 1.0);
        assert_eq!(nearest_rank(&v, 0.5), 3.0);
        assert_eq!(nearest_rank(&v, 0.99), 5.0);
        assert_eq!(nearest_rank(&v, 1.0), 5.0);
    }

    #[test]
    fn too_little_calibration() {
        let v = vec![0.1; 19];
        let o = vec![UnitOutcome::instance(true); 19];
        assert!(matches!(
            fit_hybrid(&v, &v, &o, Variant::Huq, &FitOptions::default()),
            Err(Error::InsufficientCalibration { got: 19, need: 20 })
        ));
    }
}
