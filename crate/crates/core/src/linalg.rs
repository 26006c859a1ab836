use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative ridge strength: `lambda = RIDGE_SCALE * trace(cov) / d`.
pub const RIDGE_SCALE: f64 = 1e-6;
/// Reciprocal condition number below which a covariance counts as singular.
const MIN_RCOND: f64 = 1e-12;
const MAX_RIDGE_ESCALATIONS: usize = 12;

pub(crate) fn mean_of(points: &[&[f64]], dim: usize) -> DVector<f64> {
    let mut m = DVector::zeros(dim);
    for p in points {
        for (acc, v) in m.iter_mut().zip(p.iter()) {
            *acc += v;
        }
    }
    m / points.len() as f64
}

/// Sum of outer products of `p - center`.
pub(crate) fn scatter(points: &[&[f64]], center: &DVector<f64>) -> DMatrix<f64> {
    let d = center.len();
    let mut s = DMatrix::zeros(d, d);
    let mut diff = DVector::zeros(d);
    for p in points {
        for i in 0..d {
            diff[i] = p[i] - center[i];
        }
        s.syger(1.0, &diff, &diff, 1.0);
    }
    s.fill_upper_triangle_with_lower_triangle();
    s
}

/// Inverse covariance with its log-determinant, ridge-regularized only when
/// the covariance is numerically singular.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Precision {
    pub matrix: DMatrix<f64>,
    /// `log det` of the (possibly regularized) covariance.
    pub log_det_cov: f64,
    /// Ridge added to the diagonal; zero when none was needed.
    pub ridge: f64,
}

impl Precision {
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self> {
        let d = cov.nrows();
        if let Some(p) = try_invert(cov, 0.0) {
            return Ok(p);
        }
        let trace = cov.trace();
        let mut ridge = if trace > 0.0 && trace.is_finite() { RIDGE_SCALE * trace / d as f64 } else { RIDGE_SCALE };
        for _ in 0..MAX_RIDGE_ESCALATIONS {
            if let Some(p) = try_invert(cov, ridge) {
                return Ok(p);
            }
            ridge *= 10.0;
        }
        Err(Error::NotPositiveDefinite)
    }

    pub fn is_regularized(&self) -> bool {
        self.ridge > 0.0
    }

    /// `(x - mu)^T P (x - mu)`.
    pub fn quad_form(&self, x: &[f64], mu: &DVector<f64>) -> f64 {
        let diff = DVector::from_iterator(mu.len(), x.iter().zip(mu.iter()).map(|(a, b)| a - b));
        quad(&self.matrix, &diff)
    }
}

pub(crate) fn quad(p: &DMatrix<f64>, diff: &DVector<f64>) -> f64 {
    diff.dot(&(p * diff)).max(0.0)
}

fn try_invert(cov: &DMatrix<f64>, ridge: f64) -> Option<Precision> {
    let d = cov.nrows();
    let mut a = cov.clone();
    if ridge > 0.0 {
        for i in 0..d {
            a[(i, i)] += ridge;
        }
    }
    if a.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = a.cholesky()?;
    let l = chol.l_dirty();
    let diag: Vec<f64> = (0..d).map(|i| l[(i, i)]).collect();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo > 0.0) || (lo / hi).powi(2) < MIN_RCOND {
        return None;
    }
    let log_det_cov = 2.0 * diag.iter().map(|v| v.ln()).sum::<f64>();
    let mut matrix = chol.inverse();
    matrix = (&matrix + matrix.transpose()) * 0.5;
    Some(Precision { matrix, log_det_cov, ridge })
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median of a scratch buffer (mean of the two middle values for even length).
pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, &mut upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}
