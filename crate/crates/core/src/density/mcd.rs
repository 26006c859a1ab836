//! Minimum Covariance Determinant via random elemental starts and
//! concentration steps (the FAST-MCD scheme).
//!
//! Covariances here use the maximum-likelihood denominator `h`; only relative
//! determinants matter for the subset search.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::linalg::{mean_of, median_in_place, scatter, Precision};
use crate::rng::DetRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McdOptions {
    /// Fraction of points kept in the support subset.
    pub fraction: f64,
    /// Random elemental starts.
    pub n_starts: usize,
    /// Starts carried from the two-step screening to full convergence.
    pub n_best: usize,
    pub max_iter: usize,
    /// Convergence threshold on the change in log-determinant.
    pub tol: f64,
}

impl Default for McdOptions {
    fn default() -> Self {
        Self { fraction: 0.75, n_starts: 30, n_best: 8, max_iter: 100, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McdEstimate {
    pub location: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub precision: Precision,
    /// Sorted indices of the support subset.
    pub support: Vec<usize>,
    /// `log det` of the support covariance (ridge included when one was needed).
    pub log_det: f64,
}

impl McdEstimate {
    pub fn is_regularized(&self) -> bool {
        self.precision.is_regularized()
    }
}

/// Support size `h`: `ceil(fraction * n)`, never below `ceil((n + k + 1) / 2)`
/// and never above `n`.
pub fn support_size(n: usize, dim: usize, fraction: f64) -> usize {
    let by_fraction = (fraction * n as f64).ceil() as usize;
    let breakdown = (n + dim + 1).div_ceil(2);
    by_fraction.max(breakdown).min(n)
}

fn fit_subset(points: &[&[f64]], subset: &[usize], dim: usize) -> Result<McdEstimate> {
    let pts: Vec<&[f64]> = subset.iter().map(|&i| points[i]).collect();
    let location = mean_of(&pts, dim);
    let covariance = scatter(&pts, &location) / pts.len() as f64;
    let precision = Precision::from_covariance(&covariance)?;
    let mut support = subset.to_vec();
    support.sort_unstable();
    Ok(McdEstimate { log_det: precision.log_det_cov, location, covariance, precision, support })
}

/// The `h` points with smallest Mahalanobis distance under `est`; ties go to
/// the lower index.
fn concentrate(points: &[&[f64]], est: &McdEstimate, h: usize) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> =
        points.iter().enumerate().map(|(i, p)| (est.precision.quad_form(p, &est.location), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.truncate(h);
    order.into_iter().map(|(_, i)| i).collect()
}

fn c_steps(points: &[&[f64]], mut est: McdEstimate, h: usize, steps: usize, tol: f64) -> Result<McdEstimate> {
    let dim = est.location.len();
    for _ in 0..steps {
        let next = fit_subset(points, &concentrate(points, &est, h), dim)?;
        let done = next.support == est.support || (est.log_det - next.log_det).abs() < tol;
        let improved = next.log_det <= est.log_det;
        if improved {
            est = next;
        }
        if done || !improved {
            break;
        }
    }
    Ok(est)
}

pub fn fast_mcd(points: &[&[f64]], opts: &McdOptions, rng: &mut DetRng) -> Result<McdEstimate> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("MCD needs at least 2 points, got {n}")));
    }
    let dim = points[0].len();
    if !(opts.fraction > 0.0 && opts.fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("MCD fraction {} outside (0, 1]", opts.fraction)));
    }
    let h = support_size(n, dim, opts.fraction);
    let all: Vec<usize> = (0..n).collect();
    if h == n {
        return fit_subset(points, &all, dim);
    }
    let start_size = (dim + 1).min(n);
    let mut candidates = Vec::with_capacity(opts.n_starts);
    for _ in 0..opts.n_starts.max(1) {
        let subset = sample(rng, n, start_size).into_vec();
        let start = fit_subset(points, &subset, dim)?;
        let first = fit_subset(points, &concentrate(points, &start, h), dim)?;
        candidates.push(c_steps(points, first, h, 2, opts.tol)?);
    }
    candidates.sort_by(|a, b| a.log_det.total_cmp(&b.log_det).then_with(|| a.support.cmp(&b.support)));
    candidates.dedup_by(|a, b| a.support == b.support);
    candidates.truncate(opts.n_best.max(1));
    let mut best: Option<McdEstimate> = None;
    for cand in candidates {
        let done = c_steps(points, cand, h, opts.max_iter, opts.tol)?;
        if best.as_ref().is_none_or(|b| done.log_det < b.log_det) {
            best = Some(done);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Wilson-Hilferty approximation of the chi-square quantile with `k` degrees
/// of freedom at standard-normal quantile `z`.
fn chi2_quantile(k: usize, z: f64) -> f64 {
    let k = k as f64;
    let a = 2.0 / (9.0 * k);
    k * (1.0 - a + z * a.sqrt()).powi(3)
}

const Z_975: f64 = 1.959_963_984_540_054;

fn rescale(est: McdEstimate, factor: f64) -> Result<McdEstimate> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Ok(est);
    }
    let covariance = est.covariance * factor;
    let precision = Precision::from_covariance(&covariance)?;
    Ok(McdEstimate { log_det: precision.log_det_cov, covariance, precision, ..est })
}

fn consistency_factor(points: &[&[f64]], est: &McdEstimate) -> f64 {
    let mut d2: Vec<f64> = points.iter().map(|p| est.precision.quad_form(p, &est.location)).collect();
    median_in_place(&mut d2) / chi2_quantile(est.location.len(), 0.0)
}

/// Consistency-corrected and reweighted estimate: the raw covariance is
/// rescaled so the median distance matches the chi-square median, points
/// beyond the 97.5% chi-square quantile are dropped, and the remainder is
/// refit and rescaled the same way.
pub fn reweight(points: &[&[f64]], raw: McdEstimate) -> Result<McdEstimate> {
    let dim = raw.location.len();
    let factor = consistency_factor(points, &raw);
    let corrected = rescale(raw, factor)?;
    let cutoff = chi2_quantile(dim, Z_975);
    let kept: Vec<usize> = (0..points.len())
        .filter(|&i| corrected.precision.quad_form(points[i], &corrected.location) <= cutoff)
        .collect();
    if kept.len() <= dim {
        return Ok(corrected);
    }
    let refit = fit_subset(points, &kept, dim)?;
    let factor = consistency_factor(points, &refit);
    rescale(McdEstimate { support: corrected.support, ..refit }, factor)
}
