//! RBF kernel PCA.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{median_in_place, sq_dist};

const EIGEN_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelPca {
    support: Vec<f64>,
    dim: usize,
    gamma: f64,
    /// `m x k` projection coefficients, eigenvectors scaled by `1 / sqrt(lambda)`.
    alphas: DMatrix<f64>,
    col_means: DVector<f64>,
    total_mean: f64,
    eigenvalues: Vec<f64>,
}

/// `1 / median ||x_i - x_j||^2` over distinct pairs.
pub fn median_gamma(points: &[&[f64]]) -> f64 {
    let mut d2 = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            d2.push(sq_dist(a, b));
        }
    }
    if d2.is_empty() {
        return 1.0;
    }
    let med = median_in_place(&mut d2);
    if med > 0.0 {
        1.0 / med
    } else {
        1.0
    }
}

impl KernelPca {
    /// Fits on `support` keeping up to `components` leading components.
    /// With `strict`, fewer numerically positive eigenvalues than requested is
    /// an error; otherwise the count is truncated.
    pub fn fit(support: &[&[f64]], components: usize, gamma: f64, strict: bool) -> Result<Self> {
        let m = support.len();
        if m < 2 {
            return Err(Error::InvalidParameter("kernel PCA needs at least 2 points".into()));
        }
        let dim = support[0].len();
        let mut k = DMatrix::zeros(m, m);
        for i in 0..m {
            k[(i, i)] = 1.0;
            for j in 0..i {
                let v = (-gamma * sq_dist(support[i], support[j])).exp();
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        let col_means = DVector::from_iterator(m, k.column_iter().map(|c| c.mean()));
        let total_mean = col_means.mean();
        let mut centered = k;
        for i in 0..m {
            for j in 0..m {
                centered[(i, j)] += total_mean - col_means[i] - col_means[j];
            }
        }
        let eig = SymmetricEigen::new(centered);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let top = eig.eigenvalues[order[0]].max(0.0);
        let positive = order.iter().take_while(|&&i| eig.eigenvalues[i] > EIGEN_REL_TOL * top).count();
        if positive == 0 {
            return Err(Error::InfeasibleComponents { requested: components, feasible: 0 });
        }
        if strict && components > positive {
            return Err(Error::InfeasibleComponents { requested: components, feasible: positive });
        }
        let kept = components.min(positive);
        let mut alphas = DMatrix::zeros(m, kept);
        let mut eigenvalues = Vec::with_capacity(kept);
        for (col, &idx) in order.iter().take(kept).enumerate() {
            let lambda = eig.eigenvalues[idx];
            let mut v = eig.eigenvectors.column(idx).into_owned();
            // fix the sign so the largest-magnitude entry is positive
            let (imax, _) = v.iter().enumerate().fold((0, 0.0f64), |acc, (i, &x)| {
                if x.abs() > acc.1 { (i, x.abs()) } else { acc }
            });
            if v[imax] < 0.0 {
                v.neg_mut();
            }
            alphas.set_column(col, &(v / lambda.sqrt()));
            eigenvalues.push(lambda);
        }
        Ok(Self {
            support: support.iter().flat_map(|p| p.iter().copied()).collect(),
            dim,
            gamma,
            alphas,
            col_means,
            total_mean,
            eigenvalues,
        })
    }

    pub fn components(&self) -> usize {
        self.alphas.ncols()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn transform(&self, x: &[f64]) -> DVector<f64> {
        let m = self.col_means.len();
        let kx = DVector::from_iterator(m, self.support.chunks_exact(self.dim).map(|s| (-self.gamma * sq_dist(s, x)).exp()));
        let kx_mean = kx.mean();
        let centered = DVector::from_iterator(
            m,
            kx.iter().zip(self.col_means.iter()).map(|(v, c)| v - kx_mean - c + self.total_mean),
        );
        self.alphas.tr_mul(&centered)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ring(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| {
            let t = i as f64 / n as f64 * std::f64::consts::TAU;
            vec![t.cos() + 0.1 * (3.0 * t).sin(), t.sin()]
        }).collect()
    }

    #[test]
    fn training_projections_have_eigenvalue_variance() {
        let pts = ring(30);
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let kpca = KernelPca::fit(&refs, 4, median_gamma(&refs), true).unwrap();
        let zs: Vec<DVector<f64>> = refs.iter().map(|p| kpca.transform(p)).collect();
        for j in 0..4 {
            let mean: f64 = zs.iter().map(|z| z[j]).sum::<f64>() / 30.0;
            let ss: f64 = zs.iter().map(|z| z[j] * z[j]).sum();
            assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-9);
            // sum of squared training projections equals the eigenvalue of the centered Gram matrix
            assert_abs_diff_eq!(ss, kpca.eigenvalues()[j], epsilon = 1e-8 * kpca.eigenvalues()[0]);
        }
    }

    #[test]
    fn too_many_components_is_an_error_when_strict() {
        let pts = ring(5);
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let err = KernelPca::fit(&refs, 10, 1.0, true).unwrap_err();
        assert!(matches!(err, Error::InfeasibleComponents { .. }));
        assert!(KernelPca::fit(&refs, 10, 1.0, false).unwrap().components() <= 4);
    }
}
