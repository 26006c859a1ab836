use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{check_dim, TrainView};
use crate::error::{Error, Result};
use crate::linalg::{mean_of, scatter, Precision};
use crate::types::LabeledSplit;

/// Class centroids with a shared (pooled) precision matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdModel {
    pub centroids: Vec<DVector<f64>>,
    pub precision: Precision,
    /// Pooled within-class covariance (denominator `n - C`).
    pub covariance: nalgebra::DMatrix<f64>,
}

pub fn fit_md(train: &LabeledSplit) -> Result<MdModel> {
    fit_view(&TrainView::from_split(train)?)
}

pub fn fit_md_from(points: &[&[f64]], labels: &[usize], n_classes: usize) -> Result<MdModel> {
    fit_view(&TrainView::new(points.to_vec(), labels.to_vec(), n_classes)?)
}

fn fit_view(view: &TrainView<'_>) -> Result<MdModel> {
    let classes = view.per_class(2)?;
    let d = view.dim;
    let mut pooled = nalgebra::DMatrix::zeros(d, d);
    let mut centroids = Vec::with_capacity(classes.len());
    for pts in &classes {
        let mu = mean_of(pts, d);
        pooled += scatter(pts, &mu);
        centroids.push(mu);
    }
    let dof = view.points.len() - classes.len();
    if dof == 0 {
        return Err(Error::InvalidParameter("pooled covariance needs n > C".into()));
    }
    let covariance = pooled / dof as f64;
    let precision = Precision::from_covariance(&covariance)?;
    Ok(MdModel { centroids, precision, covariance })
}

impl MdModel {
    pub fn dim(&self) -> usize {
        self.centroids[0].len()
    }

    /// Squared Mahalanobis distance to every centroid.
    pub fn distances(&self, e: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), e)?;
        Ok(self.centroids.iter().map(|mu| self.precision.quad_form(e, mu)).collect())
    }

    /// Squared Mahalanobis distance to the closest centroid.
    pub fn score(&self, e: &[f64]) -> Result<f64> {
        Ok(self.distances(e)?.into_iter().fold(f64::INFINITY, f64::min))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fixture() -> (Vec<Vec<f64>>, Vec<usize>) {
        let base = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (shift, label) in [(0.0, 0), (4.0, 1)] {
            for p in base {
                pts.push(vec![p[0] + shift, p[1]]);
                labels.push(label);
            }
        }
        (pts, labels)
    }

    fn fit(pts: &[Vec<f64>], labels: &[usize]) -> MdModel {
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        fit_md_from(&refs, labels, 2).unwrap()
    }

    #[test]
    fn centroids_and_precision() {
        let (pts, labels) = fixture();
        let m = fit(&pts, &labels);
        assert_abs_diff_eq!(m.centroids[0], DVector::from_vec(vec![0.0, 0.0]), epsilon = 1e-15);
        assert_abs_diff_eq!(m.centroids[1], DVector::from_vec(vec![4.0, 0.0]), epsilon = 1e-15);
        // scatter = diag(4, 4), n - C = 6 => cov = diag(2/3, 2/3), precision = diag(1.5, 1.5)
        let expected = nalgebra::DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 1.5]);
        assert_abs_diff_eq!(m.precision.matrix, expected, epsilon = 1e-9);
        assert_eq!(m.precision.ridge, 0.0);
    }

    #[test]
    fn scores_match_naive_quadratic_form() {
        let (pts, labels) = fixture();
        let m = fit(&pts, &labels);
        assert_eq!(m.score(&[0.0, 0.0]).unwrap(), 0.0);
        // (2,0) is 2 away from both centroids along x: 1.5 * 4 = 6
        let naive = |c: [f64; 2]| 1.5 * ((2.0 - c[0]).powi(2) + (0.0 - c[1]).powi(2));
        let d = m.distances(&[2.0, 0.0]).unwrap();
        assert_abs_diff_eq!(d[0], naive([0.0, 0.0]), epsilon = 1e-12);
        assert_abs_diff_eq!(d[1], naive([4.0, 0.0]), epsilon = 1e-12);
        assert_abs_diff_eq!(d[0], d[1], epsilon = 1e-12);
        assert_abs_diff_eq!(m.score(&[2.0, 0.0]).unwrap(), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn duplication_scales_only_the_denominator() {
        let (pts, labels) = fixture();
        let m = fit(&pts, &labels);
        let pts2: Vec<Vec<f64>> = pts.iter().chain(pts.iter()).cloned().collect();
        let labels2: Vec<usize> = labels.iter().chain(labels.iter()).copied().collect();
        let m2 = fit(&pts2, &labels2);
        assert_eq!(m.centroids, m2.centroids);
        // n - C: 6 vs 14, scatter doubles
        let rescaled = &m2.covariance * (14.0 / (2.0 * 6.0));
        assert_abs_diff_eq!(rescaled, m.covariance, epsilon = 1e-6);
    }

    #[test]
    fn missing_class_is_reported() {
        let (pts, mut labels) = fixture();
        labels.iter_mut().for_each(|l| *l = 0);
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let err = fit_md_from(&refs, &labels, 2).unwrap_err();
        assert!(matches!(err, Error::MissingClass(1)));
    }

    #[test]
    fn dimension_mismatch() {
        let (pts, labels) = fixture();
        let m = fit(&pts, &labels);
        assert!(matches!(m.score(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
