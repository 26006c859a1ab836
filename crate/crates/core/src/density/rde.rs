use nalgebra::DVector;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::kpca::{median_gamma, KernelPca};
use super::mcd::{fast_mcd, reweight, McdOptions};
use super::{check_dim, TrainView};
use crate::error::{Error, Result};
use crate::linalg::{quad, Precision};
use crate::rng::derive_rng;
use crate::types::LabeledSplit;

pub const DEFAULT_COMPONENT_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdeOptions {
    /// Kernel-PCA component count; `None` picks `min(64, n - 2)` capped by
    /// the smallest class and the numerical rank.
    pub components: Option<usize>,
    pub mcd: McdOptions,
    /// Kernel PCA is fit on at most this many training points.
    pub max_support: usize,
    pub seed: u64,
}

impl Default for RdeOptions {
    fn default() -> Self {
        Self { components: None, mcd: McdOptions::default(), max_support: 400, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustClass {
    pub location: DVector<f64>,
    pub precision: Precision,
    pub support_size: usize,
}

/// Global RBF kernel-PCA projection with per-class MCD estimates in the
/// projected space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdeModel {
    pub projection: KernelPca,
    pub classes: Vec<RobustClass>,
}

pub fn fit_rde(train: &LabeledSplit, opts: &RdeOptions) -> Result<RdeModel> {
    fit_view(&TrainView::from_split(train)?, opts)
}

pub fn fit_rde_from(points: &[&[f64]], labels: &[usize], n_classes: usize, opts: &RdeOptions) -> Result<RdeModel> {
    fit_view(&TrainView::new(points.to_vec(), labels.to_vec(), n_classes)?, opts)
}

fn fit_view(view: &TrainView<'_>, opts: &RdeOptions) -> Result<RdeModel> {
    // Canonical record order makes the fit independent of input ordering.
    let mut order: Vec<usize> = (0..view.points.len()).collect();
    order.sort_by(|&a, &b| {
        view.points[a]
            .iter()
            .zip(view.points[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(view.groups[a].cmp(&view.groups[b]))
    });
    let points: Vec<&[f64]> = order.iter().map(|&i| view.points[i]).collect();
    let groups: Vec<usize> = order.iter().map(|&i| view.groups[i]).collect();
    let canonical = TrainView::new(points, groups, view.n_groups)?;
    let per_class = canonical.per_class(3)?;
    let n = canonical.points.len();
    let min_class = per_class.iter().map(Vec::len).min().unwrap_or(0);

    let support: Vec<&[f64]> = if n > opts.max_support {
        let mut rng = derive_rng(opts.seed, 0x5244_4500);
        let mut idx = sample(&mut rng, n, opts.max_support).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| canonical.points[i]).collect()
    } else {
        canonical.points.clone()
    };
    let feasible = (min_class - 2).min(support.len() - 1);
    let (components, strict) = match opts.components {
        Some(k) if k == 0 || k > feasible => {
            return Err(Error::InfeasibleComponents { requested: k, feasible })
        }
        Some(k) => (k, true),
        None => (DEFAULT_COMPONENT_CAP.min(n.saturating_sub(2)).min(feasible), false),
    };
    let projection = KernelPca::fit(&support, components, median_gamma(&support), strict)?;

    let mut classes = Vec::with_capacity(per_class.len());
    for (c, pts) in per_class.iter().enumerate() {
        let projected: Vec<Vec<f64>> = pts.iter().map(|p| projection.transform(p).as_slice().to_vec()).collect();
        let refs: Vec<&[f64]> = projected.iter().map(Vec::as_slice).collect();
        let mut rng = derive_rng(opts.seed, c as u64 + 1);
        let est = reweight(&refs, fast_mcd(&refs, &opts.mcd, &mut rng)?)?;
        classes.push(RobustClass { location: est.location, precision: est.precision, support_size: est.support.len() });
    }
    Ok(RdeModel { projection, classes })
}

impl RdeModel {
    pub fn project(&self, e: &[f64]) -> Result<DVector<f64>> {
        check_dim(self.projection.dim(), e)?;
        Ok(self.projection.transform(e))
    }

    /// Minimum squared Mahalanobis distance of a projected point.
    pub fn score_projected(&self, z: &DVector<f64>) -> Result<f64> {
        check_dim(self.projection.components(), z.as_slice())?;
        Ok(self
            .classes
            .iter()
            .map(|c| quad(&c.precision.matrix, &(z - &c.location)))
            .fold(f64::INFINITY, f64::min))
    }

    pub fn score(&self, e: &[f64]) -> Result<f64> {
        self.score_projected(&self.project(e)?)
    }

    pub fn is_regularized(&self) -> bool {
        self.classes.iter().any(|c| c.precision.is_regularized())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn blobs(seed: u64, per_class: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = crate::rng::seeded_rng(seed);
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in [[0.0, 0.0, 0.0], [4.0, 0.0, 0.0]].iter().enumerate() {
            for _ in 0..per_class {
                pts.push(center.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)).collect());
                labels.push(c);
            }
        }
        (pts, labels)
    }

    fn fit(pts: &[Vec<f64>], labels: &[usize], opts: &RdeOptions) -> RdeModel {
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        fit_rde_from(&refs, labels, 2, opts).unwrap()
    }

    #[test]
    fn location_scores_zero() {
        let (pts, labels) = blobs(1, 40);
        let m = fit(&pts, &labels, &RdeOptions { components: Some(5), ..Default::default() });
        for c in &m.classes {
            assert!(m.score_projected(&c.location).unwrap() < 1e-6);
        }
    }

    #[test]
    fn far_point_exceeds_train_quantile() {
        let (pts, labels) = blobs(2, 60);
        let m = fit(&pts, &labels, &RdeOptions::default());
        let mut train: Vec<f64> = pts.iter().map(|p| m.score(p).unwrap()).collect();
        train.sort_by(f64::total_cmp);
        let q99 = train[(0.99 * train.len() as f64).ceil() as usize - 1];
        assert!(m.score(&[2.0, 12.0, -9.0]).unwrap() > q99);
    }

    #[test]
    fn invariant_to_record_order() {
        let (pts, labels) = blobs(3, 30);
        let opts = RdeOptions { components: Some(4), seed: 9, ..Default::default() };
        let a = fit(&pts, &labels, &opts);
        let mut idx: Vec<usize> = (0..pts.len()).rev().collect();
        idx.rotate_left(7);
        let pts2: Vec<Vec<f64>> = idx.iter().map(|&i| pts[i].clone()).collect();
        let labels2: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        let b = fit(&pts2, &labels2, &opts);
        for p in pts.iter().take(10) {
            assert_eq!(a.score(p).unwrap(), b.score(p).unwrap());
        }
    }

    #[test]
    fn infeasible_component_count() {
        let (pts, labels) = blobs(4, 10);
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let err = fit_rde_from(&refs, &labels, 2, &RdeOptions { components: Some(9), ..Default::default() });
        assert!(matches!(err, Err(Error::InfeasibleComponents { requested: 9, feasible: 8 })));
    }
}
