use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{check_dim, TrainView};
use crate::error::Result;
use crate::linalg::{log_sum_exp, mean_of, scatter, Precision};
use crate::types::LabeledSplit;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGaussian {
    pub mean: DVector<f64>,
    pub covariance: nalgebra::DMatrix<f64>,
    pub precision: Precision,
}

impl ClassGaussian {
    pub fn log_density(&self, e: &[f64]) -> f64 {
        let d = self.mean.len() as f64;
        -0.5 * (d * LN_2PI + self.precision.log_det_cov + self.precision.quad_form(e, &self.mean))
    }
}

/// Gaussian mixture with one component per class, weighted by label frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DduModel {
    pub components: Vec<ClassGaussian>,
    pub priors: Vec<f64>,
}

pub fn fit_ddu(train: &LabeledSplit) -> Result<DduModel> {
    fit_view(&TrainView::from_split(train)?)
}

pub fn fit_ddu_from(points: &[&[f64]], labels: &[usize], n_classes: usize) -> Result<DduModel> {
    fit_view(&TrainView::new(points.to_vec(), labels.to_vec(), n_classes)?)
}

fn fit_view(view: &TrainView<'_>) -> Result<DduModel> {
    let classes = view.per_class(1)?;
    let n = view.points.len() as f64;
    let mut components = Vec::with_capacity(classes.len());
    let mut priors = Vec::with_capacity(classes.len());
    for pts in &classes {
        let mean = mean_of(pts, view.dim);
        let denom = (pts.len().max(2) - 1) as f64;
        let covariance = scatter(pts, &mean) / denom;
        let precision = Precision::from_covariance(&covariance)?;
        components.push(ClassGaussian { mean, covariance, precision });
        priors.push(pts.len() as f64 / n);
    }
    Ok(DduModel { components, priors })
}

impl DduModel {
    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    /// `log sum_c N(e; mu_c, Sigma_c) p(c)`, via log-sum-exp.
    pub fn log_density(&self, e: &[f64]) -> Result<f64> {
        check_dim(self.dim(), e)?;
        let terms: Vec<f64> =
            self.components.iter().zip(&self.priors).map(|(g, p)| g.log_density(e) + p.ln()).collect();
        Ok(log_sum_exp(terms.iter().copied()))
    }

    /// Negative log-density of the mixture.
    pub fn score(&self, e: &[f64]) -> Result<f64> {
        Ok(-self.log_density(e)?)
    }
}
