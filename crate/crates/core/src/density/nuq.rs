use serde::{Deserialize, Serialize};

use super::{check_dim, TrainView};
use crate::error::{Error, Result};
use crate::linalg::{median_in_place, sq_dist};
use crate::types::LabeledSplit;

/// Kernel density values below this are reported as underflow.
pub const DENSITY_FLOOR: f64 = 1e-300;
/// Above this many points the automatic bandwidth uses an evenly strided subsample.
const AUTO_BANDWIDTH_MAX_POINTS: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

/// Nadaraya-Watson estimator over stored training embeddings with a
/// Gaussian kernel of width `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuqModel {
    points: Vec<f64>,
    labels: Vec<usize>,
    n_classes: usize,
    dim: usize,
    bandwidth: f64,
    kernel_const: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuqScore {
    pub value: f64,
    /// Set when the kernel density fell below [`DENSITY_FLOOR`]; `value` is then `+inf`.
    pub underflow: bool,
}

/// Median pairwise Euclidean distance divided by `sqrt(2)`.
pub fn auto_bandwidth(points: &[&[f64]]) -> f64 {
    let stride = points.len().div_ceil(AUTO_BANDWIDTH_MAX_POINTS).max(1);
    let sample: Vec<&[f64]> = points.iter().step_by(stride).copied().collect();
    let mut dists = Vec::with_capacity(sample.len() * sample.len().saturating_sub(1) / 2);
    for (i, a) in sample.iter().enumerate() {
        for b in &sample[i + 1..] {
            dists.push(sq_dist(a, b).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    let med = median_in_place(&mut dists);
    if med > 0.0 {
        med / std::f64::consts::SQRT_2
    } else {
        1.0
    }
}

pub fn fit_nuq(train: &LabeledSplit, bandwidth: Bandwidth) -> Result<NuqModel> {
    fit_view(&TrainView::from_split(train)?, bandwidth)
}

pub fn fit_nuq_from(points: &[&[f64]], labels: &[usize], n_classes: usize, bandwidth: Bandwidth) -> Result<NuqModel> {
    fit_view(&TrainView::new(points.to_vec(), labels.to_vec(), n_classes)?, bandwidth)
}

fn fit_view(view: &TrainView<'_>, bandwidth: Bandwidth) -> Result<NuqModel> {
    let h = match bandwidth {
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
        Bandwidth::Fixed(h) => return Err(Error::InvalidBandwidth(h)),
        Bandwidth::Auto => auto_bandwidth(&view.points),
    };
    Ok(NuqModel {
        points: view.points.iter().flat_map(|p| p.iter().copied()).collect(),
        labels: view.groups.clone(),
        n_classes: view.n_groups,
        dim: view.dim,
        bandwidth: h,
        kernel_const: kernel_constant(h, view.dim),
    })
}

/// `h^d / (2 sqrt(pi))`.
pub(crate) fn kernel_constant(h: f64, d: usize) -> f64 {
    h.powi(d as i32) / (2.0 * std::f64::consts::PI.sqrt())
}

impl NuqModel {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel_const(&self) -> f64 {
        self.kernel_const
    }

    pub fn train_size(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn with_bandwidth(&self, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidBandwidth(h));
        }
        Ok(Self { bandwidth: h, kernel_const: kernel_constant(h, self.dim), ..self.clone() })
    }

    /// Log kernel density and the per-class kernel mass, scaled by a common
    /// factor.
    fn kernel_mass(&self, e: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.dim, e)?;
        let inv = 1.0 / (2.0 * self.bandwidth * self.bandwidth);
        let logits: Vec<f64> = self.points.chunks_exact(self.dim).map(|x| -sq_dist(x, e) * inv).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut class_mass = vec![0.0; self.n_classes];
        for (l, &y) in logits.iter().zip(&self.labels) {
            class_mass[y] += (l - max).exp();
        }
        let total: f64 = class_mass.iter().sum();
        let n = self.labels.len() as f64;
        let d = self.dim as f64;
        let log_density = max + total.ln()
            - n.ln()
            - d * self.bandwidth.ln()
            - 0.5 * d * (2.0 * std::f64::consts::PI).ln();
        Ok((log_density, class_mass))
    }

    /// Log kernel density and Nadaraya-Watson class probabilities at `e`.
    pub fn estimate(&self, e: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (log_density, mass) = self.kernel_mass(e)?;
        let total: f64 = mass.iter().sum();
        Ok((log_density, mass.into_iter().map(|m| m / total).collect()))
    }

    /// `2 sqrt(2/pi) tau` with `tau^2 = C / |D| * max_c sigma_c^2 / p(e)`.
    pub fn score(&self, e: &[f64]) -> Result<NuqScore> {
        let (log_density, mass) = self.kernel_mass(e)?;
        let max_var = max_label_variance(&mass);
        if log_density < DENSITY_FLOOR.ln() {
            return Ok(NuqScore { value: f64::INFINITY, underflow: true });
        }
        if max_var == 0.0 {
            return Ok(NuqScore { value: 0.0, underflow: false });
        }
        let log_tau2 = self.kernel_const.ln() - (self.labels.len() as f64).ln() + max_var.ln() - log_density;
        Ok(NuqScore { value: 2.0 * (2.0 / std::f64::consts::PI).sqrt() * (0.5 * log_tau2).exp(), underflow: false })
    }

    /// `tau^2` alone; exposed for checks on the `|D|` dependence.
    pub fn tau_squared(&self, e: &[f64]) -> Result<f64> {
        let (log_density, mass) = self.kernel_mass(e)?;
        Ok(self.kernel_const / self.labels.len() as f64 * max_label_variance(&mass) / log_density.exp())
    }
}

/// `max_c p_c (1 - p_c)`, with `1 - p_c` taken from the other classes' mass
/// so a dominant class does not cancel.
fn max_label_variance(mass: &[f64]) -> f64 {
    let total: f64 = mass.iter().sum();
    (0..mass.len())
        .map(|c| {
            let rest: f64 = mass.iter().enumerate().filter(|&(k, _)| k != c).map(|(_, m)| m).sum();
            (mass[c] / total) * (rest / total)
        })
        .fold(0.0, f64::max)
}
