//! Epistemic scorers fit on training embeddings.
//!
//! Every model here is fit on the training split only and is immutable
//! afterwards. Scores follow the crate convention (higher = more uncertain),
//! so the Gaussian-mixture density is emitted as a negative log-density.

mod ddu;
pub mod kpca;
pub mod mcd;
mod md;
mod nuq;
mod rde;

pub use ddu::{fit_ddu, fit_ddu_from, DduModel};
pub use md::{fit_md, fit_md_from, MdModel};
pub use nuq::{auto_bandwidth, fit_nuq, fit_nuq_from, Bandwidth, NuqModel, NuqScore, DENSITY_FLOOR};
pub use rde::{fit_rde, fit_rde_from, RdeModel, RdeOptions};

use crate::error::{Error, Result};
use crate::types::LabeledSplit;

/// Flat view of a training split for the density fitters.
pub(crate) struct TrainView<'a> {
    pub points: Vec<&'a [f64]>,
    pub groups: Vec<usize>,
    pub n_groups: usize,
    pub dim: usize,
}

impl<'a> TrainView<'a> {
    pub fn from_split(split: &'a LabeledSplit) -> Result<Self> {
        let points = split.embeddings()?;
        let (groups, n_groups) = split.density_groups();
        Self::new(points, groups, n_groups)
    }

    pub fn new(points: Vec<&'a [f64]>, groups: Vec<usize>, n_groups: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::MissingEmbeddings);
        }
        if points.len() != groups.len() {
            return Err(Error::LengthMismatch { what: "labels", expected: points.len(), got: groups.len() });
        }
        let dim = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
        }
        if let Some(&g) = groups.iter().find(|&&g| g >= n_groups) {
            return Err(Error::IndexOutOfRange { index: g, len: n_groups });
        }
        Ok(Self { points, groups, n_groups, dim })
    }

    pub fn class_points(&self, class: usize) -> Vec<&'a [f64]> {
        self.points.iter().zip(&self.groups).filter(|(_, &g)| g == class).map(|(p, _)| *p).collect()
    }

    /// Points of every class, failing on an empty class or one below `min`.
    pub fn per_class(&self, min: usize) -> Result<Vec<Vec<&'a [f64]>>> {
        (0..self.n_groups)
            .map(|c| {
                let pts = self.class_points(c);
                match pts.len() {
                    0 => Err(Error::MissingClass(c)),
                    n if n < min => Err(Error::ClassTooSmall { class: c, got: n, need: min }),
                    _ => Ok(pts),
                }
            })
            .collect()
    }
}

pub(crate) fn check_dim(expected: usize, e: &[f64]) -> Result<()> {
    if e.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: e.len() });
    }
    Ok(())
}
