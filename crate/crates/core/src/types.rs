//! Domain types shared by every scorer.
//!
//! All uncertainty scores in this crate are plain `f64` values with a single
//! ordering convention: higher means more uncertain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Multiclass,
    Multilabel,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Multiclass => "multiclass",
            Task::Multilabel => "multilabel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Validation,
    Test,
}

impl SplitRole {
    pub fn name(self) -> &'static str {
        match self {
            SplitRole::Train => "train",
            SplitRole::Validation => "validation",
            SplitRole::Test => "test",
        }
    }
}

/// Class-probability vector: a softmax output (multiclass) or independent
/// per-label sigmoid outputs (multilabel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProbability {
    probs: Vec<f64>,
    task: Task,
}

impl ClassProbability {
    pub fn new(probs: Vec<f64>, task: Task) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::TooFewClasses { min: 2, got: probs.len() });
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidProbability { index, value });
            }
        }
        if task == Task::Multiclass {
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::NotNormalized { sum });
            }
        }
        Ok(Self { probs, task })
    }

    pub fn multiclass(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs, Task::Multiclass)
    }

    pub fn multilabel(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs, Task::Multilabel)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index and value of the largest entry; first index wins on ties.
    pub fn argmax(&self) -> (usize, f64) {
        argmax(&self.probs)
    }

    pub fn max_prob(&self) -> f64 {
        self.argmax().1
    }
}

pub(crate) fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// `T x C` matrix of class probabilities from `T` stochastic forward passes,
/// stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSamples {
    passes: usize,
    classes: usize,
    data: Vec<f64>,
}

impl McSamples {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let passes = rows.len();
        if passes == 0 {
            return Err(Error::InvalidParameter("MC tensor needs at least one pass".into()));
        }
        let classes = rows[0].len();
        let mut data = Vec::with_capacity(passes * classes);
        for (row, values) in rows.iter().enumerate() {
            if values.len() != classes {
                return Err(Error::Ragged { row, expected: classes, got: values.len() });
            }
            data.extend_from_slice(values);
        }
        Self::from_flat(passes, classes, data)
    }

    pub fn from_flat(passes: usize, classes: usize, data: Vec<f64>) -> Result<Self> {
        if passes == 0 {
            return Err(Error::InvalidParameter("MC tensor needs at least one pass".into()));
        }
        if classes < 2 {
            return Err(Error::TooFewClasses { min: 2, got: classes });
        }
        if data.len() != passes * classes {
            return Err(Error::LengthMismatch {
                what: "MC tensor",
                expected: passes * classes,
                got: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidProbability { index, value: data[index] });
        }
        Ok(Self { passes, classes, data })
    }

    pub fn passes(&self) -> usize {
        self.passes
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.classes..(t + 1) * self.classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.classes)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

/// Penultimate-layer representation of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("embedding must have d >= 1".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("embedding entry {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Class(usize),
    Multi(Vec<bool>),
}

impl Label {
    pub fn class(&self) -> Option<usize> {
        match self {
            Label::Class(c) => Some(*c),
            Label::Multi(_) => None,
        }
    }

    pub fn bits(&self) -> Option<&[bool]> {
        match self {
            Label::Class(_) => None,
            Label::Multi(bits) => Some(bits),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub embedding: Option<Embedding>,
    pub probs: ClassProbability,
    pub mc: Option<McSamples>,
    pub label: Label,
}

/// A validated collection of records sharing `C` and (when present) `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSplit {
    role: SplitRole,
    task: Task,
    classes: usize,
    dim: Option<usize>,
    records: Vec<Record>,
}

impl LabeledSplit {
    pub fn new(role: SplitRole, task: Task, records: Vec<Record>) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::InvalidParameter(format!("{} split is empty", role.name())))?;
        let classes = first.probs.len();
        let dim = first.embedding.as_ref().map(Embedding::dim);
        for (i, r) in records.iter().enumerate() {
            if r.probs.task() != task {
                return Err(Error::WrongTask { expected: task.name(), got: r.probs.task().name() });
            }
            if r.probs.len() != classes {
                return Err(Error::DimensionMismatch { expected: classes, got: r.probs.len() });
            }
            if r.embedding.as_ref().map(Embedding::dim) != dim {
                return Err(Error::InvalidParameter(format!(
                    "record {i}: embeddings must be present on all records with a common dimension"
                )));
            }
            if let Some(mc) = &r.mc {
                if mc.classes() != classes {
                    return Err(Error::DimensionMismatch { expected: classes, got: mc.classes() });
                }
            }
            match (&r.label, task) {
                (Label::Class(c), Task::Multiclass) if *c < classes => {}
                (Label::Class(c), Task::Multiclass) => {
                    return Err(Error::IndexOutOfRange { index: *c, len: classes })
                }
                (Label::Multi(bits), Task::Multilabel) if bits.len() == classes => {}
                (Label::Multi(bits), Task::Multilabel) => {
                    return Err(Error::DimensionMismatch { expected: classes, got: bits.len() })
                }
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "record {i}: label kind does not match {} task",
                        task.name()
                    )))
                }
            }
        }
        Ok(Self { role, task, classes, dim, records })
    }

    pub fn role(&self) -> SplitRole {
        self.role
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn embeddings(&self) -> Result<Vec<&[f64]>> {
        self.records
            .iter()
            .map(|r| r.embedding.as_ref().map(Embedding::as_slice).ok_or(Error::MissingEmbeddings))
            .collect()
    }

    /// Per-instance grouping used by the class-conditional density scorers.
    ///
    /// Multiclass splits group by label. Multilabel splits have no single class
    /// per instance, so every instance falls in group 0.
    pub fn density_groups(&self) -> (Vec<usize>, usize) {
        match self.task {
            Task::Multiclass => {
                (self.records.iter().map(|r| r.label.class().unwrap_or(0)).collect(), self.classes)
            }
            Task::Multilabel => (vec![0; self.records.len()], 1),
        }
    }

    /// Whether the argmax prediction matches the label (multiclass only).
    pub fn correctness(&self) -> Result<Vec<bool>> {
        if self.task != Task::Multiclass {
            return Err(Error::WrongTask { expected: "multiclass", got: self.task.name() });
        }
        Ok(self
            .records
            .iter()
            .map(|r| Some(r.probs.argmax().0) == r.label.class())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiclass_requires_normalization() {
        assert!(ClassProbability::multiclass(vec![0.6, 0.6]).is_err());
        assert!(ClassProbability::multiclass(vec![0.5, 0.5]).is_ok());
        assert!(ClassProbability::multilabel(vec![0.6, 0.6]).is_ok());
        assert!(matches!(
            ClassProbability::multiclass(vec![1.0]),
            Err(Error::TooFewClasses { .. })
        ));
        assert!(ClassProbability::multilabel(vec![1.2, 0.1]).is_err());
    }

    #[test]
    fn ragged_mc_rows_rejected() {
        let err = McSamples::from_rows(&[vec![0.5, 0.5], vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::Ragged { row: 1, .. }));
    }

    #[test]
    fn split_checks_label_range() {
        let rec = Record {
            embedding: None,
            probs: ClassProbability::multiclass(vec![0.5, 0.5]).unwrap(),
            mc: None,
            label: Label::Class(2),
        };
        assert!(LabeledSplit::new(SplitRole::Test, Task::Multiclass, vec![rec]).is_err());
    }

    #[test]
    fn embedding_rejects_non_finite() {
        assert!(Embedding::new(vec![f64::NAN]).is_err());
        assert!(Embedding::new(vec![]).is_err());
    }
}
