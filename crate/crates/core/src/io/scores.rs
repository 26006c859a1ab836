//! Score tables: one CSV row per (unit, scorer) with the unit's outcome
//! counts, so evaluation needs nothing but the table.
//!
//! Multiclass units are instances (empty `label` column). Multilabel units are
//! (instance, label) pairs; instance-level scorers repeat their score on every
//! pair of the instance.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selective::UnitOutcome;
use crate::types::Task;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub instance: usize,
    pub label: Option<usize>,
    pub scorer: String,
    pub score: f64,
    pub pairs: u32,
    pub errors: u32,
    pub tp: u32,
    pub fp: u32,
    #[serde(rename = "fn")]
    pub fn_: u32,
}

impl ScoreRow {
    pub fn new(instance: usize, label: Option<usize>, scorer: &str, score: f64, o: UnitOutcome) -> Self {
        Self {
            instance,
            label,
            scorer: scorer.to_string(),
            score,
            pairs: o.pairs,
            errors: o.errors,
            tp: o.tp,
            fp: o.fp,
            fn_: o.fn_,
        }
    }

    pub fn outcome(&self) -> UnitOutcome {
        UnitOutcome { pairs: self.pairs, errors: self.errors, tp: self.tp, fp: self.fp, fn_: self.fn_ }
    }
}

/// Units of one scorer, ordered by (instance, label).
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerUnits {
    pub instances: Vec<usize>,
    pub labels: Vec<Option<usize>>,
    pub scores: Vec<f64>,
    pub outcomes: Vec<UnitOutcome>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    /// Multilabel when any row names a label.
    pub fn task(&self) -> Task {
        if self.rows.iter().any(|r| r.label.is_some()) {
            Task::Multilabel
        } else {
            Task::Multiclass
        }
    }

    /// Scorer names in first-appearance order.
    pub fn scorers(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.scorer) {
                seen.push(r.scorer.clone());
            }
        }
        seen
    }

    pub fn units(&self, scorer: &str) -> ScorerUnits {
        let mut rows: Vec<&ScoreRow> = self.rows.iter().filter(|r| r.scorer == scorer).collect();
        rows.sort_by_key(|r| (r.instance, r.label));
        ScorerUnits {
            instances: rows.iter().map(|r| r.instance).collect(),
            labels: rows.iter().map(|r| r.label).collect(),
            scores: rows.iter().map(|r| r.score).collect(),
            outcomes: rows.iter().map(|r| r.outcome()).collect(),
        }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(bytes.as_slice());
        let rows = r
            .deserialize()
            .enumerate()
            .map(|(i, row)| row.map_err(|e| Error::malformed(path, format!("row {i}: {e}"))))
            .collect::<Result<Vec<ScoreRow>>>()?;
        let mut seen = BTreeMap::new();
        for (i, row) in rows.iter().enumerate() {
            if row.score.is_nan() {
                return Err(Error::malformed(path, format!("row {i}: NaN score")));
            }
            if seen.insert((row.scorer.as_str(), row.instance, row.label), i).is_some() {
                return Err(Error::malformed(path, format!("row {i}: duplicate unit for scorer {}", row.scorer)));
            }
        }
        Ok(Self { rows })
    }
}
