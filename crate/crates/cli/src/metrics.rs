use abstain::selective::{NormalizedAuc, RejectionCurve};
use abstain::Task;
use serde::{Deserialize, Serialize};

use crate::commands::mode_name;
use crate::{AggregationArg, ModeArg};

/// One normalized area for one (method, metric, span).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    /// `rc_auc`, `accuracy_auc` or `fr_auc`.
    pub metric: String,
    /// `full` or `first_50`.
    pub span: String,
    pub units: usize,
    /// Null when the oracle and random references coincide.
    pub normalized: Option<f64>,
    pub raw_auc: f64,
    pub random_auc: f64,
    pub oracle_auc: f64,
    pub degenerate: bool,
    /// Metric on the full set (coverage 1).
    pub full_coverage_value: f64,
}

impl MetricRow {
    pub fn new(method: &str, metric: &str, n: &NormalizedAuc, units: usize, curve: &RejectionCurve) -> Self {
        Self {
            method: method.to_string(),
            metric: metric.to_string(),
            span: n.span.name().to_string(),
            units,
            normalized: n.normalized,
            raw_auc: n.raw_auc,
            random_auc: n.rand_auc,
            oracle_auc: n.oracle_auc,
            degenerate: n.degenerate,
            full_coverage_value: curve.full_value().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub task: Task,
    /// `instance` or `label`.
    pub mode: String,
    /// Pair-score aggregation used for multilabel instance mode.
    pub aggregation: Option<String>,
    pub seed: u64,
    pub rows: Vec<MetricRow>,
}

impl Metrics {
    pub fn new(task: Task, mode: ModeArg, aggregation: Option<AggregationArg>, seed: u64) -> Self {
        Self {
            task,
            mode: mode_name(mode).to_string(),
            aggregation: aggregation.map(|a| match a {
                AggregationArg::Mean => "mean".to_string(),
                AggregationArg::Max => "max".to_string(),
            }),
            seed,
            rows: Vec::new(),
        }
    }

    pub fn to_json(&self) -> serde_json::Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(self)?;
        out.push(b'\n');
        Ok(out)
    }

    /// Methods in first-appearance order.
    pub fn methods(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method.as_str()) {
                out.push(&r.method);
            }
        }
        out
    }

    /// (metric, span) columns in first-appearance order.
    pub fn columns(&self) -> Vec<(&str, &str)> {
        let mut out: Vec<(&str, &str)> = Vec::new();
        for r in &self.rows {
            let key = (r.metric.as_str(), r.span.as_str());
            if !out.contains(&key) {
                out.push(key);
            }
        }
        out
    }

    pub fn get(&self, method: &str, metric: &str, span: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.method == method && r.metric == metric && r.span == span)
    }
}
