//! Rejection curves and the normalized areas under them.
//!
//! A unit is whatever gets rejected as a whole: an instance, or a single
//! (instance, label) pair in label-wise multilabel evaluation. Units are
//! rejected most-uncertain first; ties are broken by original index.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome counts of one unit. An instance of a multilabel task bundles all
/// of its label pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitOutcome {
    pub pairs: u32,
    pub errors: u32,
    pub tp: u32,
    pub fp: u32,
    pub fn_: u32,
}

impl UnitOutcome {
    /// Single-prediction unit. A wrong prediction counts as one false
    /// positive and one false negative.
    pub fn instance(correct: bool) -> Self {
        if correct {
            Self { pairs: 1, errors: 0, tp: 1, fp: 0, fn_: 0 }
        } else {
            Self { pairs: 1, errors: 1, tp: 0, fp: 1, fn_: 1 }
        }
    }

    pub fn label_pair(predicted: bool, truth: bool) -> Self {
        Self {
            pairs: 1,
            errors: (predicted != truth) as u32,
            tp: (predicted && truth) as u32,
            fp: (predicted && !truth) as u32,
            fn_: (!predicted && truth) as u32,
        }
    }

    pub fn instance_multilabel(predicted: &[bool], truth: &[bool]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::LengthMismatch { what: "label vector", expected: truth.len(), got: predicted.len() });
        }
        Ok(predicted.iter().zip(truth).map(|(&p, &t)| Self::label_pair(p, t)).fold(Self::default(), |a, b| a + b))
    }
}

impl std::ops::Add for UnitOutcome {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            pairs: self.pairs + o.pairs,
            errors: self.errors + o.errors,
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Risk,
    Accuracy,
    F1Micro,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Risk => "risk",
            Mode::Accuracy => "accuracy",
            Mode::F1Micro => "f1_micro",
        }
    }

    /// Whether a lower curve is better.
    pub fn lower_is_better(self) -> bool {
        self == Mode::Risk
    }

    /// Metric of the pooled counts. F1 of an empty or all-negative set is 1.
    pub fn metric(self, total: &UnitOutcome) -> f64 {
        match self {
            Mode::Risk if total.pairs == 0 => 0.0,
            Mode::Risk => total.errors as f64 / total.pairs as f64,
            Mode::Accuracy if total.pairs == 0 => 1.0,
            Mode::Accuracy => 1.0 - total.errors as f64 / total.pairs as f64,
            Mode::F1Micro => {
                let denom = 2 * total.tp + total.fp + total.fn_;
                if denom == 0 {
                    1.0
                } else {
                    2.0 * total.tp as f64 / denom as f64
                }
            }
        }
    }

    /// Score that rejects erroneous units first. In F1 mode false positives
    /// go before false negatives.
    pub fn oracle_score(self, o: &UnitOutcome) -> f64 {
        if o.pairs == 0 {
            return 0.0;
        }
        match self {
            Mode::Risk | Mode::Accuracy => o.errors as f64 / o.pairs as f64,
            Mode::F1Micro => (2 * o.fp + o.fn_) as f64 / o.pairs as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Span {
    Full,
    First50,
}

impl Span {
    pub fn name(self) -> &'static str {
        match self {
            Span::Full => "full",
            Span::First50 => "first_50",
        }
    }

    fn lower(self) -> f64 {
        match self {
            Span::Full => 0.0,
            Span::First50 => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub coverage: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionCurve {
    pub mode: Mode,
    /// Coverage strictly decreasing from 1.
    pub points: Vec<CurvePoint>,
}

/// Rejection order: descending score, ties by ascending index.
pub fn rejection_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

pub fn build_curve(scores: &[f64], outcomes: &[UnitOutcome], mode: Mode) -> Result<RejectionCurve> {
    if scores.len() != outcomes.len() {
        return Err(Error::LengthMismatch { what: "scores", expected: outcomes.len(), got: scores.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NanScore);
    }
    let n = scores.len();
    let order = rejection_order(scores);
    let mut points = vec![CurvePoint { coverage: 0.0, value: 0.0 }; n];
    let mut kept = UnitOutcome::default();
    for (k, &i) in order.iter().enumerate().rev() {
        kept = kept + outcomes[i];
        points[k] = CurvePoint { coverage: (n - k) as f64 / n as f64, value: mode.metric(&kept) };
    }
    Ok(RejectionCurve { mode, points })
}

impl RejectionCurve {
    /// Metric at full coverage.
    pub fn full_value(&self) -> Option<f64> {
        self.points.first().map(|p| p.value)
    }

    /// Linear interpolation at `coverage`; below the smallest coverage the
    /// last point's value is returned.
    pub fn value_at(&self, coverage: f64) -> Option<f64> {
        let first = self.points.first()?;
        if coverage >= first.coverage {
            return Some(first.value);
        }
        for w in self.points.windows(2) {
            let (hi, lo) = (w[0], w[1]);
            if coverage >= lo.coverage {
                let t = (coverage - lo.coverage) / (hi.coverage - lo.coverage);
                return Some(lo.value + t * (hi.value - lo.value));
            }
        }
        self.points.last().map(|p| p.value)
    }

    /// Trapezoidal area over the span, divided by the span width.
    pub fn auc(&self, span: Span) -> f64 {
        let pts = &self.points;
        match pts.len() {
            0 => return f64::NAN,
            1 => return pts[0].value,
            _ => {}
        }
        let lower = span.lower();
        let mut area = 0.0;
        let mut width = 0.0;
        for w in pts.windows(2) {
            let (hi, mut lo) = (w[0], w[1]);
            if hi.coverage <= lower {
                break;
            }
            if lo.coverage < lower {
                let t = (lower - lo.coverage) / (hi.coverage - lo.coverage);
                lo = CurvePoint { coverage: lower, value: lo.value + t * (hi.value - lo.value) };
            }
            let dx = hi.coverage - lo.coverage;
            area += 0.5 * (hi.value + lo.value) * dx;
            width += dx;
        }
        if width > 0.0 {
            area / width
        } else {
            pts[0].value
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("coverage,value\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{}", p.coverage, p.value);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedAuc {
    pub raw_auc: f64,
    pub rand_auc: f64,
    pub oracle_auc: f64,
    /// `None` when the oracle and random references coincide.
    pub normalized: Option<f64>,
    pub degenerate: bool,
    pub span: Span,
}

/// Area of the oracle ordering of `outcomes`.
pub fn oracle_auc(outcomes: &[UnitOutcome], mode: Mode, span: Span) -> Result<f64> {
    let oracle: Vec<f64> = outcomes.iter().map(|o| mode.oracle_score(o)).collect();
    Ok(build_curve(&oracle, outcomes, mode)?.auc(span))
}

/// Area of the constant curve at the whole-set metric.
pub fn random_auc(outcomes: &[UnitOutcome], mode: Mode) -> f64 {
    mode.metric(&outcomes.iter().fold(UnitOutcome::default(), |a, o| a + *o))
}

pub fn normalize_auc(scores: &[f64], outcomes: &[UnitOutcome], mode: Mode, span: Span) -> Result<NormalizedAuc> {
    let raw_auc = build_curve(scores, outcomes, mode)?.auc(span);
    normalize_raw(raw_auc, outcomes, mode, span)
}

pub fn normalize_raw(raw_auc: f64, outcomes: &[UnitOutcome], mode: Mode, span: Span) -> Result<NormalizedAuc> {
    let rand_auc = random_auc(outcomes, mode);
    let oracle_auc = oracle_auc(outcomes, mode, span)?;
    let degenerate = (oracle_auc - rand_auc).abs() < 1e-15;
    let normalized = (!degenerate).then(|| (raw_auc - rand_auc) / (oracle_auc - rand_auc));
    Ok(NormalizedAuc { raw_auc, rand_auc, oracle_auc, normalized, degenerate, span })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
}

impl Aggregation {
    pub fn apply(self, values: &[f64]) -> f64 {
        match self {
            Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregation::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Accuracy and F1-micro curves of a multilabel split.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilabelCurves {
    pub accuracy: RejectionCurve,
    pub f1: RejectionCurve,
}

fn check_shape(rows: usize, labels: usize, what: &'static str, got: usize) -> Result<()> {
    if got != rows * labels {
        return Err(Error::LengthMismatch { what, expected: rows * labels, got });
    }
    Ok(())
}

/// Label pairs pooled across instances and rejected individually. All
/// inputs are row-major `n x labels`.
pub fn evaluate_labelwise(
    scores: &[f64],
    predicted: &[bool],
    truth: &[bool],
    labels: usize,
) -> Result<MultilabelCurves> {
    check_shape(truth.len() / labels.max(1), labels, "label-pair scores", scores.len())?;
    check_shape(truth.len() / labels.max(1), labels, "predictions", predicted.len())?;
    let outcomes: Vec<UnitOutcome> =
        predicted.iter().zip(truth).map(|(&p, &t)| UnitOutcome::label_pair(p, t)).collect();
    Ok(MultilabelCurves {
        accuracy: build_curve(scores, &outcomes, Mode::Accuracy)?,
        f1: build_curve(scores, &outcomes, Mode::F1Micro)?,
    })
}

/// Whole instances rejected by their aggregated per-label scores.
pub fn evaluate_instancewise_multilabel(
    scores: &[f64],
    predicted: &[bool],
    truth: &[bool],
    labels: usize,
    aggregation: Aggregation,
) -> Result<MultilabelCurves> {
    if labels == 0 {
        return Err(Error::InvalidParameter("label count must be positive".into()));
    }
    let n = truth.len() / labels;
    check_shape(n, labels, "truth", truth.len())?;
    check_shape(n, labels, "label-pair scores", scores.len())?;
    check_shape(n, labels, "predictions", predicted.len())?;
    let inst_scores: Vec<f64> = scores.chunks_exact(labels).map(|c| aggregation.apply(c)).collect();
    let outcomes = predicted
        .chunks_exact(labels)
        .zip(truth.chunks_exact(labels))
        .map(|(p, t)| UnitOutcome::instance_multilabel(p, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(MultilabelCurves {
        accuracy: build_curve(&inst_scores, &outcomes, Mode::Accuracy)?,
        f1: build_curve(&inst_scores, &outcomes, Mode::F1Micro)?,
    })
}

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line plot of named curves sharing one mode, coverage on a reversed x axis.
pub fn curves_svg(title: &str, curves: &[(String, &RejectionCurve)]) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 420.0, 60.0, 170.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let values = curves.iter().flat_map(|(_, c)| c.points.iter().map(|p| p.value));
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), v| (l.min(v), u.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        lo -= 0.05;
        hi += 0.05;
    }
    let x = |c: f64| left + (1.0 - c) * pw;
    let y = |v: f64| top + (hi - v) / (hi - lo) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, left + pw / 2.0, escape(title));
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for i in 0..=5 {
        let c = 1.0 - i as f64 * 0.2;
        let v = lo + (hi - lo) * i as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{c:.1}</text>"#, x(c), top + ph + 18.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.3}</text>"#, left - 6.0, y(v) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">coverage</text>"#, left + pw / 2.0, h - 12.0);
    for (k, (name, curve)) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> =
            curve.points.iter().map(|p| format!("{:.2},{:.2}", x(p.coverage), y(p.value))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = top + 14.0 + 18.0 * k as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, w - right + 10.0, w - right + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, w - right + 36.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}
