//! Python bindings: synthetic data, the scorers, fitted pipelines and
//! selective evaluation. Inputs and outputs are plain Python lists.

use abstain::baseline;
use abstain::density::{fit_md_from, MdModel};
use abstain::hybrid::{fit_hybrid as fit_hybrid_config, FitOptions, HybridConfig, Objective, Variant};
use abstain::mc;
use abstain::methods::{FitSettings, Method, Models};
use abstain::selective::{self, build_curve, Mode, Span, UnitOutcome};
use abstain::synth::{self, SynthDataset, SynthSpec};
use abstain::{ClassProbability, LabeledSplit, McSamples, SplitRole, Task};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: abstain::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_span(span: &str) -> PyResult<Span> {
    match span {
        "full" => Ok(Span::Full),
        "first_50" => Ok(Span::First50),
        other => Err(PyValueError::new_err(format!("unknown span {other:?}, expected full or first_50"))),
    }
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    match mode {
        "risk" => Ok(Mode::Risk),
        "accuracy" => Ok(Mode::Accuracy),
        "f1_micro" => Ok(Mode::F1Micro),
        other => Err(PyValueError::new_err(format!("unknown mode {other:?}, expected risk, accuracy or f1_micro"))),
    }
}

fn parse_role(role: &str) -> PyResult<SplitRole> {
    match role {
        "train" => Ok(SplitRole::Train),
        "validation" => Ok(SplitRole::Validation),
        "test" => Ok(SplitRole::Test),
        other => Err(PyValueError::new_err(format!("unknown split {other:?}"))),
    }
}

fn parse_variant(variant: &str) -> PyResult<Variant> {
    match variant.to_ascii_lowercase().as_str() {
        "huq" => Ok(Variant::Huq),
        "huq2" => Ok(Variant::Huq2),
        other => Err(PyValueError::new_err(format!("unknown hybrid variant {other:?}, expected huq or huq2"))),
    }
}

fn fit_options(task: Task, objective: Option<&str>, span: &str) -> PyResult<FitOptions> {
    let objective = match objective {
        Some(o) => o.parse::<Objective>().map_err(err)?,
        None if task == Task::Multilabel => Objective::FrAuc,
        None => Objective::RcAuc,
    };
    Ok(FitOptions { objective, span: parse_span(span)? })
}

fn outcomes_of(correct: &[bool]) -> Vec<UnitOutcome> {
    correct.iter().map(|&c| UnitOutcome::instance(c)).collect()
}

#[pyfunction]
fn score_sr(probs: Vec<f64>) -> PyResult<f64> {
    baseline::score_sr(&ClassProbability::multiclass(probs).map_err(err)?).map_err(err)
}

#[pyfunction]
fn score_delta(probs: Vec<f64>) -> PyResult<f64> {
    baseline::score_delta(&ClassProbability::multiclass(probs).map_err(err)?).map_err(err)
}

#[pyfunction]
fn score_entropy(probs: Vec<f64>) -> PyResult<f64> {
    baseline::score_entropy(&ClassProbability::multiclass(probs).map_err(err)?).map_err(err)
}

/// Label-wise maximum-probability uncertainty of every label of one instance.
#[pyfunction]
fn score_mp(probs: Vec<f64>) -> PyResult<Vec<f64>> {
    let p = ClassProbability::multilabel(probs).map_err(err)?;
    (0..p.len()).map(|l| baseline::score_mp_labelwise(&p, l).map_err(err)).collect()
}

#[pyfunction]
fn score_smp(samples: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(mc::score_smp(&McSamples::from_rows(&samples).map_err(err)?))
}

#[pyfunction]
fn score_pv(samples: Vec<Vec<f64>>) -> PyResult<f64> {
    mc::score_pv(&McSamples::from_rows(&samples).map_err(err)?).map_err(err)
}

#[pyfunction]
fn score_bald(samples: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(mc::score_bald(&McSamples::from_rows(&samples).map_err(err)?))
}

/// Mahalanobis distance to the nearest class centroid under a shared covariance.
#[pyclass(name = "MahalanobisModel", frozen)]
struct PyMd(MdModel);

#[pymethods]
impl PyMd {
    #[new]
    fn new(points: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<Self> {
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
        Ok(Self(fit_md_from(&refs, &labels, classes).map_err(err)?))
    }

    fn score(&self, point: Vec<f64>) -> PyResult<f64> {
        self.0.score(&point).map_err(err)
    }

    fn score_many(&self, points: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        points.iter().map(|p| self.0.score(p).map_err(err)).collect()
    }
}

#[pyclass(name = "Hybrid", frozen)]
struct PyHybrid(HybridConfig);

#[pymethods]
impl PyHybrid {
    #[getter]
    fn variant(&self) -> &'static str {
        self.0.variant.name()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    #[getter]
    fn delta_min(&self) -> f64 {
        self.0.delta_min
    }

    #[getter]
    fn delta_max(&self) -> f64 {
        self.0.delta_max
    }

    #[getter]
    fn c(&self) -> u8 {
        self.0.c
    }

    fn score(&self, ua: Vec<f64>, ue: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.score_all(&ua, &ue).map_err(err)
    }

    fn __repr__(&self) -> String {
        let h = &self.0;
        format!(
            "Hybrid({}, alpha={}, delta_min={}, delta_max={}, c={})",
            h.variant.name(),
            h.alpha,
            h.delta_min,
            h.delta_max,
            h.c
        )
    }
}

/// Grid-searches a hybrid on validation aleatoric/epistemic scores and
/// per-instance correctness.
#[pyfunction]
#[pyo3(signature = (ua, ue, correct, variant = "huq", span = "first_50"))]
fn fit_hybrid(ua: Vec<f64>, ue: Vec<f64>, correct: Vec<bool>, variant: &str, span: &str) -> PyResult<PyHybrid> {
    let opts = FitOptions { objective: Objective::RcAuc, span: parse_span(span)? };
    let cfg = fit_hybrid_config(&ua, &ue, &outcomes_of(&correct), parse_variant(variant)?, &opts).map_err(err)?;
    Ok(PyHybrid(cfg))
}

#[pyclass(name = "NormalizedAuc", frozen, get_all)]
struct PyNormalizedAuc {
    raw: f64,
    random: f64,
    oracle: f64,
    normalized: Option<f64>,
    degenerate: bool,
}

/// Rejection curve of instance-level outcomes as `(coverage, value)` pairs.
#[pyfunction]
#[pyo3(signature = (scores, correct, mode = "risk"))]
fn rejection_curve(scores: Vec<f64>, correct: Vec<bool>, mode: &str) -> PyResult<Vec<(f64, f64)>> {
    let curve = build_curve(&scores, &outcomes_of(&correct), parse_mode(mode)?).map_err(err)?;
    Ok(curve.points.iter().map(|p| (p.coverage, p.value)).collect())
}

#[pyfunction]
#[pyo3(signature = (scores, correct, span = "full", mode = "risk"))]
fn normalized_auc(scores: Vec<f64>, correct: Vec<bool>, span: &str, mode: &str) -> PyResult<PyNormalizedAuc> {
    let n = selective::normalize_auc(&scores, &outcomes_of(&correct), parse_mode(mode)?, parse_span(span)?)
        .map_err(err)?;
    Ok(PyNormalizedAuc {
        raw: n.raw_auc,
        random: n.rand_auc,
        oracle: n.oracle_auc,
        normalized: n.normalized,
        degenerate: n.degenerate,
    })
}

/// A generated dataset with train, validation and test splits.
#[pyclass(name = "SynthDataset", frozen)]
struct PyDataset(SynthDataset);

impl PyDataset {
    fn split(&self, role: &str) -> PyResult<&LabeledSplit> {
        Ok(&self.0.split(parse_role(role)?).split)
    }
}

#[pymethods]
impl PyDataset {
    #[getter]
    fn task(&self) -> &'static str {
        self.0.spec.task.name()
    }

    #[getter]
    fn spec_json(&self) -> String {
        serde_json::to_string(&self.0.spec).expect("spec serializes")
    }

    fn probabilities(&self, split: &str) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.split(split)?.records().iter().map(|r| r.probs.as_slice().to_vec()).collect())
    }

    fn embeddings(&self, split: &str) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.split(split)?.embeddings().map_err(err)?.into_iter().map(<[f64]>::to_vec).collect())
    }

    fn labels(&self, split: &str) -> PyResult<Vec<usize>> {
        let split = self.split(split)?;
        split
            .records()
            .iter()
            .map(|r| r.label.class().ok_or_else(|| PyValueError::new_err("multilabel splits have no class labels")))
            .collect()
    }

    /// Whether the argmax prediction is right (multiclass) or every label
    /// is right (multilabel).
    fn correct(&self, split: &str) -> PyResult<Vec<bool>> {
        self.split(split)?.correctness().map_err(err)
    }

    fn ood(&self, split: &str) -> PyResult<Vec<bool>> {
        Ok(self.0.split(parse_role(split)?).ood.clone())
    }

    fn __len__(&self) -> usize {
        self.0.train.split.len() + self.0.validation.split.len() + self.0.test.split.len()
    }
}

/// Generates a dataset. `spec` is a JSON object with any subset of the
/// generator fields and takes precedence over `task`; `seed` overrides both.
#[pyfunction]
#[pyo3(signature = (seed = None, task = "multiclass", spec = None))]
fn generate(seed: Option<u64>, task: &str, spec: Option<&str>) -> PyResult<PyDataset> {
    let mut s = match (spec, task) {
        (Some(text), _) => {
            serde_json::from_str::<SynthSpec>(text).map_err(|e| PyValueError::new_err(format!("bad spec: {e}")))?
        }
        (None, "multiclass") => SynthSpec::default(),
        (None, "multilabel") => SynthSpec::multilabel(),
        (None, other) => return Err(PyValueError::new_err(format!("unknown task {other:?}"))),
    };
    if let Some(seed) = seed {
        s = s.with_seed(seed);
    }
    let data = synth::generate(&s).map_err(err)?;
    Ok(PyDataset(data))
}

/// Density models fit on train plus hybrids calibrated on validation.
#[pyclass(name = "Models")]
struct PyModels {
    task: Task,
    methods: Vec<Method>,
    inner: Models,
}

#[pymethods]
impl PyModels {
    #[staticmethod]
    #[pyo3(signature = (data, methods = "all", seed = 0))]
    fn fit(data: &PyDataset, methods: &str, seed: u64) -> PyResult<Self> {
        let task = data.0.spec.task;
        let methods = Method::parse_list(methods, task).map_err(err)?;
        if let Some(m) = methods.iter().find(|m| !m.supports(task)) {
            return Err(PyValueError::new_err(format!("{m} does not apply to {} data", task.name())));
        }
        let inner = Models::fit(&data.0.train.split, Some(&data.0.validation.split), &methods, &FitSettings::with_seed(seed))
            .map_err(err)?;
        Ok(Self { task, methods, inner })
    }

    #[pyo3(signature = (data, objective = None, span = "first_50"))]
    fn calibrate(&mut self, data: &PyDataset, objective: Option<&str>, span: &str) -> PyResult<()> {
        let opts = fit_options(self.task, objective, span)?;
        self.inner.calibrate(&data.0.validation.split, &self.methods, &opts).map_err(err)
    }

    #[getter]
    fn methods(&self) -> Vec<String> {
        self.methods.iter().map(Method::to_string).collect()
    }

    fn hybrid(&self, name: &str) -> Option<PyHybrid> {
        let method = Method::parse(name).ok()?;
        self.inner.hybrids.get(&method.to_string()).cloned().map(PyHybrid)
    }

    /// One score per instance of `split`, higher meaning more uncertain.
    #[pyo3(signature = (data, method, split = "test"))]
    fn score(&self, data: &PyDataset, method: &str, split: &str) -> PyResult<Vec<f64>> {
        let method = Method::parse(method).map_err(err)?;
        self.inner.score_instances(method, data.split(split)?).map_err(err)
    }
}

#[pymodule]
#[pyo3(name = "abstain")]
fn abstain_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(score_sr, m)?)?;
    m.add_function(wrap_pyfunction!(score_delta, m)?)?;
    m.add_function(wrap_pyfunction!(score_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(score_mp, m)?)?;
    m.add_function(wrap_pyfunction!(score_smp, m)?)?;
    m.add_function(wrap_pyfunction!(score_pv, m)?)?;
    m.add_function(wrap_pyfunction!(score_bald, m)?)?;
    m.add_function(wrap_pyfunction!(fit_hybrid, m)?)?;
    m.add_function(wrap_pyfunction!(rejection_curve, m)?)?;
    m.add_function(wrap_pyfunction!(normalized_auc, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_class::<PyMd>()?;
    m.add_class::<PyHybrid>()?;
    m.add_class::<PyNormalizedAuc>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModels>()?;
    Ok(())
}
