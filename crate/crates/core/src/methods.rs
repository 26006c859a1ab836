//! Named scorers over whole splits: fitting what each needs and producing
//! one score per instance (or per label pair for label-wise MP).

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{fit_beta, mp_uncertainty, score_beta, score_delta, score_entropy, score_sr, BetaModel};
use crate::density::{fit_ddu, fit_md, fit_nuq, fit_rde, Bandwidth, DduModel, MdModel, NuqModel, RdeModel, RdeOptions};
use crate::error::{Error, Result};
use crate::hybrid::{fit_hybrid, FitOptions, HybridConfig, Variant};
use crate::mc::{score_bald, score_pv, score_smp};
use crate::selective::{Aggregation, UnitOutcome};
use crate::types::{LabeledSplit, McSamples, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Density {
    Md,
    Rde,
    Ddu,
    Nuq,
}

impl Density {
    pub const ALL: [Density; 4] = [Density::Md, Density::Rde, Density::Ddu, Density::Nuq];

    pub fn name(self) -> &'static str {
        match self {
            Density::Md => "MD",
            Density::Rde => "RDE",
            Density::Ddu => "DDU",
            Density::Nuq => "NUQ",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Sr,
    Entropy,
    Delta,
    Beta,
    Smp,
    Pv,
    Bald,
    /// Label-wise maximum probability (multilabel).
    Mp,
    Density(Density),
    Hybrid(Variant, Density),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Sr => f.write_str("SR"),
            Method::Entropy => f.write_str("Entropy"),
            Method::Delta => f.write_str("Delta"),
            Method::Beta => f.write_str("Beta"),
            Method::Smp => f.write_str("SMP"),
            Method::Pv => f.write_str("PV"),
            Method::Bald => f.write_str("BALD"),
            Method::Mp => f.write_str("MP"),
            Method::Density(d) => f.write_str(d.name()),
            Method::Hybrid(v, d) => write!(f, "{}-{}", v.name(), d.name()),
        }
    }
}

impl Method {
    /// Every method usable on `task`, in report order.
    pub fn all(task: Task) -> Vec<Method> {
        let mut out = match task {
            Task::Multiclass => vec![
                Method::Sr,
                Method::Entropy,
                Method::Delta,
                Method::Beta,
                Method::Smp,
                Method::Pv,
                Method::Bald,
            ],
            Task::Multilabel => vec![Method::Mp],
        };
        out.extend(Density::ALL.map(Method::Density));
        for v in [Variant::Huq, Variant::Huq2] {
            out.extend(Density::ALL.map(|d| Method::Hybrid(v, d)));
        }
        out
    }

    /// Methods enabled by default: all except the NUQ hybrids.
    pub fn defaults(task: Task) -> Vec<Method> {
        Self::all(task).into_iter().filter(|m| !matches!(m, Method::Hybrid(_, Density::Nuq))).collect()
    }

    pub fn parse(name: &str) -> Result<Method> {
        let all: Vec<Method> = Self::all(Task::Multiclass).into_iter().chain([Method::Mp]).collect();
        let wanted = name.trim().to_ascii_uppercase();
        all.iter().copied().find(|m| m.to_string().to_ascii_uppercase() == wanted).ok_or_else(|| Error::UnknownMethod {
            name: name.to_string(),
            available: all.iter().map(Method::to_string).collect::<Vec<_>>().join(", "),
        })
    }

    /// Parses a comma-separated list; `all` expands to [`Method::defaults`].
    pub fn parse_list(list: &str, task: Task) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if item.eq_ignore_ascii_case("all") {
                out.extend(Self::defaults(task));
            } else {
                out.push(Self::parse(item)?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    pub fn density(self) -> Option<Density> {
        match self {
            Method::Density(d) | Method::Hybrid(_, d) => Some(d),
            _ => None,
        }
    }

    /// Whether the method scores (instance, label) pairs.
    pub fn is_labelwise(self) -> bool {
        self == Method::Mp
    }

    pub fn supports(self, task: Task) -> bool {
        match self {
            Method::Mp => task == Task::Multilabel,
            Method::Sr | Method::Entropy | Method::Delta | Method::Beta | Method::Smp | Method::Pv | Method::Bald => {
                task == Task::Multiclass
            }
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    pub rde: RdeOptions,
    pub nuq_bandwidth: Bandwidth,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self { rde: RdeOptions::default(), nuq_bandwidth: Bandwidth::Auto }
    }
}

impl FitSettings {
    pub fn with_seed(seed: u64) -> Self {
        Self { rde: RdeOptions { seed, ..RdeOptions::default() }, ..Self::default() }
    }
}

/// Everything fitted on train (density models) and validation (Beta, hybrids).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Models {
    pub md: Option<MdModel>,
    pub rde: Option<RdeModel>,
    pub ddu: Option<DduModel>,
    pub nuq: Option<NuqModel>,
    pub beta: Option<BetaModel>,
    /// Keyed by method name, e.g. `HUQ2-MD`.
    pub hybrids: BTreeMap<String, HybridConfig>,
}

impl Models {
    /// Fits the density models the methods need on `train`, and the Beta
    /// model on `validation` when requested.
    pub fn fit(
        train: &LabeledSplit,
        validation: Option<&LabeledSplit>,
        methods: &[Method],
        settings: &FitSettings,
    ) -> Result<Models> {
        let mut models = Models::default();
        let wanted: Vec<Density> = {
            let mut v: Vec<Density> = methods.iter().filter_map(|m| m.density()).collect();
            v.sort();
            v.dedup();
            v
        };
        for d in wanted {
            match d {
                Density::Md => models.md = Some(fit_md(train)?),
                Density::Rde => models.rde = Some(fit_rde(train, &settings.rde)?),
                Density::Ddu => models.ddu = Some(fit_ddu(train)?),
                Density::Nuq => models.nuq = Some(fit_nuq(train, settings.nuq_bandwidth)?),
            }
        }
        if methods.contains(&Method::Beta) {
            let validation = validation.ok_or_else(|| {
                Error::InvalidParameter("the Beta scorer is fit on a validation split, none given".into())
            })?;
            models.beta = Some(fit_beta(validation)?);
        }
        Ok(models)
    }

    /// Fits every hybrid in `methods` on validation scores.
    pub fn calibrate(&mut self, validation: &LabeledSplit, methods: &[Method], opts: &FitOptions) -> Result<()> {
        let outcomes = instance_outcomes(validation)?;
        let ua = aleatoric_scores(validation)?;
        for &m in methods {
            if let Method::Hybrid(variant, d) = m {
                let ue = self.density_scores(d, validation)?;
                let cfg = fit_hybrid(&ua, &ue, &outcomes, variant, opts)?;
                self.hybrids.insert(m.to_string(), cfg);
            }
        }
        Ok(())
    }

    fn missing(what: &str) -> Error {
        Error::InvalidParameter(format!("no fitted {what} model; run fit with this method first"))
    }

    pub fn density_scores(&self, d: Density, split: &LabeledSplit) -> Result<Vec<f64>> {
        let points = split.embeddings()?;
        match d {
            Density::Md => {
                let m = self.md.as_ref().ok_or_else(|| Self::missing("MD"))?;
                points.par_iter().map(|e| m.score(e)).collect()
            }
            Density::Rde => {
                let m = self.rde.as_ref().ok_or_else(|| Self::missing("RDE"))?;
                points.par_iter().map(|e| m.score(e)).collect()
            }
            Density::Ddu => {
                let m = self.ddu.as_ref().ok_or_else(|| Self::missing("DDU"))?;
                points.par_iter().map(|e| m.score(e)).collect()
            }
            Density::Nuq => {
                let m = self.nuq.as_ref().ok_or_else(|| Self::missing("NUQ"))?;
                points.par_iter().map(|e| m.score(e).map(|s| s.value)).collect()
            }
        }
    }

    /// One score per instance. Label-wise MP is aggregated with the mean.
    pub fn score_instances(&self, method: Method, split: &LabeledSplit) -> Result<Vec<f64>> {
        if !method.supports(split.task()) {
            return Err(Error::WrongTask {
                expected: if split.task() == Task::Multiclass { "multilabel" } else { "multiclass" },
                got: split.task().name(),
            });
        }
        let recs = split.records();
        let mc = || -> Result<Vec<&McSamples>> { recs.iter().map(|r| r.mc.as_ref().ok_or(Error::MissingMcSamples)).collect() };
        match method {
            Method::Sr => recs.iter().map(|r| score_sr(&r.probs)).collect(),
            Method::Entropy => recs.iter().map(|r| score_entropy(&r.probs)).collect(),
            Method::Delta => recs.iter().map(|r| score_delta(&r.probs)).collect(),
            Method::Beta => {
                let m = self.beta.as_ref().ok_or_else(|| Self::missing("Beta"))?;
                recs.iter().map(|r| score_beta(&r.probs, m)).collect()
            }
            Method::Smp => Ok(mc()?.into_iter().map(score_smp).collect()),
            Method::Pv => mc()?.into_iter().map(score_pv).collect(),
            Method::Bald => Ok(mc()?.into_iter().map(score_bald).collect()),
            Method::Mp => {
                let labels = split.classes();
                Ok(pair_scores(split).chunks_exact(labels).map(|c| Aggregation::Mean.apply(c)).collect())
            }
            Method::Density(d) => self.density_scores(d, split),
            Method::Hybrid(_, d) => {
                let cfg = self
                    .hybrids
                    .get(&method.to_string())
                    .ok_or_else(|| Error::InvalidParameter(format!("{method} is not calibrated; score with --calibrate validation")))?;
                cfg.score_all(&aleatoric_scores(split)?, &self.density_scores(d, split)?)
            }
        }
    }
}

/// Aleatoric input of the hybrids: SR for multiclass, mean label-wise MP for
/// multilabel.
pub fn aleatoric_scores(split: &LabeledSplit) -> Result<Vec<f64>> {
    match split.task() {
        Task::Multiclass => split.records().iter().map(|r| score_sr(&r.probs)).collect(),
        Task::Multilabel => {
            let labels = split.classes();
            Ok(pair_scores(split).chunks_exact(labels).map(|c| Aggregation::Mean.apply(c)).collect())
        }
    }
}

/// Label-wise MP uncertainty of every (instance, label) pair, row-major.
pub fn pair_scores(split: &LabeledSplit) -> Vec<f64> {
    split.records().iter().flat_map(|r| r.probs.as_slice().iter().map(|&p| mp_uncertainty(p))).collect()
}

/// Sigmoid outputs thresholded at 0.5, row-major.
pub fn predicted_bits(split: &LabeledSplit) -> Vec<bool> {
    split.records().iter().flat_map(|r| r.probs.as_slice().iter().map(|&p| p >= 0.5)).collect()
}

pub fn truth_bits(split: &LabeledSplit) -> Result<Vec<bool>> {
    let mut out = Vec::with_capacity(split.len() * split.classes());
    for r in split.records() {
        out.extend_from_slice(r.label.bits().ok_or(Error::WrongTask { expected: "multilabel", got: "multiclass" })?);
    }
    Ok(out)
}

/// One outcome per instance: argmax correctness for multiclass, pooled label
/// pairs for multilabel.
pub fn instance_outcomes(split: &LabeledSplit) -> Result<Vec<UnitOutcome>> {
    match split.task() {
        Task::Multiclass => Ok(split.correctness()?.into_iter().map(UnitOutcome::instance).collect()),
        Task::Multilabel => {
            let labels = split.classes();
            let pred = predicted_bits(split);
            let truth = truth_bits(split)?;
            pred.chunks_exact(labels)
                .zip(truth.chunks_exact(labels))
                .map(|(p, t)| UnitOutcome::instance_multilabel(p, t))
                .collect()
        }
    }
}

/// One outcome per (instance, label) pair of a multilabel split.
pub fn pair_outcomes(split: &LabeledSplit) -> Result<Vec<UnitOutcome>> {
    let truth = truth_bits(split)?;
    Ok(predicted_bits(split).into_iter().zip(truth).map(|(p, t)| UnitOutcome::label_pair(p, t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in Method::all(Task::Multiclass).into_iter().chain([Method::Mp]) {
            assert_eq!(Method::parse(&m.to_string()).unwrap(), m);
        }
        assert_eq!(Method::parse("huq2-md").unwrap(), Method::Hybrid(Variant::Huq2, Density::Md));
    }

    #[test]
    fn unknown_method_lists_available() {
        let err = Method::parse("XYZ").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("XYZ") && msg.contains("HUQ2-DDU") && msg.contains("BALD"));
    }

    #[test]
    fn all_expands_defaults() {
        let ms = Method::parse_list("all", Task::Multiclass).unwrap();
        assert_eq!(ms.len(), 7 + 4 + 6);
        assert!(!ms.contains(&Method::Hybrid(Variant::Huq, Density::Nuq)));
        assert!(Method::parse_list("md,nuq,HUQ-NUQ", Task::Multiclass).unwrap().contains(&Method::Hybrid(Variant::Huq, Density::Nuq)));
    }
}
