use std::fs;
use std::path::Path;

use abstain::hybrid::{FitOptions, Objective};
use abstain::io::{read_models, write_dataset, write_models, Dataset, ModelFile, ScoreRow, ScoreTable};
use abstain::methods::{instance_outcomes, pair_outcomes, pair_scores, FitSettings, Method, Models};
use abstain::selective::{build_curve, curves_svg, normalize_auc, Aggregation, Mode, RejectionCurve, Span, UnitOutcome};
use abstain::synth::{generate, SynthSpec};
use abstain::{SplitRole, Task};
use anyhow::Context;

use crate::metrics::{MetricRow, Metrics};
use crate::{
    usage, AggregationArg, CliResult, EvaluateArgs, FitArgs, GenSynthArgs, ModeArg, ObjectiveArg, ScoreArgs, SpanArg,
    SplitArg,
};

impl From<SplitArg> for SplitRole {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => SplitRole::Train,
            SplitArg::Validation => SplitRole::Validation,
            SplitArg::Test => SplitRole::Test,
        }
    }
}

impl SpanArg {
    fn spans(self) -> Vec<Span> {
        match self {
            SpanArg::Full => vec![Span::Full],
            SpanArg::First50 => vec![Span::First50],
            SpanArg::Both => vec![Span::First50, Span::Full],
        }
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Method lists are user input, so parse failures are usage errors.
fn parse_methods(list: &str, task: Task) -> CliResult<Vec<Method>> {
    let methods = match Method::parse_list(list, task) {
        Ok(m) => m,
        Err(e) => return usage(e.to_string()),
    };
    if methods.is_empty() {
        return usage("no methods requested");
    }
    if let Some(m) = methods.iter().find(|m| !m.supports(task)) {
        return usage(format!("{m} does not apply to {} data", task.name()));
    }
    Ok(methods)
}

pub fn gen_synth(a: &GenSynthArgs) -> CliResult<()> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<SynthSpec>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SynthSpec::default(),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let data = generate(&spec)?;
    let splits = [&data.train, &data.validation, &data.test].map(|s| (&s.split, s.ood.as_slice()));
    write_dataset(&a.out, &splits, Some(spec.seed))?;
    write(&a.out.join("spec.json"), serde_json::to_vec_pretty(&spec)?)?;
    Ok(())
}

pub fn fit(a: &FitArgs) -> CliResult<()> {
    let ds = Dataset::open(&a.manifest)?;
    let task = ds.manifest.task;
    let methods = parse_methods(&a.methods, task)?;
    let train = ds.load(SplitRole::Train)?;
    let validation = match ds.has(SplitRole::Validation) {
        true => Some(ds.load(SplitRole::Validation)?),
        false => None,
    };
    let models =
        Models::fit(&train.split, validation.as_ref().map(|v| &v.split), &methods, &FitSettings::with_seed(a.seed))?;
    let file = ModelFile { task, methods: methods.iter().map(Method::to_string).collect(), seed: a.seed, models };
    write_models(&a.out, &file)?;
    Ok(())
}

pub fn score(a: &ScoreArgs) -> CliResult<()> {
    let ds = Dataset::open(&a.manifest)?;
    let task = ds.manifest.task;
    let methods = parse_methods(&a.methods, task)?;
    let mut file = read_models(&a.models)?;
    if file.task != task {
        return usage(format!("models were fit on {} data, manifest is {}", file.task.name(), task.name()));
    }
    let hybrids: Vec<Method> = methods.iter().copied().filter(|m| matches!(m, Method::Hybrid(..))).collect();
    match a.calibrate {
        Some(role) => {
            let role = SplitRole::from(role);
            if !ds.has(role) {
                return Err(anyhow::anyhow!("calibration needs a {} split, the manifest has none", role.name()).into());
            }
            let objective = match a.objective {
                Some(ObjectiveArg::RcAuc) => Objective::RcAuc,
                Some(ObjectiveArg::FrAuc) => Objective::FrAuc,
                None if task == Task::Multilabel => Objective::FrAuc,
                None => Objective::RcAuc,
            };
            let span = match a.objective_span {
                SpanArg::Full => Span::Full,
                SpanArg::First50 => Span::First50,
                SpanArg::Both => return usage("--objective-span takes full or first50"),
            };
            let calibration = ds.load(role)?;
            file.models.calibrate(&calibration.split, &hybrids, &FitOptions { objective, span })?;
        }
        None => {
            if let Some(m) = hybrids.iter().find(|m| !file.models.hybrids.contains_key(&m.to_string())) {
                return usage(format!("{m} needs calibration; pass --calibrate validation"));
            }
        }
    }

    let split = ds.load(a.split.into())?.split;
    let scored = methods
        .iter()
        .map(|&m| {
            let scores = match m.is_labelwise() {
                true => pair_scores(&split),
                false => file.models.score_instances(m, &split)?,
            };
            Ok((m, scores))
        })
        .collect::<abstain::Result<Vec<_>>>()?;

    let mut table = ScoreTable::default();
    match task {
        Task::Multiclass => {
            let outcomes = instance_outcomes(&split)?;
            for (m, scores) in &scored {
                let name = m.to_string();
                for (i, (&s, &o)) in scores.iter().zip(&outcomes).enumerate() {
                    table.rows.push(ScoreRow::new(i, None, &name, s, o));
                }
            }
        }
        Task::Multilabel => {
            let labels = split.classes();
            let outcomes = pair_outcomes(&split)?;
            for (m, scores) in &scored {
                let name = m.to_string();
                for (p, &o) in outcomes.iter().enumerate() {
                    let (i, l) = (p / labels, p % labels);
                    let s = if m.is_labelwise() { scores[p] } else { scores[i] };
                    table.rows.push(ScoreRow::new(i, Some(l), &name, s, o));
                }
            }
        }
    }
    if let Some(r) = table.rows.iter().find(|r| r.score.is_nan()) {
        return Err(anyhow::anyhow!("{} produced NaN for instance {}", r.scorer, r.instance).into());
    }
    write(&a.out, table.to_csv()?)?;
    Ok(())
}

/// Curves of one scorer, keyed by metric name.
fn scorer_curves(
    table: &ScoreTable,
    scorer: &str,
    task: Task,
    mode: ModeArg,
    aggregation: Aggregation,
) -> Vec<(&'static str, Vec<f64>, Vec<UnitOutcome>)> {
    let units = table.units(scorer);
    let metrics: &[&'static str] = match task {
        Task::Multiclass => &["rc_auc"],
        Task::Multilabel => &["accuracy_auc", "fr_auc"],
    };
    let (scores, outcomes) = match (task, mode) {
        (_, ModeArg::Label) | (Task::Multiclass, ModeArg::Instance) => (units.scores, units.outcomes),
        (Task::Multilabel, ModeArg::Instance) => {
            let mut scores = Vec::new();
            let mut outcomes: Vec<UnitOutcome> = Vec::new();
            let mut start = 0;
            while start < units.instances.len() {
                let inst = units.instances[start];
                let end = start + units.instances[start..].iter().take_while(|&&i| i == inst).count();
                scores.push(aggregation.apply(&units.scores[start..end]));
                outcomes.push(units.outcomes[start..end].iter().fold(UnitOutcome::default(), |acc, o| acc + *o));
                start = end;
            }
            (scores, outcomes)
        }
    };
    metrics.iter().map(|&name| (name, scores.clone(), outcomes.clone())).collect()
}

fn metric_mode(metric: &str) -> Mode {
    match metric {
        "rc_auc" => Mode::Risk,
        "accuracy_auc" => Mode::Accuracy,
        _ => Mode::F1Micro,
    }
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let table = ScoreTable::read(&a.scores)?;
    let task = table.task();
    if a.mode == ModeArg::Label && task == Task::Multiclass {
        return usage("--mode label needs a multilabel score table");
    }
    let aggregation = match a.aggregation {
        AggregationArg::Mean => Aggregation::Mean,
        AggregationArg::Max => Aggregation::Max,
    };
    let scorers = table.scorers();
    if scorers.is_empty() {
        return Err(anyhow::anyhow!("{} has no rows", a.scores.display()).into());
    }

    let mut metrics = Metrics::new(task, a.mode, (task == Task::Multilabel && a.mode == ModeArg::Instance).then_some(a.aggregation), a.seed);
    let mut curves: Vec<(String, &'static str, RejectionCurve)> = Vec::new();
    for scorer in &scorers {
        for (metric, scores, outcomes) in scorer_curves(&table, scorer, task, a.mode, aggregation) {
            let mode = metric_mode(metric);
            let curve = build_curve(&scores, &outcomes, mode)?;
            for span in a.span.spans() {
                let n = normalize_auc(&scores, &outcomes, mode, span)?;
                metrics.rows.push(MetricRow::new(scorer, metric, &n, scores.len(), &curve));
            }
            curves.push((scorer.clone(), metric, curve));
        }
    }
    write(&a.out, metrics.to_json()?)?;

    if let Some(dir) = &a.curves {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut metric_names: Vec<&'static str> = Vec::new();
        for c in &curves {
            if !metric_names.contains(&c.1) {
                metric_names.push(c.1);
            }
        }
        for (scorer, metric, curve) in &curves {
            write(&dir.join(format!("{scorer}.{metric}.csv")), curve.to_csv())?;
        }
        for metric in metric_names {
            let named: Vec<(String, &RejectionCurve)> =
                curves.iter().filter(|c| c.1 == metric).map(|c| (c.0.clone(), &c.2)).collect();
            let title = format!("{} rejection curves ({} mode)", metric_mode(metric).name(), mode_name(a.mode));
            write(&dir.join(format!("{metric}.svg")), curves_svg(&title, &named))?;
        }
    }
    Ok(())
}

pub(crate) fn mode_name(m: ModeArg) -> &'static str {
    match m {
        ModeArg::Instance => "instance",
        ModeArg::Label => "label",
    }
}
