//! Seeded synthetic benchmark: Gaussian class clusters with an ambiguous
//! boundary band, a displaced out-of-distribution cluster, and linear probes
//! standing in for a trained classifier head.
//!
//! Every stored value is rounded to `f32` so that the binary on-disk format
//! reproduces generated splits exactly.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_rng, DetRng};
use crate::types::{ClassProbability, Embedding, Label, LabeledSplit, McSamples, Record, SplitRole, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    /// Classes (multiclass) or latent clusters (multilabel).
    pub classes: usize,
    pub dim: usize,
    /// Distance between any two class centroids.
    pub spacing: f64,
    /// Fraction of in-distribution instances drawn from the band between two
    /// classes and labelled with either of them at random.
    pub overlap: f64,
    /// Fraction of validation and test instances drawn from the displaced
    /// cluster, with random labels.
    pub ood_fraction: f64,
    /// Distance of the out-of-distribution cluster from the centroid mean.
    pub ood_displacement: f64,
    pub task: Task,
    /// Label count for multilabel tasks.
    pub labels: usize,
    pub mc_passes: usize,
    /// Standard deviation of the per-pass perturbation of probe weights.
    pub mc_noise: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            n_train: 2000,
            n_validation: 1000,
            n_test: 2000,
            classes: 3,
            dim: 8,
            spacing: 4.0,
            overlap: 0.15,
            ood_fraction: 0.10,
            ood_displacement: 8.0,
            task: Task::Multiclass,
            labels: 10,
            mc_passes: 20,
            mc_noise: 0.1,
        }
    }
}

impl SynthSpec {
    pub fn multilabel() -> Self {
        Self { task: Task::Multilabel, ..Self::default() }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// Width of probability vectors: classes or labels.
    pub fn outputs(&self) -> usize {
        match self.task {
            Task::Multiclass => self.classes,
            Task::Multilabel => self.labels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InfeasibleSpec(msg));
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.task == Task::Multilabel && self.labels < 2 {
            return bad(format!("need at least 2 labels, got {}", self.labels));
        }
        if self.dim == 0 {
            return bad("dimension must be positive".into());
        }
        for (name, n) in [("train", self.n_train), ("validation", self.n_validation), ("test", self.n_test)] {
            if n < self.classes {
                return bad(format!("{name} size {n} is smaller than the class count {}", self.classes));
            }
        }
        for (name, f) in [("overlap", self.overlap), ("ood_fraction", self.ood_fraction)] {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("{name} {f} outside [0, 1]"));
            }
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return bad(format!("spacing must be positive, got {}", self.spacing));
        }
        if !(self.ood_displacement >= 0.0 && self.ood_displacement.is_finite()) {
            return bad(format!("ood_displacement must be non-negative, got {}", self.ood_displacement));
        }
        if self.mc_passes < 2 {
            return bad(format!("mc_passes must be at least 2, got {}", self.mc_passes));
        }
        if !(self.mc_noise >= 0.0 && self.mc_noise.is_finite()) {
            return bad(format!("mc_noise must be non-negative, got {}", self.mc_noise));
        }
        Ok(())
    }
}

/// A generated split with its ground-truth out-of-distribution flags.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSplit {
    pub split: LabeledSplit,
    pub ood: Vec<bool>,
}

impl SynthSplit {
    pub fn ood_count(&self) -> usize {
        self.ood.iter().filter(|&&o| o).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub spec: SynthSpec,
    pub train: SynthSplit,
    pub validation: SynthSplit,
    pub test: SynthSplit,
}

impl SynthDataset {
    pub fn split(&self, role: SplitRole) -> &SynthSplit {
        match role {
            SplitRole::Train => &self.train,
            SplitRole::Validation => &self.validation,
            SplitRole::Test => &self.test,
        }
    }
}

fn q(x: f64) -> f64 {
    x as f32 as f64
}

fn normal(rng: &mut DetRng) -> f64 {
    rng.sample(StandardNormal)
}

struct Geometry {
    centroids: Vec<Vec<f64>>,
    ood_center: Vec<f64>,
}

fn geometry(spec: &SynthSpec) -> Geometry {
    let mut rng = derive_rng(spec.seed, 1);
    let (c, d) = (spec.classes, spec.dim);
    let mut centroids: Vec<Vec<f64>> = if c <= d {
        (0..c)
            .map(|k| (0..d).map(|j| if j == k { spec.spacing / std::f64::consts::SQRT_2 } else { 0.0 }).collect())
            .collect()
    } else {
        (0..c)
            .map(|_| {
                let v: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.into_iter().map(|x| x / norm * spec.spacing / std::f64::consts::SQRT_2).collect()
            })
            .collect()
    };
    let mean: Vec<f64> = (0..d).map(|j| centroids.iter().map(|m| m[j]).sum::<f64>() / c as f64).collect();
    for m in &mut centroids {
        for (x, mu) in m.iter_mut().zip(&mean) {
            *x -= mu;
        }
    }
    // Displace partly along the first class direction so the probes
    // extrapolate confidently, and partly along an axis they never saw.
    let toward: Vec<f64> = {
        let n = centroids[0].iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        centroids[0].iter().map(|x| x / n).collect()
    };
    let mut away: Vec<f64> = if c < d {
        (0..d).map(|j| if j == d - 1 { 1.0 } else { 0.0 }).collect()
    } else {
        (0..d).map(|_| normal(&mut rng)).collect()
    };
    let proj: f64 = away.iter().zip(&toward).map(|(a, t)| a * t).sum();
    for (a, t) in away.iter_mut().zip(&toward) {
        *a -= proj * t;
    }
    let an = away.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dir: Vec<f64> = if an > 1e-9 {
        toward.iter().zip(&away).map(|(t, a)| 0.6 * t + 0.8 * a / an).collect()
    } else {
        toward
    };
    let ood_center = dir.iter().map(|x| x * spec.ood_displacement).collect();
    Geometry { centroids, ood_center }
}

/// Raw embeddings with multiclass labels (or latent clusters) and OOD flags.
fn sample_points(spec: &SynthSpec, geo: &Geometry, n: usize, ood_count: usize, rng: &mut DetRng) -> (Vec<Vec<f64>>, Vec<usize>, Vec<bool>) {
    let (c, d) = (spec.classes, spec.dim);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut ood = Vec::with_capacity(n);
    let n_id = n - ood_count;
    for i in 0..n_id {
        let class = i % c;
        if rng.random::<f64>() < spec.overlap {
            let other = (class + 1 + rng.random_range(0..c - 1)) % c;
            let x: Vec<f64> = (0..d)
                .map(|j| 0.5 * (geo.centroids[class][j] + geo.centroids[other][j]) + 0.5 * normal(rng))
                .collect();
            xs.push(x);
            ys.push(if rng.random::<bool>() { class } else { other });
        } else {
            xs.push((0..d).map(|j| geo.centroids[class][j] + normal(rng)).collect());
            ys.push(class);
        }
        ood.push(false);
    }
    for _ in 0..ood_count {
        xs.push((0..d).map(|j| geo.ood_center[j] + normal(rng)).collect());
        ys.push(rng.random_range(0..c));
        ood.push(true);
    }
    for x in &mut xs {
        for v in x.iter_mut() {
            *v = q(*v);
        }
    }
    (xs, ys, ood)
}

/// `outputs x (d + 1)` weights, bias last.
#[derive(Debug, Clone)]
struct Linear {
    w: Vec<Vec<f64>>,
}

impl Linear {
    fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.w
            .iter()
            .map(|row| row[..x.len()].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + row[x.len()])
            .collect()
    }

    fn perturbed(&self, noise: f64, rng: &mut DetRng) -> Self {
        Self { w: self.w.iter().map(|r| r.iter().map(|v| v + noise * normal(rng)).collect()).collect() }
    }
}

const PROBE_STEPS: usize = 300;
const PROBE_LR: f64 = 0.5;
const PROBE_L2: f64 = 1e-4;

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Full-batch gradient descent on cross-entropy. `targets` rows hold either
/// one-hot class indicators (softmax) or label bits (independent sigmoids).
fn train_probe(xs: &[Vec<f64>], targets: &[Vec<f64>], softmax_head: bool) -> Linear {
    let d = xs[0].len();
    let k = targets[0].len();
    let n = xs.len() as f64;
    let mut w = vec![vec![0.0; d + 1]; k];
    for _ in 0..PROBE_STEPS {
        let mut grad = vec![vec![0.0; d + 1]; k];
        let probe = Linear { w: w.clone() };
        for (x, t) in xs.iter().zip(targets) {
            let z = probe.logits(x);
            let p: Vec<f64> = if softmax_head { softmax(&z) } else { z.iter().map(|&v| sigmoid(v)).collect() };
            for c in 0..k {
                let g = p[c] - t[c];
                for j in 0..d {
                    grad[c][j] += g * x[j];
                }
                grad[c][d] += g;
            }
        }
        for c in 0..k {
            for j in 0..=d {
                let reg = if j < d { PROBE_L2 * w[c][j] } else { 0.0 };
                w[c][j] -= PROBE_LR * (grad[c][j] / n + reg);
            }
        }
    }
    Linear { w }
}

/// Softmax rounded to `f32`; with two classes the smaller entry is the
/// complement of the larger one in `f32` arithmetic.
fn class_probs(z: &[f64]) -> Vec<f64> {
    let p = softmax(z);
    if p.len() == 2 {
        let hi = if p[0] >= p[1] { 0 } else { 1 };
        let top = p[hi] as f32;
        let mut out = vec![0.0; 2];
        out[hi] = top as f64;
        out[1 - hi] = (1.0f32 - top) as f64;
        return out;
    }
    p.into_iter().map(q).collect()
}

fn label_probs(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| q(sigmoid(v))).collect()
}

struct LabelModel {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

/// Labels share structure through three latent directions, so they are
/// correlated within a group.
fn label_model(spec: &SynthSpec) -> LabelModel {
    let mut rng = derive_rng(spec.seed, 6);
    let groups: Vec<Vec<f64>> = (0..3).map(|_| (0..spec.dim).map(|_| normal(&mut rng)).collect()).collect();
    let weights = (0..spec.labels)
        .map(|l| groups[l % 3].iter().map(|g| 0.8 * g + 0.4 * normal(&mut rng)).collect())
        .collect();
    let bias = (0..spec.labels).map(|_| -1.0 + 0.3 * normal(&mut rng)).collect();
    LabelModel { weights, bias }
}

fn draw_labels(spec: &SynthSpec, lm: &LabelModel, x: &[f64], ood: bool, rng: &mut DetRng) -> Vec<bool> {
    let mut bits: Vec<bool> = if ood {
        (0..spec.labels).map(|_| rng.random::<f64>() < 0.3).collect()
    } else {
        lm.weights
            .iter()
            .zip(&lm.bias)
            .map(|(w, b)| {
                let z = w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b;
                rng.random::<f64>() < sigmoid(2.0 * z)
            })
            .collect()
    };
    if !ood && rng.random::<f64>() < spec.overlap {
        let l = rng.random_range(0..spec.labels);
        bits[l] = !bits[l];
    }
    bits
}

struct Drawn {
    xs: Vec<Vec<f64>>,
    labels: Vec<Label>,
    ood: Vec<bool>,
}

fn draw(spec: &SynthSpec, geo: &Geometry, lm: Option<&LabelModel>, role: SplitRole) -> Drawn {
    let (n, stream) = match role {
        SplitRole::Train => (spec.n_train, 2),
        SplitRole::Validation => (spec.n_validation, 3),
        SplitRole::Test => (spec.n_test, 4),
    };
    let ood_count = match role {
        SplitRole::Train => 0,
        _ => (spec.ood_fraction * n as f64).floor() as usize,
    };
    let mut rng = derive_rng(spec.seed, stream);
    let (xs, ys, ood) = sample_points(spec, geo, n, ood_count, &mut rng);
    let labels = match lm {
        None => ys.into_iter().map(Label::Class).collect(),
        Some(lm) => xs.iter().zip(&ood).map(|(x, &o)| Label::Multi(draw_labels(spec, lm, x, o, &mut rng))).collect(),
    };
    Drawn { xs, labels, ood }
}

fn assemble(spec: &SynthSpec, drawn: Drawn, probe: &Linear, mc_probes: &[Linear], role: SplitRole) -> Result<SynthSplit> {
    let multiclass = spec.task == Task::Multiclass;
    let probs_of = |p: &Linear, x: &[f64]| if multiclass { class_probs(&p.logits(x)) } else { label_probs(&p.logits(x)) };
    let records = drawn
        .xs
        .into_iter()
        .zip(drawn.labels)
        .map(|(x, label)| {
            let probs = probs_of(probe, &x);
            let mc: Vec<f64> = mc_probes.iter().flat_map(|p| probs_of(p, &x)).collect();
            Ok(Record {
                probs: ClassProbability::new(probs, spec.task)?,
                mc: Some(McSamples::from_flat(mc_probes.len(), spec.outputs(), mc)?),
                embedding: Some(Embedding::new(x)?),
                label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthSplit { split: LabeledSplit::new(role, spec.task, records)?, ood: drawn.ood })
}

/// Generates train, validation and test splits. Identical specs give
/// identical datasets.
pub fn generate(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let geo = geometry(spec);
    let lm = (spec.task == Task::Multilabel).then(|| label_model(spec));
    let train = draw(spec, &geo, lm.as_ref(), SplitRole::Train);
    let targets: Vec<Vec<f64>> = train
        .labels
        .iter()
        .map(|l| match l {
            Label::Class(c) => (0..spec.classes).map(|k| if k == *c { 1.0 } else { 0.0 }).collect(),
            Label::Multi(bits) => bits.iter().map(|&b| b as u8 as f64).collect(),
        })
        .collect();
    let probe = train_probe(&train.xs, &targets, spec.task == Task::Multiclass);
    let mut mc_rng = derive_rng(spec.seed, 5);
    let mc_probes: Vec<Linear> = (0..spec.mc_passes).map(|_| probe.perturbed(spec.mc_noise, &mut mc_rng)).collect();

    let validation = draw(spec, &geo, lm.as_ref(), SplitRole::Validation);
    let test = draw(spec, &geo, lm.as_ref(), SplitRole::Test);
    Ok(SynthDataset {
        spec: spec.clone(),
        train: assemble(spec, train, &probe, &mc_probes, SplitRole::Train)?,
        validation: assemble(spec, validation, &probe, &mc_probes, SplitRole::Validation)?,
        test: assemble(spec, test, &probe, &mc_probes, SplitRole::Test)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec { n_train: 300, n_validation: 100, n_test: 200, mc_passes: 4, ..SynthSpec::default() }
    }

    #[test]
    fn same_seed_same_data() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
        assert_ne!(generate(&small()).unwrap().test.split, generate(&small().with_seed(8)).unwrap().test.split);
    }

    #[test]
    fn exact_ood_count() {
        let ds = generate(&small()).unwrap();
        assert_eq!(ds.test.ood_count(), 20);
        assert_eq!(ds.validation.ood_count(), 10);
        assert_eq!(ds.train.ood_count(), 0);
    }

    #[test]
    fn infeasible_specs() {
        assert!(matches!(generate(&SynthSpec { n_test: 2, ..small() }), Err(Error::InfeasibleSpec(_))));
        assert!(generate(&SynthSpec { overlap: 1.5, ..small() }).is_err());
        assert!(generate(&SynthSpec { spacing: 0.0, ..small() }).is_err());
    }

    #[test]
    fn binary_probabilities_complement_exactly() {
        let ds = generate(&SynthSpec { classes: 2, ..small() }).unwrap();
        for r in ds.test.split.records() {
            let p = r.probs.as_slice();
            assert_eq!((p[0] as f32) + (p[1] as f32), 1.0f32);
        }
    }

    #[test]
    fn zero_noise_mc_matches_probs() {
        let ds = generate(&SynthSpec { mc_noise: 0.0, ..small() }).unwrap();
        let r = &ds.test.split.records()[0];
        for row in r.mc.as_ref().unwrap().rows() {
            assert_eq!(row, r.probs.as_slice());
        }
    }

    #[test]
    fn multilabel_shapes() {
        let ds = generate(&SynthSpec { labels: 5, ..SynthSpec::multilabel() }.with_seed(3)).unwrap();
        let r = &ds.train.split.records()[0];
        assert_eq!(r.probs.len(), 5);
        assert_eq!(r.label.bits().unwrap().len(), 5);
    }
}
