//! Scorers checked against independent brute-force implementations.

use abstain::baseline::fit_beta_mle;
use abstain::density::mcd::{fast_mcd, support_size, McdOptions};
use abstain::density::{fit_md_from, fit_nuq_from, Bandwidth};
use abstain::hybrid::{HybridConfig, Variant};
use abstain::selective::{build_curve, random_auc, Mode, Span, UnitOutcome};
use abstain::seeded_rng;
use approx::assert_abs_diff_eq;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

fn gaussian_points(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded_rng(seed);
    (0..n).map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect()
}

fn refs(points: &[Vec<f64>]) -> Vec<&[f64]> {
    points.iter().map(Vec::as_slice).collect()
}

/// Determinant of the maximum-likelihood covariance of a 2D subset.
fn det2(points: &[Vec<f64>], subset: &[usize]) -> f64 {
    let h = subset.len() as f64;
    let mx = subset.iter().map(|&i| points[i][0]).sum::<f64>() / h;
    let my = subset.iter().map(|&i| points[i][1]).sum::<f64>() / h;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &i in subset {
        let (dx, dy) = (points[i][0] - mx, points[i][1] - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    (sxx * syy - sxy * sxy) / (h * h)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|&i| m >> i & 1 == 1).collect())
        .collect()
}

#[test]
fn fast_mcd_matches_exhaustive_minimum() {
    for n in 6..=12 {
        for seed in 0..4u64 {
            let mut points = gaussian_points(n, 2, 100 * n as u64 + seed);
            // one gross outlier per fixture
            points[0] = vec![9.0 + seed as f64, -7.0];
            let h = support_size(n, 2, 0.75);
            let best = subsets(n, h).iter().map(|s| det2(&points, s)).fold(f64::INFINITY, f64::min);
            let mut rng = seeded_rng(seed);
            let est = fast_mcd(&refs(&points), &McdOptions::default(), &mut rng).unwrap();
            let fast = det2(&points, &est.support);
            assert!(fast <= 1.05 * best, "n={n} seed={seed}: fast {fast} vs exhaustive {best}");
            assert!(!est.support.contains(&0), "outlier kept in support");
        }
    }
}

#[test]
fn beta_mle_matches_grid_oracle() {
    let mut rng = seeded_rng(2024);
    let dist = Beta::new(5.0, 2.0).unwrap();
    let xs: Vec<f64> = (0..10_000).map(|_| dist.sample(&mut rng)).collect();
    let n = xs.len() as f64;
    let s1: f64 = xs.iter().map(|x| x.ln()).sum();
    let s2: f64 = xs.iter().map(|x| (1.0 - x).ln()).sum();
    let grid: Vec<f64> = (10..=2000).map(|i| i as f64 * 0.01).collect();
    let lgam: Vec<f64> = grid.iter().map(|&v| libm::lgamma(v)).collect();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for (i, &a) in grid.iter().enumerate() {
        for (j, &b) in grid.iter().enumerate() {
            let ll = (a - 1.0) * s1 + (b - 1.0) * s2 - n * (lgam[i] + lgam[j] - libm::lgamma(a + b));
            if ll > best.0 {
                best = (ll, a, b);
            }
        }
    }
    let fit = fit_beta_mle(&xs).unwrap();
    assert!((fit.alpha - best.1).abs() <= 0.15, "alpha {} vs grid {}", fit.alpha, best.1);
    assert!((fit.gamma - best.2).abs() <= 0.15, "gamma {} vs grid {}", fit.gamma, best.2);
    assert!((fit.alpha - 5.0).abs() <= 0.15 && (fit.gamma - 2.0).abs() <= 0.15);
}

/// Direct transcription of the NUQ formula with explicit sums.
fn nuq_naive(train: &[Vec<f64>], labels: &[usize], classes: usize, h: f64, e: &[f64]) -> f64 {
    let d = e.len() as i32;
    let n = train.len() as f64;
    let mut total = 0.0;
    let mut per_class = vec![0.0; classes];
    for (x, &y) in train.iter().zip(labels) {
        let mut sq = 0.0;
        for k in 0..e.len() {
            sq += (x[k] - e[k]) * (x[k] - e[k]);
        }
        let kern = (-sq / (2.0 * h * h)).exp() / (2.0 * std::f64::consts::PI).powf(d as f64 / 2.0);
        total += kern;
        per_class[y] += kern;
    }
    let density = total / (n * h.powi(d));
    let mut max_var: f64 = 0.0;
    for c in 0..classes {
        let mut rest = 0.0;
        for k in 0..classes {
            if k != c {
                rest += per_class[k];
            }
        }
        max_var = max_var.max(per_class[c] / total * (rest / total));
    }
    let c_tilde = h.powi(d) / (2.0 * std::f64::consts::PI.sqrt());
    let tau2 = c_tilde / n * max_var / density;
    2.0 * (2.0 / std::f64::consts::PI).sqrt() * tau2.sqrt()
}

#[test]
fn nuq_matches_naive_double_loop() {
    let mut rng = seeded_rng(5);
    for (k, n) in [5usize, 12, 30, 50].into_iter().enumerate() {
        for d in [1usize, 2, 3] {
            let train = gaussian_points(n, d, 40 + k as u64 * 7 + d as u64);
            let labels: Vec<usize> = (0..n).map(|i| if i < 2 { i } else { rng.random_range(0..2) }).collect();
            let h = 0.5 + k as f64 * 0.3;
            let model = fit_nuq_from(&refs(&train), &labels, 2, Bandwidth::Fixed(h)).unwrap();
            for e in gaussian_points(10, d, 900 + n as u64) {
                let want = nuq_naive(&train, &labels, 2, h, &e);
                let got = model.score(&e).unwrap().value;
                assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "n={n} d={d}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn md_is_invariant_to_linear_maps() {
    let d = 6;
    let n = 500;
    let mut rng = seeded_rng(17);
    let points: Vec<Vec<f64>> = gaussian_points(n, d, 3)
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.into_iter().map(|v| v + 3.0 * (i % 3) as f64).collect())
        .collect();
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let a: Vec<Vec<f64>> =
        (0..d).map(|r| (0..d).map(|c| if r == c { 2.0 } else { 0.0 } + rng.random_range(-0.5..0.5)).collect()).collect();
    let map = |p: &[f64]| -> Vec<f64> { (0..d).map(|r| (0..d).map(|c| a[r][c] * p[c]).sum()).collect() };
    let mapped: Vec<Vec<f64>> = points.iter().map(|p| map(p)).collect();
    let before = fit_md_from(&refs(&points), &labels, 3).unwrap();
    let after = fit_md_from(&refs(&mapped), &labels, 3).unwrap();
    for q in gaussian_points(50, d, 99) {
        let s0 = before.score(&q).unwrap();
        let s1 = after.score(&map(&q)).unwrap();
        assert!((s0 - s1).abs() <= 1e-6 * s0.abs().max(1e-12), "{s0} vs {s1}");
    }
}

#[test]
fn huq_hand_fixture() {
    // validation doubles as the test set; two instances per case
    let ua = [0.10, 0.35, 0.20, 0.50, 0.05, 0.15];
    let ue = [1.0, 2.0, 6.0, 3.0, 5.0, 0.5];
    let cfg = HybridConfig::new(Variant::Huq, &ua, &ue, 0.25, 3.0, 0.30, 1).unwrap();
    let got = cfg.score_all(&ua, &ue).unwrap();
    // clean: in-distribution ranks 1 and 2; ambiguous: 8 + overall aleatoric
    // rank; OOD: 16 + 0.75 R_E + 0.25 R_A
    let want = [1.0, 13.0, 16.0 + 0.75 * 6.0 + 0.25 * 4.0, 14.0, 16.0 + 0.75 * 5.0 + 0.25 * 1.0, 2.0];
    for (g, w) in got.iter().zip(want) {
        assert_abs_diff_eq!(*g, w, epsilon = 1e-12);
    }
}

#[test]
fn huq2_hand_fixture() {
    let ua = [0.3, 0.1, 0.5, 0.2, 0.4];
    let ue = [2.0, 5.0, 1.0, 4.0, 3.0];
    let cfg = HybridConfig::new(Variant::Huq2, &ua, &ue, 0.5, f64::INFINITY, f64::NEG_INFINITY, 2).unwrap();
    let got = cfg.score_all(&ua, &ue).unwrap();
    let want = [5.0, 11.5, 11.5, 7.6, 8.3];
    for (g, w) in got.iter().zip(want) {
        assert_abs_diff_eq!(*g, w, epsilon = 1e-12);
    }
}

fn f1(kept: &[UnitOutcome]) -> f64 {
    let (tp, fp, fn_) = kept.iter().fold((0, 0, 0), |(a, b, c), o| (a + o.tp, b + o.fp, c + o.fn_));
    if 2 * tp + fp + fn_ == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

fn random_pairs(n: usize, seed: u64) -> Vec<UnitOutcome> {
    let mut rng = seeded_rng(seed);
    (0..n).map(|_| UnitOutcome::label_pair(rng.random_bool(0.4), rng.random_bool(0.4))).collect()
}

#[test]
fn f1_oracle_is_best_at_every_prefix() {
    for seed in 0..20u64 {
        let n = 4 + (seed as usize % 9);
        let pairs = random_pairs(n, seed);
        let oracle: Vec<f64> = pairs.iter().map(|o| Mode::F1Micro.oracle_score(o)).collect();
        let curve = build_curve(&oracle, &pairs, Mode::F1Micro).unwrap();
        for (k, point) in curve.points.iter().enumerate() {
            let best = subsets(n, n - k)
                .iter()
                .map(|s| f1(&s.iter().map(|&i| pairs[i]).collect::<Vec<_>>()))
                .fold(f64::NEG_INFINITY, f64::max);
            assert_abs_diff_eq!(point.value, best, epsilon = 1e-12);
        }
    }
}

#[test]
fn f1_random_reference_matches_permutation_average() {
    let pairs = random_pairs(1000, 77);
    let mut rng = seeded_rng(78);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut sum = 0.0;
    for _ in 0..200 {
        order.shuffle(&mut rng);
        let mut scores = vec![0.0; pairs.len()];
        for (rank, &i) in order.iter().enumerate() {
            scores[i] = rank as f64;
        }
        sum += build_curve(&scores, &pairs, Mode::F1Micro).unwrap().auc(Span::Full);
    }
    let analytic = random_auc(&pairs, Mode::F1Micro);
    assert!((sum / 200.0 - analytic).abs() < 0.01, "{} vs {analytic}", sum / 200.0);
}

#[test]
fn risk_curve_matches_naive_recomputation() {
    let mut rng = seeded_rng(3);
    let outcomes: Vec<UnitOutcome> = (0..40).map(|_| UnitOutcome::instance(rng.random_bool(0.7))).collect();
    let scores: Vec<f64> = (0..40).map(|_| (rng.random_range(0..10)) as f64).collect();
    let curve = build_curve(&scores, &outcomes, Mode::Risk).unwrap();
    let mut order: Vec<usize> = (0..40).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    for (k, p) in curve.points.iter().enumerate() {
        let kept = &order[k..];
        let errors = kept.iter().filter(|&&i| outcomes[i].errors == 1).count();
        assert_abs_diff_eq!(p.coverage, kept.len() as f64 / 40.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.value, errors as f64 / kept.len() as f64, epsilon = 1e-15);
    }
}
