use abstain::baseline::{score_delta, score_entropy, score_mp_labelwise, score_sr};
use abstain::density::{fit_ddu_from, fit_md_from};
use abstain::mc::{entropy_of_mean, score_bald, score_pv, score_smp};
use abstain::selective::{build_curve, normalize_auc, rejection_order, Mode, Span, UnitOutcome};
use abstain::{rank, ClassProbability, McSamples};
use proptest::prelude::*;

fn simplex(c: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, c).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

/// Moves mass `lambda` onto the argmax; the result majorizes `p`.
fn sharpen(p: &[f64], lambda: f64) -> Vec<f64> {
    let top = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
    p.iter().enumerate().map(|(i, &v)| (1.0 - lambda) * v + if i == top { lambda } else { 0.0 }).collect()
}

fn outcomes(bits: &[bool]) -> Vec<UnitOutcome> {
    bits.iter().map(|&b| UnitOutcome::instance(b)).collect()
}

proptest! {
    #[test]
    fn rank_is_monotone_and_bounded(mut table in prop::collection::vec(-5.0f64..5.0, 1..40), a in -6.0f64..6.0, b in -6.0f64..6.0) {
        table.sort_by(f64::total_cmp);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (r_lo, r_hi) = (rank(lo, &table).unwrap(), rank(hi, &table).unwrap());
        prop_assert!(r_lo <= r_hi);
        prop_assert!((1..=table.len() + 1).contains(&r_hi));
        prop_assert_eq!(r_lo, table.iter().filter(|&&t| t < lo).count() + 1);
    }

    // a sharper distribution is never more uncertain
    #[test]
    fn probability_scores_respect_sharpening(p in (2usize..7).prop_flat_map(simplex), lambda in 0.0f64..1.0) {
        let q = sharpen(&p, lambda);
        let (p, q) = (ClassProbability::multiclass(p).unwrap(), ClassProbability::multiclass(q).unwrap());
        prop_assert!(score_sr(&q).unwrap() <= score_sr(&p).unwrap() + 1e-12);
        prop_assert!(score_delta(&q).unwrap() <= score_delta(&p).unwrap() + 1e-12);
        prop_assert!(score_entropy(&q).unwrap() <= score_entropy(&p).unwrap() + 1e-12);
    }

    #[test]
    fn mp_peaks_at_one_half(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let closer = if (a - 0.5).abs() <= (b - 0.5).abs() { a } else { b };
        let farther = if closer == a { b } else { a };
        let p = ClassProbability::multilabel(vec![closer, farther]).unwrap();
        prop_assert!(score_mp_labelwise(&p, 0).unwrap() >= score_mp_labelwise(&p, 1).unwrap());
    }

    #[test]
    fn mc_scores_vanish_on_agreement(p in (2usize..6).prop_flat_map(simplex), t in 2usize..10) {
        let rows = vec![p; t];
        let m = McSamples::from_rows(&rows).unwrap();
        prop_assert_eq!(score_bald(&m), 0.0);
        prop_assert_eq!(score_pv(&m).unwrap(), 0.0);
        prop_assert!(score_smp(&m) <= 1.0);
    }

    #[test]
    fn bald_between_zero_and_entropy_of_mean(rows in (2usize..5, 2usize..8).prop_flat_map(|(c, t)| prop::collection::vec(simplex(c), t))) {
        let m = McSamples::from_rows(&rows).unwrap();
        let bald = score_bald(&m);
        prop_assert!(bald >= 0.0);
        prop_assert!(bald <= entropy_of_mean(&m) + 1e-9);
    }

    #[test]
    fn density_scores_grow_along_rays(dir in prop::collection::vec(-1.0f64..1.0, 3), t in 0.5f64..4.0) {
        prop_assume!(dir.iter().map(|v| v * v).sum::<f64>() > 0.01);
        let train: Vec<Vec<f64>> = (0..30).map(|i| {
            let x = i as f64;
            vec![(x * 0.7).sin(), (x * 1.3).cos(), (x * 0.37).sin() * 0.5]
        }).collect();
        let refs: Vec<&[f64]> = train.iter().map(Vec::as_slice).collect();
        let labels = vec![0; 30];
        let md = fit_md_from(&refs, &labels, 1).unwrap();
        let ddu = fit_ddu_from(&refs, &labels, 1).unwrap();
        let centre: Vec<f64> = (0..3).map(|k| train.iter().map(|p| p[k]).sum::<f64>() / 30.0).collect();
        let at = |s: f64| -> Vec<f64> { centre.iter().zip(&dir).map(|(c, d)| c + s * d).collect() };
        prop_assert!(md.score(&at(t)).unwrap() < md.score(&at(2.0 * t)).unwrap());
        prop_assert!(ddu.score(&at(t)).unwrap() < ddu.score(&at(2.0 * t)).unwrap());
    }

    #[test]
    fn curves_ignore_increasing_transforms(
        scores in prop::collection::vec(-3.0f64..3.0, 2..60),
        seed in any::<u64>(),
    ) {
        let bits: Vec<bool> = (0..scores.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        let o = outcomes(&bits);
        let moved: Vec<f64> = scores.iter().map(|s| 10.0 * s.exp() + 3.0).collect();
        prop_assert_eq!(rejection_order(&scores), rejection_order(&moved));
        prop_assert_eq!(build_curve(&scores, &o, Mode::Risk).unwrap(), build_curve(&moved, &o, Mode::Risk).unwrap());
    }

    #[test]
    fn risk_curve_starts_at_error_rate(bits in prop::collection::vec(any::<bool>(), 1..80), scores in prop::collection::vec(0.0f64..1.0, 80)) {
        let o = outcomes(&bits);
        let c = build_curve(&scores[..bits.len()], &o, Mode::Risk).unwrap();
        let errors = bits.iter().filter(|&&b| !b).count();
        prop_assert_eq!(c.full_value().unwrap(), errors as f64 / bits.len() as f64);
        prop_assert_eq!(c.points.len(), bits.len());
    }

    #[test]
    fn normalized_auc_is_at_most_one(bits in prop::collection::vec(any::<bool>(), 2..80), scores in prop::collection::vec(0.0f64..1.0, 80)) {
        let o = outcomes(&bits);
        for span in [Span::Full, Span::First50] {
            let n = normalize_auc(&scores[..bits.len()], &o, Mode::Risk, span).unwrap();
            if let Some(v) = n.normalized {
                prop_assert!(v <= 1.0 + 1e-9, "{v}");
            }
        }
    }
}
