use discourse_core::evaluation::{
    binary_auc, classify_direction, compute_metrics, direction_probabilities, rolling_stats, Direction, RollingStats,
};
use discourse_core::forecast::StudentTParams;
use proptest::prelude::*;

const CLASSES: [Direction; 3] = [Direction::Increase, Direction::Stable, Direction::Decrease];

fn labels(len: usize) -> impl Strategy<Value = Vec<Direction>> {
    prop::collection::vec(prop::sample::select(CLASSES.to_vec()), len)
}

fn labelled_pairs() -> impl Strategy<Value = (Vec<Direction>, Vec<Direction>)> {
    (1usize..60).prop_flat_map(|n| (labels(n), labels(n)))
}

proptest! {
    #[test]
    fn class_scores_are_a_distribution(
        mu in -20.0f64..20.0,
        sigma in 1e-3f64..10.0,
        nu in 2.01f64..60.0,
        mean in -20.0f64..20.0,
        std in 0.0f64..5.0,
    ) {
        let c = direction_probabilities(&StudentTParams::new(mu, sigma, nu), RollingStats { mean, std });
        for p in [c.p_increase, c.p_stable, c.p_decrease] {
            prop_assert!((0.0..=1.0).contains(&p), "{c:?}");
        }
        prop_assert!((c.p_increase + c.p_stable + c.p_decrease - 1.0).abs() < 1e-12, "{c:?}");
        prop_assert_eq!(c.degenerate_band, std == 0.0);
    }

    #[test]
    fn macro_f1_ignores_class_names_and_order(
        (predicted, truth) in labelled_pairs(),
        perm in Just(CLASSES.to_vec()).prop_shuffle(),
        rotate in 0usize..60,
    ) {
        let base = compute_metrics(&predicted, &truth).unwrap();
        let rename = |v: &[Direction]| v.iter().map(|d| perm[d.index()]).collect::<Vec<_>>();
        let renamed = compute_metrics(&rename(&predicted), &rename(&truth)).unwrap();
        prop_assert!((base.macro_f1 - renamed.macro_f1).abs() < 1e-12);
        prop_assert_eq!(base.accuracy, renamed.accuracy);

        let k = rotate % truth.len();
        let (mut p, mut t) = (predicted.clone(), truth.clone());
        p.rotate_left(k);
        t.rotate_left(k);
        prop_assert_eq!(compute_metrics(&p, &t).unwrap(), base);
    }

    #[test]
    fn perfect_predictions_have_unit_accuracy(truth in (1usize..40).prop_flat_map(labels)) {
        let m = compute_metrics(&truth, &truth).unwrap();
        prop_assert_eq!(m.accuracy, 1.0);
        for d in CLASSES {
            let c = m.class(d);
            prop_assert_eq!(c.f1, if c.support > 0 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn auc_is_invariant_under_monotone_maps(
        items in prop::collection::vec((-20i32..20, any::<bool>()), 2..40),
    ) {
        let scores: Vec<f64> = items.iter().map(|(s, _)| f64::from(*s)).collect();
        let positive: Vec<bool> = items.iter().map(|(_, p)| *p).collect();
        let base = binary_auc(&scores, &positive);
        // Strictly increasing and exact on small integers.
        let mapped: Vec<f64> = scores.iter().map(|s| s * s * s + 2.0 * s + 7.0).collect();
        prop_assert_eq!(binary_auc(&mapped, &positive), base);
        // Reversing the order mirrors the AUC.
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        if let (Some(a), Some(b)) = (base, binary_auc(&flipped, &positive)) {
            prop_assert!((a + b - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        } else {
            prop_assert!(positive.iter().all(|&p| p) || positive.iter().all(|&p| !p));
        }
    }

    #[test]
    fn direction_calls_are_translation_invariant(
        y in -100i32..100,
        mean in -100i32..100,
        std in 0i32..30,
        shift in -1000i32..1000,
    ) {
        let (y, mean, std, shift) = (f64::from(y), f64::from(mean), f64::from(std), f64::from(shift));
        let a = classify_direction(y, RollingStats { mean, std });
        let b = classify_direction(y + shift, RollingStats { mean: mean + shift, std });
        prop_assert_eq!(a, b);
        // The same call through the f32 instantiation, exact on small integers.
        let c = classify_direction(y as f32, RollingStats { mean: mean as f32, std: std as f32 });
        prop_assert_eq!(a, c);
    }

    #[test]
    fn rolling_stats_bound_the_window(window in prop::collection::vec(-50.0f64..50.0, 1..60)) {
        let s = rolling_stats(&window).unwrap();
        let lo = window.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(s.mean >= lo - 1e-9 && s.mean <= hi + 1e-9);
        prop_assert!(s.std >= 0.0 && s.std <= (hi - lo) / 2.0 + 1e-9);
    }

    #[test]
    fn student_t_quantile_inverts_cdf(
        mu in -10.0f64..10.0,
        sigma in 1e-2f64..10.0,
        nu in 2.01f64..80.0,
        p in 1e-3f64..0.999,
    ) {
        let t = StudentTParams::new(mu, sigma, nu);
        let q = t.quantile(p);
        prop_assert!((t.cdf(q) - p).abs() < 1e-9, "cdf(quantile({p})) = {}", t.cdf(q));
        prop_assert!(t.quantile((p + 1e-3).min(0.9995)) >= q);
    }
}
