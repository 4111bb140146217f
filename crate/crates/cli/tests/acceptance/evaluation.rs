//! Direction calls, label metrics and AUC against independent oracles.

use discourse_core::evaluation::{
    auc_ovr, binary_auc, classify_direction, compute_metrics, ClassScores, Direction, RollingStats,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use Direction::{Decrease as D, Increase as I, Stable as S};

use crate::verdict;

const TRIPLES: usize = 1000;
const AUC_FIXTURES: usize = 400;
/// A mean of three rounded ratios cannot always equal the exact rational.
const MACRO_ULPS: u64 = 4;

fn within_ulps(a: f64, b: f64) -> bool {
    a == b || (a.signum() == b.signum() && a.to_bits().abs_diff(b.to_bits()) <= MACRO_ULPS)
}

/// Three-branch rule on the band edges.
fn oracle_direction(y: f64, mean: f64, std: f64) -> Direction {
    let upper = mean + 2.0 * std;
    let lower = mean - 2.0 * std;
    if y > upper {
        I
    } else if y < lower {
        D
    } else {
        S
    }
}

/// Share of (positive, negative) pairs ranked correctly, ties counting ½.
fn oracle_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0usize;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if positive[i] && !positive[j] {
                pairs += 1;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    (pairs > 0).then(|| wins / pairs as f64)
}

fn direction_triples(failures: &mut Vec<String>) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut on_edge = 0;
    for k in 0..TRIPLES {
        let mean: f64 = rng.random_range(-50.0..50.0);
        let std: f64 = if k % 10 == 0 { 0.0 } else { rng.random_range(0.0..10.0) };
        let y = match k % 4 {
            // Exactly on an edge: the boundary is Stable.
            0 => {
                on_edge += 1;
                if rng.random_bool(0.5) {
                    mean + 2.0 * std
                } else {
                    mean - 2.0 * std
                }
            }
            _ => mean + std * rng.random_range(-4.0..4.0) + rng.random_range(-1.0..1.0),
        };
        let got = classify_direction(y, RollingStats { mean, std });
        let want = oracle_direction(y, mean, std);
        if got != want {
            failures.push(format!("classify({y}, {mean}, {std}) = {got}, oracle {want}"));
        }
        if k % 4 == 0 && got != S {
            failures.push(format!("edge value {y} on band ({mean}, {std}) called {got}"));
        }
    }
    on_edge
}

struct MetricsFixture {
    name: &'static str,
    truth: Vec<Direction>,
    predicted: Vec<Direction>,
    confusion: [[usize; 3]; 3],
    /// (precision, recall, f1) for Increase, Stable, Decrease.
    per_class: [(f64, f64, f64); 3],
    macro_f1: f64,
    accuracy: f64,
}

fn metrics_fixtures() -> Vec<MetricsFixture> {
    vec![
        MetricsFixture {
            name: "one miss",
            truth: vec![I, I, S, D],
            predicted: vec![I, S, S, D],
            confusion: [[1, 1, 0], [0, 1, 0], [0, 0, 1]],
            per_class: [(1.0, 0.5, 2.0 / 3.0), (0.5, 1.0, 2.0 / 3.0), (1.0, 1.0, 1.0)],
            macro_f1: 7.0 / 9.0,
            accuracy: 0.75,
        },
        MetricsFixture {
            name: "always stable",
            truth: vec![I, S, D, S, I],
            predicted: vec![S, S, S, S, S],
            confusion: [[0, 2, 0], [0, 2, 0], [0, 1, 0]],
            per_class: [(0.0, 0.0, 0.0), (0.4, 1.0, 4.0 / 7.0), (0.0, 0.0, 0.0)],
            macro_f1: 4.0 / 21.0,
            accuracy: 0.4,
        },
        MetricsFixture {
            name: "perfect",
            truth: vec![I, S, D, D, S],
            predicted: vec![I, S, D, D, S],
            confusion: [[1, 0, 0], [0, 2, 0], [0, 0, 2]],
            per_class: [(1.0, 1.0, 1.0); 3],
            macro_f1: 1.0,
            accuracy: 1.0,
        },
        MetricsFixture {
            name: "swapped extremes",
            truth: vec![I, D],
            predicted: vec![D, I],
            confusion: [[0, 0, 1], [0, 0, 0], [1, 0, 0]],
            per_class: [(0.0, 0.0, 0.0); 3],
            macro_f1: 0.0,
            accuracy: 0.0,
        },
        MetricsFixture {
            name: "full matrix",
            truth: vec![I, I, I, I, I, S, S, S, S, S, S, D, D, D],
            predicted: vec![I, I, I, S, D, I, I, S, S, S, S, S, D, D],
            confusion: [[3, 1, 1], [2, 4, 0], [0, 1, 2]],
            per_class: [
                (0.6, 0.6, 0.6),
                (2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0),
                (2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0),
            ],
            macro_f1: 29.0 / 45.0,
            accuracy: 9.0 / 14.0,
        },
    ]
}

fn check_metrics(failures: &mut Vec<String>) -> usize {
    let fixtures = metrics_fixtures();
    for f in &fixtures {
        let m = compute_metrics(&f.predicted, &f.truth).unwrap();
        if m.confusion.counts != f.confusion {
            failures.push(format!("{}: confusion {:?}", f.name, m.confusion.counts));
        }
        for (d, want) in [I, S, D].into_iter().zip(f.per_class) {
            let c = m.class(d);
            if (c.precision, c.recall, c.f1) != want {
                failures.push(format!(
                    "{}: {d} (p, r, f1) = {:?}, want {want:?}",
                    f.name,
                    (c.precision, c.recall, c.f1)
                ));
            }
        }
        if !within_ulps(m.macro_f1, f.macro_f1) || m.accuracy != f.accuracy {
            failures.push(format!(
                "{}: macro F1 {} accuracy {}, want {} {}",
                f.name, m.macro_f1, m.accuracy, f.macro_f1, f.accuracy
            ));
        }
    }
    fixtures.len()
}

fn check_auc(failures: &mut Vec<String>) -> usize {
    // Hand fixtures first.
    let hand: [(&[f64], &[bool], f64); 4] = [
        (&[0.9, 0.4, 0.6], &[true, false, false], 1.0),
        (&[0.1, 0.4, 0.6], &[true, false, false], 0.0),
        (&[0.5, 0.5, 0.5, 0.5], &[true, false, true, false], 0.5),
        (&[0.2, 0.8, 0.6, 0.4], &[true, true, false, false], 0.5),
    ];
    for (scores, positive, want) in hand {
        if binary_auc(scores, positive) != Some(want) {
            failures.push(format!(
                "AUC {scores:?} {positive:?} = {:?}, want {want}",
                binary_auc(scores, positive)
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut checked = hand.len();
    for _ in 0..AUC_FIXTURES {
        let n = rng.random_range(1..=10);
        // A coarse grid forces ties.
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..5u8)) / 4.0).collect();
        let positive: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let got = binary_auc(&scores, &positive);
        let want = oracle_auc(&scores, &positive);
        if got != want {
            failures.push(format!("AUC {scores:?} {positive:?} = {got:?}, oracle {want:?}"));
        }
        checked += 1;

        // One-vs-rest over class probabilities.
        let truth: Vec<Direction> = (0..n).map(|_| [I, S, D][rng.random_range(0..3)]).collect();
        let probs: Vec<ClassScores> = (0..n)
            .map(|_| {
                let a = f64::from(rng.random_range(0..4u8)) / 8.0;
                let b = f64::from(rng.random_range(0..4u8)) / 8.0;
                ClassScores {
                    p_increase: a,
                    p_stable: 1.0 - a - b,
                    p_decrease: b,
                    degenerate_band: false,
                }
            })
            .collect();
        let per: Vec<Option<f64>> = [I, S, D]
            .iter()
            .map(|&d| {
                let s: Vec<f64> = probs.iter().map(|p| p.get(d)).collect();
                let pos: Vec<bool> = truth.iter().map(|&t| t == d).collect();
                oracle_auc(&s, &pos)
            })
            .collect();
        match auc_ovr(&probs, &truth) {
            Ok(r) => {
                if [r.increase, r.stable, r.decrease] != [per[0], per[1], per[2]] {
                    failures.push(format!(
                        "one-vs-rest AUC {:?} != oracle {per:?}",
                        [r.increase, r.stable, r.decrease]
                    ));
                }
            }
            Err(_) if per.iter().all(Option::is_none) => {}
            Err(e) => failures.push(format!("one-vs-rest AUC failed: {e}")),
        }
        checked += 1;
    }
    checked
}

#[test]
fn evaluation_matches_oracles() {
    let mut failures = Vec::new();
    let on_edge = direction_triples(&mut failures);
    let metric_fixtures = check_metrics(&mut failures);
    let auc_fixtures = check_auc(&mut failures);
    verdict(
        "evaluation oracle",
        failures.is_empty(),
        format!(
            "{TRIPLES} direction triples ({on_edge} exactly on a band edge), {metric_fixtures} confusion fixtures, \
             {auc_fixtures} AUC fixtures (<= 10 items) exact (macro averages within {MACRO_ULPS} ulp){}",
            if failures.is_empty() {
                String::new()
            } else {
                format!(
                    "; {} mismatches, first: {}",
                    failures.len(),
                    failures[..failures.len().min(3)].join("; ")
                )
            }
        ),
    );
}
