//! Student-t NLL gradients against central finite differences, through both
//! the closed-form (μ, σ, ν) gradient and the autodiff tape's head path.

use std::time::Instant;

use discourse_core::forecast::tape::{HeadSpec, Matrix, Tape};
use discourse_core::forecast::StudentTParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{secs, verdict};

const POINTS: usize = 150;
/// Share of points placed just above the ν lower bound.
const NEAR_BOUND: usize = 50;
const REL_TOL: f64 = 1e-4;
/// Gradients smaller than this are compared absolutely.
const ABS_FLOOR: f64 = 1e-6;
const SIGMA_FLOOR: f64 = 1e-3;
const NU_FLOOR: f64 = 1e-2;

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

/// Fourth-order central difference; the wider step keeps rounding noise well
/// below the tolerance for the tiny raw-ν gradients near the bound.
fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-4 * x.abs().max(1.0);
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// Worst relative error over the three closed-form partials.
fn closed_form(rng: &mut ChaCha8Rng, near_bound: bool) -> (f64, f64) {
    let mu = rng.random_range(-3.0..3.0);
    let sigma = rng.random_range(-3.0f64..2.0).exp();
    let nu = if near_bound {
        2.0 + NU_FLOOR + rng.random_range(1e-6..1e-3)
    } else {
        rng.random_range(0.7f64..4.0).exp()
    };
    let y = mu + sigma * rng.random_range(-6.0..6.0);
    let p = StudentTParams::new(mu, sigma, nu);
    let g = p.nll_gradient(y).unwrap();
    let nll = |m: f64, s: f64, n: f64| StudentTParams::new(m, s, n).nll(y).unwrap();
    let worst = [
        rel_err(g.mu, central(|m| nll(m, sigma, nu), mu)),
        rel_err(g.sigma, central(|s| nll(mu, s, nu), sigma)),
        rel_err(g.nu, central(|n| nll(mu, sigma, n), nu)),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    (worst, nu)
}

/// Worst relative error over every raw head output of a 2-step, 2-target
/// loss, as the trainer computes it.
fn tape_route(rng: &mut ChaCha8Rng, near_bound: bool) -> (f64, f64) {
    let targets = 2;
    let steps = 2;
    let head = HeadSpec {
        targets,
        sigma_floor: SIGMA_FLOOR,
        nu_floor: NU_FLOOR,
    };
    let mut raw = Vec::with_capacity(steps * 3 * targets);
    for _ in 0..steps {
        raw.extend((0..targets).map(|_| rng.random_range(-2.0..2.0)));
        raw.extend((0..targets).map(|_| rng.random_range(-3.0..2.0)));
        raw.extend((0..targets).map(|_| {
            if near_bound {
                rng.random_range(-14.0..-7.0)
            } else {
                rng.random_range(-3.0..4.0)
            }
        }));
    }
    let y: Vec<f64> = (0..steps * targets).map(|_| rng.random_range(-4.0..4.0)).collect();
    let raw = Matrix::from_vec(steps, 3 * targets, raw);
    let y = Matrix::from_vec(steps, targets, y);

    let loss = |m: &Matrix<f64>| {
        let mut tape = Tape::new();
        let r = tape.constant(m.clone());
        let l = tape.student_nll(r, y.clone(), head);
        tape.value(l).get(0, 0)
    };
    let mut tape = Tape::new();
    let r = tape.param(0, &raw);
    let l = tape.student_nll(r, y.clone(), head);
    let grad = tape.backward(l, 1).remove(0).expect("head output is on the tape");

    let mut worst = 0.0f64;
    let mut min_nu = f64::INFINITY;
    for s in 0..steps {
        for j in 0..targets {
            let nu_raw = raw.get(s, 2 * targets + j);
            let sp = if nu_raw > 0.0 {
                nu_raw + (-nu_raw).exp().ln_1p()
            } else {
                nu_raw.exp().ln_1p()
            };
            min_nu = min_nu.min(2.0 + NU_FLOOR + sp);
        }
        for c in 0..3 * targets {
            let numeric = central(
                |v| {
                    let mut m = raw.clone();
                    m.data[s * 3 * targets + c] = v;
                    loss(&m)
                },
                raw.get(s, c),
            );
            worst = worst.max(rel_err(grad.get(s, c), numeric));
        }
    }
    (worst, min_nu)
}

#[test]
fn student_t_gradients_match_finite_differences() {
    let timer = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4_511);
    let mut worst_closed = 0.0f64;
    let mut worst_tape = 0.0f64;
    let mut min_nu = f64::INFINITY;
    for i in 0..POINTS {
        let near = i < NEAR_BOUND;
        let (e, nu) = closed_form(&mut rng, near);
        worst_closed = worst_closed.max(e);
        min_nu = min_nu.min(nu);
        let (e, nu) = tape_route(&mut rng, near);
        worst_tape = worst_tape.max(e);
        min_nu = min_nu.min(nu);
    }
    let elapsed = timer.elapsed();
    let bound = 2.0 + NU_FLOOR;
    let passed =
        worst_closed <= REL_TOL && worst_tape <= REL_TOL && min_nu - bound < 1e-4 && elapsed.as_secs_f64() < 30.0;
    verdict(
        "gradient check",
        passed,
        format!(
            "{POINTS} closed-form points + {POINTS} tape points ({NEAR_BOUND} each with nu within 1e-3 of {bound}; min nu {min_nu:.6}), \
             max rel err closed-form {worst_closed:.2e}, tape {worst_tape:.2e} (tol {REL_TOL:e}), {} [budget 30s]",
            secs(elapsed)
        ),
    );
}
