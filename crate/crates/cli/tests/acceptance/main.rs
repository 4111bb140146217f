//! One test per primary acceptance criterion. Each prints a single
//! `[PASS]`/`[FAIL]` line to stderr (bypassing the test harness's output
//! capture) and then asserts.

use std::io::Write;
use std::time::Duration;

mod determinism;
mod evaluation;
mod feature_math;
mod gradient;
mod layering;
mod service;
mod skill;
mod training;

/// Prints the verdict line and fails the test when `passed` is false.
pub fn verdict(criterion: &str, passed: bool, detail: impl AsRef<str>) {
    let tag = if passed { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] {criterion}: {}", detail.as_ref());
    assert!(passed, "{criterion} failed: {}", detail.as_ref());
}

pub fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}
