//! Small statistical helpers for Monte Carlo checks.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Proportion {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub successes: u64,
    pub trials: u64,
}

/// Wilson score interval for `successes / trials` at normal quantile `z`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> Proportion {
    assert!(trials > 0, "wilson interval needs at least one trial");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Proportion {
        estimate: p,
        ci_low: (centre - half).max(0.0),
        ci_high: (centre + half).min(1.0),
        successes,
        trials,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Likelihood-ratio goodness-of-fit test of `observed` counts against cell
/// probabilities `expected` (which should sum to one).
pub fn g_test(observed: &[u64], expected: &[f64]) -> GTest {
    assert_eq!(observed.len(), expected.len());
    let n: u64 = observed.iter().sum();
    let n = n as f64;
    let mut g = 0.0;
    for (&o, &p) in observed.iter().zip(expected) {
        if o > 0 {
            let e = n * p;
            g += 2.0 * o as f64 * (o as f64 / e).ln();
        }
    }
    let dof = observed.len().saturating_sub(1).max(1);
    let chi = ChiSquared::new(dof as f64).expect("positive dof");
    GTest {
        statistic: g,
        dof,
        p_value: 1.0 - chi.cdf(g.max(0.0)),
    }
}
