//! Exact laws and curves that the simulated couplings are checked against.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coupling::{CouplingPlan, CouplingRun, PlanError, RunOptions};
use crate::group::{ElementOrder, GroupElement};
use crate::mass::Mass;
use crate::measure::{AtomGuard, AtomicMeasure, MeasureError};
use crate::rng::RunSeed;
use crate::stats::{g_test, wilson, GTest, Z_95};

/// Slack allowed on the coupling inequality.
pub const INEQUALITY_TOL: f64 = 1e-10;

/// Default lower end of decay fit ranges; smaller n are pre-asymptotic.
pub const DEFAULT_FIT_LO: usize = 32;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("cyclic order {0} < 2: the shift is the identity")]
    TrivialOrder(u64),
    #[error("laziness {0} outside [0, 1)")]
    Laziness(f64),
    #[error("horizon must be at least one block")]
    ZeroHorizon,
    #[error("curve reaches zero at n = {n}; it has converged and cannot be fitted")]
    Converged { n: usize },
    #[error("fit range [{lo}, {hi}] holds fewer than two curve points")]
    InsufficientRange { lo: usize, hi: usize },
    #[error("fitted curve does not decay ({0})")]
    NoDecay(String),
    #[error("hitting-time law covers {have} blocks, {need} needed")]
    HorizonTooShort { have: usize, need: usize },
    #[error("every run is censored before n = {n}")]
    AllCensored { n: u64 },
    #[error("no runs supplied")]
    NoRuns,
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Order of `x` as seen by the walk on `⟨x⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum WalkOrder {
    Finite(u64),
    Infinite,
}

impl From<ElementOrder> for WalkOrder {
    fn from(o: ElementOrder) -> Self {
        match o {
            ElementOrder::Finite(d) => WalkOrder::Finite(d),
            ElementOrder::InfiniteOrBeyondCap => WalkOrder::Infinite,
        }
    }
}

/// Law of the hitting time of 0 for the lazy nearest-neighbour walk on
/// `ℤ/dℤ` (or `ℤ`) started at 1.
#[derive(Clone, Debug, Serialize)]
pub struct HittingTimeLaw {
    pub order: WalkOrder,
    pub laziness: f64,
    /// `tail[k] = P(τ > k)` for `k = 0..=horizon`.
    pub tail: Vec<f64>,
    /// `absorbed[k] = P(τ ≤ k)`, accumulated separately from `tail`.
    pub absorbed: Vec<f64>,
}

impl HittingTimeLaw {
    pub fn horizon(&self) -> usize {
        self.tail.len() - 1
    }

    /// `P(T > n)` for a coupling time `T = n0·τ`.
    pub fn coupling_tail(&self, n: usize, n0: usize) -> Option<f64> {
        self.tail.get(n / n0).copied()
    }
}

pub fn hitting_time_tail(
    order: WalkOrder,
    laziness: f64,
    horizon_blocks: usize,
) -> Result<HittingTimeLaw, AnalysisError> {
    if !(0.0..1.0).contains(&laziness) {
        return Err(AnalysisError::Laziness(laziness));
    }
    if horizon_blocks == 0 {
        return Err(AnalysisError::ZeroHorizon);
    }
    let half = (1.0 - laziness) / 2.0;
    // State index = position (exponent of x); index 0 is unused (absorbed).
    let (size, cyclic) = match order {
        WalkOrder::Finite(d) if d < 2 => return Err(AnalysisError::TrivialOrder(d)),
        WalkOrder::Finite(d) => (d as usize, true),
        // Positions reachable in k steps from 1 are at most 1 + k.
        WalkOrder::Infinite => (horizon_blocks + 2, false),
    };
    let top = size - 1;
    let mut mass = vec![0.0; size];
    mass[1] = 1.0;
    let mut tail = Vec::with_capacity(horizon_blocks + 1);
    let mut absorbed = Vec::with_capacity(horizon_blocks + 1);
    tail.push(1.0);
    absorbed.push(0.0);
    let mut absorbed_total = 0.0;
    let mut next = vec![0.0; size];
    for _ in 0..horizon_blocks {
        next.iter_mut().for_each(|v| *v = 0.0);
        for p in 1..size {
            let m = mass[p];
            if m == 0.0 {
                continue;
            }
            next[p] += laziness * m;
            // Down move.
            if p == 1 {
                absorbed_total += half * m;
            } else {
                next[p - 1] += half * m;
            }
            // Up move.
            if p == top {
                if cyclic {
                    absorbed_total += half * m;
                }
                // Infinite case: p == top is unreachable within the horizon.
            } else {
                next[p + 1] += half * m;
            }
        }
        std::mem::swap(&mut mass, &mut next);
        tail.push(mass.iter().sum());
        absorbed.push(absorbed_total);
    }
    Ok(HittingTimeLaw {
        order,
        laziness,
        tail,
        absorbed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TvPoint {
    pub n: usize,
    pub tv: f64,
}

/// `‖μⁿ − shift(x, μⁿ)‖` for `n = 1..=n_max`, in the measure's own mass
/// representation.
pub fn exact_tv_values<M: Mass>(
    mu: &AtomicMeasure<M>,
    x: &GroupElement,
    n_max: usize,
    guard: AtomGuard,
) -> Result<Vec<M>, AnalysisError> {
    let mut out = Vec::with_capacity(n_max);
    let mut pow = mu.clone();
    for n in 1..=n_max {
        if n > 1 {
            pow = pow.convolve(mu, guard)?;
        }
        out.push(pow.tv_distance(&pow.shift(x)?)?);
    }
    Ok(out)
}

pub fn exact_tv_curve<M: Mass>(
    mu: &AtomicMeasure<M>,
    x: &GroupElement,
    n_max: usize,
    guard: AtomGuard,
) -> Result<Vec<TvPoint>, AnalysisError> {
    Ok(exact_tv_values(mu, x, n_max, guard)?
        .iter()
        .enumerate()
        .map(|(i, tv)| TvPoint { n: i + 1, tv: tv.to_f64() })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DecayKind {
    PowerLaw,
    Geometric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum DecayModel {
    PowerLaw { c: f64, exponent: f64 },
    Geometric { c: f64, rho: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub model: DecayModel,
    pub fit_range: (usize, usize),
    /// Largest absolute residual of the log-linear fit.
    pub residual: f64,
    pub points: usize,
}

/// Least squares on `(log n, log tv)` (power law) or `(n, log tv)`
/// (geometric), restricted to `lo ≤ n ≤ hi`.
pub fn fit_decay(
    curve: &[TvPoint],
    kind: DecayKind,
    (lo, hi): (usize, usize),
) -> Result<DecayFit, AnalysisError> {
    let pts: Vec<&TvPoint> = curve.iter().filter(|p| p.n >= lo && p.n <= hi).collect();
    if let Some(p) = pts.iter().find(|p| p.tv.is_nan() || p.tv <= 0.0) {
        return Err(AnalysisError::Converged { n: p.n });
    }
    if pts.len() < 2 {
        return Err(AnalysisError::InsufficientRange { lo, hi });
    }
    let xs: Vec<f64> = pts
        .iter()
        .map(|p| match kind {
            DecayKind::PowerLaw => (p.n as f64).ln(),
            DecayKind::Geometric => p.n as f64,
        })
        .collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.tv.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    let c = intercept.exp();
    let model = match kind {
        DecayKind::PowerLaw => {
            if slope >= 0.0 {
                return Err(AnalysisError::NoDecay(format!("exponent {slope}")));
            }
            DecayModel::PowerLaw { c, exponent: slope }
        }
        DecayKind::Geometric => {
            let rho = slope.exp();
            if !(rho > 0.0 && rho < 1.0) {
                return Err(AnalysisError::NoDecay(format!("rho {rho}")));
            }
            DecayModel::Geometric { c, rho }
        }
    };
    Ok(DecayFit {
        model,
        fit_range: (lo, hi),
        residual,
        points: pts.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub n: usize,
    pub tv: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub holds: bool,
    /// `min_n (2·P(T > n) − tv_n)`.
    pub worst_slack: f64,
    pub worst_n: usize,
    pub violations: Vec<Violation>,
}

/// Checks `tv_n ≤ 2·P(T > n) + 1e-10` with `P(T > n) = tail[⌊n/n0⌋]`.
///
/// `n0 = 0` stands for the identity shift, where `T = 0` and every bound is 0.
pub fn verify_coupling_inequality(
    curve: &[TvPoint],
    law: Option<&HittingTimeLaw>,
    n0: usize,
) -> Result<InequalityReport, AnalysisError> {
    let mut worst_slack = f64::INFINITY;
    let mut worst_n = 0;
    let mut violations = Vec::new();
    for p in curve {
        let bound = match (n0, law) {
            (0, _) | (_, None) => 0.0,
            (n0, Some(law)) => {
                2.0 * law
                    .coupling_tail(p.n, n0)
                    .ok_or(AnalysisError::HorizonTooShort {
                        have: law.horizon(),
                        need: p.n / n0,
                    })?
            }
        };
        let slack = bound - p.tv;
        if slack < worst_slack {
            worst_slack = slack;
            worst_n = p.n;
        }
        if p.tv > bound + INEQUALITY_TOL {
            violations.push(Violation { n: p.n, tv: p.tv, bound });
        }
    }
    Ok(InequalityReport {
        holds: violations.is_empty(),
        worst_slack,
        worst_n,
        violations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailEstimate {
    pub n: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub used: u64,
    /// Runs censored before `n`, left out of the estimate.
    pub excluded: u64,
}

/// Monte Carlo estimate of `P(T > n)` with a Wilson 95% interval.
pub fn empirical_tail(runs: &[CouplingRun], n: u64) -> Result<TailEstimate, AnalysisError> {
    if runs.is_empty() {
        return Err(AnalysisError::NoRuns);
    }
    let (mut hits, mut used, mut excluded) = (0u64, 0u64, 0u64);
    for r in runs {
        match r.time.exceeds(n) {
            Some(true) => {
                hits += 1;
                used += 1;
            }
            Some(false) => used += 1,
            None => excluded += 1,
        }
    }
    if used == 0 {
        return Err(AnalysisError::AllCensored { n });
    }
    let w = wilson(hits, used, Z_95);
    Ok(TailEstimate {
        n,
        estimate: w.estimate,
        ci_low: w.ci_low,
        ci_high: w.ci_high,
        used,
        excluded,
    })
}

/// [`empirical_tail`] for every `n` in `0..=n_max`, in one pass over the runs.
pub fn empirical_tail_curve(runs: &[CouplingRun], n_max: u64) -> Result<Vec<TailEstimate>, AnalysisError> {
    if runs.is_empty() {
        return Err(AnalysisError::NoRuns);
    }
    let len = n_max as usize + 2;
    // finite_at[t]: runs with T = t (t > n_max lumped into the last slot);
    // censored_at[h]: runs censored at horizon h (same lumping).
    let mut finite_at = vec![0u64; len];
    let mut censored_at = vec![0u64; len];
    for r in runs {
        match r.time {
            crate::coupling::CouplingTime::Finite(t) => finite_at[(t as usize).min(len - 1)] += 1,
            crate::coupling::CouplingTime::CensoredAt(h) => censored_at[(h as usize).min(len - 1)] += 1,
        }
    }
    let total = runs.len() as u64;
    let mut out = Vec::with_capacity(len - 1);
    let (mut finite_le, mut censored_lt) = (0u64, 0u64);
    for n in 0..=n_max as usize {
        finite_le += finite_at[n];
        if n > 0 {
            censored_lt += censored_at[n - 1];
        }
        let used = total - censored_lt;
        if used == 0 {
            return Err(AnalysisError::AllCensored { n: n as u64 });
        }
        let hits = used - finite_le;
        let w = wilson(hits, used, Z_95);
        out.push(TailEstimate {
            n: n as u64,
            estimate: w.estimate,
            ci_low: w.ci_low,
            ci_high: w.ci_high,
            used,
            excluded: censored_lt,
        });
    }
    Ok(out)
}

/// `sup_k |P̂(T > k·n0) − tail[k]|` over the blocks both cover.
pub fn tail_sup_distance(empirical: &[TailEstimate], law: &HittingTimeLaw, n0: usize) -> f64 {
    empirical
        .iter()
        .filter(|e| (e.n as usize).is_multiple_of(n0))
        .filter_map(|e| law.tail.get(e.n as usize / n0).map(|t| (e.estimate - t).abs()))
        .fold(0.0, f64::max)
}

/// One row of the curve CSV; empty cells for absent values.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CurveRow {
    pub n: usize,
    pub tv: Option<f64>,
    pub bound: Option<f64>,
    pub empirical: Option<TailEstimate>,
}

pub const CURVE_CSV_HEADER: &str = "n,tv,bound_2PTgtn,empirical_tail,ci_low,ci_high";
pub const TAIL_CSV_HEADER: &str = "n,empirical_tail,ci_low,ci_high";

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_curve_csv<W: Write>(mut w: W, rows: &[CurveRow]) -> io::Result<()> {
    writeln!(w, "{CURVE_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.n,
            cell(r.tv),
            cell(r.bound),
            cell(r.empirical.map(|e| e.estimate)),
            cell(r.empirical.map(|e| e.ci_low)),
            cell(r.empirical.map(|e| e.ci_high)),
        )?;
    }
    Ok(())
}

pub fn write_tail_csv<W: Write>(mut w: W, tails: &[TailEstimate]) -> io::Result<()> {
    writeln!(w, "{TAIL_CSV_HEADER}")?;
    for t in tails {
        writeln!(w, "{},{},{},{}", t.n, t.estimate, t.ci_low, t.ci_high)?;
    }
    Ok(())
}

/// Goodness of fit of the partner walk's first `prefix_len` steps against
/// i.i.d. `μ` steps, over `runs` seeded couplings.
///
/// Cells are all `|supp μ|^prefix_len` step sequences; the expected
/// probability of a cell is the product of its step masses.
pub fn marginal_prefix_test(
    plan: &CouplingPlan,
    opts: &RunOptions,
    master: u64,
    runs: u64,
    prefix_len: usize,
) -> Result<GTest, PlanError> {
    let atoms = plan.mu.sorted_atoms();
    let k = atoms.len();
    let cells = k.checked_pow(prefix_len as u32).filter(|&c| c <= 1 << 20).ok_or_else(|| {
        PlanError::Invariant(format!("{k}^{prefix_len} prefix cells is too many"))
    })?;
    let index: BTreeMap<&GroupElement, usize> = atoms.iter().enumerate().map(|(i, (g, _))| (g, i)).collect();
    let opts = RunOptions {
        materialize_steps: Some(prefix_len),
        ..opts.clone()
    };
    let cell_of = (0..runs)
        .into_par_iter()
        .map(|i| {
            let run = plan.run(&opts, RunSeed::new(master, i))?;
            if run.steps_sx.len() < prefix_len {
                return Err(PlanError::Invariant("partner prefix not materialized".into()));
            }
            Ok(run.steps_sx[..prefix_len]
                .iter()
                .fold(0usize, |acc, s| acc * k + index[s]))
        })
        .collect::<Result<Vec<_>, PlanError>>()?;
    let mut observed = vec![0u64; cells];
    for c in cell_of {
        observed[c] += 1;
    }
    let masses: Vec<f64> = atoms.iter().map(|(_, m)| *m).collect();
    let expected: Vec<f64> = (0..cells)
        .map(|mut c| {
            let mut p = 1.0;
            for _ in 0..prefix_len {
                p *= masses[c % k];
                c /= k;
            }
            p
        })
        .collect();
    Ok(g_test(&observed, &expected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::CouplingTime;
    use crate::group::GroupCtx;
    use crate::mass::Rational;

    fn catalan(k: u64) -> f64 {
        // C(2k, k) / (k + 1) in floating point; fine for small k.
        let mut c = 1.0;
        for i in 0..k {
            c = c * 2.0 * (2 * i + 1) as f64 / (i + 2) as f64;
        }
        c
    }

    #[test]
    fn infinite_order_tail_matches_catalan() {
        let law = hitting_time_tail(WalkOrder::Infinite, 0.0, 40).unwrap();
        assert_eq!(law.tail[0], 1.0);
        assert!((law.tail[1] - 0.5).abs() < 1e-15);
        assert!((law.tail[3] - 0.375).abs() < 1e-15);
        // P(τ = 2k − 1) = Cat(k − 1) / 2^{2k − 1}.
        for k in 1..=20u64 {
            let n = (2 * k - 1) as usize;
            let p = law.tail[n - 1] - law.tail[n];
            let expected = catalan(k - 1) / 2f64.powi(n as i32);
            assert!((p - expected).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn finite_order_tails() {
        let law = hitting_time_tail(WalkOrder::Finite(2), 0.5, 30).unwrap();
        for k in 0..=30 {
            assert!((law.tail[k] - 0.5f64.powi(k as i32)).abs() < 1e-15);
        }
        let law = hitting_time_tail(WalkOrder::Finite(3), 0.0, 10).unwrap();
        assert!((law.tail[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dp_conserves_mass() {
        for order in [WalkOrder::Infinite, WalkOrder::Finite(2), WalkOrder::Finite(5), WalkOrder::Finite(12)] {
            let law = hitting_time_tail(order, 0.3, 500).unwrap();
            for (t, a) in law.tail.iter().zip(&law.absorbed) {
                assert!((t + a - 1.0).abs() < 1e-12);
            }
            assert!(law.tail.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn dp_domain_errors() {
        assert!(matches!(hitting_time_tail(WalkOrder::Finite(1), 0.0, 5), Err(AnalysisError::TrivialOrder(1))));
        assert!(matches!(hitting_time_tail(WalkOrder::Infinite, 1.0, 5), Err(AnalysisError::Laziness(_))));
        assert!(matches!(hitting_time_tail(WalkOrder::Infinite, 0.0, 0), Err(AnalysisError::ZeroHorizon)));
    }

    #[test]
    fn infinite_tail_scales_like_inverse_sqrt() {
        let law = hitting_time_tail(WalkOrder::Infinite, 0.0, 10_000).unwrap();
        for k in (1000..=10_000).step_by(250) {
            let s = law.tail[k] * (k as f64).sqrt();
            assert!((0.3..=1.3).contains(&s), "k={k} s={s}");
        }
    }

    #[test]
    fn finite_tail_has_geometric_envelope() {
        for d in [2u64, 3, 5, 8] {
            let law = hitting_time_tail(WalkOrder::Finite(d), 0.2, 4000).unwrap();
            let start = (10 * d * d) as usize;
            let m = 20;
            let rho_m = law.tail[start + m] / law.tail[start];
            assert!(rho_m < 1.0);
            for k in start..start + 200 {
                let r = law.tail[k + m] / law.tail[k];
                assert!(r <= rho_m * (1.0 + 1e-6), "d={d} k={k}");
            }
        }
    }

    fn bernoulli() -> AtomicMeasure<Rational> {
        AtomicMeasure::parse_literal(GroupCtx::lattice(1).unwrap(), "0=1/2 1=1/2").unwrap()
    }

    #[test]
    fn tv_curve_bernoulli_small_n() {
        let c = exact_tv_curve(&bernoulli(), &GroupElement::int(1), 4, AtomGuard::default()).unwrap();
        let tvs: Vec<f64> = c.iter().map(|p| p.tv).collect();
        assert_eq!(tvs, vec![1.0, 1.0, 0.75, 0.75]);
        let zero = exact_tv_curve(&bernoulli(), &GroupElement::int(0), 5, AtomGuard::default()).unwrap();
        assert!(zero.iter().all(|p| p.tv == 0.0));
    }

    #[test]
    fn fits_synthetic_curves() {
        let power: Vec<TvPoint> = (1..=500).map(|n| TvPoint { n, tv: (n as f64).powf(-0.5) }).collect();
        let f = fit_decay(&power, DecayKind::PowerLaw, (10, 500)).unwrap();
        match f.model {
            DecayModel::PowerLaw { exponent, c } => {
                assert!((exponent + 0.5).abs() < 1e-9);
                assert!((c - 1.0).abs() < 1e-9);
            }
            _ => panic!(),
        }
        let geo: Vec<TvPoint> = (1..=200).map(|n| TvPoint { n, tv: 0.9f64.powi(n as i32) }).collect();
        let f = fit_decay(&geo, DecayKind::Geometric, (1, 200)).unwrap();
        match f.model {
            DecayModel::Geometric { rho, .. } => assert!((rho - 0.9).abs() < 1e-9),
            _ => panic!(),
        }
        assert!(f.residual < 1e-9);
    }

    #[test]
    fn fit_errors() {
        let zeros: Vec<TvPoint> = (1..=10).map(|n| TvPoint { n, tv: if n > 5 { 0.0 } else { 1.0 } }).collect();
        assert!(matches!(fit_decay(&zeros, DecayKind::Geometric, (1, 10)), Err(AnalysisError::Converged { n: 6 })));
        let flat: Vec<TvPoint> = (1..=10).map(|n| TvPoint { n, tv: 1.0 + n as f64 }).collect();
        assert!(matches!(fit_decay(&flat, DecayKind::PowerLaw, (1, 10)), Err(AnalysisError::NoDecay(_))));
        assert!(matches!(fit_decay(&flat, DecayKind::PowerLaw, (32, 64)), Err(AnalysisError::InsufficientRange { .. })));
    }

    #[test]
    fn inequality_bernoulli_is_tight() {
        let curve = exact_tv_curve(&bernoulli(), &GroupElement::int(1), 64, AtomGuard::default()).unwrap();
        let law = hitting_time_tail(WalkOrder::Infinite, 0.0, 64).unwrap();
        let rep = verify_coupling_inequality(&curve, Some(&law), 1).unwrap();
        assert!(rep.holds);
        assert!(rep.worst_slack.abs() < 1e-12);
        let identity = vec![TvPoint { n: 1, tv: 0.0 }];
        assert!(verify_coupling_inequality(&identity, None, 0).unwrap().holds);
        let short = hitting_time_tail(WalkOrder::Infinite, 0.0, 10).unwrap();
        assert!(matches!(
            verify_coupling_inequality(&curve, Some(&short), 1),
            Err(AnalysisError::HorizonTooShort { .. })
        ));
    }

    #[test]
    fn inequality_reports_violations() {
        let law = hitting_time_tail(WalkOrder::Finite(2), 0.5, 4).unwrap();
        let curve = vec![TvPoint { n: 2, tv: 1.0 }];
        let rep = verify_coupling_inequality(&curve, Some(&law), 1).unwrap();
        assert!(!rep.holds);
        assert_eq!(rep.violations[0].n, 2);
    }

    fn fake_run(time: CouplingTime) -> CouplingRun {
        CouplingRun {
            x: GroupElement::int(1),
            n0: 1,
            horizon: 10,
            horizon_rounded: false,
            time,
            blocks_executed: 0,
            split_labels: vec![],
            steps_s: vec![],
            steps_sx: vec![],
            seed: 0,
        }
    }

    #[test]
    fn empirical_tails() {
        let runs: Vec<_> = (0..10).map(|_| fake_run(CouplingTime::Finite(1))).collect();
        assert_eq!(empirical_tail(&runs, 1).unwrap().estimate, 0.0);
        assert_eq!(empirical_tail(&runs, 0).unwrap().estimate, 1.0);
        let censored = vec![fake_run(CouplingTime::CensoredAt(5))];
        assert_eq!(empirical_tail(&censored, 5).unwrap().estimate, 1.0);
        assert!(matches!(empirical_tail(&censored, 6), Err(AnalysisError::AllCensored { n: 6 })));
        assert!(matches!(empirical_tail(&[], 1), Err(AnalysisError::NoRuns)));
    }

    #[test]
    fn tail_curve_matches_pointwise_estimates() {
        let mut runs: Vec<_> = (0..30).map(|i| fake_run(CouplingTime::Finite(i % 7 + 1))).collect();
        runs.push(fake_run(CouplingTime::CensoredAt(3)));
        runs.push(fake_run(CouplingTime::CensoredAt(20)));
        let curve = empirical_tail_curve(&runs, 12).unwrap();
        for t in &curve {
            let p = empirical_tail(&runs, t.n).unwrap();
            assert_eq!(*t, p);
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &[CurveRow { n: 1, tv: Some(1.0), bound: Some(1.0), empirical: None }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CURVE_CSV_HEADER}\n1,1,1,,,\n"));
    }
}
