//! Membership tests for the shift sets `G_p` (possible exact coupling) and
//! `G_s` (successful exact coupling) of an atomic step law.
//!
//! `x ∈ G_p` iff `μⁿ ∧ shift(x⁻¹, μⁿ) ≠ 0` for some `n ≥ 1`. For Abelian
//! groups the same criterion characterises `G_s`, which is then the subgroup
//! generated by the differences of atoms. Off the Abelian case the overlap is
//! only sufficient when `x` commutes with the support of `μ^{n0}`; otherwise
//! the verdict is [`GsVerdict::Unknown`].
//!
//! Negative verdicts are certificates up to the searched `n_max` only.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::group::{GroupCtx, GroupElement, GroupError};
use crate::mass::Mass;
use crate::measure::{AtomGuard, AtomicMeasure, MeasureError};
use crate::rng::RunSeed;
use crate::stats::{wilson, Proportion, Z_95};

/// Maximum number of elements a subgroup closure may enumerate.
pub const CLOSURE_GUARD: usize = 1_000_000;

/// Horizon below which the first letter at time `n` is a visibly biased proxy
/// for the first letter of the limiting word.
pub const MIN_SEPARATION_HORIZON: u64 = 50;

pub const DEFAULT_SEPARATION_HORIZON: u64 = 200;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("subgroup closure exceeds {bound} elements")]
    ClosureGuard { bound: usize },
    #[error("closure radius must be at least 1")]
    ZeroRadius,
    #[error("empty atom set")]
    EmptyAtoms,
    #[error("group {0} is not Abelian")]
    NotAbelian(String),
    #[error("step law is not a probability measure (total {0})")]
    NotProbability(f64),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// `{a·a′⁻¹} ∪ {a⁻¹·a′}` over all pairs of `atoms`.
pub fn difference_generators(
    ctx: &GroupCtx,
    atoms: &[GroupElement],
) -> Result<BTreeSet<GroupElement>, SolverError> {
    if atoms.is_empty() {
        return Err(SolverError::EmptyAtoms);
    }
    let mut out = BTreeSet::new();
    for a in atoms {
        let a_inv = ctx.inv(a)?;
        for b in atoms {
            let b_inv = ctx.inv(b)?;
            out.insert(ctx.mul(a, &b_inv)?);
            out.insert(ctx.mul(&a_inv, b)?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubgroupClosure {
    pub generators: BTreeSet<GroupElement>,
    pub elements: BTreeSet<GroupElement>,
    pub radius: usize,
    /// True iff an expansion round within the radius added nothing new.
    pub complete: bool,
}

impl SubgroupClosure {
    pub fn contains(&self, g: &GroupElement) -> bool {
        self.elements.contains(g)
    }

    /// Element texts in canonical encoding order.
    pub fn listing(&self, ctx: &GroupCtx) -> Vec<String> {
        let mut v: Vec<_> = self.elements.iter().map(|g| (ctx.encode(g), g)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v.into_iter().map(|(_, g)| ctx.format_element(g)).collect()
    }
}

/// Breadth-first enumeration of words of length at most `radius` in `gens`
/// and their inverses.
pub fn generate_subgroup(
    ctx: &GroupCtx,
    gens: &BTreeSet<GroupElement>,
    radius: usize,
) -> Result<SubgroupClosure, SolverError> {
    if radius == 0 {
        return Err(SolverError::ZeroRadius);
    }
    let mut letters: BTreeSet<GroupElement> = BTreeSet::new();
    for g in gens {
        ctx.validate(g)?;
        letters.insert(g.clone());
        letters.insert(ctx.inv(g)?);
    }
    let mut elements = BTreeSet::new();
    elements.insert(ctx.identity());
    let mut frontier = vec![ctx.identity()];
    let mut complete = false;
    for _ in 0..radius {
        let mut next = Vec::new();
        for w in &frontier {
            for s in &letters {
                let p = ctx.mul(w, s)?;
                if !elements.contains(&p) {
                    elements.insert(p.clone());
                    next.push(p);
                    if elements.len() > CLOSURE_GUARD {
                        return Err(SolverError::ClosureGuard { bound: CLOSURE_GUARD });
                    }
                }
            }
        }
        if next.is_empty() {
            complete = true;
            break;
        }
        frontier = next;
    }
    Ok(SubgroupClosure {
        generators: gens.clone(),
        elements,
        radius,
        complete,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum GpVerdict {
    Yes { n0: usize },
    NoUpTo { n_max: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum GsVerdict {
    /// Overlap at `n0`, and either the group is Abelian or `x` commutes with
    /// every atom of `μ^{n0}`.
    Yes { n0: usize, witness: GsWitness },
    NoUpTo { n_max: usize },
    /// Overlap at `n0` but the commutation hypothesis fails.
    Unknown { n0: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GsWitness {
    Abelian,
    CommutesWithSupport,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MembershipVerdict {
    pub x: GroupElement,
    pub in_gp: GpVerdict,
    pub in_gs: GsVerdict,
    pub n_max: usize,
}

impl MembershipVerdict {
    pub fn gp_yes(&self) -> bool {
        matches!(self.in_gp, GpVerdict::Yes { .. })
    }

    pub fn gs_yes(&self) -> bool {
        matches!(self.in_gs, GsVerdict::Yes { .. })
    }

    pub fn n0(&self) -> Option<usize> {
        match self.in_gp {
            GpVerdict::Yes { n0 } => Some(n0),
            GpVerdict::NoUpTo { .. } => None,
        }
    }

    /// `{x, in_Gp, in_Gs, n0, n_max}`.
    pub fn to_json(&self, ctx: &GroupCtx) -> serde_json::Value {
        let gp = match &self.in_gp {
            GpVerdict::Yes { .. } => "yes",
            GpVerdict::NoUpTo { .. } => "no_up_to_n_max",
        };
        let gs = match &self.in_gs {
            GsVerdict::Yes { witness: GsWitness::Abelian, .. } => "yes (abelian)",
            GsVerdict::Yes { witness: GsWitness::CommutesWithSupport, .. } => {
                "yes (x commutes with supp mu^n0)"
            }
            GsVerdict::NoUpTo { .. } => "no_up_to_n_max",
            GsVerdict::Unknown { .. } => "unknown",
        };
        json!({
            "x": ctx.format_element(&self.x),
            "in_Gp": gp,
            "in_Gs": gs,
            "n0": self.n0(),
            "n_max": self.n_max,
        })
    }
}

/// Decides `x ∈ G_p` and, where the overlap criterion is sufficient,
/// `x ∈ G_s`, searching overlap orders up to `n_max`.
pub fn gs_membership<M: Mass>(
    mu: &AtomicMeasure<M>,
    x: &GroupElement,
    n_max: usize,
    guard: AtomGuard,
) -> Result<MembershipVerdict, SolverError> {
    if !mu.is_probability(1e-9) {
        return Err(SolverError::NotProbability(mu.total().to_f64()));
    }
    let ctx = mu.ctx();
    ctx.validate(x)?;
    let overlap = mu.find_overlap_order(x, n_max, guard)?;
    let (in_gp, in_gs) = match overlap {
        None => (GpVerdict::NoUpTo { n_max }, GsVerdict::NoUpTo { n_max }),
        Some(o) => {
            let n0 = o.n0;
            let gs = if ctx.is_abelian() {
                GsVerdict::Yes { n0, witness: GsWitness::Abelian }
            } else if mu.commutes_with_support(x, n0, guard)? {
                GsVerdict::Yes { n0, witness: GsWitness::CommutesWithSupport }
            } else {
                GsVerdict::Unknown { n0 }
            };
            (GpVerdict::Yes { n0 }, gs)
        }
    };
    Ok(MembershipVerdict {
        x: x.clone(),
        in_gp,
        in_gs,
        n_max,
    })
}

#[derive(Clone, Debug, Default)]
pub struct GroupPropertyReport {
    /// Pairs `(x, y)` that were checked.
    pub pairs: Vec<(GroupElement, GroupElement)>,
    /// Pairs whose `x⁻¹y` did not verdict Yes with `2·n_max`.
    pub violations: Vec<(GroupElement, GroupElement)>,
    /// Candidates with a Yes verdict.
    pub yes_set: Vec<GroupElement>,
}

impl GroupPropertyReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples `samples` pairs from the Yes-verdict candidates and checks that
/// `x⁻¹·y` also verdicts Yes, allowing overlap orders up to `2·n_max`.
pub fn gs_group_property_check<M: Mass, R: Rng + ?Sized>(
    mu: &AtomicMeasure<M>,
    candidates: &[GroupElement],
    samples: usize,
    n_max: usize,
    rng: &mut R,
    guard: AtomGuard,
) -> Result<GroupPropertyReport, SolverError> {
    let ctx = mu.ctx();
    if !ctx.is_abelian() {
        return Err(SolverError::NotAbelian(ctx.to_string()));
    }
    let mut cache: BTreeMap<GroupElement, bool> = BTreeMap::new();
    let mut yes_set = Vec::new();
    for x in candidates {
        let v = gs_membership(mu, x, n_max, guard)?.gs_yes();
        cache.insert(x.clone(), v);
        if v {
            yes_set.push(x.clone());
        }
    }
    let mut report = GroupPropertyReport {
        yes_set: yes_set.clone(),
        ..Default::default()
    };
    if yes_set.is_empty() {
        return Ok(report);
    }
    let mut wide: BTreeMap<GroupElement, bool> = BTreeMap::new();
    for _ in 0..samples {
        let x = yes_set.choose(rng).expect("nonempty").clone();
        let y = yes_set.choose(rng).expect("nonempty").clone();
        let z = ctx.mul(&ctx.inv(&x)?, &y)?;
        let ok = match wide.get(&z) {
            Some(&v) => v,
            None => {
                let v = gs_membership(mu, &z, 2 * n_max, guard)?.gs_yes();
                wide.insert(z.clone(), v);
                v
            }
        };
        if !ok {
            report.violations.push((x.clone(), y.clone()));
        }
        report.pairs.push((x, y));
    }
    Ok(report)
}

/// `P_k(W hits 0)` for the walk on `{0, 1, 2, …}` stepping up with
/// probability `p_up` and down otherwise.
///
/// Solved as an absorbing chain on `0..=N` with `N` large enough that the
/// truncation error is below `1e-20`. For `p_up ≤ ½` the walk is recurrent
/// or drifts down, and the answer is 1.
pub fn gamblers_ruin_hit_prob(k: usize, p_up: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p_up), "p_up must be a probability");
    if k == 0 || p_up <= 0.5 {
        return 1.0;
    }
    if p_up == 1.0 {
        return 0.0;
    }
    let q = 1.0 - p_up;
    let decay = (p_up / q).ln();
    let n = (k + 80).max(k + (20.0 * std::f64::consts::LN_10 / decay).ceil() as usize + 1);
    // h(0) = 1, h(n) = 0, h(i) = q·h(i-1) + p·h(i+1) for 0 < i < n.
    // Thomas algorithm on the interior unknowns h(1..n-1).
    let m = n - 1;
    let mut c_prime = vec![0.0; m];
    let mut d_prime = vec![0.0; m];
    for i in 0..m {
        // Row: -q·h(i) + h(i+1) - p·h(i+2) = (i == 0 ? q : 0), in interior indexing.
        let a = -q;
        let b = 1.0;
        let c = -p_up;
        let d = if i == 0 { q } else { 0.0 };
        if i == 0 {
            c_prime[0] = c / b;
            d_prime[0] = d / b;
        } else {
            let denom = b - a * c_prime[i - 1];
            c_prime[i] = c / denom;
            d_prime[i] = (d - a * d_prime[i - 1]) / denom;
        }
    }
    let mut h = vec![0.0; m];
    h[m - 1] = d_prime[m - 1];
    for i in (0..m - 1).rev() {
        h[i] = d_prime[i] - c_prime[i] * h[i + 1];
    }
    h[k - 1]
}

#[derive(Clone, Debug, Serialize)]
pub struct SeparationReport {
    pub horizon: u64,
    pub runs: u64,
    pub master_seed: u64,
    /// First letter of `S_n` (started at `e`) equal to `b`.
    pub s_first_b: Proportion,
    /// First letter of `S^{ab}_n` (started at `ab`) equal to `b`.
    pub sab_first_b: Proportion,
    pub target_s: f64,
    pub target_sab: f64,
    /// `P_1(W hits 0)` and `P_2(W hits 0)` for the word-length chain.
    pub hit_prob_1: f64,
    pub hit_prob_2: f64,
    pub warning: Option<String>,
}

const LETTER_A: i32 = 1;
const LETTER_B: i32 = 2;
const F2_STEPS: [i32; 4] = [LETTER_A, -LETTER_A, LETTER_B, -LETTER_B];

fn free_walk_first_letter<R: Rng + ?Sized>(start: &[i32], steps: u64, rng: &mut R) -> Option<i32> {
    let mut word = start.to_vec();
    for _ in 0..steps {
        let s = F2_STEPS[rng.gen_range(0..4)];
        if word.last() == Some(&-s) {
            word.pop();
        } else {
            word.push(s);
        }
    }
    word.first().copied()
}

/// Monte Carlo estimate of the first-letter probabilities of the simple
/// random walk on `F₂` at time `horizon`, started at `e` and at `ab`, with
/// independent walks and per-run streams derived from `master_seed`.
pub fn free_group_tail_separation(horizon: u64, runs: u64, master_seed: u64) -> SeparationReport {
    assert!(runs > 0, "at least one run is needed");
    let (s_hits, sab_hits) = (0..runs)
        .into_par_iter()
        .map(|i| {
            let seed = RunSeed::new(master_seed, i);
            let s = free_walk_first_letter(&[], horizon, &mut seed.stream(0));
            let sab = free_walk_first_letter(&[LETTER_A, LETTER_B], horizon, &mut seed.stream(1));
            (
                u64::from(s == Some(LETTER_B)),
                u64::from(sab == Some(LETTER_B)),
            )
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    // The reduced length moves up w.p. 3/4 away from e.
    let hit_prob_1 = gamblers_ruin_hit_prob(1, 0.75);
    let hit_prob_2 = gamblers_ruin_hit_prob(2, 0.75);
    let warning = (horizon < MIN_SEPARATION_HORIZON).then(|| {
        format!(
            "horizon {horizon} < {MIN_SEPARATION_HORIZON}: the first letter at time n is a \
             pre-asymptotic proxy for the first letter of the limit"
        )
    });
    SeparationReport {
        horizon,
        runs,
        master_seed,
        s_first_b: wilson(s_hits, runs, Z_95),
        sab_first_b: wilson(sab_hits, runs, Z_95),
        target_s: 0.25,
        target_sab: hit_prob_2 * 0.25,
        hit_prob_1,
        hit_prob_2,
        warning,
    }
}
