//! Block-splitting exact coupling of two random walks.
//!
//! Given a step law `μ`, a shift `x` and a block length `n0` with
//! `μ^{n0} ≥ ν + shift(x⁻¹, ν)` for a nonzero `ν`, the walk `S` started at
//! `e` is cut into blocks of `n0` steps with products `L_i`. Each block gets a
//! split label `K_i ∈ {0, 1, 2}` drawn conditionally on `L_i` so that
//! `P(L_i ∈ ·, K_i = 1) = ν` and `P(L_i ∈ ·, K_i = 2) = shift(x⁻¹, ν)`. The
//! partner walk started at `x` uses block products `L'_i = L_i`, `x⁻¹L_i` or
//! `xL_i` accordingly, with its individual steps resampled from the
//! conditional law of `n0` i.i.d. `μ` steps given their product. The two walks
//! agree from the first block boundary at which their positions coincide, and
//! `S` supplies the partner's steps from then on.

use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{ElementOrder, GroupCtx, GroupElement, GroupError};
use crate::mass::Mass;
use crate::measure::{AtomGuard, AtomMap, AtomicMeasure, MeasureError};
use crate::rng::{RunSeed, BASE_STREAM};

/// Default censoring horizon, in steps.
pub const DEFAULT_HORIZON: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(
        "no overlap: μⁿ ∧ shift(x⁻¹, μⁿ) = 0 for every n ≤ {n_max}, \
         so no exact coupling with P(T = n) > 0 exists for these n"
    )]
    NoOverlap { n_max: usize },
    #[error("x is the identity; the walks coincide from time 0 and no plan is needed")]
    IdentityShift,
    #[error("every atom of the overlap is fixed by x")]
    DegenerateU,
    #[error("step law is not a probability measure (total {0})")]
    NotProbability(f64),
    #[error("target block product is not reachable in {n0} steps")]
    TargetNotReachable { n0: usize },
    #[error("plan invariant violated: {0}")]
    Invariant(String),
    #[error("horizon must be positive")]
    ZeroHorizon,
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NuStrategy {
    #[default]
    SingleAtom,
    GreedyMaxMass,
}

impl FromStr for NuStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single-atom" | "single" => Ok(NuStrategy::SingleAtom),
            "greedy-max-mass" | "greedy" => Ok(NuStrategy::GreedyMaxMass),
            other => Err(format!("unknown nu strategy `{other}`")),
        }
    }
}

/// Samples i.i.d. steps from a finitely supported law.
#[derive(Clone, Debug)]
pub struct StepSampler {
    atoms: Vec<GroupElement>,
    index: WeightedIndex<f64>,
}

impl StepSampler {
    pub fn new<M: Mass>(mu: &AtomicMeasure<M>) -> Result<Self, PlanError> {
        let sorted = mu.sorted_atoms();
        if sorted.is_empty() {
            return Err(PlanError::NotProbability(0.0));
        }
        let weights: Vec<f64> = sorted.iter().map(|(_, m)| m.to_f64()).collect();
        let index = WeightedIndex::new(&weights).map_err(|_| PlanError::NotProbability(0.0))?;
        Ok(StepSampler {
            atoms: sorted.into_iter().map(|(g, _)| g).collect(),
            index,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupElement {
        self.atoms[self.index.sample(rng)].clone()
    }
}

#[derive(Clone, Debug)]
pub struct CouplingPlan {
    pub ctx: GroupCtx,
    pub mu: AtomicMeasure<f64>,
    pub x: GroupElement,
    pub x_inv: GroupElement,
    pub n0: usize,
    pub xi: AtomicMeasure<f64>,
    pub u: Vec<GroupElement>,
    pub nu: AtomicMeasure<f64>,
    pub nu_mass: f64,
    /// `ν(G)` printed in the measure's native representation.
    pub nu_mass_text: String,
    pub laziness: f64,
    /// `μ⁰ = δ_e, μ¹, …, μ^{n0}`.
    pub mu_pow_table: Vec<AtomicMeasure<f64>>,
    /// Whether `x` commutes with every atom of `μ^{n0}`.
    pub commuting: bool,
    pub x_order: ElementOrder,
    split: AtomMap<(f64, f64)>,
    steps: StepSampler,
    step_inverses: Vec<GroupElement>,
    step_masses: Vec<f64>,
}

/// Builds the block coupling plan for shift `x`, using the least overlap
/// order `n0 ≤ n_max`.
pub fn build_plan<M: Mass>(
    mu: &AtomicMeasure<M>,
    x: &GroupElement,
    n_max: usize,
    strategy: NuStrategy,
    guard: AtomGuard,
) -> Result<CouplingPlan, PlanError> {
    let ctx = mu.ctx().clone();
    if !mu.is_probability(1e-9) {
        return Err(PlanError::NotProbability(mu.total().to_f64()));
    }
    ctx.validate(x)?;
    if ctx.is_identity(x) {
        return Err(PlanError::IdentityShift);
    }
    let overlap = mu
        .find_overlap_order(x, n_max, guard)?
        .ok_or(PlanError::NoOverlap { n_max })?;
    let n0 = overlap.n0;
    let xi = overlap.xi;
    let powers = mu.powers_upto(n0, guard)?;
    let top = &powers[n0];
    let x_inv = ctx.inv(x)?;

    // Candidate atoms of ξ by decreasing mass, ties by canonical encoding.
    let mut candidates: Vec<(Vec<u8>, GroupElement, M)> = xi
        .iter()
        .map(|(g, m)| (ctx.encode(g), g.clone(), m.clone()))
        .collect();
    candidates.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });

    let mut u: Vec<GroupElement> = Vec::new();
    let mut shifted_u: Vec<GroupElement> = Vec::new();
    for (_, y, _) in &candidates {
        let xy = ctx.mul(x, y)?;
        if &xy == y {
            continue;
        }
        let disjoint = !shifted_u.contains(y) && !u.contains(&xy);
        if disjoint {
            u.push(y.clone());
            shifted_u.push(xy);
            if strategy == NuStrategy::SingleAtom {
                break;
            }
        }
    }
    if u.is_empty() {
        return Err(PlanError::DegenerateU);
    }
    if u.iter().any(|y| shifted_u.contains(y)) {
        return Err(PlanError::Invariant("U ∩ xU ≠ ∅".into()));
    }

    // ν(·) = ξ((x⁻¹·) ∩ U): mass ξ(y) moved to x·y for y ∈ U.
    let nu = AtomicMeasure::from_atoms(
        ctx.clone(),
        u.iter().zip(&shifted_u).map(|(y, xy)| (xy.clone(), xi.get(y))),
    )?;
    let nu_back = nu.shift(&x_inv)?;
    let sum = nu.add(&nu_back)?;
    if !sum.dominated_by(top, 1e-12)? {
        return Err(PlanError::Invariant("ν + shift(x⁻¹, ν) is not dominated by μ^{n0}".into()));
    }
    let nu_mass = nu.total().to_f64();
    let laziness = 1.0 - 2.0 * nu_mass;
    if !(nu_mass > 0.0 && (0.0..1.0).contains(&laziness)) {
        return Err(PlanError::Invariant(format!("ν(G) = {nu_mass} out of range")));
    }

    let mut split = AtomMap::default();
    for l in nu.support().chain(nu_back.support()) {
        if split.contains_key(l) {
            continue;
        }
        let denom = top.get(l);
        let p1 = (nu.get(l) / denom.clone()).to_f64();
        let p2 = (nu_back.get(l) / denom).to_f64();
        split.insert(l.clone(), (p1, p2));
    }

    let commuting = mu.commutes_with_support(x, n0, guard)?;
    let x_order = ctx.element_order(x, u64::MAX)?;
    let steps = StepSampler::new(mu)?;
    let step_inverses = steps
        .atoms
        .iter()
        .map(|s| ctx.inv(s))
        .collect::<Result<Vec<_>, _>>()?;
    let step_masses = steps.atoms.iter().map(|s| mu.get(s).to_f64()).collect();

    Ok(CouplingPlan {
        ctx,
        mu: mu.to_f64(),
        x: x.clone(),
        x_inv,
        n0,
        xi: xi.to_f64(),
        u,
        nu: nu.to_f64(),
        nu_mass,
        nu_mass_text: nu.total().to_string(),
        laziness,
        mu_pow_table: powers.iter().map(|p| p.to_f64()).collect(),
        commuting,
        x_order,
        split,
        steps,
        step_inverses,
        step_masses,
    })
}

impl CouplingPlan {
    /// `(P(K=1 | L=l), P(K=2 | L=l))`.
    pub fn split_probabilities(&self, l: &GroupElement) -> (f64, f64) {
        self.split.get(l).copied().unwrap_or((0.0, 0.0))
    }

    pub fn step_sampler(&self) -> &StepSampler {
        &self.steps
    }

    /// Draws `n0` steps distributed as i.i.d. `μ` steps conditioned on their
    /// product being `target`.
    pub fn conditional_block_sampler<R: Rng + ?Sized>(
        &self,
        target: &GroupElement,
        rng: &mut R,
    ) -> Result<Vec<GroupElement>, PlanError> {
        let unreachable = || PlanError::TargetNotReachable { n0: self.n0 };
        let mut remaining = target.clone();
        let mut out = Vec::with_capacity(self.n0);
        for left in (1..=self.n0).rev() {
            if left == 1 {
                if !self.mu.contains(&remaining) {
                    return Err(unreachable());
                }
                out.push(remaining);
                break;
            }
            let rest = &self.mu_pow_table[left - 1];
            let mut weights = Vec::with_capacity(self.steps.atoms.len());
            let mut rests = Vec::with_capacity(self.steps.atoms.len());
            for (inv, &m) in self.step_inverses.iter().zip(&self.step_masses) {
                let r = self.ctx.mul(inv, &remaining)?;
                weights.push(m * rest.get(&r));
                rests.push(r);
            }
            let total: f64 = weights.iter().sum();
            if total.is_nan() || total <= 0.0 {
                return Err(unreachable());
            }
            let mut u = rng.gen::<f64>() * total;
            let mut pick = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 {
                    pick = i;
                    if u < *w {
                        break;
                    }
                    u -= w;
                }
            }
            out.push(self.steps.atoms[pick].clone());
            remaining = rests.swap_remove(pick);
        }
        Ok(out)
    }

    /// Simulates one coupled pair of walks.
    pub fn run(&self, opts: &RunOptions, seed: RunSeed) -> Result<CouplingRun, PlanError> {
        let mut runs = run_layers(&self.ctx, &self.steps, vec![LayerSpec::Planned(self)], opts, seed)?;
        Ok(runs.pop().expect("one layer"))
    }
}

/// Equivalent to [`CouplingPlan::run`].
pub fn run_coupling(plan: &CouplingPlan, opts: &RunOptions, seed: RunSeed) -> Result<CouplingRun, PlanError> {
    plan.run(opts, seed)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOptions {
    /// Censoring horizon in steps; rounded up to a multiple of `n0`.
    pub horizon: u64,
    /// Record at least this many individual steps of both walks.
    pub materialize_steps: Option<usize>,
    /// Keep the split label of every executed block.
    pub record_labels: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            horizon: DEFAULT_HORIZON,
            materialize_steps: None,
            record_labels: false,
        }
    }
}

impl RunOptions {
    pub fn with_horizon(horizon: u64) -> Self {
        RunOptions {
            horizon,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingTime {
    #[serde(rename = "T")]
    Finite(u64),
    #[serde(rename = "censored_at")]
    CensoredAt(u64),
}

impl CouplingTime {
    /// Whether `T > n`, or `None` when censoring hides the answer.
    pub fn exceeds(&self, n: u64) -> Option<bool> {
        match *self {
            CouplingTime::Finite(t) => Some(t > n),
            CouplingTime::CensoredAt(h) if n <= h => Some(true),
            CouplingTime::CensoredAt(_) => None,
        }
    }

    pub fn finite(&self) -> Option<u64> {
        match *self {
            CouplingTime::Finite(t) => Some(t),
            CouplingTime::CensoredAt(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingRun {
    pub x: GroupElement,
    /// Block length; 0 for the identity shift, which needs no blocks.
    pub n0: usize,
    /// Horizon actually used, in steps.
    pub horizon: u64,
    /// Whether the requested horizon was rounded up to a block multiple.
    pub horizon_rounded: bool,
    pub time: CouplingTime,
    pub blocks_executed: u64,
    pub split_labels: Vec<u8>,
    pub steps_s: Vec<GroupElement>,
    pub steps_sx: Vec<GroupElement>,
    pub seed: u64,
}

/// One line of the run emission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub x: String,
    pub n0: usize,
    pub nu_mass: f64,
    #[serde(rename = "T_or_censored")]
    pub t_or_censored: CouplingTime,
    pub blocks_executed: u64,
    pub seed: u64,
}

impl CouplingRun {
    pub fn record(&self, ctx: &GroupCtx, nu_mass: f64) -> RunRecord {
        RunRecord {
            x: ctx.format_element(&self.x),
            n0: self.n0,
            nu_mass,
            t_or_censored: self.time,
            blocks_executed: self.blocks_executed,
            seed: self.seed,
        }
    }

    /// Positions `S_0 = e, S_1, …` over the materialized steps.
    pub fn path_s(&self, ctx: &GroupCtx) -> Result<Vec<GroupElement>, GroupError> {
        prefix_products(ctx, ctx.identity(), &self.steps_s)
    }

    /// Positions `Sˣ_0 = x, Sˣ_1, …` over the materialized steps.
    pub fn path_sx(&self, ctx: &GroupCtx) -> Result<Vec<GroupElement>, GroupError> {
        prefix_products(ctx, self.x.clone(), &self.steps_sx)
    }

    /// Exponents `m_i` with `D_i = x^{m_i}` after each recorded block,
    /// starting from `m_0 = 1`.
    pub fn exponent_path(&self) -> Vec<i64> {
        let mut m = 1i64;
        let mut out = vec![m];
        for &k in &self.split_labels {
            m += match k {
                1 => -1,
                2 => 1,
                _ => 0,
            };
            out.push(m);
        }
        out
    }
}

fn prefix_products(
    ctx: &GroupCtx,
    start: GroupElement,
    steps: &[GroupElement],
) -> Result<Vec<GroupElement>, GroupError> {
    let mut out = Vec::with_capacity(steps.len() + 1);
    out.push(start);
    for s in steps {
        let next = ctx.mul(out.last().unwrap(), s)?;
        out.push(next);
    }
    Ok(out)
}

enum LayerSpec<'p> {
    Planned(&'p CouplingPlan),
    Trivial(GroupElement),
}

struct Layer<'p> {
    plan: Option<&'p CouplingPlan>,
    x: GroupElement,
    split_rng: ChaCha8Rng,
    resample_rng: ChaCha8Rng,
    pending: Vec<GroupElement>,
    diff: GroupElement,
    blocks: u64,
    horizon_blocks: u64,
    met_at: Option<u64>,
    rejoined: bool,
    primary_blocks: Option<u64>,
    labels: Vec<u8>,
    steps_sx: Vec<GroupElement>,
    want: usize,
    record_labels: bool,
}

impl<'p> Layer<'p> {
    fn primary_active(&self) -> bool {
        self.plan.is_some() && self.met_at.is_none() && self.blocks < self.horizon_blocks
    }

    fn needs_more(&self) -> bool {
        self.primary_active() || self.steps_sx.len() < self.want
    }

    fn feed(&mut self, ctx: &GroupCtx, step: &GroupElement) -> Result<(), PlanError> {
        let Some(plan) = self.plan else {
            self.steps_sx.push(step.clone());
            return Ok(());
        };
        if self.met_at.is_some() || self.rejoined {
            self.steps_sx.push(step.clone());
            return Ok(());
        }
        self.pending.push(step.clone());
        if self.pending.len() < plan.n0 {
            return Ok(());
        }
        let mut l = self.pending[0].clone();
        for s in &self.pending[1..] {
            l = ctx.mul(&l, s)?;
        }
        self.pending.clear();

        let (p1, p2) = plan.split_probabilities(&l);
        let u: f64 = self.split_rng.gen();
        let k: u8 = if u < p1 {
            1
        } else if u < p1 + p2 {
            2
        } else {
            0
        };
        let l_prime = match k {
            1 => ctx.mul(&plan.x_inv, &l)?,
            2 => ctx.mul(&plan.x, &l)?,
            _ => l.clone(),
        };
        // diff = R_i⁻¹ R'_i, updated as L_i⁻¹ · diff · L'_i.
        let l_inv = ctx.inv(&l)?;
        self.diff = ctx.mul(&ctx.mul(&l_inv, &self.diff)?, &l_prime)?;
        self.blocks += 1;
        if self.record_labels && self.primary_blocks.is_none() {
            self.labels.push(k);
        }
        if self.want > 0 && self.steps_sx.len() < self.want.max(self.blocks as usize * plan.n0) {
            let block = plan.conditional_block_sampler(&l_prime, &mut self.resample_rng)?;
            self.steps_sx.extend(block);
        }
        if ctx.is_identity(&self.diff) {
            if self.blocks <= self.horizon_blocks {
                self.met_at = Some(self.blocks);
            } else {
                self.rejoined = true;
            }
        }
        if self.primary_blocks.is_none() && !self.primary_active() {
            self.primary_blocks = Some(self.blocks);
        }
        Ok(())
    }
}

fn run_layers(
    ctx: &GroupCtx,
    sampler: &StepSampler,
    specs: Vec<LayerSpec<'_>>,
    opts: &RunOptions,
    seed: RunSeed,
) -> Result<Vec<CouplingRun>, PlanError> {
    if opts.horizon == 0 {
        return Err(PlanError::ZeroHorizon);
    }
    let want = opts.materialize_steps.unwrap_or(0);
    let mut layers: Vec<Layer<'_>> = specs
        .into_iter()
        .enumerate()
        .map(|(j, spec)| {
            let j = j as u64;
            let (plan, x, n0) = match spec {
                LayerSpec::Planned(p) => (Some(p), p.x.clone(), p.n0 as u64),
                LayerSpec::Trivial(x) => (None, x, 1),
            };
            Layer {
                plan,
                diff: x.clone(),
                x,
                split_rng: seed.stream(1 + 2 * j),
                resample_rng: seed.stream(2 + 2 * j),
                pending: Vec::new(),
                blocks: 0,
                horizon_blocks: opts.horizon.div_ceil(n0),
                met_at: None,
                rejoined: false,
                primary_blocks: if plan.is_none() { Some(0) } else { None },
                labels: Vec::new(),
                steps_sx: Vec::new(),
                want,
                record_labels: opts.record_labels,
            }
        })
        .collect();

    let mut base = seed.stream(BASE_STREAM);
    let mut steps_s: Vec<GroupElement> = Vec::new();
    while layers.iter().any(|l| l.needs_more()) {
        let step = sampler.sample(&mut base);
        for layer in layers.iter_mut().filter(|l| l.needs_more()) {
            layer.feed(ctx, &step)?;
        }
        if want > 0 {
            steps_s.push(step);
        }
    }

    Ok(layers
        .into_iter()
        .map(|layer| {
            let n0 = layer.plan.map_or(0, |p| p.n0);
            let horizon = layer.horizon_blocks * n0.max(1) as u64;
            let blocks = layer.primary_blocks.unwrap_or(layer.blocks);
            let time = match (layer.plan, layer.met_at) {
                (None, _) => CouplingTime::Finite(0),
                (Some(p), Some(m)) => CouplingTime::Finite(m * p.n0 as u64),
                (Some(_), None) => CouplingTime::CensoredAt(horizon),
            };
            let (steps_s, steps_sx) = if want > 0 {
                let len = want.max(blocks as usize * n0);
                let mut sx = layer.steps_sx;
                sx.truncate(len);
                (steps_s[..len.min(steps_s.len())].to_vec(), sx)
            } else {
                (Vec::new(), Vec::new())
            };
            CouplingRun {
                x: layer.x,
                n0,
                horizon,
                horizon_rounded: horizon != opts.horizon,
                time,
                blocks_executed: blocks,
                split_labels: layer.labels,
                steps_s,
                steps_sx,
                seed: seed.derived(),
            }
        })
        .collect())
}

/// Couples one base walk `S` with a partner walk for every shift in `xs`.
///
/// All returned runs share the same `S` steps; each partner has its own split
/// and resampling streams. Shifts without a plan (no overlap up to `n_max`)
/// report their error in place.
pub fn multi_couple<M: Mass>(
    mu: &AtomicMeasure<M>,
    xs: &[GroupElement],
    n_max: usize,
    strategy: NuStrategy,
    opts: &RunOptions,
    seed: RunSeed,
    guard: AtomGuard,
) -> Result<Vec<Result<CouplingRun, PlanError>>, PlanError> {
    let ctx = mu.ctx().clone();
    let plans: Vec<Result<Option<CouplingPlan>, PlanError>> = xs
        .iter()
        .map(|x| match build_plan(mu, x, n_max, strategy, guard) {
            Ok(p) => Ok(Some(p)),
            Err(PlanError::IdentityShift) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    if xs.is_empty() {
        return Ok(Vec::new());
    }
    let sampler = StepSampler::new(mu)?;
    let specs: Vec<LayerSpec<'_>> = plans
        .iter()
        .zip(xs)
        .filter_map(|(p, x)| match p {
            Ok(Some(plan)) => Some(LayerSpec::Planned(plan)),
            Ok(None) => Some(LayerSpec::Trivial(x.clone())),
            Err(_) => None,
        })
        .collect();
    let mut runs = run_layers(&ctx, &sampler, specs, opts, seed)?.into_iter();
    Ok(plans
        .into_iter()
        .map(|p| match p {
            Ok(_) => Ok(runs.next().expect("one run per layer")),
            Err(e) => Err(e),
        })
        .collect())
}

/// Runs `runs` independent couplings with per-run streams derived from
/// `master`. Uses the current rayon pool; output order is the run index.
pub fn simulate_runs(
    plan: &CouplingPlan,
    opts: &RunOptions,
    master: u64,
    runs: u64,
) -> Result<Vec<CouplingRun>, PlanError> {
    (0..runs)
        .into_par_iter()
        .map(|i| plan.run(opts, RunSeed::new(master, i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mass::{ratio, Rational};

    fn bernoulli_z() -> AtomicMeasure<Rational> {
        let z = GroupCtx::lattice(1).unwrap();
        AtomicMeasure::parse_literal(z, "0=1/2 1=1/2").unwrap()
    }

    fn guard() -> AtomGuard {
        AtomGuard::default()
    }

    #[test]
    fn plan_for_bernoulli_on_z() {
        let mu = bernoulli_z();
        let plan = build_plan(&mu, &GroupElement::int(1), 10, NuStrategy::SingleAtom, guard()).unwrap();
        assert_eq!(plan.n0, 1);
        assert_eq!(plan.xi.get(&GroupElement::int(0)), 0.5);
        assert_eq!(plan.xi.len(), 1);
        assert_eq!(plan.u, vec![GroupElement::int(0)]);
        assert_eq!(plan.nu.get(&GroupElement::int(1)), 0.5);
        assert_eq!(plan.nu_mass, 0.5);
        assert_eq!(plan.nu_mass_text, "1/2");
        assert_eq!(plan.laziness, 0.0);
        assert!(plan.commuting);
        assert_eq!(plan.split_probabilities(&GroupElement::int(1)), (1.0, 0.0));
        assert_eq!(plan.split_probabilities(&GroupElement::int(0)), (0.0, 1.0));
    }

    #[test]
    fn plan_for_cyclic_three() {
        let c3 = GroupCtx::cyclic(3).unwrap();
        let mu = AtomicMeasure::<Rational>::parse_literal(c3, "0=1/2 1=1/2").unwrap();
        let plan = build_plan(&mu, &GroupElement::Residue(1), 10, NuStrategy::GreedyMaxMass, guard()).unwrap();
        assert_eq!(plan.n0, 1);
        assert_eq!(plan.nu.get(&GroupElement::Residue(1)), 0.5);
        assert_eq!(plan.laziness, 0.0);
        assert_eq!(plan.x_order, ElementOrder::Finite(3));
    }

    #[test]
    fn plan_errors() {
        let z = GroupCtx::lattice(1).unwrap();
        let even = AtomicMeasure::<Rational>::parse_literal(z, "0=1/2 2=1/2").unwrap();
        assert!(matches!(
            build_plan(&even, &GroupElement::int(1), 10, NuStrategy::SingleAtom, guard()),
            Err(PlanError::NoOverlap { n_max: 10 })
        ));
        assert!(matches!(
            build_plan(&even, &GroupElement::int(0), 10, NuStrategy::SingleAtom, guard()),
            Err(PlanError::IdentityShift)
        ));
    }

    #[test]
    fn greedy_respects_disjointness_for_involutions() {
        // x of order 2: y and x·y can never both enter U.
        let c2 = GroupCtx::cyclic(2).unwrap();
        let mu = AtomicMeasure::<Rational>::parse_literal(c2, "0=1/2 1=1/2").unwrap();
        let plan = build_plan(&mu, &GroupElement::Residue(1), 4, NuStrategy::GreedyMaxMass, guard()).unwrap();
        assert_eq!(plan.u.len(), 1);
        assert_eq!(plan.nu_mass, 0.5);
        assert_eq!(plan.laziness, 0.0);
    }

    #[test]
    fn greedy_collects_more_mass_than_single_atom() {
        let z = GroupCtx::lattice(1).unwrap();
        let mu = AtomicMeasure::<Rational>::parse_literal(z, "0=1/4 1=1/4 2=1/4 3=1/4").unwrap();
        let x = GroupElement::int(1);
        let single = build_plan(&mu, &x, 4, NuStrategy::SingleAtom, guard()).unwrap();
        let greedy = build_plan(&mu, &x, 4, NuStrategy::GreedyMaxMass, guard()).unwrap();
        assert_eq!(single.nu_mass, 0.25);
        // ξ = {0,1,2} each 1/4; U = {0, 2} is the greedy choice.
        assert_eq!(greedy.u, vec![GroupElement::int(0), GroupElement::int(2)]);
        assert_eq!(greedy.nu_mass, 0.5);
    }

    #[test]
    fn conditional_sampler_enumerated() {
        let z = GroupCtx::lattice(1).unwrap();
        // n0 = 2 plan: μ = {0:½, 1:½}, x = 2 → overlap first at n = 2.
        let mu = bernoulli_z();
        let plan = build_plan(&mu, &GroupElement::int(2), 4, NuStrategy::SingleAtom, guard()).unwrap();
        assert_eq!(plan.n0, 2);
        let mut rng = RunSeed::new(1, 0).stream(9);
        let mut first_zero = 0;
        let trials = 20_000;
        for _ in 0..trials {
            let b = plan.conditional_block_sampler(&GroupElement::int(1), &mut rng).unwrap();
            assert_eq!(b.len(), 2);
            let prod = z.mul(&b[0], &b[1]).unwrap();
            assert_eq!(prod, GroupElement::int(1));
            if b[0] == GroupElement::int(0) {
                first_zero += 1;
            }
        }
        let p = first_zero as f64 / trials as f64;
        // [0,1] and [1,0] each with probability ½; 4σ ≈ 0.014.
        assert!((p - 0.5).abs() < 0.015, "p = {p}");
        assert!(matches!(
            plan.conditional_block_sampler(&GroupElement::int(5), &mut rng),
            Err(PlanError::TargetNotReachable { n0: 2 })
        ));
    }

    #[test]
    fn conditional_sampler_identity_on_free_group() {
        let f2 = GroupCtx::free(2).unwrap();
        let mu = AtomicMeasure::<Rational>::parse_literal(f2.clone(), "a=1/4 A=1/4 b=1/4 B=1/4").unwrap();
        // x = aaaa overlaps first at n = 2 (aa·(AA)⁻¹), giving an n0 = 2 table.
        let x = f2.parse_element("aaaa").unwrap();
        let plan = build_plan(&mu, &x, 4, NuStrategy::SingleAtom, guard()).unwrap();
        assert_eq!(plan.n0, 2);
        let mut rng = RunSeed::new(2, 0).stream(9);
        let mut counts = std::collections::HashMap::new();
        let trials = 40_000;
        for _ in 0..trials {
            let b = plan.conditional_block_sampler(&f2.identity(), &mut rng).unwrap();
            assert!(f2.is_identity(&f2.mul(&b[0], &b[1]).unwrap()));
            *counts.entry(f2.format_element(&b[0])).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 4);
        for (_, c) in counts {
            let p = c as f64 / trials as f64;
            assert!((p - 0.25).abs() < 0.0087, "p = {p}");
        }
    }

    #[test]
    fn single_block_sampler_returns_target() {
        let mu = bernoulli_z();
        let plan = build_plan(&mu, &GroupElement::int(1), 4, NuStrategy::SingleAtom, guard()).unwrap();
        let mut rng = RunSeed::new(0, 0).stream(3);
        for t in [0, 1] {
            let b = plan.conditional_block_sampler(&GroupElement::int(t), &mut rng).unwrap();
            assert_eq!(b, vec![GroupElement::int(t)]);
        }
    }

    #[test]
    fn run_paths_agree_after_coupling() {
        let mu = bernoulli_z();
        let z = mu.ctx().clone();
        let plan = build_plan(&mu, &GroupElement::int(1), 4, NuStrategy::SingleAtom, guard()).unwrap();
        let opts = RunOptions {
            horizon: 10_000,
            materialize_steps: Some(16),
            record_labels: true,
        };
        for i in 0..200 {
            let run = plan.run(&opts, RunSeed::new(11, i)).unwrap();
            let ps = run.path_s(&z).unwrap();
            let px = run.path_sx(&z).unwrap();
            assert_eq!(ps.len(), px.len());
            if let CouplingTime::Finite(t) = run.time {
                for n in t as usize..ps.len() {
                    assert_eq!(ps[n], px[n]);
                }
                assert_eq!(run.exponent_path().last(), Some(&0));
            }
        }
    }

    #[test]
    fn runs_are_reproducible_and_independent_of_materialization() {
        let mu = bernoulli_z();
        let plan = build_plan(&mu, &GroupElement::int(1), 4, NuStrategy::SingleAtom, guard()).unwrap();
        let plain = RunOptions::with_horizon(1000);
        let full = RunOptions {
            materialize_steps: Some(8),
            ..plain.clone()
        };
        for i in 0..50 {
            let a = plan.run(&plain, RunSeed::new(5, i)).unwrap();
            let b = plan.run(&plain, RunSeed::new(5, i)).unwrap();
            let c = plan.run(&full, RunSeed::new(5, i)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.time, c.time);
        }
    }

    #[test]
    fn horizon_is_rounded_to_blocks() {
        let mu = bernoulli_z();
        let plan = build_plan(&mu, &GroupElement::int(2), 4, NuStrategy::SingleAtom, guard()).unwrap();
        let run = plan.run(&RunOptions::with_horizon(5), RunSeed::new(1, 1)).unwrap();
        assert_eq!(run.horizon, 6);
        assert!(run.horizon_rounded);
        assert!(matches!(plan.run(&RunOptions::with_horizon(0), RunSeed::new(1, 1)), Err(PlanError::ZeroHorizon)));
    }

    #[test]
    fn multi_couple_shares_base_walk() {
        let mu = bernoulli_z();
        let xs = [GroupElement::int(1), GroupElement::int(2)];
        let opts = RunOptions {
            horizon: 10_000,
            materialize_steps: Some(12),
            record_labels: false,
        };
        let runs = multi_couple(&mu, &xs, 8, NuStrategy::SingleAtom, &opts, RunSeed::new(3, 0), guard()).unwrap();
        let runs: Vec<_> = runs.into_iter().map(|r| r.unwrap()).collect();
        let common = runs[0].steps_s.len().min(runs[1].steps_s.len());
        assert_eq!(runs[0].steps_s[..common], runs[1].steps_s[..common]);
        // The first layer is exactly the single-plan run for the same seed.
        let plan = build_plan(&mu, &xs[0], 8, NuStrategy::SingleAtom, guard()).unwrap();
        let single = plan.run(&opts, RunSeed::new(3, 0)).unwrap();
        assert_eq!(single.time, runs[0].time);
    }

    #[test]
    fn multi_couple_edge_cases() {
        let mu = bernoulli_z();
        let opts = RunOptions {
            horizon: 100,
            materialize_steps: Some(5),
            record_labels: false,
        };
        let none = multi_couple(&mu, &[], 8, NuStrategy::SingleAtom, &opts, RunSeed::new(0, 0), guard()).unwrap();
        assert!(none.is_empty());
        let e = GroupElement::int(0);
        let runs = multi_couple(&mu, &[e], 8, NuStrategy::SingleAtom, &opts, RunSeed::new(0, 0), guard()).unwrap();
        let r = runs[0].as_ref().unwrap();
        assert_eq!(r.time, CouplingTime::Finite(0));
        assert_eq!(r.steps_s, r.steps_sx);

        let z = GroupCtx::lattice(1).unwrap();
        let even = AtomicMeasure::<Rational>::parse_literal(z, "0=1/2 2=1/2").unwrap();
        let runs = multi_couple(
            &even,
            &[GroupElement::int(1), GroupElement::int(2)],
            6,
            NuStrategy::SingleAtom,
            &opts,
            RunSeed::new(0, 0),
            guard(),
        )
        .unwrap();
        assert!(matches!(runs[0], Err(PlanError::NoOverlap { .. })));
        assert!(runs[1].is_ok());
    }

    #[test]
    fn censored_runs_report_horizon() {
        let mu = bernoulli_z();
        let plan = build_plan(&mu, &GroupElement::int(1), 4, NuStrategy::SingleAtom, guard()).unwrap();
        let mut censored = 0;
        for i in 0..200 {
            let run = plan.run(&RunOptions::with_horizon(3), RunSeed::new(8, i)).unwrap();
            match run.time {
                CouplingTime::CensoredAt(h) => {
                    censored += 1;
                    assert_eq!(h, 3);
                    assert_eq!(run.blocks_executed, 3);
                    assert_eq!(run.time.exceeds(3), Some(true));
                    assert_eq!(run.time.exceeds(4), None);
                }
                CouplingTime::Finite(t) => assert!(t == 1 || t == 3),
            }
        }
        // P(τ > 3) = 3/8.
        assert!(censored > 40 && censored < 110, "{censored}");
        let _ = ratio::<f64>(1, 2);
    }
}
