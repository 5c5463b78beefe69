//! Finitely supported measures on a [`GroupCtx`].
//!
//! Shift convention: `shift(x, μ)` moves every atom `z` to `x·z`, so
//! `shift(x, μ)(z) = μ(x⁻¹z)`. The inverse shift used by the overlap
//! criterion is `shift(x⁻¹, ·)`; nothing else in the crate shifts measures.

use std::collections::hash_map::{DefaultHasher, Entry};
use std::collections::HashMap;
use std::hash::BuildHasherDefault;
use std::io::{self, Write};

use thiserror::Error;

use crate::group::{GroupCtx, GroupElement, GroupError};
use crate::mass::{Mass, ParseMassError};

/// Hash map with a fixed hasher, so iteration order (and hence floating point
/// summation order) is reproducible from run to run.
pub type AtomMap<M> = HashMap<GroupElement, M, BuildHasherDefault<DefaultHasher>>;

pub const DEFAULT_ATOM_GUARD: usize = 5_000_000;
pub const GUARD_ENV_VAR: &str = "EXCOUPLE_GUARD_ATOMS";

/// Upper bound on the support size of any convolution result.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AtomGuard {
    pub max_atoms: usize,
}

impl Default for AtomGuard {
    fn default() -> Self {
        AtomGuard {
            max_atoms: DEFAULT_ATOM_GUARD,
        }
    }
}

impl AtomGuard {
    pub fn new(max_atoms: usize) -> Self {
        AtomGuard { max_atoms }
    }

    /// Reads `EXCOUPLE_GUARD_ATOMS`, falling back to the default bound.
    pub fn from_env() -> Self {
        std::env::var(GUARD_ENV_VAR)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .map(AtomGuard::new)
            .unwrap_or_default()
    }
}

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("measures live on different groups ({0} vs {1})")]
    ContextMismatch(String, String),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("negative mass {0} at an atom")]
    NegativeMass(String),
    #[error("support exceeds atom guard of {bound} atoms (set {GUARD_ENV_VAR} to raise it)")]
    AtomGuard { bound: usize },
    #[error("expected a probability measure, total mass is {total}")]
    NotProbability { total: f64 },
    #[error(transparent)]
    ParseMass(#[from] ParseMassError),
    #[error("malformed measure literal: {0}")]
    Literal(String),
    #[error("power exponent must be >= 1")]
    ZeroPower,
}

#[derive(Clone, Debug)]
pub struct AtomicMeasure<M = f64> {
    ctx: GroupCtx,
    atoms: AtomMap<M>,
    total: M,
}

/// Least `n` at which `μⁿ ∧ shift(x⁻¹, μⁿ)` is nonzero, with that meet.
#[derive(Clone, Debug)]
pub struct Overlap<M> {
    pub n0: usize,
    pub xi: AtomicMeasure<M>,
}

impl<M: Mass> PartialEq for AtomicMeasure<M> {
    fn eq(&self, other: &Self) -> bool {
        self.ctx == other.ctx
            && self.atoms.len() == other.atoms.len()
            && self.atoms.iter().all(|(g, m)| other.atoms.get(g) == Some(m))
    }
}

impl<M: Mass> AtomicMeasure<M> {
    pub fn zero(ctx: GroupCtx) -> Self {
        AtomicMeasure {
            ctx,
            atoms: AtomMap::default(),
            total: M::zero(),
        }
    }

    pub fn dirac(ctx: GroupCtx, g: GroupElement) -> Result<Self, MeasureError> {
        Self::from_atoms(ctx, [(g, M::one())])
    }

    /// Equal mass on each listed element (duplicates accumulate).
    pub fn uniform(ctx: GroupCtx, elems: &[GroupElement]) -> Result<Self, MeasureError> {
        let w = M::one() / M::from_u64(elems.len() as u64);
        Self::from_atoms(ctx, elems.iter().cloned().map(|g| (g, w.clone())))
    }

    pub fn from_atoms(
        ctx: GroupCtx,
        atoms: impl IntoIterator<Item = (GroupElement, M)>,
    ) -> Result<Self, MeasureError> {
        ctx.check()?;
        let mut map = AtomMap::default();
        for (g, m) in atoms {
            ctx.validate(&g)?;
            if m < M::zero() {
                return Err(MeasureError::NegativeMass(m.to_string()));
            }
            accumulate(&mut map, g, m);
        }
        Ok(Self::from_map(ctx, map))
    }

    /// Parses whitespace-separated `element=mass` pairs, e.g. `0=1/2 1=1/2`.
    pub fn parse_literal(ctx: GroupCtx, text: &str) -> Result<Self, MeasureError> {
        let mut pairs = Vec::new();
        for tok in text.split_whitespace() {
            let (el, mass) = tok
                .rsplit_once('=')
                .ok_or_else(|| MeasureError::Literal(format!("`{tok}` is not element=mass")))?;
            pairs.push((ctx.parse_element(el)?, M::parse_mass(mass)?));
        }
        if pairs.is_empty() {
            return Err(MeasureError::Literal("empty measure".into()));
        }
        Self::from_atoms(ctx, pairs)
    }

    /// Same as [`parse_literal`](Self::parse_literal) from already split pairs.
    pub fn from_text_pairs(ctx: GroupCtx, pairs: &[(String, String)]) -> Result<Self, MeasureError> {
        let atoms = pairs
            .iter()
            .map(|(e, m)| Ok((ctx.parse_element(e)?, M::parse_mass(m)?)))
            .collect::<Result<Vec<_>, MeasureError>>()?;
        Self::from_atoms(ctx, atoms)
    }

    fn from_map(ctx: GroupCtx, mut atoms: AtomMap<M>) -> Self {
        let raw_total = sum_masses(&atoms);
        atoms.retain(|_, m| !m.negligible(&raw_total));
        let total = sum_masses(&atoms);
        AtomicMeasure { ctx, atoms, total }
    }

    pub fn ctx(&self) -> &GroupCtx {
        &self.ctx
    }

    pub fn total(&self) -> &M {
        &self.total
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// True for the zero measure.
    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn get(&self, g: &GroupElement) -> M {
        self.atoms.get(g).cloned().unwrap_or_else(M::zero)
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.atoms.contains_key(g)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupElement, &M)> {
        self.atoms.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &GroupElement> {
        self.atoms.keys()
    }

    /// Atoms sorted by canonical encoding.
    pub fn sorted_atoms(&self) -> Vec<(GroupElement, M)> {
        let mut v: Vec<_> = self
            .atoms
            .iter()
            .map(|(g, m)| (self.ctx.encode(g), g.clone(), m.clone()))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v.into_iter().map(|(_, g, m)| (g, m)).collect()
    }

    pub fn is_probability(&self, tol: f64) -> bool {
        self.total.approx_eq(&M::one(), tol)
    }

    pub fn map_mass<N: Mass>(&self, f: impl Fn(&M) -> N) -> AtomicMeasure<N> {
        let atoms = self.atoms.iter().map(|(g, m)| (g.clone(), f(m))).collect();
        AtomicMeasure::from_map(self.ctx.clone(), atoms)
    }

    pub fn to_f64(&self) -> AtomicMeasure<f64> {
        self.map_mass(|m| m.to_f64())
    }

    fn same_ctx(&self, other: &Self) -> Result<(), MeasureError> {
        if self.ctx != other.ctx {
            return Err(MeasureError::ContextMismatch(
                self.ctx.to_string(),
                other.ctx.to_string(),
            ));
        }
        Ok(())
    }

    /// `(self * other)(z) = Σ_{g·h = z} self(g)·other(h)`.
    pub fn convolve(&self, other: &Self, guard: AtomGuard) -> Result<Self, MeasureError> {
        self.same_ctx(other)?;
        let mut out = AtomMap::default();
        for (g, mg) in &self.atoms {
            for (h, mh) in &other.atoms {
                let z = self.ctx.mul(g, h)?;
                accumulate(&mut out, z, mg.clone() * mh.clone());
                if out.len() > guard.max_atoms {
                    return Err(MeasureError::AtomGuard {
                        bound: guard.max_atoms,
                    });
                }
            }
        }
        Ok(Self::from_map(self.ctx.clone(), out))
    }

    /// n-fold convolution by repeated squaring.
    pub fn power(&self, n: usize, guard: AtomGuard) -> Result<Self, MeasureError> {
        if n == 0 {
            return Err(MeasureError::ZeroPower);
        }
        let mut base = self.clone();
        let mut acc: Option<Self> = None;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.convolve(&base, guard)?,
                });
            }
            k >>= 1;
            if k > 0 {
                base = base.convolve(&base, guard)?;
            }
        }
        Ok(acc.expect("n >= 1"))
    }

    /// n-fold convolution by left-to-right iteration.
    pub fn power_iterated(&self, n: usize, guard: AtomGuard) -> Result<Self, MeasureError> {
        if n == 0 {
            return Err(MeasureError::ZeroPower);
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.convolve(self, guard)?;
        }
        Ok(acc)
    }

    /// `[δ_e, μ, μ², …, μⁿ]`.
    pub fn powers_upto(&self, n: usize, guard: AtomGuard) -> Result<Vec<Self>, MeasureError> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(Self::dirac(self.ctx.clone(), self.ctx.identity())?);
        for k in 1..=n {
            let next = if k == 1 {
                self.clone()
            } else {
                out[k - 1].convolve(self, guard)?
            };
            out.push(next);
        }
        Ok(out)
    }

    /// Left translation of every atom by `x`.
    pub fn shift(&self, x: &GroupElement) -> Result<Self, MeasureError> {
        self.ctx.validate(x)?;
        let mut out = AtomMap::default();
        for (z, m) in &self.atoms {
            out.insert(self.ctx.mul(x, z)?, m.clone());
        }
        Ok(AtomicMeasure {
            ctx: self.ctx.clone(),
            atoms: out,
            total: self.total.clone(),
        })
    }

    /// Atomwise minimum.
    pub fn meet(&self, other: &Self) -> Result<Self, MeasureError> {
        self.same_ctx(other)?;
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut out = AtomMap::default();
        for (g, m) in &small.atoms {
            if let Some(m2) = large.atoms.get(g) {
                out.insert(g.clone(), m.min_of(m2));
            }
        }
        Ok(Self::from_map(self.ctx.clone(), out))
    }

    pub fn add(&self, other: &Self) -> Result<Self, MeasureError> {
        self.same_ctx(other)?;
        let mut out = self.atoms.clone();
        for (g, m) in &other.atoms {
            accumulate(&mut out, g.clone(), m.clone());
        }
        Ok(Self::from_map(self.ctx.clone(), out))
    }

    /// Whether `self ≤ other` atomwise, up to `tol` in double mode.
    pub fn dominated_by(&self, other: &Self, tol: f64) -> Result<bool, MeasureError> {
        self.same_ctx(other)?;
        Ok(self.atoms.iter().all(|(g, m)| {
            let o = other.get(g);
            *m <= o || m.approx_eq(&o, tol)
        }))
    }

    /// `Σ_z |μ1(z) − μ2(z)|`, the total variation norm of the difference.
    pub fn tv_distance(&self, other: &Self) -> Result<M, MeasureError> {
        self.same_ctx(other)?;
        for m in [self, other] {
            if !m.is_probability(1e-9) {
                return Err(MeasureError::NotProbability {
                    total: m.total.to_f64(),
                });
            }
        }
        Ok(self.l1_distance(other))
    }

    fn l1_distance(&self, other: &Self) -> M {
        let mut acc = M::zero();
        for (g, m) in &self.atoms {
            acc = acc + m.abs_diff(&other.get(g));
        }
        for (g, m) in &other.atoms {
            if !self.atoms.contains_key(g) {
                acc = acc + m;
            }
        }
        acc
    }

    /// Least `n ≤ n_max` with `μⁿ ∧ shift(x⁻¹, μⁿ) ≠ 0`.
    pub fn find_overlap_order(
        &self,
        x: &GroupElement,
        n_max: usize,
        guard: AtomGuard,
    ) -> Result<Option<Overlap<M>>, MeasureError> {
        let x_inv = self.ctx.inv(x)?;
        let mut pow = self.clone();
        for n in 1..=n_max {
            if n > 1 {
                pow = pow.convolve(self, guard)?;
            }
            let xi = pow.meet(&pow.shift(&x_inv)?)?;
            if !xi.is_zero() {
                return Ok(Some(Overlap { n0: n, xi }));
            }
        }
        Ok(None)
    }

    /// Whether `x` commutes with every atom of `μⁿ`.
    pub fn commutes_with_support(
        &self,
        x: &GroupElement,
        n: usize,
        guard: AtomGuard,
    ) -> Result<bool, MeasureError> {
        self.ctx.validate(x)?;
        if self.ctx.is_abelian() || self.ctx.is_identity(x) {
            return Ok(true);
        }
        let pow = self.power(n, guard)?;
        for s in pow.support() {
            if !self.ctx.commutes(x, s)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// One JSON object per line, `{"element": ..., "mass": ...}`, sorted by
    /// canonical encoding.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (g, m) in self.sorted_atoms() {
            let rec = serde_json::json!({
                "element": self.ctx.format_element(&g),
                "mass": m.to_json(),
            });
            writeln!(w, "{rec}")?;
        }
        Ok(())
    }
}

fn accumulate<M: Mass>(map: &mut AtomMap<M>, g: GroupElement, m: M) {
    match map.entry(g) {
        Entry::Occupied(mut e) => {
            let v = e.get_mut();
            *v = v.clone() + m;
        }
        Entry::Vacant(e) => {
            e.insert(m);
        }
    }
}

fn sum_masses<M: Mass>(atoms: &AtomMap<M>) -> M {
    atoms.values().fold(M::zero(), |acc, m| acc + m)
}
