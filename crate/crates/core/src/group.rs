//! Concrete countable discrete groups.
//!
//! A [`GroupCtx`] names the group; a [`GroupElement`] is a value in canonical
//! form for that group. Canonical form means structural equality of two
//! elements coincides with group equality, so elements can key hash maps
//! directly.
//!
//! Supported groups:
//!
//! * `IntLattice { dim }`: the lattice ℤ^dim under addition.
//! * `Cyclic { modulus }`: ℤ/modulus ℤ.
//! * `DirectProduct(parts)`: componentwise product of the above.
//! * `FreeGroup { rank }`: the free group on `rank` letters, elements stored
//!   as reduced words over signed generator indices (`+i` is the i-th letter,
//!   `-i` its inverse).
//!
//! # Canonical byte encoding
//!
//! [`GroupCtx::encode`] produces the bit-exact encoding used for ordering and
//! tie-breaking:
//!
//! * lattice: `dim` coordinates, each an `i64` big-endian with the sign bit
//!   flipped (so byte order equals numeric order);
//! * cyclic: the residue as `u64` big-endian;
//! * free group: each letter as `i32` big-endian with the sign bit flipped;
//!   the identity is the empty string;
//! * direct product: for every component a `u32` big-endian byte length
//!   followed by the component encoding.

use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("malformed element for {ctx}: {reason}")]
    Malformed { ctx: String, reason: String },
    #[error("invalid group parameters: {0}")]
    InvalidCtx(String),
    #[error("cannot parse group `{0}`")]
    ParseCtx(String),
    #[error("cannot parse element `{text}` of {ctx}: {reason}")]
    ParseElement {
        text: String,
        ctx: String,
        reason: String,
    },
    #[error("integer overflow in lattice arithmetic")]
    Overflow,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupCtx {
    IntLattice { dim: usize },
    Cyclic { modulus: u64 },
    DirectProduct(Vec<GroupCtx>),
    FreeGroup { rank: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupElement {
    Lattice(SmallVec<[i64; 4]>),
    Residue(u64),
    Tuple(Vec<GroupElement>),
    Word(Vec<i32>),
}

/// Result of probing the order of an element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementOrder {
    Finite(u64),
    InfiniteOrBeyondCap,
}

impl GroupElement {
    pub fn lattice(coords: &[i64]) -> Self {
        GroupElement::Lattice(SmallVec::from_slice(coords))
    }

    pub fn int(v: i64) -> Self {
        GroupElement::Lattice(SmallVec::from_slice(&[v]))
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn flip_i64(v: i64) -> [u8; 8] {
    ((v as u64) ^ (1u64 << 63)).to_be_bytes()
}

fn flip_i32(v: i32) -> [u8; 4] {
    ((v as u32) ^ (1u32 << 31)).to_be_bytes()
}

impl GroupCtx {
    pub fn lattice(dim: usize) -> Result<Self, GroupError> {
        if dim == 0 {
            return Err(GroupError::InvalidCtx("lattice dimension must be >= 1".into()));
        }
        Ok(GroupCtx::IntLattice { dim })
    }

    pub fn cyclic(modulus: u64) -> Result<Self, GroupError> {
        if modulus == 0 {
            return Err(GroupError::InvalidCtx("cyclic modulus must be >= 1".into()));
        }
        Ok(GroupCtx::Cyclic { modulus })
    }

    pub fn free(rank: u32) -> Result<Self, GroupError> {
        if rank == 0 || rank > 26 {
            return Err(GroupError::InvalidCtx("free group rank must be in 1..=26".into()));
        }
        Ok(GroupCtx::FreeGroup { rank })
    }

    pub fn product(parts: Vec<GroupCtx>) -> Result<Self, GroupError> {
        if parts.is_empty() {
            return Err(GroupError::InvalidCtx("direct product needs at least one factor".into()));
        }
        for p in &parts {
            p.check()?;
        }
        Ok(GroupCtx::DirectProduct(parts))
    }

    /// Validates the context parameters.
    pub fn check(&self) -> Result<(), GroupError> {
        match self {
            GroupCtx::IntLattice { dim } => GroupCtx::lattice(*dim).map(|_| ()),
            GroupCtx::Cyclic { modulus } => GroupCtx::cyclic(*modulus).map(|_| ()),
            GroupCtx::FreeGroup { rank } => GroupCtx::free(*rank).map(|_| ()),
            GroupCtx::DirectProduct(parts) => {
                if parts.is_empty() {
                    return Err(GroupError::InvalidCtx("empty direct product".into()));
                }
                parts.iter().try_for_each(|p| p.check())
            }
        }
    }

    pub fn is_abelian(&self) -> bool {
        match self {
            GroupCtx::IntLattice { .. } | GroupCtx::Cyclic { .. } => true,
            GroupCtx::FreeGroup { rank } => *rank == 1,
            GroupCtx::DirectProduct(parts) => parts.iter().all(|p| p.is_abelian()),
        }
    }

    /// True when every element has finite order.
    pub fn is_finite(&self) -> bool {
        match self {
            GroupCtx::Cyclic { .. } => true,
            GroupCtx::IntLattice { .. } | GroupCtx::FreeGroup { .. } => false,
            GroupCtx::DirectProduct(parts) => parts.iter().all(|p| p.is_finite()),
        }
    }

    pub fn identity(&self) -> GroupElement {
        match self {
            GroupCtx::IntLattice { dim } => GroupElement::Lattice(SmallVec::from_elem(0, *dim)),
            GroupCtx::Cyclic { .. } => GroupElement::Residue(0),
            GroupCtx::FreeGroup { .. } => GroupElement::Word(Vec::new()),
            GroupCtx::DirectProduct(parts) => {
                GroupElement::Tuple(parts.iter().map(|p| p.identity()).collect())
            }
        }
    }

    pub fn is_identity(&self, g: &GroupElement) -> bool {
        match g {
            GroupElement::Lattice(v) => v.iter().all(|&c| c == 0),
            GroupElement::Residue(r) => *r == 0,
            GroupElement::Word(w) => w.is_empty(),
            GroupElement::Tuple(parts) => match self {
                GroupCtx::DirectProduct(ctxs) => {
                    ctxs.iter().zip(parts).all(|(c, p)| c.is_identity(p))
                }
                _ => false,
            },
        }
    }

    fn malformed(&self, reason: impl Into<String>) -> GroupError {
        GroupError::Malformed {
            ctx: self.to_string(),
            reason: reason.into(),
        }
    }

    /// Checks that `g` is a canonical encoding of an element of this group.
    pub fn validate(&self, g: &GroupElement) -> Result<(), GroupError> {
        match (self, g) {
            (GroupCtx::IntLattice { dim }, GroupElement::Lattice(v)) => {
                if v.len() != *dim {
                    return Err(self.malformed(format!("expected {dim} coordinates, got {}", v.len())));
                }
                Ok(())
            }
            (GroupCtx::Cyclic { modulus }, GroupElement::Residue(r)) => {
                if r >= modulus {
                    return Err(self.malformed(format!("residue {r} not reduced")));
                }
                Ok(())
            }
            (GroupCtx::FreeGroup { rank }, GroupElement::Word(w)) => {
                for (i, &l) in w.iter().enumerate() {
                    if l == 0 || l.unsigned_abs() > *rank {
                        return Err(self.malformed(format!("letter {l} out of range")));
                    }
                    if i > 0 && w[i - 1] == -l {
                        return Err(self.malformed("word is not reduced"));
                    }
                }
                Ok(())
            }
            (GroupCtx::DirectProduct(ctxs), GroupElement::Tuple(parts)) => {
                if ctxs.len() != parts.len() {
                    return Err(self.malformed("component count mismatch"));
                }
                ctxs.iter().zip(parts).try_for_each(|(c, p)| c.validate(p))
            }
            _ => Err(self.malformed("element kind does not match group")),
        }
    }

    pub fn mul(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement, GroupError> {
        match (self, g, h) {
            (GroupCtx::IntLattice { dim }, GroupElement::Lattice(a), GroupElement::Lattice(b))
                if a.len() == *dim && b.len() == *dim =>
            {
                let mut out = SmallVec::with_capacity(*dim);
                for (x, y) in a.iter().zip(b.iter()) {
                    out.push(x.checked_add(*y).ok_or(GroupError::Overflow)?);
                }
                Ok(GroupElement::Lattice(out))
            }
            (GroupCtx::Cyclic { modulus }, GroupElement::Residue(a), GroupElement::Residue(b))
                if a < modulus && b < modulus =>
            {
                let s = (*a as u128 + *b as u128) % (*modulus as u128);
                Ok(GroupElement::Residue(s as u64))
            }
            (GroupCtx::FreeGroup { .. }, GroupElement::Word(a), GroupElement::Word(b)) => {
                self.validate(g)?;
                self.validate(h)?;
                let mut out = Vec::with_capacity(a.len() + b.len());
                out.extend_from_slice(a);
                for &l in b {
                    if out.last() == Some(&-l) {
                        out.pop();
                    } else {
                        out.push(l);
                    }
                }
                Ok(GroupElement::Word(out))
            }
            (GroupCtx::DirectProduct(ctxs), GroupElement::Tuple(a), GroupElement::Tuple(b))
                if a.len() == ctxs.len() && b.len() == ctxs.len() =>
            {
                let parts = ctxs
                    .iter()
                    .zip(a.iter().zip(b))
                    .map(|(c, (x, y))| c.mul(x, y))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(GroupElement::Tuple(parts))
            }
            _ => {
                self.validate(g)?;
                self.validate(h)?;
                Err(self.malformed("element kind does not match group"))
            }
        }
    }

    pub fn inv(&self, g: &GroupElement) -> Result<GroupElement, GroupError> {
        self.validate(g)?;
        Ok(match (self, g) {
            (_, GroupElement::Lattice(v)) => {
                let mut out = SmallVec::with_capacity(v.len());
                for c in v {
                    out.push(c.checked_neg().ok_or(GroupError::Overflow)?);
                }
                GroupElement::Lattice(out)
            }
            (GroupCtx::Cyclic { modulus }, GroupElement::Residue(r)) => {
                GroupElement::Residue((modulus - r) % modulus)
            }
            (_, GroupElement::Word(w)) => GroupElement::Word(w.iter().rev().map(|l| -l).collect()),
            (GroupCtx::DirectProduct(ctxs), GroupElement::Tuple(parts)) => GroupElement::Tuple(
                ctxs.iter()
                    .zip(parts)
                    .map(|(c, p)| c.inv(p))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            _ => unreachable!("validated above"),
        })
    }

    /// `g^k` for `k >= 0` by repeated squaring.
    pub fn pow(&self, g: &GroupElement, mut k: u64) -> Result<GroupElement, GroupError> {
        let mut base = g.clone();
        let mut acc = self.identity();
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(&acc, &base)?;
            }
            k >>= 1;
            if k > 0 {
                base = self.mul(&base, &base)?;
            }
        }
        Ok(acc)
    }

    pub fn commutes(&self, g: &GroupElement, h: &GroupElement) -> Result<bool, GroupError> {
        Ok(self.mul(g, h)? == self.mul(h, g)?)
    }

    /// Least `d <= cap` with `g^d = e`. Lattice and free-group elements other
    /// than the identity are torsion-free and answered without iterating.
    pub fn element_order(&self, g: &GroupElement, cap: u64) -> Result<ElementOrder, GroupError> {
        self.validate(g)?;
        let cap = cap.max(1);
        let exact = self.exact_order(g);
        Ok(match exact {
            Some(d) if d <= cap => ElementOrder::Finite(d),
            _ => ElementOrder::InfiniteOrBeyondCap,
        })
    }

    // None means infinite order; orders overflowing u64 are also reported as None.
    fn exact_order(&self, g: &GroupElement) -> Option<u64> {
        if self.is_identity(g) {
            return Some(1);
        }
        match (self, g) {
            (GroupCtx::Cyclic { modulus }, GroupElement::Residue(r)) => Some(modulus / gcd(*r, *modulus)),
            (GroupCtx::DirectProduct(ctxs), GroupElement::Tuple(parts)) => {
                let mut acc: u64 = 1;
                for (c, p) in ctxs.iter().zip(parts) {
                    let d = c.exact_order(p)?;
                    acc = (acc / gcd(acc, d)).checked_mul(d)?;
                }
                Some(acc)
            }
            _ => None,
        }
    }

    pub fn encode(&self, g: &GroupElement) -> Vec<u8> {
        let mut out = Vec::new();
        encode_into(g, &mut out);
        out
    }

    pub fn decode(&self, bytes: &[u8]) -> Result<GroupElement, GroupError> {
        let (g, rest) = self.decode_prefix(bytes)?;
        if !rest.is_empty() {
            return Err(self.malformed("trailing bytes"));
        }
        self.validate(&g)?;
        Ok(g)
    }

    fn decode_prefix<'a>(&self, bytes: &'a [u8]) -> Result<(GroupElement, &'a [u8]), GroupError> {
        match self {
            GroupCtx::IntLattice { dim } => {
                let need = 8 * dim;
                if bytes.len() < need {
                    return Err(self.malformed("truncated lattice encoding"));
                }
                let coords = bytes[..need]
                    .chunks_exact(8)
                    .map(|c| (u64::from_be_bytes(c.try_into().unwrap()) ^ (1u64 << 63)) as i64)
                    .collect();
                Ok((GroupElement::Lattice(coords), &bytes[need..]))
            }
            GroupCtx::Cyclic { .. } => {
                if bytes.len() < 8 {
                    return Err(self.malformed("truncated residue encoding"));
                }
                let r = u64::from_be_bytes(bytes[..8].try_into().unwrap());
                Ok((GroupElement::Residue(r), &bytes[8..]))
            }
            GroupCtx::FreeGroup { .. } => {
                if !bytes.len().is_multiple_of(4) {
                    return Err(self.malformed("word encoding length not a multiple of 4"));
                }
                let word = bytes
                    .chunks_exact(4)
                    .map(|c| (u32::from_be_bytes(c.try_into().unwrap()) ^ (1u32 << 31)) as i32)
                    .collect();
                Ok((GroupElement::Word(word), &[]))
            }
            GroupCtx::DirectProduct(ctxs) => {
                let mut rest = bytes;
                let mut parts = Vec::with_capacity(ctxs.len());
                for c in ctxs {
                    if rest.len() < 4 {
                        return Err(self.malformed("truncated component length"));
                    }
                    let len = u32::from_be_bytes(rest[..4].try_into().unwrap()) as usize;
                    rest = &rest[4..];
                    if rest.len() < len {
                        return Err(self.malformed("truncated component"));
                    }
                    let (p, tail) = c.decode_prefix(&rest[..len])?;
                    if !tail.is_empty() {
                        return Err(self.malformed("component length mismatch"));
                    }
                    parts.push(p);
                    rest = &rest[len..];
                }
                Ok((GroupElement::Tuple(parts), rest))
            }
        }
    }

    /// Parses the textual element syntax.
    ///
    /// Lattice: `(1,-2)` or `1,-2` (a bare integer for dimension one).
    /// Cyclic: any integer, reduced modulo the modulus.
    /// Free group: letters `a`, `b`, ... with capitals for inverses; `e`
    /// (rank < 5), `1` or the empty string denote the identity. The suffixes
    /// `⁻¹` and `^-1` are accepted as an alternative inverse marker.
    /// Direct product: `[g1; g2; ...]`.
    pub fn parse_element(&self, text: &str) -> Result<GroupElement, GroupError> {
        let err = |reason: &str| GroupError::ParseElement {
            text: text.to_string(),
            ctx: self.to_string(),
            reason: reason.to_string(),
        };
        let t = text.trim();
        match self {
            GroupCtx::IntLattice { dim } => {
                let inner = t.strip_prefix('(').and_then(|s| s.strip_suffix(')')).unwrap_or(t);
                let coords = inner
                    .split(',')
                    .map(|c| c.trim().parse::<i64>().map_err(|_| err("bad integer")))
                    .collect::<Result<SmallVec<[i64; 4]>, _>>()?;
                if coords.len() != *dim {
                    return Err(err("wrong number of coordinates"));
                }
                Ok(GroupElement::Lattice(coords))
            }
            GroupCtx::Cyclic { modulus } => {
                let v: i128 = t.parse().map_err(|_| err("bad integer"))?;
                Ok(GroupElement::Residue(v.rem_euclid(*modulus as i128) as u64))
            }
            GroupCtx::FreeGroup { rank } => {
                if t.is_empty() || t == "1" || (t == "e" && *rank < 5) {
                    return Ok(self.identity());
                }
                let normalized = t.replace("⁻¹", "^-1");
                let chars: Vec<char> = normalized.chars().collect();
                let mut letters = Vec::new();
                let mut i = 0;
                while i < chars.len() {
                    let c = chars[i];
                    if !c.is_ascii_alphabetic() {
                        return Err(err("unexpected character"));
                    }
                    let idx = (c.to_ascii_lowercase() as u8 - b'a') as i32 + 1;
                    if idx as u32 > *rank {
                        return Err(err("letter beyond group rank"));
                    }
                    let mut letter = if c.is_ascii_uppercase() { -idx } else { idx };
                    i += 1;
                    if chars[i..].starts_with(&['^', '-', '1']) {
                        letter = -letter;
                        i += 3;
                    }
                    letters.push(letter);
                }
                // Parsed words are reduced the same way products are.
                let mut out: Vec<i32> = Vec::with_capacity(letters.len());
                for l in letters {
                    if out.last() == Some(&-l) {
                        out.pop();
                    } else {
                        out.push(l);
                    }
                }
                Ok(GroupElement::Word(out))
            }
            GroupCtx::DirectProduct(ctxs) => {
                let inner = t
                    .strip_prefix('[')
                    .and_then(|s| s.strip_suffix(']'))
                    .ok_or_else(|| err("expected [g1; g2; ...]"))?;
                let fields: Vec<&str> = inner.split(';').collect();
                if fields.len() != ctxs.len() {
                    return Err(err("wrong number of components"));
                }
                let parts = ctxs
                    .iter()
                    .zip(fields)
                    .map(|(c, f)| c.parse_element(f))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(GroupElement::Tuple(parts))
            }
        }
    }

    /// Inverse of [`parse_element`](Self::parse_element).
    pub fn format_element(&self, g: &GroupElement) -> String {
        match (self, g) {
            (GroupCtx::IntLattice { dim }, GroupElement::Lattice(v)) => {
                let body = v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
                if *dim == 1 {
                    body
                } else {
                    format!("({body})")
                }
            }
            (_, GroupElement::Residue(r)) => r.to_string(),
            (GroupCtx::FreeGroup { rank }, GroupElement::Word(w)) => {
                if w.is_empty() {
                    return if *rank < 5 { "e".into() } else { "1".into() };
                }
                w.iter()
                    .map(|&l| {
                        let c = (b'a' + (l.unsigned_abs() - 1) as u8) as char;
                        if l < 0 {
                            c.to_ascii_uppercase()
                        } else {
                            c
                        }
                    })
                    .collect()
            }
            (GroupCtx::DirectProduct(ctxs), GroupElement::Tuple(parts)) => {
                let body = ctxs
                    .iter()
                    .zip(parts)
                    .map(|(c, p)| c.format_element(p))
                    .collect::<Vec<_>>()
                    .join("; ");
                format!("[{body}]")
            }
            _ => format!("{g:?}"),
        }
    }

    /// Parses `Z`, `Z^d`, `Z/d`, `F<r>` and products joined by ` x `.
    pub fn parse(text: &str) -> Result<Self, GroupError> {
        let t = text.trim();
        let bad = || GroupError::ParseCtx(text.to_string());
        let factors: Vec<&str> = t.split(" x ").map(str::trim).collect();
        if factors.len() > 1 {
            let parts = factors.into_iter().map(GroupCtx::parse).collect::<Result<Vec<_>, _>>()?;
            return GroupCtx::product(parts);
        }
        if t == "Z" {
            return GroupCtx::lattice(1);
        }
        if let Some(d) = t.strip_prefix("Z^") {
            return GroupCtx::lattice(d.parse().map_err(|_| bad())?);
        }
        if let Some(d) = t.strip_prefix("Z/") {
            return GroupCtx::cyclic(d.parse().map_err(|_| bad())?);
        }
        if let Some(r) = t.strip_prefix('F') {
            return GroupCtx::free(r.trim_start_matches('_').parse().map_err(|_| bad())?);
        }
        Err(bad())
    }
}

fn encode_into(g: &GroupElement, out: &mut Vec<u8>) {
    match g {
        GroupElement::Lattice(v) => v.iter().for_each(|&c| out.extend_from_slice(&flip_i64(c))),
        GroupElement::Residue(r) => out.extend_from_slice(&r.to_be_bytes()),
        GroupElement::Word(w) => w.iter().for_each(|&l| out.extend_from_slice(&flip_i32(l))),
        GroupElement::Tuple(parts) => {
            for p in parts {
                let mut buf = Vec::new();
                encode_into(p, &mut buf);
                out.extend_from_slice(&(buf.len() as u32).to_be_bytes());
                out.extend_from_slice(&buf);
            }
        }
    }
}

impl fmt::Display for GroupCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupCtx::IntLattice { dim: 1 } => write!(f, "Z"),
            GroupCtx::IntLattice { dim } => write!(f, "Z^{dim}"),
            GroupCtx::Cyclic { modulus } => write!(f, "Z/{modulus}"),
            GroupCtx::FreeGroup { rank } => write!(f, "F{rank}"),
            GroupCtx::DirectProduct(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " x ")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> GroupCtx {
        GroupCtx::free(2).unwrap()
    }

    #[test]
    fn cyclic_mul_and_inv() {
        let c4 = GroupCtx::cyclic(4).unwrap();
        let g = c4.mul(&GroupElement::Residue(3), &GroupElement::Residue(2)).unwrap();
        assert_eq!(g, GroupElement::Residue(1));
        let c5 = GroupCtx::cyclic(5).unwrap();
        assert_eq!(c5.inv(&GroupElement::Residue(2)).unwrap(), GroupElement::Residue(3));
    }

    #[test]
    fn free_group_reduces_on_multiplication() {
        let g = f2();
        let ab = g.parse_element("ab").unwrap();
        let binv_a = g.parse_element("b⁻¹a").unwrap();
        assert_eq!(binv_a, g.parse_element("Ba").unwrap());
        let prod = g.mul(&ab, &binv_a).unwrap();
        assert_eq!(g.format_element(&prod), "aa");
        assert_eq!(g.format_element(&g.inv(&ab).unwrap()), "BA");
    }

    #[test]
    fn lattice_mul_and_inv() {
        let z2 = GroupCtx::lattice(2).unwrap();
        let p = z2
            .mul(&GroupElement::lattice(&[1, 2]), &GroupElement::lattice(&[3, -2]))
            .unwrap();
        assert_eq!(p, GroupElement::lattice(&[4, 0]));
        let z = GroupCtx::lattice(1).unwrap();
        assert_eq!(z.inv(&GroupElement::int(7)).unwrap(), GroupElement::int(-7));
    }

    #[test]
    fn element_orders() {
        let c6 = GroupCtx::cyclic(6).unwrap();
        assert_eq!(c6.element_order(&GroupElement::Residue(2), 100).unwrap(), ElementOrder::Finite(3));
        let z = GroupCtx::lattice(1).unwrap();
        assert_eq!(z.element_order(&GroupElement::int(1), 100).unwrap(), ElementOrder::InfiniteOrBeyondCap);
        let c4 = GroupCtx::cyclic(4).unwrap();
        assert_eq!(c4.element_order(&GroupElement::Residue(2), 1).unwrap(), ElementOrder::InfiniteOrBeyondCap);
        assert_eq!(c4.element_order(&GroupElement::Residue(0), 1).unwrap(), ElementOrder::Finite(1));
        let p = GroupCtx::parse("Z/4 x Z/6").unwrap();
        let g = p.parse_element("[1; 2]").unwrap();
        assert_eq!(p.element_order(&g, 100).unwrap(), ElementOrder::Finite(12));
        assert_eq!(f2().element_order(&f2().parse_element("ab").unwrap(), 100).unwrap(), ElementOrder::InfiniteOrBeyondCap);
    }

    #[test]
    fn malformed_elements_are_rejected() {
        let c4 = GroupCtx::cyclic(4).unwrap();
        assert!(matches!(
            c4.mul(&GroupElement::Residue(7), &GroupElement::Residue(1)),
            Err(GroupError::Malformed { .. })
        ));
        assert!(c4.mul(&GroupElement::int(1), &GroupElement::Residue(1)).is_err());
        let g = f2();
        assert!(g.inv(&GroupElement::Word(vec![1, -1])).is_err());
        assert!(g.inv(&GroupElement::Word(vec![3])).is_err());
        let z2 = GroupCtx::lattice(2).unwrap();
        assert!(z2.inv(&GroupElement::int(3)).is_err());
    }

    #[test]
    fn invalid_contexts() {
        assert!(GroupCtx::cyclic(0).is_err());
        assert!(GroupCtx::lattice(0).is_err());
        assert!(GroupCtx::free(0).is_err());
        assert!(GroupCtx::parse("Q").is_err());
    }

    #[test]
    fn parse_and_display_contexts() {
        for s in ["Z", "Z^3", "Z/6", "F2", "Z/2 x Z"] {
            assert_eq!(GroupCtx::parse(s).unwrap().to_string(), s);
        }
    }

    #[test]
    fn encoding_order_matches_numeric_order() {
        let z = GroupCtx::lattice(1).unwrap();
        let a = z.encode(&GroupElement::int(-3));
        let b = z.encode(&GroupElement::int(2));
        assert!(a < b);
        assert_eq!(z.decode(&a).unwrap(), GroupElement::int(-3));
    }

    #[test]
    fn identity_text_in_large_rank() {
        let f6 = GroupCtx::free(6).unwrap();
        assert_eq!(f6.format_element(&f6.identity()), "1");
        assert_eq!(f6.parse_element("e").unwrap(), GroupElement::Word(vec![5]));
    }
}
