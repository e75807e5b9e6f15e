//! Symmetric-group combinatorics.
//!
//! Permutations are stored in one-line notation on `{0, .., m-1}`. The
//! product convention is fixed crate-wide: `a.compose(&b)` is the map
//! `x -> a(b(x))`, so the right factor acts first.
//!
//! For channel moments the group is `S_{2p}` and its points carry the labels
//! `p^B, .., 2^B, 1^B, 1^T, 2^T, .., p^T` in that order (see [`LabeledIndex`]).

use std::fmt;

use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest degree [`enumerate`] accepts without an explicit override.
pub const DEFAULT_ENUMERATION_CAP: usize = 8;

/// A bijection of `{0, .., m-1}` in one-line notation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    /// Builds a permutation from its images, checking that they form a bijection.
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let m = images.len();
        let mut seen = vec![false; m];
        for &x in &images {
            if x >= m || seen[x] {
                return Err(Error::NotAPermutation(images));
            }
            seen[x] = true;
        }
        Ok(Self { images })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            images: (0..m).collect(),
        }
    }

    pub fn transposition(m: usize, a: usize, b: usize) -> Result<Self> {
        if a >= m || b >= m || a == b {
            return Err(Error::InvalidArgument(format!(
                "transposition ({a} {b}) is not valid in S_{m}"
            )));
        }
        let mut images: Vec<usize> = (0..m).collect();
        images.swap(a, b);
        Ok(Self { images })
    }

    /// Builds a permutation from disjoint cycles; `(a b c)` sends `a -> b -> c -> a`.
    pub fn from_cycles(m: usize, cycles: &[&[usize]]) -> Result<Self> {
        let mut images: Vec<usize> = (0..m).collect();
        let mut touched = vec![false; m];
        for cycle in cycles {
            for (idx, &x) in cycle.iter().enumerate() {
                if x >= m || touched[x] {
                    return Err(Error::InvalidArgument(format!(
                        "cycles {cycles:?} are not disjoint cycles on {m} points"
                    )));
                }
                touched[x] = true;
                images[x] = cycle[(idx + 1) % cycle.len()];
            }
        }
        Ok(Self { images })
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.images[x]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &x)| i == x)
    }

    pub fn inverse(&self) -> Self {
        let mut images = vec![0; self.images.len()];
        for (i, &x) in self.images.iter().enumerate() {
            images[x] = i;
        }
        Self { images }
    }

    /// `x -> self(other(x))`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.degree() != other.degree() {
            return Err(Error::DegreeMismatch {
                left: self.degree(),
                right: other.degree(),
            });
        }
        Ok(Self {
            images: other.images.iter().map(|&x| self.images[x]).collect(),
        })
    }

    /// `self * other^{-1}`, the combination that appears in every Weingarten sum.
    pub fn compose_inverse(&self, other: &Permutation) -> Result<Permutation> {
        self.compose(&other.inverse())
    }

    pub fn num_cycles(&self) -> usize {
        count_cycles(&self.images)
    }

    /// Minimal number of transpositions whose product is `self`.
    pub fn length(&self) -> usize {
        self.degree() - self.num_cycles()
    }

    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let m = self.degree();
        let mut seen = vec![false; m];
        let mut out = Vec::new();
        for start in 0..m {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                cycle.push(x);
                x = self.images[x];
            }
            out.push(cycle);
        }
        out
    }

    pub fn cycle_type(&self) -> CycleType {
        cycle_type_of(&self.images)
    }

    /// Multiplicative Möbius value: each `d`-cycle contributes `(-1)^(d-1) Cat(d-1)`.
    pub fn mobius(&self) -> BigInt {
        self.cycle_type().mobius()
    }

    /// Fixed points of `self`.
    pub fn fixed_points(&self) -> impl Iterator<Item = usize> + '_ {
        self.images
            .iter()
            .enumerate()
            .filter(|(i, &x)| *i == x)
            .map(|(i, _)| i)
    }
}

impl fmt::Display for Permutation {
    /// Cycle notation with fixed points omitted; the identity prints as `()`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        for cycle in self.cycles() {
            if cycle.len() < 2 {
                continue;
            }
            let body: Vec<String> = cycle.iter().map(|x| x.to_string()).collect();
            write!(f, "({})", body.join(" "))?;
            wrote = true;
        }
        if !wrote {
            write!(f, "()")?;
        }
        Ok(())
    }
}

/// `x -> a(b(x))` with a degree check.
pub fn compose(a: &Permutation, b: &Permutation) -> Result<Permutation> {
    a.compose(b)
}

/// Geodesic distance `|a^{-1} b|` in the Cayley graph generated by transpositions.
pub fn distance(a: &Permutation, b: &Permutation) -> usize {
    assert_eq!(a.degree(), b.degree(), "distance between different degrees");
    let inv = a.inverse();
    let m = a.degree();
    m - cycles_of_product(inv.images(), b.images())
}

/// True when `b` lies on a geodesic from `a` to `c`: `|a^{-1}b| + |b^{-1}c| = |a^{-1}c|`.
///
/// # Panics
/// If the three degrees differ.
pub fn is_geodesic(a: &Permutation, b: &Permutation, c: &Permutation) -> bool {
    assert!(
        a.degree() == b.degree() && b.degree() == c.degree(),
        "is_geodesic on permutations of different degrees"
    );
    distance(a, b) + distance(b, c) == distance(a, c)
}

/// Number of cycles of one-line images.
pub(crate) fn count_cycles(images: &[usize]) -> usize {
    let m = images.len();
    if m <= 64 {
        let mut seen: u64 = 0;
        let mut count = 0;
        for start in 0..m {
            if seen & (1 << start) != 0 {
                continue;
            }
            count += 1;
            let mut x = start;
            while seen & (1 << x) == 0 {
                seen |= 1 << x;
                x = images[x];
            }
        }
        count
    } else {
        let mut seen = vec![false; m];
        let mut count = 0;
        for start in 0..m {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                x = images[x];
            }
        }
        count
    }
}

/// Number of cycles of `x -> a(b(x))` without materializing the product.
pub(crate) fn cycles_of_product(a: &[usize], b: &[usize]) -> usize {
    debug_assert_eq!(a.len(), b.len());
    let m = a.len();
    assert!(m <= 64, "cycles_of_product supports degree <= 64");
    let mut seen: u64 = 0;
    let mut count = 0;
    for start in 0..m {
        if seen & (1 << start) != 0 {
            continue;
        }
        count += 1;
        let mut x = start;
        while seen & (1 << x) == 0 {
            seen |= 1 << x;
            x = a[b[x]];
        }
    }
    count
}

/// Cycle type of `x -> a(b(x))`.
pub(crate) fn cycle_type_of_product(a: &[usize], b: &[usize], buf: &mut Vec<usize>) {
    let m = a.len();
    assert!(m <= 64, "cycle_type_of_product supports degree <= 64");
    buf.clear();
    let mut seen: u64 = 0;
    for start in 0..m {
        if seen & (1 << start) != 0 {
            continue;
        }
        let mut len = 0;
        let mut x = start;
        while seen & (1 << x) == 0 {
            seen |= 1 << x;
            x = a[b[x]];
            len += 1;
        }
        buf.push(len);
    }
    buf.sort_unstable_by(|x, y| y.cmp(x));
}

fn cycle_type_of(images: &[usize]) -> CycleType {
    let m = images.len();
    let mut seen = vec![false; m];
    let mut parts = Vec::new();
    for start in 0..m {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut x = start;
        while !seen[x] {
            seen[x] = true;
            x = images[x];
            len += 1;
        }
        parts.push(len);
    }
    parts.sort_unstable_by(|x, y| y.cmp(x));
    CycleType(parts)
}

/// An integer partition of the group degree, listed non-increasingly.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CycleType(Vec<usize>);

impl CycleType {
    /// Sorts the parts; rejects empty parts of size zero.
    pub fn from_parts(mut parts: Vec<usize>) -> Result<Self> {
        if parts.iter().any(|&x| x == 0) {
            return Err(Error::InvalidArgument(format!(
                "cycle type {parts:?} has a zero part"
            )));
        }
        parts.sort_unstable_by(|x, y| y.cmp(x));
        Ok(Self(parts))
    }

    pub fn parts(&self) -> &[usize] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn num_cycles(&self) -> usize {
        self.0.len()
    }

    pub fn length(&self) -> usize {
        self.degree() - self.num_cycles()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&x| x == 1)
    }

    /// Permutation with consecutive cycles `(0 1 .. d1-1)(d1 ..)...`.
    pub fn representative(&self) -> Permutation {
        let m = self.degree();
        let mut images = vec![0; m];
        let mut start = 0;
        for &d in &self.0 {
            for i in 0..d {
                images[start + i] = start + (i + 1) % d;
            }
            start += d;
        }
        Permutation { images }
    }

    /// Number of permutations with this cycle type.
    pub fn class_size(&self) -> BigInt {
        let mut denom = BigInt::one();
        let mut run = 1;
        for (idx, &d) in self.0.iter().enumerate() {
            denom *= BigInt::from(d);
            if idx > 0 && self.0[idx - 1] == d {
                run += 1;
                denom *= BigInt::from(run);
            } else {
                run = 1;
            }
        }
        factorial(self.degree()) / denom
    }

    pub fn mobius(&self) -> BigInt {
        let mut out = BigInt::one();
        for &d in &self.0 {
            let c = catalan(d - 1);
            if d % 2 == 0 {
                out *= -c;
            } else {
                out *= c;
            }
        }
        out
    }
}

impl fmt::Display for CycleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        write!(f, "[{}]", body.join(","))
    }
}

/// All partitions of `m`, from `[m]` down to `[1, .., 1]`.
pub fn partitions(m: usize) -> Vec<CycleType> {
    fn rec(remaining: usize, max_part: usize, current: &mut Vec<usize>, out: &mut Vec<CycleType>) {
        if remaining == 0 {
            out.push(CycleType(current.clone()));
            return;
        }
        for part in (1..=remaining.min(max_part)).rev() {
            current.push(part);
            rec(remaining - part, part, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, m, &mut Vec::new(), &mut out);
    out
}

pub fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `Cat(i) = (2i)! / ((i+1)! i!)`.
pub fn catalan(i: usize) -> BigInt {
    factorial(2 * i) / (factorial(i + 1) * factorial(i))
}

/// Which of the two channel copies a label belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Block {
    Top,
    Bottom,
}

/// A label `i^T` or `i^B` (with `1 <= i <= p`) of a point of `S_{2p}`.
///
/// Position `j < p` is `(p - j)^B` and position `j >= p` is `(j - p + 1)^T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledIndex {
    pub slot: usize,
    pub block: Block,
}

impl LabeledIndex {
    pub fn top(slot: usize) -> Self {
        Self {
            slot,
            block: Block::Top,
        }
    }

    pub fn bottom(slot: usize) -> Self {
        Self {
            slot,
            block: Block::Bottom,
        }
    }

    pub fn from_position(position: usize, p: usize) -> Result<Self> {
        if position >= 2 * p {
            return Err(Error::InvalidArgument(format!(
                "position {position} out of range for p = {p}"
            )));
        }
        Ok(if position < p {
            Self::bottom(p - position)
        } else {
            Self::top(position - p + 1)
        })
    }

    pub fn position(&self, p: usize) -> Result<usize> {
        if self.slot == 0 || self.slot > p {
            return Err(Error::InvalidArgument(format!(
                "slot {} out of range for p = {p}",
                self.slot
            )));
        }
        Ok(match self.block {
            Block::Bottom => p - self.slot,
            Block::Top => p + self.slot - 1,
        })
    }
}

impl fmt::Display for LabeledIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.block {
            Block::Top => 'T',
            Block::Bottom => 'B',
        };
        write!(f, "{}{}", self.slot, tag)
    }
}

/// The fixed permutations of `S_{2p}` that wire a product of two channel copies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelPermutations {
    pub p: usize,
    /// `i^T -> (i-1)^T`, `i^B -> (i+1)^B`, slots taken cyclically in `1..=p`.
    pub gamma: Permutation,
    /// The involution `i^T <-> i^B`.
    pub delta: Permutation,
    /// The full cycle `(p^T .. 2^T 1^T 1^B 2^B .. p^B)`.
    pub gamma_tilde: Permutation,
}

impl ChannelPermutations {
    /// The transposition `(1^B p^T)` separating `gamma` from `gamma_tilde`.
    pub fn boundary_transposition(&self) -> Permutation {
        let p = self.p;
        Permutation::transposition(2 * p, p - 1, 2 * p - 1)
            .unwrap_or_else(|_| Permutation::identity(2 * p))
    }
}

/// Builds `(gamma, delta, gamma_tilde)` for order `p`.
pub fn make_gamma_delta(p: usize) -> Result<ChannelPermutations> {
    if p < 1 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    let m = 2 * p;
    let prev = |i: usize| if i == 1 { p } else { i - 1 };
    let next = |i: usize| if i == p { 1 } else { i + 1 };
    let mut gamma = vec![0; m];
    let mut delta = vec![0; m];
    for i in 1..=p {
        let top = LabeledIndex::top(i).position(p)?;
        let bottom = LabeledIndex::bottom(i).position(p)?;
        gamma[top] = LabeledIndex::top(prev(i)).position(p)?;
        gamma[bottom] = LabeledIndex::bottom(next(i)).position(p)?;
        delta[top] = bottom;
        delta[bottom] = top;
    }
    // With the chosen layout the full cycle walks positions downwards.
    let gamma_tilde: Vec<usize> = (0..m).map(|j| (j + m - 1) % m).collect();
    Ok(ChannelPermutations {
        p,
        gamma: Permutation::new(gamma)?,
        delta: Permutation::new(delta)?,
        gamma_tilde: Permutation::new(gamma_tilde)?,
    })
}

/// Lexicographic iterator over `S_m`.
#[derive(Clone, Debug)]
pub struct Permutations {
    current: Option<Vec<usize>>,
}

impl Iterator for Permutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let current = self.current.take()?;
        let out = Permutation {
            images: current.clone(),
        };
        let mut next = current;
        if next_lexicographic(&mut next) {
            self.current = Some(next);
        }
        Some(out)
    }
}

fn next_lexicographic(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// All of `S_m` in lexicographic order, refusing `m` above [`DEFAULT_ENUMERATION_CAP`].
pub fn enumerate(m: usize) -> Result<Permutations> {
    enumerate_with_cap(m, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_with_cap(m: usize, cap: usize) -> Result<Permutations> {
    if m > cap {
        return Err(Error::CapExceeded {
            what: "permutation enumeration degree",
            requested: m,
            cap,
        });
    }
    Ok(Permutations {
        current: Some((0..m).collect()),
    })
}
