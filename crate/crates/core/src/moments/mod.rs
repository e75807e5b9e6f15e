//! Moments of `Z = [Φ ⊗ Φ̄](E_m)`: exact permutation sums, their pinched
//! variant, and the asymptotic predictions of the various regimes.

mod exponents;

pub use exponents::{
    cancellation_polynomial, describe_minimizers, leading_coefficient, minimize_s, minimize_s1,
    minimize_s2, minimize_s_pinched, table1_row, table2_row, vanishing_cancellation_check, ExponentReport, MinimizerSet, PairExponent,
    PinchedMinimizer, Special, TableRow, DEFAULT_PAIR_CAP,
};

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::perm::{self, make_gamma_delta, LabeledIndex, Permutation};
use crate::weingarten::WgTable;
use crate::{Error, Result};

/// Largest `p` for the exact double sums over `S_{2p}` without an override.
pub const DEFAULT_EXACT_CAP: usize = 3;

/// Asymptotic regime parameters: `m/n -> b`, `k ~ c n^d`, Bell fraction `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub b: f64,
    pub c: f64,
    /// Kept exact so that case boundaries such as `p = 2/(2-d)` are decided without rounding.
    pub d: Rational64,
    pub t: f64,
}

impl RegimeParams {
    pub fn new(b: f64, c: f64, d: Rational64, t: f64) -> Result<Self> {
        let r = Self { b, c, d, t };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0) || !(self.c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "b and c must be positive (b = {}, c = {})",
                self.b, self.c
            )));
        }
        if self.d < Rational64::zero() {
            return Err(Error::InvalidArgument(format!("d must be nonnegative, got {}", self.d)));
        }
        if !(self.t > 0.0 && self.t <= 1.0) {
            return Err(Error::InvalidArgument(format!("t must lie in (0, 1], got {}", self.t)));
        }
        Ok(())
    }

    pub fn d_f64(&self) -> f64 {
        self.d.to_f64().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Choice {
    Identity,
    Bell,
}

/// A map `{1, .., p} -> {I, E}` selecting a factor of `Q = I - E` in each slot.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChoiceFunction {
    picks: Vec<Choice>,
}

impl ChoiceFunction {
    pub fn new(picks: Vec<Choice>) -> Result<Self> {
        if picks.is_empty() {
            return Err(Error::InvalidArgument("a choice function needs p >= 1".into()));
        }
        Ok(Self { picks })
    }

    pub fn constant(p: usize, choice: Choice) -> Self {
        Self {
            picks: vec![choice; p.max(1)],
        }
    }

    /// All `2^p` choice functions; bit `i-1` of the index selects `E` in slot `i`.
    pub fn all(p: usize) -> Vec<Self> {
        (0..1usize << p)
            .map(|mask| Self {
                picks: (0..p)
                    .map(|i| if mask & (1 << i) != 0 { Choice::Bell } else { Choice::Identity })
                    .collect(),
            })
            .collect()
    }

    pub fn p(&self) -> usize {
        self.picks.len()
    }

    /// Choice in slot `i`, 1-based and cyclic.
    pub fn at(&self, i: usize) -> Choice {
        let p = self.p();
        self.picks[(i + p - 1) % p]
    }

    pub fn picks(&self) -> &[Choice] {
        &self.picks
    }

    /// `|f^{-1}(E)|`.
    pub fn bell_count(&self) -> usize {
        self.picks.iter().filter(|&&c| c == Choice::Bell).count()
    }
}

impl std::fmt::Display for ChoiceFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.picks {
            write!(f, "{}", if *c == Choice::Identity { 'I' } else { 'E' })?;
        }
        Ok(())
    }
}

/// The permutation `f̂ ∈ S_{2p}`:
/// `i^T -> (i-1)^T` if `f(i) = I`, else `i^B`;
/// `i^B -> (i+1)^B` if `f(i+1) = I`, else `i^T`.
pub fn choice_to_permutation(f: &ChoiceFunction) -> Permutation {
    let p = f.p();
    let prev = |i: usize| if i == 1 { p } else { i - 1 };
    let next = |i: usize| if i == p { 1 } else { i + 1 };
    let pos = |l: LabeledIndex| l.position(p).expect("slot within range");
    let mut images = vec![0; 2 * p];
    for i in 1..=p {
        images[pos(LabeledIndex::top(i))] = match f.at(i) {
            Choice::Identity => pos(LabeledIndex::top(prev(i))),
            Choice::Bell => pos(LabeledIndex::bottom(i)),
        };
        images[pos(LabeledIndex::bottom(i))] = match f.at(next(i)) {
            Choice::Identity => pos(LabeledIndex::bottom(next(i))),
            Choice::Bell => pos(LabeledIndex::top(i)),
        };
    }
    Permutation::new(images).expect("choice permutation is a bijection")
}

fn check_exact_inputs(p: usize, n: u64, k: u64, m: u64, wg: &WgTable, cap: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    if p > cap {
        return Err(Error::CapExceeded {
            what: "exact moment order p",
            requested: p,
            cap,
        });
    }
    if n == 0 || k == 0 || m == 0 {
        return Err(Error::InvalidArgument("dimensions must be positive".into()));
    }
    if n * k < 2 * p as u64 {
        return Err(Error::DimensionTooSmall { n: n * k, p: 2 * p });
    }
    if (n * k) % m != 0 {
        return Err(Error::InvalidArgument(format!(
            "m = {m} does not divide nk = {}",
            n * k
        )));
    }
    if wg.n() != n * k || wg.p() != 2 * p {
        return Err(Error::DimensionMismatch(format!(
            "Weingarten table is for (n, p) = ({}, {}), need ({}, {})",
            wg.n(),
            wg.p(),
            n * k,
            2 * p
        )));
    }
    Ok(())
}

/// Integer counts of pairs `(α, β)` by `(#α, #(α g^{-1}), #(βδ), class(αβ^{-1}))`.
struct PairHistogram {
    deg: usize,
    classes: Vec<perm::CycleType>,
    counts: Vec<u64>,
}

impl PairHistogram {
    fn build(p: usize, g: &Permutation, delta: &Permutation) -> Self {
        let deg = 2 * p;
        let classes = perm::partitions(deg);
        let class_index: HashMap<Vec<usize>, usize> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.parts().to_vec(), i))
            .collect();
        let all: Vec<Permutation> = perm::enumerate_with_cap(deg, deg)
            .expect("degree within explicit cap")
            .collect();
        let inverses: Vec<Permutation> = all.iter().map(|b| b.inverse()).collect();
        let beta_delta: Vec<usize> = all
            .iter()
            .map(|b| perm::cycles_of_product(b.images(), delta.images()))
            .collect();
        let g_inv = g.inverse();
        let nc = classes.len();
        let stride = deg + 1;
        let size = stride * stride * stride * nc;
        let counts = all
            .par_iter()
            .fold(
                || (vec![0u64; size], Vec::with_capacity(deg)),
                |(mut acc, mut buf), alpha| {
                    let a = alpha.num_cycles();
                    let ag = perm::cycles_of_product(alpha.images(), g_inv.images());
                    for (b_inv, &bd) in inverses.iter().zip(&beta_delta) {
                        perm::cycle_type_of_product(alpha.images(), b_inv.images(), &mut buf);
                        let cls = class_index[&buf[..]];
                        acc[((a * stride + ag) * stride + bd) * nc + cls] += 1;
                    }
                    (acc, buf)
                },
            )
            .map(|(acc, _)| acc)
            .reduce(
                || vec![0u64; size],
                |mut x, y| {
                    x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
                    x
                },
            );
        Self {
            deg,
            classes,
            counts,
        }
    }

    /// `Σ count · k^{#α} · n^{#(αg^{-1})} · m^{#(βδ) - p} · Wg(class)`.
    fn evaluate(&self, p: usize, n: u64, k: u64, m: u64, wg: &WgTable) -> BigRational {
        let stride = self.deg + 1;
        let nc = self.classes.len();
        let pw = |base: u64, e: i64| -> BigRational {
            let b = BigRational::from_integer(BigInt::from(base));
            if e >= 0 {
                num_traits::pow(b, e as usize)
            } else {
                num_traits::pow(b.recip(), (-e) as usize)
            }
        };
        let wg_values: Vec<&BigRational> = self
            .classes
            .iter()
            .map(|c| wg.get(c).expect("table covers every class"))
            .collect();
        let mut total = BigRational::zero();
        for a in 0..stride {
            for ag in 0..stride {
                for bd in 0..stride {
                    let base = ((a * stride + ag) * stride + bd) * nc;
                    let mut inner = BigRational::zero();
                    for (cls, wgv) in wg_values.iter().enumerate() {
                        let c = self.counts[base + cls];
                        if c != 0 {
                            inner += *wgv * BigRational::from_integer(BigInt::from(c));
                        }
                    }
                    if inner.is_zero() {
                        continue;
                    }
                    total += inner * pw(k, a as i64) * pw(n, ag as i64) * pw(m, bd as i64 - p as i64);
                }
            }
        }
        total
    }
}

/// `E tr Z^p` for the conjugate product channel at finite `(n, k, m)`:
/// `Σ_{α,β ∈ S_{2p}} k^{#α} n^{#(αγ^{-1})} m^{#(βδ)-p} Wg(nk, αβ^{-1})`.
pub fn exact_moment_conjugate(p: usize, n: u64, k: u64, m: u64, wg: &WgTable) -> Result<BigRational> {
    exact_moment_conjugate_with_cap(p, n, k, m, wg, DEFAULT_EXACT_CAP)
}

pub fn exact_moment_conjugate_with_cap(
    p: usize,
    n: u64,
    k: u64,
    m: u64,
    wg: &WgTable,
    cap: usize,
) -> Result<BigRational> {
    check_exact_inputs(p, n, k, m, wg, cap)?;
    let s = make_gamma_delta(p)?;
    Ok(PairHistogram::build(p, &s.gamma, &s.delta).evaluate(p, n, k, m, wg))
}

/// One unsigned term `Σ_{α,β} k^{#α} n^{#(α f̂^{-1}) + #(βδ) - p} Wg(nk, αβ^{-1})`.
pub fn pinched_term(f: &ChoiceFunction, n: u64, k: u64, wg: &WgTable) -> Result<BigRational> {
    let p = f.p();
    check_exact_inputs(p, n, k, n, wg, DEFAULT_EXACT_CAP.max(p))?;
    let s = make_gamma_delta(p)?;
    let fhat = choice_to_permutation(f);
    Ok(PairHistogram::build(p, &fhat, &s.delta).evaluate(p, n, k, n, wg))
}

/// `E tr (QZQ)^p` with `Q = I - E_n`, for the conjugate channel with `m = n`:
/// `Σ_f (-1)^{|f^{-1}(E)|} n^{-|f^{-1}(E)|} · pinched_term(f)`.
pub fn exact_moment_pinched(p: usize, n: u64, k: u64, wg: &WgTable) -> Result<BigRational> {
    exact_moment_pinched_with_cap(p, n, k, wg, DEFAULT_EXACT_CAP)
}

pub fn exact_moment_pinched_with_cap(
    p: usize,
    n: u64,
    k: u64,
    wg: &WgTable,
    cap: usize,
) -> Result<BigRational> {
    check_exact_inputs(p, n, k, n, wg, cap)?;
    let s = make_gamma_delta(p)?;
    let mut total = BigRational::zero();
    for f in ChoiceFunction::all(p) {
        let e = f.bell_count();
        let fhat = choice_to_permutation(&f);
        let term = PairHistogram::build(p, &fhat, &s.delta).evaluate(p, n, k, n, wg);
        let scale = num_traits::pow(BigRational::from_integer(BigInt::from(n)).recip(), e);
        if e % 2 == 0 {
            total += term * scale;
        } else {
            total -= term * scale;
        }
    }
    Ok(total)
}

/// `k^{2p-2} E tr (QZQ)^p`, i.e. `(1/k^2) E tr (k^2 QZQ)^p`.
pub fn exact_moment_pinched_normalized(p: usize, n: u64, k: u64, wg: &WgTable) -> Result<BigRational> {
    let raw = exact_moment_pinched(p, n, k, wg)?;
    Ok(raw * num_traits::pow(BigRational::from_integer(BigInt::from(k)), 2 * p - 2))
}

/// Which model the asymptotic prediction refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentModel {
    /// `m ~ bn`, `k ~ cn`.
    Linear,
    /// `m = n`, `k ~ c n^d`.
    Nonlinear,
}

/// `E tr Z^p ≈ coefficient · n^{n_power}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticMoment {
    pub coefficient: f64,
    pub n_power: Rational64,
    pub formula: String,
}

impl AsymptoticMoment {
    pub fn at(&self, n: f64) -> f64 {
        self.coefficient * n.powf(self.n_power.to_f64().unwrap_or(f64::NAN))
    }
}

/// Leading-order `E tr Z^p` for the conjugate product channel.
pub fn asymptotic_moment_conjugate(
    p: usize,
    regime: &RegimeParams,
    model: MomentModel,
) -> Result<AsymptoticMoment> {
    regime.validate()?;
    if p == 0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    let unit = AsymptoticMoment {
        coefficient: 1.0,
        n_power: Rational64::zero(),
        formula: "1".into(),
    };
    let pi = p as i64;
    let pf = p as f64;
    let (b, c, d) = (regime.b, regime.c, regime.d);
    let out = match model {
        MomentModel::Linear => match p {
            1 => unit,
            2 => AsymptoticMoment {
                coefficient: (b / c).powi(2) * (1.0 + 1.0 / (b * b) + c * c / (b * b)),
                n_power: Rational64::from_integer(-2),
                formula: "(b/c)^2 (1 + 1/b^2 + c^2/b^2) n^-2".into(),
            },
            _ => AsymptoticMoment {
                coefficient: (b / c).powf(pf),
                n_power: Rational64::from_integer(-pi),
                formula: "(b/c)^p n^-p".into(),
            },
        },
        MomentModel::Nonlinear => {
            let zero = Rational64::zero();
            let one = Rational64::one();
            let two = Rational64::from_integer(2);
            if d == zero {
                let a1 = 1.0 / c + 1.0 / (c * c) - 1.0 / c.powi(3);
                let a2 = 1.0 / (c * c) - 1.0 / c.powi(3);
                AsymptoticMoment {
                    coefficient: a1.powf(pf) + (c * c - 1.0) * a2.powf(pf),
                    n_power: zero,
                    formula: "(1/c + 1/c^2 - 1/c^3)^p + (c^2 - 1)(1/c^2 - 1/c^3)^p".into(),
                }
            } else if p == 1 {
                unit
            } else if d < one {
                if p == 2 {
                    AsymptoticMoment {
                        coefficient: 2.0 / (c * c),
                        n_power: -d * 2,
                        formula: "2 c^-2 n^-2d".into(),
                    }
                } else {
                    AsymptoticMoment {
                        coefficient: c.powf(-pf),
                        n_power: -d * pi,
                        formula: "c^-p n^-dp".into(),
                    }
                }
            } else if d == one {
                if p == 2 {
                    AsymptoticMoment {
                        coefficient: 1.0 + 2.0 / (c * c),
                        n_power: Rational64::from_integer(-2),
                        formula: "(1 + 2 c^-2) n^-2".into(),
                    }
                } else {
                    AsymptoticMoment {
                        coefficient: c.powf(-pf),
                        n_power: Rational64::from_integer(-pi),
                        formula: "c^-p n^-p".into(),
                    }
                }
            } else if d < two {
                // Interface at p = 2/(2-d), i.e. p(2-d) = 2.
                let lhs = Rational64::from_integer(pi) * (two - d);
                if lhs < two {
                    AsymptoticMoment {
                        coefficient: 1.0,
                        n_power: Rational64::from_integer(-(2 * pi - 2)),
                        formula: "n^-(2p-2)".into(),
                    }
                } else if lhs == two {
                    AsymptoticMoment {
                        coefficient: 1.0 + c.powf(-pf),
                        n_power: -d * pi,
                        formula: "(1 + c^-p) n^-dp".into(),
                    }
                } else {
                    AsymptoticMoment {
                        coefficient: c.powf(-pf),
                        n_power: -d * pi,
                        formula: "c^-p n^-dp".into(),
                    }
                }
            } else {
                AsymptoticMoment {
                    coefficient: 1.0,
                    n_power: Rational64::from_integer(-(2 * pi - 2)),
                    formula: "n^-(2p-2)".into(),
                }
            }
        }
    };
    Ok(out)
}

/// Float rendering of an exact rational.
pub fn rational_to_f64(x: &BigRational) -> f64 {
    crate::weingarten::to_f64(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weingarten::wg_exact;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    #[test]
    fn first_moment_is_one() {
        for (n, k, m) in [(1, 2, 1), (2, 2, 2), (3, 2, 6), (3, 3, 3), (4, 2, 2)] {
            let wg = wg_exact(n * k, 2).unwrap();
            assert_eq!(exact_moment_conjugate(1, n, k, m, &wg).unwrap(), BigRational::one());
        }
    }

    #[test]
    fn input_validation() {
        let wg = wg_exact(9, 4).unwrap();
        assert!(exact_moment_conjugate(2, 3, 3, 2, &wg).is_err());
        assert!(exact_moment_conjugate(2, 3, 2, 3, &wg).is_err());
        assert!(exact_moment_conjugate(4, 3, 3, 3, &wg).is_err());
        let wg = wg_exact(3, 2).unwrap();
        assert!(exact_moment_conjugate(1, 3, 1, 3, &wg).is_ok());
    }

    #[test]
    fn choice_permutations() {
        let s = make_gamma_delta(3).unwrap();
        assert_eq!(choice_to_permutation(&ChoiceFunction::constant(3, Choice::Identity)), s.gamma);
        let all_e = choice_to_permutation(&ChoiceFunction::constant(2, Choice::Bell));
        assert_eq!(all_e.num_cycles(), 2);
        for p in 1..=4 {
            for f in ChoiceFunction::all(p) {
                let fhat = choice_to_permutation(&f);
                let want = if f.bell_count() == 0 { 2 } else { f.bell_count() };
                assert_eq!(fhat.num_cycles(), want, "f = {f}");
            }
        }
        let one_e = ChoiceFunction::new(vec![Choice::Identity, Choice::Bell, Choice::Identity]).unwrap();
        assert_eq!(choice_to_permutation(&one_e).num_cycles(), 1);
    }

    #[test]
    fn pinched_first_moment_by_hand() {
        // E tr(E_n Z) = (k^2 - k - 1 + k n^2) / ((nk)^2 - 1) from the p = 1 sums over S_2.
        for (n, k) in [(2i64, 2i64), (3, 2), (2, 3), (3, 3)] {
            let wg = wg_exact((n * k) as u64, 2).unwrap();
            let bell = q(k * k - k - 1 + k * n * n, (n * k) * (n * k) - 1);
            let got = exact_moment_pinched(1, n as u64, k as u64, &wg).unwrap();
            assert_eq!(got, BigRational::one() - bell);
        }
    }

    #[test]
    fn identity_choice_reproduces_conjugate_sum() {
        for (n, k) in [(2u64, 3u64), (3, 3)] {
            for p in 1..=2 {
                let wg = wg_exact(n * k, 2 * p).unwrap();
                let f = ChoiceFunction::constant(p, Choice::Identity);
                assert_eq!(
                    pinched_term(&f, n, k, &wg).unwrap(),
                    exact_moment_conjugate(p, n, k, n, &wg).unwrap()
                );
            }
        }
    }

    #[test]
    fn second_moment_tends_to_linear_prediction() {
        // b = c = 1: N^2 E tr Z^2 -> 3, approached from above after a maximum near N = 7.
        let mut last = f64::INFINITY;
        for n in [6u64, 9, 12, 20] {
            let wg = wg_exact(n * n, 4).unwrap();
            let v = rational_to_f64(&exact_moment_conjugate(2, n, n, n, &wg).unwrap()) * (n * n) as f64;
            let gap = (v - 3.0).abs();
            assert!(gap < last);
            last = gap;
        }
    }

    #[test]
    fn asymptotic_cases() {
        let r = |c: f64, d: Rational64| RegimeParams::new(1.0, c, d, 1.0).unwrap();
        let a = asymptotic_moment_conjugate(2, &r(3.0, Rational64::zero()), MomentModel::Nonlinear).unwrap();
        let c: f64 = 3.0;
        let want = (1.0 / c + 1.0 / (c * c) - 1.0 / c.powi(3)).powi(2)
            + (c * c - 1.0) * (1.0 / (c * c) - 1.0 / c.powi(3)).powi(2);
        assert!((a.coefficient - want).abs() < 1e-15);

        let a = asymptotic_moment_conjugate(4, &r(2.0, Rational64::new(3, 2)), MomentModel::Nonlinear).unwrap();
        assert_eq!(a.n_power, Rational64::from_integer(-6));
        assert!((a.coefficient - (1.0 + 2f64.powi(-4))).abs() < 1e-15);

        let a = asymptotic_moment_conjugate(3, &r(2.0, Rational64::new(4, 3)), MomentModel::Nonlinear).unwrap();
        assert_eq!(a.n_power, Rational64::from_integer(-4));
        assert!((a.coefficient - (1.0 + 2f64.powi(-3))).abs() < 1e-15);

        for p in 2..6 {
            let a = asymptotic_moment_conjugate(p, &r(2.0, Rational64::from_integer(3)), MomentModel::Nonlinear)
                .unwrap();
            assert_eq!(a.n_power, Rational64::from_integer(-(2 * p as i64 - 2)));
            assert_eq!(a.coefficient, 1.0);
        }

        let lin = RegimeParams::new(2.0, 0.5, Rational64::one(), 1.0).unwrap();
        let a = asymptotic_moment_conjugate(2, &lin, MomentModel::Linear).unwrap();
        assert!((a.coefficient - 16.0 * (1.0 + 0.25 + 0.0625)).abs() < 1e-12);
        // Linear model with b = 1 and the nonlinear d = 1 case agree.
        let b1 = RegimeParams::new(1.0, 0.5, Rational64::one(), 1.0).unwrap();
        for p in 1..5 {
            let x = asymptotic_moment_conjugate(p, &b1, MomentModel::Linear).unwrap();
            let y = asymptotic_moment_conjugate(p, &b1, MomentModel::Nonlinear).unwrap();
            assert!((x.coefficient - y.coefficient).abs() < 1e-12);
            assert_eq!(x.n_power, y.n_power);
        }
    }
}
