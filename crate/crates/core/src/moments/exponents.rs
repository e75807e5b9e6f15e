//! Exponent minimization over `S_{2p}` and the tabulated minima.

use std::collections::BTreeSet;

use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{choice_to_permutation, ChoiceFunction};
use crate::perm::{self, cycles_of_product, is_geodesic, make_gamma_delta, Permutation};
use crate::{Error, Result};

/// Largest `p` for searches over pairs (or triples) of permutations.
pub const DEFAULT_PAIR_CAP: usize = 3;

/// Named elements of `S_{2p}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Special {
    Id,
    Delta,
    Gamma,
    GammaTilde,
}

impl Special {
    pub fn permutation(self, p: usize) -> Result<Permutation> {
        let s = make_gamma_delta(p)?;
        Ok(match self {
            Special::Id => Permutation::identity(2 * p),
            Special::Delta => s.delta,
            Special::Gamma => s.gamma,
            Special::GammaTilde => s.gamma_tilde,
        })
    }

    fn symbol(self) -> &'static str {
        match self {
            Special::Id => "id",
            Special::Delta => "δ",
            Special::Gamma => "γ",
            Special::GammaTilde => "γ̃",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MinimizerSet {
    Points(Vec<Special>),
    /// Every permutation on a geodesic between the two endpoints.
    Geodesic(Special, Special),
}

impl MinimizerSet {
    /// Explicit members at order `p`.
    pub fn members(&self, p: usize) -> Result<BTreeSet<Permutation>> {
        match self {
            MinimizerSet::Points(pts) => pts.iter().map(|s| s.permutation(p)).collect(),
            MinimizerSet::Geodesic(a, b) => {
                let a = a.permutation(p)?;
                let b = b.permutation(p)?;
                Ok(perm::enumerate(2 * p)?
                    .filter(|s| is_geodesic(&a, s, &b))
                    .collect())
            }
        }
    }
}

pub fn describe_minimizers(set: &MinimizerSet) -> String {
    match set {
        MinimizerSet::Points(pts) => {
            let names: Vec<&str> = pts.iter().map(|s| s.symbol()).collect();
            format!("{{{}}}", names.join(", "))
        }
        MinimizerSet::Geodesic(a, b) => format!("geodesic {} -> {}", a.symbol(), b.symbol()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub minimum: Rational64,
    pub minimizers: MinimizerSet,
}

impl TableRow {
    /// Same minimum and same minimizer set as a search result.
    pub fn matches(&self, report: &ExponentReport<Permutation>, p: usize) -> Result<bool> {
        if report.minimum != self.minimum {
            return Ok(false);
        }
        let found: BTreeSet<Permutation> = report.minimizers.iter().cloned().collect();
        Ok(found == self.minimizers.members(p)?)
    }
}

/// Result of an exhaustive search: the exact minimum and every argmin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport<T> {
    pub minimum: Rational64,
    pub minimizers: Vec<T>,
    pub searched: usize,
}

impl<T> ExponentReport<T> {
    fn empty() -> Self {
        Self {
            minimum: Rational64::zero(),
            minimizers: Vec::new(),
            searched: 0,
        }
    }

    fn offer(&mut self, value: Rational64, item: impl FnOnce() -> T) {
        if self.searched == 0 || value < self.minimum {
            self.minimum = value;
            self.minimizers.clear();
            self.minimizers.push(item());
        } else if value == self.minimum {
            self.minimizers.push(item());
        }
        self.searched += 1;
    }

    fn merge(mut self, other: Self) -> Self {
        if other.searched == 0 {
            return self;
        }
        if self.searched == 0 || other.minimum < self.minimum {
            let searched = self.searched + other.searched;
            self = other;
            self.searched = searched;
        } else {
            if other.minimum == self.minimum {
                self.minimizers.extend(other.minimizers);
            }
            self.searched += other.searched;
        }
        self
    }
}

fn check_d(d: Rational64) -> Result<()> {
    if d < Rational64::zero() {
        return Err(Error::InvalidArgument(format!("d must be nonnegative, got {d}")));
    }
    Ok(())
}

fn check_p(p: usize, cap: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    if p > cap {
        return Err(Error::CapExceeded {
            what: "exponent search order p",
            requested: p,
            cap,
        });
    }
    Ok(())
}

fn len_of_product(a: &Permutation, b: &Permutation) -> i64 {
    (a.degree() - cycles_of_product(a.images(), b.images())) as i64
}

fn minimize_single(p: usize, d: Rational64, g: &Permutation) -> Result<ExponentReport<Permutation>> {
    check_d(d)?;
    check_p(p, perm::DEFAULT_ENUMERATION_CAP / 2)?;
    let s = make_gamma_delta(p)?;
    let g_inv = g.inverse();
    let mut rep = ExponentReport::empty();
    for beta in perm::enumerate(2 * p)? {
        let v = d * beta.length() as i64
            + Rational64::from_integer(
                len_of_product(&beta, &g_inv) + len_of_product(&beta, &s.delta) - p as i64,
            );
        rep.offer(v, || beta.clone());
    }
    rep.minimizers.sort();
    Ok(rep)
}

/// Minimizes `d|β| + |β γ̃^{-1}| + |βδ| - p` over `β ∈ S_{2p}`.
pub fn minimize_s2(p: usize, d: Rational64) -> Result<ExponentReport<Permutation>> {
    let s = make_gamma_delta(p)?;
    minimize_single(p, d, &s.gamma_tilde)
}

/// Minimizes `d|β| + |β γ^{-1}| + |βδ| - p` over `β ∈ S_{2p}`.
pub fn minimize_s1(p: usize, d: Rational64) -> Result<ExponentReport<Permutation>> {
    let s = make_gamma_delta(p)?;
    minimize_single(p, d, &s.gamma)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairExponent {
    /// `m ~ bn`, `k ~ cn`; same as `Nonlinear(1)`.
    Linear,
    Nonlinear(Rational64),
}

impl PairExponent {
    fn d(self) -> Rational64 {
        match self {
            PairExponent::Linear => Rational64::one(),
            PairExponent::Nonlinear(d) => d,
        }
    }
}

/// Minimizes `d|α| + |αγ^{-1}| + |βδ| + (d+1)|αβ^{-1}| - p` over pairs in `S_{2p}`.
pub fn minimize_s(p: usize, exponent: PairExponent) -> Result<ExponentReport<(Permutation, Permutation)>> {
    let d = exponent.d();
    check_d(d)?;
    check_p(p, DEFAULT_PAIR_CAP)?;
    let s = make_gamma_delta(p)?;
    let g_inv = s.gamma.inverse();
    let all: Vec<Permutation> = perm::enumerate(2 * p)?.collect();
    let inv: Vec<Permutation> = all.iter().map(|b| b.inverse()).collect();
    let bd: Vec<i64> = all.iter().map(|b| len_of_product(b, &s.delta)).collect();
    let mut rep = all
        .par_iter()
        .fold(ExponentReport::empty, |mut rep, alpha| {
            let base = d * alpha.length() as i64;
            let ag = len_of_product(alpha, &g_inv);
            for (j, beta_inv) in inv.iter().enumerate() {
                let ab = len_of_product(alpha, beta_inv);
                let v = base
                    + (d + 1) * ab
                    + Rational64::from_integer(ag + bd[j] - p as i64);
                rep.offer(v, || (alpha.clone(), all[j].clone()));
            }
            rep
        })
        .reduce(ExponentReport::empty, ExponentReport::merge);
    rep.minimizers.sort();
    Ok(rep)
}

/// Leading coefficient `Σ c^{-(|α| + |αβ^{-1}|)} b^{p - |βδ|} Mob(αβ^{-1})` over minimizing pairs.
pub fn leading_coefficient(p: usize, b: f64, c: f64, minimizers: &[(Permutation, Permutation)]) -> Result<f64> {
    let s = make_gamma_delta(p)?;
    let mut total = 0.0;
    for (alpha, beta) in minimizers {
        let ab = alpha.compose(&beta.inverse())?;
        let mob = ab.mobius().to_f64().unwrap_or(f64::NAN);
        let cpow = -((alpha.length() + ab.length()) as i32);
        let bpow = p as i32 - len_of_product(beta, &s.delta) as i32;
        total += c.powi(cpow) * b.powi(bpow) * mob;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PinchedMinimizer {
    pub alpha: Permutation,
    pub beta: Permutation,
    pub f: ChoiceFunction,
}

/// `σδ` has a fixed point.
fn in_v(sigma: &Permutation, delta: &Permutation) -> bool {
    sigma.compose(delta).map(|x| x.fixed_points().next().is_some()).unwrap_or(false)
}

/// Minimizes the pinched exponent
/// `|βδ| + d|α| + (d+1)|αβ^{-1}| + e(f) + |α f̂^{-1}| - const` over `α ∉ V`, `β`, `f`,
/// with `const = p(2d+1) - 2d` for `0 < d < 1` and `3p - 2` for `1 < d < 2`.
pub fn minimize_s_pinched(p: usize, d: Rational64) -> Result<ExponentReport<PinchedMinimizer>> {
    check_p(p, DEFAULT_PAIR_CAP)?;
    let zero = Rational64::zero();
    let one = Rational64::one();
    let two = Rational64::from_integer(2);
    let pi = p as i64;
    let constant = if d > zero && d < one {
        d * (2 * pi) + Rational64::from_integer(pi) - d * 2
    } else if d > one && d < two {
        Rational64::from_integer(3 * pi - 2)
    } else {
        return Err(Error::NotApplicable(format!(
            "pinched exponent is defined for d in (0, 1) or (1, 2), got {d}"
        )));
    };
    let s = make_gamma_delta(p)?;
    let all: Vec<Permutation> = perm::enumerate(2 * p)?.collect();
    let inv: Vec<Permutation> = all.iter().map(|b| b.inverse()).collect();
    let bd: Vec<i64> = all.iter().map(|b| len_of_product(b, &s.delta)).collect();
    let choices: Vec<(ChoiceFunction, Permutation, i64)> = ChoiceFunction::all(p)
        .into_iter()
        .map(|f| {
            let fh = choice_to_permutation(&f).inverse();
            let e = f.bell_count() as i64;
            (f, fh, e)
        })
        .collect();
    let alphas: Vec<&Permutation> = all.iter().filter(|a| !in_v(a, &s.delta)).collect();
    let mut rep = alphas
        .par_iter()
        .fold(ExponentReport::empty, |mut rep, &alpha| {
            // Best choice function for this α, which does not depend on β.
            let fvals: Vec<i64> = choices.iter().map(|(_, fh, e)| e + len_of_product(alpha, fh)).collect();
            let fmin = *fvals.iter().min().expect("at least one choice");
            let base = d * alpha.length() as i64 - constant;
            for (j, beta_inv) in inv.iter().enumerate() {
                let ab = len_of_product(alpha, beta_inv);
                let partial = base + (d + 1) * ab + Rational64::from_integer(bd[j]);
                for (ci, (f, _, _)) in choices.iter().enumerate() {
                    if fvals[ci] > fmin {
                        rep.searched += 1;
                        continue;
                    }
                    let v = partial + Rational64::from_integer(fvals[ci]);
                    rep.offer(v, || PinchedMinimizer {
                        alpha: alpha.clone(),
                        beta: all[j].clone(),
                        f: f.clone(),
                    });
                }
            }
            rep
        })
        .reduce(ExponentReport::empty, ExponentReport::merge);
    rep.minimizers.sort();
    Ok(rep)
}

/// Coefficients in `x = 1/n` of `Σ_f (-1)^{e(f)} x^{e(f) + |α f̂^{-1}|}`, lowest power first.
pub fn cancellation_polynomial(p: usize, alpha: &Permutation) -> Result<Vec<i64>> {
    if alpha.degree() != 2 * p {
        return Err(Error::DegreeMismatch {
            left: alpha.degree(),
            right: 2 * p,
        });
    }
    let s = make_gamma_delta(p)?;
    if !in_v(alpha, &s.delta) {
        return Err(Error::NotApplicable(format!(
            "{alpha} is not in V: αδ has no fixed point"
        )));
    }
    let mut coeffs = vec![0i64; 3 * p + 1];
    for f in ChoiceFunction::all(p) {
        let e = f.bell_count();
        let fh = choice_to_permutation(&f).inverse();
        let power = e + len_of_product(alpha, &fh) as usize;
        coeffs[power] += if e % 2 == 0 { 1 } else { -1 };
    }
    Ok(coeffs)
}

/// For `α ∈ V` the signed sum over choice functions cancels identically.
pub fn vanishing_cancellation_check(p: usize, alpha: &Permutation) -> Result<bool> {
    Ok(cancellation_polynomial(p, alpha)?.iter().all(|&c| c == 0))
}

/// Tabulated minimum of `S_2` and its minimizers.
pub fn table1_row(p: usize, d: Rational64) -> Result<TableRow> {
    check_d(d)?;
    let pi = Rational64::from_integer(p as i64);
    let two = Rational64::from_integer(2);
    let row = |minimum, minimizers| TableRow { minimum, minimizers };
    Ok(if d.is_zero() {
        row(-Rational64::one(), MinimizerSet::Geodesic(Special::Delta, Special::GammaTilde))
    } else if d < two {
        row(d * pi - 1, MinimizerSet::Points(vec![Special::Delta]))
    } else if d == two {
        row(pi * 2 - 1, MinimizerSet::Geodesic(Special::Id, Special::Delta))
    } else {
        row(pi * 2 - 1, MinimizerSet::Points(vec![Special::Id]))
    })
}

/// Tabulated minimum of `S_1` and its minimizers.
pub fn table2_row(p: usize, d: Rational64) -> Result<TableRow> {
    check_d(d)?;
    if p < 2 {
        return Err(Error::NotApplicable("the S_1 table starts at p = 2".into()));
    }
    let pi = Rational64::from_integer(p as i64);
    let one = Rational64::one();
    let two = Rational64::from_integer(2);
    let row = |minimum, minimizers| TableRow { minimum, minimizers };
    use Special::*;
    Ok(if d.is_zero() {
        row(Rational64::zero(), MinimizerSet::Geodesic(Delta, Gamma))
    } else if p == 2 && d < one {
        row(d * 2, MinimizerSet::Points(vec![Delta, Gamma]))
    } else if p == 2 && d == one {
        row(two, MinimizerSet::Points(vec![Id, Delta, Gamma]))
    } else if d <= one {
        row(d * pi, MinimizerSet::Points(vec![Delta]))
    } else if d < two {
        let lhs = pi * (two - d);
        if lhs < two {
            row(pi * 2 - 2, MinimizerSet::Points(vec![Id]))
        } else if lhs == two {
            row(pi * 2 - 2, MinimizerSet::Points(vec![Id, Delta]))
        } else {
            row(d * pi, MinimizerSet::Points(vec![Delta]))
        }
    } else {
        row(pi * 2 - 2, MinimizerSet::Points(vec![Id]))
    })
}

#[cfg(test)]
fn ratio(a: i64, b: i64) -> Rational64 {
    Rational64::new(a, b)
}

#[cfg(test)]
mod tests {
    use super::super::{asymptotic_moment_conjugate, MomentModel, RegimeParams};
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Vec<Rational64> {
        vec![
            ratio(0, 1),
            ratio(1, 2),
            ratio(1, 1),
            ratio(4, 3),
            ratio(3, 2),
            ratio(2, 1),
            ratio(3, 1),
        ]
    }

    #[test]
    fn tables_match_exhaustive_search() {
        for p in 2..=3 {
            for d in grid() {
                let r1 = minimize_s2(p, d).unwrap();
                assert!(table1_row(p, d).unwrap().matches(&r1, p).unwrap(), "S2 p={p} d={d}: {:?}", r1.minimum);
                let r2 = minimize_s1(p, d).unwrap();
                assert!(table2_row(p, d).unwrap().matches(&r2, p).unwrap(), "S1 p={p} d={d}: {:?}", r2.minimum);
            }
        }
    }

    #[test]
    fn pair_search_linear_p2() {
        let rep = minimize_s(2, PairExponent::Linear).unwrap();
        assert_eq!(rep.minimum, Rational64::from_integer(2));
        assert_eq!(rep.searched, 24 * 24);
        let s = make_gamma_delta(2).unwrap();
        let id = Permutation::identity(4);
        let mut want = vec![(id.clone(), id), (s.delta.clone(), s.delta), (s.gamma.clone(), s.gamma)];
        want.sort();
        assert_eq!(rep.minimizers, want);
        assert_eq!(rep, minimize_s(2, PairExponent::Nonlinear(Rational64::one())).unwrap());
    }

    #[test]
    fn minimizers_reproduce_closed_forms() {
        let (b, c) = (1.0, 0.7);
        for (p, d) in [(2, ratio(1, 2)), (3, ratio(1, 2)), (2, ratio(1, 1)), (3, ratio(1, 1)), (3, ratio(4, 3)), (2, ratio(3, 2)), (3, ratio(3, 2)), (3, ratio(3, 1))] {
            let rep = minimize_s(p, PairExponent::Nonlinear(d)).unwrap();
            let regime = RegimeParams::new(b, c, d, 1.0).unwrap();
            let want = asymptotic_moment_conjugate(p, &regime, MomentModel::Nonlinear).unwrap();
            assert_eq!(-rep.minimum, want.n_power, "p={p} d={d}");
            let got = leading_coefficient(p, b, c, &rep.minimizers).unwrap();
            assert!((got - want.coefficient).abs() < 1e-12, "p={p} d={d}: {got} vs {}", want.coefficient);
        }
        let lin = RegimeParams::new(1.7, 0.6, Rational64::one(), 1.0).unwrap();
        for p in 2..=3 {
            let rep = minimize_s(p, PairExponent::Linear).unwrap();
            let want = asymptotic_moment_conjugate(p, &lin, MomentModel::Linear).unwrap();
            let got = leading_coefficient(p, lin.b, lin.c, &rep.minimizers).unwrap();
            assert!((got - want.coefficient).abs() < 1e-12);
        }
    }

    #[test]
    fn pinched_exponent_minima() {
        for p in 2..=3 {
            let s = make_gamma_delta(p).unwrap();
            let id = Permutation::identity(2 * p);
            let r = minimize_s_pinched(p, ratio(1, 2)).unwrap();
            assert_eq!(r.minimum, Rational64::zero());
            assert!(r.minimizers.iter().any(|m| m.alpha == s.gamma && m.beta == s.gamma && m.f.bell_count() == 0));
            let r = minimize_s_pinched(p, ratio(3, 2)).unwrap();
            assert_eq!(r.minimum, Rational64::zero());
            assert!(r.minimizers.iter().any(|m| m.alpha == id && m.beta == id && m.f.bell_count() == 0));
        }
        assert!(matches!(minimize_s_pinched(2, ratio(1, 1)), Err(Error::NotApplicable(_))));
        assert!(matches!(minimize_s_pinched(4, ratio(1, 2)), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn cancellation_over_v() {
        for p in 1..=3 {
            let s = make_gamma_delta(p).unwrap();
            for alpha in perm::enumerate(2 * p).unwrap() {
                let r = vanishing_cancellation_check(p, &alpha);
                if in_v(&alpha, &s.delta) {
                    assert_eq!(r, Ok(true), "alpha = {alpha}");
                } else {
                    assert!(matches!(r, Err(Error::NotApplicable(_))));
                }
            }
        }
    }

    #[test]
    fn describe() {
        assert_eq!(describe_minimizers(&MinimizerSet::Points(vec![Special::Id, Special::Delta])), "{id, δ}");
        assert_eq!(
            describe_minimizers(&MinimizerSet::Geodesic(Special::Delta, Special::Gamma)),
            "geodesic δ -> γ"
        );
    }

    #[test]
    fn caps() {
        assert!(matches!(minimize_s(4, PairExponent::Linear), Err(Error::CapExceeded { .. })));
        assert!(minimize_s2(5, ratio(1, 1)).is_err());
        assert!(minimize_s1(2, ratio(-1, 1)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn s1_minimum_never_exceeds_special_points(p in 2usize..=3, num in 0i64..12, den in 1i64..4) {
            let d = ratio(num, den);
            let rep = minimize_s1(p, d).unwrap();
            let s = make_gamma_delta(p).unwrap();
            let g_inv = s.gamma.inverse();
            for beta in [Permutation::identity(2 * p), s.delta.clone(), s.gamma.clone()] {
                let v = d * beta.length() as i64
                    + Rational64::from_integer(len_of_product(&beta, &g_inv) + len_of_product(&beta, &s.delta) - p as i64);
                prop_assert!(rep.minimum <= v);
            }
            prop_assert_eq!(rep.searched, (1..=2 * p).product::<usize>());
        }

        #[test]
        fn pair_minimum_is_monotone_in_d(p in 2usize..=2, a in 0i64..8, b in 0i64..8) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let r_lo = minimize_s(p, PairExponent::Nonlinear(ratio(lo, 2))).unwrap();
            let r_hi = minimize_s(p, PairExponent::Nonlinear(ratio(hi, 2))).unwrap();
            prop_assert!(r_lo.minimum <= r_hi.minimum);
        }
    }
}
