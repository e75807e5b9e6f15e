//! Unitary Weingarten function and polynomial Haar integrals.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::montecarlo::{self, trial_rng};
use crate::perm::{self, catalan, CycleType, Permutation};
use crate::{Error, Result};

/// Largest order [`wg_exact`] accepts without an explicit override.
pub const DEFAULT_WG_CAP: usize = 7;

/// Exact `Wg(n, .)` on `S_p`, one value per conjugacy class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WgTable {
    n: u64,
    p: usize,
    values: BTreeMap<CycleType, BigRational>,
}

impl WgTable {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, class: &CycleType) -> Option<&BigRational> {
        self.values.get(class)
    }

    /// Value at a permutation of `S_p`.
    pub fn value(&self, sigma: &Permutation) -> Result<&BigRational> {
        if sigma.degree() != self.p {
            return Err(Error::DegreeMismatch {
                left: sigma.degree(),
                right: self.p,
            });
        }
        Ok(&self.values[&sigma.cycle_type()])
    }

    /// Classes ordered as in [`perm::partitions`] reversed (identity class first).
    pub fn iter(&self) -> impl Iterator<Item = (&CycleType, &BigRational)> {
        self.values.iter()
    }

    /// `Σ_τ n^{#(σ τ^{-1})} Wg(τ)` for every `σ` in `S_p`, which must be `[σ = id]`.
    pub fn convolution_identity_holds(&self) -> bool {
        let p = self.p;
        let all: Vec<Permutation> = match perm::enumerate_with_cap(p, p) {
            Ok(it) => it.collect(),
            Err(_) => return false,
        };
        let inverses: Vec<Permutation> = all.iter().map(|t| t.inverse()).collect();
        let classes: Vec<&BigRational> = all.iter().map(|t| &self.values[&t.cycle_type()]).collect();
        let n = BigInt::from(self.n);
        let powers: Vec<BigInt> = (0..=p).map(|e| num_traits::pow(n.clone(), e)).collect();
        all.iter().all(|sigma| {
            let mut total = BigRational::zero();
            for (t_inv, wg) in inverses.iter().zip(&classes) {
                let cycles = perm::cycles_of_product(sigma.images(), t_inv.images());
                total += *wg * BigRational::from_integer(powers[cycles].clone());
            }
            let expected = if sigma.is_identity() {
                BigRational::one()
            } else {
                BigRational::zero()
            };
            total == expected
        })
    }
}

/// Exact Weingarten table for `S_p` at dimension `n`.
pub fn wg_exact(n: u64, p: usize) -> Result<WgTable> {
    wg_exact_with_cap(n, p, DEFAULT_WG_CAP)
}

pub fn wg_exact_with_cap(n: u64, p: usize, cap: usize) -> Result<WgTable> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    if p > cap {
        return Err(Error::CapExceeded {
            what: "Weingarten order",
            requested: p,
            cap,
        });
    }
    if n < p as u64 {
        return Err(Error::DimensionTooSmall { n, p });
    }
    let classes = perm::partitions(p);
    let index: BTreeMap<CycleType, usize> = classes
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, c)| (c, i))
        .collect();
    let reps: Vec<Permutation> = classes.iter().map(|c| c.representative()).collect();
    let size = classes.len();

    // counts[l][mu][k] = #{τ in class mu : #(σ_l τ^{-1}) = k}
    let mut counts = vec![vec![vec![0u64; p + 1]; size]; size];
    for tau in perm::enumerate_with_cap(p, cap.max(p))? {
        let mu = index[&tau.cycle_type()];
        let tau_inv = tau.inverse();
        for (l, rep) in reps.iter().enumerate() {
            let k = perm::cycles_of_product(rep.images(), tau_inv.images());
            counts[l][mu][k] += 1;
        }
    }
    let n_big = BigInt::from(n);
    let powers: Vec<BigInt> = (0..=p).map(|e| num_traits::pow(n_big.clone(), e)).collect();
    let gram: Vec<Vec<BigRational>> = counts
        .iter()
        .map(|row| {
            row.iter()
                .map(|hist| {
                    let s: BigInt = hist
                        .iter()
                        .zip(&powers)
                        .map(|(&c, pw)| BigInt::from(c) * pw)
                        .sum();
                    BigRational::from_integer(s)
                })
                .collect()
        })
        .collect();
    let id_class = index[&Permutation::identity(p).cycle_type()];
    let rhs: Vec<BigRational> = (0..size)
        .map(|l| {
            if l == id_class {
                BigRational::one()
            } else {
                BigRational::zero()
            }
        })
        .collect();
    let solution = solve_exact(gram, rhs).ok_or(Error::DimensionTooSmall { n, p })?;
    Ok(WgTable {
        n,
        p,
        values: classes.into_iter().zip(solution).collect(),
    })
}

/// Gaussian elimination over the rationals; `None` when singular.
pub(crate) fn solve_exact(
    mut a: Vec<Vec<BigRational>>,
    mut b: Vec<BigRational>,
) -> Option<Vec<BigRational>> {
    let size = b.len();
    for col in 0..size {
        let pivot = (col..size).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for x in a[col].iter_mut().skip(col) {
            *x *= &inv;
        }
        b[col] *= &inv;
        for r in 0..size {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in col..size {
                let delta = &factor * &a[col][c];
                a[r][c] -= delta;
            }
            let delta = &factor * &b[col];
            b[r] -= delta;
        }
    }
    Some(b)
}

/// Leading term `n^{-(p + |σ|)} Mob(σ)` of the large-`n` expansion.
pub fn wg_asymptotic(n: u64, sigma: &Permutation) -> BigRational {
    let exponent = sigma.degree() + sigma.length();
    let denom = num_traits::pow(BigInt::from(n), exponent);
    BigRational::new(sigma.mobius(), denom)
}

/// Closed form of `Wg(n, .)` on a full `d`-cycle of `S_d`.
pub fn wg_cycle_exact(n: u64, d: usize) -> Result<BigRational> {
    if d == 0 {
        return Err(Error::InvalidArgument("cycle length must be positive".into()));
    }
    if n < d as u64 {
        return Err(Error::DimensionTooSmall { n, p: d });
    }
    let mut denom = BigInt::one();
    let n = n as i64;
    let d_i = d as i64;
    for j in (-d_i + 1)..=(d_i - 1) {
        denom *= BigInt::from(n - j);
    }
    let mut numer = catalan(d - 1);
    if d % 2 == 0 {
        numer = -numer;
    }
    Ok(BigRational::new(numer, denom))
}

/// Row and column indices (1-based) of a monomial in `U` and `conj(U)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexTuple {
    pub i: Vec<usize>,
    pub i_prime: Vec<usize>,
    pub j: Vec<usize>,
    pub j_prime: Vec<usize>,
}

impl IndexTuple {
    pub fn new(
        i: Vec<usize>,
        i_prime: Vec<usize>,
        j: Vec<usize>,
        j_prime: Vec<usize>,
    ) -> Result<Self> {
        let p = i.len();
        if i_prime.len() != p || j.len() != p || j_prime.len() != p {
            return Err(Error::DimensionMismatch(
                "index lists must have equal lengths".into(),
            ));
        }
        if [&i, &i_prime, &j, &j_prime]
            .iter()
            .any(|v| v.iter().any(|&x| x == 0))
        {
            return Err(Error::InvalidArgument("indices are 1-based".into()));
        }
        Ok(Self {
            i,
            i_prime,
            j,
            j_prime,
        })
    }

    pub fn order(&self) -> usize {
        self.i.len()
    }

    fn max_index(&self) -> usize {
        [&self.i, &self.i_prime, &self.j, &self.j_prime]
            .iter()
            .flat_map(|v| v.iter().copied())
            .max()
            .unwrap_or(0)
    }

    fn check(&self, n: u64) -> Result<()> {
        if self.max_index() as u64 > n {
            return Err(Error::DimensionMismatch(format!(
                "index {} exceeds dimension {n}",
                self.max_index()
            )));
        }
        Ok(())
    }
}

/// `∫ U_{i1 j1} .. U_{ip jp} conj(U_{i'1 j'1}) .. conj(U_{i'p j'p}) dU`, exactly.
pub fn haar_moment(n: u64, t: &IndexTuple, table: &WgTable) -> Result<BigRational> {
    let p = t.order();
    if table.n != n || table.p != p {
        return Err(Error::DimensionMismatch(format!(
            "table built for (n, p) = ({}, {}), tuple needs ({n}, {p})",
            table.n, table.p
        )));
    }
    t.check(n)?;
    let matches = |a: &[usize], b: &[usize], s: &Permutation| {
        (0..p).all(|x| a[x] == b[s.apply(x)])
    };
    let all: Vec<Permutation> = perm::enumerate_with_cap(p, p)?.collect();
    let sigmas: Vec<&Permutation> = all
        .iter()
        .filter(|s| matches(&t.i, &t.i_prime, s))
        .collect();
    let taus: Vec<&Permutation> = all
        .iter()
        .filter(|s| matches(&t.j, &t.j_prime, s))
        .collect();
    let mut total = BigRational::zero();
    for sigma in &sigmas {
        let sigma_inv = sigma.inverse();
        for tau in &taus {
            total += table.value(&tau.compose(&sigma_inv)?)?;
        }
    }
    Ok(total)
}

/// Monte Carlo mean of a complex statistic with componentwise standard errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexEstimate {
    pub mean: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub trials: usize,
}

impl ComplexEstimate {
    pub fn from_samples(samples: &[Complex64]) -> Self {
        let n = samples.len();
        let re: Vec<f64> = samples.iter().map(|z| z.re).collect();
        let im: Vec<f64> = samples.iter().map(|z| z.im).collect();
        let (m_re, s_re) = montecarlo::mean_stderr(&re);
        let (m_im, s_im) = montecarlo::mean_stderr(&im);
        Self {
            mean: Complex64::new(m_re, m_im),
            stderr_re: s_re,
            stderr_im: s_im,
            trials: n,
        }
    }

    pub fn stderr(&self) -> f64 {
        self.stderr_re.hypot(self.stderr_im)
    }

    /// `|mean - reference|` in units of the combined standard error.
    pub fn z_score(&self, reference: Complex64) -> f64 {
        let dev = (self.mean - reference).norm();
        let se = self.stderr();
        if se > 0.0 {
            dev / se
        } else if dev < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Monte Carlo estimate of the integral in [`haar_moment`].
pub fn haar_moment_mc(n: u64, t: &IndexTuple, trials: usize, seed: u64) -> Result<ComplexEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    t.check(n)?;
    let dim = n as usize;
    let samples = montecarlo::par_trials(trials, |idx| {
        let mut rng = trial_rng(seed, idx as u64);
        let u = montecarlo::sample_haar_with(&mut rng, dim);
        let mut prod = Complex64::new(1.0, 0.0);
        for s in 0..t.order() {
            prod *= u[(t.i[s] - 1, t.j[s] - 1)];
            prod *= u[(t.i_prime[s] - 1, t.j_prime[s] - 1)].conj();
        }
        prod
    });
    Ok(ComplexEstimate::from_samples(&samples))
}

/// Float rendering of an exact rational.
pub fn to_f64(x: &BigRational) -> f64 {
    match (x.numer().to_f64(), x.denom().to_f64()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
        _ => {
            // Scale both parts down to keep the ratio representable.
            let shift = x.denom().bits().max(x.numer().bits()).saturating_sub(900);
            let a = (x.numer().abs() >> shift).to_f64().unwrap_or(f64::MAX);
            let b = (x.denom() >> shift).to_f64().unwrap_or(f64::MAX);
            let v = a / b;
            if x.is_negative() {
                -v
            } else {
                v
            }
        }
    }
}
