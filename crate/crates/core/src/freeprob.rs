//! Free Poisson law, entropy integrals and entropy predictions.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::moments::RegimeParams;
use crate::{Error, Result};

/// Largest order for non-crossing partition enumeration without an override.
pub const DEFAULT_NC_CAP: usize = 12;

const NEGATIVE_TOL: f64 = 1e-10;

/// Free Poisson (Marchenko-Pastur) law `π_c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarchenkoPastur {
    c: f64,
}

impl MarchenkoPastur {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("c must be positive, got {c}")));
        }
        Ok(Self { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `[(1 - √c)^2, (1 + √c)^2]`.
    pub fn support(&self) -> (f64, f64) {
        let s = self.c.sqrt();
        ((1.0 - s).powi(2), (1.0 + s).powi(2))
    }

    pub fn atom_at_zero(&self) -> f64 {
        (1.0 - self.c).max(0.0)
    }

    /// Density of the absolutely continuous part.
    pub fn density(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        if x <= a || x >= b || x <= 0.0 {
            return 0.0;
        }
        ((b - x) * (x - a)).sqrt() / (2.0 * PI * x)
    }

    /// `∫ f dπ_c` over the continuous part only (the atom is not included).
    pub fn integrate_continuous(&self, f: impl Fn(f64) -> f64, tol: f64) -> f64 {
        let (a, b) = self.support();
        let half = (b - a) / 2.0;
        // x = a + (b - a)(1 - cos θ)/2 removes the square-root edges; when a = 0
        // the 1/x cancels against sin^2 θ, leaving (1 + cos θ).
        let g = |theta: f64| {
            let hs = (theta / 2.0).sin();
            let x = a + 2.0 * half * hs * hs;
            if a == 0.0 {
                return f(x) * half * (1.0 + theta.cos()) / (2.0 * PI);
            }
            let s = theta.sin();
            f(x) * half * half * s * s / (2.0 * PI * x)
        };
        adaptive_simpson(&g, 0.0, PI, tol)
    }

    /// `∫ f dπ_c` including the atom at zero.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, tol: f64) -> f64 {
        let atom = self.atom_at_zero();
        let at_zero = if atom > 0.0 { atom * f(0.0) } else { 0.0 };
        at_zero + self.integrate_continuous(f, tol)
    }

    pub fn moment(&self, p: usize) -> Result<f64> {
        mp_moment(self.c, p)
    }
}

pub fn mp_density(c: f64, x: f64) -> Result<f64> {
    Ok(MarchenkoPastur::new(c)?.density(x))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    // Fixed initial panels so that periodic integrands cannot fool the first error estimate.
    const PANELS: usize = 16;
    let h = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == PANELS { b } else { lo + h };
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = simpson(fa, fm, fb, lo, hi);
            rec(f, lo, hi, fa, fm, fb, whole, tol / PANELS as f64, 40)
        })
        .sum()
}

/// Non-crossing partitions of `{0, .., p-1}`, each as a list of sorted blocks.
pub fn nc_partitions(p: usize) -> Result<Vec<Vec<Vec<usize>>>> {
    check_nc_cap(p)?;
    Ok(nc_interval(0, p))
}

fn nc_interval(start: usize, len: usize) -> Vec<Vec<Vec<usize>>> {
    if len == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    // The block of `start` picks a subset of the remaining points; the gaps
    // between its elements are partitioned independently.
    let rest = len - 1;
    for mask in 0u32..(1 << rest) {
        let mut block = vec![start];
        block.extend((0..rest).filter(|i| mask & (1 << i) != 0).map(|i| start + 1 + i));
        let mut gaps = Vec::new();
        for w in block.windows(2) {
            gaps.push((w[0] + 1, w[1] - w[0] - 1));
        }
        let last = *block.last().unwrap_or(&start);
        gaps.push((last + 1, start + len - last - 1));
        let mut partial: Vec<Vec<Vec<usize>>> = vec![vec![block.clone()]];
        for &(s, l) in &gaps {
            let sub = nc_interval(s, l);
            let mut next = Vec::with_capacity(partial.len() * sub.len());
            for base in &partial {
                for extra in &sub {
                    let mut merged = base.clone();
                    merged.extend(extra.iter().cloned());
                    next.push(merged);
                }
            }
            partial = next;
        }
        out.extend(partial);
    }
    out
}

fn check_nc_cap(p: usize) -> Result<()> {
    if p > DEFAULT_NC_CAP {
        return Err(Error::CapExceeded {
            what: "non-crossing partition order",
            requested: p,
            cap: DEFAULT_NC_CAP,
        });
    }
    Ok(())
}

/// `counts[j]` = number of non-crossing partitions of `[p]` with `j` blocks.
pub fn nc_block_counts(p: usize) -> Result<Vec<u64>> {
    check_nc_cap(p)?;
    let mut memo: Vec<Option<Vec<u64>>> = vec![None; p + 1];
    Ok(nc_counts_rec(p, &mut memo))
}

fn poly_mul(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn nc_counts_rec(len: usize, memo: &mut Vec<Option<Vec<u64>>>) -> Vec<u64> {
    if let Some(v) = &memo[len] {
        return v.clone();
    }
    let out = if len == 0 {
        vec![1]
    } else {
        let rest = len - 1;
        let mut total = vec![0u64; len + 1];
        for mask in 0u32..(1 << rest) {
            let mut poly = vec![0, 1];
            let mut prev = 0usize;
            for i in 0..rest {
                if mask & (1 << i) != 0 {
                    let pos = i + 1;
                    let gap = nc_counts_rec(pos - prev - 1, memo);
                    poly = poly_mul(&poly, &gap);
                    prev = pos;
                }
            }
            let tail = nc_counts_rec(len - prev - 1, memo);
            poly = poly_mul(&poly, &tail);
            for (j, c) in poly.into_iter().enumerate() {
                total[j] += c;
            }
        }
        total
    };
    memo[len] = Some(out.clone());
    out
}

/// `∫ x^p dπ_c = Σ_{σ ∈ NC(p)} c^{#blocks(σ)}`.
pub fn mp_moment(c: f64, p: usize) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("c must be positive, got {c}")));
    }
    let counts = nc_block_counts(p)?;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(j, &n)| n as f64 * c.powi(j as i32))
        .sum())
}

/// `∫ x log x dπ_c` in closed form.
pub fn mp_entropy_integral(c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("c must be positive, got {c}")));
    }
    Ok(if c >= 1.0 { 0.5 + c * c.ln() } else { c * c / 2.0 })
}

/// Same integral by quadrature of the density.
pub fn mp_entropy_integral_quadrature(c: f64, tol: f64) -> Result<f64> {
    let law = MarchenkoPastur::new(c)?;
    Ok(law.integrate_continuous(|x| if x > 0.0 { x * x.ln() } else { 0.0 }, tol))
}

fn check_t_k(t: f64, k: u64) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidArgument(format!("t must lie in (0, 1], got {t}")));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    Ok(())
}

/// `(t + (1-t)/k^2, (1-t)/k^2, ..)` of length `k^2`.
pub fn gamma_t_vector(t: f64, k: u64) -> Result<Vec<f64>> {
    check_t_k(t, k)?;
    let k2 = (k * k) as usize;
    let rest = (1.0 - t) / k2 as f64;
    let mut v = vec![rest; k2];
    v[0] = t + rest;
    Ok(v)
}

/// Exact version of [`gamma_t_vector`].
pub fn gamma_t_vector_exact(t: &BigRational, k: u64) -> Result<Vec<BigRational>> {
    if *t <= BigRational::zero() || *t > BigRational::one() || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "need t in (0, 1] and k >= 1, got t = {t}, k = {k}"
        )));
    }
    let k2 = BigInt::from(k * k);
    let rest = (BigRational::one() - t) / BigRational::from_integer(k2.clone());
    let mut v = vec![rest.clone(); (k * k) as usize];
    v[0] = t + rest;
    Ok(v)
}

/// `-Σ v_i log v_i` with `0 log 0 = 0`; entries below `-1e-10` are rejected,
/// smaller negative round-off is treated as zero.
pub fn vn_entropy(v: &[f64]) -> Result<f64> {
    let mut h = 0.0;
    for &x in v {
        if x < -NEGATIVE_TOL {
            return Err(Error::InvalidArgument(format!(
                "negative probability {x}"
            )));
        }
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    Ok(h)
}

pub(crate) use vn_entropy as vn_entropy_clamped;

/// `2 log k - (log k)/k + 1/k`.
pub fn naive_bound(k: u64) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "the bound needs k >= 2, got {k}"
        )));
    }
    let kf = k as f64;
    Ok(2.0 * kf.ln() - kf.ln() / kf + 1.0 / kf)
}

/// Which asymptotic regime of the ancilla growth `k ~ c n^d` applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntropyCase {
    /// `d = 0`: fixed ancilla, limit given by a two-level spectrum.
    FixedAncilla,
    /// `0 < d < 1`.
    Sublinear,
    /// `d = 1` with `c < 1`.
    LinearSmall,
    /// `d = 1` with `c >= 1`.
    LinearLarge,
    /// `1 < d < 2`.
    Superlinear,
    /// `d >= 2`.
    Quadratic,
}

/// Large-`n` entropy of the product output: `H ≈ leading - defect`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyPrediction {
    pub case: EntropyCase,
    pub leading: f64,
    pub defect: f64,
    /// False when only the leading term is known (`o(1)` remainder unspecified).
    pub second_order_known: bool,
    pub formula: String,
}

impl EntropyPrediction {
    pub fn value(&self) -> f64 {
        self.leading - self.defect
    }
}

/// Entropy asymptotics for `Φ ⊗ Φ̄` applied to the Bell state at size `(n, k)`.
pub fn entropy_prediction(regime: &RegimeParams, n: u64, k: u64) -> Result<EntropyPrediction> {
    regime.validate()?;
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument("n and k must be positive".into()));
    }
    let c = regime.c;
    let (ln_n, ln_k) = ((n as f64).ln(), (k as f64).ln());
    let zero = num_rational::Rational64::from_integer(0);
    let one = num_rational::Rational64::from_integer(1);
    let two = num_rational::Rational64::from_integer(2);
    let p = if regime.d == zero {
        if c.fract() != 0.0 || c as u64 != k {
            return Err(Error::InvalidArgument(format!(
                "fixed-ancilla prediction needs an integer c equal to k (c = {c}, k = {k})"
            )));
        }
        let h = vn_entropy(&gamma_t_vector(regime.t, k)?)?;
        EntropyPrediction {
            case: EntropyCase::FixedAncilla,
            leading: h,
            defect: 0.0,
            second_order_known: true,
            formula: "H(γ^(t))".into(),
        }
    } else if regime.d < one {
        EntropyPrediction {
            case: EntropyCase::Sublinear,
            leading: 2.0 * ln_k,
            defect: 0.0,
            second_order_known: false,
            formula: "2 log k".into(),
        }
    } else if regime.d == one {
        if c < 1.0 {
            EntropyPrediction {
                case: EntropyCase::LinearSmall,
                leading: 2.0 * ln_k,
                defect: c * c / 2.0,
                second_order_known: true,
                formula: "2 log k - c^2/2".into(),
            }
        } else {
            EntropyPrediction {
                case: EntropyCase::LinearLarge,
                leading: 2.0 * ln_n,
                defect: 1.0 / (2.0 * c * c),
                second_order_known: true,
                formula: "2 log n - 1/(2c^2)".into(),
            }
        }
    } else {
        EntropyPrediction {
            case: if regime.d < two {
                EntropyCase::Superlinear
            } else {
                EntropyCase::Quadratic
            },
            leading: 2.0 * ln_n,
            defect: 0.0,
            second_order_known: false,
            formula: "2 log n".into(),
        }
    };
    Ok(p)
}

/// Entropy of `n^2 - 1` eigenvalues distributed as `π_{c^2}` at scale `1/(c^2 n^2)`,
/// to leading order: `log(c^2 n^2) - (1/c^2) ∫ x log x dπ_{c^2}`.
pub fn bulk_law_entropy(c: f64, n: f64) -> Result<f64> {
    let c2 = c * c;
    Ok((c2 * n * n).ln() - mp_entropy_integral(c2)? / c2)
}
