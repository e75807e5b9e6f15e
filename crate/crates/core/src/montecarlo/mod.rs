//! Haar sampling, random channels and their product outputs.
//!
//! Basis conventions: `C^n ⊗ C^k` is indexed by `a·k + x`, `C^m ⊗ C^l` by
//! `i·l + j`, and the output space `C^n ⊗ C^n` by `a·n + b`. The ancilla
//! projector `P_l` is the first basis vector of `C^l`.

mod ensemble;
mod spectrum;

pub use ensemble::{
    run_ensemble, run_ensemble_with, sample_trace_powers, EnsembleConfig, EnsembleReport, FULL_SPECTRUM_MAX,
    Estimate, SpectrumMode,
};
pub use spectrum::{spectral_report, OutputFactor, SpectralReport};

use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Mat, MatRef, Par};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest output dimension `n^2` for which [`product_output`] materializes `Z`.
pub const DEFAULT_OUTPUT_DIM_CAP: usize = 4096;

/// Random stream for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs `f` on every trial index in parallel and returns results in index order.
pub(crate) fn par_trials<T, F>(trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..trials).into_par_iter().map(f).collect()
}

/// Sample mean and standard error of the mean (zero for a single sample).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flavor {
    /// `Φ ⊗ Φ̄` built from one unitary and its entrywise conjugate.
    Conjugate,
    /// `Φ ⊗ Ψ` built from two independent unitaries.
    Independent,
}

/// Dimensions of a channel `M_m -> M_n` with ancilla `k` and complement `l = nk/m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub l: usize,
    pub flavor: Flavor,
}

impl ChannelSpec {
    pub fn new(n: usize, k: usize, m: usize, flavor: Flavor) -> Result<Self> {
        if n == 0 || k == 0 || m == 0 {
            return Err(Error::InvalidArgument(format!(
                "dimensions must be positive (n = {n}, k = {k}, m = {m})"
            )));
        }
        if (n * k) % m != 0 {
            return Err(Error::InvalidArgument(format!(
                "m = {m} does not divide nk = {}",
                n * k
            )));
        }
        Ok(Self {
            n,
            k,
            m,
            l: n * k / m,
            flavor,
        })
    }

    /// `M_n -> M_n`, the square case used by most regimes.
    pub fn square(n: usize, k: usize, flavor: Flavor) -> Result<Self> {
        Self::new(n, k, n, flavor)
    }

    pub fn output_dim(&self) -> usize {
        self.n * self.n
    }

    /// `min(n^2, k^2)`, the generic rank of the product output.
    pub fn support(&self) -> usize {
        (self.n * self.n).min(self.k * self.k)
    }
}

/// A positive semidefinite matrix of unit trace.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    entries: Mat<c64>,
}

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

impl DensityMatrix {
    /// Checks squareness, Hermiticity and unit trace. Positivity is checked by [`Self::is_psd`].
    pub fn new(entries: Mat<c64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let defect = hermitian_defect(entries.as_ref());
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let tr = trace(entries.as_ref());
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidArgument(format!(
                "trace {tr} differs from 1"
            )));
        }
        Ok(Self { entries })
    }

    /// Symmetrizes a numerically computed Hermitian matrix before validating it.
    pub(crate) fn from_computed(mut entries: Mat<c64>) -> Result<Self> {
        hermitize(&mut entries);
        Self::new(entries)
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        let w = 1.0 / dim as f64;
        Self::new(Mat::from_fn(dim, dim, |i, j| {
            if i == j {
                c64::new(w, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        }))
    }

    pub fn from_diagonal(values: &[f64]) -> Result<Self> {
        let d = values.len();
        Self::new(Mat::from_fn(d, d, |i, j| {
            if i == j {
                c64::new(values[i], 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> MatRef<'_, c64> {
        self.entries.as_ref()
    }

    pub fn trace(&self) -> c64 {
        trace(self.entries.as_ref())
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues_desc(self.entries.as_ref())
    }

    pub fn is_psd(&self) -> bool {
        self.eigenvalues().iter().all(|&x| x >= -PSD_TOL)
    }
}

pub(crate) fn trace(a: MatRef<'_, c64>) -> c64 {
    (0..a.nrows()).map(|i| a[(i, i)]).sum()
}

/// `max |A - A^†| / max |A|`.
pub(crate) fn hermitian_defect(a: MatRef<'_, c64>) -> f64 {
    let mut scale: f64 = 0.0;
    let mut defect: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            scale = scale.max(a[(i, j)].norm());
            defect = defect.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        defect / scale
    }
}

pub(crate) fn hermitize(a: &mut Mat<c64>) {
    let d = a.nrows();
    for j in 0..d {
        a[(j, j)] = c64::new(a[(j, j)].re, 0.0);
        for i in (j + 1)..d {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
}

pub(crate) fn hermitian_eigenvalues_desc(a: MatRef<'_, c64>) -> Vec<f64> {
    let mut ev = a
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .expect("Hermitian eigensolver did not converge");
    ev.reverse();
    ev
}

/// Standard complex Gaussian with `E|g|^2 = 1`.
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> c64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `rows x cols` complex Gaussian matrix filled column by column.
pub(crate) fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat<c64> {
    let data: Vec<c64> = (0..rows * cols).map(|_| complex_gaussian(rng)).collect();
    Mat::from_fn(rows, cols, |i, j| data[j * rows + i])
}

fn orthonormalize(g: Mat<c64>, fix_phases: bool) -> Mat<c64> {
    let qr = g.qr();
    let mut q = qr.compute_thin_Q();
    if fix_phases {
        let r = qr.thin_R();
        for j in 0..q.ncols() {
            let d = r[(j, j)];
            let norm = d.norm();
            let phase = if norm > 0.0 { d / norm } else { c64::new(1.0, 0.0) };
            for i in 0..q.nrows() {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// Haar-distributed `rows x cols` isometry (`cols <= rows`).
///
/// Its columns coincide with the first `cols` columns of
/// `sample_haar_with` on a clone of the same generator.
pub fn sample_haar_isometry_with<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat<c64> {
    assert!(cols <= rows, "isometry needs cols <= rows");
    orthonormalize(gaussian_matrix(rng, rows, cols), true)
}

/// Haar-distributed unitary of size `dim` drawn from `rng`.
pub fn sample_haar_with<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Mat<c64> {
    sample_haar_isometry_with(rng, dim, dim)
}

/// Haar-distributed unitary of size `dim`, deterministic in `seed`.
pub fn sample_haar(dim: usize, seed: u64) -> Mat<c64> {
    sample_haar_with(&mut ChaCha8Rng::seed_from_u64(seed), dim)
}

/// Orthonormalization without the phase correction. Not Haar; kept to test the fix.
#[doc(hidden)]
pub fn sample_unfixed_with<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Mat<c64> {
    orthonormalize(gaussian_matrix(rng, dim, dim), false)
}

/// Bell state `E_m` on `C^m ⊗ C^m`.
pub fn bell_state(m: usize) -> Result<DensityMatrix> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be positive".into()));
    }
    let w = 1.0 / m as f64;
    DensityMatrix::new(Mat::from_fn(m * m, m * m, |r, c| {
        if r % (m + 1) == 0 && c % (m + 1) == 0 {
            c64::new(w, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    }))
}

/// Columns of `U` that act on `C^m ⊗ P_l`, i.e. the Stinespring isometry `C^m -> C^n ⊗ C^k`.
pub fn stinespring_isometry(spec: &ChannelSpec, u: MatRef<'_, c64>) -> Result<Mat<c64>> {
    let nk = spec.n * spec.k;
    if u.nrows() != nk || u.ncols() != nk {
        return Err(Error::DimensionMismatch(format!(
            "unitary must be {nk}x{nk}, got {}x{}",
            u.nrows(),
            u.ncols()
        )));
    }
    Ok(Mat::from_fn(nk, spec.m, |r, i| u[(r, i * spec.l)]))
}

/// `Tr_k[V X V^†]` for an arbitrary `m x m` matrix `X`.
pub(crate) fn channel_map(spec: &ChannelSpec, v: MatRef<'_, c64>, x: MatRef<'_, c64>) -> Mat<c64> {
    let (n, k) = (spec.n, spec.k);
    let mut vx = Mat::<c64>::zeros(n * k, spec.m);
    matmul(&mut vx, Accum::Replace, v, x, c64::new(1.0, 0.0), Par::Seq);
    let mut out = Mat::<c64>::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let mut s = c64::new(0.0, 0.0);
            for xi in 0..k {
                for i in 0..spec.m {
                    s += vx[(a * k + xi, i)] * v[(b * k + xi, i)].conj();
                }
            }
            out[(a, b)] = s;
        }
    }
    out
}

/// `Φ(X) = Tr_k[U (X ⊗ P_l) U^†]`.
pub fn apply_channel(spec: &ChannelSpec, u: MatRef<'_, c64>, x: &DensityMatrix) -> Result<DensityMatrix> {
    if x.dim() != spec.m {
        return Err(Error::DimensionMismatch(format!(
            "input must be {0}x{0}, got {1}x{1}",
            spec.m,
            x.dim()
        )));
    }
    let v = stinespring_isometry(spec, u)?;
    DensityMatrix::from_computed(channel_map(spec, v.as_ref(), x.entries()))
}

/// Draws the two Stinespring isometries of the product channel.
pub fn sample_isometries<R: Rng + ?Sized>(spec: &ChannelSpec, rng: &mut R) -> (Mat<c64>, Mat<c64>) {
    let nk = spec.n * spec.k;
    let v = sample_haar_isometry_with(rng, nk, spec.m);
    let w = match spec.flavor {
        Flavor::Conjugate => Mat::from_fn(nk, spec.m, |i, j| v[(i, j)].conj()),
        Flavor::Independent => sample_haar_isometry_with(rng, nk, spec.m),
    };
    (v, w)
}

/// Output factor of one random product channel drawn from `rng`.
pub fn product_factor_with<R: Rng + ?Sized>(spec: &ChannelSpec, rng: &mut R) -> OutputFactor {
    let (v, w) = sample_isometries(spec, rng);
    OutputFactor::from_isometries(spec, v.as_ref(), w.as_ref())
}

/// Output factor of the product channel for `seed` (same draw as [`product_output`]).
pub fn product_factor(spec: &ChannelSpec, seed: u64) -> OutputFactor {
    product_factor_with(spec, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `Z = [Φ ⊗ Φ̄](E_m)` or `[Φ ⊗ Ψ](E_m)` as an explicit `n^2 x n^2` matrix.
pub fn product_output(spec: &ChannelSpec, seed: u64) -> Result<DensityMatrix> {
    product_output_with_cap(spec, seed, DEFAULT_OUTPUT_DIM_CAP)
}

pub fn product_output_with_cap(spec: &ChannelSpec, seed: u64, cap: usize) -> Result<DensityMatrix> {
    if spec.output_dim() > cap {
        return Err(Error::CapExceeded {
            what: "output dimension n^2",
            requested: spec.output_dim(),
            cap,
        });
    }
    product_factor(spec, seed).density_matrix()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
        let mut out: f64 = 0.0;
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                out = out.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
        out
    }

    fn identity_defect(u: MatRef<'_, c64>) -> f64 {
        let mut uu = Mat::<c64>::zeros(u.ncols(), u.ncols());
        matmul(&mut uu, Accum::Replace, u.adjoint(), u, c64::new(1.0, 0.0), Par::Seq);
        let id = Mat::<c64>::identity(u.ncols(), u.ncols());
        max_abs_diff(uu.as_ref(), id.as_ref())
    }

    #[test]
    fn haar_samples_are_unitary_and_reproducible() {
        for dim in [1, 2, 5, 17] {
            let u = sample_haar(dim, 3);
            assert!(identity_defect(u.as_ref()) < 1e-10);
            let again = sample_haar(dim, 3);
            assert_eq!(max_abs_diff(u.as_ref(), again.as_ref()), 0.0);
        }
    }

    #[test]
    fn isometry_is_leading_columns_of_unitary() {
        let mut a = trial_rng(5, 1);
        let mut b = a.clone();
        let full = sample_haar_with(&mut a, 12);
        let part = sample_haar_isometry_with(&mut b, 12, 5);
        assert!(max_abs_diff(full.subcols(0, 5), part.as_ref()) < 1e-12);
    }

    fn arg_chi_square(sampler: impl Fn(&mut ChaCha8Rng) -> Mat<c64>) -> f64 {
        let bins = 8;
        let samples = 8000;
        let mut counts = vec![0usize; bins];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..samples {
            let u = sampler(&mut rng);
            let theta = u[(0, 0)].arg();
            let t = (theta + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
            counts[((t * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let expected = samples as f64 / bins as f64;
        counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum()
    }

    #[test]
    fn phase_fix_is_needed_for_uniform_entry_phases() {
        // chi-square with 7 degrees of freedom: 0.999 quantile is about 24.3.
        let fixed = arg_chi_square(|r| sample_haar_with(r, 2));
        let naive = arg_chi_square(|r| sample_unfixed_with(r, 2));
        assert!(fixed < 24.3, "fixed sampler chi2 = {fixed}");
        assert!(naive > 100.0, "unfixed sampler chi2 = {naive}");
    }

    #[test]
    fn eigenphases_are_spread_uniformly() {
        let bins = 10;
        let mut counts = vec![0usize; bins];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let draws = 400;
        for _ in 0..draws {
            let u = sample_haar_with(&mut rng, 8);
            let ev = u.eigenvalues().unwrap();
            for z in ev {
                let t = (z.arg() + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
                counts[((t * bins as f64) as usize).min(bins - 1)] += 1;
            }
        }
        let expected = (draws * 8) as f64 / bins as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // Eigenphases repel, so the statistic is smaller than for independent points.
        assert!(chi2 < 27.9, "chi2 = {chi2}");
    }

    #[test]
    fn mean_modulus_square_of_entry() {
        let vals = par_trials(100_000, |t| {
            let u = sample_haar_with(&mut trial_rng(21, t as u64), 2);
            u[(0, 0)].norm_sqr()
        });
        let (m, se) = mean_stderr(&vals);
        assert!((m - 0.5).abs() < 3.0 * se, "{m} +- {se}");
    }

    #[test]
    fn bell_state_layout() {
        let e1 = bell_state(1).unwrap();
        assert_eq!(e1.entries()[(0, 0)], c64::new(1.0, 0.0));
        let e2 = bell_state(2).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let want = if [0, 3].contains(&r) && [0, 3].contains(&c) { 0.5 } else { 0.0 };
                assert_eq!(e2.entries()[(r, c)], c64::new(want, 0.0));
            }
        }
        let e3 = bell_state(3).unwrap();
        let mut sq = Mat::<c64>::zeros(9, 9);
        matmul(&mut sq, Accum::Replace, e3.entries(), e3.entries(), c64::new(1.0, 0.0), Par::Seq);
        assert!(max_abs_diff(sq.as_ref(), e3.entries()) < 1e-15);
        assert!((e3.trace().re - 1.0).abs() < 1e-15);
    }

    /// Partial trace written as explicit index loops over the full unitary.
    fn channel_oracle(spec: &ChannelSpec, u: MatRef<'_, c64>, x: MatRef<'_, c64>) -> Mat<c64> {
        let (n, k, m, l) = (spec.n, spec.k, spec.m, spec.l);
        let nk = n * k;
        // Y = U (X ⊗ P_l) U^†, with (X ⊗ P_l)[(i,j),(i',j')] = X[i,i'] [j = j' = 0].
        let mut y = Mat::<c64>::zeros(nk, nk);
        for r in 0..nk {
            for c in 0..nk {
                let mut s = c64::new(0.0, 0.0);
                for i in 0..m {
                    for ip in 0..m {
                        s += u[(r, i * l)] * x[(i, ip)] * u[(c, ip * l)].conj();
                    }
                }
                y[(r, c)] = s;
            }
        }
        Mat::from_fn(n, n, |a, b| (0..k).map(|xi| y[(a * k + xi, b * k + xi)]).sum())
    }

    #[test]
    fn channel_matches_index_loop_oracle() {
        for (n, k, m) in [(2, 2, 2), (2, 3, 3), (3, 2, 1), (2, 2, 4)] {
            let spec = ChannelSpec::new(n, k, m, Flavor::Conjugate).unwrap();
            let u = sample_haar(n * k, 17);
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let g = gaussian_matrix(&mut rng, m, m);
            let mut x = Mat::<c64>::zeros(m, m);
            matmul(&mut x, Accum::Replace, g.as_ref(), g.adjoint(), c64::new(1.0, 0.0), Par::Seq);
            let tr = trace(x.as_ref());
            let x = Mat::from_fn(m, m, |i, j| x[(i, j)] / tr);
            let rho = DensityMatrix::from_computed(x).unwrap();
            let out = apply_channel(&spec, u.as_ref(), &rho).unwrap();
            let oracle = channel_oracle(&spec, u.as_ref(), rho.entries());
            assert!(max_abs_diff(out.entries(), oracle.as_ref()) < 1e-12);
            assert!((out.trace().re - 1.0).abs() < 1e-12);
            assert!(out.is_psd());
        }
    }

    #[test]
    fn trivial_ancilla_preserves_spectrum() {
        // k = 1, m = 2, n = 4: Φ is conjugation by an isometry C^2 -> C^4.
        let spec = ChannelSpec::new(4, 1, 2, Flavor::Conjugate).unwrap();
        let u = sample_haar(4, 2);
        let rho = DensityMatrix::from_diagonal(&[0.7, 0.3]).unwrap();
        let ev = apply_channel(&spec, u.as_ref(), &rho).unwrap().eigenvalues();
        let want = [0.7, 0.3, 0.0, 0.0];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn maximally_mixed_input_keeps_unit_trace() {
        let spec = ChannelSpec::new(3, 4, 6, Flavor::Conjugate).unwrap();
        let u = sample_haar(12, 1);
        let out = apply_channel(&spec, u.as_ref(), &DensityMatrix::maximally_mixed(6).unwrap()).unwrap();
        assert!((out.trace().re - 1.0).abs() < 1e-12);
    }

    /// `Z = (1/m) Σ_ij Φ(e_ij) ⊗ Ψ(e_ij)` from the two isometries.
    fn kraus_oracle(spec: &ChannelSpec, v: MatRef<'_, c64>, w: MatRef<'_, c64>) -> Mat<c64> {
        let (n, m) = (spec.n, spec.m);
        let mut z = Mat::<c64>::zeros(n * n, n * n);
        for i in 0..m {
            for j in 0..m {
                let e = Mat::from_fn(m, m, |r, c| {
                    if r == i && c == j {
                        c64::new(1.0, 0.0)
                    } else {
                        c64::new(0.0, 0.0)
                    }
                });
                let a = channel_map(spec, v, e.as_ref());
                let b = channel_map(spec, w, e.as_ref());
                for a1 in 0..n {
                    for a2 in 0..n {
                        for b1 in 0..n {
                            for b2 in 0..n {
                                z[(a1 * n + b1, a2 * n + b2)] += a[(a1, a2)] * b[(b1, b2)] / m as f64;
                            }
                        }
                    }
                }
            }
        }
        z
    }

    #[test]
    fn product_output_matches_kraus_expansion() {
        for flavor in [Flavor::Conjugate, Flavor::Independent] {
            for (n, k, m) in [(2, 2, 2), (3, 2, 3), (2, 3, 2)] {
                let spec = ChannelSpec::new(n, k, m, flavor).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(12);
                let (v, w) = sample_isometries(&spec, &mut rng);
                let z = OutputFactor::from_isometries(&spec, v.as_ref(), w.as_ref())
                    .density_matrix()
                    .unwrap();
                let oracle = kraus_oracle(&spec, v.as_ref(), w.as_ref());
                assert!(max_abs_diff(z.entries(), oracle.as_ref()) < 1e-12);
                assert!(z.is_psd());
            }
        }
    }

    #[test]
    fn product_output_is_a_state() {
        for seed in 0..5 {
            let spec = ChannelSpec::new(4, 3, 6, Flavor::Conjugate).unwrap();
            let z = product_output(&spec, seed).unwrap();
            assert!((z.trace().re - 1.0).abs() < 1e-10);
            assert!(z.is_psd());
            let spec = ChannelSpec::square(3, 5, Flavor::Independent).unwrap();
            let z = product_output(&spec, seed).unwrap();
            assert!((z.trace().re - 1.0).abs() < 1e-10);
            assert!(z.is_psd());
        }
    }

    #[test]
    fn product_output_guards_dimension() {
        let spec = ChannelSpec::square(65, 1, Flavor::Conjugate).unwrap();
        assert!(matches!(product_output(&spec, 0), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn spec_validation() {
        assert!(ChannelSpec::new(3, 3, 2, Flavor::Conjugate).is_err());
        assert!(ChannelSpec::new(0, 3, 3, Flavor::Conjugate).is_err());
        let s = ChannelSpec::new(200, 2, 200, Flavor::Conjugate).unwrap();
        assert_eq!(s.l, 2);
        assert_eq!(s.support(), 4);
    }

    #[test]
    fn density_matrix_validation() {
        let bad = Mat::from_fn(2, 2, |i, j| c64::new(if i == j { 0.5 } else { 0.1 * (i as f64 - j as f64) }, 0.0));
        assert!(matches!(DensityMatrix::new(bad), Err(Error::NotHermitian(_))));
        let bad_trace = Mat::from_fn(2, 2, |i, j| c64::new(if i == j { 0.6 } else { 0.0 }, 0.0));
        assert!(DensityMatrix::new(bad_trace).is_err());
    }
}
