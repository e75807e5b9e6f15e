use faer::linalg::matmul::matmul;
use faer::linalg::matmul::triangular::{matmul as tri_matmul, BlockStructure};
use faer::{c64, Accum, Mat, MatRef, Par, Side};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    complex_gaussian, gaussian_matrix, hermitian_eigenvalues_desc, ChannelSpec, DensityMatrix,
    DEFAULT_OUTPUT_DIM_CAP,
};
use crate::freeprob::vn_entropy_clamped;
use crate::{Error, Result};

const ONE: c64 = c64 { re: 1.0, im: 0.0 };

/// `Z = R R^†` with `R` of shape `n^2 x k^2`.
///
/// `R[(a,b),(x,y)] = ψ[(a,x),(b,y)]` where `ψ` is the output vector of the
/// dilated product channel on the Bell state, so the output is never formed
/// unless asked for.
#[derive(Clone, Debug)]
pub struct OutputFactor {
    n: usize,
    k: usize,
    r: Mat<c64>,
}

impl OutputFactor {
    /// Builds the factor from the Stinespring isometries `V` (of `Φ`) and `W` (of the second channel).
    pub fn from_isometries(spec: &ChannelSpec, v: MatRef<'_, c64>, w: MatRef<'_, c64>) -> Self {
        let (n, k, m) = (spec.n, spec.k, spec.m);
        let nk = n * k;
        assert_eq!((v.nrows(), v.ncols()), (nk, m), "first isometry shape");
        assert_eq!((w.nrows(), w.ncols()), (nk, m), "second isometry shape");
        let mut psi = Mat::<c64>::zeros(nk, nk);
        let alpha = c64::new(1.0 / (m as f64).sqrt(), 0.0);
        matmul(&mut psi, Accum::Replace, v, w.transpose(), alpha, Par::Seq);
        let r = Mat::from_fn(n * n, k * k, |row, col| {
            let (a, b) = (row / n, row % n);
            let (x, y) = (col / k, col % k);
            psi[(a * k + x, b * k + y)]
        });
        Self { n, k, r }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn factor(&self) -> MatRef<'_, c64> {
        self.r.as_ref()
    }

    pub fn output_dim(&self) -> usize {
        self.n * self.n
    }

    pub fn support(&self) -> usize {
        self.r.nrows().min(self.r.ncols())
    }

    /// Materializes `Z`; refuses output dimensions above the default cap.
    pub fn density_matrix(&self) -> Result<DensityMatrix> {
        let d = self.output_dim();
        if d > DEFAULT_OUTPUT_DIM_CAP {
            return Err(Error::CapExceeded {
                what: "output dimension n^2",
                requested: d,
                cap: DEFAULT_OUTPUT_DIM_CAP,
            });
        }
        let mut z = Mat::<c64>::zeros(d, d);
        matmul(&mut z, Accum::Replace, self.r.as_ref(), self.r.adjoint(), ONE, Par::Seq);
        DensityMatrix::from_computed(z)
    }

    /// Factor of `QZQ` with `Q = I - E_n`.
    pub fn pinched(&self) -> Self {
        let n = self.n;
        let w = 1.0 / (n as f64).sqrt();
        let cols = self.r.ncols();
        // omega^† R, with omega = Σ_a e_a ⊗ e_a / sqrt(n).
        let proj: Vec<c64> = (0..cols)
            .map(|c| (0..n).map(|a| self.r[(a * n + a, c)]).sum::<c64>() * w)
            .collect();
        let mut r = self.r.clone();
        for (c, &pc) in proj.iter().enumerate() {
            for a in 0..n {
                r[(a * n + a, c)] -= pc * w;
            }
        }
        Self { n, k: self.k, r }
    }

    /// Gram matrix on the smaller side, Hermitian and fully populated.
    pub fn gram(&self) -> Mat<c64> {
        let r = self.r.as_ref();
        let (rows, cols) = (r.nrows(), r.ncols());
        let d = cols.min(rows);
        let mut g = Mat::<c64>::zeros(d, d);
        if cols <= rows {
            tri_matmul(
                &mut g,
                BlockStructure::TriangularLower,
                Accum::Replace,
                r.adjoint(),
                BlockStructure::Rectangular,
                r,
                BlockStructure::Rectangular,
                ONE,
                Par::Seq,
            );
        } else {
            tri_matmul(
                &mut g,
                BlockStructure::TriangularLower,
                Accum::Replace,
                r,
                BlockStructure::Rectangular,
                r.adjoint(),
                BlockStructure::Rectangular,
                ONE,
                Par::Seq,
            );
        }
        for j in 0..d {
            g[(j, j)] = c64::new(g[(j, j)].re, 0.0);
            for i in (j + 1)..d {
                g[(j, i)] = g[(i, j)].conj();
            }
        }
        g
    }

    /// Eigenvalues of `Z` on its generic support `min(n^2, k^2)`, descending.
    pub fn spectrum(&self) -> Vec<f64> {
        hermitian_eigenvalues_desc(self.gram().as_ref())
    }

    /// `tr Z^p` for `p = 1..=pmax`.
    pub fn trace_powers(&self, pmax: usize) -> Vec<f64> {
        let g = self.gram();
        let d = g.nrows();
        let mut out = Vec::with_capacity(pmax);
        let mut power = g.clone();
        for p in 1..=pmax {
            if p > 1 {
                let mut next = Mat::<c64>::zeros(d, d);
                matmul(&mut next, Accum::Replace, power.as_ref(), g.as_ref(), ONE, Par::Seq);
                power = next;
            }
            out.push((0..d).map(|i| power[(i, i)].re).sum());
        }
        out
    }

    /// `Z X` for a block of vectors `X` (`n^2 x b`).
    pub fn apply(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        let mut tmp = Mat::<c64>::zeros(self.r.ncols(), x.ncols());
        matmul(&mut tmp, Accum::Replace, self.r.adjoint(), x, ONE, Par::Seq);
        let mut out = Mat::<c64>::zeros(self.r.nrows(), x.ncols());
        matmul(&mut out, Accum::Replace, self.r.as_ref(), tmp.as_ref(), ONE, Par::Seq);
        out
    }

    /// Leading Ritz pairs of `Z` after `steps` Lanczos iterations with full reorthogonalization.
    pub fn top_eigenpairs<R: Rng + ?Sized>(
        &self,
        count: usize,
        steps: usize,
        rng: &mut R,
    ) -> (Vec<f64>, Mat<c64>) {
        lanczos(self.output_dim(), count, steps, rng, |x| self.apply(x))
    }

    /// Stochastic estimate of `tr(P Z^p P)` for `p = 1..=4`, where `P` projects
    /// away from the columns of `deflate`.
    pub fn sketch_trace_powers<R: Rng + ?Sized>(
        &self,
        deflate: MatRef<'_, c64>,
        probes: usize,
        rng: &mut R,
    ) -> [f64; 4] {
        let dim = self.output_dim();
        let mut w = gaussian_matrix(rng, dim, probes);
        if deflate.ncols() > 0 {
            let mut coef = Mat::<c64>::zeros(deflate.ncols(), probes);
            matmul(&mut coef, Accum::Replace, deflate.adjoint(), w.as_ref(), ONE, Par::Seq);
            matmul(&mut w, Accum::Add, deflate, coef.as_ref(), -ONE, Par::Seq);
        }
        let y1 = self.apply(w.as_ref());
        let y2 = self.apply(y1.as_ref());
        let mut acc = [0.0; 4];
        for c in 0..probes {
            let mut s = [0.0; 4];
            for i in 0..dim {
                s[0] += (w[(i, c)].conj() * y1[(i, c)]).re;
                s[1] += y1[(i, c)].norm_sqr();
                s[2] += (y1[(i, c)].conj() * y2[(i, c)]).re;
                s[3] += y2[(i, c)].norm_sqr();
            }
            for p in 0..4 {
                acc[p] += s[p];
            }
        }
        acc.map(|x| x / probes as f64)
    }
}

fn norm(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn lanczos<R, F>(dim: usize, count: usize, steps: usize, rng: &mut R, op: F) -> (Vec<f64>, Mat<c64>)
where
    R: Rng + ?Sized,
    F: Fn(MatRef<'_, c64>) -> Mat<c64>,
{
    let steps = steps.min(dim).max(count.min(dim)).max(1);
    let mut basis: Vec<Vec<c64>> = Vec::with_capacity(steps);
    let mut alpha: Vec<f64> = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut q: Vec<c64> = (0..dim).map(|_| complex_gaussian(rng)).collect();
    let nq = norm(&q);
    q.iter_mut().for_each(|z| *z /= nq);
    for _ in 0..steps {
        let x = Mat::from_fn(dim, 1, |i, _| q[i]);
        let y = op(x.as_ref());
        let mut w: Vec<c64> = (0..dim).map(|i| y[(i, 0)]).collect();
        let a: f64 = q.iter().zip(&w).map(|(qi, wi)| (qi.conj() * wi).re).sum();
        alpha.push(a);
        basis.push(q);
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c: c64 = b.iter().zip(&w).map(|(bi, wi)| bi.conj() * wi).sum();
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
            }
        }
        let bnorm = norm(&w);
        if basis.len() == steps || bnorm <= 1e-13 * a.abs().max(1e-300) {
            break;
        }
        beta.push(bnorm);
        q = w.into_iter().map(|z| z / bnorm).collect();
    }
    let s = alpha.len();
    let t = Mat::<f64>::from_fn(s, s, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let eig = t
        .self_adjoint_eigen(Side::Lower)
        .expect("tridiagonal eigensolver did not converge");
    let vals = eig.S().column_vector();
    let vecs = eig.U();
    let take = count.min(s);
    let mut ritz = Vec::with_capacity(take);
    let mut out = Mat::<c64>::zeros(dim, take);
    for c in 0..take {
        let idx = s - 1 - c;
        ritz.push(vals[idx]);
        for (j, b) in basis.iter().enumerate() {
            let coef = vecs[(j, idx)];
            for i in 0..dim {
                out[(i, c)] += b[i] * coef;
            }
        }
    }
    (ritz, out)
}

/// Spectrum summary of an output state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Dimension of the underlying state.
    pub dimension: usize,
    /// Eigenvalues on the support, descending.
    pub eigenvalues: Vec<f64>,
    pub largest: f64,
    /// Eigenvalues after dropping the leading ones.
    pub bulk: Vec<f64>,
    pub scale: f64,
    pub rescaled_bulk: Vec<f64>,
    /// Natural-log von Neumann entropy.
    pub entropy: f64,
    /// Empirical moments 1..=4 of the rescaled bulk.
    pub moments: [f64; 4],
}

impl SpectralReport {
    /// `eigenvalues` must be sorted descending; only the first `support` of them form the bulk.
    pub fn from_spectrum(
        eigenvalues: Vec<f64>,
        dimension: usize,
        scale: f64,
        drop_largest: usize,
        support: usize,
    ) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
        }
        if drop_largest > 2 {
            return Err(Error::InvalidArgument(format!(
                "drop_largest must be at most 2, got {drop_largest}"
            )));
        }
        let support = support.min(eigenvalues.len());
        if drop_largest >= support {
            return Err(Error::InvalidArgument(
                "dropping every eigenvalue leaves an empty bulk".into(),
            ));
        }
        let entropy = vn_entropy_clamped(&eigenvalues)?;
        let bulk: Vec<f64> = eigenvalues[drop_largest..support].to_vec();
        let rescaled_bulk: Vec<f64> = bulk.iter().map(|x| x * scale).collect();
        let count = rescaled_bulk.len() as f64;
        let mut moments = [0.0; 4];
        for x in &rescaled_bulk {
            let mut pw = 1.0;
            for m in moments.iter_mut() {
                pw *= x;
                *m += pw;
            }
        }
        moments.iter_mut().for_each(|m| *m /= count);
        Ok(Self {
            dimension,
            largest: eigenvalues[0],
            eigenvalues,
            bulk,
            scale,
            rescaled_bulk,
            entropy,
            moments,
        })
    }

    /// Standard deviation of the rescaled bulk.
    pub fn bulk_std(&self) -> f64 {
        (self.moments[1] - self.moments[0] * self.moments[0]).max(0.0).sqrt()
    }
}

/// Full eigendecomposition of `z` summarized as a [`SpectralReport`].
pub fn spectral_report(z: &DensityMatrix, scale: f64, drop_largest: usize) -> Result<SpectralReport> {
    let eig = z.eigenvalues();
    let d = eig.len();
    SpectralReport::from_spectrum(eig, d, scale, drop_largest, d)
}

#[cfg(test)]
mod tests {
    use super::super::{product_factor, Flavor};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gram_spectrum_matches_explicit_output() {
        for (n, k) in [(3, 2), (2, 3), (4, 4)] {
            let spec = ChannelSpec::square(n, k, Flavor::Conjugate).unwrap();
            let f = product_factor(&spec, 9);
            let full = f.density_matrix().unwrap().eigenvalues();
            let small = f.spectrum();
            assert_eq!(small.len(), spec.support());
            for (i, x) in small.iter().enumerate() {
                assert!((x - full[i]).abs() < 1e-12);
            }
            for x in &full[small.len()..] {
                assert!(x.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trace_powers_match_spectrum() {
        let spec = ChannelSpec::square(3, 3, Flavor::Independent).unwrap();
        let f = product_factor(&spec, 4);
        let ev = f.spectrum();
        let tp = f.trace_powers(3);
        for p in 1..=3 {
            let direct: f64 = ev.iter().map(|x| x.powi(p as i32)).sum();
            assert!((direct - tp[p - 1]).abs() < 1e-12);
        }
        assert!((tp[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pinched_factor_compresses_output() {
        let spec = ChannelSpec::square(3, 3, Flavor::Conjugate).unwrap();
        let f = product_factor(&spec, 2);
        let z = f.density_matrix().unwrap();
        let d = 9;
        let omega = |i: usize| if i % 4 == 0 { 1.0 / 3f64.sqrt() } else { 0.0 };
        let q = Mat::from_fn(d, d, |i, j| {
            c64::new(if i == j { 1.0 } else { 0.0 } - omega(i) * omega(j), 0.0)
        });
        let mut qz = Mat::<c64>::zeros(d, d);
        matmul(&mut qz, Accum::Replace, q.as_ref(), z.entries(), ONE, Par::Seq);
        let mut qzq = Mat::<c64>::zeros(d, d);
        matmul(&mut qzq, Accum::Replace, qz.as_ref(), q.as_ref(), ONE, Par::Seq);
        let p = f.pinched();
        let mut pz = Mat::<c64>::zeros(d, d);
        matmul(&mut pz, Accum::Replace, p.factor(), p.factor().adjoint(), ONE, Par::Seq);
        for i in 0..d {
            for j in 0..d {
                assert!((pz[(i, j)] - qzq[(i, j)]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn lanczos_finds_the_outlier() {
        let spec = ChannelSpec::square(8, 8, Flavor::Conjugate).unwrap();
        let f = product_factor(&spec, 5);
        let exact = f.spectrum();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (ritz, vecs) = f.top_eigenpairs(2, 40, &mut rng);
        assert!((ritz[0] - exact[0]).abs() < 1e-10 * exact[0]);
        assert!((ritz[1] - exact[1]).abs() < 1e-6 * exact[1]);
        let zu = f.apply(vecs.subcols(0, 1));
        let res: f64 = (0..64)
            .map(|i| (zu[(i, 0)] - vecs[(i, 0)] * ritz[0]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(res < 1e-9);
    }

    #[test]
    fn sketch_traces_are_unbiased() {
        let spec = ChannelSpec::square(6, 6, Flavor::Conjugate).unwrap();
        let f = product_factor(&spec, 6);
        let ev = f.spectrum();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (_, u) = f.top_eigenpairs(1, 30, &mut rng);
        let est = f.sketch_trace_powers(u.as_ref(), 4000, &mut rng);
        for p in 1..=4 {
            let exact: f64 = ev[1..].iter().map(|x| x.powi(p as i32)).sum();
            let rel = (est[p - 1] - exact).abs() / exact;
            assert!(rel < 0.05, "p = {p}: {} vs {exact}", est[p - 1]);
        }
    }

    #[test]
    fn report_on_bell_fraction_vector() {
        let v = [0.625, 0.125, 0.125, 0.125];
        let z = DensityMatrix::from_diagonal(&v).unwrap();
        let rep = spectral_report(&z, 1.0, 1).unwrap();
        let want = -0.625 * 0.625f64.ln() - 3.0 * 0.125 * 0.125f64.ln();
        assert!((rep.entropy - want).abs() < 1e-14);
        assert_eq!(rep.largest, 0.625);
        assert_eq!(rep.bulk, vec![0.125; 3]);
    }

    #[test]
    fn report_on_maximally_mixed_state() {
        let z = DensityMatrix::maximally_mixed(7).unwrap();
        let rep = spectral_report(&z, 7.0, 0).unwrap();
        assert!((rep.entropy - 7f64.ln()).abs() < 1e-12);
        assert!((rep.largest - 1.0 / 7.0).abs() < 1e-15);
        assert!((rep.moments[0] - 1.0).abs() < 1e-12);
        assert!(rep.bulk_std() < 1e-6);
        assert!(spectral_report(&z, 1.0, 3).is_err());
        assert!(spectral_report(&z, 0.0, 0).is_err());
    }
}
