use serde::{Deserialize, Serialize};

use super::spectrum::SpectralReport;
use super::{mean_stderr, par_trials, product_factor_with, trial_rng, ChannelSpec, Flavor};
use crate::{Error, Result};

/// Largest support `min(n^2, k^2)` handled by exact diagonalization under [`SpectrumMode::Auto`].
pub const FULL_SPECTRUM_MAX: usize = 2500;

/// Mean and standard error of a real statistic over independent trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let (mean, stderr) = mean_stderr(xs);
        Self {
            mean,
            stderr,
            trials: xs.len(),
        }
    }

    /// `(mean - reference) / stderr`; zero stderr gives 0 on agreement and ±inf otherwise.
    pub fn z_score(&self, reference: f64) -> f64 {
        let dev = self.mean - reference;
        if self.stderr > 0.0 {
            dev / self.stderr
        } else if dev.abs() < 1e-12 {
            0.0
        } else {
            dev.signum() * f64::INFINITY
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumMode {
    /// Full diagonalization when the support is at most [`FULL_SPECTRUM_MAX`], sketching otherwise.
    Auto,
    Full,
    /// Lanczos for the top of the spectrum and Hutchinson probes for the bulk moments.
    /// The entropy is not available in this mode.
    Sketch { lanczos_steps: usize, probes: usize },
}

impl SpectrumMode {
    pub const DEFAULT_SKETCH: SpectrumMode = SpectrumMode::Sketch {
        lanczos_steps: 30,
        probes: 24,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub trials: usize,
    pub seed: u64,
    /// Bulk rescaling; defaults to `k^2`.
    pub scale: Option<f64>,
    /// Outliers excluded from the bulk; defaults to 1 for conjugate and 0 for independent channels.
    pub drop_largest: Option<usize>,
    pub mode: SpectrumMode,
    /// How many leading eigenvalues to track individually (full mode).
    pub top: usize,
}

impl EnsembleConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            scale: None,
            drop_largest: None,
            mode: SpectrumMode::Auto,
            top: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub spec: ChannelSpec,
    pub trials: usize,
    pub sketched: bool,
    pub scale: f64,
    pub drop_largest: usize,
    /// `λ_1, λ_2, ..` (only `λ_1` when sketched).
    pub top: Vec<Estimate>,
    /// Largest `λ_1` seen over all trials.
    pub max_largest: f64,
    pub entropy: Option<Estimate>,
    /// Moments 1..=4 of the rescaled bulk.
    pub bulk_moments: Vec<Estimate>,
    pub bulk_std: Estimate,
}

struct TrialSummary {
    top: Vec<f64>,
    entropy: Option<f64>,
    moments: [f64; 4],
    std: f64,
}

pub fn run_ensemble(spec: &ChannelSpec, trials: usize, seed: u64) -> Result<EnsembleReport> {
    run_ensemble_with(spec, &EnsembleConfig::new(trials, seed))
}

pub fn run_ensemble_with(spec: &ChannelSpec, cfg: &EnsembleConfig) -> Result<EnsembleReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let scale = cfg.scale.unwrap_or((spec.k * spec.k) as f64);
    let drop = cfg.drop_largest.unwrap_or(match spec.flavor {
        Flavor::Conjugate => 1,
        Flavor::Independent => 0,
    });
    if !(scale > 0.0) || drop > 2 || drop >= spec.support() {
        return Err(Error::InvalidArgument(format!(
            "invalid bulk definition (scale = {scale}, drop_largest = {drop}, support = {})",
            spec.support()
        )));
    }
    let mode = match cfg.mode {
        SpectrumMode::Auto if spec.support() <= FULL_SPECTRUM_MAX => SpectrumMode::Full,
        SpectrumMode::Auto => SpectrumMode::DEFAULT_SKETCH,
        other => other,
    };
    let support = spec.support();
    let summaries: Vec<Result<TrialSummary>> = par_trials(cfg.trials, |t| {
        let mut rng = trial_rng(cfg.seed, t as u64);
        let factor = product_factor_with(spec, &mut rng);
        match mode {
            SpectrumMode::Sketch {
                lanczos_steps,
                probes,
            } => {
                let (ritz, vecs) = factor.top_eigenpairs(drop.max(1), lanczos_steps, &mut rng);
                let deflate = vecs.subcols(0, drop);
                let tp = factor.sketch_trace_powers(deflate, probes.max(1), &mut rng);
                let count = (support - drop) as f64;
                let mut moments = [0.0; 4];
                let mut pw = 1.0;
                for p in 0..4 {
                    pw *= scale;
                    moments[p] = pw * tp[p] / count;
                }
                let std = (moments[1] - moments[0] * moments[0]).max(0.0).sqrt();
                Ok(TrialSummary {
                    top: vec![ritz[0]],
                    entropy: None,
                    moments,
                    std,
                })
            }
            _ => {
                let eig = factor.spectrum();
                let rep = SpectralReport::from_spectrum(eig, spec.output_dim(), scale, drop, support)?;
                Ok(TrialSummary {
                    top: rep.eigenvalues.iter().take(cfg.top.max(1)).copied().collect(),
                    entropy: Some(rep.entropy),
                    moments: rep.moments,
                    std: rep.bulk_std(),
                })
            }
        }
    });
    let summaries: Vec<TrialSummary> = summaries.into_iter().collect::<Result<_>>()?;
    let column = |f: &dyn Fn(&TrialSummary) -> f64| {
        Estimate::from_samples(&summaries.iter().map(f).collect::<Vec<_>>())
    };
    let ntop = summaries[0].top.len();
    let top = (0..ntop).map(|i| column(&|s| s.top[i])).collect();
    let entropy = if summaries[0].entropy.is_some() {
        Some(column(&|s| s.entropy.unwrap_or(f64::NAN)))
    } else {
        None
    };
    let bulk_moments = (0..4).map(|p| column(&|s| s.moments[p])).collect();
    Ok(EnsembleReport {
        spec: *spec,
        trials: cfg.trials,
        sketched: matches!(mode, SpectrumMode::Sketch { .. }),
        scale,
        drop_largest: drop,
        top,
        max_largest: summaries.iter().map(|s| s.top[0]).fold(f64::NEG_INFINITY, f64::max),
        entropy,
        bulk_moments,
        bulk_std: column(&|s| s.std),
    })
}

/// Monte Carlo estimates of `E tr Z^p` (or of `E tr (QZQ)^p` when `pinched`) for `p = 1..=pmax`.
pub fn sample_trace_powers(
    spec: &ChannelSpec,
    trials: usize,
    seed: u64,
    pmax: usize,
    pinched: bool,
) -> Result<Vec<Estimate>> {
    if trials == 0 || pmax == 0 {
        return Err(Error::InvalidArgument("trials and pmax must be positive".into()));
    }
    if spec.support() > FULL_SPECTRUM_MAX {
        return Err(Error::CapExceeded {
            what: "support min(n^2, k^2)",
            requested: spec.support(),
            cap: FULL_SPECTRUM_MAX,
        });
    }
    let rows: Vec<Vec<f64>> = par_trials(trials, |t| {
        let mut rng = trial_rng(seed, t as u64);
        let mut factor = product_factor_with(spec, &mut rng);
        if pinched {
            factor = factor.pinched();
        }
        factor.trace_powers(pmax)
    });
    Ok((0..pmax)
        .map(|p| Estimate::from_samples(&rows.iter().map(|r| r[p]).collect::<Vec<_>>()))
        .collect())
}
