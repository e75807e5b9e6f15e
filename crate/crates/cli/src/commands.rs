use std::path::Path;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use serde_json::json;

use wgchan::freeprob::{entropy_prediction, mp_moment, naive_bound};
use wgchan::moments::{
    self, asymptotic_moment_conjugate, describe_minimizers, minimize_s, minimize_s1, minimize_s2,
    minimize_s_pinched, rational_to_f64, table1_row, table2_row, MomentModel, PairExponent, RegimeParams,
    TableRow,
};
use wgchan::montecarlo::{
    run_ensemble_with, sample_trace_powers, ChannelSpec, EnsembleConfig, Flavor, SpectrumMode,
};
use wgchan::perm::Permutation;
use wgchan::weingarten::wg_exact;

use crate::output::{Cell, Emitter, Format};
use crate::parse::{derive_seed, parse_exponent, parse_list};
use crate::{
    ChannelArgs, CliError, CompareArgs, EntropyArgs, ExactArgs, Exponent, FlavorArg, MinimizeArgs, ModeArg,
    SimulateArgs, WgArgs,
};

type Result<T> = std::result::Result<T, CliError>;

/// Largest moment order for the exponent searches and exact sums.
const P_CAP: usize = 3;

pub struct Ctx<'a> {
    pub format: Format,
    pub out: Option<&'a Path>,
}

impl Ctx<'_> {
    fn emitter(&self, command: &str, args: &impl Serialize, columns: &[&'static str]) -> Result<Emitter> {
        let config = json!({
            "command": command,
            "args": serde_json::to_value(args).expect("arguments serialize"),
        });
        Ok(Emitter::open(self.out, self.format, &config, columns)?)
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

pub fn wg(ctx: &Ctx, a: &WgArgs) -> Result<()> {
    if a.p == 0 {
        return Err(invalid("p must be at least 1"));
    }
    let table = wg_exact(a.n, a.p)?;
    let mut e = ctx.emitter("wg", a, &["cycle_type", "value", "float"])?;
    for (class, v) in table.iter() {
        e.row(vec![class.to_string().into(), v.to_string().into(), rational_to_f64(v).into()])?;
    }
    Ok(e.finish()?)
}

pub fn exact_moments(ctx: &Ctx, a: &ExactArgs) -> Result<()> {
    let m = a.m.unwrap_or(a.n);
    let cap = if a.allow_p4 { 4 } else { P_CAP };
    if a.p_max == 0 {
        return Err(invalid("p-max must be at least 1"));
    }
    if a.p_max > cap {
        return Err(invalid(format!("p-max = {} exceeds the cap {cap}", a.p_max)));
    }
    if a.pinched && m != a.n {
        return Err(invalid("the pinched moments need m = n"));
    }
    if a.n * a.k < 2 * a.p_max as u64 {
        return Err(invalid(format!("n k = {} < 2p = {}", a.n * a.k, 2 * a.p_max)));
    }
    let mut e = ctx.emitter("exact-moments", a, &["p", "exact", "float"])?;
    for p in 1..=a.p_max {
        let wg = wg_exact(a.n * a.k, 2 * p)?;
        let v = if a.pinched {
            moments::exact_moment_pinched_with_cap(p, a.n, a.k, &wg, cap)?
        } else {
            moments::exact_moment_conjugate_with_cap(p, a.n, a.k, m, &wg, cap)?
        };
        e.row(vec![p.into(), v.to_string().into(), rational_to_f64(&v).into()])?;
    }
    Ok(e.finish()?)
}

fn perm_list(ps: &[Permutation]) -> String {
    ps.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ")
}

fn table_text(row: &TableRow) -> String {
    format!("min {} at {}", row.minimum, describe_minimizers(&row.minimizers))
}

pub fn minimize(ctx: &Ctx, a: &MinimizeArgs) -> Result<()> {
    if a.p == 0 || a.p > P_CAP {
        return Err(invalid(format!("p = {} outside the searchable range 1..={P_CAP}", a.p)));
    }
    let ds: Vec<Rational64> = a
        .d
        .split(',')
        .map(parse_exponent)
        .collect::<std::result::Result<_, _>>()
        .map_err(CliError::Invalid)?;
    let mut e = ctx.emitter(
        "minimize",
        a,
        &["kind", "p", "d", "minimum", "count", "minimizers", "table", "matches"],
    )?;
    let mut mismatches = Vec::new();
    for &d in &ds {
        for &kind in &a.kind {
            let (name, minimum, count, list, table, matches) = match kind {
                Exponent::S1 | Exponent::S2 => {
                    let (rep, row) = if kind == Exponent::S1 {
                        (minimize_s1(a.p, d)?, table2_row(a.p, d).ok())
                    } else {
                        (minimize_s2(a.p, d)?, table1_row(a.p, d).ok())
                    };
                    let ok = match &row {
                        Some(r) => Some(r.matches(&rep, a.p)?),
                        None => None,
                    };
                    if a.check_tables && ok == Some(false) {
                        mismatches.push(format!("{kind:?} at d = {d}"));
                    }
                    (
                        if kind == Exponent::S1 { "s1" } else { "s2" },
                        Cell::Text(rep.minimum.to_string()),
                        rep.minimizers.len(),
                        perm_list(&rep.minimizers),
                        row.as_ref().map_or(Cell::Empty, |r| table_text(r).into()),
                        ok.map_or(Cell::Empty, |b| b.to_string().into()),
                    )
                }
                Exponent::Pair => {
                    let rep = minimize_s(a.p, PairExponent::Nonlinear(d))?;
                    let list = rep
                        .minimizers
                        .iter()
                        .map(|(x, y)| format!("({x};{y})"))
                        .collect::<Vec<_>>()
                        .join(" ");
                    ("pair", rep.minimum.to_string().into(), rep.minimizers.len(), list, Cell::Empty, Cell::Empty)
                }
                Exponent::Pinched => match minimize_s_pinched(a.p, d) {
                    Ok(rep) => {
                        let list = rep
                            .minimizers
                            .iter()
                            .map(|m| format!("({};{};{})", m.alpha, m.beta, m.f))
                            .collect::<Vec<_>>()
                            .join(" ");
                        ("pinched", rep.minimum.to_string().into(), rep.minimizers.len(), list, Cell::Empty, Cell::Empty)
                    }
                    Err(wgchan::Error::NotApplicable(_)) => {
                        ("pinched", Cell::Empty, 0, "not applicable".into(), Cell::Empty, Cell::Empty)
                    }
                    Err(err) => return Err(err.into()),
                },
            };
            e.row(vec![
                name.into(),
                a.p.into(),
                d.to_string().into(),
                minimum,
                count.into(),
                list.into(),
                table,
                matches,
            ])?;
        }
    }
    e.finish()?;
    if !mismatches.is_empty() {
        return Err(CliError::Check(format!("table mismatch: {}", mismatches.join(", "))));
    }
    Ok(())
}

fn channel(a: &ChannelArgs) -> Result<ChannelSpec> {
    let m = match (a.m, a.t) {
        (Some(m), _) => m,
        (None, Some(t)) => {
            let x = t * (a.n * a.k) as f64;
            if !(t > 0.0 && t <= 1.0) || (x - x.round()).abs() > 1e-9 {
                return Err(invalid(format!("t n k = {x} must be an integer with t in (0, 1]")));
            }
            x.round() as usize
        }
        (None, None) => a.n,
    };
    let flavor = match a.flavor {
        FlavorArg::Conjugate => Flavor::Conjugate,
        FlavorArg::Independent => Flavor::Independent,
    };
    Ok(ChannelSpec::new(a.n, a.k, m, flavor)?)
}

pub fn simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<()> {
    let spec = channel(&a.channel)?;
    if a.trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let mut cfg = EnsembleConfig::new(a.trials, derive_seed(a.seed, "simulate"));
    cfg.scale = a.scale;
    cfg.drop_largest = a.drop;
    cfg.mode = match a.mode {
        ModeArg::Auto => SpectrumMode::Auto,
        ModeArg::Full => SpectrumMode::Full,
        ModeArg::Sketch => SpectrumMode::DEFAULT_SKETCH,
    };
    let rep = run_ensemble_with(&spec, &cfg)?;
    let mut e = ctx.emitter("simulate", a, &["statistic", "mean", "stderr", "trials"])?;
    let mut put = |name: String, mean: f64, se: Cell| e.row(vec![name.into(), mean.into(), se, rep.trials.into()]);
    for (i, t) in rep.top.iter().enumerate() {
        put(format!("lambda_{}", i + 1), t.mean, t.stderr.into())?;
    }
    put("lambda_1_max".into(), rep.max_largest, Cell::Empty)?;
    if let Some(h) = rep.entropy {
        put("entropy".into(), h.mean, h.stderr.into())?;
    }
    for (i, m) in rep.bulk_moments.iter().enumerate() {
        put(format!("bulk_moment_{}", i + 1), m.mean, m.stderr.into())?;
    }
    put("bulk_std".into(), rep.bulk_std.mean, rep.bulk_std.stderr.into())?;
    Ok(e.finish()?)
}

/// Leading-order `E tr Z^p`: the linear-regime formula for conjugate channels and the
/// free Poisson moments of an `n^2 x k^2` Wishart matrix for independent ones.
fn theory(spec: &ChannelSpec, p: usize) -> Result<f64> {
    let n = spec.n as f64;
    match spec.flavor {
        Flavor::Conjugate => {
            let regime = RegimeParams::new(spec.m as f64 / n, spec.k as f64 / n, Rational64::from_integer(1), 1.0)?;
            Ok(asymptotic_moment_conjugate(p, &regime, MomentModel::Linear)?.at(n))
        }
        Flavor::Independent => {
            let big = n * n;
            let ratio = big / (spec.k * spec.k) as f64;
            Ok(big.powi(1 - p as i32) * ratio.powi(p as i32) * mp_moment(1.0 / ratio, p)?)
        }
    }
}

/// `(mean - reference) / stderr`, with the stderr floored at `1e-12 |reference|` so that
/// round-off in statistics that are constant per trial (such as `tr Z`) does not blow up.
fn z(mean: f64, se: f64, reference: Option<f64>) -> Option<f64> {
    reference.map(|r| {
        let dev = mean - r;
        let se = se.max(1e-12 * r.abs());
        if se > 0.0 {
            dev / se
        } else if dev == 0.0 {
            0.0
        } else {
            dev.signum() * f64::INFINITY
        }
    })
}

pub fn compare(ctx: &Ctx, a: &CompareArgs) -> Result<()> {
    let spec = channel(&a.channel)?;
    if a.trials < 2 {
        return Err(invalid("compare needs at least 2 trials"));
    }
    if a.p_max == 0 || a.p_max > 12 {
        return Err(invalid("p-max must lie in 1..=12"));
    }
    if !(a.rescale > 0.0) || !(a.z_threshold > 0.0) {
        return Err(invalid("rescale and z-threshold must be positive"));
    }
    let mc = sample_trace_powers(&spec, a.trials, derive_seed(a.seed, "compare"), a.p_max, false)?;
    let mut e = ctx.emitter(
        "compare",
        a,
        &["p", "exact", "mc_mean", "mc_stderr", "theory", "z_exact", "z_theory"],
    )?;
    let mut worst: f64 = 0.0;
    for (i, est) in mc.iter().enumerate() {
        let p = i + 1;
        let (nu, ku, mu) = (spec.n as u64, spec.k as u64, spec.m as u64);
        let exact = if spec.flavor == Flavor::Conjugate && p <= P_CAP && nu * ku >= 2 * p as u64 {
            let wg = wg_exact(nu * ku, 2 * p)?;
            Some(rational_to_f64(&moments::exact_moment_conjugate(p, nu, ku, mu, &wg)?))
        } else {
            None
        };
        let th = theory(&spec, p)?;
        let (mean, se) = (est.mean * a.rescale, est.stderr * a.rescale);
        let ze = z(mean, se, exact);
        let zt = z(mean, se, Some(th));
        worst = worst.max(ze.or(zt).unwrap_or(0.0).abs());
        e.row(vec![p.into(), exact.into(), mean.into(), se.into(), th.into(), ze.into(), zt.into()])?;
    }
    e.finish()?;
    if a.strict && worst > a.z_threshold {
        return Err(CliError::Check(format!(
            "|z| = {worst:.3} exceeds the threshold {}",
            a.z_threshold
        )));
    }
    Ok(())
}

pub fn entropy(ctx: &Ctx, a: &EntropyArgs) -> Result<()> {
    let d = parse_exponent(&a.d).map_err(CliError::Invalid)?;
    let ns: Vec<usize> = parse_list(&a.n).map_err(CliError::Invalid)?;
    if a.trials == 0 || ns.iter().any(|&n| n == 0) {
        return Err(invalid("trials and n must be positive"));
    }
    if !(a.c > 0.0) {
        return Err(invalid("c must be positive"));
    }
    let mut e = ctx.emitter(
        "entropy",
        a,
        &["n", "k", "m", "entropy_mean", "entropy_stderr", "prediction", "formula", "naive_bound", "defect"],
    )?;
    for &n in &ns {
        let (k, t) = if d.is_zero() {
            if a.c.fract() != 0.0 {
                return Err(invalid("d = 0 needs an integer c (the ancilla dimension k)"));
            }
            let k = a.c as usize;
            (k, a.t.unwrap_or(1.0 / k as f64))
        } else {
            let k = (a.c * (n as f64).powf(d.to_f64().unwrap_or(f64::NAN))).round() as usize;
            (k.max(1), 1.0)
        };
        let args = ChannelArgs {
            n,
            k,
            m: if d.is_zero() { None } else { Some(n) },
            t: if d.is_zero() { Some(t) } else { None },
            flavor: FlavorArg::Conjugate,
        };
        let spec = channel(&args)?;
        if spec.support() > wgchan::montecarlo::FULL_SPECTRUM_MAX {
            return Err(invalid(format!(
                "support min(n^2, k^2) = {} exceeds {} for the full spectrum",
                spec.support(),
                wgchan::montecarlo::FULL_SPECTRUM_MAX
            )));
        }
        let mut cfg = EnsembleConfig::new(a.trials, derive_seed(a.seed, &format!("entropy:{n}")));
        cfg.mode = SpectrumMode::Full;
        let rep = run_ensemble_with(&spec, &cfg)?;
        let h = rep.entropy.expect("full mode reports the entropy");
        let regime = RegimeParams::new(1.0, a.c, d, t)?;
        let pred = entropy_prediction(&regime, n as u64, k as u64)?;
        let naive = naive_bound(k as u64).ok();
        let defect = 2.0 * (k.min(n) as f64).ln() - h.mean;
        e.row(vec![
            n.into(),
            k.into(),
            spec.m.into(),
            h.mean.into(),
            h.stderr.into(),
            pred.value().into(),
            pred.formula.into(),
            naive.into(),
            defect.into(),
        ])?;
    }
    Ok(e.finish()?)
}
