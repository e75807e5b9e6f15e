use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::Zero;

use wgchan::moments::{
    asymptotic_moment_conjugate, exact_moment_conjugate, exact_moment_pinched, exact_moment_pinched_normalized,
    rational_to_f64, MomentModel, RegimeParams,
};
use wgchan::montecarlo::{sample_trace_powers, ChannelSpec, Flavor};
use wgchan::weingarten::{haar_moment, wg_exact, IndexTuple};

fn q(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

/// `E tr Z^2` for the conjugate channel by expanding every matrix index and
/// integrating each monomial of degree (4, 4) in `U` separately.
fn brute_force_second_moment(n: usize, k: usize, m: usize) -> BigRational {
    let dim = (n * k) as u64;
    let table = wg_exact(dim, 4).unwrap();
    let row = |a: usize, x: usize| a * k + x + 1;
    let mut total = BigRational::zero();
    let mut idx = [0usize; 12];
    let ranges = [n, n, k, k, n, n, k, k, m, m, m, m];
    loop {
        let [a, b, x, y, a2, b2, x2, y2, i, j, i2, j2] = idx;
        // tr[Φ(e_ij) Φ(e_i'j')] · tr[Φ̄(e_ij) Φ̄(e_i'j')]
        let u = [(row(a, x), i), (row(b, y), i2), (row(b2, x2), j), (row(a2, y2), j2)];
        let ubar = [(row(b, x), j), (row(a, y), j2), (row(a2, x2), i), (row(b2, y2), i2)];
        let t = IndexTuple::new(
            u.iter().map(|e| e.0).collect(),
            ubar.iter().map(|e| e.0).collect(),
            u.iter().map(|e| e.1 + 1).collect(),
            ubar.iter().map(|e| e.1 + 1).collect(),
        )
        .unwrap();
        total += haar_moment(dim, &t, &table).unwrap();
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return total / BigRational::from_integer(BigInt::from(m * m));
            }
            idx[pos] += 1;
            if idx[pos] < ranges[pos] {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

#[test]
fn index_expansion_agrees_with_permutation_sum() {
    let oracle = brute_force_second_moment(2, 2, 2);
    assert_eq!(oracle, q(4, 7));
    let wg = wg_exact(4, 4).unwrap();
    assert_eq!(exact_moment_conjugate(2, 2, 2, 2, &wg).unwrap(), oracle);
    let oracle = brute_force_second_moment(2, 2, 1);
    assert_eq!(exact_moment_conjugate(2, 2, 2, 1, &wg).unwrap(), oracle);
}

#[test]
fn frozen_conjugate_values() {
    // (p, n, k, m) -> E tr Z^p; each is cross-checked against Monte Carlo below.
    let cases = [
        (2, 2, 2, 2, q(4, 7)),
        (2, 3, 3, 3, q(1097, 3465)),
        (3, 2, 3, 3, q(662, 2205)),
        (2, 2, 3, 1, q(11, 21)),
        (3, 3, 2, 2, q(12, 49)),
    ];
    for (p, n, k, m, want) in cases {
        let wg = wg_exact(n * k, 2 * p).unwrap();
        assert_eq!(exact_moment_conjugate(p, n, k, m, &wg).unwrap(), want, "(p, n, k, m) = ({p}, {n}, {k}, {m})");
    }
}

#[test]
fn frozen_values_match_monte_carlo() {
    for (seed, (p, n, k, m, want)) in [(3usize, 2usize, 3usize, 3usize, q(662, 2205)), (2, 2, 3, 1, q(11, 21)), (3, 3, 2, 2, q(12, 49))]
        .into_iter()
        .enumerate()
    {
        let spec = ChannelSpec::new(n, k, m, Flavor::Conjugate).unwrap();
        let est = sample_trace_powers(&spec, 20_000, 500 + seed as u64, p, false).unwrap();
        let z = est[p - 1].z_score(rational_to_f64(&want));
        assert!(z.abs() < 4.5, "(p, n, k, m) = ({p}, {n}, {k}, {m}): z = {z}");
    }
    let spec = ChannelSpec::square(2, 3, Flavor::Conjugate).unwrap();
    let est = sample_trace_powers(&spec, 20_000, 77, 3, true).unwrap();
    let z = est[2].z_score(rational_to_f64(&q(2203, 64680)));
    assert!(z.abs() < 4.5, "pinched z = {z}");
}

#[test]
fn frozen_pinched_values() {
    let cases = [(1, 2, 2, q(2, 5)), (2, 2, 2, q(29, 280)), (2, 3, 3, q(2666, 31185)), (3, 2, 3, q(2203, 64680))];
    for (p, n, k, want) in cases {
        let wg = wg_exact(n * k, 2 * p).unwrap();
        assert_eq!(exact_moment_pinched(p, n, k, &wg).unwrap(), want);
    }
    let wg = wg_exact(9, 4).unwrap();
    assert_eq!(exact_moment_pinched_normalized(2, 3, 3, &wg).unwrap(), q(2666 * 9, 31185));
}

#[test]
fn pinched_first_moment_closed_form() {
    for n in 1..=4i64 {
        for k in 1..=4i64 {
            if n * k < 2 {
                continue;
            }
            let wg = wg_exact((n * k) as u64, 2).unwrap();
            let bell = q(k * k - k - 1 + k * n * n, (n * k) * (n * k) - 1);
            let got = exact_moment_pinched(1, n as u64, k as u64, &wg).unwrap();
            assert_eq!(got, q(1, 1) - bell, "n = {n}, k = {k}");
        }
    }
}

fn ratios(p: usize, b: f64, c: f64, dims: impl Fn(u64) -> (u64, u64, u64)) -> Vec<f64> {
    let regime = RegimeParams::new(b, c, Rational64::from_integer(1), 1.0).unwrap();
    let pred = asymptotic_moment_conjugate(p, &regime, MomentModel::Linear).unwrap();
    [8u64, 16, 32]
        .into_iter()
        .map(|big| {
            let (n, k, m) = dims(big);
            let wg = wg_exact(n * k, 2 * p).unwrap();
            rational_to_f64(&exact_moment_conjugate(p, n, k, m, &wg).unwrap()) / pred.at(n as f64)
        })
        .collect()
}

#[test]
fn exact_moments_approach_linear_prediction() {
    let cases = [
        ratios(2, 2.0, 0.5, |n| (n, n / 2, 2 * n)),
        ratios(2, 1.0, 1.0, |n| (n, n, n)),
        ratios(3, 1.0, 1.0, |n| (n, n, n)),
    ];
    for r in cases {
        let gaps: Vec<f64> = r.iter().map(|x| (x - 1.0).abs()).collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "ratios {r:?}");
    }
}
