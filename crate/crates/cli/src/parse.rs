use num_rational::Rational64;
use num_traits::Signed;

/// Largest denominator tried when snapping a rounded decimal.
const SNAP_MAX_DEN: i64 = 12;

/// Parses `d` exactly. Accepts `a/b`, integers and decimals. A decimal with at
/// least three fractional digits is read as a rounded value and snapped to the
/// fraction with the smallest denominator `<= 12` within `10^-digits`, so
/// `1.3333` becomes `4/3`.
pub fn parse_exponent(s: &str) -> Result<Rational64, String> {
    let s = s.trim();
    let bad = || format!("cannot parse exponent {s:?}");
    let d = if let Some((a, b)) = s.split_once('/') {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(format!("zero denominator in {s:?}"));
        }
        Rational64::new(a, b)
    } else if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|c| c.is_ascii_digit()) || frac.len() > 15 {
            return Err(bad());
        }
        let neg = int.starts_with('-');
        let int: i64 = if int.is_empty() || int == "-" { 0 } else { int.parse().map_err(|_| bad())? };
        let scale = 10i64.pow(frac.len() as u32);
        let f: i64 = frac.parse().map_err(|_| bad())?;
        let num = int.abs() * scale + f;
        let exact = Rational64::new(if neg { -num } else { num }, scale);
        if frac.len() >= 3 {
            snap(exact, Rational64::new(1, scale)).unwrap_or(exact)
        } else {
            exact
        }
    } else {
        Rational64::from_integer(s.parse().map_err(|_| bad())?)
    };
    if d < Rational64::from_integer(0) {
        return Err(format!("exponent must be nonnegative, got {s}"));
    }
    Ok(d)
}

fn snap(x: Rational64, tol: Rational64) -> Option<Rational64> {
    (1..=SNAP_MAX_DEN).find_map(|den| {
        let num = (x * den).round().to_integer();
        let cand = Rational64::new(num, den);
        ((cand - x).abs() <= tol).then_some(cand)
    })
}

/// Comma-separated list of `T`.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| format!("cannot parse list entry {x:?}")))
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Library seed for a command: `splitmix64(seed ^ fnv1a(tag))`.
/// Trials are then split inside the library by stream index.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    splitmix64(seed ^ fnv1a(tag.as_bytes()))
}
