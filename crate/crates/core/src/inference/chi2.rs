//! Central and noncentral χ² distribution functions.

use crate::error::{Error, Result};

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub(crate) fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

const EPS: f64 = 1e-16;
const MAX_TERMS: usize = 10_000;

/// Regularized incomplete gamma functions `(P(a, x), Q(a, x))`.
fn incomplete_gamma(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_TERMS {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        let p = (sum.ln() + log_prefix).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        // modified Lentz evaluation of the continued fraction for Q
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_TERMS {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        let q = (h.ln() + log_prefix).exp().min(1.0);
        (1.0 - q, q)
    }
}

fn check(x: f64, df: usize) -> Result<()> {
    if df == 0 {
        return Err(Error::usage("degrees of freedom must be positive"));
    }
    if !(x >= 0.0) {
        return Err(Error::usage(format!("chi-square argument must be non-negative, got {x}")));
    }
    Ok(())
}

/// `P(χ²_df ≤ x)`.
pub fn chi_square_cdf(x: f64, df: usize) -> Result<f64> {
    check(x, df)?;
    Ok(incomplete_gamma(df as f64 / 2.0, x / 2.0).0)
}

/// `P(χ²_df > x)`, accurate in the upper tail.
pub fn chi_square_sf(x: f64, df: usize) -> Result<f64> {
    check(x, df)?;
    Ok(incomplete_gamma(df as f64 / 2.0, x / 2.0).1)
}

/// Inverse of [`chi_square_cdf`] by bracketing and bisection.
pub fn chi_square_quantile(q: f64, df: usize) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::usage(format!("quantile level must lie in (0, 1), got {q}")));
    }
    check(0.0, df)?;
    let cdf = |x: f64| incomplete_gamma(df as f64 / 2.0, x / 2.0).0;
    let mut hi = df as f64 + 10.0;
    while cdf(hi) < q {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `P(χ²_df(δ) > x)` for noncentrality `δ ≥ 0`, as a Poisson(δ/2) mixture of
/// central tails.
pub fn noncentral_chi_square_sf(x: f64, df: usize, noncentrality: f64) -> Result<f64> {
    check(x, df)?;
    if !(noncentrality >= 0.0) || !noncentrality.is_finite() {
        return Err(Error::usage(format!("noncentrality must be finite and non-negative, got {noncentrality}")));
    }
    if noncentrality == 0.0 {
        return chi_square_sf(x, df);
    }
    let half = noncentrality / 2.0;
    let mode = half.floor() as usize;
    let weight = |j: usize| (-half + j as f64 * half.ln() - ln_gamma(j as f64 + 1.0)).exp();
    let term = |j: usize| weight(j) * incomplete_gamma((df + 2 * j) as f64 / 2.0, x / 2.0).1;
    let mut total = 0.0;
    let mut mass = 0.0;
    // walk outward from the Poisson mode until the remaining mass is negligible
    for j in mode.. {
        let w = weight(j);
        total += term(j);
        mass += w;
        if w < 1e-17 && j > mode + 10 {
            break;
        }
    }
    for j in (0..mode).rev() {
        let w = weight(j);
        total += term(j);
        mass += w;
        if w < 1e-17 {
            break;
        }
    }
    debug_assert!((mass - 1.0).abs() < 1e-9);
    Ok(total.clamp(0.0, 1.0))
}
