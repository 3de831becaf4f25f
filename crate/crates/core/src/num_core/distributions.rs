//! Standard normal and chi-square distribution functions.
//!
//! The normal CDF uses Marsaglia's Taylor series `Φ(x) = ½ + φ(x)·Σ x^(2k+1)/(2k+1)!!`
//! for |x| < 3 and the Laplace continued fraction for the Mills ratio in the
//! tails, so upper-tail probabilities keep full relative precision. The
//! quantile starts from Acklam's rational approximation and takes one Halley
//! step against the CDF.

use crate::error::{Error, Result};
use crate::num_core::Real;

const SERIES_CUTOFF: f64 = 3.0;
const MAX_TERMS: usize = 500;

#[inline]
pub fn std_normal_pdf<T: Real>(z: T) -> T {
    let half = T::lit(0.5);
    (-half * z * z).exp() / (T::TAU()).sqrt()
}

/// Φ(z). Errors on non-finite input.
pub fn std_normal_cdf<T: Real>(z: T) -> Result<T> {
    if !z.is_finite() {
        return Err(Error::domain(format!(
            "normal CDF argument must be finite, got {z}"
        )));
    }
    Ok(cdf(z))
}

/// 1 − Φ(z), computed without cancellation in the upper tail.
pub fn std_normal_sf<T: Real>(z: T) -> Result<T> {
    if !z.is_finite() {
        return Err(Error::domain(format!(
            "normal SF argument must be finite, got {z}"
        )));
    }
    Ok(sf(z))
}

/// Φ⁻¹(p) for p in (0, 1).
pub fn std_normal_quantile<T: Real>(p: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::domain(format!(
            "normal quantile needs 0 < p < 1, got {p}"
        )));
    }
    Ok(quantile(p))
}

/// P(X > x) for X ~ χ²(df).
pub fn chi_square_sf<T: Real>(x: T, df: u32) -> Result<T> {
    if df < 1 {
        return Err(Error::domain("chi-square degrees of freedom must be >= 1"));
    }
    if !(x >= T::zero()) || !x.is_finite() {
        return Err(Error::domain(format!(
            "chi-square argument must be finite and >= 0, got {x}"
        )));
    }
    if x == T::zero() {
        return Ok(T::one());
    }
    Ok(match df {
        1 => T::lit(2.0) * sf(x.sqrt()),
        2 => (-x / T::lit(2.0)).exp(),
        _ => regularized_upper_gamma(T::lit(f64::from(df) / 2.0), x / T::lit(2.0)),
    })
}

pub(crate) fn cdf<T: Real>(z: T) -> T {
    if z.abs() < T::lit(SERIES_CUTOFF) {
        T::lit(0.5) + std_normal_pdf(z) * odd_series(z)
    } else if z > T::zero() {
        T::one() - mills_tail(z)
    } else {
        mills_tail(-z)
    }
}

pub(crate) fn sf<T: Real>(z: T) -> T {
    cdf(-z)
}

/// Σ z^(2k+1)/(2k+1)!!; all terms share the sign of z so there is no cancellation.
fn odd_series<T: Real>(z: T) -> T {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    let mut denom = T::one();
    for _ in 0..MAX_TERMS {
        denom = denom + T::lit(2.0);
        term = term * z2 / denom;
        let next = sum + term;
        if next == sum {
            break;
        }
        sum = next;
    }
    sum
}

/// 1 − Φ(x) for x ≥ 3 via the continued fraction φ(x)/(x + 1/(x + 2/(x + 3/(x + …)))),
/// evaluated with the modified Lentz algorithm.
fn mills_tail<T: Real>(x: T) -> T {
    let tiny = T::min_positive_value() / T::epsilon();
    let eps = T::epsilon();
    let mut f = x;
    if f == T::zero() {
        f = tiny;
    }
    let mut c = f;
    let mut d = T::zero();
    for k in 1..MAX_TERMS {
        let a = T::from_count(k);
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = d.recip();
        let delta = c * d;
        f = f * delta;
        if (delta - T::one()).abs() < eps {
            break;
        }
    }
    std_normal_pdf(x) / f
}

const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const ACKLAM_P_LOW: f64 = 0.024_25;

fn horner<T: Real>(coeffs: &[f64], x: T) -> T {
    coeffs.iter().fold(T::zero(), |acc, &c| acc * x + T::lit(c))
}

fn acklam_lower<T: Real>(p: T) -> T {
    // Valid for p <= 0.5.
    if p < T::lit(ACKLAM_P_LOW) {
        let q = (T::lit(-2.0) * p.ln()).sqrt();
        horner(&ACKLAM_C, q) / (horner(&ACKLAM_D, q) * q + T::one())
    } else {
        let q = p - T::lit(0.5);
        let r = q * q;
        horner(&ACKLAM_A, r) * q / (horner(&ACKLAM_B, r) * r + T::one())
    }
}

pub(crate) fn quantile<T: Real>(p: T) -> T {
    let half = T::lit(0.5);
    if p > half {
        // 1 − p is exact for p in [0.5, 1].
        return -quantile(T::one() - p);
    }
    let x = acklam_lower(p);
    // Halley step: e = Φ(x) − p, u = e/φ(x).
    let e = cdf(x) - p;
    let u = e / std_normal_pdf(x);
    x - u / (T::one() + x * u * half)
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7, n = 9).
pub(crate) fn ln_gamma<T: Real>(x: T) -> T {
    const G: f64 = 7.0;
    const COEFFS: [f64; 9] = [
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
    if x < T::lit(0.5) {
        // Reflection.
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(COEFFS[0]);
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::from_count(i));
    }
    let t = x + T::lit(G + 0.5);
    T::lit(0.5) * T::TAU().ln() + (x + T::lit(0.5)) * t.ln() - t + acc.ln()
}

/// Q(a, x) = Γ(a, x)/Γ(a).
pub(crate) fn regularized_upper_gamma<T: Real>(a: T, x: T) -> T {
    if x <= T::zero() {
        return T::one();
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + T::one() {
        // Series for P(a, x).
        let mut ap = a;
        let mut del = a.recip();
        let mut sum = del;
        for _ in 0..MAX_TERMS {
            ap = ap + T::one();
            del = del * x / ap;
            sum = sum + del;
            if del.abs() < sum.abs() * T::epsilon() {
                break;
            }
        }
        T::one() - sum * log_prefactor.exp()
    } else {
        // Continued fraction for Q(a, x), modified Lentz.
        let tiny = T::min_positive_value() / T::epsilon();
        let mut b = x + T::one() - a;
        let mut c = tiny.recip();
        let mut d = b.recip();
        let mut h = d;
        for i in 1..MAX_TERMS {
            let i = T::from_count(i);
            let an = -i * (i - a);
            b = b + T::lit(2.0);
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = d.recip();
            let delta = d * c;
            h = h * delta;
            if (delta - T::one()).abs() < T::epsilon() {
                break;
            }
        }
        log_prefactor.exp() * h
    }
}
