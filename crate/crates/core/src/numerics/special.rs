//! Gaussian special functions: `erf`, `erfc`, the standard normal CDF and
//! its inverse, plus log-space variants used for far-tail work.
//!
//! `erf` is summed from its positive-term series for small arguments and the
//! complementary function comes from the Laplace continued fraction (Mills
//! ratio) beyond that, so the upper tail keeps full relative accuracy.

use crate::error::{Error, Result};

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Series/continued-fraction switch, in the `erf` argument.
const ERF_SERIES_LIMIT: f64 = 2.0;
/// The same switch expressed on the Gaussian scale (`x = z·√2`).
const MILLS_LIMIT: f64 = ERF_SERIES_LIMIT * std::f64::consts::SQRT_2;

/// erf(z) = 2/√π · e^{-z²} · Σ 2ⁿ z^{2n+1} / (1·3·…·(2n+1)); every term is
/// positive so there is no cancellation.
fn erf_series(z: f64) -> f64 {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * z2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * 1e-17 || n > 200.0 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-z2).exp() * sum
}

/// Mills ratio R(x) = Φ̄(x)/φ(x) for x > 0, from the continued fraction
/// R(x) = 1/(x + 1/(x + 2/(x + 3/(x + …)))) evaluated with modified Lentz.
pub(crate) fn mills_ratio(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    // f = x + 1/(x + 2/(x + ...)); R = 1/f
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..5000 {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

pub fn erf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    let a = z.abs();
    let v = if a <= ERF_SERIES_LIMIT {
        erf_series(a)
    } else {
        1.0 - erfc(a)
    };
    v.copysign(z)
}

pub fn erfc(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z < 0.0 {
        return 2.0 - erfc(-z);
    }
    if z <= ERF_SERIES_LIMIT {
        1.0 - erf_series(z)
    } else {
        2.0 * gaussian_sf(z * std::f64::consts::SQRT_2)
    }
}

/// Standard normal density φ(x).
#[inline]
pub fn gaussian_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Upper tail Φ̄(x) = γ([x, ∞)), relatively accurate for large positive `x`.
pub fn gaussian_sf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x >= MILLS_LIMIT {
        if x > 40.0 {
            return 0.0;
        }
        gaussian_pdf(x) * mills_ratio(x)
    } else if x >= -MILLS_LIMIT {
        0.5 * (1.0 - erf(x * std::f64::consts::FRAC_1_SQRT_2))
    } else {
        1.0 - gaussian_sf(-x)
    }
}

/// Φ(x) = γ((−∞, x]). Saturates to exactly 0 / 1 far in the tails.
pub fn gaussian_cdf(x: f64) -> f64 {
    gaussian_sf(-x)
}

/// ln Φ(x), finite for every finite `x` (no underflow in the lower tail).
pub fn ln_gaussian_cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if x == f64::INFINITY {
        0.0
    } else if x < -MILLS_LIMIT {
        let t = -x;
        -0.5 * t * t - LN_SQRT_2PI + mills_ratio(t).ln()
    } else if x <= 0.0 {
        gaussian_cdf(x).ln()
    } else {
        (-gaussian_sf(x)).ln_1p()
    }
}

/// ln Φ̄(x).
#[inline]
pub fn ln_gaussian_sf(x: f64) -> f64 {
    ln_gaussian_cdf(-x)
}

/// ln(Φ(v) − Φ(u)) for u < v, without catastrophic cancellation in the tails.
pub fn ln_gaussian_mass(u: f64, v: f64) -> f64 {
    if !(u < v) {
        return f64::NEG_INFINITY;
    }
    if u >= 0.0 {
        // both in the upper half: Φ̄(u) − Φ̄(v)
        let lu = ln_gaussian_sf(u);
        let lv = ln_gaussian_sf(v);
        lu + ln_1m_exp(lv - lu)
    } else if v <= 0.0 {
        let lv = ln_gaussian_cdf(v);
        let lu = ln_gaussian_cdf(u);
        lv + ln_1m_exp(lu - lv)
    } else {
        (gaussian_cdf(v) - gaussian_cdf(u)).ln()
    }
}

/// ln(1 − e^a) for a ≤ 0.
fn ln_1m_exp(a: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        0.0
    } else if a > -std::f64::consts::LN_2 {
        (-a.exp_m1()).ln()
    } else {
        (-a.exp()).ln_1p()
    }
}

/// ln(e^a + e^b).
pub(crate) fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Rational first guess for Φ⁻¹ (Acklam), relative error ≈ 1e-9.
fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -acklam(1.0 - p)
    }
}

/// Solves ln Φ(y) = `ln_p` for `ln_p ≤ ln ½`, i.e. the lower half of Φ⁻¹ in
/// log space. Newton on ln Φ with a bisection safeguard.
pub fn gaussian_quantile_ln(ln_p: f64) -> f64 {
    debug_assert!(ln_p <= -std::f64::consts::LN_2 + 1e-15);
    if ln_p == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if ln_p >= 0.0 {
        return f64::INFINITY;
    }
    let mut lo = -(-2.0 * ln_p).sqrt() - 1.0;
    let mut hi = 0.0_f64;
    let mut y = if ln_p > -700.0 {
        acklam(ln_p.exp()).clamp(lo, hi)
    } else {
        lo + 1.0
    };
    for _ in 0..100 {
        let g = ln_gaussian_cdf(y) - ln_p;
        if g == 0.0 {
            return y;
        }
        if g < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        // d/dy ln Φ(y) = φ(y)/Φ(y) = 1/R(−y)
        let ratio = if y < -MILLS_LIMIT {
            mills_ratio(-y)
        } else {
            gaussian_cdf(y) / gaussian_pdf(y)
        };
        let mut next = y - g * ratio;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 4.0 * f64::EPSILON * y.abs().max(1.0) {
            return next;
        }
        y = next;
    }
    y
}

/// Φ⁻¹(θ): the point a_θ with γ((−∞, a_θ]) = θ.
pub fn gaussian_quantile(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain {
            what: "theta out of range (0, 1)",
            value: theta,
        });
    }
    Ok(if theta <= 0.5 {
        gaussian_quantile_ln(theta.ln())
    } else {
        -gaussian_quantile_ln((1.0 - theta).ln())
    })
}

/// y with Φ̄(y) = s, accurate for tiny `s`.
pub fn gaussian_quantile_upper(s: f64) -> Result<f64> {
    gaussian_quantile(s).map(|q| -q)
}

/// Gaussian potential ψ_g(x) = x²/2 + ln √(2π), so that γ = e^{−ψ_g} dx.
#[inline]
pub fn gaussian_potential(x: f64) -> f64 {
    0.5 * x * x + LN_SQRT_2PI
}
