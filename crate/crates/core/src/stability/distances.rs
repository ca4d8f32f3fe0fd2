use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure1d::Measure1D;
use crate::numerics::special::{
    gaussian_cdf, gaussian_pdf, gaussian_quantile, gaussian_sf, LN_SQRT_2PI,
};
use crate::numerics::{integrate_pieces, QuadratureSettings};

/// Largest exponent accepted by [`lp_distance`]; beyond it |r − 1|^p
/// overflows in intermediate terms.
pub const MAX_P: f64 = 64.0;
/// Quantile-coupling integrals run over t ∈ [T_CLIP, 1 − T_CLIP].
const T_CLIP: f64 = 1e-12;
// Below this |g| the entropy integrand 1 − e^{−g}(1 + g) is summed as a series.
const ENTROPY_SERIES: f64 = 1e-3;

/// A transport distance together with a bound on its numerical error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transport {
    pub value: f64,
    pub error_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TalagrandReport {
    /// W₂²(𝔪, γ).
    pub lhs: f64,
    /// 2·Ent_γ(𝔪).
    pub rhs: f64,
    pub pass: bool,
}

/// Integration nodes for integrals against γ of functions of the ratio
/// r = d𝔪/dγ = e^{−(ψ − ψ_g)} on I. The factor r^p φ peaks near −p·α on a
/// piece of slope α, so the reach grows with p.
fn gaussian_nodes(m: &Measure1D, p: f64, settings: &QuadratureSettings) -> Vec<f64> {
    let reach = settings.tail_cutoff + p * m.max_abs_slope();
    let dom = m.domain();
    let lo = dom.lo().max(-reach);
    let hi = dom.hi().min(reach);
    let mut nodes = vec![lo];
    nodes.extend(
        m.kinks()
            .into_iter()
            .chain(m.gap_zeros())
            .filter(|&k| k > lo && k < hi),
    );
    nodes.push(hi);
    nodes
}

/// γ(ℝ ∖ I).
fn gaussian_mass_outside(m: &Measure1D) -> f64 {
    let dom = m.domain();
    let left = if dom.lo().is_finite() { gaussian_cdf(dom.lo()) } else { 0.0 };
    let right = if dom.hi().is_finite() { gaussian_sf(dom.hi()) } else { 0.0 };
    left + right
}

/// ‖e^{ψ_g − ψ} − 1‖_{L^p(γ)}, with the ratio set to 0 off I so the integrand
/// is 1 there.
pub fn lp_distance(m: &Measure1D, p: f64, settings: &QuadratureSettings) -> Result<f64> {
    if !(1.0..=MAX_P).contains(&p) {
        return Err(Error::Domain {
            what: "p must lie in [1, 64]",
            value: p,
        });
    }
    let integrand = |x: f64| {
        let y = -m.gap(x);
        if y == 0.0 {
            return 0.0;
        }
        // ln|e^y − 1| without overflowing e^y
        let ln_e = if y > 1.0 {
            y + (-(-y).exp()).ln_1p()
        } else {
            y.exp_m1().abs().ln()
        };
        (p * ln_e - 0.5 * x * x - LN_SQRT_2PI).exp()
    };
    let inside = integrate_pieces(integrand, &gaussian_nodes(m, p, settings), settings)?.value;
    Ok((inside + gaussian_mass_outside(m)).powf(1.0 / p))
}

/// Ent_γ(𝔪) = ∫_I (ψ_g − ψ) d𝔪, evaluated as ∫ (r ln r − r + 1) dγ whose
/// integrand is nonnegative (1 off I), so small entropies keep their digits.
pub fn relative_entropy(m: &Measure1D, settings: &QuadratureSettings) -> Result<f64> {
    let integrand = |x: f64| {
        let g = m.gap(x);
        if g.abs() < ENTROPY_SERIES {
            let g2 = g * g;
            gaussian_pdf(x) * g2 * (0.5 - g / 3.0 + g2 / 8.0 - g2 * g / 30.0)
        } else {
            gaussian_pdf(x) - (1.0 + g) * m.density(x)
        }
    };
    let inside = integrate_pieces(integrand, &gaussian_nodes(m, 1.0, settings), settings)?.value;
    Ok((inside + gaussian_mass_outside(m)).max(0.0))
}

/// Monotone (quantile) coupling written in the Gaussian variable:
/// W_p^p = ∫ |T(x) − x|^p φ(x) dx with T(x) = F_𝔪⁻¹(Φ(x)).
fn coupling_integral(
    m: &Measure1D,
    power: i32,
    settings: &QuadratureSettings,
) -> Result<(f64, f64, f64, f64)> {
    let c = -gaussian_quantile(T_CLIP)?;
    let transport = |x: f64| m.split_point(gaussian_cdf(x), gaussian_sf(x));
    let d = |x: f64| transport(x) - x;
    let mut nodes = vec![-c, 0.0, c];
    for k in m.kinks() {
        // Gaussian point mapped onto the kink
        let (left, right) = (m.cdf(k), m.sf(k));
        let x = if left <= right {
            gaussian_quantile(left)
        } else {
            gaussian_quantile(right).map(|q| -q)
        };
        if let Ok(x) = x {
            if x > -c && x < c {
                nodes.push(x);
            }
        }
    }
    let q = integrate_pieces(
        |x| d(x).abs().powi(power) * gaussian_pdf(x),
        &nodes,
        settings,
    )?;
    Ok((q.value, q.abs_error, d(-c), d(c)))
}

/// Tail of ∫ |d|^power φ beyond |x| = c, where d(x) = T(x) − x. For a
/// 1-convex target T is 1-Lipschitz and nondecreasing, so d moves by at most
/// |x| − c past the cutoff.
fn coupling_tail(d_edge: f64, c: f64, power: i32) -> f64 {
    let tail = gaussian_sf(c);
    let phi = gaussian_pdf(c);
    let d = d_edge.abs();
    // ∫_c^∞ (x − c) φ and ∫_c^∞ (x − c)² φ
    let m1 = phi - c * tail;
    let m2 = (1.0 + c * c) * tail - c * phi;
    match power {
        1 => d * tail + m1,
        _ => d * d * tail + 2.0 * d * m1 + m2,
    }
}

/// W₂(𝔪, γ) through the quantile coupling.
pub fn w2_to_gaussian(m: &Measure1D, settings: &QuadratureSettings) -> Result<Transport> {
    let c = -gaussian_quantile(T_CLIP)?;
    let (core, err, d_lo, d_hi) = coupling_integral(m, 2, settings)?;
    let tails = coupling_tail(d_lo, c, 2) + coupling_tail(d_hi, c, 2);
    let value = core.max(0.0).sqrt();
    Ok(Transport {
        value,
        error_bound: (core.max(0.0) + tails + err).sqrt() - value,
    })
}

/// W₁(𝔪, γ) through the quantile coupling.
pub fn w1_to_gaussian(m: &Measure1D, settings: &QuadratureSettings) -> Result<Transport> {
    let c = -gaussian_quantile(T_CLIP)?;
    let (core, err, d_lo, d_hi) = coupling_integral(m, 1, settings)?;
    let tails = coupling_tail(d_lo, c, 1) + coupling_tail(d_hi, c, 1);
    Ok(Transport {
        value: core.max(0.0),
        error_bound: tails + err,
    })
}

/// W₂² ≤ 2·Ent_γ, accepted up to 1e-8.
pub fn talagrand_check(m: &Measure1D, settings: &QuadratureSettings) -> Result<TalagrandReport> {
    let w2 = w2_to_gaussian(m, settings)?.value;
    let ent = relative_entropy(m, settings)?;
    let (lhs, rhs) = (w2 * w2, 2.0 * ent);
    Ok(TalagrandReport {
        lhs,
        rhs,
        pass: lhs <= rhs + 1e-8,
    })
}

/// ∫ |x − a| φ(x) dx over (u, v), in closed form.
fn abs_moment(u: f64, v: f64, a: f64) -> f64 {
    // ∫_u^v (x − a) φ = φ(u) − φ(v) − a (Φ(v) − Φ(u))
    let signed = |u: f64, v: f64| {
        let pu = if u.is_finite() { gaussian_pdf(u) } else { 0.0 };
        let pv = if v.is_finite() { gaussian_pdf(v) } else { 0.0 };
        pu - pv - a * (gaussian_cdf(v) - gaussian_cdf(u))
    };
    if !(u < v) {
        0.0
    } else if v <= a {
        -signed(u, v)
    } else if u >= a {
        signed(u, v)
    } else {
        -signed(u, a) + signed(a, v)
    }
}

/// The Kantorovich–Rubinstein bound ∫ |x − a_θ|·|e^{ψ_g−ψ} − 1| dγ ≥ W₁.
pub fn w1_dual_bound(m: &Measure1D, theta: f64, settings: &QuadratureSettings) -> Result<f64> {
    let a = gaussian_quantile(theta)?;
    let mut nodes = gaussian_nodes(m, 1.0, settings);
    if nodes[0] < a && a < nodes[nodes.len() - 1] {
        nodes.push(a);
    }
    let inside = integrate_pieces(
        |x| (x - a).abs() * (-m.gap(x)).exp_m1().abs() * gaussian_pdf(x),
        &nodes,
        settings,
    )?
    .value;
    let dom = m.domain();
    let outside = abs_moment(f64::NEG_INFINITY, dom.lo(), a) + abs_moment(dom.hi(), f64::INFINITY, a);
    Ok(inside + outside)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure1d::{normalize, PotentialSpec};
    use proptest::prelude::*;

    // 40-digit references for the truncated Gaussian on (−2, 2)
    const LP1: f64 = 0.091_000_527_792_716_83;
    const LP2: f64 = 0.218_332_833_699_937_02;
    const LP4: f64 = 0.461_865_198_139_790_1;
    const ENTROPY: f64 = 0.046_567_912_292_390_16;
    const W2: f64 = 0.148_278_465_775_523_5;
    const W1: f64 = 0.075_094_808_557_634_59;
    const DUAL: f64 = 0.140_869_057_495_117_62;

    fn s() -> QuadratureSettings {
        QuadratureSettings::default()
    }

    fn truncated2() -> Measure1D {
        normalize(&PotentialSpec::truncated_symmetric(2.0).unwrap()).unwrap()
    }

    #[test]
    fn gaussian_distances_vanish() {
        let g = Measure1D::gaussian();
        for p in [1.0, 2.0, 4.0] {
            assert!(lp_distance(&g, p, &s()).unwrap() < 1e-12);
        }
        assert!(relative_entropy(&g, &s()).unwrap() < 1e-14);
        assert!(w2_to_gaussian(&g, &s()).unwrap().value < 1e-10);
        assert!(w1_to_gaussian(&g, &s()).unwrap().value < 1e-10);
        assert!(w1_dual_bound(&g, 0.5, &s()).unwrap() < 1e-14);
        assert!(talagrand_check(&g, &s()).unwrap().pass);
    }

    #[test]
    fn truncated_reference_values() {
        let m = truncated2();
        assert!((lp_distance(&m, 1.0, &s()).unwrap() - LP1).abs() < 1e-10);
        assert!((lp_distance(&m, 2.0, &s()).unwrap() - LP2).abs() < 1e-10);
        assert!((lp_distance(&m, 4.0, &s()).unwrap() - LP4).abs() < 1e-10);
        assert!((relative_entropy(&m, &s()).unwrap() - ENTROPY).abs() < 1e-10);
        let w2 = w2_to_gaussian(&m, &s()).unwrap();
        assert!((w2.value - W2).abs() < 1e-9, "{w2:?}");
        assert!(w2.error_bound < 1e-8);
        let w1 = w1_to_gaussian(&m, &s()).unwrap();
        assert!((w1.value - W1).abs() < 1e-9);
        assert!((w1_dual_bound(&m, 0.5, &s()).unwrap() - DUAL).abs() < 1e-10);
        let t = talagrand_check(&m, &s()).unwrap();
        assert!(t.pass && (t.rhs - 2.0 * ENTROPY).abs() < 1e-10);
    }

    #[test]
    fn translated_gaussian_moves_by_the_shift() {
        for shift in [-1.5, 0.25, 2.0] {
            let m = Measure1D::gaussian().translate(shift);
            assert!((w2_to_gaussian(&m, &s()).unwrap().value - shift.abs()).abs() < 1e-9);
            assert!((w1_to_gaussian(&m, &s()).unwrap().value - shift.abs()).abs() < 1e-9);
        }
    }

    #[test]
    fn p_out_of_range() {
        let g = Measure1D::gaussian();
        assert!(lp_distance(&g, 0.5, &s()).is_err());
        assert!(lp_distance(&g, 65.0, &s()).is_err());
        assert!(lp_distance(&g, MAX_P, &s()).is_ok());
    }

    #[test]
    fn abs_moment_matches_quadrature() {
        for (u, v, a) in [(-1.0f64, 2.0f64, 0.3f64), (0.5, 3.0, 0.0), (-3.0, -0.5, 1.0)] {
            let q = integrate_pieces(|x| (x - a).abs() * gaussian_pdf(x), &[u, a.clamp(u, v), v], &s())
                .unwrap()
                .value;
            assert!((abs_moment(u, v, a) - q).abs() < 1e-13);
        }
    }

    #[test]
    fn dual_bound_is_reflection_invariant() {
        // h(x) and h(−x) give mirror-image measures; at θ = 1/2 the weight
        // |x − 0| and γ are both even
        let m = normalize(&PotentialSpec::perturbed(vec![0.4], vec![-0.3, 0.5]).unwrap()).unwrap();
        let r = normalize(&PotentialSpec::perturbed(vec![-0.4], vec![-0.5, 0.3]).unwrap()).unwrap();
        let d1 = w1_dual_bound(&m, 0.5, &s()).unwrap();
        let d2 = w1_dual_bound(&r, 0.5, &s()).unwrap();
        assert!((d1 - d2).abs() < 1e-11);
    }

    fn arb_measure() -> impl Strategy<Value = Measure1D> {
        (-0.8f64..0.8, 0.0f64..1.0, -1.5f64..1.5, -3.0f64..3.0).prop_map(|(s0, inc, b, shift)| {
            normalize(&PotentialSpec::perturbed(vec![b], vec![s0, s0 + inc]).unwrap())
                .unwrap()
                .translate(shift * 0.2)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn metric_chain(m in arb_measure()) {
            let set = s();
            let w1 = w1_to_gaussian(&m, &set).unwrap().value;
            let w2 = w2_to_gaussian(&m, &set).unwrap().value;
            let ent = relative_entropy(&m, &set).unwrap();
            prop_assert!(ent >= 0.0);
            prop_assert!(w1 <= w2 + 1e-10);
            prop_assert!(w2 * w2 <= 2.0 * ent + 1e-8);
            let l1 = lp_distance(&m, 1.0, &set).unwrap();
            let l3 = lp_distance(&m, 3.0, &set).unwrap();
            prop_assert!(l1 <= l3 + 1e-10);
        }
    }
}
