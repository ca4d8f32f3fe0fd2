//! Centering, the isoperimetric deficit of the centered half-line, and the
//! pointwise behaviour of ψ − ψ_g that every stability estimate rests on.

mod distances;
mod example23;

pub use distances::{
    lp_distance, relative_entropy, talagrand_check, w1_dual_bound, w1_to_gaussian,
    w2_to_gaussian, TalagrandReport, Transport, MAX_P,
};
pub use example23::{example23, example23_half_width, Example23, Example23Family};

use serde::Serialize;

use crate::error::Result;
use crate::measure1d::{gaussian_profile, Measure1D};
use crate::numerics::special::gaussian_quantile;
use crate::numerics::Interval;

// Sampling reach into an unbounded side for the lower gap bound.
const LOWER_SAMPLE_REACH: f64 = 10.0;

/// Translates `m` so that its θ-quantile sits at the Gaussian quantile a_θ.
/// Returns the centered measure and the translation that was applied.
///
/// Shifts at rounding level are dropped: the quantile is not more accurate
/// than that, and moving a kink of ψ by one ulp across a_θ would flip ψ'₊(a_θ).
pub fn center(m: &Measure1D, theta: f64) -> Result<(Measure1D, f64)> {
    let a = gaussian_quantile(theta)?;
    let q = m.quantile(theta)?;
    let mut shift = a - q;
    if shift.abs() <= 8.0 * f64::EPSILON * a.abs().max(1.0) {
        shift = 0.0;
    }
    Ok((m.translate(shift), shift))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeficitReport {
    pub theta: f64,
    pub a_theta: f64,
    pub shift: f64,
    pub perimeter_at_a: f64,
    pub profile_at_theta: f64,
    pub deficit: f64,
}

/// Deficit of the half-line (−∞, a_θ] ∩ I after centering:
/// e^{−ψ(a_θ)} − e^{−ψ_g(a_θ)}.
pub fn deficit(m: &Measure1D, theta: f64) -> Result<DeficitReport> {
    let (centered, shift) = center(m, theta)?;
    deficit_of_centered(&centered, theta, shift)
}

fn deficit_of_centered(centered: &Measure1D, theta: f64, shift: f64) -> Result<DeficitReport> {
    let a = gaussian_quantile(theta)?;
    let perimeter_at_a = centered.density(a);
    let profile_at_theta = gaussian_profile(theta)?;
    Ok(DeficitReport {
        theta,
        a_theta: a,
        shift,
        perimeter_at_a,
        profile_at_theta,
        deficit: perimeter_at_a - profile_at_theta,
    })
}

/// ψ'₊(a_θ) − a_θ for the centered measure.
pub fn slope_gap(m: &Measure1D, theta: f64) -> Result<f64> {
    let (centered, _) = center(m, theta)?;
    let a = gaussian_quantile(theta)?;
    Ok(centered.right_derivative(a) - a)
}

/// Default window for the upper bound: a_θ ± √(2 ln(1/δ)), clipped to I.
pub fn default_window(m: &Measure1D, theta: f64, delta: f64) -> Result<Interval> {
    let a = gaussian_quantile(theta)?;
    let r = if delta > 0.0 && delta < 1.0 {
        (2.0 * (1.0 / delta).ln()).sqrt()
    } else {
        1.0
    };
    let (centered, _) = center(m, theta)?;
    let dom = centered.domain();
    Interval::new((a - r).max(dom.lo()), (a + r).min(dom.hi()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapBoundReport {
    pub theta: f64,
    pub deficit: f64,
    pub slope_gap: f64,
    pub window: Interval,
    /// Smallest c with ψ − ψ_g ≥ slope_gap·(x − a_θ) − c·δ at every sample of I.
    pub fitted_lower_constant: f64,
    /// Smallest c with ψ − ψ_g ≤ slope_gap·(x − a_θ) + c·√δ at every window sample.
    pub fitted_upper_constant: f64,
    /// δ = 0 and ψ − ψ_g affine to rounding: both bounds hold with constant 0.
    pub equality_case: bool,
    pub pointwise_samples: Vec<(f64, f64)>,
}

impl GapBoundReport {
    pub fn within(&self, lower_cap: f64, upper_cap: f64) -> bool {
        self.fitted_lower_constant <= lower_cap && self.fitted_upper_constant <= upper_cap
    }
}

/// Fits the constants of the two-sided pointwise bound on ψ − ψ_g around the
/// tangent line at a_θ. The measure is centered first; `window` is read in
/// centered coordinates and clipped to I.
pub fn check_gap_bounds(
    m: &Measure1D,
    theta: f64,
    window: Interval,
    sample_count: usize,
) -> Result<GapBoundReport> {
    let (centered, shift) = center(m, theta)?;
    let report = deficit_of_centered(&centered, theta, shift)?;
    let a = report.a_theta;
    let delta = report.deficit;
    let s = centered.right_derivative(a) - a;
    let n = sample_count.max(2);
    let excess = |x: f64| centered.gap(x) - s * (x - a);

    let dom = centered.domain();
    let (lo, hi) = dom.clip(a, LOWER_SAMPLE_REACH);
    let mut samples: Vec<(f64, f64)> = uniform_open(lo, hi, n)
        .chain(std::iter::once(a))
        .filter(|&x| dom.contains(x))
        .map(|x| (x, centered.gap(x)))
        .collect();
    samples.sort_by(|p, q| p.0.total_cmp(&q.0));
    let worst_below = samples
        .iter()
        .map(|&(x, g)| -(g - s * (x - a)))
        .fold(0.0_f64, f64::max);

    let window = dom.intersect(&window).unwrap_or(window);
    let (wlo, whi) = window.clip(a, LOWER_SAMPLE_REACH);
    let worst_above = uniform_open(wlo, whi, n)
        .chain(std::iter::once(a))
        .filter(|&x| dom.contains(x))
        .map(excess)
        .fold(0.0_f64, f64::max);

    let equality_case = delta.abs() <= 1e-15;
    let (c_low, c_up) = if equality_case {
        let flat = worst_below <= 1e-12 && worst_above <= 1e-12;
        if flat {
            (0.0, 0.0)
        } else {
            (f64::INFINITY, f64::INFINITY)
        }
    } else {
        (worst_below / delta, worst_above / delta.sqrt())
    };
    Ok(GapBoundReport {
        theta,
        deficit: delta,
        slope_gap: s,
        window,
        fitted_lower_constant: c_low,
        fitted_upper_constant: c_up,
        equality_case,
        pointwise_samples: samples,
    })
}

fn uniform_open(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let h = (hi - lo) / n as f64;
    (0..n).map(move |i| lo + (i as f64 + 0.5) * h)
}
