//! Finite weighted families of 1-convex needles standing in for a needle
//! decomposition, the push-forward density ρ = Σ w_q e^{−σ_q}, and the
//! good/bad bookkeeping of the L¹ stability argument.

mod generator;

pub use generator::{generate_ensemble, EnsembleConfig};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure1d::{check_probability, gaussian_profile, Measure1D};
use crate::numerics::special::{erf, gaussian_pdf, gaussian_quantile};
use crate::numerics::{find_root, integrate_pieces, Interval, QuadratureSettings};
use crate::stability::lp_distance;

/// Default stand-in for the non-explicit constant of the centering test.
pub const DEFAULT_C_THRESHOLD: f64 = 1.0;

/// Tolerance on Σ w_q = 1.
pub const WEIGHT_TOL: f64 = 1e-12;

/// (1 − ε)/(9 − 3ε), the exponent of the needle-level L¹ estimate.
pub fn kappa(epsilon: f64) -> f64 {
    (1.0 - epsilon) / (9.0 - 3.0 * epsilon)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Needle {
    pub weight: f64,
    pub measure: Measure1D,
    /// θ-quantile r⁻.
    pub r_minus: f64,
    /// (1 − θ)-quantile r⁺.
    pub r_plus: f64,
}

impl Needle {
    pub fn new(weight: f64, measure: Measure1D, theta: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::Domain {
                what: "needle weight must be nonnegative",
                value: weight,
            });
        }
        let r_minus = measure.quantile(theta)?;
        let r_plus = measure.quantile(1.0 - theta)?;
        Ok(Needle {
            weight,
            measure,
            r_minus,
            r_plus,
        })
    }

    /// Half-line perimeter P_q = e^{−σ_q(r⁻)}.
    pub fn perimeter(&self) -> f64 {
        self.measure.density(self.r_minus)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleRecord", into = "EnsembleRecord")]
pub struct NeedleEnsemble {
    needles: Vec<Needle>,
    theta: f64,
    epsilon: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NeedleRecord {
    weight: f64,
    measure: Measure1D,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleRecord {
    theta: f64,
    epsilon: f64,
    needles: Vec<NeedleRecord>,
}

impl TryFrom<EnsembleRecord> for NeedleEnsemble {
    type Error = Error;
    fn try_from(r: EnsembleRecord) -> Result<Self> {
        NeedleEnsemble::new(
            r.needles.into_iter().map(|n| (n.weight, n.measure)).collect(),
            r.theta,
            r.epsilon,
        )
    }
}

impl From<NeedleEnsemble> for EnsembleRecord {
    fn from(e: NeedleEnsemble) -> Self {
        EnsembleRecord {
            theta: e.theta,
            epsilon: e.epsilon,
            needles: e
                .needles
                .into_iter()
                .map(|n| NeedleRecord {
                    weight: n.weight,
                    measure: n.measure,
                })
                .collect(),
        }
    }
}

impl NeedleEnsemble {
    pub fn new(parts: Vec<(f64, Measure1D)>, theta: f64, epsilon: f64) -> Result<Self> {
        check_probability(theta)?;
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Domain {
                what: "epsilon must lie in (0, 1)",
                value: epsilon,
            });
        }
        if parts.is_empty() {
            return Err(Error::Infeasible("an ensemble needs at least one needle".into()));
        }
        let needles = parts
            .into_iter()
            .map(|(w, m)| Needle::new(w, m, theta))
            .collect::<Result<Vec<_>>>()?;
        let total: f64 = needles.iter().map(|n| n.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::Domain {
                what: "needle weights must sum to 1",
                value: total,
            });
        }
        Ok(NeedleEnsemble {
            needles,
            theta,
            epsilon,
        })
    }

    pub fn needles(&self) -> &[Needle] {
        &self.needles
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Sorted quadrature nodes covering every needle and the Gaussian, with
    /// every needle end and kink as a breakpoint.
    fn nodes(&self, settings: &QuadratureSettings) -> Vec<f64> {
        let c = settings.tail_cutoff;
        let mut nodes = vec![-c, 0.0, c];
        for n in &self.needles {
            nodes.extend(n.measure.integration_nodes(c));
        }
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        nodes
    }

    /// [`Self::nodes`] plus the points where ρ crosses φ, so that |ρ − φ|
    /// is smooth between consecutive nodes.
    fn l1_nodes(&self, settings: &QuadratureSettings) -> Vec<f64> {
        let mut nodes = self.nodes(settings);
        let diff = |x: f64| mixture_density(self, x) - gaussian_pdf(x);
        let mut extra = Vec::new();
        for w in nodes.windows(2) {
            let (a, b) = (w[0].max(-CROSSING_RANGE), w[1].min(CROSSING_RANGE));
            if !(a < b) {
                continue;
            }
            let steps = ((b - a) / CROSSING_STEP).ceil() as usize;
            let h = (b - a) / steps as f64;
            // sample strictly inside so jumps at needle ends are not crossings
            let mut prev = (a, diff(a + 1e-12 * h));
            for k in 1..=steps {
                let x = if k == steps { b } else { a + k as f64 * h };
                let v = diff(if k == steps { b - 1e-12 * h } else { x });
                if prev.1 * v < 0.0 {
                    if let Ok(r) = Interval::new(prev.0, x).and_then(|i| find_root(diff, i, 1e-15)) {
                        extra.push(r);
                    }
                }
                prev = (x, v);
            }
        }
        nodes.extend(extra);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        nodes
    }
}

/// Crossings of ρ and φ are searched on |x| ≤ this range...
const CROSSING_RANGE: f64 = 20.0;
/// ...on a scan of this step.
const CROSSING_STEP: f64 = 0.125;

/// ρ(x) = Σ w_q e^{−σ_q(x)}, with e^{−σ_q} = 0 off the needle.
pub fn mixture_density(ens: &NeedleEnsemble, x: f64) -> f64 {
    ens.needles
        .iter()
        .map(|n| n.weight * n.measure.density(x))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DisintegrationReport {
    /// ∫ h ρ dx.
    pub lhs: f64,
    /// Σ w_q ∫ h d𝔪_q.
    pub rhs: f64,
}

/// Both sides of ∫ h ρ dx = Σ_q w_q ∫ h d𝔪_q, each by its own quadrature.
pub fn disintegration_check<H: Fn(f64) -> f64 + Sync>(
    ens: &NeedleEnsemble,
    h: H,
    settings: &QuadratureSettings,
) -> Result<DisintegrationReport> {
    let lhs = integrate_pieces(|x| h(x) * mixture_density(ens, x), &ens.nodes(settings), settings)?
        .value;
    let parts = ens
        .needles
        .par_iter()
        .map(|n| {
            let m = &n.measure;
            integrate_pieces(|x| h(x) * m.density(x), &m.integration_nodes(settings.tail_cutoff), settings)
                .map(|q| n.weight * q.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DisintegrationReport {
        lhs,
        rhs: parts.iter().sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub good_mass: f64,
    pub centered_mass: f64,
    /// Σ w_q (P_q − profile(θ)).
    pub aggregate_deficit: f64,
    pub threshold_used: f64,
    /// Per-needle outcome in needle order.
    pub flags: Vec<bool>,
    /// `Some(good_mass ≥ 1 − √δ)` when the aggregate deficit is at most δ.
    pub markov_bound_holds: Option<bool>,
}

fn aggregate_deficit(ens: &NeedleEnsemble, profile: f64) -> f64 {
    ens.needles
        .iter()
        .map(|n| n.weight * (n.perimeter() - profile))
        .sum()
}

/// Good needles: P_q < profile(θ) + √δ.
pub fn classify_good(ens: &NeedleEnsemble, delta: f64) -> Result<ClassificationReport> {
    if !(delta >= 0.0) {
        return Err(Error::Domain {
            what: "delta must be nonnegative",
            value: delta,
        });
    }
    let profile = gaussian_profile(ens.theta)?;
    let threshold = delta.sqrt();
    let flags: Vec<bool> = ens
        .needles
        .iter()
        .map(|n| n.perimeter() < profile + threshold)
        .collect();
    let good_mass = weighted_mass(ens, &flags);
    let agg = aggregate_deficit(ens, profile);
    let markov = if agg <= delta {
        Some(good_mass >= 1.0 - threshold - WEIGHT_TOL)
    } else {
        log::warn!("aggregate deficit {agg:e} exceeds delta {delta:e}; Markov bound not applicable");
        None
    };
    Ok(ClassificationReport {
        good_mass,
        centered_mass: f64::NAN,
        aggregate_deficit: agg,
        threshold_used: threshold,
        flags,
        markov_bound_holds: markov,
    })
}

/// Centered needles: max(|a_θ − r⁻|, |a_{1−θ} − r⁺|) ≤ c·δ^κ.
pub fn classify_centered(
    ens: &NeedleEnsemble,
    delta: f64,
    c_threshold: f64,
) -> Result<ClassificationReport> {
    if !(c_threshold > 0.0) {
        return Err(Error::Domain {
            what: "c_threshold must be positive",
            value: c_threshold,
        });
    }
    if !(delta >= 0.0) {
        return Err(Error::Domain {
            what: "delta must be nonnegative",
            value: delta,
        });
    }
    let a = gaussian_quantile(ens.theta)?;
    let a_upper = gaussian_quantile(1.0 - ens.theta)?;
    let threshold = c_threshold * delta.powf(kappa(ens.epsilon));
    let flags: Vec<bool> = ens
        .needles
        .iter()
        .map(|n| (a - n.r_minus).abs().max((a_upper - n.r_plus).abs()) <= threshold)
        .collect();
    let profile = gaussian_profile(ens.theta)?;
    Ok(ClassificationReport {
        good_mass: f64::NAN,
        centered_mass: weighted_mass(ens, &flags),
        aggregate_deficit: aggregate_deficit(ens, profile),
        threshold_used: threshold,
        flags,
        markov_bound_holds: None,
    })
}

fn weighted_mass(ens: &NeedleEnsemble, flags: &[bool]) -> f64 {
    ens.needles
        .iter()
        .zip(flags)
        .filter(|(_, &f)| f)
        .fold(0.0, |acc, (n, _)| acc + n.weight)
        .min(1.0)
}

/// ‖γ(· − s) − γ‖_{L¹(dx)} by quadrature, split at the crossing point s/2.
pub fn shifted_gaussian_l1(s: f64, settings: &QuadratureSettings) -> Result<f64> {
    if s == 0.0 {
        return Ok(0.0);
    }
    let c = settings.tail_cutoff + s.abs();
    let q = integrate_pieces(
        |x| (gaussian_pdf(x - s) - gaussian_pdf(x)).abs(),
        &[-c, 0.5 * s, c],
        settings,
    )?;
    Ok(q.value)
}

/// 4Φ(|s|/2) − 2 = 2·erf(|s|/(2√2)).
pub fn shifted_gaussian_l1_closed(s: f64) -> f64 {
    2.0 * erf(0.5 * s.abs() / std::f64::consts::SQRT_2)
}

/// ‖e^{ψ_g − σ_q} − 1‖_{L¹(γ)}; at most 2.
pub fn needle_l1(n: &Needle, settings: &QuadratureSettings) -> Result<f64> {
    lp_distance(&n.measure, 1.0, settings)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateL1 {
    /// ‖ρ e^{ψ_g} − 1‖_{L¹(γ)} = ∫ |ρ − φ| dx.
    pub mixture_l1: f64,
    /// Σ w_q · needle_l1(q).
    pub needlewise_sum: f64,
    /// needle_l1 of each needle, in needle order.
    pub per_needle: Vec<f64>,
}

pub fn aggregate_l1(ens: &NeedleEnsemble, settings: &QuadratureSettings) -> Result<AggregateL1> {
    let mixture_l1 = integrate_pieces(
        |x| (mixture_density(ens, x) - gaussian_pdf(x)).abs(),
        &ens.l1_nodes(settings),
        settings,
    )?
    .value;
    let per_needle = ens
        .needles
        .par_iter()
        .map(|n| needle_l1(n, settings))
        .collect::<Result<Vec<f64>>>()?;
    let needlewise_sum = ens
        .needles
        .iter()
        .zip(&per_needle)
        .map(|(n, l)| n.weight * l)
        .sum();
    Ok(AggregateL1 {
        mixture_l1,
        needlewise_sum,
        per_needle,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem31Report {
    pub delta: f64,
    pub epsilon: f64,
    /// (1 − ε)/(9 − 3ε).
    pub rate_bound_exponent: f64,
    pub mixture_l1: f64,
    pub needlewise_sum: f64,
    pub good_mass: f64,
    pub centered_mass: f64,
    pub good_and_centered_mass: f64,
    pub bad_mass: f64,
    pub aggregate_deficit: f64,
    /// Σ_{good ∩ centered} w_q·needle_l1(q) + 2·(bad mass).
    pub decomposition_bound: f64,
    /// Aggregate deficit ≤ δ and bad mass ≤ δ^κ.
    pub preconditions_hold: bool,
}

/// Runs the good/centered split and the L¹ aggregation for one δ.
pub fn theorem31_experiment(
    ens: &NeedleEnsemble,
    delta: f64,
    c_threshold: f64,
    settings: &QuadratureSettings,
) -> Result<Theorem31Report> {
    let good = classify_good(ens, delta)?;
    let centered = classify_centered(ens, delta, c_threshold)?;
    let agg = aggregate_l1(ens, settings)?;
    let mut gc_mass = 0.0;
    let mut gc_l1 = 0.0;
    for (i, n) in ens.needles.iter().enumerate() {
        if good.flags[i] && centered.flags[i] {
            gc_mass += n.weight;
            gc_l1 += n.weight * agg.per_needle[i];
        }
    }
    let bad_mass = (1.0 - gc_mass).max(0.0);
    let k = kappa(ens.epsilon);
    let preconditions_hold =
        good.aggregate_deficit <= delta && bad_mass <= delta.powf(k) + WEIGHT_TOL;
    if !preconditions_hold {
        log::warn!(
            "theorem 3.1 preconditions violated at delta {delta:e}: deficit {:e}, bad mass {bad_mass:e}",
            good.aggregate_deficit
        );
    }
    Ok(Theorem31Report {
        delta,
        epsilon: ens.epsilon,
        rate_bound_exponent: k,
        mixture_l1: agg.mixture_l1,
        needlewise_sum: agg.needlewise_sum,
        good_mass: good.good_mass,
        centered_mass: centered.centered_mass,
        good_and_centered_mass: gc_mass,
        bad_mass,
        aggregate_deficit: good.aggregate_deficit,
        decomposition_bound: gc_l1 + 2.0 * bad_mass,
        preconditions_hold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure1d::{normalize, PotentialSpec};
    use crate::numerics::special::FRAC_1_SQRT_2PI;
    use crate::stability::example23;

    fn s() -> QuadratureSettings {
        QuadratureSettings::default()
    }

    fn pair(shift: f64) -> NeedleEnsemble {
        let g = Measure1D::gaussian();
        NeedleEnsemble::new(vec![(0.5, g.translate(shift)), (0.5, g.translate(-shift))], 0.5, 0.1)
            .unwrap()
    }

    #[test]
    fn kappa_at_one_tenth() {
        assert!((kappa(0.1) - 0.9 / 8.7).abs() < 1e-16);
    }

    #[test]
    fn mixture_density_examples() {
        let single = NeedleEnsemble::new(vec![(1.0, Measure1D::gaussian())], 0.3, 0.1).unwrap();
        for x in [-2.0, 0.0, 1.3] {
            assert!((mixture_density(&single, x) - gaussian_pdf(x)).abs() < 1e-16);
        }
        let s_: f64 = 0.8;
        let want = (-0.5 * s_ * s_).exp() * FRAC_1_SQRT_2PI;
        assert!((mixture_density(&pair(s_), 0.0) - want).abs() < 1e-16);
        let ex = example23(2.0).unwrap();
        let trunc = NeedleEnsemble::new(vec![(1.0, ex.measure)], 0.5, 0.1).unwrap();
        assert_eq!(mixture_density(&trunc, 2.5), 0.0);
    }

    #[test]
    fn disintegration_examples() {
        let ens = pair(0.7);
        let one = disintegration_check(&ens, |_| 1.0, &s()).unwrap();
        assert!((one.lhs - 1.0).abs() < 1e-9 && (one.rhs - 1.0).abs() < 1e-9);
        let first = disintegration_check(&ens, |x| x, &s()).unwrap();
        assert!(first.lhs.abs() < 1e-10 && first.rhs.abs() < 1e-10);
        let second = disintegration_check(&ens, |x| x * x, &s()).unwrap();
        let want = 1.0 + 0.49;
        assert!((second.lhs - want).abs() < 1e-9 && (second.rhs - want).abs() < 1e-9);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let g = Measure1D::gaussian();
        assert!(NeedleEnsemble::new(vec![(0.6, g.clone()), (0.6, g.clone())], 0.5, 0.1).is_err());
        assert!(NeedleEnsemble::new(vec![(-0.1, g.clone()), (1.1, g.clone())], 0.5, 0.1).is_err());
        assert!(NeedleEnsemble::new(vec![(1.0, g.clone())], 0.5, 1.0).is_err());
        assert!(NeedleEnsemble::new(vec![], 0.5, 0.1).is_err());
    }

    #[test]
    fn gaussian_needles_are_good_and_centered() {
        let g = Measure1D::gaussian();
        let ens = NeedleEnsemble::new(vec![(0.25, g.clone()); 4], 0.2, 0.1).unwrap();
        let good = classify_good(&ens, 1e-6).unwrap();
        assert_eq!(good.good_mass, 1.0);
        assert!(good.aggregate_deficit.abs() < 1e-15);
        assert_eq!(good.markov_bound_holds, Some(true));
        let cen = classify_centered(&ens, 1e-6, 1.0).unwrap();
        assert_eq!(cen.centered_mass, 1.0);
        let agg = aggregate_l1(&ens, &s()).unwrap();
        assert!(agg.mixture_l1 < 1e-12 && agg.needlewise_sum < 1e-12);
    }

    #[test]
    fn one_heavy_needle_is_not_good() {
        // a needle of deficit 2√δ carrying mass √δ/2; the rest Gaussian
        let theta = 0.5;
        let delta: f64 = 1e-4;
        let target = 2.0 * delta.sqrt();
        // truncated Gaussian at θ = 1/2 has deficit δ_E/√(2π); solve its width
        let d = crate::stability::example23_half_width(target).unwrap();
        let heavy = example23(d).unwrap().measure;
        let w = 0.5 * delta.sqrt();
        let ens = NeedleEnsemble::new(
            vec![(w, heavy), (1.0 - w, Measure1D::gaussian())],
            theta,
            0.1,
        )
        .unwrap();
        let r = classify_good(&ens, delta).unwrap();
        assert!((r.good_mass - (1.0 - w)).abs() < 1e-15);
        assert!(r.good_mass >= 1.0 - delta.sqrt());
        assert!((r.aggregate_deficit - w * target).abs() < 1e-12);
        assert_eq!(r.markov_bound_holds, Some(true));
    }

    #[test]
    fn translated_needle_is_excluded() {
        let (delta, c, eps): (f64, f64, f64) = (1e-4, 0.5, 0.1);
        let t = 2.0 * c * delta.powf(kappa(eps));
        let g = Measure1D::gaussian();
        let ens = NeedleEnsemble::new(vec![(0.5, g.clone()), (0.5, g.translate(t))], 0.3, eps).unwrap();
        let r = classify_centered(&ens, delta, c).unwrap();
        assert_eq!(r.flags, vec![true, false]);
        assert_eq!(r.centered_mass, 0.5);
        let r = classify_centered(&ens, delta, 1e12).unwrap();
        assert_eq!(r.centered_mass, 1.0);
    }

    #[test]
    fn shifted_gaussian_closed_form() {
        // 4Φ(s/2) − 2 references
        let refs = [
            (0.1, 0.079_755_223_353_489_85),
            (0.5, 0.394_825_302_731_694_9),
            (1.0, 0.765_849_845_096_052_4),
        ];
        for (sh, want) in refs {
            let q = shifted_gaussian_l1(sh, &s()).unwrap();
            assert!((q - want).abs() < 1e-12, "s={sh}");
            assert!((shifted_gaussian_l1_closed(sh) - want).abs() < 1e-15);
            assert!(q <= 2.0 * sh * FRAC_1_SQRT_2PI);
        }
        assert_eq!(shifted_gaussian_l1(0.0, &s()).unwrap(), 0.0);
    }

    #[test]
    fn truncated_needle_l1() {
        let ex = example23(2.0).unwrap();
        let n = Needle::new(1.0, ex.measure.clone(), 0.5).unwrap();
        let l1 = needle_l1(&n, &s()).unwrap();
        assert!((l1 - 0.091_000_527_792_716_83).abs() < 1e-10);
        let ens = NeedleEnsemble::new(vec![(1.0, ex.measure)], 0.5, 0.1).unwrap();
        let agg = aggregate_l1(&ens, &s()).unwrap();
        assert!((agg.mixture_l1 - agg.needlewise_sum).abs() < 1e-9);
        assert!((agg.mixture_l1 - l1).abs() < 1e-9);
    }

    #[test]
    fn opposite_shifts_cancel_in_the_mixture() {
        let agg = aggregate_l1(&pair(0.5), &s()).unwrap();
        assert!(agg.mixture_l1 < agg.needlewise_sum - 1e-3);
        // each needle is a translated Gaussian
        let want = shifted_gaussian_l1_closed(0.5);
        assert!((agg.needlewise_sum - want).abs() < 1e-9);
    }

    #[test]
    fn far_needles_hit_the_trivial_bound() {
        let g = Measure1D::gaussian();
        let n = Needle::new(1.0, g.translate(40.0), 0.5).unwrap();
        let l1 = needle_l1(&n, &s()).unwrap();
        assert!(l1 <= 2.0 + 1e-12 && l1 > 1.999);
    }

    #[test]
    fn serde_round_trip() {
        let m = normalize(&PotentialSpec::perturbed(vec![0.0], vec![0.0, 0.3]).unwrap()).unwrap();
        let ens = NeedleEnsemble::new(vec![(0.4, m), (0.6, Measure1D::gaussian().translate(1.0))], 0.3, 0.1)
            .unwrap();
        let json = serde_json::to_string(&ens).unwrap();
        let back: NeedleEnsemble = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
        assert!((back.needles()[1].r_minus - ens.needles()[1].r_minus).abs() < 1e-15);
    }

    #[test]
    fn pure_bad_mass_bound() {
        let (eps, delta): (f64, f64) = (0.1, 1e-4);
        let b = delta.powf(kappa(eps));
        let g = Measure1D::gaussian();
        let ens = NeedleEnsemble::new(
            vec![(b, g.translate(60.0)), (1.0 - b, g.clone())],
            0.5,
            eps,
        )
        .unwrap();
        let r = theorem31_experiment(&ens, delta, DEFAULT_C_THRESHOLD, &s()).unwrap();
        assert!((r.bad_mass - b).abs() < 1e-15);
        assert!(r.preconditions_hold);
        assert!(r.mixture_l1 <= 2.0 * b + 1e-9);
        assert!((r.decomposition_bound - 2.0 * b).abs() < 1e-9);

        let all_gauss = NeedleEnsemble::new(vec![(0.5, g.clone()), (0.5, g)], 0.5, eps).unwrap();
        for d in [1e-2, 1e-4, 1e-6] {
            let r = theorem31_experiment(&all_gauss, d, DEFAULT_C_THRESHOLD, &s()).unwrap();
            assert!(r.mixture_l1 < 1e-12 && r.bad_mass == 0.0);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn mixture_never_exceeds_needlewise_sum(
            shifts in proptest::collection::vec(-3.0f64..3.0, 1..5),
            slope in 0.0f64..0.8,
        ) {
            let k = shifts.len();
            let mut parts = Vec::new();
            for (i, &t) in shifts.iter().enumerate() {
                let m = if i % 2 == 0 {
                    Measure1D::gaussian().translate(t)
                } else {
                    normalize(&PotentialSpec::perturbed(vec![t], vec![-slope, slope]).unwrap()).unwrap()
                };
                parts.push((1.0 / k as f64, m));
            }
            let total: f64 = parts.iter().map(|p| p.0).sum();
            parts[0].0 += 1.0 - total;
            let ens = NeedleEnsemble::new(parts, 0.4, 0.2).unwrap();
            let agg = aggregate_l1(&ens, &s()).unwrap();
            proptest::prop_assert!(agg.mixture_l1 <= agg.needlewise_sum + 1e-9);
            proptest::prop_assert!(agg.needlewise_sum <= 2.0 + 1e-12);
            let mass = disintegration_check(&ens, |_| 1.0, &s()).unwrap();
            proptest::prop_assert!((mass.lhs - 1.0).abs() < 1e-9);
        }
    }
}
