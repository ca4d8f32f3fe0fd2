use serde::{Deserialize, Serialize};

use super::potential::PotentialSpec;
use crate::error::{Error, Result};
use crate::numerics::special::{
    gaussian_quantile_ln, ln_add_exp, ln_gaussian_cdf, ln_gaussian_mass, ln_gaussian_sf,
    LN_SQRT_2PI,
};
use crate::numerics::Interval;

/// On `(lo, hi)` the normalized potential is ψ(x) = ψ_g(x) + slope·x + offset,
/// so the density there is φ(x + slope)·e^{slope²/2 − offset}.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    lo: f64,
    hi: f64,
    slope: f64,
    offset: f64,
    mass: f64,
}

impl Piece {
    /// ln of the factor turning Gaussian mass of `(lo+slope, x+slope)` into 𝔪-mass.
    fn ln_scale(&self) -> f64 {
        0.5 * self.slope * self.slope - self.offset
    }

    fn mass_below(&self, x: f64) -> f64 {
        let a = self.slope;
        (self.ln_scale() + ln_gaussian_mass(self.lo + a, x + a)).exp()
    }

    fn mass_above(&self, x: f64) -> f64 {
        let a = self.slope;
        (self.ln_scale() + ln_gaussian_mass(x + a, self.hi + a)).exp()
    }

    /// The point y in the piece with `left` mass on (lo, y] and `right` mass
    /// on [y, hi); the smaller of the two is used to stay in the
    /// well-conditioned tail.
    fn split(&self, left: f64, right: f64) -> f64 {
        let a = self.slope;
        let ln2 = std::f64::consts::LN_2;
        let y = if left <= right {
            let ln_left = ln_add_exp(ln_gaussian_cdf(self.lo + a), left.max(0.0).ln() - self.ln_scale());
            if ln_left <= -ln2 {
                gaussian_quantile_ln(ln_left) - a
            } else {
                let ln_right =
                    ln_add_exp(ln_gaussian_sf(self.hi + a), right.max(0.0).ln() - self.ln_scale());
                -gaussian_quantile_ln(ln_right.min(-ln2)) - a
            }
        } else {
            let ln_right = ln_add_exp(ln_gaussian_sf(self.hi + a), right.max(0.0).ln() - self.ln_scale());
            if ln_right <= -ln2 {
                -gaussian_quantile_ln(ln_right) - a
            } else {
                let ln_left =
                    ln_add_exp(ln_gaussian_cdf(self.lo + a), left.max(0.0).ln() - self.ln_scale());
                gaussian_quantile_ln(ln_left.min(-ln2)) - a
            }
        };
        y.clamp(self.lo, self.hi)
    }
}

/// A probability measure 𝔪 = e^{−ψ} dx on an open interval, with
/// ψ = ψ̂ + ln Z for a potential ψ̂ and Z = ∫ e^{−ψ̂}.
///
/// Every supported potential is piecewise of the form ψ_g(x) + αx + β, so the
/// distribution function and quantiles are evaluated in closed form through Φ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRecord", into = "MeasureRecord")]
pub struct Measure1D {
    spec: PotentialSpec,
    shift: f64,
    log_normalizer: f64,
    domain: Interval,
    pieces: Vec<Piece>,
    below: Vec<f64>,
    above: Vec<f64>,
    median: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureRecord {
    potential: PotentialSpec,
    #[serde(default)]
    shift: f64,
    /// Written for readers; recomputed on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    log_normalizer: Option<f64>,
}

impl TryFrom<MeasureRecord> for Measure1D {
    type Error = Error;
    fn try_from(r: MeasureRecord) -> Result<Self> {
        Ok(normalize(&r.potential)?.translate(r.shift))
    }
}

impl From<Measure1D> for MeasureRecord {
    fn from(m: Measure1D) -> Self {
        MeasureRecord {
            potential: m.spec,
            shift: m.shift,
            log_normalizer: Some(m.log_normalizer),
        }
    }
}

/// Builds the probability measure e^{−ψ̂} dx / Z.
pub fn normalize(spec: &PotentialSpec) -> Result<Measure1D> {
    spec.validate()?;
    let affine = spec.affine_pieces();
    let ln_masses: Vec<f64> = affine
        .iter()
        .map(|p| {
            let a = p.slope;
            0.5 * a * a - p.offset + ln_gaussian_mass(p.lo + a, p.hi + a)
        })
        .collect();
    if ln_masses.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::NonIntegrable(format!("{spec:?}")));
    }
    let ln_z = ln_masses.iter().copied().fold(f64::NEG_INFINITY, ln_add_exp);
    if !ln_z.is_finite() {
        return Err(Error::NonIntegrable(format!("total mass e^{ln_z}")));
    }
    let pieces: Vec<Piece> = affine
        .iter()
        .zip(&ln_masses)
        .map(|(p, lm)| Piece {
            lo: p.lo,
            hi: p.hi,
            slope: p.slope,
            offset: p.offset + ln_z,
            mass: (lm - ln_z).exp(),
        })
        .collect();
    Ok(Measure1D::assemble(spec.clone(), 0.0, ln_z, spec.domain(), pieces))
}

impl Measure1D {
    /// The standard Gaussian γ.
    pub fn gaussian() -> Self {
        normalize(&PotentialSpec::gaussian()).expect("the Gaussian is a valid potential")
    }

    fn assemble(
        spec: PotentialSpec,
        shift: f64,
        log_normalizer: f64,
        domain: Interval,
        pieces: Vec<Piece>,
    ) -> Self {
        let n = pieces.len();
        let mut below = vec![0.0; n];
        let mut above = vec![0.0; n];
        for j in 1..n {
            below[j] = below[j - 1] + pieces[j - 1].mass;
        }
        for j in (0..n.saturating_sub(1)).rev() {
            above[j] = above[j + 1] + pieces[j + 1].mass;
        }
        let mut m = Measure1D {
            spec,
            shift,
            log_normalizer,
            domain,
            pieces,
            below,
            above,
            median: 0.0,
        };
        m.median = m.quantile_lower(0.5);
        m
    }

    pub fn potential_spec(&self) -> &PotentialSpec {
        &self.spec
    }

    /// ln Z with ψ = ψ̂ + ln Z.
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    /// Total translation applied to the potential's own coordinate.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn median(&self) -> f64 {
        self.median
    }

    /// The measure pushed forward by x ↦ x + s.
    pub fn translate(&self, s: f64) -> Measure1D {
        if s == 0.0 {
            return self.clone();
        }
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                lo: p.lo + s,
                hi: p.hi + s,
                slope: p.slope - s,
                offset: p.offset - p.slope * s + 0.5 * s * s,
                mass: p.mass,
            })
            .collect();
        Measure1D::assemble(
            self.spec.clone(),
            self.shift + s,
            self.log_normalizer,
            self.domain.translate(s),
            pieces,
        )
    }

    fn piece_index(&self, x: f64) -> usize {
        self.pieces
            .partition_point(|p| p.hi <= x)
            .min(self.pieces.len() - 1)
    }

    /// ψ(x) − ψ_g(x) on the domain, +∞ outside.
    pub fn gap(&self, x: f64) -> f64 {
        if !self.domain.contains(x) {
            return f64::INFINITY;
        }
        let p = &self.pieces[self.piece_index(x)];
        p.slope * x + p.offset
    }

    /// Normalized potential ψ(x), +∞ outside the domain.
    pub fn potential(&self, x: f64) -> f64 {
        0.5 * x * x + LN_SQRT_2PI + self.gap(x)
    }

    /// Density e^{−ψ(x)}, zero outside the domain.
    pub fn density(&self, x: f64) -> f64 {
        if !self.domain.contains(x) {
            return 0.0;
        }
        (-self.potential(x)).exp()
    }

    /// Right derivative ψ'₊(x).
    pub fn right_derivative(&self, x: f64) -> f64 {
        self.spec.right_derivative(x - self.shift)
    }

    /// 𝔪((−∞, x]).
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.domain.lo() {
            return 0.0;
        }
        if x >= self.domain.hi() {
            return 1.0;
        }
        let j = self.piece_index(x);
        (self.below[j] + self.pieces[j].mass_below(x)).min(1.0)
    }

    /// 𝔪([x, ∞)), accurate in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        if x <= self.domain.lo() {
            return 1.0;
        }
        if x >= self.domain.hi() {
            return 0.0;
        }
        let j = self.piece_index(x);
        (self.above[j] + self.pieces[j].mass_above(x)).min(1.0)
    }

    /// 𝔪((a, b)), using whichever tail keeps the subtraction well conditioned.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        if !(a < b) {
            return 0.0;
        }
        let v = if b <= self.median {
            self.cdf(b) - self.cdf(a)
        } else if a >= self.median {
            self.sf(a) - self.sf(b)
        } else {
            1.0 - self.cdf(a) - self.sf(b)
        };
        v.max(0.0)
    }

    /// The θ-quantile: the point x with 𝔪((−∞, x]) = θ.
    pub fn quantile(&self, theta: f64) -> Result<f64> {
        check_probability(theta)?;
        Ok(if theta <= 0.5 {
            self.quantile_lower(theta)
        } else {
            self.quantile_upper_unchecked(1.0 - theta)
        })
    }

    /// The point x with 𝔪([x, ∞)) = s, accurate for tiny `s`.
    pub fn quantile_upper(&self, s: f64) -> Result<f64> {
        check_probability(s)?;
        Ok(self.quantile_upper_unchecked(s))
    }

    /// The point with `left` mass to its left and `right` mass to its right;
    /// callers pass both so that neither is formed as `1 − tiny`.
    pub fn split_point(&self, left: f64, right: f64) -> f64 {
        if left <= right {
            self.quantile_lower(left.max(0.0))
        } else {
            self.quantile_upper_unchecked(right.max(0.0))
        }
    }

    fn quantile_lower(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.domain.lo();
        }
        // first piece whose cumulative mass reaches t
        let (mut a, mut b) = (0, self.pieces.len() - 1);
        while a < b {
            let mid = (a + b) / 2;
            if self.below[mid] + self.pieces[mid].mass < t {
                a = mid + 1;
            } else {
                b = mid;
            }
        }
        let j = a;
        let p = &self.pieces[j];
        let left = (t - self.below[j]).clamp(0.0, p.mass);
        p.split(left, p.mass - left)
    }

    fn quantile_upper_unchecked(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return self.domain.hi();
        }
        // last piece whose mass together with everything above reaches s
        let (mut a, mut b) = (0, self.pieces.len() - 1);
        while a < b {
            let mid = (a + b).div_ceil(2);
            if self.above[mid] + self.pieces[mid].mass < s {
                b = mid - 1;
            } else {
                a = mid;
            }
        }
        let j = a;
        let p = &self.pieces[j];
        let right = (s - self.above[j]).clamp(0.0, p.mass);
        p.split(p.mass - right, right)
    }

    /// Finite integration nodes: the domain clipped to `median ± cutoff`
    /// together with every interior kink of the potential.
    pub fn integration_nodes(&self, cutoff: f64) -> Vec<f64> {
        let (lo, hi) = self.domain.clip(self.median, cutoff);
        let lo = lo.max(self.median - cutoff);
        let hi = hi.min(self.median + cutoff);
        let mut nodes = vec![lo];
        nodes.extend(
            self.pieces
                .iter()
                .skip(1)
                .map(|p| p.lo)
                .filter(|&x| x > lo && x < hi),
        );
        nodes.push(hi);
        nodes
    }

    /// Largest |α| over the pieces ψ = ψ_g + αx + β; bounds how far from the
    /// origin density ratios against γ can peak.
    pub fn max_abs_slope(&self) -> f64 {
        self.pieces.iter().map(|p| p.slope.abs()).fold(0.0, f64::max)
    }

    /// Points where ψ = ψ_g, one per affine piece that crosses zero.
    pub fn gap_zeros(&self) -> Vec<f64> {
        self.pieces
            .iter()
            .filter(|p| p.slope != 0.0)
            .map(|p| (p, -p.offset / p.slope))
            .filter(|(p, x)| *x >= p.lo && *x <= p.hi && x.is_finite())
            .map(|(_, x)| x)
            .collect()
    }

    /// Interior points where the potential has a kink.
    pub fn kinks(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for w in self.pieces.windows(2) {
            if w[0].slope != w[1].slope {
                out.push(w[1].lo);
            }
        }
        out
    }
}

pub(crate) fn check_probability(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "theta out of range (0, 1)",
            value: theta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::{erf, gaussian_cdf, gaussian_pdf, gaussian_quantile};
    use crate::numerics::{integrate_pieces, QuadratureSettings};
    use proptest::prelude::*;

    const ERF_SQRT2: f64 = 0.954_499_736_103_641_6;

    fn total_mass(m: &Measure1D) -> f64 {
        integrate_pieces(|x| m.density(x), &m.integration_nodes(40.0), &QuadratureSettings::default())
            .unwrap()
            .value
    }

    #[test]
    fn gaussian_is_already_normalized() {
        let m = Measure1D::gaussian();
        assert!(m.log_normalizer().abs() < 1e-15);
        for x in [-3.0, -0.5, 0.0, 1.7] {
            assert!((m.density(x) - gaussian_pdf(x)).abs() < 1e-16);
        }
    }

    #[test]
    fn truncated_density_is_rescaled_gaussian() {
        let m = normalize(&PotentialSpec::truncated_symmetric(2.0).unwrap()).unwrap();
        assert!((m.log_normalizer() - ERF_SQRT2.ln()).abs() < 1e-14);
        let delta_e = 1.0 / ERF_SQRT2 - 1.0;
        assert!((m.density(0.3) - (1.0 + delta_e) * gaussian_pdf(0.3)).abs() < 1e-15);
        assert_eq!(m.density(2.5), 0.0);
        assert!((total_mass(&m) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn additive_constant_is_invisible() {
        let spec = PotentialSpec::perturbed(vec![0.2], vec![-0.4, 0.3]).unwrap();
        let a = normalize(&spec).unwrap();
        let b = normalize(&spec.clone().with_constant(7.25)).unwrap();
        for x in [-2.0, 0.0, 0.2, 1.3] {
            assert!((a.density(x) - b.density(x)).abs() < 1e-14);
            assert!((a.cdf(x) - b.cdf(x)).abs() < 1e-14);
        }
        assert!((b.log_normalizer() - a.log_normalizer() + 7.25).abs() < 1e-12);
    }

    #[test]
    fn gaussian_quantiles_agree() {
        let m = Measure1D::gaussian();
        for k in 1..100 {
            let t = k as f64 / 100.0;
            let q = m.quantile(t).unwrap();
            assert!((q - gaussian_quantile(t).unwrap()).abs() < 1e-12, "t={t}");
        }
        assert!(m.quantile(0.5).unwrap().abs() < 1e-15);
    }

    #[test]
    fn truncated_saturates_at_the_ends() {
        let m = normalize(&PotentialSpec::truncated_symmetric(2.0).unwrap()).unwrap();
        assert!((m.cdf(2.0 - 1e-12) - 1.0).abs() < 1e-10);
        assert!(m.cdf(-2.0 + 1e-12) < 1e-10);
        assert!(m.quantile(0.5).unwrap().abs() < 1e-14);
        let want = (erf(1.0 / std::f64::consts::SQRT_2) / 2.0 + 0.5 - gaussian_cdf(-2.0)) / ERF_SQRT2;
        assert!((m.cdf(1.0) - want).abs() < 1e-14);
    }

    #[test]
    fn quantile_rejects_bad_theta() {
        let m = Measure1D::gaussian();
        for t in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(m.quantile(t), Err(Error::Domain { .. })));
        }
    }

    #[test]
    fn perturbed_mass_matches_quadrature() {
        let spec = PotentialSpec::perturbed(vec![-1.0, 0.0, 1.5], vec![-0.8, -0.1, 0.4, 1.2]).unwrap();
        let m = normalize(&spec).unwrap();
        assert!((total_mass(&m) - 1.0).abs() < 1e-10);
        let s = QuadratureSettings::default();
        for x in [-2.0, -1.0, -0.3, 0.7, 2.2] {
            let mut nodes: Vec<f64> = m.integration_nodes(40.0).into_iter().filter(|&k| k < x).collect();
            nodes.push(x);
            let q = integrate_pieces(|t| m.density(t), &nodes, &s).unwrap().value;
            assert!((q - m.cdf(x)).abs() < 1e-11, "x={x}");
        }
    }

    #[test]
    fn tabulated_matches_perturbed_piecewise() {
        // a table with nodes at the kinks reproduces the perturbed family exactly
        let pspec = PotentialSpec::perturbed(vec![0.0], vec![-0.5, 0.5]).unwrap();
        let pts: Vec<[f64; 2]> = (-60..=60)
            .map(|i| {
                let x = i as f64 * 0.1;
                [x, pspec.evaluate(x)]
            })
            .collect();
        let tm = normalize(&PotentialSpec::tabulated(pts).unwrap()).unwrap();
        let pm = normalize(&pspec).unwrap();
        // restricted to (−6, 6): compare conditional distribution functions
        let z = pm.mass_between(-6.0, 6.0);
        for x in [-2.0, -0.15, 0.0, 0.45, 3.0] {
            let want = pm.mass_between(-6.0, x) / z;
            assert!((tm.cdf(x) - want).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn serde_round_trip_restores_translation() {
        let spec = PotentialSpec::perturbed(vec![0.0], vec![0.0, 0.6]).unwrap();
        let m = normalize(&spec).unwrap().translate(1.25);
        let json = serde_json::to_string(&m).unwrap();
        let back: Measure1D = serde_json::from_str(&json).unwrap();
        assert!((back.quantile(0.3).unwrap() - m.quantile(0.3).unwrap()).abs() < 1e-14);
        assert_eq!(back.shift(), 1.25);
    }

    #[test]
    fn far_tails_stay_relative() {
        let m = Measure1D::gaussian();
        let q = m.quantile_upper(1e-200).unwrap();
        assert!((m.sf(q) / 1e-200 - 1.0).abs() < 1e-10);
        let q = m.quantile(1e-200).unwrap();
        assert!((m.cdf(q) / 1e-200 - 1.0).abs() < 1e-10);
    }

    fn arb_spec() -> impl Strategy<Value = PotentialSpec> {
        (
            proptest::collection::vec(-2.5f64..2.5, 0..4),
            proptest::collection::vec(0.0f64..1.5, 4),
            -1.0f64..1.0,
        )
            .prop_map(|(mut bs, incs, s0)| {
                bs.sort_by(f64::total_cmp);
                bs.dedup();
                let mut slopes = vec![s0];
                for inc in incs.iter().take(bs.len()) {
                    let last = *slopes.last().unwrap();
                    slopes.push(last + inc);
                }
                PotentialSpec::perturbed(bs, slopes).unwrap()
            })
    }

    proptest! {
        #[test]
        fn cdf_is_monotone_and_quantile_inverts(spec in arb_spec(), t in 1e-6f64..(1.0 - 1e-6)) {
            let m = normalize(&spec).unwrap();
            let q = m.quantile(t).unwrap();
            let back = if t <= 0.5 { m.cdf(q) } else { 1.0 - m.sf(q) };
            prop_assert!((back - t).abs() < 1e-12);
            let xs: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.15).collect();
            for w in xs.windows(2) {
                prop_assert!(m.cdf(w[0]) <= m.cdf(w[1]));
            }
            prop_assert!((m.cdf(m.domain().clip(0.0, 40.0).1) - 1.0).abs() < 1e-10);
        }

        #[test]
        fn translation_moves_quantiles(spec in arb_spec(), s in -5.0f64..5.0, t in 0.01f64..0.99) {
            let m = normalize(&spec).unwrap();
            let moved = m.translate(s);
            let d = moved.quantile(t).unwrap() - m.quantile(t).unwrap();
            prop_assert!((d - s).abs() < 1e-10);
            let x = 0.37;
            prop_assert!((moved.density(x + s) - m.density(x)).abs() < 1e-12);
        }

        #[test]
        fn quadrature_confirms_normalization(spec in arb_spec()) {
            let m = normalize(&spec).unwrap();
            prop_assert!((total_mass(&m) - 1.0).abs() < 1e-10);
        }
    }
}
