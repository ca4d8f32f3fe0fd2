use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure1d::{normalize, Measure1D, PotentialSpec};
use crate::numerics::special::{erf, erfc, SQRT_2PI};
use crate::numerics::{find_root, Interval};

/// The truncated Gaussian 𝔪 = (1 + δ_E)·γ|_{(−D, D)}, where δ_E is the
/// normalization excess fixed by γ((−D, D)) = (1 + δ_E)⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Example23Family {
    pub half_width: f64,
    pub delta_e: f64,
}

impl Example23Family {
    pub fn new(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::Domain {
                what: "half-width D must be positive",
                value: half_width,
            });
        }
        let z = half_width / std::f64::consts::SQRT_2;
        // 1/γ(I) − 1 = erfc/erf, without forming 1 − (tiny)
        Ok(Example23Family {
            half_width,
            delta_e: erfc(z) / erf(z),
        })
    }

    /// Deficit at θ = 1/2: δ_E/√(2π).
    pub fn deficit(&self) -> f64 {
        self.delta_e / SQRT_2PI
    }

    /// ‖e^{ψ_g−ψ} − 1‖_{L^p(γ)} = ((1 + δ_E^{p−1})/(1 + δ_E))^{1/p}·δ_E^{1/p}.
    pub fn lp(&self, p: f64) -> f64 {
        let d = self.delta_e;
        ((1.0 + d.powf(p - 1.0)) / (1.0 + d)).powf(1.0 / p) * d.powf(1.0 / p)
    }

    /// Ent_γ(𝔪) = ln(1 + δ_E): the density ratio is constant on I.
    pub fn entropy(&self) -> f64 {
        self.delta_e.ln_1p()
    }
}

/// The measure of the family together with its closed forms.
#[derive(Debug, Clone)]
pub struct Example23 {
    pub measure: Measure1D,
    pub family: Example23Family,
}

pub fn example23(half_width: f64) -> Result<Example23> {
    let family = Example23Family::new(half_width)?;
    let measure = normalize(&PotentialSpec::truncated_symmetric(half_width)?)?;
    Ok(Example23 { measure, family })
}

/// Half-width D whose deficit at θ = 1/2 equals `deficit`, by bracketed root
/// finding in log scale.
pub fn example23_half_width(deficit: f64) -> Result<f64> {
    if !(deficit > 0.0 && deficit < 0.1) {
        return Err(Error::Domain {
            what: "example deficit must lie in (0, 0.1)",
            value: deficit,
        });
    }
    let target = deficit.ln();
    find_root(
        |d| Example23Family::new(d).map(|f| f.deficit().ln()).unwrap_or(f64::NAN) - target,
        Interval::new(0.5, 37.0)?,
        1e-14,
    )
}
