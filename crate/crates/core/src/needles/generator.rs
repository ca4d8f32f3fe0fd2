use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{kappa, NeedleEnsemble};
use crate::error::{Error, Result};
use crate::measure1d::{normalize, Measure1D, PotentialSpec};
use crate::numerics::{find_root, Interval};
use crate::stability::{center, deficit};

/// Synthetic ensemble parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub needle_count: usize,
    pub theta: f64,
    pub epsilon: f64,
    /// Deficit given to every good needle.
    pub deficit_scale: f64,
    /// Total weight of the bad needles; defaults to `deficit_scale^κ`.
    #[serde(default)]
    pub bad_fraction: Option<f64>,
    pub seed: u64,
}

/// Everything drawn for one needle index, whether or not it ends up bad.
struct Draw {
    sign: f64,
    far_shift: f64,
    b1: f64,
    b2: f64,
    s0: f64,
    mix: f64,
    s2: f64,
    placement: f64,
}

impl Draw {
    fn sample(rng: &mut ChaCha8Rng) -> Self {
        Draw {
            sign: if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            far_shift: rng.random_range(4.0..8.0),
            b1: rng.random_range(-1.5..0.0),
            b2: rng.random_range(0.0..1.5),
            s0: rng.random_range(-1.0..-0.1),
            mix: rng.random::<f64>(),
            s2: rng.random_range(0.1..1.0),
            placement: rng.random_range(-0.5..0.5),
        }
    }

    /// Slopes run from negative to positive, so the perturbation has a
    /// strict minimum and the deficit grows without bound in `scale`; with
    /// one-signed slopes a large scale only translates the Gaussian.
    fn shape(&self, scale: f64) -> Result<Measure1D> {
        let s1 = self.s0 + self.mix * (self.s2 - self.s0);
        let slopes = vec![scale * self.s0, scale * s1, scale * self.s2];
        normalize(&PotentialSpec::perturbed(vec![self.b1, self.b2], slopes)?)
    }
}

/// Largest perturbation scale tried before a deficit target is declared
/// unreachable.
const MAX_SCALE: f64 = 1e3;

fn good_needle(draw: &Draw, cfg: &EnsembleConfig) -> Result<Measure1D> {
    let target = cfg.deficit_scale;
    if target == 0.0 {
        return Ok(Measure1D::gaussian());
    }
    let gap = |scale: f64| -> f64 {
        match draw.shape(scale).and_then(|m| deficit(&m, cfg.theta)) {
            Ok(r) => r.deficit.max(0.0).ln() - target.ln(),
            Err(_) => f64::NAN,
        }
    };
    let mut hi = 1e-3;
    while gap(hi) < 0.0 {
        hi *= 2.0;
        if hi > MAX_SCALE {
            return Err(Error::Infeasible(format!(
                "no perturbation scale reaches deficit {target:e}"
            )));
        }
    }
    let mut lo = hi / 2.0;
    while gap(lo) > 0.0 {
        lo /= 2.0;
        if lo < 1e-12 {
            return Err(Error::Infeasible(format!(
                "deficit {target:e} is below the reachable range"
            )));
        }
    }
    let scale = find_root(gap, Interval::new(lo, hi)?, 1e-13)?;
    let (centered, _) = center(&draw.shape(scale)?, cfg.theta)?;
    Ok(centered.translate(draw.placement * target.powf(kappa(cfg.epsilon))))
}

/// Builds a reproducible ensemble: the first `round(b·N)` needles (at least
/// one when b > 0, all of them only when b = 1) are Gaussians pushed 4 to 8 units away and share weight b;
/// the rest are kinked Gaussians tuned to deficit `deficit_scale`, placed
/// within ½·deficit_scale^κ of centered, sharing weight 1 − b.
pub fn generate_ensemble(cfg: &EnsembleConfig) -> Result<NeedleEnsemble> {
    let n = cfg.needle_count;
    if n == 0 {
        return Err(Error::Infeasible("needle_count must be positive".into()));
    }
    if !(cfg.deficit_scale >= 0.0 && cfg.deficit_scale < 0.1) {
        return Err(Error::Domain {
            what: "deficit_scale must lie in [0, 0.1)",
            value: cfg.deficit_scale,
        });
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(Error::Domain {
            what: "epsilon must lie in (0, 1)",
            value: cfg.epsilon,
        });
    }
    let b = cfg
        .bad_fraction
        .unwrap_or_else(|| cfg.deficit_scale.powf(kappa(cfg.epsilon)));
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::Domain {
            what: "bad_fraction must lie in [0, 1]",
            value: b,
        });
    }
    let bad = if b == 1.0 {
        n
    } else if b > 0.0 {
        if n < 2 {
            return Err(Error::Infeasible(format!(
                "bad fraction {b} needs at least one good and one bad needle"
            )));
        }
        ((b * n as f64).round() as usize).clamp(1, n - 1)
    } else {
        0
    };
    let bad_weight = if bad == 0 { 0.0 } else { b };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draws: Vec<Draw> = (0..n).map(|_| Draw::sample(&mut rng)).collect();

    let parts = draws
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            if i < bad {
                let m = Measure1D::gaussian().translate(d.sign * d.far_shift);
                Ok((bad_weight / bad as f64, m))
            } else {
                let w = (1.0 - bad_weight) / (n - bad) as f64;
                good_needle(d, cfg).map(|m| (w, m))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    NeedleEnsemble::new(parts, cfg.theta, cfg.epsilon)
}
