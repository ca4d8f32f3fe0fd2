use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::special::LN_SQRT_2PI;
use crate::numerics::Interval;

/// Midpoint tolerance used to certify tabulated potentials.
pub const CONVEXITY_TOL: f64 = 1e-9;
/// Grid size of the midpoint certificate for tabulated potentials.
pub const CONVEXITY_GRID: usize = 512;
/// Forward-difference step for right derivatives of tabulated potentials.
pub const TABULATED_DERIVATIVE_STEP: f64 = 1e-7;
// Reach of the convexity grid into an unbounded side.
const CHECK_HALF_WIDTH: f64 = 12.0;

/// Family of a potential ψ̂. Every family is ψ̂(x) = x²/2 + (convex part).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// ψ̂ = ψ_g on the whole line.
    Gaussian,
    /// ψ̂ = ψ_g restricted to a proper sub-interval (the domain).
    TruncatedGaussian,
    /// ψ̂ = ψ_g + h where h(0) = 0 and h' is the right-continuous step function
    /// equal to `slopes[j]` on `[breakpoints[j-1], breakpoints[j])`.
    PerturbedGaussian {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
    },
    /// Samples (x, ψ̂(x)); ψ̂ − x²/2 is interpolated linearly between nodes and
    /// the domain is the open hull of the nodes.
    TabulatedConvex { points: Vec<[f64; 2]> },
}

/// A 1-convex potential ψ̂ on an open interval. `constant` is added to ψ̂ and
/// only changes the normalizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    domain: Interval,
    family: Family,
    #[serde(default)]
    constant: f64,
}

impl PotentialSpec {
    pub fn gaussian() -> Self {
        PotentialSpec {
            domain: Interval::real_line(),
            family: Family::Gaussian,
            constant: 0.0,
        }
    }

    /// Gaussian restricted to `(-half_width, half_width)`.
    pub fn truncated_symmetric(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::Domain {
                what: "truncation half-width must be positive",
                value: half_width,
            });
        }
        Self::truncated(Interval::new(-half_width, half_width)?)
    }

    pub fn truncated(domain: Interval) -> Result<Self> {
        if domain == Interval::real_line() {
            return Err(Error::InvalidPotential(
                "a truncated Gaussian needs at least one finite end".into(),
            ));
        }
        Ok(PotentialSpec {
            domain,
            family: Family::TruncatedGaussian,
            constant: 0.0,
        })
    }

    pub fn perturbed(breakpoints: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        Self::perturbed_on(Interval::real_line(), breakpoints, slopes)
    }

    pub fn perturbed_on(domain: Interval, breakpoints: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        let spec = PotentialSpec {
            domain,
            family: Family::PerturbedGaussian { breakpoints, slopes },
            constant: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Tabulated potential, certified by the midpoint test.
    pub fn tabulated(points: Vec<[f64; 2]>) -> Result<Self> {
        let spec = Self::tabulated_unchecked(points)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Tabulated potential with only structural checks (sorted, finite nodes).
    /// Used to inspect potentials that may fail 1-convexity.
    pub fn tabulated_unchecked(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidPotential("need at least two table rows".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPotential("table values must be finite".into()));
        }
        if points.windows(2).any(|w| !(w[0][0] < w[1][0])) {
            return Err(Error::InvalidPotential(
                "table abscissae must be strictly increasing".into(),
            ));
        }
        let domain = Interval::new(points[0][0], points[points.len() - 1][0])?;
        Ok(PotentialSpec {
            domain,
            family: Family::TabulatedConvex { points },
            constant: 0.0,
        })
    }

    /// Reads a two-column CSV (x, ψ̂(x)). A leading non-numeric row is taken
    /// as a header.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::Table(format!("{}: {e}", path.display())))?;
        let mut points = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Table(format!("{}: {e}", path.display())))?;
            if record.len() != 2 {
                return Err(Error::Table(format!(
                    "{}: row {} has {} columns, expected 2",
                    path.display(),
                    i + 1,
                    record.len()
                )));
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => points.push([v[0], v[1]]),
                Err(_) if i == 0 => continue,
                Err(e) => {
                    return Err(Error::Table(format!("{}: row {}: {e}", path.display(), i + 1)))
                }
            }
        }
        Self::tabulated(points)
    }

    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Checks the structural and convexity invariants of the family.
    pub fn validate(&self) -> Result<()> {
        match &self.family {
            Family::Gaussian => {
                if self.domain != Interval::real_line() {
                    return Err(Error::InvalidPotential(
                        "the gaussian family lives on the whole line; use truncated_gaussian".into(),
                    ));
                }
            }
            Family::TruncatedGaussian => {
                if self.domain == Interval::real_line() {
                    return Err(Error::InvalidPotential(
                        "a truncated Gaussian needs at least one finite end".into(),
                    ));
                }
            }
            Family::PerturbedGaussian { breakpoints, slopes } => {
                if slopes.len() != breakpoints.len() + 1 {
                    return Err(Error::InvalidPotential(format!(
                        "{} breakpoints need {} slopes, got {}",
                        breakpoints.len(),
                        breakpoints.len() + 1,
                        slopes.len()
                    )));
                }
                if breakpoints.iter().chain(slopes).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidPotential("perturbation must be finite".into()));
                }
                if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidPotential(
                        "breakpoints must be strictly increasing".into(),
                    ));
                }
                if let Some(w) = slopes.windows(2).find(|w| w[1] < w[0]) {
                    // a downward kink of size d violates the midpoint test by ~d·h/4
                    return Err(Error::NotOneConvex {
                        worst_violation: w[0] - w[1],
                    });
                }
            }
            Family::TabulatedConvex { .. } => {
                let report = check_one_convexity(self, CONVEXITY_GRID);
                if !report.pass {
                    return Err(Error::NotOneConvex {
                        worst_violation: report.worst_violation,
                    });
                }
            }
        }
        if !self.constant.is_finite() {
            return Err(Error::InvalidPotential("additive constant must be finite".into()));
        }
        Ok(())
    }

    /// ψ̂(x); +∞ outside the domain.
    pub fn evaluate(&self, x: f64) -> f64 {
        if !self.domain.contains(x) {
            return f64::INFINITY;
        }
        let base = 0.5 * x * x + self.constant;
        match &self.family {
            Family::Gaussian | Family::TruncatedGaussian => base + LN_SQRT_2PI,
            Family::PerturbedGaussian { breakpoints, slopes } => {
                base + LN_SQRT_2PI + perturbation(breakpoints, slopes, x)
            }
            Family::TabulatedConvex { points } => base + table_residual(points, x),
        }
    }

    /// Right derivative ψ̂'₊(x).
    pub fn right_derivative(&self, x: f64) -> f64 {
        match &self.family {
            Family::Gaussian | Family::TruncatedGaussian => x,
            Family::PerturbedGaussian { breakpoints, slopes } => {
                x + slopes[breakpoints.partition_point(|&b| b <= x)]
            }
            Family::TabulatedConvex { .. } => {
                let h = TABULATED_DERIVATIVE_STEP;
                if self.domain.contains(x + h) {
                    (self.evaluate(x + h) - self.evaluate(x)) / h
                } else {
                    (self.evaluate(x) - self.evaluate(x - h)) / h
                }
            }
        }
    }

    /// Decomposes ψ̂ into pieces on which ψ̂(x) − ψ_g(x) is affine.
    pub(crate) fn affine_pieces(&self) -> Vec<AffinePiece> {
        let (lo, hi) = (self.domain.lo(), self.domain.hi());
        let c = self.constant;
        match &self.family {
            Family::Gaussian | Family::TruncatedGaussian => vec![AffinePiece {
                lo,
                hi,
                slope: 0.0,
                offset: c,
            }],
            Family::PerturbedGaussian { breakpoints, slopes } => {
                let mut pieces = Vec::with_capacity(slopes.len());
                let mut edges = vec![f64::NEG_INFINITY];
                edges.extend_from_slice(breakpoints);
                edges.push(f64::INFINITY);
                for (j, w) in edges.windows(2).enumerate() {
                    let (a, b) = (w[0].max(lo), w[1].min(hi));
                    if !(a < b) {
                        continue;
                    }
                    // any point of the segment pins the intercept of h there
                    let anchor = if w[0].is_finite() {
                        w[0]
                    } else if w[1].is_finite() {
                        w[1]
                    } else {
                        0.0
                    };
                    let h_anchor = perturbation(breakpoints, slopes, anchor);
                    pieces.push(AffinePiece {
                        lo: a,
                        hi: b,
                        slope: slopes[j],
                        offset: c + h_anchor - slopes[j] * anchor,
                    });
                }
                pieces
            }
            Family::TabulatedConvex { points } => points
                .windows(2)
                .map(|w| {
                    let (x0, x1) = (w[0][0], w[1][0]);
                    let r0 = w[0][1] - 0.5 * x0 * x0;
                    let r1 = w[1][1] - 0.5 * x1 * x1;
                    let m = (r1 - r0) / (x1 - x0);
                    AffinePiece {
                        lo: x0,
                        hi: x1,
                        slope: m,
                        offset: c + r0 - m * x0 - LN_SQRT_2PI,
                    }
                })
                .collect(),
        }
    }
}

/// On `(lo, hi)`, ψ(x) = ψ_g(x) + slope·x + offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct AffinePiece {
    pub lo: f64,
    pub hi: f64,
    pub slope: f64,
    pub offset: f64,
}

/// h(x) = ∫₀ˣ s(t) dt for the step function s.
fn perturbation(breakpoints: &[f64], slopes: &[f64], x: f64) -> f64 {
    let mut h = slopes[0] * x;
    for (j, &b) in breakpoints.iter().enumerate() {
        let jump = slopes[j + 1] - slopes[j];
        h += jump * ((x - b).max(0.0) - (-b).max(0.0));
    }
    h
}

fn table_residual(points: &[[f64; 2]], x: f64) -> f64 {
    let k = points
        .partition_point(|p| p[0] <= x)
        .clamp(1, points.len() - 1);
    let (x0, x1) = (points[k - 1][0], points[k][0]);
    let r0 = points[k - 1][1] - 0.5 * x0 * x0;
    let r1 = points[k][1] - 0.5 * x1 * x1;
    r0 + (r1 - r0) * (x - x0) / (x1 - x0)
}

/// Outcome of the midpoint 1-convexity test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub pass: bool,
    pub worst_violation: f64,
    pub grid_points: usize,
}

/// Midpoint test of ψ̂((x+y)/2) ≤ (ψ̂(x)+ψ̂(y))/2 − (x−y)²/8 over all pairs of
/// a uniform grid inside the domain.
pub fn check_one_convexity(spec: &PotentialSpec, grid_points: usize) -> ConvexityReport {
    check_midpoint_convexity(|x| spec.evaluate(x), spec.domain(), grid_points)
}

/// Midpoint 1-convexity test for an arbitrary potential. An unbounded side is
/// sampled up to distance 12 from the finite end (or from the origin).
pub fn check_midpoint_convexity<F: Fn(f64) -> f64>(
    psi: F,
    domain: Interval,
    grid_points: usize,
) -> ConvexityReport {
    let n = grid_points.max(3);
    let center = match (domain.lo().is_finite(), domain.hi().is_finite()) {
        (true, false) => domain.lo(),
        (false, true) => domain.hi(),
        _ => 0.0,
    };
    let (lo, hi) = domain.clip(center, CHECK_HALF_WIDTH);
    let step = (hi - lo) / n as f64;
    let xs: Vec<f64> = (0..n).map(|i| lo + (i as f64 + 0.5) * step).collect();
    let values: Vec<f64> = xs.iter().map(|&x| psi(x)).collect();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i + 1..n {
            let (x, y) = (xs[i], xs[j]);
            let mid = psi(0.5 * (x + y));
            let excess = mid - 0.5 * (values[i] + values[j]) + 0.125 * (x - y) * (x - y);
            if excess.is_nan() {
                worst = f64::INFINITY;
            } else {
                worst = worst.max(excess);
            }
        }
    }
    ConvexityReport {
        pass: worst <= CONVEXITY_TOL,
        worst_violation: worst,
        grid_points: n,
    }
}
