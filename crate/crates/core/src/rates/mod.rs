//! Deficit sweeps and log-log power-law fits.
//!
//! A [`SweepFamily`] turns a target deficit δ into a centered measure (or a
//! needle ensemble) by solving for its shape parameter; [`sweep`] evaluates
//! one [`Metric`] at every grid point and [`fit_exponent`] fits
//! `value ≈ e^c·δ^α` by least squares on the logarithms.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure1d::{normalize, Measure1D, PotentialSpec};
use crate::needles::{aggregate_l1, generate_ensemble, EnsembleConfig};
use crate::numerics::{find_root, Interval, QuadratureSettings};
use crate::stability::{
    center, deficit, example23_half_width, lp_distance, relative_entropy, w1_to_gaussian,
    w2_to_gaussian,
};

/// Relative tolerance on the deficit actually reached at a grid point.
pub const DEFICIT_MATCH_TOL: f64 = 0.05;

/// Metric values at or below this are quadrature noise and recorded as 0.
pub const VALUE_FLOOR: f64 = 1e-13;

/// Nine log-spaced deficits from 10⁻² down to 10⁻⁶.
pub fn default_delta_grid() -> Vec<f64> {
    (0..9).map(|k| 10f64.powf(-2.0 - 0.5 * k as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepFamily {
    /// Gaussians truncated to (−D, D), D solved from δ.
    Example23,
    /// ψ_g + λ·(piecewise-linear perturbation), λ solved from δ.
    Perturbed {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
    },
    /// The standard Gaussian at every grid point.
    Gaussian,
    /// Canonical needle ensembles with good-needle deficit δ.
    Needles {
        needle_count: usize,
        epsilon: f64,
        seed: u64,
        #[serde(default)]
        bad_fraction: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Metric {
    Lp { p: f64 },
    W1,
    W2,
    Entropy,
    MixtureL1,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Lp { p } => write!(f, "lp({p})"),
            Metric::W1 => f.write_str("w1"),
            Metric::W2 => f.write_str("w2"),
            Metric::Entropy => f.write_str("entropy"),
            Metric::MixtureL1 => f.write_str("mixture_l1"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub delta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub exponent: f64,
    pub log_constant: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub metric: Metric,
    pub theta: f64,
    /// Sorted by decreasing δ.
    pub points: Vec<SweepPoint>,
    /// Grid deficits whose parameter solve or metric failed.
    pub skipped: Vec<f64>,
    /// Absent when fewer than three values are positive.
    pub fitted_exponent: Option<f64>,
    pub fitted_log_constant: Option<f64>,
    pub r_squared: Option<f64>,
}

/// A single measure of the family with deficit δ at θ, centered, together
/// with the solved shape parameter.
pub fn family_measure(family: &SweepFamily, theta: f64, delta: f64) -> Result<(Measure1D, f64)> {
    match family {
        SweepFamily::Gaussian => Ok((Measure1D::gaussian(), 0.0)),
        SweepFamily::Example23 => {
            let d = if theta == 0.5 {
                example23_half_width(delta)?
            } else {
                solve_scale(|w| truncated(w.recip()), theta, delta)?.recip()
            };
            let (m, _) = center(&truncated(d)?, theta)?;
            Ok((m, d))
        }
        SweepFamily::Perturbed { breakpoints, slopes } => {
            let shape = |lambda: f64| {
                let scaled = slopes.iter().map(|s| lambda * s).collect();
                normalize(&PotentialSpec::perturbed(breakpoints.clone(), scaled)?)
            };
            let lambda = solve_scale(shape, theta, delta)?;
            let (m, _) = center(&shape(lambda)?, theta)?;
            Ok((m, lambda))
        }
        SweepFamily::Needles { .. } => Err(Error::InvalidSettings(
            "a needle family yields an ensemble, not a single measure".into(),
        )),
    }
}

fn truncated(half_width: f64) -> Result<Measure1D> {
    normalize(&PotentialSpec::truncated_symmetric(half_width)?)
}

/// Parameter t > 0 with deficit(shape(t), θ) = δ, assuming the deficit
/// grows with t; bracketed by doubling from t = 10⁻³.
fn solve_scale<F: Fn(f64) -> Result<Measure1D>>(shape: F, theta: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain {
            what: "target deficit must be positive",
            value: delta,
        });
    }
    let gap = |t: f64| match shape(t).and_then(|m| deficit(&m, theta)) {
        Ok(r) if r.deficit > 0.0 => r.deficit.ln() - delta.ln(),
        Ok(_) => f64::NEG_INFINITY,
        Err(_) => f64::NAN,
    };
    let mut hi = 1e-3;
    while !(gap(hi) >= 0.0) {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::Infeasible(format!("deficit {delta:e} is out of reach")));
        }
    }
    let mut lo = 0.5 * hi;
    while !(gap(lo) <= 0.0) {
        lo *= 0.5;
        if lo < 1e-14 {
            return Err(Error::Infeasible(format!("deficit {delta:e} is below reach")));
        }
    }
    find_root(gap, Interval::new(lo, hi)?, 1e-14)
}

fn evaluate(
    family: &SweepFamily,
    theta: f64,
    metric: Metric,
    delta: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    if let SweepFamily::Needles {
        needle_count,
        epsilon,
        seed,
        bad_fraction,
    } = family
    {
        if metric != Metric::MixtureL1 {
            return Err(Error::InvalidSettings(format!(
                "metric {metric} is undefined on a needle ensemble"
            )));
        }
        let ens = generate_ensemble(&EnsembleConfig {
            needle_count: *needle_count,
            theta,
            epsilon: *epsilon,
            deficit_scale: delta,
            bad_fraction: *bad_fraction,
            seed: *seed,
        })?;
        return Ok(aggregate_l1(&ens, settings)?.mixture_l1);
    }
    let (m, _) = family_measure(family, theta, delta)?;
    if *family != SweepFamily::Gaussian {
        let reached = deficit(&m, theta)?.deficit;
        if ((reached - delta) / delta).abs() > DEFICIT_MATCH_TOL {
            return Err(Error::Infeasible(format!(
                "reached deficit {reached:e} instead of {delta:e}"
            )));
        }
    }
    match metric {
        Metric::Lp { p } => lp_distance(&m, p, settings),
        Metric::MixtureL1 => lp_distance(&m, 1.0, settings),
        Metric::W1 => w1_to_gaussian(&m, settings).map(|t| t.value),
        Metric::W2 => w2_to_gaussian(&m, settings).map(|t| t.value),
        Metric::Entropy => relative_entropy(&m, settings),
    }
}

fn validate_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::InvalidSettings("the delta grid is empty".into()));
    }
    if let Some(&bad) = grid.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(Error::Domain {
            what: "grid deficits must be positive and finite",
            value: bad,
        });
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidSettings("the delta grid repeats a value".into()));
    }
    Ok(sorted)
}

/// Evaluates `metric` on the family at every grid deficit. Points whose
/// parameter solve fails are logged and listed in `skipped`.
pub fn sweep(
    family: &SweepFamily,
    theta: f64,
    metric: Metric,
    grid: &[f64],
    settings: &QuadratureSettings,
) -> Result<SweepResult> {
    crate::measure1d::check_probability(theta)?;
    if let Metric::Lp { p } = metric {
        if !(1.0..=crate::stability::MAX_P).contains(&p) {
            return Err(Error::Domain {
                what: "p must lie in [1, 64]",
                value: p,
            });
        }
    }
    let grid = validate_grid(grid)?;
    let outcomes: Vec<(f64, Result<f64>)> = grid
        .par_iter()
        .map(|&d| (d, evaluate(family, theta, metric, d, settings)))
        .collect();
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for (delta, outcome) in outcomes {
        match outcome {
            Ok(value) => points.push(SweepPoint {
                delta,
                value: if value > VALUE_FLOOR { value } else { 0.0 },
            }),
            Err(e) => {
                log::warn!("skipping delta = {delta:e}: {e}");
                skipped.push(delta);
            }
        }
    }
    let fit = match fit_exponent(&points) {
        Ok(f) => Some(f),
        Err(e) => {
            log::info!("no exponent fit for {metric}: {e}");
            None
        }
    };
    Ok(SweepResult {
        metric,
        theta,
        points,
        skipped,
        fitted_exponent: fit.map(|f| f.exponent),
        fitted_log_constant: fit.map(|f| f.log_constant),
        r_squared: fit.map(|f| f.r_squared),
    })
}

/// Least squares for ln value = α·ln δ + c over the points with value > 0.
pub fn fit_exponent(points: &[SweepPoint]) -> Result<Fit> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.value > 0.0 && p.delta > 0.0 && p.value.is_finite())
        .map(|p| (p.delta.ln(), p.value.ln()))
        .collect();
    if xy.len() < 3 {
        return Err(Error::TooFewPoints { usable: xy.len() });
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewPoints { usable: 1 });
    }
    let exponent = sxy / sxx;
    let log_constant = my - exponent * mx;
    let ss_res: f64 = xy
        .iter()
        .map(|p| (p.1 - exponent * p.0 - log_constant).powi(2))
        .sum();
    let ss_tot: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(Fit {
        exponent,
        log_constant,
        r_squared,
    })
}

/// `delta,value` rows with a fixed header.
pub fn write_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Table(e.to_string()))?;
    w.write_record(["delta", "value"])
        .map_err(|e| Error::Table(e.to_string()))?;
    for p in &result.points {
        w.write_record([format!("{:e}", p.delta), format!("{:e}", p.value)])
            .map_err(|e| Error::Table(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Table(e.to_string()))
}

#[derive(Serialize)]
struct Summary<'a> {
    metric: String,
    theta: f64,
    alpha: Option<f64>,
    c: Option<f64>,
    r_squared: Option<f64>,
    points: usize,
    skipped: &'a [f64],
}

/// JSON object with keys `metric, theta, alpha, c, r_squared, points, skipped`.
pub fn summary_json(result: &SweepResult) -> String {
    serde_json::to_string_pretty(&Summary {
        metric: result.metric.to_string(),
        theta: result.theta,
        alpha: result.fitted_exponent,
        c: result.fitted_log_constant,
        r_squared: result.r_squared,
        points: result.points.len(),
        skipped: &result.skipped,
    })
    .expect("summary fields serialize")
}

/// Whitespace-separated `delta value` lines after a `#` header.
pub fn write_plot_data(result: &SweepResult, path: &Path) -> Result<()> {
    let io = |e: std::io::Error| Error::Table(e.to_string());
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(f, "# delta {}", result.metric).map_err(io)?;
    for p in &result.points {
        writeln!(f, "{:e} {:e}", p.delta, p.value).map_err(io)?;
    }
    f.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::Example23Family;
    use proptest::prelude::*;

    fn s() -> QuadratureSettings {
        QuadratureSettings::default()
    }

    fn power_law(k: f64, alpha: f64, grid: &[f64]) -> Vec<SweepPoint> {
        grid.iter()
            .map(|&d| SweepPoint {
                delta: d,
                value: k * d.powf(alpha),
            })
            .collect()
    }

    #[test]
    fn default_grid_shape() {
        let g = default_delta_grid();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], 1e-2);
        assert!((g[8] / 1e-6 - 1.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn exact_power_law() {
        let f = fit_exponent(&power_law(3.0, 0.7, &default_delta_grid())).unwrap();
        assert!((f.exponent - 0.7).abs() < 1e-12);
        assert!((f.log_constant - 3f64.ln()).abs() < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let pts = power_law(1.0, 0.5, &[1e-2, 1e-3]);
        assert!(matches!(
            fit_exponent(&pts),
            Err(Error::TooFewPoints { usable: 2 })
        ));
        let mut pts = power_law(1.0, 0.5, &[1e-2, 1e-3, 1e-4]);
        pts[1].value = 0.0;
        assert!(fit_exponent(&pts).is_err());
    }

    #[test]
    fn example23_lp2_is_root_delta_e() {
        let grid = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
        let r = sweep(&SweepFamily::Example23, 0.5, Metric::Lp { p: 2.0 }, &grid, &s()).unwrap();
        assert_eq!(r.points.len(), 5);
        for p in &r.points {
            let d = example23_half_width(p.delta).unwrap();
            let want = Example23Family::new(d).unwrap().delta_e.sqrt();
            assert!((p.value - want).abs() < 1e-9 * want.max(1e-3), "{p:?}");
        }
        assert!((r.fitted_exponent.unwrap() - 0.5).abs() < 0.05);
    }

    #[test]
    fn gaussian_family_skips_fit() {
        let r = sweep(&SweepFamily::Gaussian, 0.3, Metric::W2, &default_delta_grid(), &s()).unwrap();
        assert!(r.points.iter().all(|p| p.value < 1e-10));
        assert!(r.fitted_exponent.is_none());
    }

    #[test]
    fn truncated_w2_decreases() {
        let grid = [1e-2, 1e-3, 1e-4];
        let r = sweep(&SweepFamily::Example23, 0.5, Metric::W2, &grid, &s()).unwrap();
        assert!(r.points.windows(2).all(|w| w[0].value > w[1].value && w[1].value > 0.0));
    }

    #[test]
    fn off_center_theta_still_matches_deficit() {
        for fam in [
            SweepFamily::Example23,
            SweepFamily::Perturbed {
                breakpoints: vec![-0.5, 0.7],
                slopes: vec![-0.3, 0.2, 0.6],
            },
        ] {
            for delta in [1e-3, 1e-5] {
                let (m, _) = family_measure(&fam, 0.3, delta).unwrap();
                let got = deficit(&m, 0.3).unwrap().deficit;
                assert!((got / delta - 1.0).abs() < 1e-6, "{fam:?} {delta}");
            }
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(sweep(&SweepFamily::Example23, 0.5, Metric::W1, &[], &s()).is_err());
        assert!(sweep(&SweepFamily::Example23, 0.5, Metric::W1, &[1e-3, -1.0], &s()).is_err());
        assert!(sweep(&SweepFamily::Example23, 1.5, Metric::W1, &[1e-3], &s()).is_err());
        assert!(sweep(&SweepFamily::Example23, 0.5, Metric::Lp { p: 0.5 }, &[1e-3], &s()).is_err());
        let needles = SweepFamily::Needles {
            needle_count: 4,
            epsilon: 0.1,
            seed: 1,
            bad_fraction: None,
        };
        let r = sweep(&needles, 0.5, Metric::W1, &[1e-3], &s()).unwrap();
        assert_eq!(r.skipped, vec![1e-3]);
    }

    #[test]
    fn files_have_fixed_headers() {
        let dir = std::env::temp_dir().join(format!("isolab-rates-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let r = SweepResult {
            metric: Metric::W1,
            theta: 0.5,
            points: power_law(2.0, 1.0, &[1e-2, 1e-3, 1e-4]),
            skipped: vec![],
            fitted_exponent: Some(1.0),
            fitted_log_constant: Some(2f64.ln()),
            r_squared: Some(1.0),
        };
        write_csv(&r, &dir.join("s.csv")).unwrap();
        write_plot_data(&r, &dir.join("s.dat")).unwrap();
        let csv = std::fs::read_to_string(dir.join("s.csv")).unwrap();
        assert!(csv.starts_with("delta,value\n"));
        assert_eq!(csv.lines().count(), 4);
        let dat = std::fs::read_to_string(dir.join("s.dat")).unwrap();
        assert_eq!(dat.lines().nth(1).unwrap().split(' ').count(), 2);
        let json: serde_json::Value = serde_json::from_str(&summary_json(&r)).unwrap();
        assert_eq!(json["alpha"], 1.0);
        std::fs::remove_dir_all(dir).ok();
    }

    proptest! {
        #[test]
        fn fit_ignores_scale_and_order(
            alpha in 0.05f64..2.0,
            k in 1e-3f64..1e3,
            scale in 1e-3f64..1e3,
        ) {
            let grid = default_delta_grid();
            let pts = power_law(k, alpha, &grid);
            let base = fit_exponent(&pts).unwrap();
            let scaled: Vec<_> = pts.iter().map(|p| SweepPoint { value: p.value * scale, ..*p }).collect();
            let f = fit_exponent(&scaled).unwrap();
            prop_assert!((f.exponent - base.exponent).abs() < 1e-10);
            prop_assert!((f.log_constant - base.log_constant - scale.ln()).abs() < 1e-9);
            let rev: Vec<_> = pts.iter().rev().copied().collect();
            let r = fit_exponent(&rev).unwrap();
            prop_assert!((r.exponent - base.exponent).abs() < 1e-12);
        }
    }
}
