use anyhow::{bail, Result};
use isolab::needles::kappa;
use isolab::rates::{summary_json, sweep, write_csv, write_plot_data, Metric, SweepFamily, SweepResult};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{fmt, print_checks, write_json, write_text, Check};

/// Accepted exponent range for a metric on a family; `None` means no
/// claim is made about that combination.
fn band(metric: Metric, family: &SweepFamily, epsilon: f64, tol: f64) -> Option<(f64, f64)> {
    let sharp = matches!(family, SweepFamily::Example23);
    match (metric, family) {
        (_, SweepFamily::Gaussian) => None,
        (Metric::MixtureL1, SweepFamily::Needles { .. }) => Some((kappa(epsilon) - tol, f64::INFINITY)),
        (Metric::Lp { p }, _) => Some((1.0 / p - tol, if sharp { 1.0 / p + tol } else { f64::INFINITY })),
        (Metric::MixtureL1, _) => Some((1.0 - tol, if sharp { 1.0 + tol } else { f64::INFINITY })),
        (Metric::W2 | Metric::W1, _) => Some((0.5 - tol, f64::INFINITY)),
        (Metric::Entropy, _) => None,
    }
}

fn metrics(cfg: &RunConfig) -> Result<Vec<Metric>> {
    let mut out = Vec::new();
    for name in &cfg.metrics {
        match name.trim() {
            "lp" => out.extend(cfg.p.iter().map(|&p| Metric::Lp { p })),
            "w1" => out.push(Metric::W1),
            "w2" => out.push(Metric::W2),
            "entropy" => out.push(Metric::Entropy),
            "mixture_l1" => out.push(Metric::MixtureL1),
            other => bail!("unknown metric {other:?}"),
        }
    }
    if out.is_empty() {
        bail!("no metric selected");
    }
    Ok(out)
}

fn file_stem(metric: Metric) -> String {
    match metric {
        Metric::Lp { p } => format!("sweep_lp{p}"),
        other => format!("sweep_{other}"),
    }
}

#[derive(Serialize)]
struct SweepReport<'a> {
    family: &'a SweepFamily,
    results: &'a [SweepResult],
    checks: &'a [Check],
    pass: bool,
}

pub fn run(cfg: &RunConfig) -> Result<bool> {
    if cfg.delta_grid.is_empty() {
        bail!("the delta grid is empty");
    }
    let family = cfg.family.resolve(cfg)?;
    let metrics = metrics(cfg)?;
    let mut results = Vec::new();
    let mut checks = Vec::new();
    for metric in metrics {
        let r = sweep(&family, cfg.theta, metric, &cfg.delta_grid, &cfg.tolerances)?;
        println!("sweep {metric} (theta = {})", cfg.theta);
        println!("  {:>12}  {:>18}", "delta", "value");
        for p in &r.points {
            println!("  {:>12.4e}  {:>18}", p.delta, fmt(p.value));
        }
        for d in &r.skipped {
            println!("  {d:>12.4e}  {:>18}", "skipped");
        }
        match (r.fitted_exponent, band(metric, &family, cfg.epsilon, cfg.band_tolerance)) {
            (Some(alpha), Some((lo, hi))) => checks.push(Check::new(
                format!("exponent {metric}"),
                alpha >= lo && alpha <= hi,
                format!("alpha {alpha:.4} in [{lo:.4}, {hi:.4}] (r^2 {:.6})", r.r_squared.unwrap_or(f64::NAN)),
            )),
            (Some(alpha), None) => println!("  alpha {alpha:.4} (no band)"),
            (None, Some(_)) if r.points.iter().any(|p| p.value > 0.0) => checks.push(Check::new(
                format!("exponent {metric}"),
                false,
                "too few positive points to fit",
            )),
            (None, _) => println!("  fit skipped"),
        }
        results.push(r);
    }
    print_checks(&checks);
    let pass = checks.iter().all(|c| c.pass);
    if let Some(dir) = &cfg.out {
        for r in &results {
            let stem = file_stem(r.metric);
            std::fs::create_dir_all(dir)?;
            write_csv(r, &dir.join(format!("{stem}.csv")))?;
            write_plot_data(r, &dir.join(format!("{stem}.dat")))?;
            write_text(dir, &format!("{stem}.json"), &(summary_json(r) + "\n"))?;
        }
        write_json(
            dir,
            "sweep.json",
            &SweepReport {
                family: &family,
                results: &results,
                checks: &checks,
                pass,
            },
        )?;
    }
    Ok(pass)
}
