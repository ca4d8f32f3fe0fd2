mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{FamilyArg, MeasureArg, RunConfig};

#[derive(Parser)]
#[command(name = "isolab", version, about = "Stability experiments for the Gaussian isoperimetric inequality on weighted intervals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every experiment; each one overrides the config file.
#[derive(Args, Debug, Default)]
struct Common {
    /// TOML run configuration; flags take precedence over its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Measure, e.g. `gaussian`, `truncated:2`, `perturbed:-0.5,0.5;-0.2,0.1,0.4`.
    #[arg(long, allow_hyphen_values = true)]
    measure: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    /// Comma-separated exponents.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Comma-separated deficits.
    #[arg(long = "delta-grid", value_delimiter = ',', num_args = 0..)]
    delta_grid: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving the JSON/CSV reports.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "tol-abs")]
    tol_abs: Option<f64>,
    #[arg(long = "tol-rel")]
    tol_rel: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Deficit, gap bounds and distances of one measure.
    Verify(Common),
    /// Sweep a family over a deficit grid and fit exponents.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `example23`, `gaussian`, `perturbed:B;S` or `needles`.
        #[arg(long, allow_hyphen_values = true)]
        family: Option<String>,
        /// Comma-separated metrics: lp, w1, w2, entropy, mixture_l1.
        #[arg(long, value_delimiter = ',')]
        metric: Option<Vec<String>>,
    },
    /// Synthetic needle ensembles across the deficit grid.
    Needles {
        #[command(flatten)]
        common: Common,
        #[arg(long = "needle-count")]
        needle_count: Option<usize>,
        #[arg(long = "bad-fraction")]
        bad_fraction: Option<f64>,
        #[arg(long = "c-threshold")]
        c_threshold: Option<f64>,
    },
    /// Truncated Gaussian: numerics against the closed forms.
    Example23 {
        #[command(flatten)]
        common: Common,
        #[arg(long = "half-width")]
        half_width: Option<f64>,
    },
    /// Runs the built-in example battery.
    Selftest {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Perturbs the named operation to prove the battery notices.
        #[arg(long = "inject-fault", hide = true)]
        inject_fault: Option<String>,
    },
}

fn merge(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &common.measure {
        cfg.measure = MeasureArg::Compact(m.clone());
    }
    if let Some(t) = common.theta {
        cfg.theta = t;
    }
    if let Some(p) = &common.p {
        cfg.p = p.clone();
    }
    if let Some(e) = common.epsilon {
        cfg.epsilon = e;
    }
    if let Some(g) = &common.delta_grid {
        cfg.delta_grid = g.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    if let Some(a) = common.tol_abs {
        cfg.tolerances.abs_tol = a;
    }
    if let Some(r) = common.tol_rel {
        cfg.tolerances.rel_tol = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The effective configuration goes next to the reports it produced.
fn recorded(cfg: RunConfig) -> Result<RunConfig> {
    if let Some(dir) = &cfg.out {
        output::write_text(dir, "config.toml", &cfg.to_toml()?)?;
    }
    Ok(cfg)
}

fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var("ISO_LAB_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .with_context(|| format!("ISO_LAB_THREADS must be a positive integer, got {raw:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Verify(common) => commands::verify::run(&recorded(merge(&common)?)?),
        Command::Sweep {
            common,
            family,
            metric,
        } => {
            let mut cfg = merge(&common)?;
            if let Some(f) = family {
                cfg.family = FamilyArg::Compact(f);
            }
            if let Some(m) = metric {
                cfg.metrics = m;
            }
            commands::sweep::run(&recorded(cfg)?)
        }
        Command::Needles {
            common,
            needle_count,
            bad_fraction,
            c_threshold,
        } => {
            let mut cfg = merge(&common)?;
            if let Some(n) = needle_count {
                cfg.needles.needle_count = n;
            }
            if bad_fraction.is_some() {
                cfg.needles.bad_fraction = bad_fraction;
            }
            if let Some(c) = c_threshold {
                cfg.needles.c_threshold = c;
            }
            commands::needles::run(&recorded(cfg)?)
        }
        Command::Example23 { common, half_width } => {
            let mut cfg = merge(&common)?;
            if let Some(d) = half_width {
                cfg.half_width = d;
            }
            commands::example23::run(&recorded(cfg)?)
        }
        Command::Selftest {
            seed,
            out,
            inject_fault,
        } => commands::selftest::run(seed.unwrap_or(0), out.as_deref(), inject_fault.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
