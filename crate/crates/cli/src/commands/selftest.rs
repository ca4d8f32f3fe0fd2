use std::path::Path;

use anyhow::Result;
use isolab::measure1d::{
    brute_force_minimizer, check_one_convexity, gaussian_profile, normalize, Measure1D,
    PotentialSpec, CONVEXITY_GRID, DEFAULT_GRID_STEP,
};
use isolab::needles::{aggregate_l1, generate_ensemble, shifted_gaussian_l1, EnsembleConfig, NeedleEnsemble};
use isolab::numerics::{erf, find_root, gaussian_cdf, gaussian_pdf, gaussian_quantile, integrate, Interval, QuadratureSettings};
use isolab::rates::{fit_exponent, SweepPoint};
use isolab::stability::{
    center, deficit, example23, lp_distance, relative_entropy, talagrand_check, w2_to_gaussian,
};
use serde::Serialize;

use crate::output::{write_json, Check};

#[derive(Serialize)]
struct Entry {
    module: &'static str,
    operation: &'static str,
    value: f64,
    expected: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct SelftestReport {
    seed: u64,
    entries: Vec<Entry>,
    failures: Vec<String>,
    pass: bool,
}

/// Collects results; a named operation can be perturbed on purpose.
struct Battery {
    fault: Option<String>,
    entries: Vec<Entry>,
}

impl Battery {
    fn check(&mut self, module: &'static str, operation: &'static str, value: isolab::Result<f64>, expected: f64, tolerance: f64) {
        let value = match value {
            Ok(v) if self.fault.as_deref() == Some(operation) => v + 1e-3,
            Ok(v) => v,
            Err(e) => {
                log::error!("{module}::{operation} failed: {e}");
                f64::NAN
            }
        };
        self.entries.push(Entry {
            module,
            operation,
            value,
            expected,
            tolerance,
            pass: (value - expected).abs() <= tolerance,
        });
    }

    fn flag(&mut self, module: &'static str, operation: &'static str, ok: isolab::Result<bool>) {
        let v = ok.map(|b| if b { 1.0 } else { 0.0 });
        self.check(module, operation, v, 1.0, 0.0);
    }
}

fn ensemble_json(seed: u64) -> isolab::Result<String> {
    let ens = generate_ensemble(&EnsembleConfig {
        needle_count: 8,
        theta: 0.3,
        epsilon: 0.1,
        deficit_scale: 1e-3,
        bad_fraction: Some(0.25),
        seed,
    })?;
    Ok(serde_json::to_string(&ens).expect("ensembles serialize"))
}

pub fn run(seed: u64, out: Option<&Path>, fault: Option<&str>) -> Result<bool> {
    let s = QuadratureSettings::default();
    let mut b = Battery {
        fault: fault.map(str::to_string),
        entries: Vec::new(),
    };

    b.check("numerics", "gaussian_cdf", Ok(gaussian_cdf(1.96)), 0.975_002_104_851_779_5, 1e-15);
    b.check("numerics", "gaussian_quantile", gaussian_quantile(0.975), 1.959_963_984_540_054, 1e-12);
    b.check("numerics", "erf", Ok(erf(1.0)), 0.842_700_792_949_714_9, 1e-15);
    b.check(
        "numerics",
        "integrate",
        integrate(gaussian_pdf, Interval::new(-1.0, 1.0)?, &s),
        0.682_689_492_137_085_9,
        1e-12,
    );
    b.check(
        "numerics",
        "find_root",
        find_root(|x| x * x - 2.0, Interval::new(0.0, 2.0)?, 1e-15),
        std::f64::consts::SQRT_2,
        1e-14,
    );

    let trunc = normalize(&PotentialSpec::truncated_symmetric(2.0)?)?;
    b.check("measure1d", "normalize", Ok(trunc.cdf(2.0)), 1.0, 1e-12);
    b.check("measure1d", "gaussian_profile", gaussian_profile(0.5), 0.398_942_280_401_432_7, 1e-15);
    let g = Measure1D::gaussian();
    b.check(
        "measure1d",
        "brute_force_minimizer",
        brute_force_minimizer(&g, 0.3, 2, DEFAULT_GRID_STEP).map(|r| r.perimeter),
        gaussian_profile(0.3)?,
        1e-6,
    );
    b.flag(
        "measure1d",
        "check_one_convexity",
        Ok(check_one_convexity(&PotentialSpec::gaussian(), CONVEXITY_GRID).pass),
    );

    let ex = example23(2.0)?;
    let f = ex.family;
    b.check("stability", "deficit", deficit(&ex.measure, 0.5).map(|r| r.deficit), f.deficit(), 1e-8);
    for p in [1.0, 2.0, 4.0] {
        b.check("stability", "lp_distance", lp_distance(&ex.measure, p, &s), f.lp(p), 1e-8);
    }
    b.check("stability", "relative_entropy", relative_entropy(&ex.measure, &s), f.entropy(), 1e-8);
    b.check("stability", "w2_to_gaussian", w2_to_gaussian(&g, &s).map(|t| t.value), 0.0, 1e-10);
    b.flag("stability", "talagrand_check", talagrand_check(&ex.measure, &s).map(|t| t.pass));
    b.check("stability", "center", center(&g.translate(3.0), 0.5).map(|c| c.1), -3.0, 1e-12);

    b.check("needles", "shifted_gaussian_l1", shifted_gaussian_l1(1.0, &s), 0.765_849_845_096_052_4, 1e-9);
    let all_gauss = NeedleEnsemble::new(vec![(0.5, g.clone()), (0.5, g)], 0.5, 0.1)?;
    b.check("needles", "aggregate_l1", aggregate_l1(&all_gauss, &s).map(|a| a.mixture_l1), 0.0, 1e-12);
    b.flag(
        "needles",
        "generate_ensemble",
        ensemble_json(seed).and_then(|a| ensemble_json(seed).map(|b| a == b)),
    );

    let pts: Vec<SweepPoint> = (2..=6)
        .map(|k| {
            let delta = 10f64.powi(-k);
            SweepPoint {
                delta,
                value: 3.0 * delta.powf(0.7),
            }
        })
        .collect();
    b.check("rates", "fit_exponent", fit_exponent(&pts).map(|f| f.exponent), 0.7, 1e-12);

    let failures: Vec<String> = b
        .entries
        .iter()
        .filter(|e| !e.pass)
        .map(|e| format!("{}::{}", e.module, e.operation))
        .collect();
    let pass = failures.is_empty();
    let checks: Vec<Check> = b
        .entries
        .iter()
        .map(|e| {
            Check::new(
                format!("{}::{}", e.module, e.operation),
                e.pass,
                format!("{:.12e} (expected {:.12e})", e.value, e.expected),
            )
        })
        .collect();
    crate::output::print_checks(&checks);
    if !pass {
        eprintln!("selftest failed: {}", failures.join(", "));
    }
    if let Some(dir) = out {
        write_json(
            dir,
            "selftest.json",
            &SelftestReport {
                seed,
                entries: b.entries,
                failures,
                pass,
            },
        )?;
    }
    Ok(pass)
}
