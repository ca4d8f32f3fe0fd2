use anyhow::Result;
use isolab::measure1d::{check_one_convexity, normalize, ConvexityReport, Family, PotentialSpec, CONVEXITY_GRID};
use isolab::numerics::Interval;
use isolab::stability::{
    center, check_gap_bounds, default_window, deficit, lp_distance, relative_entropy,
    talagrand_check, w1_dual_bound, w1_to_gaussian, w2_to_gaussian, DeficitReport,
    Example23Family, TalagrandReport, Transport,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{fmt, print_checks, print_table, write_json, Check};

/// Agreement required between numerics and the truncated-Gaussian closed forms.
const REFERENCE_TOL: f64 = 1e-8;

#[derive(Serialize)]
struct GapBounds {
    slope_gap: f64,
    window: Interval,
    fitted_lower_constant: f64,
    fitted_upper_constant: f64,
    equality_case: bool,
}

#[derive(Serialize)]
struct LpValue {
    p: f64,
    value: f64,
}

#[derive(Serialize)]
struct Reference {
    half_width: f64,
    delta_e: f64,
    deficit: f64,
    lp: Vec<LpValue>,
    entropy: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    measure: PotentialSpec,
    theta: f64,
    convexity: ConvexityReport,
    deficit: Option<DeficitReport>,
    gap_bounds: Option<GapBounds>,
    lp: Vec<LpValue>,
    w1: Option<Transport>,
    w2: Option<Transport>,
    w1_dual_bound: Option<f64>,
    entropy: Option<f64>,
    talagrand: Option<TalagrandReport>,
    reference: Option<Reference>,
    checks: Vec<Check>,
    errors: Vec<String>,
    pass: bool,
}

/// Closed forms apply to symmetric truncations at the median.
fn reference_for(spec: &PotentialSpec, theta: f64, ps: &[f64]) -> Option<Reference> {
    let dom = spec.domain();
    if !matches!(spec.family(), Family::TruncatedGaussian) || theta != 0.5 || dom.lo() != -dom.hi() {
        return None;
    }
    let f = Example23Family::new(dom.hi()).ok()?;
    Some(Reference {
        half_width: f.half_width,
        delta_e: f.delta_e,
        deficit: f.deficit(),
        lp: ps.iter().map(|&p| LpValue { p, value: f.lp(p) }).collect(),
        entropy: f.entropy(),
    })
}

fn keep<T>(errors: &mut Vec<String>, what: &str, r: isolab::Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("{what}: {e}"));
            None
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<bool> {
    let spec = cfg.measure.resolve()?;
    let theta = cfg.theta;
    let s = &cfg.tolerances;
    let m = normalize(&spec)?;
    let (centered, _) = center(&m, theta)?;
    let mut errors = Vec::new();
    let mut checks = Vec::new();

    let convexity = check_one_convexity(&spec, CONVEXITY_GRID);
    checks.push(Check::new(
        "one_convexity",
        convexity.pass,
        format!("worst violation {:e}", convexity.worst_violation),
    ));

    let def = keep(&mut errors, "deficit", deficit(&m, theta));
    if let Some(d) = &def {
        checks.push(Check::new(
            "deficit_nonnegative",
            d.deficit >= -1e-10,
            format!("deficit {:e}", d.deficit),
        ));
    }

    let gap_bounds = def.as_ref().and_then(|d| {
        let window = keep(&mut errors, "default_window", default_window(&m, theta, d.deficit))?;
        let r = keep(&mut errors, "check_gap_bounds", check_gap_bounds(&m, theta, window, cfg.samples))?;
        Some(GapBounds {
            slope_gap: r.slope_gap,
            window: r.window,
            fitted_lower_constant: r.fitted_lower_constant,
            fitted_upper_constant: r.fitted_upper_constant,
            equality_case: r.equality_case,
        })
    });
    if let Some(g) = &gap_bounds {
        checks.push(Check::new(
            "gap_bounds_finite",
            g.fitted_lower_constant.is_finite() && g.fitted_upper_constant.is_finite(),
            format!("c_low {:e}, c_up {:e}", g.fitted_lower_constant, g.fitted_upper_constant),
        ));
    }

    let mut ps = cfg.p.clone();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let lp: Vec<LpValue> = ps
        .iter()
        .filter_map(|&p| {
            keep(&mut errors, &format!("lp_distance(p={p})"), lp_distance(&centered, p, s))
                .map(|value| LpValue { p, value })
        })
        .collect();
    checks.push(Check::new(
        "lp_monotone_in_p",
        lp.windows(2).all(|w| w[0].value <= w[1].value + 1e-10),
        format!("{} exponents", lp.len()),
    ));

    let w1 = keep(&mut errors, "w1_to_gaussian", w1_to_gaussian(&centered, s));
    let w2 = keep(&mut errors, "w2_to_gaussian", w2_to_gaussian(&centered, s));
    let dual = keep(&mut errors, "w1_dual_bound", w1_dual_bound(&centered, theta, s));
    let entropy = keep(&mut errors, "relative_entropy", relative_entropy(&centered, s));
    let talagrand = keep(&mut errors, "talagrand_check", talagrand_check(&centered, s));
    if let (Some(a), Some(b)) = (&w1, &w2) {
        checks.push(Check::new(
            "w1_le_w2",
            a.value <= b.value + a.error_bound + b.error_bound + 1e-10,
            format!("{:e} <= {:e}", a.value, b.value),
        ));
    }
    if let (Some(a), Some(d)) = (&w1, dual) {
        checks.push(Check::new(
            "w1_le_dual_bound",
            a.value <= d + a.error_bound + 1e-8,
            format!("{:e} <= {d:e}", a.value),
        ));
    }
    if let Some(t) = &talagrand {
        checks.push(Check::new(
            "talagrand",
            t.pass,
            format!("W2^2 {:e} <= 2 Ent {:e}", t.lhs, t.rhs),
        ));
    }

    let reference = reference_for(&spec, theta, &ps);
    if let Some(r) = &reference {
        if let Some(d) = &def {
            checks.push(Check::new(
                "reference_deficit",
                (d.deficit - r.deficit).abs() <= REFERENCE_TOL,
                format!("{:e} vs {:e}", d.deficit, r.deficit),
            ));
        }
        for (got, want) in lp.iter().zip(&r.lp) {
            checks.push(Check::new(
                format!("reference_lp(p={})", got.p),
                (got.value - want.value).abs() <= REFERENCE_TOL,
                format!("{:e} vs {:e}", got.value, want.value),
            ));
        }
        if let Some(e) = entropy {
            checks.push(Check::new(
                "reference_entropy",
                (e - r.entropy).abs() <= REFERENCE_TOL,
                format!("{e:e} vs {:e}", r.entropy),
            ));
        }
    }

    let pass = errors.is_empty() && checks.iter().all(|c| c.pass);
    let report = VerifyReport {
        measure: spec,
        theta,
        convexity,
        deficit: def,
        gap_bounds,
        lp,
        w1,
        w2,
        w1_dual_bound: dual,
        entropy,
        talagrand,
        reference,
        checks,
        errors,
        pass,
    };

    let mut rows = vec![("theta".to_string(), theta.to_string())];
    if let Some(d) = &report.deficit {
        rows.push(("deficit".into(), fmt(d.deficit)));
    }
    for v in &report.lp {
        rows.push((format!("lp(p={})", v.p), fmt(v.value)));
    }
    if let Some(t) = &report.w1 {
        rows.push(("w1".into(), fmt(t.value)));
    }
    if let Some(t) = &report.w2 {
        rows.push(("w2".into(), fmt(t.value)));
    }
    if let Some(e) = report.entropy {
        rows.push(("entropy".into(), fmt(e)));
    }
    print_table("verify", &rows);
    print_checks(&report.checks);
    for e in &report.errors {
        println!("  [ERROR] {e}");
    }
    if let Some(dir) = &cfg.out {
        write_json(dir, "verify.json", &report)?;
    }
    Ok(pass)
}
