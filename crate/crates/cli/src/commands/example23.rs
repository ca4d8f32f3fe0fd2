use anyhow::Result;
use isolab::stability::{deficit, example23, lp_distance, relative_entropy, talagrand_check, w2_to_gaussian, Example23Family};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{print_checks, write_json, Check};

const TOL: f64 = 1e-8;

#[derive(Serialize)]
struct Row {
    quantity: String,
    numeric: f64,
    closed_form: f64,
    abs_error: f64,
}

#[derive(Serialize)]
struct Example23Report {
    family: Example23Family,
    rows: Vec<Row>,
    w2: f64,
    talagrand_pass: bool,
    checks: Vec<Check>,
    pass: bool,
}

/// The deficit and the closed forms are stated at θ = 1/2, whatever the
/// configured θ.
pub fn run(cfg: &RunConfig) -> Result<bool> {
    let ex = example23(cfg.half_width)?;
    let s = &cfg.tolerances;
    let f = ex.family;
    let mut rows = vec![Row::new("deficit", deficit(&ex.measure, 0.5)?.deficit, f.deficit())];
    for &p in &cfg.p {
        rows.push(Row::new(&format!("lp(p={p})"), lp_distance(&ex.measure, p, s)?, f.lp(p)));
    }
    rows.push(Row::new("entropy", relative_entropy(&ex.measure, s)?, f.entropy()));
    let w2 = w2_to_gaussian(&ex.measure, s)?.value;
    let tal = talagrand_check(&ex.measure, s)?;

    let mut checks: Vec<Check> = rows
        .iter()
        .map(|r| Check::new(r.quantity.clone(), r.abs_error <= TOL, format!("error {:.3e}", r.abs_error)))
        .collect();
    checks.push(Check::new("talagrand", tal.pass, format!("{:e} <= {:e}", tal.lhs, tal.rhs)));
    let pass = checks.iter().all(|c| c.pass);

    println!("truncated Gaussian D = {}, delta_E = {:.12e}", f.half_width, f.delta_e);
    println!("  {:<12}  {:>20}  {:>20}  {:>10}", "quantity", "numeric", "closed form", "error");
    for r in &rows {
        println!(
            "  {:<12}  {:>20.12e}  {:>20.12e}  {:>10.2e}",
            r.quantity, r.numeric, r.closed_form, r.abs_error
        );
    }
    println!("  w2 {w2:.12e}");
    print_checks(&checks);
    if let Some(dir) = &cfg.out {
        write_json(
            dir,
            "example23.json",
            &Example23Report {
                family: f,
                rows,
                w2,
                talagrand_pass: tal.pass,
                checks,
                pass,
            },
        )?;
    }
    Ok(pass)
}

impl Row {
    fn new(quantity: &str, numeric: f64, closed_form: f64) -> Self {
        Row {
            quantity: quantity.to_string(),
            numeric,
            closed_form,
            abs_error: (numeric - closed_form).abs(),
        }
    }
}
