use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use isolab::measure1d::PotentialSpec;
use isolab::needles::DEFAULT_C_THRESHOLD;
use isolab::numerics::{Interval, QuadratureSettings};
use isolab::rates::{default_delta_grid, SweepFamily};
use serde::{Deserialize, Serialize};

/// A measure given either in the compact flag syntax or as a full record.
///
/// Compact forms: `gaussian`, `truncated:D`, `truncated:LO,HI`,
/// `perturbed:B1,B2;S0,S1,S2`, `tabulated:PATH.csv`, `file:PATH.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureArg {
    Compact(String),
    Spec(PotentialSpec),
}

impl Default for MeasureArg {
    fn default() -> Self {
        MeasureArg::Compact("gaussian".into())
    }
}

impl MeasureArg {
    pub fn resolve(&self) -> Result<PotentialSpec> {
        match self {
            MeasureArg::Spec(s) => {
                s.validate()?;
                Ok(s.clone())
            }
            MeasureArg::Compact(text) => parse_measure(text),
        }
    }
}

fn numbers(text: &str) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("not a number: {t:?}"))
        })
        .collect()
}

pub fn parse_measure(text: &str) -> Result<PotentialSpec> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    let spec = match kind.trim() {
        "gaussian" => PotentialSpec::gaussian(),
        "truncated" => match numbers(rest)?.as_slice() {
            [d] => PotentialSpec::truncated_symmetric(*d)?,
            [lo, hi] => PotentialSpec::truncated(Interval::new(*lo, *hi)?)?,
            _ => bail!("truncated takes D or LO,HI: {text:?}"),
        },
        "perturbed" => {
            let Some((b, s)) = rest.split_once(';') else {
                bail!("perturbed takes BREAKPOINTS;SLOPES: {text:?}");
            };
            PotentialSpec::perturbed(numbers(b)?, numbers(s)?)?
        }
        "tabulated" => PotentialSpec::from_csv(Path::new(rest))?,
        "file" => {
            let raw = std::fs::read_to_string(rest)
                .with_context(|| format!("reading measure file {rest}"))?;
            let spec: PotentialSpec = serde_json::from_str(&raw)
                .with_context(|| format!("parsing measure file {rest}"))?;
            spec.validate()?;
            spec
        }
        other => bail!("unknown measure kind {other:?}"),
    };
    Ok(spec)
}

/// A sweep family in compact form (`example23`, `gaussian`,
/// `perturbed:B;S`, `needles`) or as a full record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilyArg {
    Compact(String),
    Spec(SweepFamily),
}

impl Default for FamilyArg {
    fn default() -> Self {
        FamilyArg::Compact("example23".into())
    }
}

impl FamilyArg {
    pub fn resolve(&self, cfg: &RunConfig) -> Result<SweepFamily> {
        let text = match self {
            FamilyArg::Spec(f) => return Ok(f.clone()),
            FamilyArg::Compact(t) => t,
        };
        let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
        Ok(match kind.trim() {
            "example23" => SweepFamily::Example23,
            "gaussian" => SweepFamily::Gaussian,
            "perturbed" => {
                let Some((b, s)) = rest.split_once(';') else {
                    bail!("perturbed takes BREAKPOINTS;SLOPES: {text:?}");
                };
                SweepFamily::Perturbed {
                    breakpoints: numbers(b)?,
                    slopes: numbers(s)?,
                }
            }
            "needles" => SweepFamily::Needles {
                needle_count: cfg.needles.needle_count,
                epsilon: cfg.epsilon,
                seed: cfg.seed,
                bad_fraction: cfg.needles.bad_fraction,
            },
            other => bail!("unknown sweep family {other:?}"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeedleArgs {
    pub needle_count: usize,
    /// Defaults to δ^κ per grid point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bad_fraction: Option<f64>,
    pub c_threshold: f64,
}

impl Default for NeedleArgs {
    fn default() -> Self {
        NeedleArgs {
            needle_count: 100,
            bad_fraction: None,
            c_threshold: DEFAULT_C_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub measure: MeasureArg,
    pub family: FamilyArg,
    /// Any of `lp`, `w1`, `w2`, `entropy`, `mixture_l1`; `lp` runs once per p.
    pub metrics: Vec<String>,
    pub theta: f64,
    pub p: Vec<f64>,
    pub epsilon: f64,
    pub delta_grid: Vec<f64>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub tolerances: QuadratureSettings,
    /// Half-width D for the `example23` command.
    pub half_width: f64,
    /// Slack allowed around each fitted-exponent target.
    pub band_tolerance: f64,
    /// Sample count for the pointwise gap bounds.
    pub samples: usize,
    pub needles: NeedleArgs,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            measure: MeasureArg::default(),
            family: FamilyArg::default(),
            metrics: vec!["lp".into()],
            theta: 0.5,
            p: vec![1.0, 2.0, 4.0],
            epsilon: 0.1,
            delta_grid: default_delta_grid(),
            seed: 0,
            out: None,
            tolerances: QuadratureSettings::default(),
            half_width: 2.0,
            band_tolerance: 0.05,
            samples: 2000,
            needles: NeedleArgs::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&raw).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            bail!("theta out of range (0, 1): {}", self.theta);
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            bail!("epsilon out of range (0, 1): {}", self.epsilon);
        }
        if let Some(p) = self.p.iter().find(|p| !(**p >= 1.0 && **p <= 64.0)) {
            bail!("p out of range [1, 64]: {p}");
        }
        self.tolerances.validate()?;
        Ok(())
    }
}
