use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An open interval `(lo, hi)` of the extended real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInterval", into = "RawInterval")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || !(lo < hi) || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub const fn real_line() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Open-interval membership.
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn translate(&self, shift: f64) -> Self {
        Interval {
            lo: self.lo + shift,
            hi: self.hi + shift,
        }
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi)).ok()
    }

    /// Replaces infinite endpoints by `center ∓ cutoff`.
    pub fn clip(&self, center: f64, cutoff: f64) -> (f64, f64) {
        let lo = if self.lo.is_finite() { self.lo } else { center - cutoff };
        let hi = if self.hi.is_finite() { self.hi } else { center + cutoff };
        (lo, hi)
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

// JSON has no infinities, so unbounded ends serialize as null.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInterval {
    lo: Option<f64>,
    hi: Option<f64>,
}

impl TryFrom<RawInterval> for Interval {
    type Error = Error;
    fn try_from(raw: RawInterval) -> Result<Self> {
        Interval::new(
            raw.lo.unwrap_or(f64::NEG_INFINITY),
            raw.hi.unwrap_or(f64::INFINITY),
        )
    }
}

impl From<Interval> for RawInterval {
    fn from(i: Interval) -> Self {
        RawInterval {
            lo: i.lo.is_finite().then_some(i.lo),
            hi: i.hi.is_finite().then_some(i.hi),
        }
    }
}
