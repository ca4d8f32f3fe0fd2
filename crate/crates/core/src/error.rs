use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: got {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid interval ({lo}, {hi}): need lo < hi")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid quadrature settings: {0}")]
    InvalidSettings(String),

    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (estimate {estimate:e}, error {error:e})"
    )]
    QuadratureDiverged {
        subdivisions: usize,
        estimate: f64,
        error: f64,
    },

    #[error("root bracket ({lo}, {hi}) does not straddle a sign change: f = {f_lo:e}, {f_hi:e}")]
    InvalidBracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("potential is not integrable: {0}")]
    NonIntegrable(String),

    #[error("potential is not 1-convex (worst midpoint violation {worst_violation:e})")]
    NotOneConvex { worst_violation: f64 },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("need at least 3 positive points to fit an exponent, got {usable}")]
    TooFewPoints { usable: usize },

    #[error("could not load tabulated potential: {0}")]
    Table(String),
}

pub type Result<T> = std::result::Result<T, Error>;
