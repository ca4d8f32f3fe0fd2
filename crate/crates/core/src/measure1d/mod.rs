//! One-dimensional weighted intervals e^{−ψ} dx with ψ − x²/2 convex: their
//! distribution functions, perimeters and the Gaussian isoperimetric profile.

mod measure;
mod perimeter;
mod potential;

pub(crate) use measure::check_probability;
pub use measure::{normalize, Measure1D};
pub use perimeter::{
    brute_force_minimizer, gaussian_profile, half_line_perimeter, perimeter, BoundarySet,
    MinimizerReport, Side, DEFAULT_GRID_STEP, GRID_TAIL,
};
pub use potential::{
    check_midpoint_convexity, check_one_convexity, ConvexityReport, Family, PotentialSpec,
    CONVEXITY_GRID, CONVEXITY_TOL, TABULATED_DERIVATIVE_STEP,
};
