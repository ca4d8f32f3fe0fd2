//! Numerical kernels shared by every other module: Gaussian special
//! functions, adaptive quadrature and bracketed root finding.

mod interval;
pub mod quadrature;
pub mod roots;
pub mod special;

pub use interval::Interval;
pub use quadrature::{integrate, integrate_pieces, Quadrature, QuadratureSettings};
pub use roots::find_root;
pub use special::{
    erf, erfc, gaussian_cdf, gaussian_pdf, gaussian_potential, gaussian_quantile,
    gaussian_quantile_upper, gaussian_sf,
};
