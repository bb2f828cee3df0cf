//! Quadrature over boxes and the derivative-free box minimizer.

mod optimize;
mod quadrature;

pub use optimize::{minimize, Minimum, MinimizeSettings, SearchRegion, StartSummary};
pub use quadrature::{gauss_legendre, QuadratureSpec};
