//! Kernel interpolation, Nyström eigensystems and calibration estimators for
//! computer models.

pub mod error;
pub mod expression;
pub mod kernels;
pub mod design;
pub mod numerics;
pub mod interpolate;
pub mod operator;
pub mod calibrate;
pub mod example1;
pub mod manifest;
pub mod rates;

pub use design::{BoxDomain, Design};
pub use error::{Error, GramDiagnostics, Result};
pub use expression::Expression;
pub use interpolate::{GramFactor, Interpolator, InterpolatorRecord, NuggetPolicy};
pub use kernels::{Kernel, KernelFamily, KernelSpec, Smoothness};
pub use numerics::{gauss_legendre, minimize, MinimizeSettings, Minimum, QuadratureSpec, SearchRegion, StartSummary};
pub use operator::{nystrom_eig, EigenSystem};
pub use calibrate::{
    ko_calibrate, ko_profile_calibrate, l2_calibrate, l2_projection, modified_ko_calibrate, ols_calibrate,
    CalibrationProblem, CalibrationResult, CalibrationSettings, Diagnostics, Method, ProfileOutcome, Schedule, Simulator,
    Surrogate,
};
pub use example1::Example1;
pub use manifest::{LoadedManifest, Manifest, MethodOutput, PhiGrid};
pub use rates::{loglog_slope, run_rates, RateReport};
