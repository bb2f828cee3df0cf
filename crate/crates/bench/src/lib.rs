//! Benchmark fixtures shared by the criterion targets.

use calibkit::{BoxDomain, Design};

/// Smooth test response sampled on an equispaced design of `[-1, 1]`.
pub fn sine_data(n: usize) -> (Design, Vec<f64>) {
    let domain = BoxDomain::interval(-1.0, 1.0).expect("valid interval");
    let design = Design::equispaced(&domain, n).expect("n >= 2");
    let values = design.points().iter().map(|x| (3.0 * x[0]).sin()).collect();
    (design, values)
}
