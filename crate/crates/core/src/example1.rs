//! Three-candidate calibration problem on `[-1, 1]` with a Gaussian kernel.
//!
//! The physical response is identically zero and candidate `k` has
//! discrepancy `eps_k`: the first two are the leading eigenfunctions of the
//! Gaussian integral operator scaled to L2 norm `sqrt(20)`, the third is
//! `sin(2 pi x)` with unit norm. KO ranks the candidates by native norm and
//! picks the first; the L2 projection picks the third.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::calibrate::{response_fn, CalibrationProblem, ResponseFn, Simulator};
use crate::design::{BoxDomain, Design};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::numerics::SearchRegion;
use crate::operator::{nystrom_eig, EigenSystem};

pub const SCALE_SQ: f64 = 20.0;
pub const DEFAULT_QUAD_ORDER: usize = 128;
pub const MODES: usize = 5;

#[derive(Debug, Clone)]
pub struct Example1 {
    eig: Arc<EigenSystem<KernelSpec>>,
}

impl Example1 {
    pub fn new(quad_order: usize) -> Result<Self> {
        let eig = nystrom_eig(Self::kernel(), &Self::domain(), quad_order, MODES)?;
        Ok(Self { eig: Arc::new(eig) })
    }

    pub fn domain() -> BoxDomain {
        BoxDomain::interval(-1.0, 1.0).expect("valid interval")
    }

    pub fn kernel() -> KernelSpec {
        KernelSpec::gaussian(1.0).expect("valid scale")
    }

    pub fn eigensystem(&self) -> &EigenSystem<KernelSpec> {
        &self.eig
    }

    /// Candidate values `{1, 2, 3}`.
    pub fn candidates() -> SearchRegion {
        SearchRegion::Candidates { candidates: vec![vec![1.0], vec![2.0], vec![3.0]] }
    }

    /// `eps_k(x)` for `k` in `1..=3`.
    pub fn discrepancy(&self, k: usize, x: &[f64]) -> f64 {
        discrepancy(&self.eig, k, x)
    }

    pub fn discrepancy_fn(&self, k: usize) -> impl Fn(&[f64]) -> f64 + '_ {
        move |x| self.discrepancy(k, x)
    }

    /// Equispaced design of `n` points with zero physical response and
    /// `y^s(x, k) = -eps_k(x)`.
    pub fn problem(&self, n: usize) -> Result<CalibrationProblem> {
        let domain = Self::domain();
        let design = Design::equispaced(&domain, n)?;
        let eig = Arc::clone(&self.eig);
        let sim = Simulator::Cheap(Arc::new(move |x: &[f64], t: &[f64]| {
            let k = t[0].round();
            if !(1.0..=3.0).contains(&k) || (t[0] - k).abs() > 1e-12 {
                return Err(Error::input(format!("candidate {} is not one of 1, 2, 3", t[0])));
            }
            Ok(-discrepancy(&eig, k as usize, x))
        }));
        CalibrationProblem::new(domain, Self::candidates(), design, vec![0.0; n], sim)
    }

    /// The physical response `y^p ≡ 0`.
    pub fn truth() -> ResponseFn {
        response_fn(|_| 0.0)
    }
}

fn discrepancy(eig: &EigenSystem<KernelSpec>, k: usize, x: &[f64]) -> f64 {
    match k {
        1 | 2 => SCALE_SQ.sqrt() * eig.eval(k - 1, x),
        3 => (2.0 * PI * x[0]).sin(),
        _ => panic!("candidate index {k} outside 1..=3"),
    }
}
