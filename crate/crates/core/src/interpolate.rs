//! Kernel interpolation, native norms and the profiled GP likelihood.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::design::{BoxDomain, Design};
use crate::error::{Error, GramDiagnostics, Result};
use crate::kernels::{cross_matrix, Kernel, KernelSpec};

/// How to regularize a Gram matrix whose Cholesky factorization fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NuggetPolicy {
    None,
    /// Try no nugget, then `start * factor^k` while it stays `<= max`.
    Adaptive { start: f64, factor: f64, max: f64 },
}

impl Default for NuggetPolicy {
    fn default() -> Self {
        NuggetPolicy::Adaptive { start: 1e-12, factor: 10.0, max: 1e-6 }
    }
}

impl NuggetPolicy {
    fn schedule(&self) -> Result<Vec<f64>> {
        match *self {
            NuggetPolicy::None => Ok(vec![0.0]),
            NuggetPolicy::Adaptive { start, factor, max } => {
                if !(start > 0.0 && factor > 1.0 && max >= start) {
                    return Err(Error::input("adaptive nugget needs start > 0, factor > 1, max >= start"));
                }
                let mut out = vec![0.0];
                let mut v = start;
                while v <= max * (1.0 + 1e-12) {
                    out.push(v);
                    v *= factor;
                }
                Ok(out)
            }
        }
    }
}

/// Cholesky factor of `Phi + nugget * I`.
#[derive(Debug, Clone)]
pub struct GramFactor {
    chol: Cholesky<f64, Dyn>,
    nugget: f64,
}

impl GramFactor {
    pub fn new(gram: DMatrix<f64>, policy: &NuggetPolicy) -> Result<Self> {
        let mut last = 0.0;
        for nugget in policy.schedule()? {
            last = nugget;
            if let Some(f) = Self::with_nugget(&gram, nugget) {
                return Ok(f);
            }
        }
        let diag = gram.diagonal();
        Err(Error::IllConditioned(GramDiagnostics {
            size: gram.nrows(),
            last_nugget: last,
            min_diagonal: diag.min(),
            max_diagonal: diag.max(),
        }))
    }

    /// Factors the Gram matrix of `design` under `kernel`.
    pub fn for_design<K: Kernel + ?Sized>(design: &Design, kernel: &K, policy: &NuggetPolicy) -> Result<Self> {
        Self::new(crate::kernels::gram_matrix(kernel, design.points())?, policy)
    }

    fn with_nugget(gram: &DMatrix<f64>, nugget: f64) -> Option<Self> {
        let mut m = gram.clone();
        if nugget > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += nugget;
            }
        }
        let chol = Cholesky::new(m)?;
        // nalgebra accepts tiny positive pivots; reject factors that cannot
        // be trusted for a solve.
        let l = chol.l_dirty();
        let ok = (0..l.nrows()).all(|i| l[(i, i)].is_finite() && l[(i, i)] > 0.0);
        ok.then_some(Self { chol, nugget })
    }

    pub fn size(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    /// `L^{-1} y`.
    pub fn whiten(&self, y: &DVector<f64>) -> DVector<f64> {
        let l = self.chol.l_dirty();
        let n = y.len();
        let mut z = y.clone();
        for i in 0..n {
            let mut acc = z[i];
            for k in 0..i {
                acc -= l[(i, k)] * z[k];
            }
            z[i] = acc / l[(i, i)];
        }
        z
    }

    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(y)
    }

    /// `y^T (Phi + nugget I)^{-1} y`.
    pub fn pss(&self, y: &DVector<f64>) -> f64 {
        self.whiten(y).norm_squared()
    }

    /// `log |Phi + nugget I|`.
    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    /// `-(n/2) log(y^T Phi^{-1} y) - (1/2) log |Phi|`, with the variance
    /// profiled out.
    pub fn profile_loglik(&self, y: &DVector<f64>) -> Result<f64> {
        let n = y.len();
        if n < 2 {
            return Err(Error::input("profile likelihood needs at least two observations"));
        }
        let q = self.pss(y);
        if q <= 0.0 {
            return Err(Error::UndefinedLikelihood("pivoted sum of squares is zero".into()));
        }
        Ok(-0.5 * n as f64 * q.ln() - 0.5 * self.log_det())
    }
}

/// A fitted kernel interpolant `x -> sum_i u_i k(x, x_i)`.
#[derive(Debug, Clone)]
pub struct Interpolator {
    design: Design,
    kernel: KernelSpec,
    values: DVector<f64>,
    coefficients: DVector<f64>,
    factor: GramFactor,
    native_norm_sq: f64,
}

impl Interpolator {
    pub fn fit(design: &Design, values: &[f64], kernel: KernelSpec, policy: &NuggetPolicy) -> Result<Self> {
        let factor = GramFactor::for_design(design, &kernel, policy)?;
        Self::from_factor(design, values, kernel, factor)
    }

    fn from_factor(design: &Design, values: &[f64], kernel: KernelSpec, factor: GramFactor) -> Result<Self> {
        if values.len() != design.len() {
            return Err(Error::input(format!(
                "{} values for a design of {} points",
                values.len(),
                design.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite response value {v}")));
        }
        let y = DVector::from_column_slice(values);
        let z = factor.whiten(&y);
        let native_norm_sq = z.norm_squared();
        let coefficients = factor.solve(&y);
        Ok(Self { design: design.clone(), kernel, values: y, coefficients, factor, native_norm_sq })
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn values(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn coefficients(&self) -> &[f64] {
        self.coefficients.as_slice()
    }

    pub fn nugget_used(&self) -> f64 {
        self.factor.nugget
    }

    pub fn factor(&self) -> &GramFactor {
        &self.factor
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.design.dim() {
            return Err(Error::input(format!(
                "prediction point has dimension {}, interpolator has {}",
                x.len(),
                self.design.dim()
            )));
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.design
            .points()
            .iter()
            .zip(self.coefficients.iter())
            .map(|(p, u)| u * self.kernel.correlation(x, p))
            .sum()
    }

    pub fn predict_many(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if xs.iter().any(|x| x.len() != self.design.dim()) {
            return Err(Error::input("prediction point dimension mismatch"));
        }
        let k = cross_matrix(&self.kernel, xs, self.design.points());
        Ok((k * &self.coefficients).iter().copied().collect())
    }

    /// `u^T (Phi + nugget I) u`, the squared native norm of the interpolant.
    pub fn native_norm_sq(&self) -> f64 {
        self.native_norm_sq
    }

    pub fn profile_loglik(&self) -> Result<f64> {
        self.factor.profile_loglik(&self.values)
    }

    pub fn to_record(&self) -> InterpolatorRecord {
        InterpolatorRecord {
            domain: self.design.domain().clone(),
            design: self.design.points().to_vec(),
            kernel: self.kernel,
            values: self.values.iter().copied().collect(),
            coefficients: self.coefficients.iter().copied().collect(),
            nugget_used: self.factor.nugget,
        }
    }

    /// Rebuilds an interpolator from its JSON record, refactoring with the
    /// recorded nugget.
    pub fn from_record(record: &InterpolatorRecord) -> Result<Self> {
        let design = Design::new(record.design.clone(), record.domain.clone())?;
        let gram = crate::kernels::gram_matrix(&record.kernel, design.points())?;
        let factor = GramFactor::with_nugget(&gram, record.nugget_used).ok_or_else(|| {
            let diag = gram.diagonal();
            Error::IllConditioned(GramDiagnostics {
                size: gram.nrows(),
                last_nugget: record.nugget_used,
                min_diagonal: diag.min(),
                max_diagonal: diag.max(),
            })
        })?;
        let interp = Self::from_factor(&design, &record.values, record.kernel, factor)?;
        if interp.coefficients.len() != record.coefficients.len() {
            return Err(Error::input("coefficient count does not match the design"));
        }
        Ok(interp)
    }
}

/// Serialized form of a fitted interpolator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolatorRecord {
    pub domain: BoxDomain,
    pub design: Vec<Vec<f64>>,
    pub kernel: KernelSpec,
    pub values: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub nugget_used: f64,
}

/// Pivoted sum of squares `Y^T Phi^{-1} Y`.
pub fn pss(values: &[f64], design: &Design, kernel: KernelSpec, policy: &NuggetPolicy) -> Result<f64> {
    Ok(Interpolator::fit(design, values, kernel, policy)?.native_norm_sq())
}

/// Profile log-likelihood with the process variance profiled out.
pub fn profile_loglik(values: &[f64], design: &Design, kernel: KernelSpec, policy: &NuggetPolicy) -> Result<f64> {
    Interpolator::fit(design, values, kernel, policy)?.profile_loglik()
}
