//! Positive-definite correlation kernels and Gram-matrix assembly.
//!
//! Both families are unit-variance correlation functions, so `k(s, s) = 1`.
//! The Gaussian family is `exp(-phi * |s - t|^2)`; the Matérn family uses the
//! argument `z = 2 sqrt(nu) phi |s - t|` and is only provided for the
//! half-integer smoothness values with closed forms.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};

/// Anything that can act as a symmetric kernel on points of a fixed dimension.
///
/// `correlation` does no validation; callers are responsible for matching
/// dimensions and finite inputs.
pub trait Kernel: Send + Sync {
    fn correlation(&self, s: &[f64], t: &[f64]) -> f64;
}

/// Half-integer Matérn smoothness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Smoothness {
    Half,
    ThreeHalves,
    FiveHalves,
    SevenHalves,
}

impl Smoothness {
    pub fn value(self) -> f64 {
        match self {
            Smoothness::Half => 0.5,
            Smoothness::ThreeHalves => 1.5,
            Smoothness::FiveHalves => 2.5,
            Smoothness::SevenHalves => 3.5,
        }
    }

    pub fn from_value(nu: f64) -> Result<Self> {
        const TABLE: [(f64, Smoothness); 4] = [
            (0.5, Smoothness::Half),
            (1.5, Smoothness::ThreeHalves),
            (2.5, Smoothness::FiveHalves),
            (3.5, Smoothness::SevenHalves),
        ];
        TABLE
            .iter()
            .find(|(v, _)| (*v - nu).abs() < 1e-12)
            .map(|(_, s)| *s)
            .ok_or_else(|| {
                Error::input(format!(
                    "Matérn smoothness must be one of 0.5, 1.5, 2.5, 3.5; got {nu}"
                ))
            })
    }

    /// `e^{z} k(z)`: the polynomial factor of the closed form.
    fn polynomial(self, z: f64) -> f64 {
        match self {
            Smoothness::Half => 1.0,
            Smoothness::ThreeHalves => 1.0 + z,
            Smoothness::FiveHalves => 1.0 + z + z * z / 3.0,
            Smoothness::SevenHalves => 1.0 + z + 0.4 * z * z + z * z * z / 15.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    Gaussian,
    Matern(Smoothness),
}

/// A member of a kernel family: family, scale `phi` and (Matérn) smoothness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpecRepr", into = "KernelSpecRepr")]
pub struct KernelSpec {
    family: KernelFamily,
    phi: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, phi: f64) -> Result<Self> {
        if !(phi.is_finite() && phi > 0.0) {
            return Err(Error::input(format!("kernel scale must be positive, got {phi}")));
        }
        Ok(Self { family, phi })
    }

    pub fn gaussian(phi: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, phi)
    }

    pub fn matern(nu: f64, phi: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern(Smoothness::from_value(nu)?), phi)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn nu(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Gaussian => None,
            KernelFamily::Matern(s) => Some(s.value()),
        }
    }

    /// Same family and smoothness, different scale.
    pub fn with_phi(&self, phi: f64) -> Result<Self> {
        Self::new(self.family, phi)
    }

    /// Kernel value as a function of the distance `r = |s - t|`.
    pub fn radial(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => (-self.phi * r * r).exp(),
            KernelFamily::Matern(s) => {
                let z = 2.0 * s.value().sqrt() * self.phi * r;
                s.polynomial(z) * (-z).exp()
            }
        }
    }

    /// Validated evaluation of `k(s, t)`.
    pub fn eval(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        if s.len() != t.len() {
            return Err(Error::input(format!(
                "dimension mismatch: {} vs {}",
                s.len(),
                t.len()
            )));
        }
        if s.iter().chain(t).any(|v| !v.is_finite()) {
            return Err(Error::input("non-finite coordinate in kernel argument"));
        }
        Ok(self.correlation(s, t))
    }

    /// Gram matrix of the design under this kernel.
    pub fn gram(&self, design: &Design) -> Result<DMatrix<f64>> {
        gram_matrix(self, design.points())
    }
}

impl Kernel for KernelSpec {
    fn correlation(&self, s: &[f64], t: &[f64]) -> f64 {
        self.radial(distance(s, t))
    }
}

pub(crate) fn distance_sq(s: &[f64], t: &[f64]) -> f64 {
    s.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub(crate) fn distance(s: &[f64], t: &[f64]) -> f64 {
    distance_sq(s, t).sqrt()
}

/// Symmetric Gram matrix over `points`; rejects coincident points.
pub fn gram_matrix<K: Kernel + ?Sized>(kernel: &K, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = points.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        g[(i, i)] = kernel.correlation(&points[i], &points[i]);
        for j in 0..i {
            if points[i] == points[j] {
                return Err(Error::DegenerateDesign { first: j, second: i });
            }
            let v = kernel.correlation(&points[i], &points[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Rows are `targets`, columns are `centers`.
pub fn cross_matrix<K: Kernel + ?Sized>(
    kernel: &K,
    targets: &[Vec<f64>],
    centers: &[Vec<f64>],
) -> DMatrix<f64> {
    DMatrix::from_fn(targets.len(), centers.len(), |i, j| {
        kernel.correlation(&targets[i], &centers[j])
    })
}

#[derive(Serialize, Deserialize)]
struct KernelSpecRepr {
    family: String,
    phi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nu: Option<f64>,
}

impl TryFrom<KernelSpecRepr> for KernelSpec {
    type Error = Error;

    fn try_from(r: KernelSpecRepr) -> Result<Self> {
        match (r.family.to_ascii_lowercase().as_str(), r.nu) {
            ("gaussian", None) => KernelSpec::gaussian(r.phi),
            ("gaussian", Some(_)) => Err(Error::input("gaussian kernel takes no `nu`")),
            ("matern", Some(nu)) => KernelSpec::matern(nu, r.phi),
            ("matern", None) => Err(Error::input("matern kernel requires `nu`")),
            (other, _) => Err(Error::input(format!("unknown kernel family `{other}`"))),
        }
    }
}

impl From<KernelSpec> for KernelSpecRepr {
    fn from(k: KernelSpec) -> Self {
        let family = match k.family {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Matern(_) => "matern",
        };
        KernelSpecRepr { family: family.to_string(), phi: k.phi, nu: k.nu() }
    }
}
