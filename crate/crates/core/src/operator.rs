//! Nyström eigenanalysis of the kernel integral operator
//! `(kappa f)(x) = int_Omega k(x, t) f(t) dt`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::design::BoxDomain;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::numerics::QuadratureSpec;

/// Leading eigenpairs of the integral operator of `K` on a box.
///
/// Eigenfunctions are stored by their values at the quadrature nodes and
/// evaluated elsewhere through the Nyström extension. They are unit-norm in
/// the quadrature inner product, with `int f_i >= 0` (or a positive value at
/// the first node when that integral vanishes).
#[derive(Debug, Clone)]
pub struct EigenSystem<K> {
    kernel: K,
    quadrature: QuadratureSpec,
    eigenvalues: Vec<f64>,
    spectrum: Vec<f64>,
    node_values: Vec<Vec<f64>>,
}

/// Builds the symmetric discretization `W^{1/2} K W^{1/2}` on a tensor
/// Gauss–Legendre rule of `quad_order` nodes per axis and keeps the top
/// `num_modes` eigenpairs.
pub fn nystrom_eig<K: Kernel>(kernel: K, domain: &BoxDomain, quad_order: usize, num_modes: usize) -> Result<EigenSystem<K>> {
    if domain.dim() > 2 {
        return Err(Error::input("operator eigenanalysis supports 1-D and 2-D domains"));
    }
    if num_modes == 0 {
        return Err(Error::input("need at least one mode"));
    }
    if quad_order < num_modes {
        return Err(Error::input(format!(
            "quadrature order {quad_order} is smaller than the {num_modes} requested modes"
        )));
    }
    let quadrature = QuadratureSpec::new(domain, quad_order)?;
    let nodes = quadrature.nodes();
    let sw: Vec<f64> = quadrature.weights().iter().map(|w| w.sqrt()).collect();
    let m = nodes.len();
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = sw[i] * kernel.correlation(&nodes[i], &nodes[j]) * sw[j];
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let spectrum: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

    let lead = spectrum[0];
    let floor = lead.abs() * m as f64 * f64::EPSILON;
    let mut eigenvalues = Vec::with_capacity(num_modes);
    let mut node_values = Vec::with_capacity(num_modes);
    for (rank, &col) in order.iter().take(num_modes).enumerate() {
        let lambda = spectrum[rank];
        if lambda.is_nan() || lambda <= floor {
            return Err(Error::RankDeficient { index: rank, value: lambda });
        }
        let mut f: Vec<f64> = (0..m).map(|j| eig.eigenvectors[(j, col)] / sw[j]).collect();
        let integral = quadrature.integrate_values(&f);
        let flip = if integral.abs() > 1e-10 * domain.volume().sqrt() { integral < 0.0 } else { f[0] < 0.0 };
        if flip {
            f.iter_mut().for_each(|v| *v = -*v);
        }
        eigenvalues.push(lambda);
        node_values.push(f);
    }
    Ok(EigenSystem { kernel, quadrature, eigenvalues, spectrum, node_values })
}

impl<K: Kernel> EigenSystem<K> {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Every eigenvalue of the discretized operator, descending.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn num_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.quadrature
    }

    pub fn kernel(&self) -> &K {
        &self.kernel
    }

    /// Values of mode `i` at the quadrature nodes.
    pub fn node_values(&self, i: usize) -> &[f64] {
        &self.node_values[i]
    }

    /// `f_i(x) = lambda_i^{-1} int k(x, t) f_i(t) dt`, by quadrature.
    pub fn eval(&self, i: usize, x: &[f64]) -> f64 {
        let w = self.quadrature.weights();
        let acc: f64 = self
            .quadrature
            .nodes()
            .iter()
            .zip(w)
            .zip(&self.node_values[i])
            .map(|((t, wj), fj)| wj * self.kernel.correlation(x, t) * fj)
            .sum();
        acc / self.eigenvalues[i]
    }

    /// `<f, f_i>` in the quadrature inner product.
    pub fn coefficient<F: Fn(&[f64]) -> f64>(&self, f: F, i: usize) -> Result<f64> {
        let samples = self.quadrature.sample(f)?;
        Ok(self.quadrature.inner_product_values(&samples, &self.node_values[i]))
    }

    /// `(<f_i, f_j>)_{ij}` over the retained modes.
    pub fn orthonormality(&self) -> DMatrix<f64> {
        let k = self.num_modes();
        DMatrix::from_fn(k, k, |i, j| self.quadrature.inner_product_values(&self.node_values[i], &self.node_values[j]))
    }

    /// Log of the truncated Karhunen–Loève density
    /// `-sum_{i<truncation} <f, f_i>^2 / (2 lambda_i^2)`.
    pub fn kl_density_exponent<F: Fn(&[f64]) -> f64>(&self, f: F, truncation: usize) -> Result<f64> {
        if truncation == 0 || truncation > self.num_modes() {
            return Err(Error::input(format!(
                "truncation {truncation} outside 1..={} retained modes",
                self.num_modes()
            )));
        }
        let samples = self.quadrature.sample(f)?;
        Ok(-(0..truncation)
            .map(|i| {
                let c = self.quadrature.inner_product_values(&samples, &self.node_values[i]);
                c * c / (2.0 * self.eigenvalues[i] * self.eigenvalues[i])
            })
            .sum::<f64>())
    }
}
