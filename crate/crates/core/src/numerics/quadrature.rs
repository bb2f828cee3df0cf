use crate::design::{cartesian, BoxDomain};
use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        // Tricomi's initial guess, then Newton on P_m.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        dp = if d.is_finite() { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor-product Gauss–Legendre rule on a box; the last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    domain: BoxDomain,
    order: usize,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl QuadratureSpec {
    pub fn new(domain: &BoxDomain, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::input("quadrature order must be >= 1"));
        }
        let (x, w) = gauss_legendre(order);
        let d = domain.dim();
        let axes_x: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let half = 0.5 * domain.width(i);
                let mid = domain.lower()[i] + half;
                x.iter().map(|t| mid + half * t).collect()
            })
            .collect();
        let axes_w: Vec<Vec<f64>> = (0..d)
            .map(|i| w.iter().map(|v| 0.5 * domain.width(i) * v).collect())
            .collect();
        let nodes = cartesian(&axes_x);
        let weights = cartesian(&axes_w).into_iter().map(|ws| ws.iter().product()).collect();
        Ok(Self { domain: domain.clone(), order, nodes, weights })
    }

    /// 64 nodes per axis in 1-D, 16 per axis otherwise.
    pub fn with_default_order(domain: &BoxDomain) -> Result<Self> {
        Self::new(domain, if domain.dim() == 1 { 64 } else { 16 })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Evaluates `f` at every node, rejecting non-finite values.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<Vec<f64>> {
        self.nodes
            .iter()
            .map(|x| {
                let v = f(x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Evaluation { node: x.clone(), value: v })
                }
            })
            .collect()
    }

    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<f64> {
        Ok(self.integrate_values(&self.sample(f)?))
    }

    /// Weighted sum of values already sampled at the nodes.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn inner_product_values(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
    }

    pub fn l2_norm_values(&self, values: &[f64]) -> f64 {
        self.inner_product_values(values, values).sqrt()
    }

    /// `(int f^2)^{1/2}` by the rule.
    pub fn l2_norm<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<f64> {
        Ok(self.l2_norm_values(&self.sample(f)?))
    }
}
