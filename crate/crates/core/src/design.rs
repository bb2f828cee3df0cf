//! Box domains, experimental designs and fill distance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::distance_sq;

/// Axis-aligned box `[lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<BoxRepr> for BoxDomain {
    type Error = Error;
    fn try_from(r: BoxRepr) -> Result<Self> {
        BoxDomain::new(r.lower, r.upper)
    }
}

impl From<BoxDomain> for BoxRepr {
    fn from(b: BoxDomain) -> Self {
        BoxRepr { lower: b.lower, upper: b.upper }
    }
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::input(format!(
                "box bounds must be nonempty and of equal length ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (a, b)) in lower.iter().zip(&upper).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::input(format!("box dimension {i}: need lower < upper, got [{a}, {b}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a], vec![b])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i).powi(2)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().enumerate().all(|(i, v)| *v >= self.lower[i] && *v <= self.upper[i])
    }

    /// Projects `x` onto the box.
    pub fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Affine image of a point of the unit cube.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().enumerate().map(|(i, v)| self.lower[i] + v * self.width(i)).collect()
    }

    /// The product box `self x other` (coordinates concatenated).
    pub fn product(&self, other: &BoxDomain) -> BoxDomain {
        let mut lower = self.lower.clone();
        lower.extend_from_slice(&other.lower);
        let mut upper = self.upper.clone();
        upper.extend_from_slice(&other.upper);
        BoxDomain { lower, upper }
    }
}

/// Ordered, pairwise-distinct points inside a box.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    points: Vec<Vec<f64>>,
    domain: BoxDomain,
}

impl Design {
    pub fn new(points: Vec<Vec<f64>>, domain: BoxDomain) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if p.len() != domain.dim() {
                return Err(Error::input(format!(
                    "design point {i} has dimension {}, domain has {}",
                    p.len(),
                    domain.dim()
                )));
            }
            if !domain.contains(p) {
                return Err(Error::input(format!("design point {i} {p:?} lies outside the domain")));
            }
        }
        // Sorting a permutation finds duplicates in n log n.
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| {
            points[a]
                .iter()
                .zip(&points[b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for w in order.windows(2) {
            if points[w[0]] == points[w[1]] {
                let (first, second) = (w[0].min(w[1]), w[0].max(w[1]));
                return Err(Error::DegenerateDesign { first, second });
            }
        }
        Ok(Self { points, domain })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// `n` equally spaced points on a 1-D domain, both endpoints included.
    pub fn equispaced(domain: &BoxDomain, n: usize) -> Result<Self> {
        if domain.dim() != 1 {
            return Err(Error::input("equispaced designs are 1-D"));
        }
        if n < 2 {
            return Err(Error::input(format!("equispaced design needs n >= 2, got {n}")));
        }
        let (a, b) = (domain.lower[0], domain.upper[0]);
        let step = (b - a) / (n - 1) as f64;
        let points = (0..n)
            .map(|j| vec![if j == n - 1 { b } else { a + j as f64 * step }])
            .collect();
        Self::new(points, domain.clone())
    }

    /// Halton points with the first `dim` primes as bases, skipping the
    /// first `skip` indices (index 0 is the origin and is always omitted).
    pub fn halton(domain: &BoxDomain, n: usize, skip: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("halton design needs n >= 1"));
        }
        let bases = first_primes(domain.dim());
        let points = (0..n)
            .map(|j| {
                let idx = (skip + j + 1) as u64;
                let u: Vec<f64> = bases.iter().map(|&b| radical_inverse(idx, b)).collect();
                domain.from_unit(&u)
            })
            .collect();
        Self::new(points, domain.clone())
    }

    /// Tensor grid with `per_dim[i]` equispaced levels along axis `i`;
    /// the last axis varies fastest.
    pub fn tensor_grid(domain: &BoxDomain, per_dim: &[usize]) -> Result<Self> {
        if per_dim.len() != domain.dim() || per_dim.iter().any(|&m| m < 2) {
            return Err(Error::input("tensor grid needs >= 2 levels in every dimension"));
        }
        let axes: Vec<Vec<f64>> = per_dim
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                (0..m)
                    .map(|j| {
                        if j == m - 1 {
                            domain.upper[i]
                        } else {
                            domain.lower[i] + j as f64 * domain.width(i) / (m - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(cartesian(&axes), domain.clone())
    }

    /// Grid approximation of `max_{x in domain} min_i |x - x_i|`, scanning
    /// `resolution` points per dimension.
    pub fn fill_distance(&self, resolution: usize) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::input("fill distance of an empty design"));
        }
        if resolution < 2 {
            return Err(Error::input("fill distance resolution must be >= 2"));
        }
        let d = self.dim();
        let total = resolution.checked_pow(d as u32).ok_or_else(|| Error::input("grid too large"))?;
        let max_sq = (0..total)
            .into_par_iter()
            .map(|mut flat| {
                let mut x = vec![0.0; d];
                for i in (0..d).rev() {
                    let j = flat % resolution;
                    flat /= resolution;
                    x[i] = self.domain.lower[i] + j as f64 * self.domain.width(i) / (resolution - 1) as f64;
                }
                self.points.iter().map(|p| distance_sq(p, &x)).fold(f64::INFINITY, f64::min)
            })
            .reduce(|| 0.0, f64::max);
        Ok(max_sq.sqrt())
    }

    /// Fill distance at the default resolution for the dimension.
    pub fn fill_distance_default(&self) -> Result<f64> {
        self.fill_distance(default_fill_resolution(self.dim()))
    }
}

/// 1001 grid points per axis in 1-D, 101 in 2-D, 31 beyond.
pub fn default_fill_resolution(dim: usize) -> usize {
    match dim {
        1 => 1001,
        2 => 101,
        _ => 31,
    }
}

pub(crate) fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect()
    })
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

fn first_primes(k: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(k);
    let mut c = 2u64;
    while primes.len() < k {
        if primes.iter().take_while(|&&p| p * p <= c).all(|&p| !c.is_multiple_of(p)) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Digit-string radical inverse, independent of the arithmetic loop above.
    fn radical_inverse_oracle(i: u64, base: u32) -> f64 {
        let digits: Vec<u32> = {
            let mut v = Vec::new();
            let mut k = i;
            while k > 0 {
                v.push((k % base as u64) as u32);
                k /= base as u64;
            }
            v
        };
        digits
            .iter()
            .enumerate()
            .map(|(pos, &dgt)| dgt as f64 / (base as f64).powi(pos as i32 + 1))
            .sum()
    }

    #[test]
    fn box_validation() {
        assert!(BoxDomain::new(vec![], vec![]).is_err());
        assert!(BoxDomain::new(vec![1.0], vec![1.0]).is_err());
        assert!(BoxDomain::new(vec![0.0, 0.0], vec![1.0]).is_err());
        let b = BoxDomain::new(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap();
        assert_eq!(b.volume(), 4.0);
        assert!(b.contains(&[2.0, -1.0]));
        assert!(!b.contains(&[2.1, 0.0]));
    }

    #[test]
    fn equispaced_examples() {
        let d = Design::equispaced(&BoxDomain::interval(-1.0, 1.0).unwrap(), 11).unwrap();
        for (j, p) in d.points().iter().enumerate() {
            assert_relative_eq!(p[0], -1.0 + j as f64 / 5.0, epsilon = 1e-15);
        }
        assert_eq!(d.points()[10][0], 1.0);
        let d = Design::equispaced(&BoxDomain::interval(0.0, 1.0).unwrap(), 2).unwrap();
        assert_eq!(d.points(), &[vec![0.0], vec![1.0]]);
        let d = Design::equispaced(&BoxDomain::interval(-1.0, 1.0).unwrap(), 3).unwrap();
        assert_eq!(d.points(), &[vec![-1.0], vec![0.0], vec![1.0]]);
        assert!(Design::equispaced(&BoxDomain::interval(0.0, 1.0).unwrap(), 1).is_err());
    }

    #[test]
    fn halton_examples() {
        let unit = BoxDomain::interval(0.0, 1.0).unwrap();
        let d = Design::halton(&unit, 3, 0).unwrap();
        assert_eq!(d.points(), &[vec![0.5], vec![0.25], vec![0.75]]);
        let sq = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let d = Design::halton(&sq, 1, 0).unwrap();
        assert_eq!(d.points()[0][0], 0.5);
        assert_relative_eq!(d.points()[0][1], 1.0 / 3.0, epsilon = 1e-16);
        let sym = BoxDomain::interval(-1.0, 1.0).unwrap();
        let d = Design::halton(&sym, 4, 0).unwrap();
        let expected: Vec<f64> = (1..=4).map(|i| 2.0 * radical_inverse_oracle(i, 2) - 1.0).collect();
        assert_eq!(expected, vec![0.0, -0.5, 0.5, -0.75]);
        for (p, e) in d.points().iter().zip(expected) {
            assert_relative_eq!(p[0], e, epsilon = 1e-15);
        }
    }

    #[test]
    fn halton_matches_digit_oracle() {
        let cube = BoxDomain::new(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let d = Design::halton(&cube, 50, 7).unwrap();
        for (j, p) in d.points().iter().enumerate() {
            let i = (7 + j + 1) as u64;
            for (axis, base) in [2u32, 3, 5].iter().enumerate() {
                assert_relative_eq!(p[axis], radical_inverse_oracle(i, *base), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn design_rejects_duplicates_and_outside() {
        let b = BoxDomain::interval(0.0, 1.0).unwrap();
        assert!(matches!(
            Design::new(vec![vec![0.2], vec![0.5], vec![0.2]], b.clone()),
            Err(Error::DegenerateDesign { first: 0, second: 2 })
        ));
        assert!(Design::new(vec![vec![1.5]], b.clone()).is_err());
        assert!(Design::new(vec![vec![0.5, 0.5]], b).is_err());
    }

    #[test]
    fn fill_distance_examples() {
        let b = BoxDomain::interval(-1.0, 1.0).unwrap();
        let d = Design::new(vec![vec![-1.0], vec![0.0], vec![1.0]], b.clone()).unwrap();
        assert_relative_eq!(d.fill_distance(1001).unwrap(), 0.5, epsilon = 1e-12);
        let d = Design::new(vec![vec![0.0]], b.clone()).unwrap();
        assert_relative_eq!(d.fill_distance(1001).unwrap(), 1.0, epsilon = 1e-12);
        let d = Design::equispaced(&b, 11).unwrap();
        assert_relative_eq!(d.fill_distance(1001).unwrap(), 0.1, epsilon = 1e-12);
        let empty = Design::new(vec![], b).unwrap();
        assert!(empty.fill_distance(11).is_err());
    }

    #[test]
    fn tensor_grid_layout() {
        let b = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let g = Design::tensor_grid(&b, &[2, 3]).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.points()[1], vec![0.0, 1.0]);
        assert_eq!(g.points()[5], vec![1.0, 2.0]);
    }

    proptest! {
        #[test]
        fn equispaced_fill_distance(a in -3.0f64..0.0, w in 0.5f64..4.0, n in 2usize..40) {
            let b = BoxDomain::interval(a, a + w).unwrap();
            let d = Design::equispaced(&b, n).unwrap();
            let h = d.fill_distance(1001).unwrap();
            let exact = w / (2.0 * (n - 1) as f64);
            prop_assert!(h <= exact + 1e-12);
            prop_assert!(exact - h <= w / 1000.0 + 1e-12);
        }

        #[test]
        fn adding_a_point_never_increases_fill(n in 1usize..20, extra in 0.0f64..1.0) {
            let b = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
            let d = Design::halton(&b, n, 0).unwrap();
            let mut pts = d.points().to_vec();
            let p = vec![extra, 1.0 - extra];
            prop_assume!(!pts.contains(&p));
            pts.push(p);
            let bigger = Design::new(pts, b).unwrap();
            prop_assert!(bigger.fill_distance(41).unwrap() <= d.fill_distance(41).unwrap());
        }

        #[test]
        fn halton_points_valid(n in 1usize..200, skip in 0usize..50, dim in 1usize..4) {
            let b = BoxDomain::new(vec![-2.0; dim], vec![3.0; dim]).unwrap();
            let d = Design::halton(&b, n, skip).unwrap();
            prop_assert_eq!(d.len(), n);
            prop_assert!(d.points().iter().all(|p| b.contains(p)));
        }
    }
}
