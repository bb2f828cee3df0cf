use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{BoxDomain, Design};
use crate::error::{Error, Result};

/// Where a minimizer searches: a box, or an explicit finite list of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SearchRegion {
    Candidates { candidates: Vec<Vec<f64>> },
    Box(BoxDomain),
}

impl SearchRegion {
    pub fn candidates(candidates: Vec<Vec<f64>>) -> Result<Self> {
        let region = SearchRegion::Candidates { candidates };
        region.validate()?;
        Ok(region)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SearchRegion::Box(_) => Ok(()),
            SearchRegion::Candidates { candidates } => {
                let Some(first) = candidates.first() else {
                    return Err(Error::input("candidate list is empty"));
                };
                if first.is_empty() || candidates.iter().any(|c| c.len() != first.len()) {
                    return Err(Error::input("candidates must share a positive dimension"));
                }
                for i in 0..candidates.len() {
                    for j in 0..i {
                        if candidates[i] == candidates[j] {
                            return Err(Error::input(format!("candidates {j} and {i} coincide")));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SearchRegion::Box(b) => b.dim(),
            SearchRegion::Candidates { candidates } => candidates.first().map_or(0, Vec::len),
        }
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        match self {
            SearchRegion::Box(b) => b.contains(theta),
            SearchRegion::Candidates { candidates } => candidates.iter().any(|c| c == theta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeSettings {
    /// Number of Halton multistart points over the box.
    pub starts: usize,
    pub max_iterations: usize,
    /// Relative spread of simplex values required for convergence.
    pub f_tol: f64,
    /// Simplex diameter, relative to the box diameter, required for convergence.
    pub x_tol: f64,
    /// Initial simplex edge as a fraction of each box width.
    pub initial_step: f64,
    /// Values within this relative distance of the best are ties.
    pub tie_rtol: f64,
}

impl Default for MinimizeSettings {
    fn default() -> Self {
        Self {
            starts: 16,
            max_iterations: 200,
            f_tol: 1e-8,
            x_tol: 1e-10,
            initial_step: 0.1,
            tie_rtol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartSummary {
    pub start: Vec<f64>,
    pub argmin: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Minimum {
    pub argmin: Vec<f64>,
    pub value: f64,
    /// Index into the candidate list when the region is finite.
    pub candidate_index: Option<usize>,
    /// Another, distinct point achieved the same value within `tie_rtol`.
    pub tie: bool,
    /// Per-start summaries; empty for candidate lists.
    pub starts: Vec<StartSummary>,
    pub evaluations: usize,
}

impl Minimum {
    pub fn converged_starts(&self) -> usize {
        self.starts.iter().filter(|s| s.converged).count()
    }
}

fn within_tie(a: f64, b: f64, rtol: f64) -> bool {
    a == b || (a - b).abs() <= rtol * a.abs().max(b.abs())
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Minimizes `objective` over `region`.
///
/// Finite regions are enumerated; ties go to the smallest index. Boxes use
/// a deterministic Halton multistart of bounded Nelder–Mead; ties between
/// distinct minimizers go to the lexicographically smallest point.
/// Non-finite objective values count as `+inf`; errors abort the search.
pub fn minimize<F>(objective: F, region: &SearchRegion, settings: &MinimizeSettings) -> Result<Minimum>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    region.validate()?;
    match region {
        SearchRegion::Candidates { candidates } => minimize_candidates(&objective, candidates, settings),
        SearchRegion::Box(b) => minimize_box(&objective, b, settings),
    }
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

fn minimize_candidates<F>(objective: &F, candidates: &[Vec<f64>], settings: &MinimizeSettings) -> Result<Minimum>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let values = candidates
        .par_iter()
        .map(|c| objective(c).map(finite_or_inf))
        .collect::<Result<Vec<f64>>>()?;
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::Optimization("objective is non-finite at every candidate".into()));
    }
    let tied: Vec<usize> = (0..values.len()).filter(|&i| within_tie(values[i], best, settings.tie_rtol)).collect();
    let index = tied[0];
    Ok(Minimum {
        argmin: candidates[index].clone(),
        value: values[index],
        candidate_index: Some(index),
        tie: tied.len() > 1,
        starts: Vec::new(),
        evaluations: candidates.len(),
    })
}

fn minimize_box<F>(objective: &F, domain: &BoxDomain, settings: &MinimizeSettings) -> Result<Minimum>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if settings.starts == 0 {
        return Err(Error::input("at least one multistart point is required"));
    }
    let starts = Design::halton(domain, settings.starts, 0)?;
    let runs = starts
        .points()
        .par_iter()
        .map(|x0| nelder_mead(objective, domain, x0, settings))
        .collect::<Result<Vec<StartSummary>>>()?;
    let evaluations = runs.iter().map(|r| r.evaluations).sum();
    let best = runs.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::Optimization("no start produced a finite objective value".into()));
    }
    let mut tied: Vec<&StartSummary> = runs.iter().filter(|r| within_tie(r.value, best, settings.tie_rtol)).collect();
    tied.sort_by(|a, b| lexicographic(&a.argmin, &b.argmin));
    let chosen = tied[0];
    let separation = 1e-6 * domain.diameter();
    let tie = tied.iter().any(|r| {
        r.argmin.iter().zip(&chosen.argmin).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() > separation
    });
    Ok(Minimum {
        argmin: chosen.argmin.clone(),
        value: chosen.value,
        candidate_index: None,
        tie,
        starts: runs.clone(),
        evaluations,
    })
}

fn nelder_mead<F>(objective: &F, domain: &BoxDomain, x0: &[f64], settings: &MinimizeSettings) -> Result<StartSummary>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let d = domain.dim();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| -> Result<f64> {
        evaluations += 1;
        objective(x).map(finite_or_inf)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    simplex.push(x0.to_vec());
    for i in 0..d {
        let mut v = x0.to_vec();
        let step = settings.initial_step * domain.width(i);
        v[i] = if v[i] + step <= domain.upper()[i] { v[i] + step } else { v[i] - step };
        domain.clamp(&mut v);
        simplex.push(v);
    }
    let mut values = simplex.iter().map(|x| eval(x)).collect::<Result<Vec<f64>>>()?;

    let scale = domain.diameter();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < settings.max_iterations {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then_with(|| lexicographic(&simplex[a], &simplex[b])));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let f_best = values[0];
        let f_worst = values[d];
        let diameter = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        if f_best.is_finite()
            && f_worst - f_best <= settings.f_tol * f_best.abs().max(f64::MIN_POSITIVE)
            && diameter <= settings.x_tol * scale
        {
            converged = true;
            break;
        }
        if f_best.is_finite() && f_worst == f_best && diameter <= settings.x_tol * scale {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..d).map(|j| simplex[..d].iter().map(|v| v[j]).sum::<f64>() / d as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..d).map(|j| centroid[j] + t * (simplex[d][j] - centroid[j])).collect();
            domain.clamp(&mut p);
            p
        };

        let xr = along(-REFLECT);
        let fr = eval(&xr)?;
        if fr < values[0] {
            let xe = along(-EXPAND);
            let fe = eval(&xe)?;
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
            continue;
        }
        if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[d] {
            let xc = along(-CONTRACT);
            let fc = eval(&xc)?;
            (xc, fc)
        } else {
            let xc = along(CONTRACT);
            let fc = eval(&xc)?;
            (xc, fc)
        };
        if fc < values[d].min(fr) {
            simplex[d] = xc;
            values[d] = fc;
            continue;
        }
        for i in 1..=d {
            let mut p: Vec<f64> = (0..d).map(|j| simplex[0][j] + SHRINK * (simplex[i][j] - simplex[0][j])).collect();
            domain.clamp(&mut p);
            values[i] = eval(&p)?;
            simplex[i] = p;
        }
    }

    let best = (0..=d)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]).then_with(|| lexicographic(&simplex[a], &simplex[b])))
        .unwrap_or(0);
    Ok(StartSummary {
        start: x0.to_vec(),
        argmin: simplex[best].clone(),
        value: values[best],
        iterations,
        evaluations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(d: usize) -> SearchRegion {
        SearchRegion::Box(BoxDomain::new(vec![0.0; d], vec![1.0; d]).unwrap())
    }

    #[test]
    fn quadratic_1d() {
        let m = minimize(|t| Ok((t[0] - 0.3).powi(2)), &unit(1), &MinimizeSettings::default()).unwrap();
        assert!((m.argmin[0] - 0.3).abs() < 1e-6, "{:?}", m.argmin);
        assert!(!m.tie);
        assert_eq!(m.starts.len(), 16);
        assert!(m.converged_starts() > 0);
    }

    #[test]
    fn quadratic_2d() {
        let f = |t: &[f64]| Ok((t[0] - 0.2).powi(2) + (t[1] - 0.7).powi(2));
        let m = minimize(f, &unit(2), &MinimizeSettings::default()).unwrap();
        assert!((m.argmin[0] - 0.2).abs() < 1e-5 && (m.argmin[1] - 0.7).abs() < 1e-5, "{:?}", m.argmin);
    }

    #[test]
    fn boundary_minimum() {
        let m = minimize(|t| Ok(t[0]), &unit(1), &MinimizeSettings::default()).unwrap();
        assert_eq!(m.argmin, vec![0.0]);
    }

    #[test]
    fn candidate_example_table() {
        let region = SearchRegion::candidates(vec![vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let table = [12.594, 57.908, 17978.65];
        let m = minimize(|t| Ok(table[t[0] as usize - 1]), &region, &MinimizeSettings::default()).unwrap();
        assert_eq!(m.candidate_index, Some(0));
        assert_eq!(m.argmin, vec![1.0]);
        assert_eq!(m.value, 12.594);
    }

    #[test]
    fn candidate_tie_goes_to_first_and_is_flagged() {
        let region = SearchRegion::candidates(vec![vec![5.0], vec![1.0], vec![3.0]]).unwrap();
        let m = minimize(|t| Ok(if t[0] > 2.0 { 1.0 } else { 2.0 }), &region, &MinimizeSettings::default()).unwrap();
        assert_eq!(m.candidate_index, Some(0));
        assert!(m.tie);
    }

    #[test]
    fn box_tie_goes_to_lexicographically_smallest() {
        let f = |t: &[f64]| Ok(((t[0] - 0.25) * (t[0] - 0.75)).powi(2));
        let m = minimize(f, &unit(1), &MinimizeSettings::default()).unwrap();
        assert!((m.argmin[0] - 0.25).abs() < 1e-6, "{:?}", m.argmin);
        assert!(m.tie);
    }

    #[test]
    fn all_infinite_is_an_error() {
        let region = SearchRegion::candidates(vec![vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(
            minimize(|_| Ok(f64::NAN), &region, &MinimizeSettings::default()),
            Err(Error::Optimization(_))
        ));
        assert!(matches!(
            minimize(|_| Ok(f64::INFINITY), &unit(1), &MinimizeSettings::default()),
            Err(Error::Optimization(_))
        ));
    }

    #[test]
    fn candidates_validated() {
        assert!(SearchRegion::candidates(vec![]).is_err());
        assert!(SearchRegion::candidates(vec![vec![1.0], vec![1.0]]).is_err());
        assert!(SearchRegion::candidates(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn region_json_forms() {
        let r: SearchRegion = serde_json::from_str(r#"{"lower":[0.0],"upper":[2.0]}"#).unwrap();
        assert!(matches!(r, SearchRegion::Box(_)));
        let r: SearchRegion = serde_json::from_str(r#"{"candidates":[[1.0],[2.0]]}"#).unwrap();
        assert_eq!(r.dim(), 1);
    }

    proptest! {
        #[test]
        fn candidate_argmin_is_permutation_invariant(
            values in prop::collection::vec(-100.0f64..100.0, 2..12),
            seed in 0u64..1000,
        ) {
            let n = values.len();
            let cands: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| cands[i].clone()).collect();
            let f = |t: &[f64]| Ok(values[t[0] as usize]);
            let a = minimize(f, &SearchRegion::candidates(cands.clone()).unwrap(), &MinimizeSettings::default()).unwrap();
            let b = minimize(f, &SearchRegion::candidates(permuted).unwrap(), &MinimizeSettings::default()).unwrap();
            let best = values.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(a.value, best);
            prop_assert_eq!(b.value, best);
            if !a.tie {
                prop_assert_eq!(a.argmin, b.argmin);
            }
        }
    }
}
