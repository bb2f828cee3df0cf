//! Calibration estimators over a shared problem description.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{BoxDomain, Design};
use crate::error::{Error, Result};
use crate::interpolate::{GramFactor, Interpolator, NuggetPolicy};
use crate::kernels::KernelSpec;
use crate::numerics::{minimize, MinimizeSettings, Minimum, QuadratureSpec, SearchRegion};

/// Computer model `y^s(x, θ)`.
pub type ModelFn = Arc<dyn Fn(&[f64], &[f64]) -> Result<f64> + Send + Sync>;

/// Response over the control domain only.
pub type ResponseFn = Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;

/// Wraps an infallible closure as a [`ModelFn`].
pub fn model_fn<F>(f: F) -> ModelFn
where
    F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
{
    Arc::new(move |x, t| Ok(f(x, t)))
}

/// Wraps an infallible closure as a [`ResponseFn`].
pub fn response_fn<F>(f: F) -> ResponseFn
where
    F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
{
    Arc::new(move |x| Ok(f(x)))
}

/// Interpolant of simulator runs on the product space `Ω × Θ`.
#[derive(Debug, Clone)]
pub struct Surrogate {
    interpolator: Arc<Interpolator>,
    fill_distance: f64,
}

impl Surrogate {
    pub fn fit(
        runs: &Design,
        values: &[f64],
        kernel: KernelSpec,
        policy: &NuggetPolicy,
        fill_resolution: Option<usize>,
    ) -> Result<Self> {
        let interpolator = Interpolator::fit(runs, values, kernel, policy)?;
        let fill_distance = match fill_resolution {
            Some(r) => runs.fill_distance(r)?,
            None => runs.fill_distance_default()?,
        };
        Ok(Self { interpolator: Arc::new(interpolator), fill_distance })
    }

    pub fn interpolator(&self) -> &Interpolator {
        &self.interpolator
    }

    pub fn fill_distance(&self) -> f64 {
        self.fill_distance
    }
}

#[derive(Clone)]
pub enum Simulator {
    Cheap(ModelFn),
    Expensive(Surrogate),
}

impl fmt::Debug for Simulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Simulator::Cheap(_) => f.write_str("Cheap(..)"),
            Simulator::Expensive(s) => f
                .debug_struct("Expensive")
                .field("runs", &s.interpolator.design().len())
                .field("kernel", s.interpolator.kernel())
                .finish(),
        }
    }
}

impl Simulator {
    pub fn cheap<F>(f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Simulator::Cheap(model_fn(f))
    }

    /// Evaluates `y^s(x, θ)`, or its surrogate for expensive codes.
    pub fn eval(&self, x: &[f64], theta: &[f64]) -> Result<f64> {
        match self {
            Simulator::Cheap(f) => f(x, theta),
            Simulator::Expensive(s) => {
                let mut z = Vec::with_capacity(x.len() + theta.len());
                z.extend_from_slice(x);
                z.extend_from_slice(theta);
                s.interpolator.predict(&z)
            }
        }
    }

    pub fn is_cheap(&self) -> bool {
        matches!(self, Simulator::Cheap(_))
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationProblem {
    domain: BoxDomain,
    theta: SearchRegion,
    physical: Design,
    physical_values: Vec<f64>,
    simulator: Simulator,
}

impl CalibrationProblem {
    pub fn new(
        domain: BoxDomain,
        theta: SearchRegion,
        physical: Design,
        physical_values: Vec<f64>,
        simulator: Simulator,
    ) -> Result<Self> {
        theta.validate()?;
        if physical.domain() != &domain {
            return Err(Error::input("physical design must live on the problem domain"));
        }
        if physical_values.len() != physical.len() {
            return Err(Error::input(format!(
                "{} physical values for {} design points",
                physical_values.len(),
                physical.len()
            )));
        }
        if let Some(i) = physical_values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("physical value {i} is not finite")));
        }
        if let Simulator::Expensive(s) = &simulator {
            let d = domain.dim();
            let runs = s.interpolator.design();
            if runs.dim() != d + theta.dim() {
                return Err(Error::input(format!(
                    "simulator runs have dimension {}, expected {}",
                    runs.dim(),
                    d + theta.dim()
                )));
            }
            for (i, p) in runs.points().iter().enumerate() {
                let (x, t) = p.split_at(d);
                if !domain.contains(x) || !theta.contains(t) {
                    return Err(Error::input(format!("simulator run {i} lies outside the product domain")));
                }
            }
        }
        Ok(Self { domain, theta, physical, physical_values, simulator })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn theta(&self) -> &SearchRegion {
        &self.theta
    }

    pub fn physical_design(&self) -> &Design {
        &self.physical
    }

    pub fn physical_values(&self) -> &[f64] {
        &self.physical_values
    }

    pub fn simulator(&self) -> &Simulator {
        &self.simulator
    }

    /// Same problem with a different simulator.
    pub fn with_simulator(&self, simulator: Simulator) -> Result<Self> {
        Self::new(self.domain.clone(), self.theta.clone(), self.physical.clone(), self.physical_values.clone(), simulator)
    }

    /// Discrepancy `y^p(x_i) − y^s(x_i, θ)` on the physical design.
    pub fn residuals(&self, theta: &[f64]) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.physical.len());
        for (i, (x, y)) in self.physical.points().iter().zip(&self.physical_values).enumerate() {
            out[i] = y - self.simulator.eval(x, theta)?;
        }
        Ok(out)
    }

    fn require_cheap(&self, method: Method) -> Result<()> {
        if self.simulator.is_cheap() {
            Ok(())
        } else {
            Err(Error::input(format!("{method} calibration needs a cheap simulator")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ko,
    KoProfile,
    ModifiedKo,
    L2,
    Ols,
    L2Projection,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::Ko, Method::KoProfile, Method::ModifiedKo, Method::L2, Method::Ols, Method::L2Projection];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ko => "ko",
            Method::KoProfile => "ko_profile",
            Method::ModifiedKo => "modified_ko",
            Method::L2 => "l2",
            Method::Ols => "ols",
            Method::L2Projection => "l2_projection",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::input(format!("unknown method `{name}`")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSettings {
    pub nugget: NuggetPolicy,
    pub optimizer: MinimizeSettings,
    /// Grid resolution for fill distances; `None` uses the per-dimension default.
    pub fill_resolution: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Nugget used for the physical-data Gram matrix, when one is factored.
    pub nugget_used: Option<f64>,
    pub simulator_nugget: Option<f64>,
    pub fill_distance: f64,
    pub simulator_fill_distance: Option<f64>,
    pub phi: Option<f64>,
    pub evaluations: usize,
    pub starts: usize,
    pub converged_starts: usize,
    pub tie: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub method: Method,
    pub theta_hat: Vec<f64>,
    /// Zero-based index into the candidate list for finite `Θ`.
    pub candidate_index: Option<usize>,
    pub objective_value: f64,
    pub diagnostics: Diagnostics,
}

impl CalibrationResult {
    /// Human-readable aligned summary.
    pub fn to_table(&self) -> String {
        let d = &self.diagnostics;
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
        let theta: Vec<String> = self.theta_hat.iter().map(|v| format!("{v:.10}")).collect();
        let mut rows = vec![
            ("method", self.method.to_string()),
            ("theta_hat", theta.join(", ")),
            ("candidate", self.candidate_index.map_or_else(|| "-".to_string(), |i| (i + 1).to_string())),
            ("objective", format!("{:.10e}", self.objective_value)),
            ("phi", opt(d.phi)),
            ("nugget", opt(d.nugget_used)),
            ("h(D)", format!("{:.6e}", d.fill_distance)),
            ("h(G)", opt(d.simulator_fill_distance)),
            ("evaluations", d.evaluations.to_string()),
            ("starts", format!("{} ({} converged)", d.starts, d.converged_starts)),
            ("tie", d.tie.to_string()),
        ];
        for note in &d.notes {
            rows.push(("note", note.clone()));
        }
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
    }
}

fn fill_distance(design: &Design, settings: &CalibrationSettings) -> Result<f64> {
    match settings.fill_resolution {
        Some(r) => design.fill_distance(r),
        None => design.fill_distance_default(),
    }
}

fn assemble(
    problem: &CalibrationProblem,
    method: Method,
    min: Minimum,
    nugget_used: Option<f64>,
    phi: Option<f64>,
    settings: &CalibrationSettings,
) -> Result<CalibrationResult> {
    let mut notes = Vec::new();
    let converged_starts = min.converged_starts();
    if matches!(problem.theta, SearchRegion::Box(_)) && converged_starts < min.starts.len() {
        notes.push(format!(
            "{} of {} optimizer starts hit the iteration limit",
            min.starts.len() - converged_starts,
            min.starts.len()
        ));
    }
    if min.tie {
        notes.push("several parameters attain the minimum; tie broken deterministically".into());
    }
    let (simulator_nugget, simulator_fill_distance) = match &problem.simulator {
        Simulator::Expensive(s) => (Some(s.interpolator.nugget_used()), Some(s.fill_distance)),
        Simulator::Cheap(_) => (None, None),
    };
    Ok(CalibrationResult {
        method,
        theta_hat: min.argmin,
        candidate_index: min.candidate_index,
        objective_value: min.value,
        diagnostics: Diagnostics {
            nugget_used,
            simulator_nugget,
            fill_distance: fill_distance(&problem.physical, settings)?,
            simulator_fill_distance,
            phi,
            evaluations: min.evaluations,
            starts: min.starts.len(),
            converged_starts,
            tie: min.tie,
            notes,
        },
    })
}

/// Kennedy–O'Hagan point estimate: the parameter minimizing the discrepancy's
/// quadratic form `εᵀ Φ⁻¹ ε` on the physical design.
pub fn ko_calibrate(
    problem: &CalibrationProblem,
    kernel: KernelSpec,
    settings: &CalibrationSettings,
) -> Result<CalibrationResult> {
    ko_with_method(problem, kernel, settings, Method::Ko)
}

fn ko_with_method(
    problem: &CalibrationProblem,
    kernel: KernelSpec,
    settings: &CalibrationSettings,
    method: Method,
) -> Result<CalibrationResult> {
    problem.require_cheap(method)?;
    if problem.physical.len() < 2 {
        return Err(Error::input("KO calibration needs at least two physical observations"));
    }
    let factor = GramFactor::for_design(&problem.physical, &kernel, &settings.nugget)?;
    let min = minimize(|t| Ok(factor.pss(&problem.residuals(t)?)), &problem.theta, &settings.optimizer)?;
    assemble(problem, method, min, Some(factor.nugget()), Some(kernel.phi()), settings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub phi: f64,
    pub theta_hat: Vec<f64>,
    pub candidate_index: Option<usize>,
    pub loglik: f64,
    /// Log-likelihood of every candidate at this `φ`, finite `Θ` only.
    pub candidate_loglik: Option<Vec<f64>>,
    pub nugget_used: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileOutcome {
    pub result: CalibrationResult,
    pub phi_hat: f64,
    pub surface: Vec<ProfilePoint>,
    /// Grid values where the Gram matrix could not be factored.
    pub skipped: Vec<f64>,
}

fn loglik_from_pss(n: usize, q: f64, log_det: f64) -> f64 {
    if q == 0.0 {
        f64::INFINITY
    } else {
        -0.5 * n as f64 * q.ln() - 0.5 * log_det
    }
}

/// Joint maximum likelihood over `θ` and a grid of scale parameters.
pub fn ko_profile_calibrate(
    problem: &CalibrationProblem,
    family: KernelSpec,
    phi_grid: &[f64],
    settings: &CalibrationSettings,
) -> Result<ProfileOutcome> {
    problem.require_cheap(Method::KoProfile)?;
    let n = problem.physical.len();
    if n < 2 {
        return Err(Error::input("profile KO calibration needs at least two physical observations"));
    }
    if phi_grid.is_empty() {
        return Err(Error::input("phi grid is empty"));
    }
    if let Some(p) = phi_grid.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::input(format!("phi grid value {p} is not positive")));
    }
    let per_phi: Vec<Result<Option<(ProfilePoint, Minimum)>>> = phi_grid
        .par_iter()
        .map(|&phi| {
            let kernel = family.with_phi(phi)?;
            let factor = match GramFactor::for_design(&problem.physical, &kernel, &settings.nugget) {
                Ok(f) => f,
                Err(Error::IllConditioned(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let log_det = factor.log_det();
            let min = minimize(|t| Ok(factor.pss(&problem.residuals(t)?)), &problem.theta, &settings.optimizer)?;
            let candidate_loglik = match &problem.theta {
                SearchRegion::Candidates { candidates } => Some(
                    candidates
                        .iter()
                        .map(|c| Ok(loglik_from_pss(n, factor.pss(&problem.residuals(c)?), log_det)))
                        .collect::<Result<Vec<f64>>>()?,
                ),
                SearchRegion::Box(_) => None,
            };
            let point = ProfilePoint {
                phi,
                theta_hat: min.argmin.clone(),
                candidate_index: min.candidate_index,
                loglik: loglik_from_pss(n, min.value, log_det),
                candidate_loglik,
                nugget_used: factor.nugget(),
            };
            Ok(Some((point, min)))
        })
        .collect();

    let mut surface = Vec::new();
    let mut minima = Vec::new();
    let mut skipped = Vec::new();
    for (phi, r) in phi_grid.iter().zip(per_phi) {
        match r? {
            Some((p, m)) => {
                surface.push(p);
                minima.push(m);
            }
            None => skipped.push(*phi),
        }
    }
    if surface.is_empty() {
        // Surface the diagnostics of the first grid value.
        GramFactor::for_design(&problem.physical, &family.with_phi(phi_grid[0])?, &settings.nugget)?;
        return Err(Error::Optimization("no grid value produced a factorable Gram matrix".into()));
    }

    let best_ll = surface.iter().map(|p| p.loglik).fold(f64::NEG_INFINITY, f64::max);
    let tol = settings.optimizer.tie_rtol * best_ll.abs().max(f64::MIN_POSITIVE);
    let tied: Vec<usize> = (0..surface.len())
        .filter(|&i| surface[i].loglik == best_ll || (best_ll.is_finite() && best_ll - surface[i].loglik <= tol))
        .collect();
    let best = *tied
        .iter()
        .min_by(|&&a, &&b| surface[a].phi.total_cmp(&surface[b].phi))
        .expect("at least one grid value is kept");

    let point = surface[best].clone();
    let mut min = minima.swap_remove(best);
    let evaluations = minima.iter().map(|m| m.evaluations).sum::<usize>() + min.evaluations;
    min.value = point.loglik;
    min.evaluations = evaluations;
    let mut result = assemble(problem, Method::KoProfile, min, Some(point.nugget_used), Some(point.phi), settings)?;
    if tied.len() > 1 {
        result.diagnostics.tie = true;
        result.diagnostics.notes.push(format!("{} grid values share the maximal likelihood", tied.len()));
    }
    if !skipped.is_empty() {
        result.diagnostics.notes.push(format!("{} grid values skipped as ill-conditioned", skipped.len()));
    }
    Ok(ProfileOutcome { result, phi_hat: point.phi, surface, skipped })
}

/// Scale-parameter schedule `φ = c · h^{−γ}` tied to the fill distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub c: f64,
    pub gamma: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { c: 1.0, gamma: 0.5 }
    }
}

impl Schedule {
    pub fn phi(&self, fill_distance: f64) -> Result<f64> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::input(format!("schedule constant c = {} must be positive", self.c)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::input(format!("schedule exponent gamma = {} must lie in [0, 1)", self.gamma)));
        }
        if !(fill_distance.is_finite() && fill_distance > 0.0) {
            return Err(Error::input(format!("fill distance {fill_distance} must be positive")));
        }
        Ok(self.c * fill_distance.powf(-self.gamma))
    }
}

/// KO calibration with the kernel scale tied to the design's fill distance.
pub fn modified_ko_calibrate(
    problem: &CalibrationProblem,
    family: KernelSpec,
    schedule: Schedule,
    settings: &CalibrationSettings,
) -> Result<CalibrationResult> {
    let h = fill_distance(&problem.physical, settings)?;
    let kernel = family.with_phi(schedule.phi(h)?)?;
    ko_with_method(problem, kernel, settings, Method::ModifiedKo)
}

fn check_quadrature(problem: &CalibrationProblem, quad: &QuadratureSpec) -> Result<()> {
    if quad.domain() != &problem.domain {
        return Err(Error::input("quadrature rule must cover the problem domain"));
    }
    Ok(())
}

fn l2_distance(problem: &CalibrationProblem, quad: &QuadratureSpec, target: &[f64], theta: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for ((t, w), y) in quad.nodes().iter().zip(quad.weights()).zip(target) {
        let r = y - problem.simulator.eval(t, theta)?;
        acc += w * r * r;
    }
    Ok(acc.sqrt())
}

/// Least L2 distance calibration against the interpolant of the physical data.
pub fn l2_calibrate(
    problem: &CalibrationProblem,
    kernel: KernelSpec,
    quad: &QuadratureSpec,
    settings: &CalibrationSettings,
) -> Result<CalibrationResult> {
    check_quadrature(problem, quad)?;
    let fit = Interpolator::fit(&problem.physical, &problem.physical_values, kernel, &settings.nugget)?;
    let target = fit.predict_many(quad.nodes())?;
    let min = minimize(|t| l2_distance(problem, quad, &target, t), &problem.theta, &settings.optimizer)?;
    assemble(problem, Method::L2, min, Some(fit.nugget_used()), Some(kernel.phi()), settings)
}

/// L2 projection of a known physical response onto the simulator family.
pub fn l2_projection(
    problem: &CalibrationProblem,
    truth: &ResponseFn,
    quad: &QuadratureSpec,
    settings: &CalibrationSettings,
) -> Result<CalibrationResult> {
    check_quadrature(problem, quad)?;
    let target = quad
        .nodes()
        .iter()
        .map(|t| truth(t))
        .collect::<Result<Vec<f64>>>()?;
    let min = minimize(|t| l2_distance(problem, quad, &target, t), &problem.theta, &settings.optimizer)?;
    assemble(problem, Method::L2Projection, min, None, None, settings)
}

/// Ordinary least squares on the physical design.
pub fn ols_calibrate(problem: &CalibrationProblem, settings: &CalibrationSettings) -> Result<CalibrationResult> {
    let min = minimize(|t| Ok(problem.residuals(t)?.norm_squared()), &problem.theta, &settings.optimizer)?;
    assemble(problem, Method::Ols, min, None, None, settings)
}
