//! JSON problem manifests and CSV data loading.
//!
//! ```json
//! {
//!   "domain": { "lower": [0.0], "upper": [1.0] },
//!   "theta": { "lower": [0.0], "upper": [4.0] },
//!   "physical": "physical.csv",
//!   "truth": "exp(x) * sin(3 * x)",
//!   "simulator": { "kind": "cheap", "expression": "theta * x" },
//!   "kernel": { "family": "matern", "nu": 2.5, "phi": 4.0 }
//! }
//! ```
//!
//! CSV files carry a header row. Physical data has the control coordinates
//! followed by the response; simulator runs have control coordinates, then
//! calibration coordinates, then the response. Relative paths resolve
//! against the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibrate::{
    ko_calibrate, ko_profile_calibrate, l2_calibrate, l2_projection, modified_ko_calibrate, ols_calibrate,
    CalibrationProblem, CalibrationResult, CalibrationSettings, Method, ProfileOutcome, ResponseFn, Schedule,
    Simulator, Surrogate,
};
use crate::design::{BoxDomain, Design};
use crate::error::{Error, Result};
use crate::expression::Expression;
use crate::kernels::KernelSpec;
use crate::numerics::{QuadratureSpec, SearchRegion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub domain: BoxDomain,
    pub theta: SearchRegion,
    /// CSV of physical observations; optional when only rate sweeps are run.
    #[serde(default)]
    pub physical: Option<PathBuf>,
    /// Closed-form physical response, for the L2 projection and rate sweeps.
    #[serde(default)]
    pub truth: Option<String>,
    pub simulator: SimulatorSpec,
    /// Kernel for the physical data.
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub quadrature_order: Option<usize>,
    #[serde(default)]
    pub phi_grid: PhiGrid,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub settings: CalibrationSettings,
    #[serde(default)]
    pub rates: Option<RateSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SimulatorSpec {
    Cheap { expression: String },
    Expensive { runs: PathBuf, kernel: KernelSpec },
}

/// Equispaced grid of `steps` scale values on `[start, stop]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiGrid {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Default for PhiGrid {
    fn default() -> Self {
        Self { start: 1.0, stop: 6.0, steps: 51 }
    }
}

impl PhiGrid {
    /// Parses `start:stop:steps`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || Error::input(format!("phi grid `{text}` is not of the form start:stop:steps"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
        let grid = Self { start, stop, steps };
        grid.values()?;
        Ok(grid)
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.start > 0.0 && self.start.is_finite() && self.stop.is_finite() && self.stop >= self.start) {
            return Err(Error::input(format!("phi grid bounds {}..{} are invalid", self.start, self.stop)));
        }
        match self.steps {
            0 => Err(Error::input("phi grid needs at least one step")),
            1 => Ok(vec![self.start]),
            s => {
                let dx = (self.stop - self.start) / (s - 1) as f64;
                let mut v: Vec<f64> = (0..s).map(|i| self.start + i as f64 * dx).collect();
                v[s - 1] = self.stop;
                Ok(v)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    #[default]
    Equispaced,
    Halton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSpec {
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub design: DesignKind,
    #[serde(default = "default_rate_methods")]
    pub methods: Vec<Method>,
}

fn default_rate_methods() -> Vec<Method> {
    vec![Method::L2, Method::Ols]
}

impl Default for RateSpec {
    fn default() -> Self {
        Self { sizes: Vec::new(), design: DesignKind::default(), methods: default_rate_methods() }
    }
}

/// Output of a single method; the profile variant also carries its surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MethodOutput {
    Profile(ProfileOutcome),
    Plain(CalibrationResult),
}

impl MethodOutput {
    pub fn result(&self) -> &CalibrationResult {
        match self {
            MethodOutput::Profile(p) => &p.result,
            MethodOutput::Plain(r) => r,
        }
    }
}

/// A manifest together with the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub manifest: Manifest,
    pub base: PathBuf,
    /// Raw manifest bytes as read from disk.
    pub bytes: Vec<u8>,
}

impl LoadedManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let manifest: Manifest = serde_json::from_slice(&bytes)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let loaded = Self { manifest, base, bytes };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn from_manifest(manifest: Manifest, base: PathBuf) -> Result<Self> {
        let bytes = serde_json::to_vec(&manifest)?;
        let loaded = Self { manifest, base, bytes };
        loaded.validate()?;
        Ok(loaded)
    }

    fn validate(&self) -> Result<()> {
        let m = &self.manifest;
        m.theta.validate()?;
        if let Some(rates) = &m.rates {
            if rates.sizes.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::input("rate sizes must be strictly increasing"));
            }
        }
        m.phi_grid.values()?;
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn quadrature(&self) -> Result<QuadratureSpec> {
        match self.manifest.quadrature_order {
            Some(order) => QuadratureSpec::new(&self.manifest.domain, order),
            None => QuadratureSpec::with_default_order(&self.manifest.domain),
        }
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        self.manifest.kernel.ok_or_else(|| Error::input("manifest has no `kernel` for the physical data"))
    }

    pub fn truth(&self) -> Result<ResponseFn> {
        let source = self
            .manifest
            .truth
            .as_deref()
            .ok_or_else(|| Error::input("manifest has no `truth` expression"))?;
        let expr = Expression::parse(source, self.manifest.domain.dim(), 0)?;
        Ok(std::sync::Arc::new(move |x: &[f64]| expr.eval(x, &[])))
    }

    pub fn simulator(&self) -> Result<Simulator> {
        let m = &self.manifest;
        let d = m.domain.dim();
        let q = m.theta.dim();
        match &m.simulator {
            SimulatorSpec::Cheap { expression } => {
                let expr = Expression::parse(expression, d, q)?;
                Ok(Simulator::Cheap(std::sync::Arc::new(move |x: &[f64], t: &[f64]| expr.eval(x, t))))
            }
            SimulatorSpec::Expensive { runs, kernel } => {
                let path = self.resolve(runs);
                let (points, values) = read_points(&path, d + q)?;
                let product = m.domain.product(&theta_bounds(&m.theta)?);
                let design = Design::new(points, product)?;
                let s = Surrogate::fit(&design, &values, *kernel, &m.settings.nugget, m.settings.fill_resolution)?;
                Ok(Simulator::Expensive(s))
            }
        }
    }

    /// Problem built from the manifest's physical CSV.
    pub fn problem(&self) -> Result<CalibrationProblem> {
        let m = &self.manifest;
        let path = m.physical.as_ref().ok_or_else(|| Error::input("manifest has no `physical` data file"))?;
        let (points, values) = read_points(&self.resolve(path), m.domain.dim())?;
        let design = Design::new(points, m.domain.clone())?;
        CalibrationProblem::new(m.domain.clone(), m.theta.clone(), design, values, self.simulator()?)
    }

    /// Problem on a generated design with responses from the `truth` expression.
    pub fn synthetic_problem(&self, design: Design, simulator: Simulator) -> Result<CalibrationProblem> {
        let truth = self.truth()?;
        let values = design.points().iter().map(|x| truth(x)).collect::<Result<Vec<f64>>>()?;
        let m = &self.manifest;
        CalibrationProblem::new(m.domain.clone(), m.theta.clone(), design, values, simulator)
    }

    pub fn run(&self, problem: &CalibrationProblem, method: Method) -> Result<MethodOutput> {
        let m = &self.manifest;
        let s = &m.settings;
        Ok(match method {
            Method::Ko => MethodOutput::Plain(ko_calibrate(problem, self.kernel()?, s)?),
            Method::KoProfile => {
                MethodOutput::Profile(ko_profile_calibrate(problem, self.kernel()?, &m.phi_grid.values()?, s)?)
            }
            Method::ModifiedKo => MethodOutput::Plain(modified_ko_calibrate(problem, self.kernel()?, m.schedule, s)?),
            Method::L2 => MethodOutput::Plain(l2_calibrate(problem, self.kernel()?, &self.quadrature()?, s)?),
            Method::Ols => MethodOutput::Plain(ols_calibrate(problem, s)?),
            Method::L2Projection => {
                MethodOutput::Plain(l2_projection(problem, &self.truth()?, &self.quadrature()?, s)?)
            }
        })
    }
}

fn theta_bounds(theta: &SearchRegion) -> Result<BoxDomain> {
    match theta {
        SearchRegion::Box(b) => Ok(b.clone()),
        SearchRegion::Candidates { candidates } => {
            let q = candidates[0].len();
            let lower: Vec<f64> =
                (0..q).map(|j| candidates.iter().map(|c| c[j]).fold(f64::INFINITY, f64::min)).collect();
            let upper: Vec<f64> =
                (0..q).map(|j| candidates.iter().map(|c| c[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
            // A single candidate value gives a degenerate axis; widen it slightly.
            let upper = lower.iter().zip(upper).map(|(l, u)| if u > *l { u } else { l + 1.0 }).collect();
            BoxDomain::new(lower, upper)
        }
    }
}

/// Reads a CSV with a header row into `dim` coordinate columns and a trailing
/// value column.
pub fn read_points(path: &Path, dim: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let rows = read_table(path)?;
    let mut points = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        if row.len() != dim + 1 {
            return Err(Error::input(format!(
                "{}: row {} has {} columns, expected {}",
                path.display(),
                i + 1,
                row.len(),
                dim + 1
            )));
        }
        let mut row = row;
        values.push(row.pop().expect("nonempty row"));
        points.push(row);
    }
    if points.is_empty() {
        return Err(Error::input(format!("{} has no data rows", path.display())));
    }
    Ok((points, values))
}

/// Reads a headered CSV of numbers.
pub fn read_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    Error::input(format!("{}: row {} has non-numeric field `{field}`", path.display(), i + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    #[test]
    fn phi_grid_parsing() {
        let g = PhiGrid::parse("1:6:51").unwrap();
        let v = g.values().unwrap();
        assert_eq!(v.len(), 51);
        assert_eq!(v[0], 1.0);
        assert_eq!(v[50], 6.0);
        assert!((v[1] - 1.1).abs() < 1e-15);
        assert_eq!(PhiGrid::default(), g);
        assert!(PhiGrid::parse("1:6").is_err());
        assert!(PhiGrid::parse("0:6:3").is_err());
        assert!(PhiGrid::parse("3:2:3").is_err());
        assert_eq!(PhiGrid::parse("2:2:1").unwrap().values().unwrap(), vec![2.0]);
    }

    #[test]
    fn loads_cheap_manifest_and_runs() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "phys.csv", "x,y\n0,0\n0.5,0.5\n1,1\n");
        let m = write(
            dir.path(),
            "m.json",
            r#"{
                "domain": {"lower": [0.0], "upper": [1.0]},
                "theta": {"candidates": [[0.5], [1.0], [2.0]]},
                "physical": "phys.csv",
                "truth": "x",
                "simulator": {"kind": "cheap", "expression": "theta * x"},
                "kernel": {"family": "gaussian", "phi": 1.0}
            }"#,
        );
        let loaded = LoadedManifest::load(&m).unwrap();
        let p = loaded.problem().unwrap();
        assert_eq!(p.physical_design().len(), 3);
        for method in Method::ALL {
            let out = loaded.run(&p, method).unwrap();
            assert_eq!(out.result().candidate_index, Some(1), "{method}");
            assert_eq!(out.result().theta_hat, vec![1.0]);
        }
    }

    #[test]
    fn loads_expensive_manifest() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "phys.csv", "x,y\n0,0\n1,2\n");
        let mut runs = String::from("x,theta,y\n");
        for i in 0..5 {
            for j in 0..5 {
                let (x, t) = (i as f64 / 4.0, 1.0 + j as f64 / 4.0);
                runs.push_str(&format!("{x},{t},{}\n", x * t));
            }
        }
        write(dir.path(), "runs.csv", &runs);
        let m = write(
            dir.path(),
            "m.json",
            r#"{
                "domain": {"lower": [0.0], "upper": [1.0]},
                "theta": {"lower": [1.0], "upper": [2.0]},
                "physical": "phys.csv",
                "simulator": {"kind": "expensive", "runs": "runs.csv", "kernel": {"family": "gaussian", "phi": 1.0}}
            }"#,
        );
        let loaded = LoadedManifest::load(&m).unwrap();
        let p = loaded.problem().unwrap();
        let r = loaded.run(&p, Method::Ols).unwrap();
        assert!((r.result().theta_hat[0] - 2.0).abs() < 1e-4);
        assert!(loaded.run(&p, Method::Ko).is_err());
    }

    #[test]
    fn rejects_malformed_input() {
        let dir = tempfile::tempdir().unwrap();
        let bad_field = write(
            dir.path(),
            "a.json",
            r#"{"domain": {"lower": [0.0], "upper": [1.0]}, "theta": {"lower": [0.0], "upper": [1.0]},
                "simulator": {"kind": "cheap", "expression": "theta"}, "colour": 1}"#,
        );
        assert!(LoadedManifest::load(&bad_field).is_err());
        write(dir.path(), "p.csv", "x,y\n0,abc\n");
        let m = write(
            dir.path(),
            "b.json",
            r#"{"domain": {"lower": [0.0], "upper": [1.0]}, "theta": {"lower": [0.0], "upper": [1.0]},
                "physical": "p.csv", "simulator": {"kind": "cheap", "expression": "theta"}}"#,
        );
        let loaded = LoadedManifest::load(&m).unwrap();
        assert!(matches!(loaded.problem(), Err(Error::Input(_))));
        assert!(loaded.truth().is_err());
        assert!(loaded.kernel().is_err());
        assert!(LoadedManifest::load(&dir.path().join("missing.json")).is_err());
    }
}
