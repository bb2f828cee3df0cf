//! Convergence sweeps of calibration estimators over refining designs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::Method;
use crate::design::Design;
use crate::error::{Error, Result};
use crate::manifest::{DesignKind, LoadedManifest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub method: Method,
    pub n: usize,
    pub fill_distance: f64,
    pub theta_hat: Vec<f64>,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSlope {
    pub method: Method,
    /// Least-squares slope of `ln error` against `ln h`; absent when some error is zero.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub reference: Vec<f64>,
    pub rows: Vec<RateRow>,
    pub slopes: Vec<RateSlope>,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::input("slope fit needs at least two paired values"));
    }
    if x.iter().chain(y).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::input("slope fit needs positive finite values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::input("slope fit needs distinct abscissae"));
    }
    Ok(sxy / sxx)
}

pub fn sweep_design(loaded: &LoadedManifest, kind: DesignKind, n: usize) -> Result<Design> {
    let domain = &loaded.manifest.domain;
    match kind {
        DesignKind::Equispaced if domain.dim() == 1 => Design::equispaced(domain, n),
        DesignKind::Equispaced => Err(Error::input("equispaced sweep designs are 1-D only; use halton")),
        DesignKind::Halton => Design::halton(domain, n, 0),
    }
}

/// Runs each method on designs of the given sizes and measures the distance
/// to the L2 projection of the manifest's `truth`.
pub fn run_rates(loaded: &LoadedManifest, sizes: &[usize], methods: &[Method]) -> Result<RateReport> {
    if sizes.len() < 3 {
        return Err(Error::input("rate sweeps need at least three design sizes"));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::input("design sizes must be strictly increasing"));
    }
    if methods.is_empty() || methods.contains(&Method::L2Projection) {
        return Err(Error::input("rate sweeps need estimators other than the projection itself"));
    }
    let kind = loaded.manifest.rates.as_ref().map(|r| r.design).unwrap_or_default();
    let simulator = loaded.simulator()?;
    let designs = sizes
        .iter()
        .map(|&n| sweep_design(loaded, kind, n))
        .collect::<Result<Vec<Design>>>()?;
    let problems = designs
        .into_iter()
        .map(|d| loaded.synthetic_problem(d, simulator.clone()))
        .collect::<Result<Vec<_>>>()?;
    let reference = loaded.run(&problems[0], Method::L2Projection)?.result().theta_hat.clone();

    let jobs: Vec<(Method, usize)> =
        methods.iter().flat_map(|&m| (0..sizes.len()).map(move |i| (m, i))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(method, i)| {
            let r = loaded.run(&problems[i], method)?;
            let r = r.result();
            let error = r.theta_hat.iter().zip(&reference).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            Ok(RateRow {
                method,
                n: sizes[i],
                fill_distance: r.diagnostics.fill_distance,
                theta_hat: r.theta_hat.clone(),
                error,
            })
        })
        .collect::<Result<Vec<RateRow>>>()?;

    let slopes = methods
        .iter()
        .map(|&method| {
            let (h, e): (Vec<f64>, Vec<f64>) =
                rows.iter().filter(|r| r.method == method).map(|r| (r.fill_distance, r.error)).unzip();
            RateSlope { method, slope: loglog_slope(&h, &e).ok() }
        })
        .collect();
    Ok(RateReport { reference, rows, slopes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::BoxDomain;
    use crate::kernels::KernelSpec;
    use crate::manifest::{Manifest, RateSpec, SimulatorSpec};
    use crate::numerics::SearchRegion;

    #[test]
    fn slope_of_power_law() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let e: Vec<f64> = h.iter().map(|v: &f64| 3.0 * v.powf(2.5)).collect();
        assert!((loglog_slope(&h, &e).unwrap() - 2.5).abs() < 1e-12);
        assert!(loglog_slope(&h, &[1.0, 0.0, 1.0, 1.0]).is_err());
        assert!(loglog_slope(&[1.0], &[1.0]).is_err());
        assert!(loglog_slope(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn sweep_on_linear_family() {
        let manifest = Manifest {
            domain: BoxDomain::interval(0.0, 1.0).unwrap(),
            theta: SearchRegion::Box(BoxDomain::interval(0.0, 4.0).unwrap()),
            physical: None,
            truth: Some("exp(x) * sin(3 * x)".into()),
            simulator: SimulatorSpec::Cheap { expression: "theta * x".into() },
            kernel: Some(KernelSpec::matern(2.5, 4.0).unwrap()),
            quadrature_order: None,
            phi_grid: Default::default(),
            schedule: Default::default(),
            settings: Default::default(),
            rates: Some(RateSpec::default()),
        };
        let loaded = LoadedManifest::from_manifest(manifest, ".".into()).unwrap();
        let report = run_rates(&loaded, &[11, 21, 41], &[Method::L2, Method::Ols]).unwrap();
        assert_eq!(report.rows.len(), 6);
        let l2: Vec<&RateRow> = report.rows.iter().filter(|r| r.method == Method::L2).collect();
        assert!(l2.windows(2).all(|w| w[1].fill_distance < w[0].fill_distance));
        assert!(l2.windows(2).all(|w| w[1].error < w[0].error));
        assert!(report.rows.iter().all(|r| r.error >= 0.0));
        assert!(run_rates(&loaded, &[11, 21], &[Method::L2]).is_err());
        assert!(run_rates(&loaded, &[11, 41, 21], &[Method::L2]).is_err());
    }
}
