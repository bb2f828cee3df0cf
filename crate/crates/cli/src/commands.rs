use std::path::Path;

use calibkit::calibrate::{
    ko_calibrate, ko_profile_calibrate, l2_calibrate, l2_projection, modified_ko_calibrate, CalibrationSettings,
    Schedule,
};
use calibkit::example1::{self, Example1, SCALE_SQ};
use calibkit::interpolate::{GramFactor, Interpolator, NuggetPolicy};
use calibkit::manifest::SimulatorSpec;
use calibkit::numerics::QuadratureSpec;
use calibkit::{nystrom_eig, run_rates, Design, Error, LoadedManifest, Method, MethodOutput, PhiGrid};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::json;

use crate::output::{header, Cell, OutputDir};
use crate::Failure;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

#[derive(Serialize)]
struct GoldenCheck {
    name: String,
    expected: String,
    actual: String,
    pass: bool,
}

fn check(checks: &mut Vec<GoldenCheck>, name: &str, expected: String, actual: String, pass: bool) {
    checks.push(GoldenCheck { name: name.to_string(), expected, actual, pass });
}

#[derive(Serialize)]
struct Selection {
    n: usize,
    fill_distance: f64,
    ko: usize,
    ko_profile: usize,
    ko_profile_phi: f64,
    modified_ko: usize,
    modified_ko_phi: f64,
    l2: usize,
    l2_projection: usize,
}

pub fn example1(out: &Path, sizes: &[usize], quad_order: usize, phi_grid: &str) -> Result<(), Failure> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] < 2 {
        return Err(usage("--sizes must be strictly increasing and at least 2"));
    }
    let grid = PhiGrid::parse(phi_grid)?;
    let config = json!({ "command": "example1", "sizes": sizes, "quad_order": quad_order, "phi_grid": grid });
    let dir = OutputDir::create(out, config.to_string().as_bytes())?;

    let ex = Example1::new(quad_order)?;
    let eig = ex.eigensystem();
    let lambdas = eig.eigenvalues().to_vec();
    let domain = Example1::domain();
    let kernel = Example1::kernel();
    let settings = CalibrationSettings::default();
    let quad = QuadratureSpec::with_default_order(&domain)?;

    dir.csv(
        "eigenvalues.csv",
        &header(&["index", "lambda"]),
        &lambdas.iter().enumerate().map(|(i, l)| vec![Cell::from(i + 1), Cell::from(*l)]).collect::<Vec<_>>(),
    )?;
    let samples: Vec<Vec<Cell>> = (0..201)
        .map(|j| {
            let x = if j == 200 { 1.0 } else { -1.0 + j as f64 * 0.01 };
            let mut row = vec![Cell::from(x)];
            row.extend((1..=3).map(|k| Cell::from(ex.discrepancy(k, &[x]))));
            row
        })
        .collect();
    dir.csv("eigen.csv", &header(&["x", "eps1", "eps2", "eps3"]), &samples)?;

    let design = Design::equispaced(&domain, 11)?;
    let factor = GramFactor::for_design(&design, &kernel, &settings.nugget)?;
    let pss: Vec<f64> = (1..=3)
        .map(|k| {
            let y = DVector::from_iterator(design.len(), design.points().iter().map(|x| ex.discrepancy(k, x)));
            factor.pss(&y)
        })
        .collect();
    let norms = (1..=3).map(|k| quad.l2_norm(ex.discrepancy_fn(k))).collect::<calibkit::Result<Vec<f64>>>()?;
    dir.csv(
        "pss.csv",
        &header(&["candidate", "pss", "l2_norm", "nugget_used"]),
        &(0..3)
            .map(|i| vec![Cell::from(i + 1), pss[i].into(), norms[i].into(), factor.nugget().into()])
            .collect::<Vec<_>>(),
    )?;

    let phis = grid.values()?;
    let base = ex.problem(11)?;
    let profile = ko_profile_calibrate(&base, kernel, &phis, &settings)?;
    let rows: Vec<Vec<Cell>> = profile
        .surface
        .iter()
        .map(|pt| {
            let mut row = vec![Cell::from(pt.phi)];
            row.extend(pt.candidate_loglik.as_ref().expect("finite candidates").iter().map(|v| Cell::from(*v)));
            row.push(pt.nugget_used.into());
            row
        })
        .collect();
    dir.csv("profile.csv", &header(&["phi", "loglik1", "loglik2", "loglik3", "nugget_used"]), &rows)?;

    let mut selections = Vec::new();
    for &n in sizes {
        let p = ex.problem(n)?;
        let pick = |r: &calibkit::CalibrationResult| r.candidate_index.expect("finite candidates") + 1;
        let ko = ko_calibrate(&p, kernel, &settings)?;
        let prof = ko_profile_calibrate(&p, kernel, &phis, &settings)?;
        let modified = modified_ko_calibrate(&p, kernel, Schedule::default(), &settings)?;
        let l2 = l2_calibrate(&p, kernel, &quad, &settings)?;
        let proj = l2_projection(&p, &Example1::truth(), &quad, &settings)?;
        selections.push(Selection {
            n,
            fill_distance: ko.diagnostics.fill_distance,
            ko: pick(&ko),
            ko_profile: pick(&prof.result),
            ko_profile_phi: prof.phi_hat,
            modified_ko: pick(&modified),
            modified_ko_phi: modified.diagnostics.phi.unwrap_or(f64::NAN),
            l2: pick(&l2),
            l2_projection: pick(&proj),
        });
    }
    dir.csv(
        "selections.csv",
        &header(&[
            "n",
            "fill_distance",
            "ko",
            "ko_profile",
            "ko_profile_phi",
            "modified_ko",
            "modified_ko_phi",
            "l2",
            "l2_projection",
        ]),
        &selections
            .iter()
            .map(|s| {
                vec![
                    Cell::from(s.n),
                    s.fill_distance.into(),
                    s.ko.into(),
                    s.ko_profile.into(),
                    s.ko_profile_phi.into(),
                    s.modified_ko.into(),
                    s.modified_ko_phi.into(),
                    s.l2.into(),
                    s.l2_projection.into(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;

    let mut checks = Vec::new();
    for (i, want) in [1.546, 0.398].into_iter().enumerate() {
        let got = lambdas[i];
        check(&mut checks, &format!("lambda{}", i + 1), format!("{want} +/- 0.01"), format!("{got:.6}"), (got - want).abs() <= 0.01);
    }
    for (i, want) in [12.594, 57.908, 17978.65].into_iter().enumerate() {
        let got = pss[i];
        check(&mut checks, &format!("pss{}", i + 1), format!("{want} +/- 1%"), format!("{got:.6}"), ((got - want) / want).abs() <= 0.01);
    }
    check(
        &mut checks,
        "pss_nugget",
        "<= 1e-10".into(),
        format!("{:e}", factor.nugget()),
        factor.nugget() <= 1e-10,
    );
    for (i, (want, tol)) in [(SCALE_SQ.sqrt(), 1e-3), (SCALE_SQ.sqrt(), 1e-3), (1.0, 1e-6)].into_iter().enumerate() {
        let got = norms[i];
        check(&mut checks, &format!("l2_norm{}", i + 1), format!("{want:.6} +/- {tol:e}"), format!("{got:.9}"), (got - want).abs() <= tol);
    }
    for s in &selections {
        check(&mut checks, &format!("ko_n{}", s.n), "1".into(), s.ko.to_string(), s.ko == 1);
        check(&mut checks, &format!("l2_n{}", s.n), "3".into(), s.l2.to_string(), s.l2 == 3);
        check(&mut checks, &format!("l2_projection_n{}", s.n), "3".into(), s.l2_projection.to_string(), s.l2_projection == 3);
        if s.n >= 41 {
            check(&mut checks, &format!("modified_ko_n{}", s.n), "3".into(), s.modified_ko.to_string(), s.modified_ko == 3);
        }
    }
    let arg = profile.result.candidate_index.expect("finite candidates") + 1;
    check(
        &mut checks,
        "profile_argmax",
        format!("theta=1, phi={}", phis[0]),
        format!("theta={arg}, phi={}", profile.phi_hat),
        arg == 1 && profile.phi_hat == phis[0],
    );
    let failed = checks.iter().filter(|c| !c.pass).count();

    let kl = (1..=3)
        .map(|k| eig.kl_density_exponent(ex.discrepancy_fn(k), eig.num_modes()))
        .collect::<calibkit::Result<Vec<f64>>>()?;
    dir.json(
        "summary.json",
        &json!({
            "eigenvalues": lambdas,
            "pss": pss,
            "l2_norms": norms,
            "nugget_used": factor.nugget(),
            "kl_density_exponent": kl,
            "profile": { "theta": arg, "phi": profile.phi_hat, "loglik": profile.result.objective_value },
            "selections": selections,
            "golden": checks,
            "pass": failed == 0,
        }),
    )?;

    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &checks {
        println!(
            "{} {:<width$}  expected {}, got {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.expected,
            c.actual
        );
    }
    if failed > 0 {
        Err(Failure::Golden(failed))
    } else {
        Ok(())
    }
}

fn applicable(loaded: &LoadedManifest, method: Method) -> Option<&'static str> {
    let m = &loaded.manifest;
    let cheap = matches!(m.simulator, SimulatorSpec::Cheap { .. });
    match method {
        Method::Ko | Method::KoProfile | Method::ModifiedKo if !cheap => Some("needs a cheap simulator"),
        Method::Ko | Method::KoProfile | Method::ModifiedKo | Method::L2 if m.kernel.is_none() => {
            Some("manifest has no kernel")
        }
        Method::L2Projection if m.truth.is_none() => Some("manifest has no truth expression"),
        _ => None,
    }
}

fn write_profile(dir: &OutputDir, output: &MethodOutput) -> calibkit::Result<()> {
    let MethodOutput::Profile(p) = output else {
        return Ok(());
    };
    let q = p.result.theta_hat.len();
    let mut names = vec!["phi".to_string()];
    names.extend((1..=q).map(|i| format!("theta{i}")));
    names.push("loglik".into());
    let rows: Vec<Vec<Cell>> = p
        .surface
        .iter()
        .map(|pt| {
            let mut row = vec![Cell::from(pt.phi)];
            row.extend(pt.theta_hat.iter().map(|v| Cell::from(*v)));
            row.push(pt.loglik.into());
            row
        })
        .collect();
    dir.csv("profile.csv", &names, &rows)
}

pub fn calibrate(manifest: &Path, method: &str, out: &Path) -> Result<(), Failure> {
    let loaded = LoadedManifest::load(manifest)?;
    let problem = loaded.problem()?;
    let dir = OutputDir::create(out, &loaded.bytes)?;
    if method == "all" {
        let mut results = Vec::new();
        let mut skipped = Vec::new();
        for m in Method::ALL {
            if let Some(reason) = applicable(&loaded, m) {
                skipped.push(json!({ "method": m, "reason": reason }));
                continue;
            }
            results.push(loaded.run(&problem, m)?);
        }
        let table: String = results.iter().map(|r| r.result().to_table()).collect::<Vec<_>>().join("\n");
        print!("{table}");
        for r in &results {
            write_profile(&dir, r)?;
        }
        dir.json("result.json", &json!({ "results": results, "skipped": skipped }))?;
        dir.text("result.txt", &table)?;
    } else {
        let m = Method::parse(method).map_err(|e| usage(e.to_string()))?;
        let r = loaded.run(&problem, m)?;
        let table = r.result().to_table();
        print!("{table}");
        write_profile(&dir, &r)?;
        dir.json("result.json", &r)?;
        dir.text("result.txt", &table)?;
    }
    Ok(())
}

pub fn rates(manifest: &Path, sizes: Option<&[usize]>, methods: Option<&str>, out: &Path) -> Result<(), Failure> {
    let loaded = LoadedManifest::load(manifest)?;
    let spec = loaded.manifest.rates.clone().unwrap_or_default();
    let sizes = sizes.map(<[usize]>::to_vec).unwrap_or(spec.sizes);
    if sizes.len() < 3 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("rate sweeps need at least three strictly increasing sizes"));
    }
    let methods = match methods {
        Some(list) => list
            .split(',')
            .map(|s| Method::parse(s.trim()))
            .collect::<calibkit::Result<Vec<Method>>>()
            .map_err(|e| usage(e.to_string()))?,
        None => spec.methods,
    };
    let report = run_rates(&loaded, &sizes, &methods)?;
    let dir = OutputDir::create(out, &loaded.bytes)?;
    let q = report.reference.len();
    let mut names = vec!["method".to_string(), "n".into(), "fill_distance".into()];
    names.extend((1..=q).map(|i| format!("theta{i}")));
    names.push("error".into());
    let rows: Vec<Vec<Cell>> = report
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![Cell::from(r.method.name()), r.n.into(), r.fill_distance.into()];
            row.extend(r.theta_hat.iter().map(|v| Cell::from(*v)));
            row.push(r.error.into());
            row
        })
        .collect();
    dir.csv("rates.csv", &names, &rows)?;
    dir.csv(
        "slopes.csv",
        &header(&["method", "slope"]),
        &report.slopes.iter().map(|s| vec![Cell::from(s.method.name()), s.slope.into()]).collect::<Vec<_>>(),
    )?;
    dir.json("rates.json", &report)?;
    for s in &report.slopes {
        match s.slope {
            Some(v) => println!("{:<14} slope {v:.4}", s.method.name()),
            None => println!("{:<14} slope undefined (zero error)", s.method.name()),
        }
    }
    Ok(())
}

fn manifest_quadrature(loaded: &LoadedManifest, order: Option<usize>) -> calibkit::Result<QuadratureSpec> {
    match order {
        Some(o) => QuadratureSpec::new(&loaded.manifest.domain, o),
        None => loaded.quadrature(),
    }
}

fn coordinate_names(dim: usize) -> Vec<String> {
    if dim == 1 {
        vec!["x".into()]
    } else {
        (1..=dim).map(|i| format!("x{i}")).collect()
    }
}

pub fn eig(manifest: &Path, quad_order: Option<usize>, modes: usize, out: &Path) -> Result<(), Failure> {
    let loaded = LoadedManifest::load(manifest)?;
    let domain = &loaded.manifest.domain;
    let order = quad_order.unwrap_or(if domain.dim() == 1 { example1::DEFAULT_QUAD_ORDER } else { 24 });
    let system = nystrom_eig(loaded.kernel()?, domain, order, modes)?;
    let dir = OutputDir::create(out, &loaded.bytes)?;
    dir.csv(
        "eigenvalues.csv",
        &header(&["index", "lambda"]),
        &system.eigenvalues().iter().enumerate().map(|(i, l)| vec![Cell::from(i + 1), Cell::from(*l)]).collect::<Vec<_>>(),
    )?;
    let mut names = coordinate_names(domain.dim());
    names.extend((1..=modes).map(|i| format!("f{i}")));
    let rows: Vec<Vec<Cell>> = system
        .quadrature()
        .nodes()
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let mut row: Vec<Cell> = x.iter().map(|v| Cell::from(*v)).collect();
            row.extend((0..modes).map(|i| Cell::from(system.node_values(i)[j])));
            row
        })
        .collect();
    dir.csv("eigenfunctions.csv", &names, &rows)?;
    for (i, l) in system.eigenvalues().iter().enumerate() {
        println!("lambda{} = {l:.10e}", i + 1);
    }
    Ok(())
}

pub fn interp(manifest: &Path, quad_order: Option<usize>, out: &Path) -> Result<(), Failure> {
    let loaded = LoadedManifest::load(manifest)?;
    let problem = loaded.problem()?;
    let policy: &NuggetPolicy = &loaded.manifest.settings.nugget;
    let fit = Interpolator::fit(problem.physical_design(), problem.physical_values(), loaded.kernel()?, policy)?;
    let quad = manifest_quadrature(&loaded, quad_order)?;
    let predictions = fit.predict_many(quad.nodes())?;
    let dir = OutputDir::create(out, &loaded.bytes)?;
    let mut names = coordinate_names(loaded.manifest.domain.dim());
    names.push("prediction".into());
    let rows: Vec<Vec<Cell>> = quad
        .nodes()
        .iter()
        .zip(&predictions)
        .map(|(x, y)| {
            let mut row: Vec<Cell> = x.iter().map(|v| Cell::from(*v)).collect();
            row.push(Cell::from(*y));
            row
        })
        .collect();
    dir.csv("predictions.csv", &names, &rows)?;
    let fill = match loaded.manifest.settings.fill_resolution {
        Some(r) => problem.physical_design().fill_distance(r)?,
        None => problem.physical_design().fill_distance_default()?,
    };
    let loglik = match fit.profile_loglik() {
        Ok(v) => Some(v),
        Err(Error::UndefinedLikelihood(_)) | Err(Error::Input(_)) => None,
        Err(e) => return Err(e.into()),
    };
    dir.json(
        "interpolant.json",
        &json!({
            "interpolant": fit.to_record(),
            "native_norm_sq": fit.native_norm_sq(),
            "profile_loglik": loglik,
            "fill_distance": fill,
        }),
    )?;
    println!("nugget_used    {:e}", fit.nugget_used());
    println!("native_norm_sq {:.10e}", fit.native_norm_sq());
    println!("fill_distance  {fill:.6e}");
    Ok(())
}
