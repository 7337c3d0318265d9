use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use fracwave::acceptance::{run_all, run_criterion, AcceptanceOptions, CriterionResult};
use fracwave::fraccalc::TimeGrid;
use fracwave::solver::{solve_resolvent, solve_spectral_oracle, solve_timestep, Route, SolutionField, SolverError};
use fracwave::spectral::{
    completeness_defect, eigendecompose, riesz_decomposition, verify_identities, write_spectrum_csv, RieszData,
    SpectralError,
};
use fracwave::uniqueness::{
    add_noise, build_observation_map, injectivity_report, injectivity_report_with, invert_source, relative_error,
    write_recovery_csv, ObservationMap, ObservationSetup, UniquenessError,
};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Problem};
use crate::CliError;

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn from_solver(e: SolverError) -> CliError {
    match e {
        SolverError::MissingTime(_) | SolverError::InvalidTime(_) | SolverError::NotWave(_) | SolverError::Shape(_) => {
            CliError::Config(e.to_string())
        }
        other => numerical(other),
    }
}

fn from_uniqueness(e: UniquenessError) -> CliError {
    match e {
        UniquenessError::EmptySubdomain
        | UniquenessError::IndexOutOfRange { .. }
        | UniquenessError::InvalidTimes(_)
        | UniquenessError::Shape(_)
        | UniquenessError::InvalidRegularization(_) => CliError::Config(e.to_string()),
        other => numerical(other),
    }
}

fn prepare(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn manifest(cfg: &ExperimentConfig, command: &str, results: Value) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "results": results,
    })
}

fn spectral_data(cfg: &ExperimentConfig, problem: &Problem) -> Result<Vec<RieszData>, CliError> {
    let eig = eigendecompose(&problem.matrix, cfg.spectral.cluster_tol).map_err(numerical)?;
    riesz_decomposition(&problem.matrix, &eig, cfg.spectral.contour_nodes).map_err(|e| match e {
        SpectralError::Shape(_) => CliError::Config(e.to_string()),
        other => numerical(other),
    })
}

fn run_route(cfg: &ExperimentConfig, problem: &Problem, route: Route, times: &[f64]) -> Result<SolutionField, CliError> {
    match route {
        Route::Timestep => {
            let grid = TimeGrid::new(cfg.problem.final_time, cfg.problem.steps)
                .map_err(|e| CliError::Config(format!("problem time grid: {e}")))?;
            let u = solve_timestep(&problem.matrix, &problem.source, problem.alpha, grid).map_err(from_solver)?;
            for &t in times {
                if u.time_index(t).is_none() {
                    return Err(CliError::Config(format!(
                        "output time {t} is not a node of the grid with step {}",
                        grid.step()
                    )));
                }
            }
            Ok(u)
        }
        Route::Resolvent => {
            solve_resolvent(&problem.matrix, &problem.source, problem.alpha, times, &cfg.contour()).map_err(from_solver)
        }
        Route::Spectral => {
            let data = spectral_data(cfg, problem)?;
            solve_spectral_oracle(&data, &problem.source, problem.alpha, times).map_err(from_solver)
        }
    }
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let problem = cfg.problem.build()?;
    let times = &cfg.solver.output_times;
    if times.is_empty() || times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(CliError::Config("solver.output_times must be positive and non-empty".into()));
    }
    let dir = &cfg.output.directory;
    let mut fields = Vec::new();
    for route in cfg.solver.route.routes() {
        fields.push(run_route(cfg, &problem, route, times)?);
    }
    prepare(dir)?;
    for u in &fields {
        for (i, &t) in times.iter().enumerate() {
            let k = u.time_index(t).expect("checked above");
            let name = format!("{}_t{i:03}.csv", u.route.name());
            u.write_slice_csv(k, &problem.points, problem.dim, create(dir, &name)?)?;
        }
    }
    let mut diffs = Vec::new();
    let mut w = csv::Writer::from_writer(create(dir, "route_differences.csv")?);
    w.write_record(["route_a", "route_b", "max_relative_l2"])?;
    for i in 0..fields.len() {
        for j in i + 1..fields.len() {
            let d = fields[i].relative_difference(&fields[j], times).map_err(from_solver)?;
            w.serialize((fields[i].route.name(), fields[j].route.name(), d))?;
            println!("{} vs {}: max relative l2 difference {d:.3e}", fields[i].route.name(), fields[j].route.name());
            diffs.push(json!({"a": fields[i].route, "b": fields[j].route, "max_relative_l2": d}));
        }
    }
    w.flush()?;
    let routes: Vec<Value> = fields
        .iter()
        .map(|u| {
            let mut m = u.manifest();
            // the full time-stepping history is not written, only the output slices
            m["times"] = json!(times);
            m
        })
        .collect();
    write_json(dir, "manifest.json", &manifest(cfg, "simulate", json!({"routes": routes, "differences": diffs})))?;
    Ok(())
}

pub fn spectrum(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let problem = cfg.problem.build()?;
    let data = spectral_data(cfg, &problem)?;
    let reports: Vec<_> = data
        .iter()
        .map(|d| verify_identities(&problem.matrix, d, cfg.spectral.identity_tol))
        .collect();
    let completeness = completeness_defect(&data);
    let dir = &cfg.output.directory;
    prepare(dir)?;
    write_spectrum_csv(create(dir, "spectrum.csv")?, &data, &reports)?;
    let pass = reports.iter().all(|r| r.pass) && completeness <= cfg.spectral.identity_tol;
    let clusters: Vec<Value> = data
        .iter()
        .zip(&reports)
        .map(|(d, r)| {
            json!({
                "lambda": [d.lambda.re, d.lambda.im],
                "multiplicity": d.multiplicity,
                "radius": d.radius,
                "min_resolvent_distance": d.min_resolvent_distance,
                "identities": r,
            })
        })
        .collect();
    let results = json!({"clusters": clusters, "completeness_defect": completeness, "pass": pass});
    write_json(dir, "manifest.json", &manifest(cfg, "spectrum", results))?;
    println!(
        "{} clusters, total multiplicity {}, completeness defect {completeness:.2e}",
        data.len(),
        data.iter().map(|d| d.multiplicity).sum::<usize>()
    );
    if pass {
        Ok(())
    } else {
        Err(numerical(format!(
            "projection identities exceed {:.1e}",
            cfg.spectral.identity_tol
        )))
    }
}

fn observation_map(cfg: &ExperimentConfig, problem: &Problem) -> Result<ObservationMap, CliError> {
    let omega = cfg.observation_indices(problem)?;
    let setup = ObservationSetup::new(omega, cfg.observation_times(), cfg.observation_route()?).map_err(from_uniqueness)?;
    build_observation_map(&problem.matrix, problem.alpha, &setup).map_err(from_uniqueness)
}

pub fn observability(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let problem = cfg.problem.build()?;
    let map = observation_map(cfg, &problem)?;
    let report = match cfg.observation.rank_tol {
        Some(tol) => injectivity_report_with(&map, tol),
        None => injectivity_report(&map),
    };
    let dir = &cfg.output.directory;
    prepare(dir)?;
    map.write_singular_values_csv(create(dir, "singular_values.csv")?)?;
    let verdict = json!({
        "report": report,
        "omega": map.setup.omega(),
        "sample_times": map.setup.times(),
        "map": map.metadata,
    });
    write_json(dir, "injectivity.json", &verdict)?;
    write_json(dir, "manifest.json", &manifest(cfg, "observability", verdict))?;
    println!(
        "rank {}/{}, sigma_min/sigma_max = {:.3e}, verdict {}",
        report.rank,
        report.expected_rank,
        report.ratio,
        serde_json::to_value(report.verdict)?.as_str().unwrap_or("?")
    );
    Ok(())
}

pub fn invert(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let noise = cfg.inversion.noise;
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(CliError::Config(format!("inversion.noise = {noise} must be non-negative")));
    }
    let seed = match (noise > 0.0, cfg.inversion.seed) {
        (true, None) => {
            return Err(CliError::Config(
                "noise > 0 requires an explicit seed (inversion.seed or --seed)".into(),
            ))
        }
        (_, s) => s,
    };
    let problem = cfg.problem.build()?;
    let map = observation_map(cfg, &problem)?;
    let clean = map.apply(&problem.source.stacked());
    let data = match seed {
        Some(s) if noise > 0.0 => add_noise(&clean, noise, s),
        _ => clean,
    };
    let reg = cfg.regularization(map.singular_values[0])?;
    let rec = invert_source(&map, &data, reg).map_err(from_uniqueness)?;
    let err = relative_error(&problem.source, &rec.source);
    let dir = &cfg.output.directory;
    prepare(dir)?;
    write_recovery_csv(create(dir, "recovery.csv")?, &problem.source, &rec.source)?;
    let summary = json!({
        "relative_error": err,
        "recovery": rec,
        "noise": noise,
        "seed": seed,
        "rows": map.matrix.nrows(),
        "unknowns": map.matrix.ncols(),
    });
    write_json(dir, "summary.json", &summary)?;
    write_json(dir, "manifest.json", &manifest(cfg, "invert", summary))?;
    println!(
        "relative error {err:.3e}, relative residual {:.3e}, {} parameter {:.3e}",
        rec.relative_residual, rec.method, rec.parameter
    );
    Ok(())
}

pub fn selftest(out: Option<&Path>, only: &[u8], tamper: bool) -> Result<(), CliError> {
    let opts = AcceptanceOptions {
        tamper_mittag_leffler: tamper,
    };
    let results: Vec<CriterionResult> = if only.is_empty() {
        run_all(opts)
    } else {
        only.iter().map(|&id| run_criterion(id, opts)).collect()
    };
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    println!("{} passed, {} failed", results.len() - failed.len(), failed.len());
    if let Some(dir) = out {
        prepare(dir)?;
        write_json(dir, "selftest.json", &json!({"tampered": tamper, "criteria": results}))?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Acceptance(format!("criteria {failed:?} failed")))
    }
}
