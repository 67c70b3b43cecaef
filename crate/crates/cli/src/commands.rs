use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qcarpet::bohm::{
    integrate_ensemble, seed_density_weighted, seed_uniform, TrajectorySpec,
};
use qcarpet::carpet::{render_grid, symmetry_report_for_grid, FieldGrid, FieldKind};
use qcarpet::fields::{write_samples_csv, FieldEvaluator};
use qcarpet::spectral::quadrature::QuadOptions;
use qcarpet::spectral::{
    coefficients_analytic, coefficients_quadrature_for_shape, convergence_curve, decay_exponent, recurrence_time,
    spread_count,
};
use qcarpet::verify::{run_selected, VerifyOptions, CRITERIA};
use qcarpet::SpectralState;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CoefficientMethod, RunConfig};
use crate::error::CliError;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Merges `run_config` into a serializable object so every sidecar can be re-ingested.
fn with_run_config<T: Serialize>(value: &T, config: &RunConfig) -> Result<Value, CliError> {
    let mut v = serde_json::to_value(value)?;
    match v.as_object_mut() {
        Some(map) => {
            map.insert("run_config".into(), serde_json::to_value(config)?);
            Ok(v)
        }
        None => Ok(json!({ "value": v, "run_config": config })),
    }
}

fn announce(path: &Path) {
    eprintln!("wrote {}", path.display());
}

pub fn build_state(config: &RunConfig) -> Result<SpectralState, CliError> {
    let analytic = config.coefficients == CoefficientMethod::Analytic && config.shape.is_analytic();
    let state = if analytic {
        coefficients_analytic(&config.shape, config.n_modes, &config.well)?
    } else {
        coefficients_quadrature_for_shape(&config.shape, config.n_modes, &config.well, &QuadOptions::default())?
    };
    Ok(state)
}

fn t_max(config: &RunConfig) -> f64 {
    config.t_max.unwrap_or_else(|| recurrence_time(&config.well))
}

pub fn decompose(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let state = build_state(config)?;
    let out = &config.out;
    let mut written = Vec::new();

    let csv_path = out.join("coefficients.csv");
    state.write_coefficients_csv(create(&csv_path)?)?;
    written.push(csv_path);

    let curve = convergence_curve(&state)?;
    let conv_path = out.join("convergence.csv");
    let mut w = create(&conv_path)?;
    writeln!(w, "n,P_N,H_N")?;
    for (n, p, h) in &curve {
        writeln!(w, "{n},{p:e},{}", h.map(|h| format!("{h:e}")).unwrap_or_default())?;
    }
    w.flush()?;
    written.push(conv_path);

    let upper = config.n_modes.min(100);
    let decay = match decay_exponent(&state, 10..=upper) {
        Ok(fit) => serde_json::to_value(fit)?,
        Err(e) => json!({ "error": e.to_string() }),
    };
    let spread = match spread_count(&state, 0.25) {
        Ok(n) => json!(n),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let report = json!({
        "summary": state.summary()?,
        "decay_fit": decay,
        "spread_count_25": spread,
    });
    let json_path = out.join("decompose.json");
    write_json(&json_path, &with_run_config(&report, config)?)?;
    written.push(json_path);
    Ok(written)
}

fn write_grid(grid: &FieldGrid, state: &SpectralState, config: &RunConfig, stem: &str) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    let pgm = config.out.join(format!("{stem}.pgm"));
    grid.write_pgm(create(&pgm)?)?;
    written.push(pgm);
    if config.csv_matrix {
        let csv = config.out.join(format!("{stem}.csv"));
        grid.write_csv(create(&csv)?)?;
        written.push(csv);
    }
    let side = config.out.join(format!("{stem}.json"));
    write_json(&side, &with_run_config(&grid.sidecar(state), config)?)?;
    written.push(side);
    Ok(written)
}

pub fn carpet(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let state = build_state(config)?;
    let t = t_max(config);
    let density = render_grid(&state, FieldKind::Density, config.nx, config.nt, t)?;
    let mut written = write_grid(&density, &state, config, "density")?;
    let velocity = render_grid(&state, FieldKind::Velocity, config.nx, config.nt, t)?;
    written.extend(write_grid(&velocity, &state, config, "velocity")?);

    let report = symmetry_report_for_grid(&state, &density)?;
    let path = config.out.join("symmetry.json");
    let body = json!({
        "report": report,
        "time_reversal_centre": 0.5 * t,
        "velocity_near_node_samples": velocity.near_node_count(),
    });
    write_json(&path, &with_run_config(&body, config)?)?;
    written.push(path);
    Ok(written)
}

pub fn seeds(config: &RunConfig, state: &SpectralState) -> Result<Vec<f64>, CliError> {
    if let Some(p) = &config.seeds.positions {
        let mut p = p.clone();
        p.sort_by(|a, b| a.total_cmp(b));
        return Ok(p);
    }
    if config.seeds.density_weighted {
        return Ok(seed_density_weighted(state, config.seeds.count)?);
    }
    let a = config.seeds.half_width.unwrap_or(0.5 * config.well.width);
    Ok(seed_uniform(config.seeds.count, a, &config.well)?)
}

pub fn trajectories(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let state = build_state(config)?;
    let seeds = seeds(config, &state)?;
    let t = t_max(config);
    let atol = config.atol.unwrap_or(1e-10 * config.well.length);
    let specs: Vec<TrajectorySpec> = seeds
        .iter()
        .map(|&x0| TrajectorySpec::new(x0, (0.0, t), config.samples, &config.well).with_tolerances(config.rtol, atol))
        .collect();
    let ensemble = integrate_ensemble(&state, &specs)?;
    let diag = ensemble.diagnostics();
    for m in diag.per_member.iter().filter(|m| m.status != qcarpet::bohm::MemberStatus::Completed) {
        eprintln!("trajectory {} (x0 = {}) failed: {:?}", m.id, m.x0, m.status);
    }
    if !ensemble.crossings.is_empty() {
        eprintln!("warning: {} ordering violations between neighbours", ensemble.crossings.len());
    }

    let csv = config.out.join("trajectories.csv");
    ensemble.write_csv(create(&csv)?)?;
    let side = config.out.join("trajectories.json");
    let body = json!({
        "diagnostics": diag,
        "crossings": ensemble.crossings,
        "seeds": seeds,
        "t_max": t,
    });
    write_json(&side, &with_run_config(&body, config)?)?;
    Ok(vec![csv, side])
}

pub fn point(config: &RunConfig, xs: &[f64], ts: &[f64]) -> Result<Vec<PathBuf>, CliError> {
    if xs.is_empty() || ts.is_empty() {
        return Err(CliError::Validation("point queries need at least one --x and one --t".into()));
    }
    let state = build_state(config)?;
    let eval = FieldEvaluator::new(&state);
    let mut samples = Vec::with_capacity(xs.len() * ts.len());
    for &t in ts {
        for &x in xs {
            samples.push(eval.sample(x, t)?);
        }
    }
    let path = config.out.join("points.csv");
    write_samples_csv(&samples, create(&path)?)?;
    Ok(vec![path])
}

pub fn verify(config: &RunConfig, only: &[u32], tau_scale: f64) -> Result<Vec<PathBuf>, CliError> {
    let ids: Vec<u32> = if only.is_empty() {
        CRITERIA.iter().map(|(i, _)| *i).collect()
    } else {
        if let Some(bad) = only.iter().find(|i| !CRITERIA.iter().any(|(c, _)| c == *i)) {
            return Err(CliError::Validation(format!("no acceptance criterion {bad}")));
        }
        only.to_vec()
    };
    let opts = VerifyOptions {
        tau_scale,
        ..VerifyOptions::default()
    };
    let report = run_selected(&ids, &opts);
    for c in &report.checks {
        println!("{}", c.line());
    }
    let path = config.out.join("verify.json");
    write_json(&path, &with_run_config(&report, config)?)?;
    announce(&path);
    if report.all_passed() {
        Ok(vec![])
    } else {
        let failed: Vec<u32> = report.checks.iter().filter(|c| !c.passed).map(|c| c.id).collect();
        Err(CliError::Acceptance(format!("criteria {failed:?} failed")))
    }
}

pub fn report(paths: &[PathBuf]) {
    for p in paths {
        announce(p);
    }
}
