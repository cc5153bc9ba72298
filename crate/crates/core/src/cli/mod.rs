//! Scenario runs, convergence sweeps, self-checks, and CSV output.

mod check;
mod config;

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

pub use check::{check, CheckOutcome, CheckSummary};
pub use config::{coulomb_initial_density, Scenario, ScenarioConfig};

use crate::diagnostics::{
    convergence_order, dissipation_from_gradient, error_norms, fisher_from_gradient, kinetic_energy, mass, momentum,
    DiagnosticsRecord, ErrorNorms,
};
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::integrators::step;
use crate::models::EnergyKind;

#[derive(Debug, Clone)]
pub struct RunReport {
    pub records: Vec<DiagnosticsRecord>,
    pub mean_iterations: f64,
    pub max_iterations: usize,
    /// Errors at `t_end` against the exact solution, when one exists.
    pub final_errors: Option<ErrorNorms>,
    pub final_ensemble: ParticleEnsemble,
    pub epsilon: f64,
    pub wall_clock: Duration,
}

/// Integrates the scenario from `t_start` to `t_end`, writing the CSV if an
/// output path is configured.
pub fn run(config: &ScenarioConfig) -> Result<RunReport> {
    config.validate()?;
    let started = Instant::now();
    let grid = config.grid()?;
    let model = config.energy_model(&grid)?;
    let solver = config.solver();
    let rule = config.mean_value_rule()?;
    let mut ensemble = config.initial_ensemble(&grid)?;
    let steps = config.steps();
    let kernel = match model.kind() {
        EnergyKind::Landau { kernel } => Some(*kernel),
        EnergyKind::AggregationDiffusion { .. } => None,
    };

    let mut records = Vec::with_capacity(steps + 1);
    records.push(snapshot(&ensemble, 0, config.t_start, Some(model.energy_at(ensemble.positions(), ensemble.weights())?), 0));
    let mut total_iterations = 0usize;
    let mut max_iterations = 0usize;
    for n in 1..=steps {
        let result = step(&model, &ensemble, &solver, &rule).map_err(|e| Error::StepFailed {
            step: n,
            source: Box::new(e),
        })?;
        let (fisher, dissipation) = match &kernel {
            Some(kernel) => {
                let mid: Vec<f64> = ensemble.positions().iter().zip(&result.positions).map(|(a, b)| 0.5 * (a + b)).collect();
                (
                    Some(fisher_from_gradient(ensemble.weights(), &result.mean_gradient)),
                    Some(dissipation_from_gradient(kernel, &mid, ensemble.weights(), &result.mean_gradient)),
                )
            }
            None => (None, None),
        };
        ensemble.set_positions(result.positions)?;
        total_iterations += result.iterations;
        max_iterations = max_iterations.max(result.iterations);
        let energy = if n % config.diag_every == 0 || n == steps {
            Some(model.energy_at(ensemble.positions(), ensemble.weights())?)
        } else {
            None
        };
        let mut record = snapshot(&ensemble, n, config.t_start + n as f64 * config.dt, energy, result.iterations);
        record.fisher = fisher;
        record.dissipation_rate = dissipation;
        records.push(record);
    }

    let final_errors = match config.analytic() {
        Some(sol) => Some(error_norms(&ensemble, model.mollifier().epsilon(), &sol, config.t_end, &grid)?),
        None => None,
    };
    if let Some(path) = &config.output {
        write_csv_file(path, grid.dim(), &records)?;
    }
    Ok(RunReport {
        records,
        mean_iterations: total_iterations as f64 / steps as f64,
        max_iterations,
        final_errors,
        final_ensemble: ensemble,
        epsilon: model.mollifier().epsilon(),
        wall_clock: started.elapsed(),
    })
}

fn snapshot(ensemble: &ParticleEnsemble, step: usize, time: f64, energy: Option<f64>, iterations: usize) -> DiagnosticsRecord {
    DiagnosticsRecord {
        step,
        time,
        mass: mass(ensemble),
        momentum: momentum(ensemble),
        kinetic_energy: kinetic_energy(ensemble),
        energy,
        fisher: None,
        dissipation_rate: None,
        solver_iterations: iterations,
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub cells_per_dim: usize,
    pub cell_size: f64,
    pub errors: ErrorNorms,
    pub mean_iterations: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Fitted `(L1, L2, Linf)` orders; `None` with fewer than two rows.
    pub orders: Option<[f64; 3]>,
}

/// Runs the scenario once per grid resolution and fits error orders at
/// `t_end`. No CSV is written.
pub fn converge(config: &ScenarioConfig, cells: &[usize]) -> Result<ConvergenceTable> {
    if config.analytic().is_none() {
        return Err(Error::Config(format!("scenario {} has no exact solution to converge against", config.scenario)));
    }
    if cells.is_empty() {
        return Err(Error::Config("need at least one grid resolution".into()));
    }
    let mut rows = Vec::with_capacity(cells.len());
    for &m in cells {
        let mut cfg = config.clone();
        cfg.cells_per_dim = m;
        cfg.output = None;
        // Only the final errors are used.
        cfg.diag_every = usize::MAX;
        let report = run(&cfg)?;
        rows.push(ConvergenceRow {
            cells_per_dim: m,
            cell_size: cfg.grid()?.cell_size(),
            errors: report.final_errors.expect("scenario has an exact solution"),
            mean_iterations: report.mean_iterations,
            max_iterations: report.max_iterations,
        });
    }
    let orders = if rows.len() >= 2 {
        let h: Vec<f64> = rows.iter().map(|r| r.cell_size).collect();
        let fit = |f: fn(&ErrorNorms) -> f64| convergence_order(&h, &rows.iter().map(|r| f(&r.errors)).collect::<Vec<_>>());
        Some([fit(|e| e.l1)?, fit(|e| e.l2)?, fit(|e| e.linf)?])
    } else {
        None
    };
    Ok(ConvergenceTable { rows, orders })
}

/// CSV header for a run in `dim` dimensions.
pub fn csv_header(dim: usize) -> &'static str {
    if dim == 1 {
        "step,time,mass,px,kinetic,energy,fisher,dissipation,iterations"
    } else {
        "step,time,mass,px,py,kinetic,energy,fisher,dissipation,iterations"
    }
}

/// One CSV row. Floats use the shortest representation that round-trips;
/// missing values are left blank.
pub fn csv_row(record: &DiagnosticsRecord) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut fields = vec![record.step.to_string(), record.time.to_string(), record.mass.to_string()];
    fields.extend(record.momentum.iter().map(|p| p.to_string()));
    fields.push(record.kinetic_energy.to_string());
    fields.push(opt(record.energy));
    fields.push(opt(record.fisher));
    fields.push(opt(record.dissipation_rate));
    fields.push(record.solver_iterations.to_string());
    fields.join(",")
}

pub fn write_csv<W: Write>(mut out: W, dim: usize, records: &[DiagnosticsRecord]) -> std::io::Result<()> {
    writeln!(out, "{}", csv_header(dim))?;
    for r in records {
        writeln!(out, "{}", csv_row(r))?;
    }
    out.flush()
}

fn write_csv_file(path: &Path, dim: usize, records: &[DiagnosticsRecord]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    write_csv(std::io::BufWriter::new(file), dim, records).map_err(io_err)
}
