//! Executes a parsed configuration.

use std::path::{Path, PathBuf};

use autochemo::experiments::{
    init_scenario, pattern_metrics, run_convergence_study, ConvergenceTable, ManufacturedSolution,
    PatternMetrics, ScenarioSpec,
};
use autochemo::{FemSpace, SimState, Stepper};

use crate::config::{Mode, OutputFormat, RunConfig};
use crate::error::CliError;
use crate::output::{format_summary, write_snapshot, write_text, DiagnosticsLog};

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub final_state: SimState,
    pub metrics: PatternMetrics,
    pub snapshots: Vec<PathBuf>,
    pub max_mass_residual: f64,
    pub summary: String,
}

#[derive(Debug)]
pub enum RunOutcome {
    Scenario(Box<ScenarioOutcome>),
    Converge(ConvergenceTable),
}

impl RunOutcome {
    /// Human-readable report for the terminal.
    pub fn report(&self) -> String {
        match self {
            RunOutcome::Scenario(s) => s.summary.clone(),
            RunOutcome::Converge(table) => table.to_text(),
        }
    }
}

/// Steps at which snapshots are written, excluding the initial state.
pub fn snapshot_steps(spec: &ScenarioSpec, every: Option<usize>, n_steps: usize) -> Vec<usize> {
    match every {
        Some(k) => (1..=n_steps).filter(|s| s % k == 0).collect(),
        None => {
            let mut steps: Vec<usize> = spec
                .snapshot_times
                .iter()
                .map(|t| (t / spec.dt).round() as usize)
                .filter(|&s| s >= 1 && s <= n_steps)
                .collect();
            steps.dedup();
            steps
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn run_scenario(
    spec: &ScenarioSpec,
    out_dir: &Path,
    snapshot_every: Option<usize>,
    format: OutputFormat,
) -> Result<RunOutcome, CliError> {
    let n_steps = spec
        .n_steps()
        .map_err(|e| CliError::config(e.to_string()))?;
    let mesh = spec
        .build_mesh()
        .map_err(|e| CliError::config(e.to_string()))?;
    let initial = init_scenario(spec, &mesh).map_err(|e| CliError::config(e.to_string()))?;
    let stepper = Stepper::new(FemSpace::new(mesh.clone()), spec.params, spec.dt)
        .map_err(|e| CliError::config(e.to_string()))?;
    create_dir(out_dir)?;

    let schedule = snapshot_steps(spec, snapshot_every, n_steps);
    let mut snapshots = write_snapshot(&initial, &mesh, format, out_dir)?;
    let mut log = DiagnosticsLog::create(&out_dir.join("diagnostics.csv"))?;
    let mut max_mass_residual: f64 = 0.0;
    let mut io_failure: Option<CliError> = None;
    let mut next = 0;

    log::info!(
        "scenario {}: {}x{} mesh, dt={}, {} steps",
        spec.name,
        spec.nx,
        spec.ny,
        spec.dt,
        n_steps
    );
    let result = stepper.advance(initial, n_steps, None, |state, diag| {
        max_mass_residual = max_mass_residual.max(diag.mass_residual);
        let mut io = || -> Result<(), CliError> {
            log.record(diag)?;
            if schedule.get(next) == Some(&state.step) {
                next += 1;
                snapshots.extend(write_snapshot(state, &mesh, format, out_dir)?);
                log::info!(
                    "t={:.4} snapshot written, mass={:.6}",
                    state.time,
                    diag.mass
                );
            }
            Ok(())
        };
        io().map_err(|e| {
            let msg = e.to_string();
            io_failure = Some(e);
            autochemo::Error::Hook(msg)
        })
    });
    let final_state = match result {
        Ok(s) => s,
        Err(e) => return Err(io_failure.unwrap_or(CliError::Solver(e))),
    };
    log.finish()?;

    let metrics = pattern_metrics(&final_state, &mesh);
    let summary = format_summary(
        &spec.name,
        &final_state,
        &metrics,
        max_mass_residual,
        snapshots.len(),
    );
    write_text(&out_dir.join("summary.txt"), &summary)?;
    Ok(RunOutcome::Scenario(Box::new(ScenarioOutcome {
        final_state,
        metrics,
        snapshots,
        max_mass_residual,
        summary,
    })))
}

pub fn run_converge(
    levels: &[usize],
    final_time: f64,
    out_dir: &Path,
) -> Result<RunOutcome, CliError> {
    create_dir(out_dir)?;
    let table = run_convergence_study(&ManufacturedSolution::default(), levels, final_time)?;
    let text = table.to_text();
    write_text(&out_dir.join("convergence.txt"), &text)?;
    write_text(&out_dir.join("convergence.csv"), &table.to_csv())?;
    Ok(RunOutcome::Converge(table))
}

pub fn run(config: &RunConfig) -> Result<RunOutcome, CliError> {
    match &config.mode {
        Mode::Scenario(spec) => {
            run_scenario(spec, &config.out_dir, config.snapshot_every, config.format)
        }
        Mode::Converge { levels, final_time } => run_converge(levels, *final_time, &config.out_dir),
    }
}
