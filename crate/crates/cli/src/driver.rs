//! Time-stepping loop and the verification studies built on it.

use std::io;
use std::path::{Path, PathBuf};

use log::{debug, info};
use thermovi_core::diagnostics::{self, DiagnosticsError};
use thermovi_core::integrator::stable_dt;
use thermovi_core::{
    DiagnosticsRecord, FieldErrors, Material, State, StepError, ThermoElasticMaterial,
};

use crate::config::{ConfigError, Scenario, Simulation};
use crate::output::{write_csv_file, write_vtk};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const FAILURE_MARKER: &str = "FAILED";

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("step {step} failed: {source}")]
    Step { step: usize, source: StepError },
    #[error("diagnostics after step {step}: {source}")]
    Diagnostics {
        step: usize,
        source: DiagnosticsError,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl DriverError {
    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            DriverError::Config(_) => 2,
            _ => 3,
        }
    }
}

fn snapshot_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("snapshot_{step:06}.vtk"))
}

/// Diagnostics row for `state`, with field errors when a reference exists.
pub fn diagnose(sim: &Simulation, state: &State) -> Result<DiagnosticsRecord, DiagnosticsError> {
    let errors = sim
        .reference
        .as_ref()
        .map(|r| r.errors(&sim.problem, state))
        .transpose()?;
    diagnostics::record(&sim.problem, state, errors)
}

/// Advances `sim` to its end time, calling `tick` after every step with the
/// step index and new state. Returns the final state.
pub fn integrate<F>(sim: &Simulation, mut tick: F) -> Result<State, DriverError>
where
    F: FnMut(usize, &State) -> Result<(), DriverError>,
{
    let mut state = sim.initial.clone();
    for step in 1..=sim.steps {
        state = sim
            .problem
            .step(sim.scheme, &state, sim.dt)
            .map_err(|source| DriverError::Step { step, source })?;
        // Keep the clock free of accumulated round-off.
        state.time = sim.initial.time + step as f64 * sim.dt;
        tick(step, &state)?;
    }
    Ok(state)
}

/// Runs a simulation, writing diagnostics and snapshots to `out_dir` when
/// given. On failure the rows gathered so far are still written, together
/// with a marker file naming the failing step.
pub fn run(
    sim: &Simulation,
    out_dir: Option<&Path>,
) -> Result<Vec<DiagnosticsRecord>, DriverError> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let marker = dir.join(FAILURE_MARKER);
        if marker.exists() {
            std::fs::remove_file(marker)?;
        }
    }
    info!(
        "{} steps of {} with dt = {:.6e} on {} nodes",
        sim.steps,
        sim.scheme,
        sim.dt,
        sim.problem.mesh().n_nodes()
    );
    let mut records = vec![diagnose(sim, &sim.initial)
        .map_err(|source| DriverError::Diagnostics { step: 0, source })?];
    let snapshots = out_dir.filter(|_| sim.snapshot_every > 0);
    if let Some(dir) = snapshots {
        write_vtk(sim.problem.mesh(), &sim.initial, &snapshot_path(dir, 0))?;
    }
    let outcome = integrate(sim, |step, state| {
        if step % sim.every == 0 {
            let r =
                diagnose(sim, state).map_err(|source| DriverError::Diagnostics { step, source })?;
            debug!("t = {:.6} energy = {:.12e}", r.time, r.energy);
            records.push(r);
        }
        if let Some(dir) = snapshots {
            if step % sim.snapshot_every == 0 {
                write_vtk(sim.problem.mesh(), state, &snapshot_path(dir, step))?;
            }
        }
        Ok(())
    });
    if let Some(dir) = out_dir {
        write_csv_file(
            &dir.join(DIAGNOSTICS_FILE),
            sim.problem.mesh().dim(),
            &records,
        )?;
        if let Err(e) = &outcome {
            std::fs::write(dir.join(FAILURE_MARKER), format!("{e}\n"))?;
        }
    }
    outcome.map(|_| records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub dt: f64,
    pub errors: FieldErrors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Observed orders `log2(e_i / e_{i+1})` between successive rows.
    pub fn orders(&self) -> Vec<[f64; 4]> {
        self.rows
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].errors.as_array(), w[1].errors.as_array());
                std::array::from_fn(|i| (a[i] / b[i]).log2())
            })
            .collect()
    }
}

impl std::fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:>10} {:>10} {:>12} {:>12} {:>12} {:>12}",
            "h", "dt", "err_phi", "err_Phi", "err_v", "err_theta"
        )?;
        for r in &self.rows {
            let e = r.errors.as_array();
            writeln!(
                f,
                "{:>10.5} {:>10.6} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
                r.h, r.dt, e[0], e[1], e[2], e[3]
            )?;
        }
        let orders = self.orders();
        if !orders.is_empty() {
            writeln!(f, "observed orders")?;
            for (i, o) in orders.iter().enumerate() {
                writeln!(
                    f,
                    "{:>10} {:>10} {:>12.4} {:>12.4} {:>12.4} {:>12.4}",
                    format!("{i}->{}", i + 1),
                    "",
                    o[0],
                    o[1],
                    o[2],
                    o[3]
                )?;
            }
        }
        Ok(())
    }
}

/// Runs `levels` successive refinements of a harmonic scenario, halving the
/// mesh size and time step each time, and records the errors at the end time.
pub fn convergence_study(
    template: &Scenario,
    levels: u32,
) -> Result<ConvergenceTable, DriverError> {
    if template.initial.harmonic.is_none() {
        return Err(ConfigError {
            line: 0,
            message: "convergence studies need `harmonic` initial data".into(),
        }
        .into());
    }
    let mut rows = Vec::with_capacity(levels as usize);
    for level in 0..levels {
        let sim = template.refined(level)?.build()?;
        let last = integrate(&sim, |_, _| Ok(()))?;
        let reference = sim
            .reference
            .as_ref()
            .expect("harmonic scenario has a reference");
        let errors =
            reference
                .errors(&sim.problem, &last)
                .map_err(|source| DriverError::Diagnostics {
                    step: sim.steps,
                    source,
                })?;
        let h = sim.problem.mesh().min_inscribed_diameter();
        info!(
            "level {level}: h = {h}, dt = {}, errors {:?}",
            sim.dt,
            errors.as_array()
        );
        rows.push(ConvergenceRow {
            h,
            dt: sim.dt,
            errors,
        });
    }
    Ok(ConvergenceTable { rows })
}

/// Energy whose boundedness certifies stability. For the linear model the
/// entropy contribution is removed, leaving a positive definite quadratic
/// form in the deviations from equilibrium.
pub fn stability_energy(sim: &Simulation, state: &State) -> Result<f64, DiagnosticsError> {
    let energy = diagnostics::total_energy(&sim.problem, state)?;
    Ok(match sim.problem.model() {
        Material::Linear(m) => {
            energy - m.reference_temperature() * diagnostics::total_entropy(state)
        }
        Material::Nonlinear(_) => energy,
    })
}

/// Growth factor beyond which a run counts as unstable.
pub const BLOW_UP_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub enum StabilityOutcome {
    Bounded,
    /// Energy exceeded [`BLOW_UP_FACTOR`] times its initial value at `step`.
    Growth {
        step: usize,
    },
    /// Integration failed or produced non-finite values at `step`.
    Failure {
        step: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    /// Time step as a fraction of `h / c_max`.
    pub factor: f64,
    pub dt: f64,
    pub steps: usize,
    /// Largest `|E(t)| / |E(0)|` observed.
    pub max_growth: f64,
    pub outcome: StabilityOutcome,
}

/// Runs `steps` steps of the scenario for each Courant fraction in
/// `factors`, tracking the growth of [`stability_energy`].
pub fn stability_study(
    template: &Scenario,
    factors: &[f64],
    steps: usize,
) -> Result<Vec<StabilityRow>, DriverError> {
    let mut rows = Vec::with_capacity(factors.len());
    for &factor in factors {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(ConfigError {
                line: 0,
                message: format!("Courant fraction {factor} must be positive"),
            }
            .into());
        }
        let mut sim = template.build()?;
        let courant = stable_dt(sim.problem.mesh(), sim.problem.model(), 1.0)
            .map_err(|source| DriverError::Step { step: 0, source })?;
        sim.dt = factor * courant;
        sim.steps = steps;
        let e0 = stability_energy(&sim, &sim.initial)
            .map_err(|source| DriverError::Diagnostics { step: 0, source })?
            .abs();
        let mut max_growth = 1.0f64;
        let mut outcome = StabilityOutcome::Bounded;
        let result = integrate(&sim, |step, state| {
            let e = stability_energy(&sim, state)
                .map_err(|source| DriverError::Diagnostics { step, source })?;
            let growth = e.abs() / e0;
            if !growth.is_finite() {
                return Err(DriverError::Step {
                    step,
                    source: StepError::NonFinite {
                        field: "energy",
                        node: 0,
                    },
                });
            }
            max_growth = max_growth.max(growth);
            if growth > BLOW_UP_FACTOR && outcome == StabilityOutcome::Bounded {
                outcome = StabilityOutcome::Growth { step };
            }
            Ok(())
        });
        if let Err(e) = result {
            let step = match &e {
                DriverError::Step { step, .. } | DriverError::Diagnostics { step, .. } => *step,
                _ => return Err(e),
            };
            if outcome == StabilityOutcome::Bounded {
                outcome = StabilityOutcome::Failure {
                    step,
                    message: e.to_string(),
                };
            }
        }
        info!("factor {factor}: max growth {max_growth:.3e}, {outcome:?}");
        rows.push(StabilityRow {
            factor,
            dt: sim.dt,
            steps,
            max_growth,
            outcome,
        });
    }
    Ok(rows)
}
