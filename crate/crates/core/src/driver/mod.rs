//! Configuration, time loop, post-processing and output files.

pub mod config;
pub mod output;
pub mod postproc;
mod simulation;

pub use config::{ConfigError, CrackMode, PostprocSection, SimulationConfig, SolverSection};
pub use output::{OutputError, OutputWriter, StepRecord};
pub use postproc::{crack_angle, detect_branching, BranchCriteria, CrackTracker};
pub use simulation::{Derived, RunStats, RunSummary, Setup, Simulation};

use crate::damage::DamageError;
use crate::dynamics::DynamicsError;
use crate::fem::FemError;
use crate::mesh::MeshError;

#[derive(thiserror::Error, Debug)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Damage(#[from] DamageError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("solution diverged at step {step} (t = {t:e} s)")]
    Diverged { step: usize, t: f64 },
    #[error("{0}")]
    InvalidState(String),
}

/// Loads `config`, runs it to completion and writes the outputs under the
/// configured directory.
pub fn run_config(config: &SimulationConfig) -> Result<RunSummary, SimError> {
    let mut sim = Simulation::from_config(config)?;
    let writer = OutputWriter {
        dir: config.output_dir(),
        every: config.output.every,
        vtk: config.output.vtk,
    };
    sim.run(writer.every, Some(&writer)).map(|(_, summary)| summary)
}
