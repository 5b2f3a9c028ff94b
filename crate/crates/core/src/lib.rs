//! Explicit dynamic brittle fracture on linear triangles with Lip-field
//! regularized damage.

pub mod constitutive;
pub mod damage;
pub mod driver;
pub mod dynamics;
pub mod fem;
pub mod mesh;
mod sparse;

pub use constitutive::{
    ConstitutiveError, Degradation, MaterialParams, Softening, Strain2D, StrainSplit, Stress2D, WaveSpeeds,
};
pub use mesh::{BoundaryFacet, LipMesh, Mesh, MeshError, MeshFormat, Point};
pub use sparse::FactorError;
pub use damage::{DamageError, DamageState, SolverOptions, UpdateReport};
pub use driver::{
    run_config, ConfigError, OutputError, OutputWriter, RunSummary, Setup, SimError, Simulation, SimulationConfig,
    StepRecord,
};
pub use dynamics::{
    BcKind, BoundaryCondition, Component, DynamicsError, KinematicState, Profile, Selector, StepRule, TimeControl,
};
pub use fem::FemError;
