//! Lip-field damage update: local minimization, Lipschitz bounds, bound-gap
//! regions and the constrained convex solve restricted to those regions.

mod bounds;
mod ipm;
mod local;
mod regions;
mod update;

use serde::{Deserialize, Serialize};

pub use bounds::compute_bounds;
pub use ipm::{constrained_damage_solve, solve_whole_domain, RegionInputs, RegionSolution, SeparableProblem};
pub use local::{local_damage_solve, LocalSolver};
pub use regions::{extract_regions, LipRegion};
pub use update::{damage_update, lipschitz_ratio, UpdateReport};

use crate::constitutive::ConstitutiveError;
use crate::sparse::FactorError;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum DamageError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{0}")]
    Constitutive(#[from] ConstitutiveError),
    #[error("region {region}: interior-point solver did not converge after {iterations} iterations (KKT residual {residual:e})")]
    NonConvergence {
        region: usize,
        iterations: usize,
        residual: f64,
    },
    #[error("region {region}: {source}")]
    Factor { region: usize, source: FactorError },
}

/// Tolerances of the damage update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// KKT residual tolerance of the constrained solve (scaled problem).
    pub kkt_tol: f64,
    /// Bounds closer than this are treated as equal.
    pub gap_tol: f64,
    /// Tolerance in `d` of the element-wise local solve.
    pub local_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-8,
            gap_tol: 1e-9,
            local_tol: 1e-12,
            max_iter: 100,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), DamageError> {
        for (name, v) in [("kkt_tol", self.kkt_tol), ("gap_tol", self.gap_tol), ("local_tol", self.local_tol)] {
            if !(v > 0.0) {
                return Err(DamageError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iter == 0 {
            return Err(DamageError::InvalidInput("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-element damage fields of one step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DamageState {
    pub d: Vec<f64>,
    pub d_n: Vec<f64>,
    pub d_loc: Vec<f64>,
    pub d_upper: Vec<f64>,
    pub d_lower: Vec<f64>,
}

impl DamageState {
    /// Undamaged state for `n` elements.
    pub fn new(n: usize) -> Self {
        Self {
            d: vec![0.0; n],
            d_n: vec![0.0; n],
            d_loc: vec![0.0; n],
            d_upper: vec![0.0; n],
            d_lower: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }
}
