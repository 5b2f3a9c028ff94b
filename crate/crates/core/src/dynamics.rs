//! Explicit Newmark (beta = 0, gamma = 1/2) with the consistent mass matrix,
//! boundary conditions and time-step control.

use serde::{Deserialize, Serialize};

use crate::constitutive::MaterialParams;
use crate::fem::{self, FemError};
use crate::mesh::Mesh;
use crate::sparse::{csc_from_triplets, FactorError, SpdSolver};

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid time control: {0}")]
    TimeControl(String),
    #[error("boundary condition {index}: {msg}")]
    Boundary { index: usize, msg: String },
    #[error("DOF {dof} (node {node}, {component}) has two kinematic prescriptions (conditions {first} and {second})")]
    DuplicatePrescription {
        dof: usize,
        node: usize,
        component: Component,
        first: usize,
        second: usize,
    },
    #[error("mass matrix factorization failed ({component} block): {source}")]
    Factor { component: Component, source: FactorError },
    #[error(transparent)]
    Fem(#[from] FemError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    X,
    Y,
}

impl Component {
    pub fn index(self) -> usize {
        match self {
            Component::X => 0,
            Component::Y => 1,
        }
    }
}

impl std::fmt::Display for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Component::X => "x",
            Component::Y => "y",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    Displacement,
    Velocity,
    Traction,
}

/// Time profile `p(t)` multiplying the prescribed value.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Constant,
    /// Linear rise from 0 at `t = 0` to 1 at `t = rise`, then held.
    Ramp { rise: f64 },
}

impl Profile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant => 1.0,
            Profile::Ramp { rise } => (t / rise).clamp(0.0, 1.0),
        }
    }

    /// `int_0^t p`.
    pub fn integral(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant => t.max(0.0),
            Profile::Ramp { rise } => {
                if t <= 0.0 {
                    0.0
                } else if t < rise {
                    0.5 * t * t / rise
                } else {
                    t - 0.5 * rise
                }
            }
        }
    }

    /// `dp/dt` (right derivative).
    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant => 0.0,
            Profile::Ramp { rise } => {
                if (0.0..rise).contains(&t) {
                    1.0 / rise
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    Tag(String),
    Nodes(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryCondition {
    pub selector: Selector,
    pub kind: BcKind,
    pub component: Component,
    /// Displacement (m), velocity (m/s) or traction (Pa).
    pub value: f64,
    pub profile: Profile,
}

#[derive(Clone, Debug, PartialEq)]
struct Kinematic {
    dof: usize,
    kind: BcKind,
    value: f64,
    profile: Profile,
}

#[derive(Clone, Debug, PartialEq)]
struct Traction {
    /// Nodal force vector for a unit traction.
    unit_load: Vec<f64>,
    value: f64,
    profile: Profile,
}

/// Boundary conditions resolved to DOFs and nodal load vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedBcs {
    num_dofs: usize,
    kinematic: Vec<Kinematic>,
    tractions: Vec<Traction>,
    prescribed: Vec<bool>,
}

impl ResolvedBcs {
    pub fn resolve(mesh: &Mesh, bcs: &[BoundaryCondition]) -> Result<Self, DynamicsError> {
        let n = mesh.num_dofs();
        let mut owner = vec![usize::MAX; n];
        let mut kinematic = Vec::new();
        let mut tractions = Vec::new();
        for (index, bc) in bcs.iter().enumerate() {
            let err = |msg: String| DynamicsError::Boundary { index, msg };
            if !bc.value.is_finite() {
                return Err(err(format!("value {} is not finite", bc.value)));
            }
            if let Profile::Ramp { rise } = bc.profile {
                if !(rise > 0.0) {
                    return Err(err(format!("ramp rise time must be positive, got {rise}")));
                }
            }
            let c = bc.component.index();
            match bc.kind {
                BcKind::Traction => {
                    let Selector::Tag(tag) = &bc.selector else {
                        return Err(err("traction conditions need a facet tag selector".into()));
                    };
                    let mut dir = [0.0; 2];
                    dir[c] = 1.0;
                    let mut unit_load = vec![0.0; n];
                    fem::external_traction(mesh, tag, dir, &mut unit_load)?;
                    tractions.push(Traction {
                        unit_load,
                        value: bc.value,
                        profile: bc.profile,
                    });
                }
                BcKind::Displacement | BcKind::Velocity => {
                    let nodes = match &bc.selector {
                        Selector::Tag(tag) => {
                            let nodes = mesh.nodes_with_tag(tag);
                            if nodes.is_empty() {
                                return Err(err(format!("no boundary facets carry tag '{tag}'")));
                            }
                            nodes
                        }
                        Selector::Nodes(list) => {
                            if let Some(&bad) = list.iter().find(|&&v| v >= mesh.num_nodes()) {
                                return Err(err(format!("node {bad} out of range ({} nodes)", mesh.num_nodes())));
                            }
                            let mut list = list.clone();
                            list.sort_unstable();
                            list.dedup();
                            list
                        }
                    };
                    for node in nodes {
                        let dof = 2 * node + c;
                        if owner[dof] != usize::MAX {
                            return Err(DynamicsError::DuplicatePrescription {
                                dof,
                                node,
                                component: bc.component,
                                first: owner[dof],
                                second: index,
                            });
                        }
                        owner[dof] = index;
                        kinematic.push(Kinematic {
                            dof,
                            kind: bc.kind,
                            value: bc.value,
                            profile: bc.profile,
                        });
                    }
                }
            }
        }
        kinematic.sort_by_key(|k| k.dof);
        let prescribed = owner.iter().map(|&o| o != usize::MAX).collect();
        Ok(Self {
            num_dofs: n,
            kinematic,
            tractions,
            prescribed,
        })
    }

    pub fn is_prescribed(&self, dof: usize) -> bool {
        self.prescribed[dof]
    }

    pub fn prescribed_dofs(&self) -> impl Iterator<Item = usize> + '_ {
        self.kinematic.iter().map(|k| k.dof)
    }

    /// Overwrites prescribed DOFs of `u`, `v`, `a` with their values at `t`.
    /// Velocity prescriptions integrate exactly from a zero initial displacement.
    pub fn apply(&self, state: &mut KinematicState, t: f64) {
        for k in &self.kinematic {
            let (u, v, a) = match k.kind {
                BcKind::Displacement => (k.value * k.profile.value(t), 0.0, 0.0),
                BcKind::Velocity => (
                    k.value * k.profile.integral(t),
                    k.value * k.profile.value(t),
                    k.value * k.profile.rate(t),
                ),
                BcKind::Traction => unreachable!("tractions are not kinematic"),
            };
            state.u[k.dof] = u;
            state.v[k.dof] = v;
            state.a[k.dof] = a;
        }
    }

    /// External force vector `R(t)`.
    pub fn external_force(&self, t: f64) -> Vec<f64> {
        let mut r = vec![0.0; self.num_dofs];
        for tr in &self.tractions {
            let s = tr.value * tr.profile.value(t);
            if s == 0.0 {
                continue;
            }
            for (ri, ui) in r.iter_mut().zip(&tr.unit_load) {
                *ri += s * ui;
            }
        }
        r
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KinematicState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub u_p: Vec<f64>,
    pub v_p: Vec<f64>,
    pub t: f64,
}

impl KinematicState {
    pub fn at_rest(num_dofs: usize) -> Self {
        Self {
            u: vec![0.0; num_dofs],
            v: vec![0.0; num_dofs],
            a: vec![0.0; num_dofs],
            u_p: vec![0.0; num_dofs],
            v_p: vec![0.0; num_dofs],
            t: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).chain(&self.a).all(|x| x.is_finite())
    }
}

/// Predictors `u_p = u + dt v + dt^2/2 a`, `v_p = v + dt/2 a`; with beta = 0
/// the new displacement is `u_p`, which is copied into `u`.
pub fn predict(state: &mut KinematicState, dt: f64) {
    let half = 0.5 * dt;
    for i in 0..state.u.len() {
        state.u_p[i] = state.u[i] + dt * state.v[i] + half * dt * state.a[i];
        state.v_p[i] = state.v[i] + half * state.a[i];
    }
    state.u.copy_from_slice(&state.u_p);
    state.t += dt;
}

/// `v = v_p + dt/2 a`.
pub fn correct_velocity(v_p: &[f64], a: &[f64], dt: f64) -> Vec<f64> {
    v_p.iter().zip(a).map(|(vp, ai)| vp + 0.5 * dt * ai).collect()
}

/// Consistent mass matrix reduced to the free DOFs of each component.
pub struct GlobalSystem {
    nodal_mass: sprs::CsMat<f64>,
    /// `free[c][node]` = index in the reduced system or `usize::MAX`.
    free: [Vec<usize>; 2],
    solvers: [Option<SpdSolver>; 2],
}

impl std::fmt::Debug for GlobalSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GlobalSystem")
            .field("nodes", &self.nodal_mass.rows())
            .finish_non_exhaustive()
    }
}

impl GlobalSystem {
    pub fn new(mesh: &Mesh, rho: f64, bcs: &ResolvedBcs) -> Result<Self, DynamicsError> {
        let nodal_mass = fem::assemble_nodal_mass(mesh, rho);
        let nn = mesh.num_nodes();
        let mut free = [vec![usize::MAX; nn], vec![usize::MAX; nn]];
        let mut solvers = [None, None];
        for (c, component) in [Component::X, Component::Y].into_iter().enumerate() {
            let mut count = 0;
            for node in 0..nn {
                if !bcs.is_prescribed(2 * node + c) {
                    free[c][node] = count;
                    count += 1;
                }
            }
            if count == 0 {
                continue;
            }
            let mut trip = Vec::new();
            for (v, (i, j)) in nodal_mass.iter() {
                let (fi, fj) = (free[c][i], free[c][j]);
                if fi != usize::MAX && fj != usize::MAX {
                    trip.push((fi, fj, *v));
                }
            }
            let m = csc_from_triplets(count, &trip);
            solvers[c] = Some(SpdSolver::new(&m).map_err(|source| DynamicsError::Factor { component, source })?);
        }
        Ok(Self {
            nodal_mass,
            free,
            solvers,
        })
    }

    pub fn nodal_mass(&self) -> &sprs::CsMat<f64> {
        &self.nodal_mass
    }

    /// Solves `M a = rhs` on the free DOFs; prescribed entries of `a` are
    /// inputs and enter through the coupling block.
    pub fn solve_acceleration(&self, rhs: &[f64], a: &mut [f64]) {
        for c in 0..2 {
            let Some(solver) = &self.solvers[c] else { continue };
            let free = &self.free[c];
            let count = free.iter().filter(|&&f| f != usize::MAX).count();
            let mut b = vec![0.0; count];
            for (node, &f) in free.iter().enumerate() {
                if f != usize::MAX {
                    b[f] = rhs[2 * node + c];
                }
            }
            // - M_fp a_p
            for (col, row) in self.nodal_mass.outer_iterator().enumerate() {
                if free[col] != usize::MAX {
                    continue;
                }
                let ap = a[2 * col + c];
                if ap == 0.0 {
                    continue;
                }
                for (r, &m) in row.iter() {
                    if free[r] != usize::MAX {
                        b[free[r]] -= m * ap;
                    }
                }
            }
            let x = solver.solve(&b);
            for (node, &f) in free.iter().enumerate() {
                if f != usize::MAX {
                    a[2 * node + c] = x[f];
                }
            }
        }
    }

    /// Entry `dof` of `M x`.
    pub fn mass_times_at(&self, x: &[f64], dof: usize) -> f64 {
        let (node, c) = (dof / 2, dof % 2);
        // M is symmetric, so row `node` equals column `node`
        self.nodal_mass
            .outer_view(node)
            .map_or(0.0, |col| col.iter().map(|(j, &m)| m * x[2 * j + c]).sum())
    }

    /// `M x` on the full interleaved layout.
    pub fn mass_times(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for (col, row) in self.nodal_mass.outer_iterator().enumerate() {
            for (r, &m) in row.iter() {
                out[2 * r] += m * x[2 * col];
                out[2 * r + 1] += m * x[2 * col + 1];
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `dt_critical = min(h_min / c_d, 2 / omega_max)`.
    #[default]
    Stable,
    /// `dt_critical = h_min / c_d`.
    SoundSpeed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeControl {
    pub dt: f64,
    pub cfl_factor: f64,
    pub dt_critical: f64,
    pub n_steps: usize,
    pub t_end: f64,
}

impl TimeControl {
    /// `dt = cfl_factor * h_min / c_d`.
    pub fn from_sound_speed(h_min: f64, c_d: f64, cfl_factor: f64, t_end: f64) -> Result<Self, DynamicsError> {
        if !(h_min > 0.0) || !(c_d > 0.0) {
            return Err(DynamicsError::TimeControl(format!(
                "h_min and c_d must be positive, got {h_min} and {c_d}"
            )));
        }
        Self::from_critical(h_min / c_d, cfl_factor, t_end)
    }

    pub fn from_critical(dt_critical: f64, cfl_factor: f64, t_end: f64) -> Result<Self, DynamicsError> {
        if !(cfl_factor > 0.0 && cfl_factor < 1.0) {
            return Err(DynamicsError::TimeControl(format!("cfl_factor must lie in (0, 1), got {cfl_factor}")));
        }
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(DynamicsError::TimeControl(format!("T_end must be finite and non-negative, got {t_end}")));
        }
        let dt = cfl_factor * dt_critical;
        Ok(Self {
            dt,
            cfl_factor,
            dt_critical,
            n_steps: (t_end / dt).floor() as usize + 1,
            t_end,
        })
    }

    /// Critical step of `mesh` under `rule`.
    pub fn critical_timestep(mesh: &Mesh, params: &MaterialParams, rule: StepRule) -> f64 {
        let sound = mesh.min_element_size() / params.wave_speeds().dilatational;
        match rule {
            StepRule::SoundSpeed => sound,
            StepRule::Stable => sound.min(fem::stable_timestep(mesh, params)),
        }
    }

    pub fn for_mesh(
        mesh: &Mesh,
        params: &MaterialParams,
        rule: StepRule,
        cfl_factor: f64,
        t_end: f64,
    ) -> Result<Self, DynamicsError> {
        Self::from_critical(Self::critical_timestep(mesh, params, rule), cfl_factor, t_end)
    }

    /// Overrides the step count; `t_end` becomes `n_steps dt`.
    pub fn with_steps(mut self, n_steps: usize) -> Self {
        self.n_steps = n_steps;
        self.t_end = n_steps as f64 * self.dt;
        self
    }
}
