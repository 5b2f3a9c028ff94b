use std::time::Instant;

use serde::Serialize;

use crate::constitutive::{MaterialParams, StrainSplit};
use crate::damage::{damage_update, lipschitz_ratio, SolverOptions, UpdateReport};
use crate::dynamics::{
    correct_velocity, predict, BoundaryCondition, GlobalSystem, KinematicState, ResolvedBcs, StepRule, TimeControl,
};
use crate::fem::{self, ElementKinematics};
use crate::mesh::{load_mesh_with_tags, LipMesh, Mesh, Point};

use super::config::{CrackMode, PostprocSection, SimulationConfig, SolverSection};
use super::output::{OutputWriter, Snapshot, StepRecord};
use super::postproc::{self, BranchCriteria, CrackTracker};
use super::SimError;

/// Material and time-step quantities derived from a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Derived {
    pub lambda: f64,
    pub mu: f64,
    pub c_d: f64,
    pub c_s: f64,
    #[serde(rename = "c_R")]
    pub c_r: f64,
    #[serde(rename = "Yc")]
    pub yc: f64,
    #[serde(rename = "Gc")]
    pub gc: f64,
    pub h_min: f64,
    pub dt_critical: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl Derived {
    pub fn new(mesh: &Mesh, params: &MaterialParams, time: &TimeControl) -> Self {
        let w = params.wave_speeds();
        Self {
            lambda: params.lambda,
            mu: params.mu,
            c_d: w.dilatational,
            c_s: w.shear,
            c_r: w.rayleigh,
            yc: params.critical_energy,
            gc: 4.0 * params.critical_energy * params.length_scale,
            h_min: mesh.min_element_size(),
            dt_critical: time.dt_critical,
            dt: time.dt,
            n_steps: time.n_steps,
        }
    }
}

/// Everything needed to start a run.
pub struct Setup {
    pub mesh: Mesh,
    pub params: MaterialParams,
    pub bcs: Vec<BoundaryCondition>,
    pub time: TimeControl,
    pub solver: SolverSection,
    pub postproc: PostprocSection,
}

impl Setup {
    /// Loads the mesh and derives the time step of `config`.
    pub fn from_config(config: &SimulationConfig) -> Result<Self, SimError> {
        let params = config.material_params()?;
        let mesh = load_mesh_with_tags(config.mesh_path(), config.mesh_format()?, &config.physical_names()?)?;
        let rule: StepRule = config.time.step_rule;
        let mut time = TimeControl::for_mesh(
            &mesh,
            &params,
            rule,
            config.time.cfl_factor,
            config.time.t_end.unwrap_or(0.0),
        )?;
        if let Some(n) = config.time.n_steps {
            time = time.with_steps(n);
        }
        Ok(Self {
            mesh,
            params,
            bcs: config.boundary_conditions()?,
            time,
            solver: config.solver.clone(),
            postproc: config.postproc.clone(),
        })
    }
}

/// Peak diagnostics of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub max_regions: usize,
    pub largest_region: usize,
    pub max_solver_iterations: usize,
    /// Largest `|E_kin + E_p + E_d - W_ext|` seen.
    pub max_energy_residual: f64,
    /// Largest `|W_ext|` seen.
    pub max_external_work: f64,
    pub max_lipschitz_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub status: String,
    pub steps: usize,
    pub t_final: f64,
    pub wall_time_s: f64,
    pub derived: Derived,
    pub t_branch: Option<f64>,
    pub crack_length: f64,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub crack_angle_deg: Option<f64>,
    pub stats: RunStats,
    pub final_record: StepRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<SimulationConfig>,
}

/// Explicit dynamic fracture run: Newmark in time, Lip-field damage update
/// at every step.
pub struct Simulation {
    mesh: Mesh,
    lip: LipMesh,
    kin: Vec<ElementKinematics>,
    centroids: Vec<Point>,
    params: MaterialParams,
    bcs: ResolvedBcs,
    system: GlobalSystem,
    time: TimeControl,
    options: SolverOptions,
    freeze_damage: bool,
    post: PostprocSection,
    state: KinematicState,
    d: Vec<f64>,
    splits: Vec<StrainSplit>,
    /// External force on free DOFs, reaction on prescribed ones.
    work_force: Vec<f64>,
    kinetic: f64,
    potential: f64,
    dissipated: f64,
    external_work: f64,
    step: usize,
    tracker: CrackTracker,
    branch_probe: usize,
    last_report: UpdateReport,
    stats: RunStats,
    config: Option<SimulationConfig>,
}

impl Simulation {
    pub fn new(setup: Setup) -> Result<Self, SimError> {
        let Setup {
            mesh,
            params,
            bcs,
            time,
            solver,
            postproc,
        } = setup;
        let options = solver.options();
        options.validate()?;
        let resolved = ResolvedBcs::resolve(&mesh, &bcs)?;
        let system = GlobalSystem::new(&mesh, params.density, &resolved)?;
        let lip = LipMesh::build(&mesh);
        let kin = fem::element_kinematics(&mesh);
        let centroids = mesh.centroids();
        let ne = mesh.num_elements();
        let nd = mesh.num_dofs();
        let factor = if postproc.half_model { 2.0 } else { 1.0 };
        let tracker = CrackTracker::new(factor, postproc.mode == CrackMode::SymmetricBranching);
        let mut sim = Self {
            lip,
            kin,
            centroids,
            params,
            bcs: resolved,
            system,
            time,
            options,
            freeze_damage: solver.freeze_damage,
            post: postproc,
            state: KinematicState::at_rest(nd),
            d: vec![0.0; ne],
            splits: Vec::new(),
            work_force: vec![0.0; nd],
            kinetic: 0.0,
            potential: 0.0,
            dissipated: 0.0,
            external_work: 0.0,
            step: 0,
            tracker,
            branch_probe: 0,
            last_report: UpdateReport::default(),
            stats: RunStats::default(),
            config: None,
            mesh,
        };
        sim.initialize()?;
        Ok(sim)
    }

    /// Builds from `config`, which is echoed into the run summary.
    pub fn from_config(config: &SimulationConfig) -> Result<Self, SimError> {
        let mut sim = Self::new(Setup::from_config(config)?)?;
        sim.config = Some(config.clone());
        Ok(sim)
    }

    /// Replaces the initial displacement and velocity (prescribed DOFs keep
    /// their boundary values). Only valid before the first step.
    pub fn set_initial_state(&mut self, u: Vec<f64>, v: Vec<f64>) -> Result<(), SimError> {
        let n = self.mesh.num_dofs();
        if self.step != 0 || u.len() != n || v.len() != n {
            return Err(SimError::InvalidState(format!(
                "initial state needs {n} DOFs before the first step (step {}, got {} and {})",
                self.step,
                u.len(),
                v.len()
            )));
        }
        self.state.u = u;
        self.state.v = v;
        self.initialize()
    }

    /// Sets the initial damage; it must lie in `[0, 1]`.
    pub fn set_initial_damage(&mut self, d: Vec<f64>) -> Result<(), SimError> {
        if self.step != 0 || d.len() != self.d.len() || d.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(SimError::InvalidState("initial damage must have one value in [0, 1] per element".into()));
        }
        self.d = d;
        self.initialize()
    }

    fn initialize(&mut self) -> Result<(), SimError> {
        let t = self.state.t;
        self.bcs.apply(&mut self.state, t);
        self.state.u_p.copy_from_slice(&self.state.u);
        self.state.v_p.copy_from_slice(&self.state.v);
        let strains = fem::strain_from_displacement(&self.mesh, &self.kin, &self.state.u)?;
        self.splits = fem::element_splits(&strains, &self.params);
        let f = fem::internal_forces(&self.mesh, &self.kin, &self.splits, &self.d, &self.params)?;
        let r = self.bcs.external_force(t);
        self.solve_acceleration(&r, &f);
        self.work_force = self.work_force_of(&r, &f);
        self.update_energies()?;
        self.external_work = 0.0;
        Ok(())
    }

    fn solve_acceleration(&mut self, r: &[f64], f: &[f64]) {
        let rhs: Vec<f64> = r.iter().zip(f).map(|(a, b)| a - b).collect();
        self.system.solve_acceleration(&rhs, &mut self.state.a);
    }

    fn work_force_of(&self, r: &[f64], f: &[f64]) -> Vec<f64> {
        let mut w = r.to_vec();
        for dof in self.bcs.prescribed_dofs() {
            w[dof] = self.system.mass_times_at(&self.state.a, dof) + f[dof];
        }
        w
    }

    fn update_energies(&mut self) -> Result<(), SimError> {
        self.kinetic = fem::kinetic_energy(self.system.nodal_mass(), &self.state.v);
        let (ep, ed) = fem::energy_integrals(self.mesh.element_areas(), &self.splits, &self.d, &self.params)?;
        self.potential = ep;
        self.dissipated = ed;
        Ok(())
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<(), SimError> {
        let dt = self.time.dt;
        let u_old = self.state.u.clone();
        predict(&mut self.state, dt);
        let t = self.state.t;
        self.bcs.apply(&mut self.state, t);

        let strains = fem::strain_from_displacement(&self.mesh, &self.kin, &self.state.u)?;
        self.splits = fem::element_splits(&strains, &self.params);
        if !self.freeze_damage {
            let e_plus: Vec<f64> = self.splits.iter().map(|s| s.e_plus).collect();
            let (ds, report) = damage_update(
                &self.lip,
                &e_plus,
                self.mesh.element_areas(),
                &self.d,
                &self.params,
                &self.options,
            )?;
            let inc = postproc::damage_length_increment(self.mesh.element_areas(), &self.d, &ds.d, self.params.length_scale);
            self.tracker.advance(inc);
            self.d = ds.d;
            self.last_report = report;
            self.stats.max_regions = self.stats.max_regions.max(report.regions);
            self.stats.largest_region = self.stats.largest_region.max(report.largest_region);
            self.stats.max_solver_iterations = self.stats.max_solver_iterations.max(report.max_iterations);
        }

        let f = fem::internal_forces(&self.mesh, &self.kin, &self.splits, &self.d, &self.params)?;
        let r = self.bcs.external_force(t);
        self.solve_acceleration(&r, &f);
        self.state.v = correct_velocity(&self.state.v_p, &self.state.a, dt);
        self.bcs.apply(&mut self.state, t);

        let w_new = self.work_force_of(&r, &f);
        let dw: f64 = (0..w_new.len())
            .map(|i| 0.5 * (self.work_force[i] + w_new[i]) * (self.state.u[i] - u_old[i]))
            .sum();
        self.external_work += dw;
        self.work_force = w_new;
        self.update_energies()?;
        self.step += 1;

        let balance = self.kinetic + self.potential + self.dissipated - self.external_work;
        if !self.state.is_finite() || !balance.is_finite() {
            return Err(SimError::Diverged { step: self.step, t });
        }
        self.stats.max_energy_residual = self.stats.max_energy_residual.max(balance.abs());
        self.stats.max_external_work = self.stats.max_external_work.max(self.external_work.abs());
        if self.post.mode == CrackMode::SymmetricBranching && self.tracker.t_branch.is_none() {
            self.probe_branching(t);
        }
        Ok(())
    }

    fn probe_branching(&mut self, t: f64) {
        let Some(tip) = self.post.notch_tip else { return };
        let count = self.d.iter().filter(|&&x| x > self.post.d_thresh).count();
        if count == self.branch_probe {
            return;
        }
        self.branch_probe = count;
        let criteria = BranchCriteria {
            notch_tip: tip,
            d_thresh: self.post.d_thresh,
            separation: 2.0 * self.params.length_scale,
            symmetry_line: self.post.symmetry_line,
            min_elements: self.post.branch_min_elements,
        };
        if postproc::detect_branching(&self.lip, &self.centroids, &self.d, &criteria) {
            log::info!("branching detected at t = {t:e} s");
            self.tracker.mark_branch(t);
        }
    }

    /// Time-series record of the current state; samples the tip speed.
    pub fn record(&mut self) -> StepRecord {
        let t = self.state.t;
        let v = self.tracker.sample_speed(t);
        let l = self.params.length_scale;
        let areas = self.mesh.element_areas();
        let region = |r: Option<[f64; 4]>| r.map(|r| postproc::region_length(&self.centroids, areas, &self.d, l, &r));
        StepRecord {
            step: self.step,
            t,
            kinetic: self.kinetic,
            potential: self.potential,
            dissipated: self.dissipated,
            external_work: self.external_work,
            crack_length: self.tracker.length,
            tip_speed_over_cr: v / self.params.wave_speeds().rayleigh,
            a1: region(self.post.d1),
            a2: region(self.post.d2),
        }
    }

    pub fn write_snapshot(&self, writer: &OutputWriter) -> Result<(), SimError> {
        let stresses = fem::element_stresses(&self.splits, &self.d, &self.params)?;
        let mean: Vec<f64> = stresses.iter().map(|s| 0.5 * (s.xx + s.yy)).collect();
        let e_plus: Vec<f64> = self.splits.iter().map(|s| s.e_plus).collect();
        let snap = Snapshot {
            step: self.step,
            t: self.state.t,
            u: &self.state.u,
            v: &self.state.v,
            d: &self.d,
            e_plus: &e_plus,
            hydrostatic: &mean,
        };
        super::output::write_vtk(&writer.vtk_path(self.step), &self.mesh, &snap)?;
        Ok(())
    }

    /// Runs the remaining steps, recording every `every` steps (and writing
    /// files when `writer` is given). Partial outputs are written on failure.
    pub fn run(&mut self, every: usize, writer: Option<&OutputWriter>) -> Result<(Vec<StepRecord>, RunSummary), SimError> {
        let every = every.max(1);
        let start = Instant::now();
        let mut records = Vec::new();
        let outcome = self.run_loop(every, writer, &mut records);
        let status = match &outcome {
            Ok(()) => "completed".to_string(),
            Err(e) => format!("failed: {e}"),
        };
        let summary = self.summary(status, start.elapsed().as_secs_f64(), &records);
        if let Some(w) = writer {
            w.write_csv(&records)?;
            w.write_summary(&summary)?;
        }
        outcome.map(|()| (records, summary))
    }

    fn run_loop(&mut self, every: usize, writer: Option<&OutputWriter>, records: &mut Vec<StepRecord>) -> Result<(), SimError> {
        if self.step == 0 {
            self.tick(writer, records)?;
        }
        while self.step < self.time.n_steps {
            self.step()?;
            if self.step % every == 0 {
                self.tick(writer, records)?;
            }
        }
        Ok(())
    }

    fn tick(&mut self, writer: Option<&OutputWriter>, records: &mut Vec<StepRecord>) -> Result<(), SimError> {
        let rec = self.record();
        log::debug!(
            "step {} t {:e} E_kin {:e} E_p {:e} E_d {:e} W_ext {:e} a {:e}",
            rec.step,
            rec.t,
            rec.kinetic,
            rec.potential,
            rec.dissipated,
            rec.external_work,
            rec.crack_length
        );
        records.push(rec);
        if let Some(w) = writer {
            if w.vtk {
                self.write_snapshot(w)?;
                w.write_csv(records)?;
            }
        }
        Ok(())
    }

    fn summary(&mut self, status: String, wall: f64, records: &[StepRecord]) -> RunSummary {
        let last = records.last().copied().unwrap_or_else(|| self.record());
        self.stats.max_lipschitz_ratio = lipschitz_ratio(&self.lip, &self.d, self.params.length_scale);
        let angle = match (self.post.notch_tip, self.post.angle_annulus) {
            (Some(tip), Some(ann)) => postproc::crack_angle(&self.centroids, &self.d, tip, self.post.d_thresh, ann),
            _ => None,
        };
        RunSummary {
            status,
            steps: self.step,
            t_final: self.state.t,
            wall_time_s: wall,
            derived: self.derived(),
            t_branch: self.tracker.t_branch,
            crack_length: self.tracker.length,
            a1: last.a1,
            a2: last.a2,
            crack_angle_deg: angle,
            stats: self.stats,
            final_record: last,
            config: self.config.clone(),
        }
    }

    pub fn derived(&self) -> Derived {
        Derived::new(&self.mesh, &self.params, &self.time)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }
    pub fn lip_mesh(&self) -> &LipMesh {
        &self.lip
    }
    pub fn params(&self) -> &MaterialParams {
        &self.params
    }
    pub fn time(&self) -> &TimeControl {
        &self.time
    }
    pub fn state(&self) -> &KinematicState {
        &self.state
    }
    pub fn damage(&self) -> &[f64] {
        &self.d
    }
    pub fn splits(&self) -> &[StrainSplit] {
        &self.splits
    }
    pub fn step_index(&self) -> usize {
        self.step
    }
    pub fn stats(&self) -> &RunStats {
        &self.stats
    }
    pub fn last_report(&self) -> &UpdateReport {
        &self.last_report
    }
    pub fn crack(&self) -> &CrackTracker {
        &self.tracker
    }
    pub fn centroids(&self) -> &[Point] {
        &self.centroids
    }

    /// `(E_kin, E_p, E_d, W_ext)` of the current state.
    pub fn energies(&self) -> (f64, f64, f64, f64) {
        (self.kinetic, self.potential, self.dissipated, self.external_work)
    }

    /// Reverses the velocity field (time-reversal experiments); the
    /// acceleration is unchanged.
    pub fn reverse_velocity(&mut self) {
        for v in &mut self.state.v {
            *v = -*v;
        }
    }
}
