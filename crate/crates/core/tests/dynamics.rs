use lipfrac_core::driver::{PostprocSection, SolverSection};
use lipfrac_core::mesh::structured::{Diagonal, RectGrid};
use lipfrac_core::{MaterialParams, Setup, Simulation, StepRule, TimeControl};

fn free_plate(n_steps: usize) -> Simulation {
    let mesh = RectGrid::new([0.0, 0.0], 0.02, 0.01, 10, 5)
        .diagonal(Diagonal::Alternating)
        .build(|_, _| None)
        .unwrap();
    let params = MaterialParams::from_fracture_energy(32e9, 0.2, 2450.0, 3.0, 1.25e-3).unwrap();
    let time = TimeControl::for_mesh(&mesh, &params, StepRule::Stable, 0.8, 0.0).unwrap().with_steps(n_steps);
    Simulation::new(Setup {
        mesh,
        params,
        bcs: vec![],
        time,
        solver: SolverSection {
            freeze_damage: true,
            ..SolverSection::default()
        },
        postproc: PostprocSection::default(),
    })
    .unwrap()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|x| x.abs()).fold(0.0, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

#[test]
fn reversing_velocity_retraces_the_trajectory() {
    let n = 300;
    let mut sim = free_plate(2 * n);
    let nodes = sim.mesh().nodes().to_vec();
    let u0: Vec<f64> = nodes
        .iter()
        .flat_map(|p| [1e-6 * (300.0 * p[1]).sin(), 1e-6 * (200.0 * p[0]).cos()])
        .collect();
    let v0: Vec<f64> = nodes.iter().flat_map(|p| [0.3 * (150.0 * p[0]).cos(), -0.2 * p[1] / 0.01]).collect();
    sim.set_initial_state(u0.clone(), v0.clone()).unwrap();
    for _ in 0..n {
        sim.step().unwrap();
    }
    assert!(rel_diff(&sim.state().u, &u0) > 1e-2, "the state should have moved");
    sim.reverse_velocity();
    for _ in 0..n {
        sim.step().unwrap();
    }
    let back_v: Vec<f64> = sim.state().v.iter().map(|x| -x).collect();
    assert!(rel_diff(&sim.state().u, &u0) < 1e-8, "u error {}", rel_diff(&sim.state().u, &u0));
    assert!(rel_diff(&back_v, &v0) < 1e-8, "v error {}", rel_diff(&back_v, &v0));
}

#[test]
fn free_plate_conserves_momentum() {
    let mut sim = free_plate(200);
    let nodes = sim.mesh().nodes().to_vec();
    let v0: Vec<f64> = nodes.iter().flat_map(|p| [(300.0 * p[0]).sin(), 0.5]).collect();
    sim.set_initial_state(vec![0.0; v0.len()], v0).unwrap();
    let momentum = |s: &Simulation| {
        let m = lipfrac_core::fem::assemble_mass(s.mesh(), s.params().density);
        let v = &s.state().v;
        let mut p = [0.0; 2];
        for (row, vec) in m.outer_iterator().enumerate() {
            for (col, &val) in vec.iter() {
                p[row % 2] += val * v[col];
            }
        }
        p
    };
    let p0 = momentum(&sim);
    for _ in 0..200 {
        sim.step().unwrap();
    }
    let p1 = momentum(&sim);
    for k in 0..2 {
        assert!((p1[k] - p0[k]).abs() <= 1e-9 * p0[1].abs(), "{p0:?} -> {p1:?}");
    }
}
