//! Linear-triangle kernels: strains, consistent mass, internal and external
//! forces, energy integrals and the element-level stable time step bound.
//!
//! DOF layout is interleaved: node `i` owns `2i` (x) and `2i + 1` (y).

use nalgebra::{Matrix3, Matrix6, SymmetricEigen};
use rayon::prelude::*;
use sprs::CsMat;

use crate::constitutive::{self, eigen_split, ConstitutiveError, MaterialParams, Strain2D, StrainSplit, Stress2D};
use crate::mesh::Mesh;
use crate::sparse::csc_from_triplets;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum FemError {
    #[error("{what}: expected length {expected}, got {got}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("element {element}: {source}")]
    Constitutive {
        element: usize,
        source: ConstitutiveError,
    },
    #[error("no boundary facets carry tag '{0}'")]
    UnknownTag(String),
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), FemError> {
    if expected == got {
        Ok(())
    } else {
        Err(FemError::SizeMismatch { what, expected, got })
    }
}

/// Constant shape-function gradients of one linear triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementKinematics {
    /// `grad[a] = [dN_a/dx, dN_a/dy]` (1/m).
    pub grad: [[f64; 2]; 3],
    pub area: f64,
}

impl ElementKinematics {
    pub fn new(p: [[f64; 2]; 3]) -> Self {
        let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let mut grad = [[0.0; 2]; 3];
        for a in 0..3 {
            let (j, k) = ((a + 1) % 3, (a + 2) % 3);
            grad[a] = [(p[j][1] - p[k][1]) / two_a, (p[k][0] - p[j][0]) / two_a];
        }
        Self { grad, area: 0.5 * two_a }
    }

    /// Strain from the six element DOFs `[ux0, uy0, ux1, uy1, ux2, uy2]`.
    pub fn strain(&self, ue: &[f64; 6]) -> Strain2D {
        let mut e = Strain2D::ZERO;
        for a in 0..3 {
            let [gx, gy] = self.grad[a];
            let (ux, uy) = (ue[2 * a], ue[2 * a + 1]);
            e.xx += gx * ux;
            e.yy += gy * uy;
            e.xy += 0.5 * (gy * ux + gx * uy);
        }
        e
    }

    /// Nodal forces `A sigma : grad N_a`, same layout as the element DOFs.
    pub fn forces(&self, sigma: &Stress2D) -> [f64; 6] {
        let mut f = [0.0; 6];
        for a in 0..3 {
            let [gx, gy] = self.grad[a];
            f[2 * a] = self.area * (sigma.xx * gx + sigma.xy * gy);
            f[2 * a + 1] = self.area * (sigma.xy * gx + sigma.yy * gy);
        }
        f
    }
}

pub fn element_kinematics(mesh: &Mesh) -> Vec<ElementKinematics> {
    let x = mesh.nodes();
    mesh.triangles()
        .iter()
        .map(|t| ElementKinematics::new([x[t[0]], x[t[1]], x[t[2]]]))
        .collect()
}

fn gather(t: &[usize; 3], u: &[f64]) -> [f64; 6] {
    let mut ue = [0.0; 6];
    for a in 0..3 {
        ue[2 * a] = u[2 * t[a]];
        ue[2 * a + 1] = u[2 * t[a] + 1];
    }
    ue
}

/// Per-element (constant) strain of the linear interpolant of `u`.
pub fn strain_from_displacement(mesh: &Mesh, kin: &[ElementKinematics], u: &[f64]) -> Result<Vec<Strain2D>, FemError> {
    check_len("displacement", mesh.num_dofs(), u.len())?;
    check_len("element kinematics", mesh.num_elements(), kin.len())?;
    Ok(mesh
        .triangles()
        .par_iter()
        .zip(kin.par_iter())
        .map(|(t, k)| k.strain(&gather(t, u)))
        .collect())
}

pub fn element_splits(strains: &[Strain2D], params: &MaterialParams) -> Vec<StrainSplit> {
    strains
        .par_iter()
        .map(|e| eigen_split(e, params.lambda, params.mu))
        .collect()
}

fn check_damage(d: &[f64]) -> Result<(), FemError> {
    for (element, &v) in d.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(FemError::Constitutive {
                element,
                source: ConstitutiveError::DamageOutOfRange(v),
            });
        }
    }
    Ok(())
}

/// Element stresses for the given splits and damage.
pub fn element_stresses(splits: &[StrainSplit], d: &[f64], params: &MaterialParams) -> Result<Vec<Stress2D>, FemError> {
    check_len("damage", splits.len(), d.len())?;
    check_damage(d)?;
    Ok(splits
        .par_iter()
        .zip(d.par_iter())
        .map(|(s, &di)| constitutive::stress_unchecked(s, di, params))
        .collect())
}

/// Internal force vector `F_i = sum_e A_e sigma_e : grad N_i`.
///
/// Element stresses are evaluated in parallel; the scatter is serial so the
/// summation order is fixed.
pub fn internal_forces(
    mesh: &Mesh,
    kin: &[ElementKinematics],
    splits: &[StrainSplit],
    d: &[f64],
    params: &MaterialParams,
) -> Result<Vec<f64>, FemError> {
    check_len("splits", mesh.num_elements(), splits.len())?;
    let stresses = element_stresses(splits, d, params)?;
    let mut f = vec![0.0; mesh.num_dofs()];
    for ((t, k), s) in mesh.triangles().iter().zip(kin).zip(&stresses) {
        let fe = k.forces(s);
        for a in 0..3 {
            f[2 * t[a]] += fe[2 * a];
            f[2 * t[a] + 1] += fe[2 * a + 1];
        }
    }
    Ok(f)
}

/// Adds the nodal forces of a uniform traction `t` (Pa) on all facets tagged
/// `tag` into `out`. Returns the number of loaded facets.
pub fn external_traction(mesh: &Mesh, tag: &str, t: [f64; 2], out: &mut [f64]) -> Result<usize, FemError> {
    check_len("force vector", mesh.num_dofs(), out.len())?;
    let mut count = 0;
    for f in mesh.facets_with_tag(tag) {
        let half = 0.5 * mesh.facet_length(f);
        for &n in &f.nodes {
            out[2 * n] += t[0] * half;
            out[2 * n + 1] += t[1] * half;
        }
        count += 1;
    }
    if count == 0 {
        return Err(FemError::UnknownTag(tag.to_string()));
    }
    Ok(count)
}

/// Scalar consistent mass `rho * int N_i N_j` over nodes (one component).
pub fn assemble_nodal_mass(mesh: &Mesh, rho: f64) -> CsMat<f64> {
    let mut trip = Vec::with_capacity(9 * mesh.num_elements());
    for (t, &area) in mesh.triangles().iter().zip(mesh.element_areas()) {
        let m = rho * area / 12.0;
        for a in 0..3 {
            for b in 0..3 {
                trip.push((t[a], t[b], if a == b { 2.0 * m } else { m }));
            }
        }
    }
    csc_from_triplets(mesh.num_nodes(), &trip)
}

/// Full consistent mass on the interleaved DOF layout.
pub fn assemble_mass(mesh: &Mesh, rho: f64) -> CsMat<f64> {
    let nodal = assemble_nodal_mass(mesh, rho);
    let mut trip = Vec::with_capacity(2 * nodal.nnz());
    for (v, (i, j)) in nodal.iter() {
        trip.push((2 * i, 2 * j, *v));
        trip.push((2 * i + 1, 2 * j + 1, *v));
    }
    csc_from_triplets(mesh.num_dofs(), &trip)
}

/// `0.5 v^T M v` with `nodal_mass` the scalar per-component mass.
pub fn kinetic_energy(nodal_mass: &CsMat<f64>, v: &[f64]) -> f64 {
    let n = nodal_mass.rows();
    let mut sum = 0.0;
    for (c, row) in nodal_mass.outer_iterator().enumerate() {
        for (r, &m) in row.iter() {
            sum += m * (v[2 * r] * v[2 * c] + v[2 * r + 1] * v[2 * c + 1]);
        }
    }
    debug_assert_eq!(v.len(), 2 * n);
    0.5 * sum
}

/// Potential and dissipated energy per unit thickness: `(sum A psi, sum A Yc h(d))`.
pub fn energy_integrals(
    areas: &[f64],
    splits: &[StrainSplit],
    d: &[f64],
    params: &MaterialParams,
) -> Result<(f64, f64), FemError> {
    check_len("splits", areas.len(), splits.len())?;
    check_len("damage", areas.len(), d.len())?;
    check_damage(d)?;
    let mut ep = 0.0;
    let mut ed = 0.0;
    for ((&a, s), &di) in areas.iter().zip(splits).zip(d) {
        ep += a * constitutive::free_energy_unchecked(s, di, params);
        ed += a * params.critical_energy * params.softening.value(di);
    }
    Ok((ep, ed))
}

/// Undamaged 6x6 element stiffness (plane strain).
pub fn element_stiffness(k: &ElementKinematics, params: &MaterialParams) -> Matrix6<f64> {
    let (l, m) = (params.lambda, params.mu);
    let c = Matrix3::new(l + 2.0 * m, l, 0.0, l, l + 2.0 * m, 0.0, 0.0, 0.0, m);
    // B maps DOFs to engineering strain (xx, yy, 2xy)
    let mut b = nalgebra::Matrix3x6::zeros();
    for a in 0..3 {
        let [gx, gy] = k.grad[a];
        b[(0, 2 * a)] = gx;
        b[(1, 2 * a + 1)] = gy;
        b[(2, 2 * a)] = gy;
        b[(2, 2 * a + 1)] = gx;
    }
    b.transpose() * c * b * k.area
}

pub fn element_mass(area: f64, rho: f64) -> Matrix6<f64> {
    let m = rho * area / 12.0;
    Matrix6::from_fn(|i, j| {
        if i % 2 != j % 2 {
            0.0
        } else if i == j {
            2.0 * m
        } else {
            m
        }
    })
}

/// Largest generalized eigenvalue of `(K_e, M_e)` for one element.
pub fn element_max_frequency_sq(k: &ElementKinematics, params: &MaterialParams) -> f64 {
    let ke = element_stiffness(k, params);
    let me = element_mass(k.area, params.density);
    // M_e is SPD; symmetric reduction L^-1 K L^-T
    let chol = me.cholesky().expect("element mass is SPD");
    let linv = chol.l().try_inverse().expect("invertible factor");
    let a = &linv * ke * linv.transpose();
    let a = 0.5 * (a + a.transpose());
    SymmetricEigen::new(a).eigenvalues.max()
}

/// Stable central-difference step `2 / omega_max` using the element-wise
/// upper bound on the global maximum frequency.
pub fn stable_timestep(mesh: &Mesh, params: &MaterialParams) -> f64 {
    let kin = element_kinematics(mesh);
    let w2 = kin
        .par_iter()
        .map(|k| element_max_frequency_sq(k, params))
        .reduce(|| 0.0, f64::max);
    2.0 / w2.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured::{Diagonal, RectGrid};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> MaterialParams {
        MaterialParams::from_fracture_energy(32e9, 0.2, 2450.0, 3.0, 1.25e-3).unwrap()
    }

    fn jittered_mesh(seed: u64) -> Mesh {
        let g = RectGrid::new([0.0, 0.0], 2.0, 1.0, 4, 3).build(|_, _| None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes: Vec<_> = g
            .nodes()
            .iter()
            .map(|p| [p[0] + rng.gen_range(-0.08..0.08), p[1] + rng.gen_range(-0.08..0.08)])
            .collect();
        Mesh::new(nodes, g.triangles().to_vec(), vec![]).unwrap()
    }

    #[test]
    fn gradients_sum_to_zero() {
        let m = jittered_mesh(1);
        for k in element_kinematics(&m) {
            let sx: f64 = k.grad.iter().map(|g| g[0]).sum();
            let sy: f64 = k.grad.iter().map(|g| g[1]).sum();
            assert!(sx.abs() < 1e-12 && sy.abs() < 1e-12);
            assert!(k.area > 0.0);
        }
    }

    #[test]
    fn rigid_and_linear_fields() {
        let m = jittered_mesh(2);
        let kin = element_kinematics(&m);
        let mut u = vec![0.0; m.num_dofs()];
        for (i, p) in m.nodes().iter().enumerate() {
            // translation plus infinitesimal rotation
            u[2 * i] = 0.3 - 0.01 * p[1];
            u[2 * i + 1] = -0.2 + 0.01 * p[0];
        }
        for e in strain_from_displacement(&m, &kin, &u).unwrap() {
            assert!(e.norm() < 1e-14);
        }
        let p = params();
        let splits = element_splits(&strain_from_displacement(&m, &kin, &u).unwrap(), &p);
        let f = internal_forces(&m, &kin, &splits, &vec![0.0; m.num_elements()], &p).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-3));

        for (i, p) in m.nodes().iter().enumerate() {
            u[2 * i] = 1e-3 * p[0];
            u[2 * i + 1] = 0.0;
        }
        for e in strain_from_displacement(&m, &kin, &u).unwrap() {
            assert_relative_eq!(e.xx, 1e-3, epsilon = 1e-15);
            assert!(e.yy.abs() < 1e-15 && e.xy.abs() < 1e-15);
        }
        assert!(strain_from_displacement(&m, &kin, &u[1..]).is_err());
    }

    #[test]
    fn strain_matches_interpolant_derivative() {
        // oracle: solve for the affine interpolant coefficients directly
        let m = jittered_mesh(3);
        let kin = element_kinematics(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u: Vec<f64> = (0..m.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let strains = strain_from_displacement(&m, &kin, &u).unwrap();
        for (e, t) in m.triangles().iter().enumerate() {
            let a = DMatrix::from_fn(3, 3, |r, c| match c {
                0 => 1.0,
                1 => m.nodes()[t[r]][0],
                _ => m.nodes()[t[r]][1],
            });
            let lu = a.lu();
            let cx = lu.solve(&DMatrix::from_fn(3, 1, |r, _| u[2 * t[r]])).unwrap();
            let cy = lu.solve(&DMatrix::from_fn(3, 1, |r, _| u[2 * t[r] + 1])).unwrap();
            assert_relative_eq!(strains[e].xx, cx[1], max_relative = 1e-10, epsilon = 1e-12);
            assert_relative_eq!(strains[e].yy, cy[2], max_relative = 1e-10, epsilon = 1e-12);
            assert_relative_eq!(strains[e].xy, 0.5 * (cx[2] + cy[1]), max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_element_mass_block() {
        let m = Mesh::new(vec![[0.0, 0.0], [2.0, 0.0], [0.0, 3.0]], vec![[0, 1, 2]], vec![]).unwrap();
        let mm = assemble_mass(&m, 12.0).to_dense();
        // rho A / 12 = 3
        for a in 0..3 {
            for b in 0..3 {
                let expect = if a == b { 6.0 } else { 3.0 };
                assert_relative_eq!(mm[[2 * a, 2 * b]], expect, epsilon = 1e-12);
                assert_relative_eq!(mm[[2 * a + 1, 2 * b + 1]], expect, epsilon = 1e-12);
                assert_eq!(mm[[2 * a, 2 * b + 1]], 0.0);
            }
        }
    }

    #[test]
    fn total_mass_and_spd() {
        let m = jittered_mesh(4);
        let rho = 2450.0;
        let mm = assemble_mass(&m, rho);
        let dense = mm.to_dense();
        let sum_x: f64 = (0..m.num_nodes())
            .flat_map(|i| (0..m.num_nodes()).map(move |j| (i, j)))
            .map(|(i, j)| dense[[2 * i, 2 * j]])
            .sum();
        assert_relative_eq!(sum_x, rho * m.total_area(), max_relative = 1e-12);
        let n = m.num_dofs();
        let dm = DMatrix::from_fn(n, n, |i, j| dense[[i, j]]);
        assert_eq!(dm, dm.transpose());
        let eig = SymmetricEigen::new(dm).eigenvalues;
        assert!(eig.iter().all(|&l| l > 0.0));

        let sq = RectGrid::new([0.0, 0.0], 1.0, 1.0, 1, 1).build(|_, _| None).unwrap();
        let d2 = assemble_mass(&sq, 1.0).to_dense();
        let dm = DMatrix::from_fn(8, 8, |i, j| d2[[i, j]]);
        assert!(SymmetricEigen::new(dm).eigenvalues.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn kinetic_energy_matches_dense_product() {
        let m = jittered_mesh(5);
        let nodal = assemble_nodal_mass(&m, 3.0);
        let full = assemble_mass(&m, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..m.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dense = full.to_dense();
        let mut quad = 0.0;
        for i in 0..v.len() {
            for j in 0..v.len() {
                quad += v[i] * dense[[i, j]] * v[j];
            }
        }
        assert_relative_eq!(kinetic_energy(&nodal, &v), 0.5 * quad, max_relative = 1e-12);
        assert!(kinetic_energy(&nodal, &v) > 0.0);
    }

    #[test]
    fn patch_test_boundary_tractions() {
        // uniform strain on a square: interior nodal forces vanish and each
        // boundary node carries sigma . n over half its adjacent facets
        let side = 1.0;
        let m = RectGrid::new([0.0, 0.0], side, side, 4, 4)
            .diagonal(Diagonal::Crossed)
            .build(|_, _| None)
            .unwrap();
        let p = params();
        let kin = element_kinematics(&m);
        let (exx, eyy, exy) = (1e-4, -3e-5, 2e-5);
        let mut u = vec![0.0; m.num_dofs()];
        for (i, q) in m.nodes().iter().enumerate() {
            u[2 * i] = exx * q[0] + exy * q[1];
            u[2 * i + 1] = exy * q[0] + eyy * q[1];
        }
        let splits = element_splits(&strain_from_displacement(&m, &kin, &u).unwrap(), &p);
        let f = internal_forces(&m, &kin, &splits, &vec![0.0; m.num_elements()], &p).unwrap();
        let tr = exx + eyy;
        let sxx = p.lambda * tr + 2.0 * p.mu * exx;
        let syy = p.lambda * tr + 2.0 * p.mu * eyy;
        let sxy = 2.0 * p.mu * exy;
        let h = side / 4.0;
        let scale = sxx.abs() * h;
        for (i, q) in m.nodes().iter().enumerate() {
            let on = |c: f64| c.abs() < 1e-12 || (c - side).abs() < 1e-12;
            let mut expect = [0.0, 0.0];
            for (normal, weight) in [
                ([-1.0, 0.0], (q[0].abs() < 1e-12) as u8),
                ([1.0, 0.0], ((q[0] - side).abs() < 1e-12) as u8),
                ([0.0, -1.0], (q[1].abs() < 1e-12) as u8),
                ([0.0, 1.0], ((q[1] - side).abs() < 1e-12) as u8),
            ] {
                if weight == 0 {
                    continue;
                }
                // along this side the node touches one facet at a corner, two otherwise
                let along = if normal[0] != 0.0 { q[1] } else { q[0] };
                let len = if on(along) { 0.5 * h } else { h };
                expect[0] += (sxx * normal[0] + sxy * normal[1]) * len;
                expect[1] += (sxy * normal[0] + syy * normal[1]) * len;
            }
            assert!((f[2 * i] - expect[0]).abs() < 1e-10 * scale, "node {i}");
            assert!((f[2 * i + 1] - expect[1]).abs() < 1e-10 * scale, "node {i}");
        }
    }

    #[test]
    fn internal_force_is_energy_gradient() {
        let m = jittered_mesh(6);
        let p = params();
        let kin = element_kinematics(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u: Vec<f64> = (0..m.num_dofs()).map(|_| rng.gen_range(-1e-4..1e-4)).collect();
        let d: Vec<f64> = (0..m.num_elements()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let energy = |u: &[f64]| {
            let s = element_splits(&strain_from_displacement(&m, &kin, u).unwrap(), &p);
            energy_integrals(m.element_areas(), &s, &d, &p).unwrap().0
        };
        let splits = element_splits(&strain_from_displacement(&m, &kin, &u).unwrap(), &p);
        let f = internal_forces(&m, &kin, &splits, &d, &p).unwrap();
        let fmax = f.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let eps = 1e-9;
        for i in 0..m.num_dofs() {
            let mut up = u.clone();
            let mut um = u.clone();
            up[i] += eps;
            um[i] -= eps;
            let fd = (energy(&up) - energy(&um)) / (2.0 * eps);
            assert!((fd - f[i]).abs() <= 1e-5 * f[i].abs().max(1e-3 * fmax), "dof {i}: {fd} vs {}", f[i]);
        }
    }

    #[test]
    fn traction_on_tagged_edge() {
        let m = Mesh::new(
            vec![[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![crate::mesh::BoundaryFacet { nodes: [0, 1], tag: "load".into() }],
        )
        .unwrap();
        let mut r = vec![0.0; 6];
        external_traction(&m, "load", [0.0, 5.0], &mut r).unwrap();
        assert_eq!(r, vec![0.0, 5.0, 0.0, 5.0, 0.0, 0.0]);
        let mut z = vec![0.0; 6];
        external_traction(&m, "load", [0.0, 0.0], &mut z).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        assert!(matches!(external_traction(&m, "none", [1.0, 0.0], &mut z), Err(FemError::UnknownTag(_))));
    }

    #[test]
    fn edge_load_total_force() {
        let m = RectGrid::new([0.0, 0.0], 0.1, 0.02, 40, 8)
            .build(|a, b| (a[1] == 0.0 && b[1] == 0.0).then(|| "bottom".to_string()))
            .unwrap();
        let mut r = vec![0.0; m.num_dofs()];
        external_traction(&m, "bottom", [0.0, -1e6], &mut r).unwrap();
        let fy: f64 = r.iter().skip(1).step_by(2).sum();
        assert_relative_eq!(fy, -1e5, max_relative = 1e-12);
    }

    #[test]
    fn energies() {
        let m = jittered_mesh(7);
        let p = params();
        let zero = vec![StrainSplit::default(); m.num_elements()];
        let (ep, ed) = energy_integrals(m.element_areas(), &zero, &vec![0.0; m.num_elements()], &p).unwrap();
        assert_eq!((ep, ed), (0.0, 0.0));
        let (_, ed) = energy_integrals(m.element_areas(), &zero, &vec![1.0; m.num_elements()], &p).unwrap();
        assert_relative_eq!(ed, 5.0 * p.critical_energy * m.total_area(), max_relative = 1e-12);

        let one = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], vec![]).unwrap();
        let s = element_splits(&[Strain2D::new(1e-3, 0.0, 0.0)], &p);
        let (ep, _) = energy_integrals(one.element_areas(), &s, &[0.0], &p).unwrap();
        assert_relative_eq!(ep, 0.5 * 0.5 * (p.lambda + 2.0 * p.mu) * 1e-6, max_relative = 1e-12);
        assert!(energy_integrals(one.element_areas(), &s, &[1.2], &p).is_err());
    }

    #[test]
    fn element_frequency_bounds_global() {
        // Irons: global omega_max^2 never exceeds the element maximum
        let m = jittered_mesh(8);
        let p = params();
        let n = m.num_dofs();
        let mut k = DMatrix::<f64>::zeros(n, n);
        let mut mm = DMatrix::<f64>::zeros(n, n);
        let kin = element_kinematics(&m);
        for (t, ke) in m.triangles().iter().zip(&kin) {
            let kel = element_stiffness(ke, &p);
            let mel = element_mass(ke.area, p.density);
            for a in 0..6 {
                for b in 0..6 {
                    let (i, j) = (2 * t[a / 2] + a % 2, 2 * t[b / 2] + b % 2);
                    k[(i, j)] += kel[(a, b)];
                    mm[(i, j)] += mel[(a, b)];
                }
            }
        }
        let l = mm.clone().cholesky().unwrap().l();
        let li = l.try_inverse().unwrap();
        let a: DMatrix<f64> = &li * k * li.transpose();
        let a = (&a + a.transpose()) * 0.5;
        let global = SymmetricEigen::new(a).eigenvalues.max();
        let bound = kin.iter().map(|k| element_max_frequency_sq(k, &p)).fold(0.0, f64::max);
        assert!(global <= bound * (1.0 + 1e-9));
        let dt = stable_timestep(&m, &p);
        let cd = p.wave_speeds().dilatational;
        assert!(dt < m.min_element_size() / cd);
    }
}
