use rayon::prelude::*;

use crate::constitutive::MaterialParams;
use crate::mesh::LipMesh;

use super::{
    compute_bounds, constrained_damage_solve, extract_regions, DamageError, DamageState, LocalSolver, RegionInputs,
    SolverOptions,
};

/// Bookkeeping of one damage update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateReport {
    pub regions: usize,
    pub region_elements: usize,
    pub largest_region: usize,
    pub max_iterations: usize,
}

/// One full damage step: local solve, bounds, regions, regional constrained
/// solves. Outside the regions `d = d_loc`.
pub fn damage_update(
    lip: &LipMesh,
    e_plus: &[f64],
    areas: &[f64],
    d_n: &[f64],
    params: &MaterialParams,
    opts: &SolverOptions,
) -> Result<(DamageState, UpdateReport), DamageError> {
    let n = lip.num_vertices();
    if e_plus.len() != n || areas.len() != n || d_n.len() != n {
        return Err(DamageError::InvalidInput(format!(
            "field lengths ({}, {}, {}) do not match {n} lip-mesh vertices",
            e_plus.len(),
            areas.len(),
            d_n.len()
        )));
    }
    opts.validate()?;
    let local = LocalSolver {
        degradation: params.degradation,
        softening: params.softening,
        tol: opts.local_tol,
    };
    let d_loc = e_plus
        .par_iter()
        .zip(d_n.par_iter())
        .map(|(&e, &dn)| local.solve(e, dn, params.critical_energy))
        .collect::<Result<Vec<f64>, DamageError>>()?;
    let (d_lower, d_upper) = compute_bounds(lip, &d_loc, params.length_scale)?;
    let regions = extract_regions(lip, &d_lower, &d_upper, opts.gap_tol)?;

    let inputs = RegionInputs {
        e_plus,
        areas,
        d_n,
        d_lower: &d_lower,
        d_upper: &d_upper,
        d_frozen: &d_loc,
    };
    let solutions = regions
        .par_iter()
        .map(|r| constrained_damage_solve(r, &inputs, params, opts))
        .collect::<Result<Vec<_>, DamageError>>()?;

    let mut d = d_loc.clone();
    let mut report = UpdateReport {
        regions: regions.len(),
        ..Default::default()
    };
    for (r, sol) in regions.iter().zip(&solutions) {
        for (&e, &v) in r.elements.iter().zip(&sol.d) {
            d[e] = v;
        }
        report.region_elements += r.len();
        report.largest_region = report.largest_region.max(r.len());
        report.max_iterations = report.max_iterations.max(sol.iterations);
    }
    for (v, &dn) in d.iter_mut().zip(d_n) {
        *v = v.clamp(dn, 1.0);
    }
    Ok((
        DamageState {
            d,
            d_n: d_n.to_vec(),
            d_loc,
            d_upper,
            d_lower,
        },
        report,
    ))
}

/// `max |d_i - d_j| l / length` over lip edges (`<= 1` when feasible).
pub fn lipschitz_ratio(lip: &LipMesh, d: &[f64], l: f64) -> f64 {
    lip.edges()
        .iter()
        .zip(lip.edge_lengths())
        .map(|(e, &len)| (d[e[0]] - d[e[1]]).abs() * l / len)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damage::solve_whole_domain;
    use crate::mesh::structured::RectGrid;
    use crate::mesh::Mesh;

    fn setup() -> (Mesh, LipMesh, MaterialParams) {
        let m = RectGrid::new([0.0, 0.0], 1e-2, 1e-2, 8, 8).build(|_, _| None).unwrap();
        let lip = LipMesh::build(&m);
        let p = MaterialParams::new(32e9, 0.2, 2450.0, 600.0, 2.5e-3).unwrap();
        (m, lip, p)
    }

    #[test]
    fn zero_strain_keeps_damage() {
        let (m, lip, p) = setup();
        let n = m.num_elements();
        let d_n: Vec<f64> = m.centroids().iter().map(|c| 0.3 * (1.0 - c[0] / 1e-2)).collect();
        let (s, rep) = damage_update(&lip, &vec![0.0; n], m.element_areas(), &d_n, &p, &SolverOptions::default()).unwrap();
        assert_eq!(s.d, d_n);
        assert_eq!(rep.regions, 0);
    }

    #[test]
    fn overdriven_element_gives_cone() {
        let (m, lip, p) = setup();
        let n = m.num_elements();
        let mut e = vec![0.0; n];
        e[70] = 1e4 * p.critical_energy;
        let opts = SolverOptions::default();
        let (s, rep) = damage_update(&lip, &e, m.element_areas(), &vec![0.0; n], &p, &opts).unwrap();
        assert!(rep.regions >= 1);
        assert!(lipschitz_ratio(&lip, &s.d, p.length_scale) <= 1.0 + 1e-8);
        for i in 0..n {
            assert!(s.d_lower[i] - 1e-9 <= s.d[i] && s.d[i] <= s.d_upper[i] + 1e-9);
        }
        let whole = solve_whole_domain(&lip, &e, m.element_areas(), &vec![0.0; n], &p, &opts).unwrap();
        for i in 0..n {
            assert!((whole.d[i] - s.d[i]).abs() < 1e-5, "element {i}: {} vs {}", whole.d[i], s.d[i]);
        }
    }
}
