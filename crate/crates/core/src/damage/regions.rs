use std::collections::VecDeque;

use crate::mesh::LipMesh;

use super::DamageError;

/// Connected set of elements whose bounds disagree.
#[derive(Clone, Debug, PartialEq)]
pub struct LipRegion {
    pub id: usize,
    /// Global element indices, ascending.
    pub elements: Vec<usize>,
    /// Lip edges inside the region as `(local i, local j, length)`.
    pub internal_edges: Vec<(usize, usize, f64)>,
    /// Lip edges leaving the region as `(local i, outside global element, length)`.
    pub boundary_edges: Vec<(usize, usize, f64)>,
}

impl LipRegion {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Connected components of `{i : upper_i - lower_i > gap_tol}` over lip edges,
/// ordered by their smallest element.
pub fn extract_regions(
    lip: &LipMesh,
    lower: &[f64],
    upper: &[f64],
    gap_tol: f64,
) -> Result<Vec<LipRegion>, DamageError> {
    let n = lip.num_vertices();
    if lower.len() != n || upper.len() != n {
        return Err(DamageError::InvalidInput(format!(
            "bounds have lengths {} and {}, lip-mesh has {n} vertices",
            lower.len(),
            upper.len()
        )));
    }
    let in_gap: Vec<bool> = (0..n).map(|i| upper[i] - lower[i] > gap_tol).collect();
    let mut local = vec![usize::MAX; n];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for seed in 0..n {
        if !in_gap[seed] || local[seed] != usize::MAX {
            continue;
        }
        let mut members = vec![seed];
        local[seed] = 0;
        queue.push_back(seed);
        while let Some(v) = queue.pop_front() {
            for (j, _) in lip.neighbors(v) {
                if in_gap[j] && local[j] == usize::MAX {
                    local[j] = 0;
                    members.push(j);
                    queue.push_back(j);
                }
            }
        }
        members.sort_unstable();
        for (k, &e) in members.iter().enumerate() {
            local[e] = k;
        }
        let mut internal_edges = Vec::new();
        let mut boundary_edges = Vec::new();
        for (k, &e) in members.iter().enumerate() {
            for (j, len) in lip.neighbors(e) {
                if in_gap[j] {
                    if e < j {
                        internal_edges.push((k, local[j], len));
                    }
                } else {
                    boundary_edges.push((k, j, len));
                }
            }
        }
        internal_edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        boundary_edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        regions.push(LipRegion {
            id: regions.len(),
            elements: members,
            internal_edges,
            boundary_edges,
        });
    }
    Ok(regions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damage::compute_bounds;
    use crate::mesh::structured::RectGrid;

    fn strip(n: usize, h: f64) -> LipMesh {
        let verts = (0..n).map(|i| [i as f64 * h, 0.0]).collect();
        let edges = (0..n - 1).map(|i| [i, i + 1]).collect();
        LipMesh::from_edges(verts, edges)
    }

    #[test]
    fn equal_bounds_give_no_regions() {
        let lip = strip(5, 1.0);
        let d = vec![0.2; 5];
        assert!(extract_regions(&lip, &d, &d, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn one_spike_one_region() {
        let h = 0.1;
        let lip = strip(41, h);
        let l = 1.0;
        let mut d = vec![0.0; 41];
        d[20] = 0.5;
        let (lo, up) = compute_bounds(&lip, &d, l).unwrap();
        let regions = extract_regions(&lip, &lo, &up, 1e-9).unwrap();
        assert_eq!(regions.len(), 1);
        let r = &regions[0];
        // upper is positive within distance l * 0.5 of the spike
        assert_eq!(r.elements, (16..=24).collect::<Vec<_>>());
        assert_eq!(r.internal_edges.len(), 8);
        let outside: Vec<_> = r.boundary_edges.iter().map(|e| (e.0, e.1)).collect();
        assert_eq!(outside, vec![(0, 15), (8, 25)]);
        assert!(r.boundary_edges.iter().all(|e| (e.2 - h).abs() < 1e-12));
    }

    #[test]
    fn distant_spikes_two_regions() {
        let lip = strip(60, 0.1);
        let mut d = vec![0.0; 60];
        d[10] = 0.4;
        d[45] = 0.4;
        let (lo, up) = compute_bounds(&lip, &d, 1.0).unwrap();
        let regions = extract_regions(&lip, &lo, &up, 1e-9).unwrap();
        assert_eq!(regions.len(), 2);
        assert!(regions[0].elements.contains(&10));
        assert!(regions[1].elements.contains(&45));
        assert_eq!(regions[1].id, 1);
    }

    #[test]
    fn regions_partition_gap_set() {
        let m = RectGrid::new([0.0, 0.0], 1.0, 1.0, 6, 6).build(|_, _| None).unwrap();
        let lip = LipMesh::build(&m);
        let mut d = vec![0.0; m.num_elements()];
        d[3] = 1.0;
        d[40] = 0.7;
        let (lo, up) = compute_bounds(&lip, &d, 0.1).unwrap();
        let regions = extract_regions(&lip, &lo, &up, 1e-9).unwrap();
        let mut seen = vec![false; d.len()];
        for r in &regions {
            for &e in &r.elements {
                assert!(!seen[e]);
                seen[e] = true;
            }
        }
        for i in 0..d.len() {
            assert_eq!(seen[i], up[i] - lo[i] > 1e-9);
        }
    }
}
