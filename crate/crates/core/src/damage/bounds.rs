use std::collections::BinaryHeap;

use crate::mesh::{HeapItem, LipMesh};

use super::DamageError;

/// Lipschitz envelopes of `d_loc` in the lip-mesh graph metric:
/// `upper(x) = max_y d_loc(y) - dist(x, y) / l` and
/// `lower(x) = min_y d_loc(y) + dist(x, y) / l`.
///
/// Both are computed by one label-setting sweep seeded from every vertex.
/// Returns `(lower, upper)`.
pub fn compute_bounds(lip: &LipMesh, d_loc: &[f64], l: f64) -> Result<(Vec<f64>, Vec<f64>), DamageError> {
    if d_loc.len() != lip.num_vertices() {
        return Err(DamageError::InvalidInput(format!(
            "d_loc has {} entries, lip-mesh has {} vertices",
            d_loc.len(),
            lip.num_vertices()
        )));
    }
    if !(l > 0.0) {
        return Err(DamageError::InvalidInput(format!("length scale must be positive, got {l}")));
    }
    if let Some(v) = d_loc.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(DamageError::InvalidInput(format!("d_loc value {v} outside [0, 1]")));
    }
    let inv_l = 1.0 / l;
    // lower: smallest label first, labels grow along edges
    let lower = sweep(lip, d_loc.to_vec(), |key, len| key + len * inv_l);
    // upper: run the same sweep on negated labels
    let neg: Vec<f64> = d_loc.iter().map(|v| -v).collect();
    let upper = sweep(lip, neg, |key, len| key + len * inv_l)
        .into_iter()
        .map(|v| -v)
        .collect();
    Ok((lower, upper))
}

/// Multi-source shortest path with initial offsets: `label(x) = min_y label0(y) + w(x, y)`.
/// Only vertices that can lower a neighbour are seeded; the rest never relax
/// anything unless their own label drops, in which case they are pushed then.
fn sweep(lip: &LipMesh, mut label: Vec<f64>, relax: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut heap: BinaryHeap<HeapItem> = label
        .iter()
        .enumerate()
        .filter(|&(v, &key)| lip.neighbors(v).any(|(j, len)| relax(key, len) < label[j]))
        .map(|(vertex, &key)| HeapItem { key, vertex })
        .collect();
    while let Some(HeapItem { key, vertex }) = heap.pop() {
        if key > label[vertex] {
            continue;
        }
        for (j, len) in lip.neighbors(vertex) {
            let cand = relax(key, len);
            if cand < label[j] {
                label[j] = cand;
                heap.push(HeapItem { key: cand, vertex: j });
            }
        }
    }
    label
}
