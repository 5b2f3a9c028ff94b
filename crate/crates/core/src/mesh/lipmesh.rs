use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use super::{edge_key, Mesh, MeshError, Point};

/// Dual graph over element centroids. Two vertices are joined when their
/// triangles share a facet that is not a tagged boundary facet, so meshed
/// cracks are never crossed.
#[derive(Clone, Debug)]
pub struct LipMesh {
    vertices: Vec<Point>,
    edges: Vec<[usize; 2]>,
    edge_length: Vec<f64>,
    // CSR adjacency: (neighbor, edge index)
    offsets: Vec<usize>,
    adjacency: Vec<(usize, usize)>,
}

/// Min-heap entry keyed on a float.
#[derive(Clone, Copy)]
pub(crate) struct HeapItem {
    pub key: f64,
    pub vertex: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap pops the smallest key first; ties by vertex index
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl LipMesh {
    pub fn build(mesh: &Mesh) -> Self {
        let vertices = mesh.centroids();
        let is_boundary = mesh.is_boundary_facet();
        let mut owners: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (e, t) in mesh.triangles().iter().enumerate() {
            for k in 0..3 {
                owners.entry(edge_key(t[k], t[(k + 1) % 3])).or_default().push(e);
            }
        }
        let mut edges = Vec::new();
        for ((a, b), tris) in owners {
            if tris.len() == 2 && !is_boundary(a, b) {
                let (i, j) = (tris[0].min(tris[1]), tris[0].max(tris[1]));
                edges.push([i, j]);
            }
        }
        edges.sort_unstable();
        Self::from_edges(vertices, edges)
    }

    /// Builds a graph from explicit vertices and edges; lengths are the
    /// Euclidean distances between vertices.
    pub fn from_edges(vertices: Vec<Point>, edges: Vec<[usize; 2]>) -> Self {
        let edge_length = edges
            .iter()
            .map(|&[i, j]| {
                let (a, b) = (vertices[i], vertices[j]);
                (a[0] - b[0]).hypot(a[1] - b[1])
            })
            .collect();
        Self::with_lengths(vertices, edges, edge_length)
    }

    /// Builds a graph with prescribed edge lengths (used for abstract test graphs).
    pub fn with_lengths(vertices: Vec<Point>, edges: Vec<[usize; 2]>, edge_length: Vec<f64>) -> Self {
        assert_eq!(edges.len(), edge_length.len());
        let n = vertices.len();
        let mut degree = vec![0usize; n + 1];
        for &[i, j] in &edges {
            degree[i + 1] += 1;
            degree[j + 1] += 1;
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let offsets = degree;
        let mut fill = offsets.clone();
        let mut adjacency = vec![(0, 0); 2 * edges.len()];
        for (k, &[i, j]) in edges.iter().enumerate() {
            adjacency[fill[i]] = (j, k);
            fill[i] += 1;
            adjacency[fill[j]] = (i, k);
            fill[j] += 1;
        }
        Self {
            vertices,
            edges,
            edge_length,
            offsets,
            adjacency,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_lengths(&self) -> &[f64] {
        &self.edge_length
    }

    /// Neighbors of `v` with the connecting edge length.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adjacency[self.offsets[v]..self.offsets[v + 1]]
            .iter()
            .map(move |&(j, k)| (j, self.edge_length[k]))
    }

    /// Multi-source shortest-path distance along lip-mesh edges.
    /// Unreachable vertices get `f64::INFINITY`.
    pub fn graph_distance(&self, sources: &[usize]) -> Result<Vec<f64>, MeshError> {
        if sources.is_empty() {
            return Err(MeshError::EmptySourceSet);
        }
        let n = self.num_vertices();
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            if s >= n {
                return Err(MeshError::SourceOutOfRange { vertex: s, count: n });
            }
            dist[s] = 0.0;
            heap.push(HeapItem { key: 0.0, vertex: s });
        }
        while let Some(HeapItem { key, vertex }) = heap.pop() {
            if key > dist[vertex] {
                continue;
            }
            for (j, len) in self.neighbors(vertex) {
                let cand = key + len;
                if cand < dist[j] {
                    dist[j] = cand;
                    heap.push(HeapItem { key: cand, vertex: j });
                }
            }
        }
        Ok(dist)
    }
}
