//! Linear triangle meshes, boundary tags and the centroid dual graph ("lip-mesh")
//! that carries the damage field and its Lipschitz constraints.

mod io;
mod lipmesh;
pub mod structured;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;

pub use io::{load_mesh, load_mesh_with_tags, parse_msh_v2, parse_native, write_native, MeshFormat};
pub use lipmesh::LipMesh;
pub(crate) use lipmesh::HeapItem;

/// A 2D point in meters.
pub type Point = [f64; 2];

#[derive(thiserror::Error, Debug)]
pub enum MeshError {
    #[error("cannot read mesh file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("element {element} is degenerate (area {area:e})")]
    Degenerate { element: usize, area: f64 },
    #[error("element {element} references node {node}, but the mesh has {count} nodes")]
    NodeOutOfRange {
        element: usize,
        node: usize,
        count: usize,
    },
    #[error("boundary facet {facet} ({a}, {b}) belongs to {owners} triangles, expected exactly one")]
    FacetNotOnBoundary {
        facet: usize,
        a: usize,
        b: usize,
        owners: usize,
    },
    #[error("mesh has no triangles")]
    Empty,
    #[error("graph distance needs at least one source vertex")]
    EmptySourceSet,
    #[error("source vertex {vertex} out of range ({count} vertices)")]
    SourceOutOfRange { vertex: usize, count: usize },
}

/// A boundary edge carrying a string tag (e.g. `crack`, `symmetry`, `load`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub nodes: [usize; 2],
    pub tag: String,
}

/// Validated triangle mesh. Triangles are stored counter-clockwise; per-element
/// areas and shortest edge lengths are precomputed.
#[derive(Clone, Debug)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    facets: Vec<BoundaryFacet>,
    areas: Vec<f64>,
    min_edges: Vec<f64>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds a mesh from raw arrays: drops nodes no triangle references,
    /// reorients clockwise triangles and checks every invariant.
    pub fn new(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        facets: Vec<BoundaryFacet>,
    ) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        let count = nodes.len();
        for (element, tri) in triangles.iter().enumerate() {
            for &node in tri {
                if node >= count {
                    return Err(MeshError::NodeOutOfRange {
                        element,
                        node,
                        count,
                    });
                }
            }
        }
        for (facet, f) in facets.iter().enumerate() {
            for &node in &f.nodes {
                if node >= count {
                    return Err(MeshError::NodeOutOfRange {
                        element: facet,
                        node,
                        count,
                    });
                }
            }
        }

        // compact numbering, keeping the original relative order
        let mut used = vec![false; count];
        for tri in &triangles {
            for &n in tri {
                used[n] = true;
            }
        }
        let mut new_index = vec![usize::MAX; count];
        let mut compact = Vec::with_capacity(count);
        for (i, p) in nodes.into_iter().enumerate() {
            if used[i] {
                new_index[i] = compact.len();
                compact.push(p);
            }
        }
        let nodes = compact;

        let mut tris = Vec::with_capacity(triangles.len());
        let mut areas = Vec::with_capacity(triangles.len());
        let mut min_edges = Vec::with_capacity(triangles.len());
        for (element, tri) in triangles.iter().enumerate() {
            let mut t = [new_index[tri[0]], new_index[tri[1]], new_index[tri[2]]];
            let mut area = signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
            if area < 0.0 {
                t.swap(1, 2);
                area = -area;
            }
            let scale = (0..3)
                .map(|k| dist(nodes[t[k]], nodes[t[(k + 1) % 3]]))
                .fold(0.0_f64, f64::max);
            if !(area > 1e-14 * scale * scale) {
                return Err(MeshError::Degenerate { element, area });
            }
            let min_edge = (0..3)
                .map(|k| dist(nodes[t[k]], nodes[t[(k + 1) % 3]]))
                .fold(f64::INFINITY, f64::min);
            tris.push(t);
            areas.push(area);
            min_edges.push(min_edge);
        }

        let mut owners: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &tris {
            for k in 0..3 {
                *owners.entry(edge_key(t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        let mut out_facets = Vec::with_capacity(facets.len());
        for (facet, f) in facets.into_iter().enumerate() {
            let a = new_index[f.nodes[0]];
            let b = new_index[f.nodes[1]];
            let n = if a == usize::MAX || b == usize::MAX {
                0
            } else {
                owners.get(&edge_key(a, b)).copied().unwrap_or(0)
            };
            if n != 1 {
                return Err(MeshError::FacetNotOnBoundary {
                    facet,
                    a: f.nodes[0],
                    b: f.nodes[1],
                    owners: n,
                });
            }
            out_facets.push(BoundaryFacet {
                nodes: [a, b],
                tag: f.tag,
            });
        }

        Ok(Self {
            nodes,
            triangles: tris,
            facets: out_facets,
            areas,
            min_edges,
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.facets
    }

    pub fn element_areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn element_min_edges(&self) -> &[f64] {
        &self.min_edges
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn centroid(&self, element: usize) -> Point {
        let t = self.triangles[element];
        let (a, b, c) = (self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn centroids(&self) -> Vec<Point> {
        (0..self.num_elements()).map(|e| self.centroid(e)).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Size of the smallest element, measured as its shortest edge.
    pub fn min_element_size(&self) -> f64 {
        self.min_edges.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn facet_length(&self, facet: &BoundaryFacet) -> f64 {
        dist(self.nodes[facet.nodes[0]], self.nodes[facet.nodes[1]])
    }

    pub fn facets_with_tag<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a BoundaryFacet> + 'a {
        self.facets.iter().filter(move |f| f.tag == tag)
    }

    /// Sorted, deduplicated nodes touched by facets carrying `tag`.
    pub fn nodes_with_tag(&self, tag: &str) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .facets_with_tag(tag)
            .flat_map(|f| f.nodes.iter().copied())
            .collect();
        set.into_iter().collect()
    }

    /// Facet count per tag, in tag order.
    pub fn tag_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for f in &self.facets {
            *counts.entry(f.tag.clone()).or_insert(0) += 1;
        }
        counts
    }

    pub(crate) fn is_boundary_facet(&self) -> impl Fn(usize, usize) -> bool + '_ {
        let set: BTreeSet<(usize, usize)> = self
            .facets
            .iter()
            .map(|f| edge_key(f.nodes[0], f.nodes[1]))
            .collect();
        move |a, b| set.contains(&edge_key(a, b))
    }
}
