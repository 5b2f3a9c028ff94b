//! Structured rectangle triangulations, used as fixtures by tests and benches.
//! Production meshes are expected to come from a mesh generator.

use std::collections::HashMap;

use super::{edge_key, BoundaryFacet, Mesh, MeshError, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Diagonal {
    /// Every cell split along the same diagonal.
    Uniform,
    /// Diagonal direction alternates in a checkerboard.
    Alternating,
    /// Four triangles per cell around a center node.
    Crossed,
}

/// A horizontal cut along a grid line, meshed with duplicated nodes.
/// The node at `x_end` stays shared (it is the crack tip) unless it lies on the
/// domain boundary.
#[derive(Clone, Debug)]
pub struct Slit {
    pub y: f64,
    pub x_start: f64,
    pub x_end: f64,
    pub tag: String,
}

#[derive(Clone, Debug)]
pub struct RectGrid {
    pub origin: Point,
    pub width: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub diagonal: Diagonal,
}

impl RectGrid {
    pub fn new(origin: Point, width: f64, height: f64, nx: usize, ny: usize) -> Self {
        Self {
            origin,
            width,
            height,
            nx,
            ny,
            diagonal: Diagonal::Alternating,
        }
    }

    pub fn diagonal(mut self, diagonal: Diagonal) -> Self {
        self.diagonal = diagonal;
        self
    }

    fn raw(&self) -> (Vec<Point>, Vec<[usize; 3]>) {
        let (nx, ny) = (self.nx, self.ny);
        let hx = self.width / nx as f64;
        let hy = self.height / ny as f64;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([self.origin[0] + i as f64 * hx, self.origin[1] + j as f64 * hy]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut tris = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                match self.diagonal {
                    Diagonal::Uniform => {
                        tris.push([a, b, c]);
                        tris.push([a, c, d]);
                    }
                    Diagonal::Alternating => {
                        if (i + j) % 2 == 0 {
                            tris.push([a, b, c]);
                            tris.push([a, c, d]);
                        } else {
                            tris.push([a, b, d]);
                            tris.push([b, c, d]);
                        }
                    }
                    Diagonal::Crossed => {
                        let m = nodes.len();
                        nodes.push([
                            self.origin[0] + (i as f64 + 0.5) * hx,
                            self.origin[1] + (j as f64 + 0.5) * hy,
                        ]);
                        tris.push([a, b, m]);
                        tris.push([b, c, m]);
                        tris.push([c, d, m]);
                        tris.push([d, a, m]);
                    }
                }
            }
        }
        (nodes, tris)
    }

    /// Builds the mesh; `tag` is asked for every exterior boundary facet and
    /// may return `None` to leave it untagged (traction free).
    pub fn build(&self, tag: impl Fn(Point, Point) -> Option<String>) -> Result<Mesh, MeshError> {
        self.build_impl(None, tag)
    }

    pub fn build_with_slit(
        &self,
        slit: &Slit,
        tag: impl Fn(Point, Point) -> Option<String>,
    ) -> Result<Mesh, MeshError> {
        self.build_impl(Some(slit), tag)
    }

    fn build_impl(
        &self,
        slit: Option<&Slit>,
        tag: impl Fn(Point, Point) -> Option<String>,
    ) -> Result<Mesh, MeshError> {
        let (mut nodes, mut tris) = self.raw();
        let tol = 1e-9 * self.width.max(self.height);
        let mut slit_faces: Vec<[usize; 2]> = Vec::new();

        if let Some(s) = slit {
            let x_max = self.origin[0] + self.width;
            let on_cut = |p: Point| {
                (p[1] - s.y).abs() < tol && p[0] > s.x_start - tol && p[0] < s.x_end + tol
            };
            let splits = |p: Point| on_cut(p) && (p[0] < s.x_end - tol || (x_max - p[0]).abs() < tol);
            let mut copy: HashMap<usize, usize> = HashMap::new();
            for t in tris.iter_mut() {
                let cy = (nodes[t[0]][1] + nodes[t[1]][1] + nodes[t[2]][1]) / 3.0;
                if cy <= s.y {
                    continue;
                }
                for v in t.iter_mut() {
                    if splits(nodes[*v]) {
                        let new = *copy.entry(*v).or_insert_with(|| {
                            nodes.push(nodes[*v]);
                            nodes.len() - 1
                        });
                        *v = new;
                    }
                }
            }
            for t in &tris {
                for k in 0..3 {
                    let (a, b) = (t[k], t[(k + 1) % 3]);
                    if on_cut(nodes[a]) && on_cut(nodes[b]) {
                        slit_faces.push([a, b]);
                    }
                }
            }
        }

        let mut owners: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &tris {
            for k in 0..3 {
                *owners.entry(edge_key(t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        let slit_set: std::collections::HashSet<(usize, usize)> =
            slit_faces.iter().map(|f| edge_key(f[0], f[1])).collect();

        let mut facets = Vec::new();
        for t in &tris {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = edge_key(a, b);
                if owners[&key] != 1 {
                    continue;
                }
                let label = if slit_set.contains(&key) {
                    slit.map(|s| s.tag.clone())
                } else {
                    tag(nodes[a], nodes[b])
                };
                if let Some(tag) = label {
                    facets.push(BoundaryFacet { nodes: [a, b], tag });
                }
            }
        }
        Mesh::new(nodes, tris, facets)
    }
}
