use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BoundaryFacet, Mesh, MeshError, Point};

/// On-disk mesh formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshFormat {
    /// Gmsh ASCII 2.x: `$Nodes` / `$Elements`, element types 1 (line) and 2 (triangle).
    MshAsciiV2,
    /// `lipfrac-mesh 1` whitespace-separated text with 0-based indices.
    NativeText,
}

impl MeshFormat {
    /// Guess from the file extension (`.msh` or anything else).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("msh") => MeshFormat::MshAsciiV2,
            _ => MeshFormat::NativeText,
        }
    }
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<Mesh, MeshError> {
    load_mesh_with_tags(path, format, &BTreeMap::new())
}

/// Like [`load_mesh`]; `tag_names` maps Gmsh physical tags to facet tag names
/// and takes precedence over a `$PhysicalNames` block.
pub fn load_mesh_with_tags(
    path: impl AsRef<Path>,
    format: MeshFormat,
    tag_names: &BTreeMap<i64, String>,
) -> Result<Mesh, MeshError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match format {
        MeshFormat::NativeText => parse_native(&text),
        MeshFormat::MshAsciiV2 => parse_msh_v2(&text, tag_names),
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    /// Next non-blank line, with its 1-based number.
    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), MeshError> {
        let last = self.last;
        self.next_content().ok_or_else(|| MeshError::Parse {
            line: last + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn field<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, MeshError> {
    let tok = tok.ok_or_else(|| MeshError::Parse {
        line,
        msg: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| MeshError::Parse {
        line,
        msg: format!("invalid {what} `{tok}`"),
    })
}

fn counted_header(lines: &mut Lines, keyword: &str) -> Result<usize, MeshError> {
    let (ln, line) = lines.expect(keyword)?;
    let mut toks = line.split_whitespace();
    if toks.next() != Some(keyword) {
        return Err(MeshError::Parse {
            line: ln,
            msg: format!("expected `{keyword} <count>`"),
        });
    }
    field(toks.next(), ln, "count")
}

/// Parses the native text format.
pub fn parse_native(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = Lines::new(text);
    let (ln, header) = lines.expect("header")?;
    if header.split_whitespace().collect::<Vec<_>>() != ["lipfrac-mesh", "1"] {
        return Err(MeshError::Parse {
            line: ln,
            msg: "expected header `lipfrac-mesh 1`".into(),
        });
    }

    let n = counted_header(&mut lines, "nodes")?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, line) = lines.expect("node coordinates")?;
        let mut t = line.split_whitespace();
        let x: f64 = field(t.next(), ln, "x coordinate")?;
        let y: f64 = field(t.next(), ln, "y coordinate")?;
        nodes.push([x, y]);
    }

    let m = counted_header(&mut lines, "triangles")?;
    let mut triangles = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, line) = lines.expect("triangle")?;
        let mut t = line.split_whitespace();
        let tri = [
            field(t.next(), ln, "node index")?,
            field(t.next(), ln, "node index")?,
            field(t.next(), ln, "node index")?,
        ];
        triangles.push(tri);
    }

    let k = counted_header(&mut lines, "facets")?;
    let mut facets = Vec::with_capacity(k);
    for _ in 0..k {
        let (ln, line) = lines.expect("facet")?;
        let mut t = line.split_whitespace();
        let a = field(t.next(), ln, "node index")?;
        let b = field(t.next(), ln, "node index")?;
        let tag: String = field(t.next(), ln, "tag")?;
        facets.push(BoundaryFacet { nodes: [a, b], tag });
    }
    Mesh::new(nodes, triangles, facets)
}

/// Writes `mesh` in the native text format.
pub fn write_native(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "lipfrac-mesh 1");
    let _ = writeln!(s, "nodes {}", mesh.num_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(s, "{} {}", p[0], p[1]);
    }
    let _ = writeln!(s, "triangles {}", mesh.num_elements());
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "facets {}", mesh.boundary_facets().len());
    for f in mesh.boundary_facets() {
        let _ = writeln!(s, "{} {} {}", f.nodes[0], f.nodes[1], f.tag);
    }
    s
}

fn expect_end(lines: &mut Lines, end: &str) -> Result<(), MeshError> {
    let (ln, line) = lines.expect(end)?;
    if line != end {
        return Err(MeshError::Parse {
            line: ln,
            msg: format!("expected `{end}`"),
        });
    }
    Ok(())
}

/// Parses the ASCII subset of Gmsh MSH 2.x.
///
/// Point elements (type 15) are skipped; any other element type is an error.
/// Lines without a physical tag are ignored.
pub fn parse_msh_v2(text: &str, tag_names: &BTreeMap<i64, String>) -> Result<Mesh, MeshError> {
    let mut lines = Lines::new(text);
    let mut physical_names: HashMap<i64, String> = HashMap::new();
    let mut node_ids: HashMap<i64, usize> = HashMap::new();
    let mut nodes: Vec<Point> = Vec::new();
    let mut triangles = Vec::new();
    let mut raw_facets: Vec<([i64; 2], i64, usize)> = Vec::new();
    let mut seen_format = false;

    while let Some((ln, line)) = lines.next_content() {
        match line {
            "$MeshFormat" => {
                let (ln, l) = lines.expect("format line")?;
                let version: f64 = field(l.split_whitespace().next(), ln, "version")?;
                let file_type: i64 = field(l.split_whitespace().nth(1), ln, "file type")?;
                if !(2.0..3.0).contains(&version) || file_type != 0 {
                    return Err(MeshError::Parse {
                        line: ln,
                        msg: format!("only ASCII MSH 2.x is supported (got {version} type {file_type})"),
                    });
                }
                expect_end(&mut lines, "$EndMeshFormat")?;
                seen_format = true;
            }
            "$PhysicalNames" => {
                let (ln, l) = lines.expect("count")?;
                let n: usize = field(Some(l), ln, "count")?;
                for _ in 0..n {
                    let (ln, l) = lines.expect("physical name")?;
                    let mut t = l.splitn(3, char::is_whitespace);
                    let _dim: i64 = field(t.next(), ln, "dimension")?;
                    let tag: i64 = field(t.next(), ln, "physical tag")?;
                    let name: String = field(t.next(), ln, "name")?;
                    physical_names.insert(tag, name.trim().trim_matches('"').to_string());
                }
                expect_end(&mut lines, "$EndPhysicalNames")?;
            }
            "$Nodes" => {
                let (ln, l) = lines.expect("count")?;
                let n: usize = field(Some(l), ln, "count")?;
                for _ in 0..n {
                    let (ln, l) = lines.expect("node")?;
                    let mut t = l.split_whitespace();
                    let id: i64 = field(t.next(), ln, "node id")?;
                    let x: f64 = field(t.next(), ln, "x coordinate")?;
                    let y: f64 = field(t.next(), ln, "y coordinate")?;
                    if node_ids.insert(id, nodes.len()).is_some() {
                        return Err(MeshError::Parse {
                            line: ln,
                            msg: format!("duplicate node id {id}"),
                        });
                    }
                    nodes.push([x, y]);
                }
                expect_end(&mut lines, "$EndNodes")?;
            }
            "$Elements" => {
                let (ln, l) = lines.expect("count")?;
                let n: usize = field(Some(l), ln, "count")?;
                for _ in 0..n {
                    let (ln, l) = lines.expect("element")?;
                    let toks: Vec<&str> = l.split_whitespace().collect();
                    let mut t = toks.iter().copied();
                    let _id: i64 = field(t.next(), ln, "element id")?;
                    let kind: i64 = field(t.next(), ln, "element type")?;
                    let ntags: usize = field(t.next(), ln, "tag count")?;
                    let mut tags = Vec::with_capacity(ntags);
                    for _ in 0..ntags {
                        tags.push(field::<i64>(t.next(), ln, "tag")?);
                    }
                    let node = |t: &mut dyn Iterator<Item = &str>| -> Result<usize, MeshError> {
                        let id: i64 = field(t.next(), ln, "node id")?;
                        node_ids.get(&id).copied().ok_or_else(|| MeshError::Parse {
                            line: ln,
                            msg: format!("unknown node id {id}"),
                        })
                    };
                    match kind {
                        2 => {
                            let tri = [node(&mut t)?, node(&mut t)?, node(&mut t)?];
                            triangles.push(tri);
                        }
                        1 => {
                            let a = field::<i64>(t.next(), ln, "node id")?;
                            let b = field::<i64>(t.next(), ln, "node id")?;
                            if let Some(&phys) = tags.first() {
                                if phys != 0 {
                                    raw_facets.push(([a, b], phys, ln));
                                }
                            }
                        }
                        15 => {}
                        other => {
                            return Err(MeshError::Parse {
                                line: ln,
                                msg: format!(
                                    "unsupported element type {other} (only 1: line, 2: triangle)"
                                ),
                            })
                        }
                    }
                }
                expect_end(&mut lines, "$EndElements")?;
            }
            other if other.starts_with('$') => {
                // skip unknown sections
                let end = format!("$End{}", &other[1..]);
                loop {
                    let (_, l) = lines.expect(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            _ => {
                return Err(MeshError::Parse {
                    line: ln,
                    msg: format!("unexpected content `{line}`"),
                })
            }
        }
    }
    if !seen_format {
        return Err(MeshError::Parse {
            line: 1,
            msg: "missing $MeshFormat section".into(),
        });
    }

    let mut facets = Vec::with_capacity(raw_facets.len());
    for ([a, b], phys, ln) in raw_facets {
        let lookup = |id: i64| {
            node_ids.get(&id).copied().ok_or_else(|| MeshError::Parse {
                line: ln,
                msg: format!("unknown node id {id}"),
            })
        };
        let tag = tag_names
            .get(&phys)
            .or_else(|| physical_names.get(&phys))
            .cloned()
            .unwrap_or_else(|| phys.to_string());
        facets.push(BoundaryFacet {
            nodes: [lookup(a)?, lookup(b)?],
            tag,
        });
    }
    Mesh::new(nodes, triangles, facets)
}
