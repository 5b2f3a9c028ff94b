use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::mesh::Mesh;

#[derive(thiserror::Error, Debug)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot serialize summary: {0}")]
    Json(#[from] serde_json::Error),
    #[error("field '{name}' has {got} values, expected {expected}")]
    FieldLength { name: String, expected: usize, got: usize },
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), OutputError> {
    let io = |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

/// Fields of one VTK snapshot.
pub struct Snapshot<'a> {
    pub step: usize,
    pub t: f64,
    /// Interleaved nodal displacement.
    pub u: &'a [f64],
    /// Interleaved nodal velocity.
    pub v: &'a [f64],
    pub d: &'a [f64],
    pub e_plus: &'a [f64],
    /// Hydrostatic stress `tr sigma / 2` (in-plane trace).
    pub hydrostatic: &'a [f64],
}

fn check(name: &str, expected: usize, got: usize) -> Result<(), OutputError> {
    if expected == got {
        Ok(())
    } else {
        Err(OutputError::FieldLength {
            name: name.into(),
            expected,
            got,
        })
    }
}

/// Legacy ASCII VTK unstructured grid (triangles, cell type 5).
pub fn vtk_string(mesh: &Mesh, s: &Snapshot) -> Result<String, OutputError> {
    let (nn, ne) = (mesh.num_nodes(), mesh.num_elements());
    check("u", 2 * nn, s.u.len())?;
    check("v", 2 * nn, s.v.len())?;
    check("d", ne, s.d.len())?;
    check("e_plus", ne, s.e_plus.len())?;
    check("hydrostatic", ne, s.hydrostatic.len())?;

    let mut out = String::with_capacity(64 * (nn + ne));
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "lipfrac step {} t {:e}", s.step, s.t);
    let _ = writeln!(out, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {nn} double");
    for p in mesh.nodes() {
        let _ = writeln!(out, "{:e} {:e} 0", p[0], p[1]);
    }
    let _ = writeln!(out, "CELLS {ne} {}", 4 * ne);
    for t in mesh.triangles() {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {ne}");
    for _ in 0..ne {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "POINT_DATA {nn}");
    for (name, f) in [("displacement", s.u), ("velocity", s.v)] {
        let _ = writeln!(out, "VECTORS {name} double");
        for c in f.chunks_exact(2) {
            let _ = writeln!(out, "{:e} {:e} 0", c[0], c[1]);
        }
    }
    let _ = writeln!(out, "CELL_DATA {ne}");
    for (name, f) in [("damage", s.d), ("e_plus", s.e_plus), ("hydrostatic_stress", s.hydrostatic)] {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for x in f {
            let _ = writeln!(out, "{x:e}");
        }
    }
    Ok(out)
}

pub fn write_vtk(path: &Path, mesh: &Mesh, s: &Snapshot) -> Result<(), OutputError> {
    write_atomic(path, vtk_string(mesh, s)?.as_bytes())
}

/// One row of the time series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub dissipated: f64,
    pub external_work: f64,
    pub crack_length: f64,
    pub tip_speed_over_cr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
}

impl StepRecord {
    /// `E_kin + E_p + E_d - W_ext`.
    pub fn balance(&self) -> f64 {
        self.kinetic + self.potential + self.dissipated - self.external_work
    }
}

pub const CSV_HEADER: &str = "t,E_kin,E_p,E_d,W_ext,a,v_tip_over_cR";

pub fn csv_string(records: &[StepRecord]) -> String {
    let mut out = String::with_capacity(CSV_HEADER.len() + 1 + 128 * records.len());
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.t, r.kinetic, r.potential, r.dissipated, r.external_work, r.crack_length, r.tip_speed_over_cr
        );
    }
    out
}

/// Where a run writes its files.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputWriter {
    pub dir: PathBuf,
    pub every: usize,
    pub vtk: bool,
}

impl OutputWriter {
    pub fn vtk_path(&self, step: usize) -> PathBuf {
        self.dir.join(format!("step_{step:07}.vtk"))
    }

    pub fn csv_path(&self) -> PathBuf {
        self.dir.join("timeseries.csv")
    }

    pub fn summary_path(&self) -> PathBuf {
        self.dir.join("summary.json")
    }

    pub fn write_csv(&self, records: &[StepRecord]) -> Result<(), OutputError> {
        write_atomic(&self.csv_path(), csv_string(records).as_bytes())
    }

    pub fn write_summary<T: Serialize>(&self, summary: &T) -> Result<(), OutputError> {
        let mut text = serde_json::to_string_pretty(summary)?;
        text.push('\n');
        write_atomic(&self.summary_path(), text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured::RectGrid;

    #[test]
    fn vtk_layout() {
        let m = RectGrid::new([0.0, 0.0], 1.0, 1.0, 1, 1).build(|_, _| None).unwrap();
        let u = vec![1e-7; 8];
        let d = vec![0.5, 1.0];
        let s = Snapshot {
            step: 3,
            t: 2.5e-6,
            u: &u,
            v: &u,
            d: &d,
            e_plus: &d,
            hydrostatic: &d,
        };
        let text = vtk_string(&m, &s).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains("POINTS 4 double\n"));
        assert!(text.contains("CELLS 2 8\n"));
        assert!(text.contains("CELL_TYPES 2\n5\n5\n"));
        assert!(text.contains("SCALARS damage double 1\nLOOKUP_TABLE default\n5e-1\n1e0\n"));
        let bad = Snapshot { d: &d[..1], ..s };
        assert!(matches!(vtk_string(&m, &bad), Err(OutputError::FieldLength { .. })));
    }

    #[test]
    fn csv_round_trips_values() {
        let r = StepRecord {
            step: 1,
            t: 1e-7,
            kinetic: 0.1 + 0.2,
            potential: 1.0 / 3.0,
            dissipated: 0.0,
            external_work: 2.0,
            crack_length: 1e-3,
            tip_speed_over_cr: 0.25,
            a1: None,
            a2: None,
        };
        let text = csv_string(&[r]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let vals: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(vals, vec![r.t, r.kinetic, r.potential, 0.0, 2.0, 1e-3, 0.25]);
        assert!((r.balance() - (0.3 + 1.0 / 3.0 - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        let names: Vec<_> = std::fs::read_dir(p.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }
}
