use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constitutive::MaterialParams;
use crate::damage::SolverOptions;
use crate::dynamics::{BcKind, BoundaryCondition, Component, Profile, Selector, StepRule};
use crate::mesh::MeshFormat;

#[derive(thiserror::Error, Debug)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    /// Relative paths are resolved against the config file's directory.
    pub path: PathBuf,
    #[serde(default)]
    pub format: Option<MeshFormat>,
    /// Physical tag number -> facet tag name (MSH input).
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    #[serde(rename = "E")]
    pub youngs_modulus: f64,
    pub nu: f64,
    pub rho: f64,
    #[serde(rename = "Yc", default, skip_serializing_if = "Option::is_none")]
    pub yc: Option<f64>,
    #[serde(rename = "Gc", default, skip_serializing_if = "Option::is_none")]
    pub gc: Option<f64>,
    pub l: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub cfl_factor: f64,
    #[serde(rename = "T_end", default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(default)]
    pub step_rule: StepRule,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    #[default]
    Constant,
    Ramp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<usize>>,
    pub kind: BcKind,
    pub component: Component,
    pub value: f64,
    #[serde(default)]
    pub profile: ProfileKind,
    /// Ramp rise time (s); defaults to 1 µs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rise: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_every")]
    pub every: usize,
    #[serde(default = "default_true")]
    pub vtk: bool,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}
fn default_every() -> usize {
    100
}
fn default_true() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_output_dir(),
            every: default_every(),
            vtk: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub kkt_tol: f64,
    pub gap_tol: f64,
    pub local_tol: f64,
    pub max_iter: usize,
    /// Keep the damage at its initial value (elastic runs).
    pub freeze_damage: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            kkt_tol: o.kkt_tol,
            gap_tol: o.gap_tol,
            local_tol: o.local_tol,
            max_iter: o.max_iter,
            freeze_damage: false,
        }
    }
}

impl SolverSection {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            kkt_tol: self.kkt_tol,
            gap_tol: self.gap_tol,
            local_tol: self.local_tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrackMode {
    #[default]
    Single,
    SymmetricBranching,
}

/// Axis-aligned rectangle `[x_min, y_min, x_max, y_max]` (m).
pub type Rect = [f64; 4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostprocSection {
    #[serde(default)]
    pub mode: CrackMode,
    #[serde(default = "default_d_thresh")]
    pub d_thresh: f64,
    /// Crack lengths are doubled when only half of a symmetric specimen is meshed.
    #[serde(default)]
    pub half_model: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notch_tip: Option<[f64; 2]>,
    /// `y` of a symmetry plane (half models); mirrored branches count in branch detection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetry_line: Option<f64>,
    #[serde(rename = "D1", default, skip_serializing_if = "Option::is_none")]
    pub d1: Option<Rect>,
    #[serde(rename = "D2", default, skip_serializing_if = "Option::is_none")]
    pub d2: Option<Rect>,
    /// Minimum number of damaged elements for a branch to count.
    #[serde(default = "default_branch_min")]
    pub branch_min_elements: usize,
    /// Annulus `[r_in, r_out]` around the notch tip used for the crack angle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_annulus: Option<[f64; 2]>,
}

fn default_d_thresh() -> f64 {
    0.95
}
fn default_branch_min() -> usize {
    3
}

impl Default for PostprocSection {
    fn default() -> Self {
        Self {
            mode: CrackMode::Single,
            d_thresh: default_d_thresh(),
            half_model: false,
            notch_tip: None,
            symmetry_line: None,
            d1: None,
            d2: None,
            branch_min_elements: default_branch_min(),
            angle_annulus: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub mesh: MeshSection,
    pub material: MaterialSection,
    pub time: TimeSection,
    #[serde(default)]
    pub bc: BTreeMap<String, BcSection>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub postproc: PostprocSection,
    /// Directory relative paths are resolved against (not part of the file).
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl SimulationConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimulationConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn mesh_path(&self) -> PathBuf {
        self.resolve(&self.mesh.path)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    pub fn mesh_format(&self) -> Result<MeshFormat, ConfigError> {
        Ok(self.mesh.format.unwrap_or_else(|| MeshFormat::from_path(&self.mesh.path)))
    }

    pub fn physical_names(&self) -> Result<BTreeMap<i64, String>, ConfigError> {
        self.mesh
            .tags
            .iter()
            .map(|(k, v)| {
                k.trim()
                    .parse::<i64>()
                    .map(|id| (id, v.clone()))
                    .map_err(|_| invalid(format!("mesh.tags key '{k}' is not an integer")))
            })
            .collect()
    }

    pub fn material_params(&self) -> Result<MaterialParams, ConfigError> {
        let m = &self.material;
        let r = match (m.yc, m.gc) {
            (Some(yc), None) => MaterialParams::new(m.youngs_modulus, m.nu, m.rho, yc, m.l),
            (None, Some(gc)) => MaterialParams::from_fracture_energy(m.youngs_modulus, m.nu, m.rho, gc, m.l),
            _ => return Err(invalid("material: give exactly one of Yc and Gc")),
        };
        r.map_err(|e| invalid(format!("material: {e}")))
    }

    /// Boundary conditions ordered by their numeric section key.
    pub fn boundary_conditions(&self) -> Result<Vec<BoundaryCondition>, ConfigError> {
        let mut keyed: Vec<(&String, &BcSection)> = self.bc.iter().collect();
        keyed.sort_by(|a, b| match (a.0.parse::<i64>(), b.0.parse::<i64>()) {
            (Ok(x), Ok(y)) => x.cmp(&y),
            _ => a.0.cmp(b.0),
        });
        keyed
            .into_iter()
            .map(|(key, bc)| {
                let selector = match (&bc.tag, &bc.nodes) {
                    (Some(t), None) => Selector::Tag(t.clone()),
                    (None, Some(n)) => Selector::Nodes(n.clone()),
                    _ => return Err(invalid(format!("bc.{key}: give exactly one of tag and nodes"))),
                };
                let profile = match bc.profile {
                    ProfileKind::Constant => Profile::Constant,
                    ProfileKind::Ramp => Profile::Ramp { rise: bc.rise.unwrap_or(1e-6) },
                };
                Ok(BoundaryCondition {
                    selector,
                    kind: bc.kind,
                    component: bc.component,
                    value: bc.value,
                    profile,
                })
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.material_params()?;
        self.boundary_conditions()?;
        self.physical_names()?;
        let t = &self.time;
        if !(t.cfl_factor > 0.0 && t.cfl_factor < 1.0) {
            return Err(invalid(format!("time.cfl_factor must lie in (0, 1), got {}", t.cfl_factor)));
        }
        match (t.t_end, t.n_steps) {
            (Some(te), None) if te >= 0.0 && te.is_finite() => {}
            (None, Some(_)) => {}
            (Some(te), None) => return Err(invalid(format!("time.T_end must be non-negative, got {te}"))),
            _ => return Err(invalid("time: give exactly one of T_end and n_steps")),
        }
        if self.output.every == 0 {
            return Err(invalid("output.every must be at least 1"));
        }
        self.solver.options().validate().map_err(|e| invalid(format!("solver: {e}")))?;
        let p = &self.postproc;
        if !(p.d_thresh > 0.0 && p.d_thresh < 1.0) {
            return Err(invalid(format!("postproc.d_thresh must lie in (0, 1), got {}", p.d_thresh)));
        }
        if p.mode == CrackMode::SymmetricBranching && p.notch_tip.is_none() {
            return Err(invalid("postproc: symmetric_branching needs notch_tip"));
        }
        for (name, r) in [("D1", p.d1), ("D2", p.d2)] {
            if let Some(r) = r {
                if !(r[0] < r[2] && r[1] < r[3]) {
                    return Err(invalid(format!("postproc.{name} must be [x_min, y_min, x_max, y_max]")));
                }
            }
        }
        if let Some([a, b]) = p.angle_annulus {
            if !(0.0 <= a && a < b) {
                return Err(invalid("postproc.angle_annulus must satisfy 0 <= r_in < r_out"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[mesh]
path = "m.msh"
[mesh.tags]
7 = "bottom"

[material]
E = 32e9
nu = 0.2
rho = 2450.0
Gc = 3.0
l = 1.25e-3

[time]
cfl_factor = 0.8
T_end = 1e-5

[bc.2]
tag = "symmetry"
kind = "displacement"
component = "y"
value = 0.0

[bc.10]
tag = "bottom"
kind = "traction"
component = "y"
value = -1e6

[bc.1]
nodes = [0, 1]
kind = "velocity"
component = "x"
value = 16.5
profile = "ramp"
rise = 2e-6
"#;

    #[test]
    fn parses_and_derives() {
        let c = SimulationConfig::from_toml_str(BASE).unwrap();
        let p = c.material_params().unwrap();
        assert!((p.critical_energy - 600.0).abs() < 1e-9);
        assert_eq!(c.mesh_format().unwrap(), MeshFormat::MshAsciiV2);
        assert_eq!(c.physical_names().unwrap().get(&7).unwrap(), "bottom");
        let bcs = c.boundary_conditions().unwrap();
        assert_eq!(bcs.len(), 3);
        assert_eq!(bcs[0].profile, Profile::Ramp { rise: 2e-6 });
        assert_eq!(bcs[1].selector, Selector::Tag("symmetry".into()));
        assert_eq!(bcs[2].kind, BcKind::Traction);
        assert_eq!(c.output.every, 100);
        assert_eq!(c.solver.options(), SolverOptions::default());
        assert_eq!(c.time.step_rule, StepRule::Stable);
    }

    #[test]
    fn rejects_both_yc_and_gc() {
        let text = BASE.replace("Gc = 3.0", "Gc = 3.0\nYc = 600.0");
        assert!(matches!(SimulationConfig::from_toml_str(&text), Err(ConfigError::Invalid(_))));
        let text = BASE.replace("Gc = 3.0", "");
        assert!(SimulationConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(SimulationConfig::from_toml_str(&BASE.replace("cfl_factor = 0.8", "cfl_factor = 1.2")).is_err());
        let text = format!("{BASE}\n[output]\nevery = 0\n");
        assert!(SimulationConfig::from_toml_str(&text).is_err());
        let text = format!("{BASE}\n[solver]\nkkt_tol = -1.0\n");
        assert!(SimulationConfig::from_toml_str(&text).is_err());
        let text = format!("{BASE}\n[solver]\nbogus = 1\n");
        assert!(matches!(SimulationConfig::from_toml_str(&text), Err(ConfigError::Parse(_))));
        assert!(SimulationConfig::from_toml_str(&BASE.replace("T_end = 1e-5", "")).is_err());
    }

    #[test]
    fn solver_and_postproc_sections() {
        let text = format!(
            "{BASE}\n[solver]\nkkt_tol = 1e-9\nfreeze_damage = true\n[postproc]\nmode = \"symmetric_branching\"\nnotch_tip = [0.05, 0.02]\nD1 = [0.0, 0.0, 1.0, 1.0]\n"
        );
        let c = SimulationConfig::from_toml_str(&text).unwrap();
        assert_eq!(c.solver.kkt_tol, 1e-9);
        assert!(c.solver.freeze_damage);
        assert_eq!(c.postproc.mode, CrackMode::SymmetricBranching);
        let bad = text.replace("notch_tip = [0.05, 0.02]\n", "");
        assert!(SimulationConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn relative_paths_follow_config_dir() {
        let mut c = SimulationConfig::from_toml_str(BASE).unwrap();
        c.base_dir = PathBuf::from("/data/run");
        assert_eq!(c.mesh_path(), PathBuf::from("/data/run/m.msh"));
        assert_eq!(c.output_dir(), PathBuf::from("/data/run/output"));
    }
}
