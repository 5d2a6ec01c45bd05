//! JSON scenario configuration.
//!
//! ```json
//! {"scenarios": [{
//!   "label": "left_tens",
//!   "mesh": {"phantom": {"head": {}}},
//!   "materials": {"Skin": 0.465},
//!   "electrodes": [
//!     {"name": "bridge", "role": "anode", "patch": "bridge_left", "current_mA": 2.0},
//!     {"name": "neck", "role": "cathode", "patch": "neck"}
//!   ],
//!   "solver": {"rel_tol": 1e-8, "max_iter": 100000, "preconditioner": "jacobi"},
//!   "report_regions": ["Nerve_left", "Nerve_right"],
//!   "outputs": {"vtk": "left.vtk", "csv": "left.csv", "json": "left.json", "cap": 0.4}
//! }]}
//! ```
//!
//! A mesh is either `{"nastran": "file.nas", "region_map": "names.json"}` or
//! `{"phantom": {"head": {...}} | {"slab": {...}}}`. Electrodes pick their
//! patch with `"box": {"min": [..], "max": [..]}` (mm) or `"patch": name`,
//! where the name is a phantom electrode site or, for NASTRAN meshes, a
//! region whose boundary faces form the patch. Relative paths resolve
//! against the configuration file's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::Aabb;
use crate::phantom::PhantomSpec;
use crate::solver::{Preconditioner, SolveSettings};

/// Drive current used when an anode does not state one.
pub const DEFAULT_CURRENT_MA: f64 = 2.0;
/// Rendering cap for `j_mag_capped`, A/m².
pub const DEFAULT_CAP: f64 = 0.4;

/// A configuration problem at a JSON pointer location.
#[derive(Clone, Debug, Error, PartialEq)]
#[error("{}: {message}", if pointer.is_empty() { "/" } else { pointer.as_str() })]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl ConfigError {
    pub(crate) fn at(pointer: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            pointer: pointer.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Anode,
    Cathode,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Anode => "anode",
            Role::Cathode => "cathode",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrodeSpec {
    pub name: String,
    pub role: Role,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<Aabb>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch: Option<String>,
    #[serde(
        rename = "current_mA",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub current_ma: Option<f64>,
}

impl ElectrodeSpec {
    /// Injected current in mA; zero for the cathode.
    pub fn current(&self) -> f64 {
        match self.role {
            Role::Anode => self.current_ma.unwrap_or(DEFAULT_CURRENT_MA),
            Role::Cathode => 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nastran: Option<PathBuf>,
    /// Sidecar `{"<pid>": "<name>"}` file for NASTRAN meshes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_map: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom: Option<PhantomSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rel_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_iter: None,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

impl SolverConfig {
    pub fn settings(&self) -> SolveSettings {
        SolveSettings {
            rel_tolerance: self.rel_tol,
            max_iterations: self.max_iter,
            preconditioner: self.preconditioner,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vtk: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    /// A/m².
    pub cap: f64,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            vtk: None,
            csv: None,
            json: None,
            cap: DEFAULT_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub label: String,
    pub mesh: MeshSource,
    #[serde(default)]
    pub materials: BTreeMap<String, f64>,
    pub electrodes: Vec<ElectrodeSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Regions to report; all regions when empty.
    #[serde(default)]
    pub report_regions: Vec<String>,
    #[serde(default)]
    pub outputs: Outputs,
}

impl Scenario {
    pub fn anodes(&self) -> impl Iterator<Item = &ElectrodeSpec> {
        self.electrodes.iter().filter(|e| e.role == Role::Anode)
    }

    pub fn cathode(&self) -> Option<&ElectrodeSpec> {
        self.electrodes.iter().find(|e| e.role == Role::Cathode)
    }

    /// Total injected current in mA.
    pub fn total_current(&self) -> f64 {
        self.anodes().map(ElectrodeSpec::current).sum()
    }

    /// Same scenario with every anode current multiplied by `factor`.
    pub fn scaled_current(&self, factor: f64) -> Self {
        let mut s = self.clone();
        for e in &mut s.electrodes {
            if e.role == Role::Anode {
                e.current_ma = Some(e.current() * factor);
            }
        }
        s
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.mesh.nastran.as_mut() {
            fix(p);
        }
        if let Some(p) = self.mesh.region_map.as_mut() {
            fix(p);
        }
        for p in [
            &mut self.outputs.vtk,
            &mut self.outputs.csv,
            &mut self.outputs.json,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Checks the invariants serde cannot express. `ptr` is this
    /// scenario's JSON pointer.
    pub fn validate(&self, ptr: &str) -> Result<(), ConfigError> {
        if self.label.trim().is_empty() {
            return Err(ConfigError::at(
                format!("{ptr}/label"),
                "label must not be empty",
            ));
        }
        let m = &self.mesh;
        match (&m.nastran, &m.phantom) {
            (Some(_), None) => {}
            (None, Some(_)) if m.region_map.is_none() => {}
            (None, Some(_)) => {
                return Err(ConfigError::at(
                    format!("{ptr}/mesh/region_map"),
                    "region_map applies to NASTRAN meshes only",
                ))
            }
            _ => {
                return Err(ConfigError::at(
                    format!("{ptr}/mesh"),
                    "give exactly one of \"nastran\" or \"phantom\"",
                ))
            }
        }
        for (name, &sigma) in &self.materials {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(ConfigError::at(
                    format!("{ptr}/materials/{}", escape(name)),
                    format!("conductivity must be positive, got {sigma}"),
                ));
            }
        }

        let mut names = BTreeSet::new();
        for (k, e) in self.electrodes.iter().enumerate() {
            let ep = format!("{ptr}/electrodes/{k}");
            if !names.insert(e.name.as_str()) {
                return Err(ConfigError::at(
                    format!("{ep}/name"),
                    format!("duplicate electrode {:?}", e.name),
                ));
            }
            match (&e.bbox, &e.patch) {
                (Some(b), None) if b.is_degenerate() => {
                    return Err(ConfigError::at(
                        format!("{ep}/box"),
                        "box must have min < max on every axis",
                    ))
                }
                (Some(_), None) | (None, Some(_)) => {}
                _ => {
                    return Err(ConfigError::at(
                        ep,
                        "give exactly one of \"box\" or \"patch\"",
                    ))
                }
            }
            match (e.role, e.current_ma) {
                (Role::Anode, Some(i)) if !(i >= 0.0 && i.is_finite()) => {
                    return Err(ConfigError::at(
                        format!("{ep}/current_mA"),
                        format!("anode current must be non-negative, got {i}"),
                    ))
                }
                (Role::Cathode, Some(_)) => {
                    return Err(ConfigError::at(
                        format!("{ep}/current_mA"),
                        "the cathode is grounded and takes no current",
                    ))
                }
                _ => {}
            }
        }
        let cathodes = self
            .electrodes
            .iter()
            .filter(|e| e.role == Role::Cathode)
            .count();
        if cathodes != 1 {
            return Err(ConfigError::at(
                format!("{ptr}/electrodes"),
                format!("exactly one cathode required, found {cathodes}"),
            ));
        }
        if self.anodes().next().is_none() {
            return Err(ConfigError::at(
                format!("{ptr}/electrodes"),
                "at least one anode required",
            ));
        }

        if let Err(e) = self.solver.settings().validate() {
            return Err(ConfigError::at(format!("{ptr}/solver"), e));
        }
        if !(self.outputs.cap > 0.0) {
            return Err(ConfigError::at(
                format!("{ptr}/outputs/cap"),
                "cap must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    scenarios: Vec<Scenario>,
}

fn escape(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut s = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => s.push_str(&format!("/{index}")),
            Segment::Map { key } => s.push_str(&format!("/{}", escape(key))),
            Segment::Enum { variant } => s.push_str(&format!("/{}", escape(variant))),
            Segment::Unknown => {}
        }
    }
    s
}

/// Parses and validates configuration text. Relative paths are resolved
/// against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<Vec<Scenario>, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let ptr = pointer(e.path());
        ConfigError::at(ptr, e.into_inner())
    })?;
    if file.scenarios.is_empty() {
        return Err(ConfigError::at("/scenarios", "no scenarios"));
    }
    let mut labels = BTreeSet::new();
    let mut out = Vec::with_capacity(file.scenarios.len());
    for (i, mut s) in file.scenarios.into_iter().enumerate() {
        let ptr = format!("/scenarios/{i}");
        s.validate(&ptr)?;
        if !labels.insert(s.label.clone()) {
            return Err(ConfigError::at(
                format!("{ptr}/label"),
                format!("duplicate label {:?}", s.label),
            ));
        }
        s.resolve_paths(base);
        out.push(s);
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<Vec<Scenario>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::at("", format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}
