//! Labeled tetrahedral meshes: data model, validation, NASTRAN I/O and
//! boundary/electrode patch extraction.
//!
//! Coordinates are stored in millimeters exactly as read. Conversion to SI
//! happens once, in [`crate::fem::assemble`].

mod boundary;
mod nastran;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::scalar::{centroid, det6, Real, Vec3};

pub use boundary::{extract_boundary, select_patch, Aabb, Face, FaceSet, PatchSelector};
pub use nastran::{parse_nastran, read_region_map, write_nastran, NastranReader, ParseOutput};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: malformed {card} card: {reason}\n  | {image}")]
    Malformed {
        line: usize,
        card: String,
        reason: String,
        image: String,
    },
    #[error("CTETRA {element} references GRID {node}, which is not defined")]
    MissingGrid { element: u64, node: u64 },
    #[error("line {line}: GRID {node} uses coordinate system {cp}; only the basic system (0) is supported")]
    CoordinateSystem { line: usize, node: u64, cp: i64 },
    #[error("element {0} has zero volume")]
    Degenerate(u64),
    #[error("mesh failed validation ({0}); run validate_mesh for the full defect list")]
    Invalid(String),
    #[error("patch selection is empty")]
    EmptySelection,
    #[error("selection box is degenerate: {0:?}")]
    DegenerateBox(Aabb),
    #[error("unknown region {0:?}")]
    UnknownRegion(String),
    #[error("region map: {0}")]
    RegionMap(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node<T> {
    pub id: u64,
    /// Position in millimeters.
    pub pos: Vec3<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Element {
    pub id: u64,
    pub nodes: [u64; 4],
    pub region: u32,
}

/// Tetrahedral mesh with region labels.
///
/// The constructor does not check invariants; use [`validate_mesh`] or
/// [`Mesh::checked`].
#[derive(Clone, Debug)]
pub struct Mesh<T> {
    nodes: Vec<Node<T>>,
    elements: Vec<Element>,
    region_names: BTreeMap<u32, String>,
    index: HashMap<u64, usize>,
}

impl<T: PartialEq> PartialEq for Mesh<T> {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.elements == other.elements
            && self.region_names == other.region_names
    }
}

impl<T: Real> Mesh<T> {
    pub fn new(
        nodes: Vec<Node<T>>,
        elements: Vec<Element>,
        region_names: BTreeMap<u32, String>,
    ) -> Self {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            index.entry(n.id).or_insert(i);
        }
        Self {
            nodes,
            elements,
            region_names,
            index,
        }
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn region_names(&self) -> &BTreeMap<u32, String> {
        &self.region_names
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn node_index(&self, id: u64) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Region id carrying `name`, compared case-insensitively.
    pub fn region_id(&self, name: &str) -> Option<u32> {
        let key = crate::materials::normalize_name(name);
        self.region_names
            .iter()
            .find(|(_, n)| crate::materials::normalize_name(n) == key)
            .map(|(&id, _)| id)
    }

    pub fn region_name(&self, id: u32) -> Option<&str> {
        self.region_names.get(&id).map(String::as_str)
    }

    /// Element connectivity as node indices.
    pub fn tet_indices(&self) -> Result<Vec<[usize; 4]>, MeshError> {
        self.elements
            .iter()
            .map(|e| {
                let mut out = [0usize; 4];
                for (slot, &nid) in out.iter_mut().zip(&e.nodes) {
                    *slot = self.node_index(nid).ok_or(MeshError::MissingGrid {
                        element: e.id,
                        node: nid,
                    })?;
                }
                Ok(out)
            })
            .collect()
    }

    /// Corner positions (mm) of element `k` (by position in the element list).
    ///
    /// Panics if the element references an unknown node.
    pub fn tet_points(&self, k: usize) -> [Vec3<T>; 4] {
        let e = &self.elements[k];
        e.nodes.map(|id| self.nodes[self.index[&id]].pos)
    }

    /// Signed volume in mm³.
    pub fn signed_volume(&self, k: usize) -> T {
        det6(&self.tet_points(k)) / T::of(6.0)
    }

    /// Centroid in mm.
    pub fn centroid(&self, k: usize) -> Vec3<T> {
        centroid(&self.tet_points(k))
    }

    /// Returns a copy in which every negatively oriented tetrahedron has its
    /// last two nodes swapped. Zero-volume elements are an error.
    pub fn canonicalize_orientation(&self) -> Result<Self, MeshError> {
        let mut out = self.clone();
        for k in 0..out.elements.len() {
            let v = self.signed_volume(k);
            if v == T::zero() || !v.is_finite() {
                return Err(MeshError::Degenerate(self.elements[k].id));
            }
            if v < T::zero() {
                out.elements[k].nodes.swap(2, 3);
            }
        }
        Ok(out)
    }

    /// Validates and returns `self` when it has no defects.
    pub fn checked(self) -> Result<Self, MeshError> {
        let report = validate_mesh(&self);
        if report.is_valid() {
            Ok(self)
        } else {
            Err(MeshError::Invalid(report.summary()))
        }
    }

    /// Applies a PID → name map; unmapped regions keep their name.
    pub fn rename_regions(&mut self, names: &BTreeMap<u32, String>) {
        for (id, name) in names {
            if let Some(slot) = self.region_names.get_mut(id) {
                *slot = name.clone();
            }
        }
    }

    /// Element indices belonging to `region`.
    pub fn region_elements(&self, region: u32) -> impl Iterator<Item = usize> + '_ {
        self.elements
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.region == region)
            .map(|(k, _)| k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Defect {
    /// Signed volume ≤ 0.
    NegativeVolume {
        element: u64,
    },
    DuplicateNodeRef {
        element: u64,
        node: u64,
    },
    /// Element references a node id that does not exist.
    DanglingNode {
        element: u64,
        node: u64,
    },
    DanglingRegion {
        element: u64,
        region: u32,
    },
    OrphanNode {
        node: u64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub nodes: usize,
    pub elements: usize,
    pub regions: usize,
    pub defects: Vec<Defect>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.defects.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut counts: BTreeMap<&'static str, usize> = BTreeMap::new();
        for d in &self.defects {
            let k = match d {
                Defect::NegativeVolume { .. } => "negative_volume",
                Defect::DuplicateNodeRef { .. } => "duplicate_node_ref",
                Defect::DanglingNode { .. } => "dangling_node",
                Defect::DanglingRegion { .. } => "dangling_region",
                Defect::OrphanNode { .. } => "orphan_node",
            };
            *counts.entry(k).or_default() += 1;
        }
        counts
            .iter()
            .map(|(k, n)| format!("{n} {k}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "nodes: {}  elements: {}  regions: {}",
            self.nodes, self.elements, self.regions
        )?;
        if self.defects.is_empty() {
            write!(f, "no defects")
        } else {
            write!(f, "defects: {}", self.summary())
        }
    }
}

/// Lists every invariant violation of `m`.
pub fn validate_mesh<T: Real>(m: &Mesh<T>) -> ValidationReport {
    let mut defects = Vec::new();
    let mut used = HashSet::with_capacity(m.nodes.len());
    let regions: HashSet<u32> = m.elements.iter().map(|e| e.region).collect();

    for (k, e) in m.elements.iter().enumerate() {
        let mut resolved = true;
        for (i, &a) in e.nodes.iter().enumerate() {
            if e.nodes[..i].contains(&a) {
                defects.push(Defect::DuplicateNodeRef {
                    element: e.id,
                    node: a,
                });
                resolved = false;
            }
            if m.node_index(a).is_none() {
                defects.push(Defect::DanglingNode {
                    element: e.id,
                    node: a,
                });
                resolved = false;
            } else {
                used.insert(a);
            }
        }
        if !m.region_names.contains_key(&e.region) {
            defects.push(Defect::DanglingRegion {
                element: e.id,
                region: e.region,
            });
        }
        if resolved && !(m.signed_volume(k) > T::zero()) {
            defects.push(Defect::NegativeVolume { element: e.id });
        }
    }
    for n in &m.nodes {
        if !used.contains(&n.id) {
            defects.push(Defect::OrphanNode { node: n.id });
        }
    }

    ValidationReport {
        nodes: m.nodes.len(),
        elements: m.elements.len(),
        regions: regions.len(),
        defects,
    }
}
