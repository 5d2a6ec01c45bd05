use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{validate_mesh, Mesh, MeshError};
use crate::scalar::{centroid, cross, dot, norm, scale, sub, Real, Vec3};

/// Local faces of a tetrahedron, indexed by the opposite vertex.
const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

/// A boundary triangle owned by exactly one tetrahedron.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Face<T> {
    pub element_id: u64,
    /// Position of the owning element in [`Mesh::elements`].
    pub element_index: usize,
    /// Index of the owning tet's vertex opposite this face.
    pub local_face: usize,
    pub region: u32,
    /// Node ids, counter-clockwise seen from outside.
    pub nodes: [u64; 3],
    /// Vertex positions (mm), same order as `nodes`.
    pub points: [Vec3<T>; 3],
    pub normal: Vec3<T>,
    /// Area in mm².
    pub area: T,
}

impl<T: Real> Face<T> {
    fn key(&self) -> [u64; 3] {
        let mut k = self.nodes;
        k.sort_unstable();
        k
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FaceSet<T> {
    pub faces: Vec<Face<T>>,
}

impl<T: Real> FaceSet<T> {
    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Total area in mm².
    pub fn area(&self) -> T {
        self.faces.iter().map(|f| f.area).sum()
    }

    /// Sorted node-id triples, for order-independent comparison.
    pub fn keys(&self) -> Vec<[u64; 3]> {
        let mut k: Vec<_> = self.faces.iter().map(Face::key).collect();
        k.sort_unstable();
        k
    }

    /// Distinct node ids touched by the set, ascending.
    pub fn node_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.faces.iter().flat_map(|f| f.nodes).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Faces of `self` not present in `other`.
    pub fn difference(&self, other: &FaceSet<T>) -> FaceSet<T> {
        let mut taken: Vec<[u64; 3]> = other.keys();
        taken.dedup();
        FaceSet {
            faces: self
                .faces
                .iter()
                .filter(|f| taken.binary_search(&f.key()).is_err())
                .copied()
                .collect(),
        }
    }
}

/// All faces owned by exactly one tetrahedron, with outward unit normals.
/// Sorted by node-id triple, so the result does not depend on element order.
pub fn extract_boundary<T: Real>(m: &Mesh<T>) -> Result<FaceSet<T>, MeshError> {
    let report = validate_mesh(m);
    if !report.is_valid() {
        return Err(MeshError::Invalid(report.summary()));
    }

    let mut seen: HashMap<[u64; 3], (u32, usize, usize)> =
        HashMap::with_capacity(2 * m.element_count() + 16);
    for (k, e) in m.elements().iter().enumerate() {
        for (local, tri) in LOCAL_FACES.iter().enumerate() {
            let mut key = tri.map(|i| e.nodes[i]);
            key.sort_unstable();
            seen.entry(key)
                .and_modify(|v| v.0 += 1)
                .or_insert((1, k, local));
        }
    }

    let mut owned: Vec<([u64; 3], usize, usize)> = seen
        .into_iter()
        .filter(|(_, (count, _, _))| *count == 1)
        .map(|(key, (_, k, local))| (key, k, local))
        .collect();
    owned.sort_unstable_by_key(|(key, _, _)| *key);

    let faces = owned
        .into_iter()
        .map(|(_, k, local)| make_face(m, k, local))
        .collect();
    Ok(FaceSet { faces })
}

fn make_face<T: Real>(m: &Mesh<T>, k: usize, local: usize) -> Face<T> {
    let e = &m.elements()[k];
    let pts = m.tet_points(k);
    let tri = LOCAL_FACES[local];
    let mut nodes = tri.map(|i| e.nodes[i]);
    let mut points = tri.map(|i| pts[i]);
    let mut n = cross(sub(points[1], points[0]), sub(points[2], points[0]));
    let face_c = scale(
        [
            points[0][0] + points[1][0] + points[2][0],
            points[0][1] + points[1][1] + points[2][1],
            points[0][2] + points[1][2] + points[2][2],
        ],
        T::one() / T::of(3.0),
    );
    if dot(n, sub(face_c, centroid(&pts))) < T::zero() {
        nodes.swap(1, 2);
        points.swap(1, 2);
        n = scale(n, -T::one());
    }
    let len = norm(n);
    Face {
        element_id: e.id,
        element_index: k,
        local_face: local,
        region: e.region,
        nodes,
        points,
        normal: scale(n, T::one() / len),
        area: len / T::of(2.0),
    }
}

/// Axis-aligned box in mm, closed on all sides.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    /// Box centered at `center` with the given full extents.
    pub fn centered(center: [f64; 3], extent: [f64; 3]) -> Self {
        let min = [0, 1, 2].map(|k| center[k] - extent[k] / 2.0);
        let max = [0, 1, 2].map(|k| center[k] + extent[k] / 2.0);
        Self { min, max }
    }

    pub fn is_degenerate(&self) -> bool {
        (0..3).any(|k| {
            !(self.min[k] < self.max[k]) || !self.min[k].is_finite() || !self.max[k].is_finite()
        })
    }

    pub fn contains<T: Real>(&self, p: Vec3<T>) -> bool {
        (0..3).all(|k| {
            let v = p[k].as_f64();
            v >= self.min[k] && v <= self.max[k]
        })
    }

    /// Reflection through the plane x = 0.
    pub fn mirrored_x(&self) -> Self {
        Self {
            min: [-self.max[0], self.min[1], self.min[2]],
            max: [-self.min[0], self.max[1], self.max[2]],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PatchSelector {
    /// Faces whose three vertices lie in the box.
    Box(Aabb),
    /// Boundary faces of elements in the named region.
    Region(String),
}

/// Subset of `fs` picked by `selector`. Empty selections are an error.
pub fn select_patch<T: Real>(
    m: &Mesh<T>,
    fs: &FaceSet<T>,
    selector: &PatchSelector,
) -> Result<FaceSet<T>, MeshError> {
    let faces: Vec<Face<T>> = match selector {
        PatchSelector::Box(b) => {
            if b.is_degenerate() {
                return Err(MeshError::DegenerateBox(*b));
            }
            fs.faces
                .iter()
                .filter(|f| f.points.iter().all(|&p| b.contains(p)))
                .copied()
                .collect()
        }
        PatchSelector::Region(name) => {
            let id = m
                .region_id(name)
                .ok_or_else(|| MeshError::UnknownRegion(name.clone()))?;
            fs.faces
                .iter()
                .filter(|f| f.region == id)
                .copied()
                .collect()
        }
    };
    if faces.is_empty() {
        return Err(MeshError::EmptySelection);
    }
    Ok(FaceSet { faces })
}
