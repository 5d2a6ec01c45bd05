//! Structured test geometries: layered slabs with a closed-form solution
//! and a mirror-symmetric box head with two nerve rods and the six
//! electrode sites.
//!
//! Hexahedral cells are split into six tetrahedra around one body diagonal.
//! In the head phantom the cells with x < 0 use the reflected diagonal, so
//! the mesh is its own mirror image through x = 0, connectivity included.
//!
//! Head frame (mm): x lateral with +x on the subject's left, y up, z
//! anterior. The box is centered on the origin.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::materials::MaterialTable;
use crate::mesh::{
    extract_boundary, select_patch, Aabb, Element, FaceSet, Mesh, MeshError, Node, PatchSelector,
};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("pitch mismatch: {0}")]
    Pitch(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// A generated mesh with its named electrode patches and the conductivities
/// of regions the default table does not name.
#[derive(Clone, Debug)]
pub struct Phantom<T> {
    pub mesh: Mesh<T>,
    pub boundary: FaceSet<T>,
    pub patches: BTreeMap<String, FaceSet<T>>,
    pub conductivities: BTreeMap<String, T>,
}

impl<T: Real> Phantom<T> {
    pub fn patch(&self, name: &str) -> Option<&FaceSet<T>> {
        self.patches.get(name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub name: String,
    /// mm along the current axis.
    pub thickness: f64,
    /// S/m.
    pub sigma: f64,
}

impl Layer {
    pub fn new(name: &str, thickness: f64, sigma: f64) -> Self {
        Self {
            name: name.to_string(),
            thickness,
            sigma,
        }
    }
}

/// Rectangular slab; current flows along x from the `inlet` face (x = 0)
/// to the `outlet` face (x = length).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlabSpec {
    pub length: f64,
    /// Extent along y.
    pub width: f64,
    /// Extent along z.
    pub height: f64,
    pub layers: Vec<Layer>,
    pub pitch: f64,
}

impl SlabSpec {
    pub fn uniform(
        length: f64,
        width: f64,
        height: f64,
        pitch: f64,
        name: &str,
        sigma: f64,
    ) -> Self {
        Self {
            length,
            width,
            height,
            layers: vec![Layer::new(name, length, sigma)],
            pitch,
        }
    }

    /// Cross-section in mm².
    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    fn validate(&self) -> Result<(), PhantomError> {
        if !(self.pitch > 0.0) {
            return Err(PhantomError::Pitch(format!(
                "pitch {} must be positive",
                self.pitch
            )));
        }
        if self.layers.is_empty() {
            return Err(PhantomError::Geometry(
                "slab needs at least one layer".into(),
            ));
        }
        let total: f64 = self.layers.iter().map(|l| l.thickness).sum();
        if (total - self.length).abs() > 1e-9 * self.length {
            return Err(PhantomError::Geometry(format!(
                "layer thicknesses sum to {total} mm, length is {} mm",
                self.length
            )));
        }
        for (what, v) in [
            ("length", self.length),
            ("width", self.width),
            ("height", self.height),
        ]
        .into_iter()
        .chain(self.layers.iter().map(|l| (l.name.as_str(), l.thickness)))
        {
            cells(v, self.pitch, what)?;
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &self.layers {
            if !(l.sigma > 0.0) {
                return Err(PhantomError::Geometry(format!(
                    "layer {:?}: conductivity must be positive",
                    l.name
                )));
            }
            if !seen.insert(crate::materials::normalize_name(&l.name)) {
                return Err(PhantomError::Geometry(format!(
                    "duplicate layer {:?}",
                    l.name
                )));
            }
        }
        Ok(())
    }
}

/// Number of cells spanning `len`, which must be a positive multiple of `pitch`.
fn cells(len: f64, pitch: f64, what: &str) -> Result<usize, PhantomError> {
    let n = (len / pitch).round();
    if !(len > 0.0) || n < 1.0 || (n * pitch - len).abs() > 1e-9 * len {
        return Err(PhantomError::Pitch(format!(
            "{what} = {len} mm is not a positive multiple of pitch {pitch} mm"
        )));
    }
    Ok(n as usize)
}

/// Structured grid of `counts` cells.
struct Grid {
    counts: [usize; 3],
    pitch: f64,
    /// Lower corner per axis; ignored on x when `mirrored`.
    origin: [f64; 3],
    /// x runs symmetrically about 0 and cells at x < 0 are reflected.
    mirrored: bool,
}

/// Body-diagonal split: each tet walks 0 → eₐ → eₐ+e_b → (1,1,1).
const KUHN_PATHS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

impl Grid {
    /// Node coordinate along `axis` at grid index `i`.
    fn coord(&self, axis: usize, i: usize) -> f64 {
        if axis == 0 && self.mirrored {
            (i as i64 - (self.counts[0] / 2) as i64) as f64 * self.pitch
        } else {
            self.origin[axis] + i as f64 * self.pitch
        }
    }

    /// Cell center along `axis`; odd multiples of half a pitch on mirrored x,
    /// which keeps the reflection exact.
    fn center(&self, axis: usize, i: usize) -> f64 {
        if axis == 0 && self.mirrored {
            (2 * (i as i64 - (self.counts[0] / 2) as i64) + 1) as f64 * self.pitch * 0.5
        } else {
            self.origin[axis] + (2 * i + 1) as f64 * self.pitch * 0.5
        }
    }

    fn node_id(&self, i: usize, j: usize, k: usize) -> u64 {
        let [nx, ny, _] = self.counts;
        1 + (i + (nx + 1) * (j + (ny + 1) * k)) as u64
    }

    fn build<T: Real>(
        &self,
        region_names: BTreeMap<u32, String>,
        classify: impl Fn([f64; 3]) -> u32,
    ) -> Mesh<T> {
        let [nx, ny, nz] = self.counts;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    nodes.push(Node {
                        id: self.node_id(i, j, k),
                        pos: [
                            T::of(self.coord(0, i)),
                            T::of(self.coord(1, j)),
                            T::of(self.coord(2, k)),
                        ],
                    });
                }
            }
        }

        let mut elements = Vec::with_capacity(6 * nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let center = [self.center(0, i), self.center(1, j), self.center(2, k)];
                    let region = classify(center);
                    let flip = usize::from(self.mirrored && i < nx / 2);
                    let corner = |v: usize| {
                        let v = v ^ flip;
                        (i + (v & 1), j + ((v >> 1) & 1), k + ((v >> 2) & 1))
                    };
                    for path in KUHN_PATHS {
                        let v1 = 1 << path[0];
                        let v2 = v1 | (1 << path[1]);
                        let local = [0, v1, v2, 7].map(corner);
                        let p = local.map(|(a, b, c)| {
                            [self.coord(0, a), self.coord(1, b), self.coord(2, c)]
                        });
                        let mut ids = local.map(|(a, b, c)| self.node_id(a, b, c));
                        if crate::scalar::det6(&p) < 0.0 {
                            ids.swap(2, 3);
                        }
                        elements.push(Element {
                            id: elements.len() as u64 + 1,
                            nodes: ids,
                            region,
                        });
                    }
                }
            }
        }
        Mesh::new(nodes, elements, region_names)
    }
}

/// Box covering the boundary plane `axis = at`, within `lo..hi` on the other axes.
fn face_box(axis: usize, at: f64, lo: [f64; 3], hi: [f64; 3], pitch: f64) -> Aabb {
    let mut min = lo;
    let mut max = hi;
    min[axis] = at - 0.25 * pitch;
    max[axis] = at + 0.25 * pitch;
    Aabb::new(min, max)
}

/// Kuhn-split slab with one region per layer and `inlet`/`outlet` patches.
pub fn make_slab<T: Real>(spec: &SlabSpec) -> Result<Phantom<T>, PhantomError> {
    spec.validate()?;
    let p = spec.pitch;
    let grid = Grid {
        counts: [
            cells(spec.length, p, "length")?,
            cells(spec.width, p, "width")?,
            cells(spec.height, p, "height")?,
        ],
        pitch: p,
        origin: [0.0; 3],
        mirrored: false,
    };
    let mut bounds = Vec::with_capacity(spec.layers.len());
    let mut x = 0.0;
    for l in &spec.layers {
        x += l.thickness;
        bounds.push(x);
    }
    let names: BTreeMap<u32, String> = spec
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| (i as u32 + 1, l.name.clone()))
        .collect();
    let mesh: Mesh<T> = grid.build(names, |c| {
        let layer = bounds
            .iter()
            .position(|&b| c[0] < b)
            .unwrap_or(bounds.len() - 1);
        layer as u32 + 1
    });

    let boundary = extract_boundary(&mesh)?;
    let lo = [0.0, -0.25 * p, -0.25 * p];
    let hi = [0.0, spec.width + 0.25 * p, spec.height + 0.25 * p];
    let mut patches = BTreeMap::new();
    for (name, at) in [("inlet", 0.0), ("outlet", spec.length)] {
        let b = face_box(0, at, lo, hi, p);
        patches.insert(
            name.to_string(),
            select_patch(&mesh, &boundary, &PatchSelector::Box(b))?,
        );
    }
    let conductivities = spec
        .layers
        .iter()
        .map(|l| (l.name.clone(), T::of(l.sigma)))
        .collect();
    Ok(Phantom {
        mesh,
        boundary,
        patches,
        conductivities,
    })
}

/// Closed-form series-resistance solution of a layered slab driven from
/// the inlet with the outlet grounded.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticSlab {
    /// Uniform current density magnitude in A/m².
    pub current_density: f64,
    /// Inlet potential in volts (the outlet is at 0 V).
    pub delta_v: f64,
    /// `(x_start mm, x_end mm, σ S/m)` per layer.
    pub layers: Vec<(f64, f64, f64)>,
}

impl AnalyticSlab {
    /// Potential (V) at axial position `x` (mm).
    pub fn potential(&self, x: f64) -> f64 {
        self.layers
            .iter()
            .map(|&(a, b, s)| {
                let span = (b - x.max(a)).max(0.0);
                self.current_density * span * 1e-3 / s
            })
            .sum()
    }

    /// Axial electric field (V/m) at `x` (mm), pointing from inlet to outlet.
    pub fn field(&self, x: f64) -> f64 {
        let s = self
            .layers
            .iter()
            .find(|&&(_, b, _)| x < b)
            .or(self.layers.last())
            .map_or(f64::NAN, |l| l.2);
        self.current_density / s
    }
}

pub fn analytic_slab(spec: &SlabSpec, current_ma: f64) -> AnalyticSlab {
    let j = current_ma * 1e-3 / (spec.area() * 1e-6);
    let mut x = 0.0;
    let layers: Vec<(f64, f64, f64)> = spec
        .layers
        .iter()
        .map(|l| {
            let seg = (x, x + l.thickness, l.sigma);
            x += l.thickness;
            seg
        })
        .collect();
    let delta_v = layers.iter().map(|&(a, b, s)| j * (b - a) * 1e-3 / s).sum();
    AnalyticSlab {
        current_density: j,
        delta_v,
        layers,
    }
}

pub const SKIN: u32 = 1;
pub const SKELETON: u32 = 2;
pub const INNER: u32 = 3;
pub const NERVE_LEFT: u32 = 4;
pub const NERVE_RIGHT: u32 = 5;

/// Named electrode sites of the head phantom.
pub const HEAD_PATCHES: [&str; 6] = [
    "bridge_left",
    "bridge_center",
    "bridge_right",
    "neck",
    "cheek_left",
    "cheek_right",
];

/// Box head: skin and skeleton shells around an inner-tissue core holding
/// two nerve rods at x = ±`nerve_offset`, parallel to z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadPhantomSpec {
    /// Outer box extents (x, y, z) in mm.
    pub size: [f64; 3],
    pub pitch: f64,
    pub skin_thickness: f64,
    pub skeleton_thickness: f64,
    /// Lateral distance of each rod axis from the midplane.
    pub nerve_offset: f64,
    /// Half side of the square rod cross-section.
    pub nerve_half_width: f64,
    /// y of the rod axes.
    pub nerve_height: f64,
    /// z extent of the rods.
    pub nerve_depth: [f64; 2],
    /// Electrode footprint (in-plane extents).
    pub electrode_size: [f64; 2],
    /// y center of the nasal-bridge electrodes on the front face.
    pub bridge_height: f64,
    /// x center of the left bridge electrode (the right one mirrors it).
    pub bridge_offset: f64,
    /// y center of the neck electrode on the back face.
    pub neck_height: f64,
    /// y center of the cheek electrodes on the side faces.
    pub cheek_height: f64,
    /// z center of the cheek electrodes.
    pub cheek_depth: f64,
}

impl Default for HeadPhantomSpec {
    fn default() -> Self {
        Self {
            size: [120.0, 160.0, 140.0],
            pitch: 5.0,
            skin_thickness: 5.0,
            skeleton_thickness: 10.0,
            nerve_offset: 20.0,
            nerve_half_width: 5.0,
            nerve_height: 20.0,
            nerve_depth: [-40.0, 30.0],
            electrode_size: [20.0, 20.0],
            bridge_height: 20.0,
            bridge_offset: 10.0,
            neck_height: -60.0,
            cheek_height: 0.0,
            cheek_depth: 50.0,
        }
    }
}

impl HeadPhantomSpec {
    /// 10 mm pitch variant with fewer than 2,000 nodes.
    pub fn coarse() -> Self {
        Self {
            size: [100.0, 120.0, 120.0],
            pitch: 10.0,
            skin_thickness: 10.0,
            skeleton_thickness: 10.0,
            nerve_offset: 15.0,
            nerve_half_width: 5.0,
            nerve_height: 15.0,
            nerve_depth: [0.0, 30.0],
            electrode_size: [20.0, 20.0],
            bridge_height: 10.0,
            bridge_offset: 10.0,
            neck_height: -40.0,
            cheek_height: 0.0,
            cheek_depth: 30.0,
        }
    }

    /// Grid cell counts along x, y, z.
    pub fn cell_counts(&self) -> Result<[usize; 3], PhantomError> {
        let nx = cells(self.size[0], self.pitch, "size x")?;
        if nx % 2 != 0 {
            return Err(PhantomError::Pitch(format!(
                "size x = {} mm must span an even number of cells",
                self.size[0]
            )));
        }
        Ok([
            nx,
            cells(self.size[1], self.pitch, "size y")?,
            cells(self.size[2], self.pitch, "size z")?,
        ])
    }

    fn half(&self) -> [f64; 3] {
        self.size.map(|s| s / 2.0)
    }

    /// Box of the left rod; the right rod is its mirror image.
    fn rod_left(&self) -> Aabb {
        let (d, r, h) = (self.nerve_offset, self.nerve_half_width, self.nerve_height);
        Aabb::new(
            [d - r, h - r, self.nerve_depth[0]],
            [d + r, h + r, self.nerve_depth[1]],
        )
    }

    /// Electrode boxes by name.
    pub fn patch_boxes(&self) -> BTreeMap<&'static str, Aabb> {
        let [hx, _, hz] = self.half();
        let [ea, eb] = self.electrode_size.map(|e| e / 2.0);
        let p = self.pitch;
        let front =
            |x: f64, y: f64| face_box(2, hz, [x - ea, y - eb, 0.0], [x + ea, y + eb, 0.0], p);
        let bridge_left = front(self.bridge_offset, self.bridge_height);
        let cheek_left = face_box(
            0,
            hx,
            [0.0, self.cheek_height - eb, self.cheek_depth - ea],
            [0.0, self.cheek_height + eb, self.cheek_depth + ea],
            p,
        );
        BTreeMap::from([
            ("bridge_left", bridge_left),
            ("bridge_center", front(0.0, self.bridge_height)),
            ("bridge_right", bridge_left.mirrored_x()),
            (
                "neck",
                face_box(
                    2,
                    -hz,
                    [-ea, self.neck_height - eb, 0.0],
                    [ea, self.neck_height + eb, 0.0],
                    p,
                ),
            ),
            ("cheek_left", cheek_left),
            ("cheek_right", cheek_left.mirrored_x()),
        ])
    }

    fn validate(&self) -> Result<(), PhantomError> {
        self.cell_counts()?;
        let half = self.half();
        let shell = self.skin_thickness + self.skeleton_thickness;
        if self.skin_thickness * 2.0 < self.pitch || self.skeleton_thickness * 2.0 < self.pitch {
            return Err(PhantomError::Geometry(
                "shell thicknesses must be at least half a pitch".into(),
            ));
        }
        let core = Aabb::new(half.map(|h| shell - h), half.map(|h| h - shell));
        if core.is_degenerate() {
            return Err(PhantomError::Geometry("shells leave no inner core".into()));
        }
        let rod = self.rod_left();
        if rod.is_degenerate() {
            return Err(PhantomError::Geometry("nerve rod has no extent".into()));
        }
        if rod.min[0] < 0.0 {
            return Err(PhantomError::Geometry(
                "nerve rods overlap at the midplane".into(),
            ));
        }
        if (0..3).any(|k| rod.min[k] < core.min[k] || rod.max[k] > core.max[k]) {
            return Err(PhantomError::Geometry(format!(
                "nerve rod {rod:?} overlaps the shells (core {core:?})"
            )));
        }
        for (name, b) in self.patch_boxes() {
            let fits = (0..3)
                .all(|k| b.min[k] >= -half[k] - self.pitch && b.max[k] <= half[k] + self.pitch);
            if !fits {
                return Err(PhantomError::Geometry(format!(
                    "electrode {name} extends past the head box"
                )));
            }
        }
        Ok(())
    }
}

pub fn make_head_phantom<T: Real>(spec: &HeadPhantomSpec) -> Result<Phantom<T>, PhantomError> {
    spec.validate()?;
    let counts = spec.cell_counts()?;
    let half = spec.half();
    let grid = Grid {
        counts,
        pitch: spec.pitch,
        origin: half.map(|h| -h),
        mirrored: true,
    };
    let names = BTreeMap::from([
        (SKIN, "Skin".to_string()),
        (SKELETON, "Skeleton".to_string()),
        (INNER, "Inner tissue".to_string()),
        (NERVE_LEFT, "Nerve_left".to_string()),
        (NERVE_RIGHT, "Nerve_right".to_string()),
    ]);
    let rod = spec.rod_left();
    let in_rod = |c: [f64; 3], x: f64| {
        x >= rod.min[0]
            && x <= rod.max[0]
            && c[1] >= rod.min[1]
            && c[1] <= rod.max[1]
            && c[2] >= rod.min[2]
            && c[2] <= rod.max[2]
    };
    let mesh: Mesh<T> = grid.build(names, |c| {
        let depth = (0..3)
            .map(|k| half[k] - c[k].abs())
            .fold(f64::INFINITY, f64::min);
        if depth < spec.skin_thickness {
            SKIN
        } else if depth < spec.skin_thickness + spec.skeleton_thickness {
            SKELETON
        } else if in_rod(c, c[0]) {
            NERVE_LEFT
        } else if in_rod(c, -c[0]) {
            NERVE_RIGHT
        } else {
            INNER
        }
    });

    for (id, name) in [(NERVE_LEFT, "Nerve_left"), (NERVE_RIGHT, "Nerve_right")] {
        if mesh.region_elements(id).next().is_none() {
            return Err(PhantomError::Geometry(format!(
                "{name} contains no cells at pitch {} mm",
                spec.pitch
            )));
        }
    }

    let boundary = extract_boundary(&mesh)?;
    let mut patches = BTreeMap::new();
    for (name, b) in spec.patch_boxes() {
        let fs = select_patch(&mesh, &boundary, &PatchSelector::Box(b))
            .map_err(|e| PhantomError::Geometry(format!("electrode {name}: {e}")))?;
        patches.insert(name.to_string(), fs);
    }
    let nerves = MaterialTable::<T>::default_table()
        .get("Nerves")
        .expect("default table names Nerves");
    let conductivities = BTreeMap::from([
        ("Nerve_left".to_string(), nerves),
        ("Nerve_right".to_string(), nerves),
    ]);
    Ok(Phantom {
        mesh,
        boundary,
        patches,
        conductivities,
    })
}

/// Either phantom, as named in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum PhantomSpec {
    Head(HeadPhantomSpec),
    Slab(SlabSpec),
}

impl PhantomSpec {
    pub fn build<T: Real>(&self) -> Result<Phantom<T>, PhantomError> {
        match self {
            PhantomSpec::Head(h) => make_head_phantom(h),
            PhantomSpec::Slab(s) => make_slab(s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate_mesh;

    fn skin_slab() -> SlabSpec {
        SlabSpec::uniform(20.0, 10.0, 10.0, 5.0, "Skin", 0.465)
    }

    #[test]
    fn slab_counts() {
        let s = make_slab::<f64>(&skin_slab()).unwrap();
        assert_eq!(s.mesh.node_count(), 45);
        assert_eq!(s.mesh.element_count(), 96);
        assert_eq!(s.mesh.region_names().len(), 1);
        assert!(validate_mesh(&s.mesh).is_valid());
        assert_eq!(s.patches["inlet"].len(), 8);
        assert!((s.patches["outlet"].area() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn two_layer_slab_splits_evenly() {
        let spec = SlabSpec {
            layers: vec![
                Layer::new("Skin", 10.0, 0.465),
                Layer::new("Skeleton", 10.0, 0.02),
            ],
            ..skin_slab()
        };
        let s = make_slab::<f64>(&spec).unwrap();
        let count = |r| s.mesh.elements().iter().filter(|e| e.region == r).count();
        assert_eq!((count(1), count(2)), (48, 48));
        assert_eq!(s.conductivities["Skeleton"], 0.02);
    }

    #[test]
    fn slab_rejects_pitch_mismatch() {
        let spec = SlabSpec {
            pitch: 3.0,
            ..skin_slab()
        };
        assert!(matches!(
            make_slab::<f64>(&spec),
            Err(PhantomError::Pitch(_))
        ));
        let spec = SlabSpec {
            layers: vec![Layer::new("Skin", 12.0, 0.465)],
            ..skin_slab()
        };
        assert!(matches!(
            make_slab::<f64>(&spec),
            Err(PhantomError::Geometry(_))
        ));
    }

    #[test]
    fn analytic_skin_slab() {
        let spec = SlabSpec::uniform(20.0, 10.0, 10.0, 5.0, "Skin", 0.465);
        let a = analytic_slab(&spec, 2.0);
        assert!((a.current_density - 20.0).abs() < 1e-12);
        // ΔV = J L / σ = 20 · 0.02 / 0.465
        assert!((a.delta_v - 0.86022).abs() < 1e-5);
        assert!((a.potential(0.0) - a.delta_v).abs() < 1e-15);
        assert_eq!(a.potential(20.0), 0.0);
        let z = analytic_slab(&spec, 0.0);
        assert_eq!((z.current_density, z.delta_v), (0.0, 0.0));
    }

    #[test]
    fn analytic_two_layer_field_jump() {
        let spec = SlabSpec {
            layers: vec![
                Layer::new("Skin", 10.0, 0.465),
                Layer::new("Skeleton", 10.0, 0.02),
            ],
            ..skin_slab()
        };
        let a = analytic_slab(&spec, 2.0);
        assert!((a.current_density - 20.0).abs() < 1e-12);
        assert!((a.field(5.0) - 43.01).abs() < 5e-3);
        assert!((a.field(15.0) - 1000.0).abs() < 1e-9);
        assert!((a.potential(10.0) - 20.0 * 0.01 / 0.02).abs() < 1e-12);
    }

    #[test]
    fn default_head_counts_and_regions() {
        let spec = HeadPhantomSpec::default();
        let h = make_head_phantom::<f64>(&spec).unwrap();
        // 24 × 32 × 28 cells
        assert_eq!(h.mesh.node_count(), 25 * 33 * 29);
        assert_eq!(h.mesh.element_count(), 6 * 24 * 32 * 28);
        let names: Vec<&str> = h.mesh.region_names().values().map(String::as_str).collect();
        assert_eq!(
            names,
            [
                "Skin",
                "Skeleton",
                "Inner tissue",
                "Nerve_left",
                "Nerve_right"
            ]
        );
        assert!(validate_mesh(&h.mesh).is_valid());
        for name in HEAD_PATCHES {
            let p = h.patch(name).unwrap();
            assert_eq!(p.len(), 32, "{name}");
            assert!((p.area() - 400.0).abs() < 1e-9);
        }
    }

    #[test]
    fn head_is_mirror_symmetric() {
        let h = make_head_phantom::<f64>(&HeadPhantomSpec::coarse()).unwrap();
        assert!(h.mesh.node_count() <= 2000);
        let key = |p: [f64; 3]| p.map(f64::to_bits);
        let mut a: Vec<_> = h.mesh.nodes().iter().map(|n| key(n.pos)).collect();
        let mut b: Vec<_> = h
            .mesh
            .nodes()
            .iter()
            .map(|n| key([-n.pos[0], n.pos[1], n.pos[2]]))
            .collect();
        a.sort_unstable();
        b.sort_unstable();
        // -0.0 and 0.0 differ in bits; compare on the mirrored plane by value
        let fix = |v: &mut Vec<[u64; 3]>| {
            for p in v.iter_mut() {
                if f64::from_bits(p[0]) == 0.0 {
                    p[0] = 0f64.to_bits();
                }
            }
            v.sort_unstable();
        };
        fix(&mut a);
        fix(&mut b);
        assert_eq!(a, b);

        // tets map to tets under reflection, with swapped nerve labels
        let pos: BTreeMap<u64, [f64; 3]> = h.mesh.nodes().iter().map(|n| (n.id, n.pos)).collect();
        let by_pos: BTreeMap<[u64; 3], u64> = h
            .mesh
            .nodes()
            .iter()
            .map(|n| (key(n.pos.map(|c| if c == 0.0 { 0.0 } else { c })), n.id))
            .collect();
        let tet_key = |nodes: [u64; 4]| {
            let mut k = nodes;
            k.sort_unstable();
            k
        };
        let tets: BTreeMap<[u64; 4], u32> = h
            .mesh
            .elements()
            .iter()
            .map(|e| (tet_key(e.nodes), e.region))
            .collect();
        for e in h.mesh.elements() {
            let mirrored = e.nodes.map(|id| {
                let p = pos[&id];
                let q = [if p[0] == 0.0 { 0.0 } else { -p[0] }, p[1], p[2]];
                by_pos[&key(q)]
            });
            let region = tets[&tet_key(mirrored)];
            let expect = match e.region {
                NERVE_LEFT => NERVE_RIGHT,
                NERVE_RIGHT => NERVE_LEFT,
                r => r,
            };
            assert_eq!(region, expect);
        }
    }

    #[test]
    fn mirrored_patches_have_mirrored_area() {
        let h = make_head_phantom::<f64>(&HeadPhantomSpec::coarse()).unwrap();
        assert_eq!(
            h.patches["bridge_left"].area(),
            h.patches["bridge_right"].area()
        );
        assert_eq!(
            h.patches["cheek_left"].len(),
            h.patches["cheek_right"].len()
        );
        let c = |name: &str| {
            let fs = &h.patches[name];
            fs.faces.iter().map(|f| f.points[0][0]).sum::<f64>() / fs.len() as f64
        };
        assert!(c("bridge_left") > 0.0 && c("bridge_right") < 0.0);
        assert!(c("cheek_left") > 0.0);
    }

    #[test]
    fn head_geometry_errors() {
        let spec = HeadPhantomSpec {
            nerve_offset: 50.0,
            ..HeadPhantomSpec::default()
        };
        assert!(matches!(
            make_head_phantom::<f64>(&spec),
            Err(PhantomError::Geometry(_))
        ));
        let spec = HeadPhantomSpec {
            size: [125.0, 160.0, 140.0],
            ..HeadPhantomSpec::default()
        };
        assert!(matches!(
            make_head_phantom::<f64>(&spec),
            Err(PhantomError::Pitch(_))
        ));
        let spec = HeadPhantomSpec {
            nerve_offset: 2.0,
            ..HeadPhantomSpec::default()
        };
        assert!(make_head_phantom::<f64>(&spec).is_err());
    }

    #[test]
    fn phantom_spec_json() {
        let spec: PhantomSpec =
            serde_json::from_str(r#"{"head": {"pitch": 10.0, "size": [100, 120, 120]}}"#).unwrap();
        match spec {
            PhantomSpec::Head(h) => assert_eq!(h.pitch, 10.0),
            _ => panic!(),
        }
        assert!(serde_json::from_str::<PhantomSpec>(r#"{"head": {"pitchh": 1}}"#).is_err());
    }
}
