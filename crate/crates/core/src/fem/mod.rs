//! Linear (P1) tetrahedral discretization of `div(σ grad V) = 0`.
//!
//! Boundary handling follows the electrode model: a uniform inward normal
//! current density on the anode patch (Neumann), 0 V on the cathode patch
//! (Dirichlet), and nothing at all on other boundary faces, which leaves
//! them insulating.

mod sparse;

use rayon::prelude::*;
use thiserror::Error;

use crate::materials::ConductivityField;
use crate::mesh::{FaceSet, Mesh, MeshError};
use crate::scalar::{cross, dot, scale, sub, Real, Vec3};

pub use sparse::CsrMatrix;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("element {element}: non-positive volume")]
    Degenerate { element: u64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("conductivity field has {got} values for {expected} elements")]
    Length { expected: usize, got: usize },
    #[error("electrode patch has zero area")]
    ZeroArea,
    #[error("ground patch is empty; a pure-Neumann system is singular")]
    EmptyGround,
    #[error("face references node {0}, which is not in the mesh")]
    UnknownNode(u64),
}

/// Gradients of the four barycentric basis functions and the volume.
/// `None` for non-positive volume.
pub(crate) fn p1_gradients<T: Real>(p: &[Vec3<T>; 4]) -> Option<([Vec3<T>; 4], T)> {
    let e1 = sub(p[1], p[0]);
    let e2 = sub(p[2], p[0]);
    let e3 = sub(p[3], p[0]);
    let c23 = cross(e2, e3);
    let det = dot(e1, c23);
    if !(det > T::zero()) {
        return None;
    }
    let inv = T::one() / det;
    let g1 = scale(c23, inv);
    let g2 = scale(cross(e3, e1), inv);
    let g3 = scale(cross(e1, e2), inv);
    let g0 = [
        -(g1[0] + g2[0] + g3[0]),
        -(g1[1] + g2[1] + g3[1]),
        -(g1[2] + g2[2] + g3[2]),
    ];
    Some(([g0, g1, g2, g3], det / T::of(6.0)))
}

/// Element matrix `σ · vol · (∇φᵢ · ∇φⱼ)` for corner positions in meters.
pub fn element_stiffness<T: Real>(coords: &[Vec3<T>; 4], sigma: T) -> Option<[[T; 4]; 4]> {
    let (g, vol) = p1_gradients(coords)?;
    let w = sigma * vol;
    let mut k = [[T::zero(); 4]; 4];
    for i in 0..4 {
        for j in i..4 {
            let v = w * dot(g[i], g[j]);
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    Some(k)
}

/// Corner positions of element `k` converted to meters.
pub(crate) fn points_m<T: Real>(m: &Mesh<T>, tet: &[usize; 4]) -> [Vec3<T>; 4] {
    let mm = T::mm();
    tet.map(|i| scale(m.nodes()[i].pos, mm))
}

/// Global stiffness matrix, load vector and Dirichlet set.
#[derive(Clone, Debug)]
pub struct LinearSystem<T> {
    pub matrix: CsrMatrix<T>,
    /// Nodal current injections in amperes.
    pub rhs: Vec<T>,
    /// `true` for nodes pinned to 0 V.
    pub constrained: Vec<bool>,
}

impl<T: Real> LinearSystem<T> {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn constrained_count(&self) -> usize {
        self.constrained.iter().filter(|&&c| c).count()
    }
}

const ASSEMBLY_CHUNK: usize = 1 << 15;

/// Scatter-adds element matrices into the node-adjacency pattern. The load
/// vector is zero. Element matrices are computed in parallel per chunk and
/// added in element order, so the result does not depend on thread count.
pub fn assemble<T: Real>(
    m: &Mesh<T>,
    c: &ConductivityField<T>,
) -> Result<LinearSystem<T>, FemError> {
    if c.len() != m.element_count() {
        return Err(FemError::Length {
            expected: m.element_count(),
            got: c.len(),
        });
    }
    let tets = m.tet_indices()?;
    let n = m.node_count();

    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in &tets {
        for &a in t {
            rows[a].extend_from_slice(t);
        }
    }
    let mut matrix = CsrMatrix::from_pattern(rows);

    let sigma = c.values();
    for (chunk_no, chunk) in tets.chunks(ASSEMBLY_CHUNK).enumerate() {
        let base = chunk_no * ASSEMBLY_CHUNK;
        let local: Vec<Result<[[T; 4]; 4], FemError>> = chunk
            .par_iter()
            .enumerate()
            .map(|(i, t)| {
                element_stiffness(&points_m(m, t), sigma[base + i]).ok_or(FemError::Degenerate {
                    element: m.elements()[base + i].id,
                })
            })
            .collect();
        for (t, ke) in chunk.iter().zip(local) {
            let ke = ke?;
            for (a, row) in t.iter().zip(&ke) {
                for (b, &v) in t.iter().zip(row) {
                    matrix.add(*a, *b, v);
                }
            }
        }
    }

    Ok(LinearSystem {
        matrix,
        rhs: vec![T::zero(); n],
        constrained: vec![false; n],
    })
}

/// Uniform inward current over an electrode patch.
#[derive(Clone, Debug)]
pub struct NeumannLoad<T> {
    pub patch: FaceSet<T>,
    /// Total current in milliamperes.
    pub total_current_ma: T,
    /// Normal current density in A/m².
    pub jn: T,
}

impl<T: Real> NeumannLoad<T> {
    pub fn new(patch: FaceSet<T>, total_current_ma: T) -> Result<Self, FemError> {
        let area = patch.area() * T::mm() * T::mm();
        if !(area > T::zero()) {
            return Err(FemError::ZeroArea);
        }
        let jn = total_current_ma * T::mm() / area;
        Ok(Self {
            patch,
            total_current_ma,
            jn,
        })
    }

    /// Total current in amperes.
    pub fn current(&self) -> T {
        self.total_current_ma * T::mm()
    }
}

/// Adds the consistent P1 surface load: every face contributes
/// `jn · area / 3` to each of its nodes. Grounded nodes are left at zero.
pub fn apply_neumann<T: Real>(
    sys: &mut LinearSystem<T>,
    m: &Mesh<T>,
    load: &NeumannLoad<T>,
) -> Result<(), FemError> {
    let third = T::one() / T::of(3.0);
    let area_scale = T::mm() * T::mm();
    for f in &load.patch.faces {
        let share = load.jn * f.area * area_scale * third;
        for &id in &f.nodes {
            let i = m.node_index(id).ok_or(FemError::UnknownNode(id))?;
            if !sys.constrained[i] {
                sys.rhs[i] = sys.rhs[i] + share;
            }
        }
    }
    Ok(())
}

/// Pins every node of `ground` to 0 V by symmetric elimination.
pub fn apply_dirichlet<T: Real>(
    sys: &mut LinearSystem<T>,
    m: &Mesh<T>,
    ground: &FaceSet<T>,
) -> Result<(), FemError> {
    if ground.is_empty() {
        return Err(FemError::EmptyGround);
    }
    let nodes = ground
        .node_ids()
        .into_iter()
        .map(|id| m.node_index(id).ok_or(FemError::UnknownNode(id)))
        .collect::<Result<Vec<_>, _>>()?;
    constrain_nodes(sys, &nodes);
    Ok(())
}

/// Pins the given node indices to 0 V.
pub fn constrain_nodes<T: Real>(sys: &mut LinearSystem<T>, nodes: &[usize]) {
    for &i in nodes {
        sys.constrained[i] = true;
    }
    for &i in nodes {
        let neighbours: Vec<usize> = sys.matrix.row(i).map(|(j, _)| j).collect();
        for j in neighbours {
            if j != i {
                sys.matrix.set(j, i, T::zero());
            }
        }
        let (cols, vals) = sys.matrix.row_mut(i);
        for (j, v) in cols.iter().zip(vals.iter_mut()) {
            *v = if *j == i { T::one() } else { T::zero() };
        }
        sys.rhs[i] = T::zero();
    }
}
