//! Field recovery and reporting: element-constant E and J, per-region
//! maxima, electrode fluxes and VTK export.
//!
//! Maxima are reported at element centroids because the P1 gradient is
//! constant on each tetrahedron.

mod vtk;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{element_stiffness, p1_gradients, points_m};
use crate::materials::ConductivityField;
use crate::mesh::{FaceSet, Mesh, MeshError};
use crate::scalar::{dot, norm, scale, Real, Vec3};

pub use vtk::{export_vtk, write_vtk};

#[derive(Debug, Error)]
pub enum PostError {
    #[error("potential has {got} values for {expected} nodes")]
    Length { expected: usize, got: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("element {0}: non-positive volume")]
    Degenerate(u64),
    #[error("region {0:?} has no elements")]
    EmptyRegion(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `E = −∇V` per element in V/m (coordinates converted from mm).
pub fn element_gradient<T: Real>(m: &Mesh<T>, potential: &[T]) -> Result<Vec<Vec3<T>>, PostError> {
    if potential.len() != m.node_count() {
        return Err(PostError::Length {
            expected: m.node_count(),
            got: potential.len(),
        });
    }
    let tets = m.tet_indices()?;
    tets.iter()
        .zip(m.elements())
        .map(|(t, e)| {
            let (g, _) = p1_gradients(&points_m(m, t)).ok_or(PostError::Degenerate(e.id))?;
            let mut grad = [T::zero(); 3];
            for (gi, &node) in g.iter().zip(t) {
                for k in 0..3 {
                    grad[k] = grad[k] + gi[k] * potential[node];
                }
            }
            Ok(scale(grad, -T::one()))
        })
        .collect()
}

/// `J = σE` per element and its Euclidean norm.
pub fn current_density<T: Real>(
    c: &ConductivityField<T>,
    e_field: &[Vec3<T>],
) -> (Vec<Vec3<T>>, Vec<T>) {
    assert_eq!(c.len(), e_field.len(), "conductivity/field length mismatch");
    let j: Vec<Vec3<T>> = c
        .values()
        .iter()
        .zip(e_field)
        .map(|(&s, &e)| scale(e, s))
        .collect();
    let mag = j.iter().map(|&v| norm(v)).collect();
    (j, mag)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldSolution<T> {
    /// Volts per node.
    pub potential: Vec<T>,
    /// V/m per element.
    pub e_field: Vec<Vec3<T>>,
    /// A/m² per element.
    pub j_field: Vec<Vec3<T>>,
    pub j_mag: Vec<T>,
}

impl<T: Real> FieldSolution<T> {
    pub fn compute(
        m: &Mesh<T>,
        c: &ConductivityField<T>,
        potential: Vec<T>,
    ) -> Result<Self, PostError> {
        let e_field = element_gradient(m, &potential)?;
        let (j_field, j_mag) = current_density(c, &e_field);
        Ok(Self {
            potential,
            e_field,
            j_field,
            j_mag,
        })
    }
}

/// Current-density summary for one region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionReport<T> {
    pub region: String,
    /// A/m².
    pub max_j: T,
    /// Centroid (mm) of the element holding the maximum.
    pub argmax: Vec3<T>,
    pub argmax_element: u64,
    /// Volume-weighted mean |J| in A/m².
    pub mean_j: T,
    /// mm³.
    pub volume: T,
}

impl<T: Real> RegionReport<T> {
    pub const CSV_HEADER: &'static str = "region,max_j,argmax_x,argmax_y,argmax_z,mean_j,volume";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.region,
            fmt_sig(self.max_j),
            fmt_sig(self.argmax[0]),
            fmt_sig(self.argmax[1]),
            fmt_sig(self.argmax[2]),
            fmt_sig(self.mean_j),
            fmt_sig(self.volume)
        )
    }
}

/// Fixed nine-significant-digit scientific formatting.
pub fn fmt_sig<T: Real>(v: T) -> String {
    let v = v.as_f64();
    // normalise -0 so output does not depend on sign of zero
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.8e}")
}

pub fn reports_csv<T: Real>(reports: &[RegionReport<T>]) -> String {
    let mut s = String::from(RegionReport::<T>::CSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Max/mean |J| over the elements of `region`. Ties go to the lowest
/// element id.
pub fn region_stats<T: Real>(
    m: &Mesh<T>,
    sol: &FieldSolution<T>,
    region: &str,
) -> Result<RegionReport<T>, PostError> {
    let id = m
        .region_id(region)
        .ok_or_else(|| MeshError::UnknownRegion(region.to_string()))?;
    let mut best: Option<(T, u64, usize)> = None;
    let mut volume = T::zero();
    let mut weighted = T::zero();
    for k in m.region_elements(id) {
        let e = &m.elements()[k];
        let j = sol.j_mag[k];
        let vol = m.signed_volume(k);
        volume = volume + vol;
        weighted = weighted + j * vol;
        let better = match best {
            None => true,
            Some((bj, bid, _)) => j > bj || (j == bj && e.id < bid),
        };
        if better {
            best = Some((j, e.id, k));
        }
    }
    let (max_j, argmax_element, k) =
        best.ok_or_else(|| PostError::EmptyRegion(region.to_string()))?;
    let name = m.region_name(id).unwrap_or(region).to_string();
    Ok(RegionReport {
        region: name,
        max_j,
        argmax: m.centroid(k),
        argmax_element,
        mean_j: (weighted / volume).min(max_j),
        volume,
    })
}

/// Net current through `patch` in amperes, positive when leaving the domain.
pub fn electrode_flux<T: Real>(sol: &FieldSolution<T>, patch: &FaceSet<T>) -> T {
    let area_scale = T::mm() * T::mm();
    patch
        .faces
        .iter()
        .map(|f| dot(sol.j_field[f.element_index], f.normal) * f.area * area_scale)
        .sum()
}

/// Consistent nodal boundary current `q = −K·V` in A, assembled element by
/// element from unconstrained element matrices. Positive means current
/// leaving the domain at that node. At free nodes it vanishes up to the
/// solver residual; at a grounded patch it is the reaction current.
pub fn nodal_current<T: Real>(
    m: &Mesh<T>,
    c: &ConductivityField<T>,
    potential: &[T],
) -> Result<Vec<T>, PostError> {
    if potential.len() != m.node_count() {
        return Err(PostError::Length {
            expected: m.node_count(),
            got: potential.len(),
        });
    }
    let tets = m.tet_indices()?;
    let mut q = vec![T::zero(); m.node_count()];
    for ((t, e), &sigma) in tets.iter().zip(m.elements()).zip(c.values()) {
        let ke = element_stiffness(&points_m(m, t), sigma).ok_or(PostError::Degenerate(e.id))?;
        for (a, row) in t.iter().zip(&ke) {
            let kv: T = row.iter().zip(t).map(|(&k, &b)| k * potential[b]).sum();
            q[*a] = q[*a] - kv;
        }
    }
    Ok(q)
}

/// Sum of [`nodal_current`] over the distinct nodes of a patch, A.
pub fn consistent_flux<T: Real>(m: &Mesh<T>, q: &[T], patch: &FaceSet<T>) -> T {
    patch
        .node_ids()
        .into_iter()
        .filter_map(|id| m.node_index(id))
        .map(|i| q[i])
        .sum()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::mesh::tests::{two_tets, unit_tet};
    use crate::mesh::{Element, Node};

    #[test]
    fn linear_potential_gives_constant_field() {
        let m = two_tets();
        // V = x in meters
        let v: Vec<f64> = m.nodes().iter().map(|n| n.pos[0] * 1e-3).collect();
        for e in element_gradient(&m, &v).unwrap() {
            assert!((e[0] + 1.0).abs() < 1e-12 && e[1].abs() < 1e-12 && e[2].abs() < 1e-12);
        }
        let zero = element_gradient(&m, &[3.0; 5]).unwrap();
        assert!(zero.iter().all(|e| e.iter().all(|c| c.abs() < 1e-12)));
        assert!(matches!(
            element_gradient(&m, &[0.0; 4]),
            Err(PostError::Length { .. })
        ));
    }

    #[test]
    fn gradient_matches_edge_differences() {
        // random potentials; the P1 directional derivative along every edge
        // equals the difference quotient of its endpoint values
        let m = two_tets();
        let v = [0.31, -1.7, 2.2, 0.05, 0.9];
        let e = element_gradient(&m, &v).unwrap();
        let tets = m.tet_indices().unwrap();
        for (t, ef) in tets.iter().zip(&e) {
            for a in 0..4 {
                for b in a + 1..4 {
                    let pa = m.nodes()[t[a]].pos.map(|c| c * 1e-3);
                    let pb = m.nodes()[t[b]].pos.map(|c| c * 1e-3);
                    let d = crate::scalar::sub(pb, pa);
                    let fd = v[t[b]] - v[t[a]];
                    let dir = -dot(*ef, d);
                    assert!((dir - fd).abs() < 1e-9, "{dir} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn nodal_current_matches_assembled_product() {
        let m = two_tets();
        let c = ConductivityField::from_values(vec![0.465, 0.02], 2).unwrap();
        let v = [0.3, -1.0, 2.0, 0.5, 1.25];
        let q = nodal_current(&m, &c, &v).unwrap();
        let kv = crate::fem::assemble(&m, &c).unwrap().matrix.mul_vec(&v);
        for (a, b) in q.iter().zip(&kv) {
            assert!((a + b).abs() < 1e-15, "{a} vs {b}");
        }
        assert!(q.iter().sum::<f64>().abs() < 1e-15);
        let flat = nodal_current(&m, &c, &[2.0; 5]).unwrap();
        assert!(flat.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn current_density_scales_with_sigma() {
        let c = ConductivityField::<f64>::from_values(vec![0.465, 0.465], 2).unwrap();
        let (j, mag) = current_density(&c, &[[10.0, 0.0, 0.0], [0.0; 3]]);
        assert!((j[0][0] - 4.65).abs() < 1e-12);
        assert!((mag[0] - 4.65).abs() < 1e-12);
        assert_eq!(mag[1], 0.0);
        let (_, mag2) = current_density(&c.scaled(2.0), &[[10.0, 0.0, 0.0], [0.0; 3]]);
        assert_eq!(mag2[0], 2.0 * mag[0]);
    }

    /// Four congruent tets in one region, uniform field.
    fn uniform_region() -> (Mesh<f64>, FieldSolution<f64>) {
        let base = unit_tet();
        let mut nodes = Vec::new();
        let mut elements = Vec::new();
        for (k, id) in [(0u64, 4u64), (1, 2), (2, 9), (3, 5)] {
            for (i, n) in base.nodes().iter().enumerate() {
                let mut p = n.pos;
                p[0] += 3.0 * k as f64;
                nodes.push(Node {
                    id: 10 * k + i as u64 + 1,
                    pos: p,
                });
            }
            elements.push(Element {
                id,
                nodes: [1, 2, 3, 4].map(|i| 10 * k + i),
                region: 1,
            });
        }
        let m = Mesh::new(nodes, elements, BTreeMap::from([(1, "Nerve".to_string())]));
        let sol = FieldSolution {
            potential: vec![0.0; 16],
            e_field: vec![[1.0, 0.0, 0.0]; 4],
            j_field: vec![[0.5, 0.0, 0.0]; 4],
            j_mag: vec![0.5; 4],
        };
        (m, sol)
    }

    #[test]
    fn uniform_region_ties_break_to_lowest_id() {
        let (m, sol) = uniform_region();
        let r = region_stats(&m, &sol, "nerve").unwrap();
        assert_eq!(r.max_j, 0.5);
        assert_eq!(r.mean_j, 0.5);
        assert_eq!(r.argmax_element, 2);
        assert_eq!(r.argmax, m.centroid(1));
        assert!((r.volume - 4.0 / 6.0).abs() < 1e-12);
        assert!(matches!(
            region_stats(&m, &sol, "Skin"),
            Err(PostError::Mesh(_))
        ));
    }

    #[test]
    fn region_stats_mean_is_volume_weighted() {
        let (m, mut sol) = uniform_region();
        sol.j_mag = vec![1.0, 3.0, 2.0, 2.0];
        let r = region_stats(&m, &sol, "Nerve").unwrap();
        assert_eq!(r.max_j, 3.0);
        assert_eq!(r.argmax_element, 2);
        assert!((r.mean_j - 2.0).abs() < 1e-12);
    }

    #[test]
    fn csv_formatting_is_fixed() {
        let r = RegionReport {
            region: "Nerve_left".into(),
            max_j: 5.4315,
            argmax: [19.22, 1627.0, 72.21],
            argmax_element: 1,
            mean_j: 0.0,
            volume: -0.0,
        };
        assert_eq!(
            r.csv_row(),
            "Nerve_left,5.43150000e0,1.92200000e1,1.62700000e3,7.22100000e1,0.00000000e0,0.00000000e0"
        );
    }
}
