//! Quasi-static volume-conductor simulation on labeled tetrahedral meshes.
//!
//! The pipeline solves `div(σ grad V) = 0` with linear tetrahedral finite
//! elements: a uniform normal current density on the anode patch, 0 V on
//! the cathode patch, and insulating conditions on every other boundary
//! face. Element-constant current densities are then summarised per region.
//!
//! The numerical modules are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases. Scenario orchestration
//! runs in `f64`.

pub mod fem;
pub mod materials;
pub mod mesh;
pub mod phantom;
pub mod post;
pub mod scalar;
pub mod scenario;
pub mod solver;

use std::io;
use std::path::Path;

pub use scalar::Real;

pub type Mesh64 = mesh::Mesh<f64>;
pub type Mesh32 = mesh::Mesh<f32>;
pub type FaceSet64 = mesh::FaceSet<f64>;
pub type FaceSet32 = mesh::FaceSet<f32>;
pub type MaterialTable64 = materials::MaterialTable<f64>;
pub type MaterialTable32 = materials::MaterialTable<f32>;
pub type ConductivityField64 = materials::ConductivityField<f64>;
pub type ConductivityField32 = materials::ConductivityField<f32>;
pub type LinearSystem64 = fem::LinearSystem<f64>;
pub type LinearSystem32 = fem::LinearSystem<f32>;
pub type SolveResult64 = solver::SolveResult<f64>;
pub type SolveResult32 = solver::SolveResult<f32>;
pub type FieldSolution64 = post::FieldSolution<f64>;
pub type FieldSolution32 = post::FieldSolution<f32>;
pub type RegionReport64 = post::RegionReport<f64>;
pub type Phantom64 = phantom::Phantom<f64>;
pub type Phantom32 = phantom::Phantom<f32>;

/// Writes `bytes` to a temporary sibling of `path`, then renames it over
/// `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}
