use std::io::{self, Write};
use std::path::Path;

use super::{fmt_sig, FieldSolution, PostError};
use crate::mesh::Mesh;
use crate::scalar::Real;

const VTK_TETRA: u8 = 10;

/// Legacy ASCII unstructured grid with cell scalars `j_mag`, `j_mag_capped`
/// (`min(|J|, cap)`) and `region`, cell vectors `current_density` and point
/// scalar `potential`. Points are in mm.
pub fn write_vtk<T: Real, W: Write>(
    out: &mut W,
    m: &Mesh<T>,
    sol: &FieldSolution<T>,
    cap: T,
) -> Result<(), PostError> {
    let tets = m.tet_indices()?;
    let n = m.node_count();
    let c = m.element_count();
    let mut w = io::BufWriter::new(out);

    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "volume conductor current density")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {n} double")?;
    for node in m.nodes() {
        let [x, y, z] = node.pos;
        writeln!(w, "{} {} {}", fmt_sig(x), fmt_sig(y), fmt_sig(z))?;
    }
    writeln!(w, "CELLS {c} {}", 5 * c)?;
    for [a, b, cc, d] in &tets {
        writeln!(w, "4 {a} {b} {cc} {d}")?;
    }
    writeln!(w, "CELL_TYPES {c}")?;
    for _ in 0..c {
        writeln!(w, "{VTK_TETRA}")?;
    }

    writeln!(w, "CELL_DATA {c}")?;
    writeln!(w, "SCALARS j_mag double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for &j in &sol.j_mag {
        writeln!(w, "{}", fmt_sig(j))?;
    }
    writeln!(w, "SCALARS j_mag_capped double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for &j in &sol.j_mag {
        writeln!(w, "{}", fmt_sig(j.min(cap)))?;
    }
    writeln!(w, "SCALARS region int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for e in m.elements() {
        writeln!(w, "{}", e.region)?;
    }
    writeln!(w, "VECTORS current_density double")?;
    for j in &sol.j_field {
        writeln!(w, "{} {} {}", fmt_sig(j[0]), fmt_sig(j[1]), fmt_sig(j[2]))?;
    }

    writeln!(w, "POINT_DATA {n}")?;
    writeln!(w, "SCALARS potential double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for &v in &sol.potential {
        writeln!(w, "{}", fmt_sig(v))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the VTK file via a temporary sibling and a rename.
pub fn export_vtk<T: Real>(
    m: &Mesh<T>,
    sol: &FieldSolution<T>,
    cap: T,
    path: &Path,
) -> Result<(), PostError> {
    let mut buf = Vec::new();
    write_vtk(&mut buf, m, sol, cap)?;
    crate::write_atomic(path, &buf)?;
    Ok(())
}
