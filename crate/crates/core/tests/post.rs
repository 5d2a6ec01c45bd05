use proptest::prelude::*;
use vcond::fem::{apply_dirichlet, apply_neumann, assemble, NeumannLoad};
use vcond::materials::{assign, MaterialTable};
use vcond::mesh::{Element, Mesh};
use vcond::phantom::{make_head_phantom, make_slab, HeadPhantomSpec, SlabSpec};
use vcond::post::{electrode_flux, export_vtk, region_stats, FieldSolution};
use vcond::solver::{solve_pcg, SolveSettings};
use vtkio::model::{Attribute, CellType, DataSet, Piece, VertexNumbers};

fn solved_coarse_head() -> (Mesh<f64>, FieldSolution<f64>) {
    let p = make_head_phantom::<f64>(&HeadPhantomSpec::coarse()).unwrap();
    let c = assign(&p.mesh, &MaterialTable::default_table(), &p.conductivities).unwrap();
    let mut sys = assemble(&p.mesh, &c).unwrap();
    apply_neumann(
        &mut sys,
        &p.mesh,
        &NeumannLoad::new(p.patches["bridge_left"].clone(), 2.0).unwrap(),
    )
    .unwrap();
    apply_dirichlet(&mut sys, &p.mesh, &p.patches["neck"]).unwrap();
    let v = solve_pcg(&sys, &SolveSettings::default())
        .unwrap()
        .potential;
    let sol = FieldSolution::compute(&p.mesh, &c, v).unwrap();
    (p.mesh, sol)
}

#[test]
fn vtk_rereads_with_independent_parser() {
    let (m, sol) = solved_coarse_head();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("head.vtk");
    export_vtk(&m, &sol, 0.4, &path).unwrap();
    let vtk = vtkio::Vtk::import(&path).unwrap();
    let DataSet::UnstructuredGrid { pieces, .. } = vtk.data else {
        panic!("not an unstructured grid");
    };
    let Piece::Inline(piece) = &pieces[0] else {
        panic!("expected inline piece");
    };
    assert_eq!(piece.num_points(), m.node_count());
    assert_eq!(piece.cells.types.len(), m.element_count());
    assert!(piece.cells.types.iter().all(|t| *t == CellType::Tetra));
    let VertexNumbers::Legacy {
        num_cells,
        vertices,
    } = &piece.cells.cell_verts
    else {
        panic!("expected legacy cell list");
    };
    assert_eq!(*num_cells as usize, m.element_count());
    let tets = m.tet_indices().unwrap();
    assert_eq!(
        &vertices[..5],
        &[
            4,
            tets[0][0] as u32,
            tets[0][1] as u32,
            tets[0][2] as u32,
            tets[0][3] as u32
        ]
    );

    let named = |attrs: &[Attribute], name: &str| -> Vec<f64> {
        attrs
            .iter()
            .find_map(|a| match a {
                Attribute::DataArray(d) if d.name == name => d.data.clone().cast_into::<f64>(),
                _ => None,
            })
            .unwrap_or_else(|| panic!("no attribute {name}"))
    };
    let raw = named(&piece.data.cell, "j_mag");
    let capped = named(&piece.data.cell, "j_mag_capped");
    assert_eq!(raw.len(), m.element_count());
    for ((r, c), j) in raw.iter().zip(&capped).zip(&sol.j_mag) {
        assert!((r - j).abs() <= 1e-8 * j.abs().max(1e-300));
        assert!((c - j.min(0.4)).abs() <= 1e-8 * j.min(0.4).abs().max(1e-300));
    }
    let pot = named(&piece.data.point, "potential");
    assert_eq!(pot.len(), m.node_count());
    let regions = named(&piece.data.cell, "region");
    assert!(regions
        .iter()
        .zip(m.elements())
        .all(|(r, e)| *r as u32 == e.region));
}

#[test]
fn uniform_slab_fluxes() {
    // 2 mA through a 10 x 10 mm cross-section: J = 20 A/m²
    let spec = SlabSpec::uniform(20.0, 10.0, 10.0, 2.5, "Skin", 0.465);
    let p = make_slab::<f64>(&spec).unwrap();
    let c = assign(&p.mesh, &MaterialTable::default_table(), &p.conductivities).unwrap();
    let mut sys = assemble(&p.mesh, &c).unwrap();
    apply_neumann(
        &mut sys,
        &p.mesh,
        &NeumannLoad::new(p.patches["inlet"].clone(), 2.0).unwrap(),
    )
    .unwrap();
    apply_dirichlet(&mut sys, &p.mesh, &p.patches["outlet"]).unwrap();
    let v = solve_pcg(&sys, &SolveSettings::with_tolerance(1e-12))
        .unwrap()
        .potential;
    let sol = FieldSolution::compute(&p.mesh, &c, v).unwrap();
    let i = 2e-3;
    let inlet = electrode_flux(&sol, &p.patches["inlet"]);
    let outlet = electrode_flux(&sol, &p.patches["outlet"]);
    assert!((inlet + i).abs() <= 0.005 * i, "inlet {inlet}");
    assert!((outlet - i).abs() <= 0.005 * i, "outlet {outlet}");
    let wall = p
        .boundary
        .difference(&p.patches["inlet"])
        .difference(&p.patches["outlet"]);
    assert!(electrode_flux(&sol, &wall).abs() < 0.005 * i);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn region_stats_ignore_element_order(seed in any::<u64>()) {
        let (m, sol) = solved_coarse_head();
        let n = m.element_count();
        // Fisher-Yates with a small LCG
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed | 1;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let elements: Vec<Element> = perm.iter().map(|&k| m.elements()[k]).collect();
        let shuffled = Mesh::new(m.nodes().to_vec(), elements, m.region_names().clone());
        let pick = |v: &Vec<f64>| perm.iter().map(|&k| v[k]).collect::<Vec<_>>();
        let sol2 = FieldSolution {
            potential: sol.potential.clone(),
            e_field: perm.iter().map(|&k| sol.e_field[k]).collect(),
            j_field: perm.iter().map(|&k| sol.j_field[k]).collect(),
            j_mag: pick(&sol.j_mag),
        };
        for region in ["Skin", "Nerve_left", "Nerve_right", "Inner tissue", "Skeleton"] {
            let a = region_stats(&m, &sol, region).unwrap();
            let b = region_stats(&shuffled, &sol2, region).unwrap();
            prop_assert_eq!(a.max_j, b.max_j);
            prop_assert_eq!(a.argmax_element, b.argmax_element);
            prop_assert_eq!(a.argmax, b.argmax);
            prop_assert!((a.mean_j - b.mean_j).abs() <= 1e-12 * a.mean_j.abs());
            prop_assert!((a.volume - b.volume).abs() <= 1e-9 * a.volume);
        }
    }
}
