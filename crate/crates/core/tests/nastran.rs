use std::collections::BTreeMap;

use proptest::prelude::*;
use vcond::mesh::{parse_nastran, write_nastran, Element, Mesh, MeshError, Node};
use vcond::phantom::{make_head_phantom, HeadPhantomSpec};

#[test]
fn write_parse_round_trip_head_phantom() {
    let m = make_head_phantom::<f64>(&HeadPhantomSpec::coarse())
        .unwrap()
        .mesh;
    let back = parse_nastran::<f64>(&write_nastran(&m)).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.region_id("inner tissue"), m.region_id("Inner tissue"));
}

#[test]
fn missing_grid_is_reported() {
    let text = "GRID,1,,0.,0.,0.\nGRID,2,,1.,0.,0.\nGRID,3,,0.,1.,0.\nCTETRA,9,1,1,2,3,4\n";
    match parse_nastran::<f64>(text) {
        Err(MeshError::MissingGrid { element, node }) => assert_eq!((element, node), (9, 4)),
        other => panic!("expected a missing grid error, got {other:?}"),
    }
}

fn arb_mesh() -> impl Strategy<Value = Mesh<f64>> {
    (1usize..6, prop::collection::vec(-1.0e4f64..1.0e4, 12..60)).prop_map(|(tets, coords)| {
        let mut nodes = Vec::new();
        let mut elements = Vec::new();
        for t in 0..tets {
            let base = (t * 4) as u64 + 1;
            let o = coords[(t * 3) % coords.len()];
            let h = 1.0 + coords[(t * 3 + 1) % coords.len()].abs();
            let corners = [[o, o, o], [o + h, o, o], [o, o + h, o], [o, o, o + h]];
            for (k, pos) in corners.iter().enumerate() {
                nodes.push(Node {
                    id: base + k as u64,
                    pos: *pos,
                });
            }
            elements.push(Element {
                id: 100 + t as u64,
                nodes: [base, base + 1, base + 2, base + 3],
                region: (t % 3) as u32 + 1,
            });
        }
        let names = BTreeMap::from([
            (1, "Skin".to_string()),
            (2, "Brain and spinal cord".to_string()),
            (3, "3".to_string()),
        ]);
        Mesh::new(nodes, elements, names)
    })
}

proptest! {
    #[test]
    fn round_trip_preserves_connectivity_and_coordinates(m in arb_mesh()) {
        let back = parse_nastran::<f64>(&write_nastran(&m)).unwrap();
        prop_assert_eq!(back.elements(), m.elements());
        prop_assert_eq!(back.region_names(), m.region_names());
        for (a, b) in back.nodes().iter().zip(m.nodes()) {
            prop_assert_eq!(a.id, b.id);
            for k in 0..3 {
                let scale = b.pos[k].abs().max(1.0);
                prop_assert!((a.pos[k] - b.pos[k]).abs() <= 1e-9 * scale);
            }
        }
    }
}
