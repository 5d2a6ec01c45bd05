//! Independent oracles used by the acceptance suite: analytic slab
//! profiles, a dense direct solve, NASTRAN encoders written without the
//! crate's own writer, and canned scenarios.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use vcond::fem::LinearSystem;
use vcond::mesh::{Element, Mesh, Node};
use vcond::phantom::{make_head_phantom, HeadPhantomSpec, PhantomSpec, SlabSpec};
use vcond::scenario::{parse_config, Scenario};

/// Potential (V) at `x` mm in a slab of conductivities `layers`
/// (`(thickness mm, σ)` from the inlet) carrying `current_ma` through
/// `area_mm2`, with the far face grounded.
pub fn slab_potential(layers: &[(f64, f64)], current_ma: f64, area_mm2: f64, x: f64) -> f64 {
    let j = current_ma * 1e-3 / (area_mm2 * 1e-6);
    let mut start = 0.0;
    let mut v = 0.0;
    for &(t, sigma) in layers {
        let end = start + t;
        v += j * (end - x.max(start)).clamp(0.0, t) * 1e-3 / sigma;
        start = end;
    }
    v
}

/// Solves the system with a dense LU factorization.
pub fn dense_solve(sys: &LinearSystem<f64>) -> Vec<f64> {
    let n = sys.dim();
    let rows = sys.matrix.to_dense();
    let k = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(&sys.rhs);
    k.lu()
        .solve(&b)
        .expect("singular system")
        .iter()
        .copied()
        .collect()
}

/// `‖a − b‖∞ / ‖b‖∞`.
pub fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = b.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    diff / scale
}

fn f8(s: &str) -> String {
    assert!(s.len() <= 8, "{s:?} does not fit a small field");
    format!("{s:>8}")
}

/// Shortest decimal text of `v` within eight columns, switching to the
/// implicit-exponent form (`1.25+2`) when needed.
pub fn small_real(v: f64) -> String {
    let plain = format!("{v:?}");
    if plain.len() <= 8 {
        return plain;
    }
    let e = format!("{v:e}");
    let (mant, exp) = e.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let mant = if mant.contains('.') {
        mant.to_string()
    } else {
        format!("{mant}.")
    };
    let s = format!("{mant}{}{}", if exp < 0 { '-' } else { '+' }, exp.abs());
    assert!(s.len() <= 8, "{v} needs more than 8 columns");
    s
}

/// Small-field bulk data. Every third CTETRA carries a continuation
/// marker in columns 73-80 followed by a blank continuation card.
pub fn fixed_encoding(m: &Mesh<f64>) -> String {
    let mut s = String::from("$ fixed-field encoding\nBEGIN BULK\n");
    for (pid, name) in m.region_names() {
        s.push_str(&format!("$REGION {pid} {name}\n"));
        s.push_str(&format!(
            "PSOLID  {}{}\n",
            f8(&pid.to_string()),
            f8(&pid.to_string())
        ));
    }
    for n in m.nodes() {
        s.push_str(&format!(
            "GRID    {}{}{}{}{}\n",
            f8(&n.id.to_string()),
            f8(""),
            f8(&small_real(n.pos[0])),
            f8(&small_real(n.pos[1])),
            f8(&small_real(n.pos[2])),
        ));
    }
    for (k, e) in m.elements().iter().enumerate() {
        let ids = e.nodes.map(|g| f8(&g.to_string())).concat();
        let head = format!(
            "CTETRA  {}{}{ids}",
            f8(&e.id.to_string()),
            f8(&e.region.to_string())
        );
        if k % 3 == 0 {
            s.push_str(&format!(
                "{head}{}+C{k:<6}\n+C{k:<6}{}\n",
                " ".repeat(16),
                " ".repeat(32)
            ));
        } else {
            s.push_str(&head);
            s.push('\n');
        }
    }
    s.push_str("ENDDATA\n");
    s
}

/// Comma-separated bulk data mixing real formats, with empty midside
/// fields on a continuation.
pub fn free_encoding(m: &Mesh<f64>) -> String {
    let mut s = String::from("BEGIN BULK\n");
    for (pid, name) in m.region_names() {
        s.push_str(&format!("$REGION {pid} {name}\nPSOLID, {pid}, {pid}\n"));
    }
    for n in m.nodes() {
        let [x, y, z] = n.pos;
        s.push_str(&format!("GRID,{},0,{x:e},{y:?},{}\n", n.id, small_real(z)));
    }
    for e in m.elements() {
        let [a, b, c, d] = e.nodes;
        s.push_str(&format!(
            "CTETRA,{},{},{a},{b},{c},{d},,,+E\n+E,,,,\n",
            e.id, e.region
        ));
    }
    s.push_str("ENDDATA\n");
    s
}

/// First 1,000 elements of the coarse head phantom with sparse ids, nodes
/// listed in reverse and coordinates moved onto a 1/8 mm lattice.
pub fn thousand_element_mesh() -> Mesh<f64> {
    let m = make_head_phantom::<f64>(&HeadPhantomSpec::coarse())
        .unwrap()
        .mesh;
    let elements: Vec<Element> = m.elements()[..1000]
        .iter()
        .map(|e| Element {
            id: e.id * 7 + 3,
            nodes: e.nodes.map(|g| g * 11 + 5),
            region: e.region,
        })
        .collect();
    let used: BTreeSet<u64> = elements.iter().flat_map(|e| e.nodes).collect();
    let nodes: Vec<Node<f64>> = m
        .nodes()
        .iter()
        .rev()
        .filter(|n| used.contains(&(n.id * 11 + 5)))
        .map(|n| Node {
            id: n.id * 11 + 5,
            pos: n.pos.map(|c| c + ((n.id % 5) as f64) * 0.125),
        })
        .collect();
    Mesh::new(nodes, elements, m.region_names().clone())
}

/// 80 mm cube at 2.5 mm pitch: 196,608 elements.
pub fn scale_phantom() -> HeadPhantomSpec {
    HeadPhantomSpec {
        size: [80.0, 80.0, 80.0],
        pitch: 2.5,
        skin_thickness: 2.5,
        skeleton_thickness: 5.0,
        nerve_offset: 12.5,
        nerve_half_width: 5.0,
        nerve_height: 10.0,
        nerve_depth: [-20.0, 20.0],
        electrode_size: [15.0, 15.0],
        bridge_height: 15.0,
        bridge_offset: 10.0,
        neck_height: -20.0,
        cheek_height: 0.0,
        cheek_depth: 20.0,
    }
}

/// Two-electrode scenario on a phantom patch pair.
pub fn phantom_scenario(
    label: &str,
    phantom: &PhantomSpec,
    anode: &str,
    cathode: &str,
    current_ma: f64,
) -> Scenario {
    let text = format!(
        r#"{{"scenarios": [{{
            "label": "{label}",
            "mesh": {{"phantom": {}}},
            "electrodes": [
                {{"name": "{anode}", "role": "anode", "patch": "{anode}", "current_mA": {current_ma:?}}},
                {{"name": "{cathode}", "role": "cathode", "patch": "{cathode}"}}
            ]
        }}]}}"#,
        serde_json::to_string(phantom).unwrap()
    );
    parse_config(&text, Path::new(".")).unwrap().remove(0)
}

pub fn slab_scenario(label: &str, spec: &SlabSpec, current_ma: f64) -> Scenario {
    phantom_scenario(
        label,
        &PhantomSpec::Slab(spec.clone()),
        "inlet",
        "outlet",
        current_ma,
    )
}

pub fn head_scenario(
    label: &str,
    spec: &HeadPhantomSpec,
    anode: &str,
    cathode: &str,
    current_ma: f64,
) -> Scenario {
    phantom_scenario(
        label,
        &PhantomSpec::Head(spec.clone()),
        anode,
        cathode,
        current_ma,
    )
}
