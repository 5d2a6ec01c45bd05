use std::path::Path;

use vcond::mesh::write_nastran;
use vcond::phantom::{make_head_phantom, HeadPhantomSpec};
use vcond::scenario::{
    compare_reports, outcome_json, parse_config, run_scenario, simulate, Scenario, ScenarioError,
    Stage,
};

fn head_scenario(label: &str, anode: &str, cathode: &str, extra: &str) -> Scenario {
    let text = format!(
        r#"{{"scenarios": [{{
            "label": "{label}",
            "mesh": {{"phantom": {{"head": {{"size": [100, 120, 120], "pitch": 10, "skin_thickness": 10,
                "skeleton_thickness": 10, "nerve_offset": 15, "nerve_height": 15, "nerve_depth": [0, 30],
                "bridge_height": 10, "neck_height": -40, "cheek_depth": 30}}}}}},
            "electrodes": [
                {{"name": "a", "role": "anode", "patch": "{anode}" {extra}}},
                {{"name": "c", "role": "cathode", "patch": "{cathode}"}}
            ],
            "report_regions": ["Nerve_left", "Nerve_right", "Skin"]
        }}]}}"#
    );
    parse_config(&text, Path::new(".")).unwrap().remove(0)
}

#[test]
fn zero_current_gives_zero_reports() {
    let s = head_scenario("off", "bridge_left", "neck", r#", "current_mA": 0"#);
    let out = run_scenario(&s).unwrap();
    assert_eq!(out.injected_current, 0.0);
    for r in &out.reports {
        assert_eq!(r.max_j, 0.0);
        assert_eq!(r.mean_j, 0.0);
    }
    assert!(out.conservation_ok);
}

#[test]
fn coarse_pipeline_balances_current() {
    let s = head_scenario("left", "bridge_left", "neck", "");
    let out = run_scenario(&s).unwrap();
    assert!(out.conservation_ok, "{}", out.conservation_error);
    assert!(out.conservation_error < 1e-6);
    let anode = &out.electrodes[0];
    assert!((anode.nodal_flux + 2e-3).abs() < 1e-9);
    assert!(out.insulated_nodal_flux.abs() < 1e-9);
    assert_eq!(out.reports.len(), 3);
    assert!(out.notes.iter().any(|n| n.contains("centroid")));
    // JSON output round-trips
    let back: vcond::scenario::ScenarioOutcome = serde_json::from_str(&outcome_json(&out)).unwrap();
    assert_eq!(back, out);
}

#[test]
fn mirrored_runs_compare_reciprocally() {
    let left = run_scenario(&head_scenario("left", "bridge_left", "neck", "")).unwrap();
    let right = run_scenario(&head_scenario("right", "bridge_right", "neck", "")).unwrap();
    let cmp = compare_reports(&[
        (left.label.clone(), left.reports.clone()),
        (right.label.clone(), right.reports.clone()),
    ])
    .unwrap();
    let r = &cmp.laterality[0].ratios;
    assert!((r[0].unwrap() * r[1].unwrap() - 1.0).abs() < 1e-9);
    assert!(r[0].unwrap() > 1.0);

    let again = run_scenario(&head_scenario("left", "bridge_left", "neck", "")).unwrap();
    let same = compare_reports(&[
        (left.label.clone(), left.reports.clone()),
        ("again".into(), again.reports),
    ])
    .unwrap();
    assert_eq!(same.max_j[0], same.max_j[1]);
}

#[test]
fn nastran_source_with_box_electrodes() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = make_head_phantom::<f64>(&HeadPhantomSpec::coarse())
        .unwrap()
        .mesh;
    // strip names so the region map has to supply them
    let text = write_nastran(&mesh)
        .lines()
        .filter(|l| !l.starts_with("$REGION"))
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(dir.path().join("head.nas"), text).unwrap();
    std::fs::write(
        dir.path().join("names.json"),
        r#"{"1": "Skin", "2": "Skeleton", "3": "Inner tissue", "4": "Nerve_left", "5": "Nerve_right"}"#,
    )
    .unwrap();
    let config = r#"{"scenarios": [{
        "label": "boxes",
        "mesh": {"nastran": "head.nas", "region_map": "names.json"},
        "materials": {"Nerve_left": 0.006, "Nerve_right": 0.006},
        "electrodes": [
            {"name": "bridge", "role": "anode", "box": {"min": [0, 0, 55], "max": [20, 20, 65]}, "current_mA": 1.5},
            {"name": "neck", "role": "cathode", "box": {"min": [-10, -50, -65], "max": [10, -30, -55]}}
        ],
        "outputs": {"csv": "out/boxes.csv", "json": "out/boxes.json", "vtk": "out/boxes.vtk"}
    }]}"#;
    let s = parse_config(config, dir.path()).unwrap().remove(0);
    let out = run_scenario(&s).unwrap();
    assert!(out.conservation_ok);
    assert!((out.injected_current - 1.5e-3).abs() < 1e-15);
    // every region reported when none are listed
    assert_eq!(out.reports.len(), 5);
    let csv = std::fs::read_to_string(dir.path().join("out/boxes.csv")).unwrap();
    assert!(csv.starts_with("region,max_j,argmax_x,argmax_y,argmax_z,mean_j,volume\nSkin,"));
    assert!(dir.path().join("out/boxes.vtk").exists());
    assert!(!dir.path().join("out/boxes.json.tmp").exists());
}

#[test]
fn errors_carry_their_stage() {
    let mut s = head_scenario("e", "bridge_left", "neck", "");
    s.solver.max_iter = Some(2);
    let err = simulate(&s).unwrap_err();
    assert!(err.is_non_convergence(), "{err}");
    assert!(matches!(
        err,
        ScenarioError::Stage {
            stage: Stage::Solve,
            ..
        }
    ));

    let mut s = head_scenario("e", "bridge_left", "neck", "");
    s.report_regions.push("Retina".into());
    match simulate(&s).map(|_| ()) {
        Err(ScenarioError::Config(c)) => assert_eq!(c.pointer, "/report_regions/3"),
        other => panic!("expected config error, got {other:?}"),
    }

    let mut s = head_scenario("e", "bridge_left", "neck", "");
    s.mesh.phantom = None;
    s.mesh.nastran = Some("/nonexistent/head.nas".into());
    let err = simulate(&s).unwrap_err();
    assert!(
        matches!(
            err,
            ScenarioError::Stage {
                stage: Stage::Mesh,
                ..
            }
        ),
        "{err}"
    );
    assert!(!err.is_non_convergence());

    let mut s = head_scenario("e", "bridge_left", "neck", "");
    s.electrodes[0].patch = Some("forehead".into());
    let err = simulate(&s).unwrap_err();
    assert!(
        matches!(
            err,
            ScenarioError::Stage {
                stage: Stage::Electrodes,
                ..
            }
        ),
        "{err}"
    );
}

#[test]
fn overlapping_electrodes_fail_the_gate() {
    let s = head_scenario("clash", "bridge_left", "bridge_left", "");
    let out = simulate(&s).unwrap().outcome(&s.report_regions).unwrap();
    assert!(!out.conservation_ok);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let s = head_scenario("t", "bridge_right", "cheek_right", "");
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| outcome_json(&run_scenario(&s).unwrap()))
    };
    assert_eq!(run(1), run(4));
}
