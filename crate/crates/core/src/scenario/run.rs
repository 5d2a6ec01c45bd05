use std::collections::{BTreeMap, BTreeSet};
use std::error::Error as StdError;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ConfigError, ElectrodeSpec, Role, Scenario};
use crate::fem::{self, LinearSystem, NeumannLoad};
use crate::materials::{self, ConductivityField, MaterialTable};
use crate::mesh::{self, FaceSet, Mesh, PatchSelector};
use crate::post::{self, FieldSolution, RegionReport};
use crate::solver::{self, SolveError, SolveResult, SolveSettings};

/// Pipeline stage, attached to errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Mesh,
    Materials,
    Electrodes,
    Assemble,
    Solve,
    Post,
    Export,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Mesh => "mesh",
            Stage::Materials => "materials",
            Stage::Electrodes => "electrodes",
            Stage::Assemble => "assemble",
            Stage::Solve => "solve",
            Stage::Post => "post",
            Stage::Export => "export",
        })
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config {0}")]
    Config(#[from] ConfigError),
    #[error("[{label}] {stage}: {source}")]
    Stage {
        label: String,
        stage: Stage,
        #[source]
        source: Box<dyn StdError + Send + Sync>,
    },
}

impl ScenarioError {
    fn stage(
        label: &str,
        stage: Stage,
    ) -> impl FnOnce(Box<dyn StdError + Send + Sync>) -> Self + '_ {
        move |source| ScenarioError::Stage {
            label: label.to_string(),
            stage,
            source,
        }
    }

    /// True when the solver ran out of iterations.
    pub fn is_non_convergence(&self) -> bool {
        match self {
            ScenarioError::Stage { source, .. } => matches!(
                source.downcast_ref::<SolveError>(),
                Some(SolveError::NotConverged { .. })
            ),
            _ => false,
        }
    }
}

fn boxed<E: StdError + Send + Sync + 'static>(e: E) -> Box<dyn StdError + Send + Sync> {
    Box::new(e)
}

/// An electrode with its resolved boundary patch.
#[derive(Clone, Debug)]
pub struct ResolvedElectrode {
    pub spec: ElectrodeSpec,
    pub patch: FaceSet<f64>,
}

/// Mesh, conductivities and electrode patches of a scenario.
#[derive(Clone, Debug)]
pub struct Setup {
    pub label: String,
    pub mesh: Mesh<f64>,
    pub boundary: FaceSet<f64>,
    pub conductivity: ConductivityField<f64>,
    pub electrodes: Vec<ResolvedElectrode>,
}

impl Setup {
    pub fn new(s: &Scenario) -> Result<Self, ScenarioError> {
        let label = s.label.as_str();
        let (mesh, boundary, patches, defaults) =
            load_mesh(s).map_err(ScenarioError::stage(label, Stage::Mesh))?;
        for (k, r) in s.report_regions.iter().enumerate() {
            if mesh.region_id(r).is_none() {
                return Err(ConfigError::at(
                    format!("/report_regions/{k}"),
                    format!("scenario {label:?}: mesh has no region {r:?}"),
                )
                .into());
            }
        }

        let mut overrides = defaults;
        for (k, &v) in &s.materials {
            overrides.insert(k.clone(), v);
        }
        let conductivity = materials::assign(&mesh, &MaterialTable::default_table(), &overrides)
            .map_err(|e| ScenarioError::stage(label, Stage::Materials)(boxed(e)))?;

        let electrodes = s
            .electrodes
            .iter()
            .map(|e| {
                let patch = match (&e.bbox, &e.patch) {
                    (Some(b), _) => mesh::select_patch(&mesh, &boundary, &PatchSelector::Box(*b)),
                    (None, Some(name)) => match patches.get(name) {
                        Some(p) => Ok(p.clone()),
                        None => mesh::select_patch(
                            &mesh,
                            &boundary,
                            &PatchSelector::Region(name.clone()),
                        ),
                    },
                    (None, None) => Err(mesh::MeshError::EmptySelection),
                };
                patch
                    .map(|patch| ResolvedElectrode {
                        spec: e.clone(),
                        patch,
                    })
                    .map_err(|err| {
                        ScenarioError::stage(label, Stage::Electrodes)(
                            format!("electrode {:?}: {err}", e.name).into(),
                        )
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;

        Ok(Self {
            label: s.label.clone(),
            mesh,
            boundary,
            conductivity,
            electrodes,
        })
    }

    pub fn cathode(&self) -> &ResolvedElectrode {
        self.electrodes
            .iter()
            .find(|e| e.spec.role == Role::Cathode)
            .expect("validated scenario has a cathode")
    }

    pub fn anodes(&self) -> impl Iterator<Item = &ResolvedElectrode> {
        self.electrodes
            .iter()
            .filter(|e| e.spec.role == Role::Anode)
    }

    /// Assembled system with every anode load and the cathode ground.
    pub fn system(&self) -> Result<LinearSystem<f64>, ScenarioError> {
        let fail =
            |e| ScenarioError::stage(&self.label, Stage::Assemble)(boxed::<fem::FemError>(e));
        let mut sys = fem::assemble(&self.mesh, &self.conductivity).map_err(fail)?;
        for a in self.anodes() {
            let load = NeumannLoad::new(a.patch.clone(), a.spec.current()).map_err(fail)?;
            fem::apply_neumann(&mut sys, &self.mesh, &load).map_err(fail)?;
        }
        fem::apply_dirichlet(&mut sys, &self.mesh, &self.cathode().patch).map_err(fail)?;
        Ok(sys)
    }

    pub fn solve(self, settings: &SolveSettings) -> Result<Simulation, ScenarioError> {
        let system = self.system()?;
        let solution = solver::solve_pcg(&system, settings)
            .map_err(|e| ScenarioError::stage(&self.label, Stage::Solve)(boxed(e)))?;
        let field =
            FieldSolution::compute(&self.mesh, &self.conductivity, solution.potential.clone())
                .map_err(|e| ScenarioError::stage(&self.label, Stage::Post)(boxed(e)))?;
        Ok(Simulation {
            setup: self,
            system,
            solution,
            field,
        })
    }
}

type LoadedMesh = (
    Mesh<f64>,
    FaceSet<f64>,
    BTreeMap<String, FaceSet<f64>>,
    BTreeMap<String, f64>,
);

fn load_mesh(s: &Scenario) -> Result<LoadedMesh, Box<dyn StdError + Send + Sync>> {
    if let Some(spec) = &s.mesh.phantom {
        let p = spec.build::<f64>()?;
        return Ok((p.mesh, p.boundary, p.patches, p.conductivities));
    }
    let path = s.mesh.nastran.as_ref().ok_or("mesh source missing")?;
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut m: Mesh<f64> = mesh::parse_nastran(&text)?;
    if let Some(map) = &s.mesh.region_map {
        let text = std::fs::read_to_string(map).map_err(|e| format!("{}: {e}", map.display()))?;
        m.rename_regions(&mesh::read_region_map(&text)?);
    }
    let m = m.canonicalize_orientation()?.checked()?;
    let boundary = mesh::extract_boundary(&m)?;
    Ok((m, boundary, BTreeMap::new(), BTreeMap::new()))
}

/// A solved scenario.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub setup: Setup,
    pub system: LinearSystem<f64>,
    pub solution: SolveResult<f64>,
    pub field: FieldSolution<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeFlux {
    pub name: String,
    pub role: Role,
    /// mm².
    pub area: f64,
    /// Prescribed current in mA (0 for the cathode).
    pub current_ma: f64,
    /// Net outward current in A from owner-element current densities.
    pub flux: f64,
    /// Net outward current in A from the consistent nodal balance.
    pub nodal_flux: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub residual: f64,
}

/// Everything a run reports; serialized as the scenario's JSON output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub label: String,
    pub nodes: usize,
    pub elements: usize,
    pub solver: SolverSummary,
    /// Total injected current in A.
    pub injected_current: f64,
    pub electrodes: Vec<ElectrodeFlux>,
    /// Net outward current through insulated faces from owner-element
    /// current densities, A.
    pub insulated_flux: f64,
    /// Same from the consistent nodal balance, over boundary nodes that
    /// belong to no electrode.
    pub insulated_nodal_flux: f64,
    /// |Σ electrode fluxes| / injected current, owner-element fluxes.
    pub element_imbalance: f64,
    /// Largest of the net nodal imbalance and each electrode's deviation
    /// from its prescribed current, relative to the injected current. This
    /// is the quantity gated by [`CONSERVATION_TOLERANCE`].
    pub conservation_error: f64,
    pub conservation_ok: bool,
    pub reports: Vec<RegionReport<f64>>,
    pub notes: Vec<String>,
}

/// Relative imbalance accepted by the conservation gate.
pub const CONSERVATION_TOLERANCE: f64 = 0.01;

impl Simulation {
    pub fn mesh(&self) -> &Mesh<f64> {
        &self.setup.mesh
    }

    pub fn reports(&self, regions: &[String]) -> Result<Vec<RegionReport<f64>>, ScenarioError> {
        let names: Vec<String> = if regions.is_empty() {
            self.mesh().region_names().values().cloned().collect()
        } else {
            regions.to_vec()
        };
        names
            .iter()
            .map(|r| {
                post::region_stats(self.mesh(), &self.field, r)
                    .map_err(|e| ScenarioError::stage(&self.setup.label, Stage::Post)(boxed(e)))
            })
            .collect()
    }

    /// `−K·V` per node; see [`post::nodal_current`].
    pub fn nodal_current(&self) -> Result<Vec<f64>, ScenarioError> {
        post::nodal_current(self.mesh(), &self.setup.conductivity, &self.field.potential)
            .map_err(|e| ScenarioError::stage(&self.setup.label, Stage::Post)(boxed(e)))
    }

    pub fn electrode_fluxes(&self, q: &[f64]) -> Vec<ElectrodeFlux> {
        self.setup
            .electrodes
            .iter()
            .map(|e| ElectrodeFlux {
                name: e.spec.name.clone(),
                role: e.spec.role,
                area: e.patch.area(),
                current_ma: e.spec.current(),
                flux: post::electrode_flux(&self.field, &e.patch),
                nodal_flux: post::consistent_flux(self.mesh(), q, &e.patch),
            })
            .collect()
    }

    /// Outward current through every boundary face outside the electrodes.
    pub fn insulated_flux(&self) -> f64 {
        let mut rest = self.setup.boundary.clone();
        for e in &self.setup.electrodes {
            rest = rest.difference(&e.patch);
        }
        post::electrode_flux(&self.field, &rest)
    }

    /// Nodal outward current summed over boundary nodes outside every
    /// electrode patch.
    pub fn insulated_nodal_flux(&self, q: &[f64]) -> f64 {
        let mut nodes: BTreeSet<u64> = self.setup.boundary.node_ids().into_iter().collect();
        for e in &self.setup.electrodes {
            for id in e.patch.node_ids() {
                nodes.remove(&id);
            }
        }
        nodes
            .into_iter()
            .filter_map(|id| self.mesh().node_index(id))
            .map(|i| q[i])
            .sum()
    }

    pub fn outcome(&self, regions: &[String]) -> Result<ScenarioOutcome, ScenarioError> {
        let q = self.nodal_current()?;
        let electrodes = self.electrode_fluxes(&q);
        let injected: f64 = electrodes.iter().map(|e| e.current_ma * 1e-3).sum();
        let relative = |net: f64| {
            if injected > 0.0 {
                net.abs() / injected
            } else {
                net.abs()
            }
        };
        let element_imbalance = relative(electrodes.iter().map(|e| e.flux).sum());
        let net = relative(electrodes.iter().map(|e| e.nodal_flux).sum());
        // anodes should deliver −I_a; the cathode collects the total
        let deviation = electrodes
            .iter()
            .map(|e| match e.role {
                Role::Anode => relative(e.nodal_flux + e.current_ma * 1e-3),
                Role::Cathode => relative(e.nodal_flux - injected),
            })
            .fold(0.0, f64::max);
        let conservation_error = net.max(deviation);
        let mut notes = vec!["maxima are element values reported at element centroids".to_string()];
        if self.setup.anodes().count() > 1 {
            notes.push(
                "several anodes share one ground; superposed loads approximate separate circuits"
                    .to_string(),
            );
        }
        Ok(ScenarioOutcome {
            label: self.setup.label.clone(),
            nodes: self.mesh().node_count(),
            elements: self.mesh().element_count(),
            solver: SolverSummary {
                iterations: self.solution.iterations,
                residual: self.solution.residual,
            },
            injected_current: injected,
            electrodes,
            insulated_flux: self.insulated_flux(),
            insulated_nodal_flux: self.insulated_nodal_flux(&q),
            element_imbalance,
            conservation_error,
            conservation_ok: conservation_error <= CONSERVATION_TOLERANCE,
            reports: self.reports(regions)?,
            notes,
        })
    }

    /// Writes whichever of VTK, CSV and JSON the scenario asks for.
    pub fn write_outputs(
        &self,
        s: &Scenario,
        outcome: &ScenarioOutcome,
    ) -> Result<(), ScenarioError> {
        let fail =
            |e: Box<dyn StdError + Send + Sync>| ScenarioError::stage(&s.label, Stage::Export)(e);
        if let Some(p) = &s.outputs.vtk {
            post::export_vtk(self.mesh(), &self.field, s.outputs.cap, p)
                .map_err(|e| fail(boxed(e)))?;
        }
        if let Some(p) = &s.outputs.csv {
            write(p, post::reports_csv(&outcome.reports).as_bytes()).map_err(fail)?;
        }
        if let Some(p) = &s.outputs.json {
            write(p, outcome_json(outcome).as_bytes()).map_err(fail)?;
        }
        Ok(())
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Box<dyn StdError + Send + Sync>> {
    crate::write_atomic(path, bytes).map_err(|e| format!("{}: {e}", path.display()).into())
}

pub fn outcome_json(outcome: &ScenarioOutcome) -> String {
    let mut s = serde_json::to_string_pretty(outcome).expect("outcome serializes");
    s.push('\n');
    s
}

/// Builds and solves a scenario without writing anything.
pub fn simulate(s: &Scenario) -> Result<Simulation, ScenarioError> {
    s.validate("")?;
    Setup::new(s)?.solve(&s.solver.settings())
}

/// Full pipeline: solve, summarise, write outputs.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioOutcome, ScenarioError> {
    let sim = simulate(s)?;
    let outcome = sim.outcome(&s.report_regions)?;
    sim.write_outputs(s, &outcome)?;
    Ok(outcome)
}
