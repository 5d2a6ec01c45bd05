//! Scenario files, the end-to-end pipeline and cross-scenario comparison.

mod compare;
mod config;
mod run;

pub use compare::{compare_reports, CompareError, Comparison, Laterality};
pub use config::{
    load_config, parse_config, ConfigError, ElectrodeSpec, MeshSource, Outputs, Role, Scenario,
    SolverConfig, DEFAULT_CAP, DEFAULT_CURRENT_MA,
};
pub use run::{
    outcome_json, run_scenario, simulate, ElectrodeFlux, ResolvedElectrode, ScenarioError,
    ScenarioOutcome, Setup, Simulation, SolverSummary, Stage, CONSERVATION_TOLERANCE,
};
