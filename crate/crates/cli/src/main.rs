//! `vcond` command-line front end.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error, 3 solver
//! did not converge, 4 current conservation outside tolerance.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use vcond::mesh::{parse_nastran, validate_mesh, write_nastran};
use vcond::phantom::PhantomSpec;
use vcond::scenario::{compare_reports, load_config, run_scenario, ScenarioError, ScenarioOutcome};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_CONSERVATION: u8 = 4;

#[derive(Parser)]
#[command(
    name = "vcond",
    version,
    about = "Volume-conductor current density simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario of a configuration file.
    Simulate {
        config: PathBuf,
        /// Run only the scenario with this label.
        #[arg(long)]
        only: Option<String>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Generate phantom meshes.
    Phantom {
        #[command(subcommand)]
        action: PhantomAction,
    },
    /// Check a NASTRAN mesh for defects.
    Validate {
        mesh: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Compare scenario results.
    Report {
        #[command(subcommand)]
        action: ReportAction,
    },
}

#[derive(Subcommand)]
enum PhantomAction {
    /// Write a phantom described by a JSON spec as NASTRAN bulk data.
    Write { spec: PathBuf, out: PathBuf },
}

#[derive(Subcommand)]
enum ReportAction {
    /// Tabulate max_j per region across scenario JSON outputs.
    Compare {
        #[arg(required = true, num_args = 2..)]
        outcomes: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: EXIT_FAILURE,
            error: e.into(),
        }
    }
}

fn config_failure(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        error: error.into(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            only,
            threads,
        } => simulate(&config, only.as_deref(), threads),
        Command::Phantom {
            action: PhantomAction::Write { spec, out },
        } => phantom_write(&spec, &out),
        Command::Validate { mesh, json } => validate(&mesh, json),
        Command::Report {
            action: ReportAction::Compare { outcomes, csv },
        } => compare(&outcomes, csv.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn simulate(config: &Path, only: Option<&str>, threads: Option<usize>) -> Result<u8, Failure> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(config_failure(anyhow::anyhow!(
                "--threads must be at least 1"
            )));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut scenarios = load_config(config)
        .with_context(|| format!("loading {}", config.display()))
        .map_err(config_failure)?;
    if let Some(label) = only {
        scenarios.retain(|s| s.label == label);
        if scenarios.is_empty() {
            return Err(config_failure(anyhow::anyhow!(
                "no scenario labelled {label:?}"
            )));
        }
    }

    let mut code = 0;
    for s in &scenarios {
        log::info!("running {}", s.label);
        let outcome = run_scenario(s).map_err(|e| Failure {
            code: exit_code(&e),
            error: e.into(),
        })?;
        print_outcome(&outcome);
        if !outcome.conservation_ok {
            eprintln!(
                "error: [{}] current imbalance {:.3e} exceeds tolerance",
                outcome.label, outcome.conservation_error
            );
            code = EXIT_CONSERVATION;
        }
    }
    Ok(code)
}

fn exit_code(e: &ScenarioError) -> u8 {
    match e {
        ScenarioError::Config(_) => EXIT_CONFIG,
        _ if e.is_non_convergence() => EXIT_NOT_CONVERGED,
        _ => EXIT_FAILURE,
    }
}

fn print_outcome(o: &ScenarioOutcome) {
    println!(
        "{}: {} nodes, {} elements, {} iterations, residual {:.2e}",
        o.label, o.nodes, o.elements, o.solver.iterations, o.solver.residual
    );
    for e in &o.electrodes {
        println!(
            "  {:<8} {:<12} nodal {:>11.4e} A  element {:>11.4e} A",
            e.role, e.name, e.nodal_flux, e.flux
        );
    }
    println!("  conservation error {:.3e}", o.conservation_error);
    println!("  {:<16} {:>12} {:>12}", "region", "max_j", "mean_j");
    for r in &o.reports {
        println!("  {:<16} {:>12.4e} {:>12.4e}", r.region, r.max_j, r.mean_j);
    }
}

fn phantom_write(spec: &Path, out: &Path) -> Result<u8, Failure> {
    let text =
        std::fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
    let spec: PhantomSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", spec.display()))
        .map_err(config_failure)?;
    let phantom = spec.build::<f64>().map_err(config_failure)?;
    std::fs::write(out, write_nastran(&phantom.mesh))
        .with_context(|| format!("writing {}", out.display()))?;
    println!(
        "{}: {} nodes, {} elements",
        out.display(),
        phantom.mesh.node_count(),
        phantom.mesh.element_count()
    );
    Ok(0)
}

fn validate(path: &Path, json: bool) -> Result<u8, Failure> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mesh =
        parse_nastran::<f64>(&text).with_context(|| format!("parsing {}", path.display()))?;
    let report = validate_mesh(&mesh);
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{report}");
        for d in &report.defects {
            println!("  {d:?}");
        }
    }
    Ok(if report.is_valid() { 0 } else { EXIT_FAILURE })
}

fn compare(paths: &[PathBuf], csv: Option<&Path>) -> Result<u8, Failure> {
    let mut runs = Vec::with_capacity(paths.len());
    for p in paths {
        let text =
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let o: ScenarioOutcome =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        runs.push((o.label, o.reports));
    }
    let table = compare_reports(&runs)?;
    print!("{table}");
    if let Some(out) = csv {
        std::fs::write(out, table.to_csv())
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(0)
}
