//! Command-line front end: `run`, `experiment` and `generate`.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::decisions::DecisionRegistry;
use crate::engine::log::{events_to_csv, EventRecord};
use crate::engine::DayState;
use crate::experiments::{self, ExperimentError, ExperimentPlan, LearningParams};
use crate::kpi::{self, KpiReport};
use crate::netgraph;
use crate::scenario::{self, ConfigError, Scenario};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "ridesim", version, about = "Agent-based ride-hailing platform simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write the event log, KPI tables and manifest.
    Run(RunArgs),
    /// Run a parameter-grid experiment plan.
    Experiment(ExperimentArgs),
    /// Write a synthetic graph, demand or supply in the input CSV formats.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// More than one day runs the day-to-day learning loop.
    #[arg(long, default_value_t = 1)]
    pub days: u32,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment plan JSON file.
    #[arg(long)]
    pub plan: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (0 = all cores); falls back to the plan's `threads`.
    #[arg(long, env = "RIDESIM_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("what").required(true).args(["grid", "demand", "supply"])))]
pub struct GenerateArgs {
    /// Grid city: ROWS COLS SPACING_M SPEED_MPS.
    #[arg(long, num_args = 4, value_names = ["ROWS", "COLS", "SPACING", "SPEED"])]
    pub grid: Option<Vec<f64>>,
    /// Number of requests to draw (needs --config).
    #[arg(long)]
    pub demand: Option<usize>,
    /// Number of drivers to draw (needs --config).
    #[arg(long)]
    pub supply: Option<usize>,
    /// Scenario JSON supplying the graph, horizon and platforms.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) | ExperimentError::Decision(_) | ExperimentError::Plan { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub started_at: String,
    pub finished_at: String,
    pub files: Vec<ManifestFile>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects written outputs and writes the manifest once everything else is
/// on disk.
struct OutputDir {
    dir: PathBuf,
    files: Vec<ManifestFile>,
    started_at: String,
}

impl OutputDir {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        // a stale manifest would vouch for outputs about to be replaced
        let manifest = dir.join(MANIFEST);
        if manifest.exists() {
            fs::remove_file(&manifest).map_err(|e| io_err(&manifest, e))?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        })
    }

    fn write(&mut self, name: &str, body: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        self.files.push(ManifestFile {
            name: name.to_owned(),
            bytes: body.len() as u64,
            sha256: sha256_hex(body),
        });
        Ok(())
    }

    fn finish(self, command: &str, input: &[u8], seed: Option<u64>) -> Result<(), CliError> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: sha256_hex(input),
            seed,
            started_at: self.started_at,
            finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            files: self.files,
        };
        let body = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
        let path = self.dir.join(MANIFEST);
        fs::write(&path, body).map_err(|e| io_err(&path, e))
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

pub fn cmd_run(args: &RunArgs, registry: &DecisionRegistry) -> Result<(), CliError> {
    let input = read_input(&args.config)?;
    let scenario = Scenario::load(&args.config)?;
    let decisions = registry
        .resolve(&scenario.config.decisions)
        .map_err(|e| CliError::Config(e.to_string()))?;
    decisions
        .check_params(&scenario.config.behaviour)
        .map_err(|e| CliError::Config(e.to_string()))?;
    if args.days == 0 {
        return Err(CliError::Config("--days must be at least 1".into()));
    }
    let seed = args.seed.unwrap_or(scenario.config.seed);
    let mut out = OutputDir::create(&args.out)?;

    let (log, days, trajectory): (Vec<EventRecord>, Vec<u32>, _) = if args.days == 1 {
        let result = experiments::simulate_day(&scenario, &decisions, seed, 0, &DayState::default())?;
        (result.log, vec![0], None)
    } else {
        let learning = LearningParams {
            max_days: args.days as usize,
            ..LearningParams::from_config(&scenario.config)
        };
        let (t, log) = experiments::day_to_day_logged(&scenario, &decisions, &learning, seed)?;
        let days = (0..t.days_run as u32).collect();
        (log, days, Some(t))
    };
    log::info!("simulated {} day(s), {} events", days.len(), log.len());
    out.write("events.csv", events_to_csv(&log).as_bytes())?;
    let report = KpiReport::from_log(&log, &days, &scenario.config.platforms, scenario.net.n_nodes())
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    out.write("kpi_travellers.csv", kpi::travellers_csv(&report.travellers).as_bytes())?;
    out.write("kpi_drivers.csv", kpi::drivers_csv(&report.drivers).as_bytes())?;
    out.write("kpi_system.csv", kpi::system_csv(&report.system).as_bytes())?;
    out.write("kpi_nodes.csv", kpi::nodes_csv(&report.nodes).as_bytes())?;
    if let Some(t) = &trajectory {
        out.write("day_to_day.csv", experiments::single_trajectory_csv(t).as_bytes())?;
    }
    out.finish("run", &input, Some(seed))
}

pub fn cmd_experiment(args: &ExperimentArgs, registry: &DecisionRegistry) -> Result<(), CliError> {
    let input = read_input(&args.plan)?;
    let (plan, base_dir) = ExperimentPlan::load(&args.plan)?;
    let threads = args.threads.or(plan.threads).unwrap_or(0);
    let mut out = OutputDir::create(&args.out)?;
    let rows = experiments::run_grid(&plan, &base_dir, registry, threads)?;
    log::info!("completed {} runs", rows.len());
    out.write("experiment_results.csv", experiments::results_csv(&rows).as_bytes())?;
    if plan.learning.is_some() {
        out.write("day_to_day.csv", experiments::trajectory_csv(&rows).as_bytes())?;
    }
    out.finish("experiment", &input, Some(plan.base_seed))
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    if let Some(g) = &args.grid {
        let dims = |v: f64, name: &str| -> Result<usize, CliError> {
            if v.fract() == 0.0 && v >= 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError::Config(format!("--grid {name} must be a whole number")))
            }
        };
        let (rows, cols) = (dims(g[0], "ROWS")?, dims(g[1], "COLS")?);
        let net = netgraph::grid_city(rows, cols, g[2], g[3]).map_err(|e| CliError::Config(e.to_string()))?;
        let mut out = OutputDir::create(&args.out)?;
        let (nodes, edges) = netgraph::graph_to_csv(&net);
        out.write("nodes.csv", nodes.as_bytes())?;
        out.write("edges.csv", edges.as_bytes())?;
        let spec = format!("grid {rows} {cols} {} {}", g[2], g[3]);
        return out.finish("generate", spec.as_bytes(), None);
    }
    let config_path = args
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--demand and --supply need --config for the graph and horizon".into()))?;
    let input = read_input(config_path)?;
    let mut config = scenario::load_config(config_path)?;
    let seed = args.seed.unwrap_or(config.seed);
    if let Some(n) = args.demand {
        config.n_travellers = n;
        config.requests = None;
    }
    if let Some(m) = args.supply {
        config.n_drivers = Some(m);
        config.drivers = None;
        for p in &mut config.platforms {
            p.fleet_size = None;
        }
    }
    let scenario = Scenario::build(config)?;
    let mut out = OutputDir::create(&args.out)?;
    if args.demand.is_some() {
        let requests = scenario.demand(seed, 0);
        out.write("requests.csv", scenario::requests_to_csv(&requests).as_bytes())?;
    }
    if args.supply.is_some() {
        let drivers = scenario.supply(seed);
        out.write("drivers.csv", scenario::drivers_to_csv(&drivers).as_bytes())?;
    }
    out.finish("generate", &input, Some(seed))
}

/// Parses `args` (including the program name) and runs the command with the
/// built-in decision modules. Returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_cli_with(args, &DecisionRegistry::default())
}

/// As [`run_cli`] with a caller-supplied registry of decision modules.
pub fn run_cli_with<I, T>(args: I, registry: &DecisionRegistry) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, registry),
        Command::Experiment(a) => cmd_experiment(a, registry),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
