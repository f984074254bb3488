//! Replications, parameter-grid sweeps and the day-to-day learning loop.
//!
//! Runs are independent and share only immutable inputs, so they execute on
//! a rayon pool; results are always returned in (cell, replication) order,
//! which makes them independent of the thread budget.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::decisions::{DecisionError, DecisionRegistry, DecisionSet};
use crate::engine::log::EventRecord;
use crate::engine::{run_day, DayInputs, DayResult, DayState, DriverMemory, EngineError, TravellerMemory};
use crate::kpi::{self, KpiError, SystemKpi};
use crate::netgraph::{self, RoadNetwork, SkimMatrix};
use crate::rng::mix_seed;
use crate::scenario::{keys, ConfigError, Scenario, ScenarioConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error("invalid plan at `{path}`: {message}")]
    Plan { path: String, message: String },
    #[error("run with seed {seed} failed: {source}")]
    Run { seed: u64, source: EngineError },
    #[error("run with seed {seed} produced an unreadable log: {source}")]
    Kpi { seed: u64, source: KpiError },
    #[error("thread pool: {0}")]
    Pool(String),
}

/// One simulated day under one seed.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub seed: u64,
    pub system: SystemKpi,
    pub log: Vec<EventRecord>,
}

/// Simulates day `day` of `scenario` under `seed` from a fresh day state.
pub fn simulate_day(
    scenario: &Scenario,
    decisions: &DecisionSet,
    seed: u64,
    day: u32,
    state: &DayState,
) -> Result<DayResult, ExperimentError> {
    let requests = scenario.demand(seed, day);
    let drivers = scenario.supply(seed);
    let inputs = DayInputs {
        net: &scenario.net,
        skim: &scenario.skim,
        requests: &requests,
        drivers: &drivers,
        seed,
    };
    run_day(&scenario.config, &inputs, decisions, day, state).map_err(|source| ExperimentError::Run { seed, source })
}

fn system_of(result: &DayResult, scenario: &Scenario, seed: u64) -> Result<SystemKpi, ExperimentError> {
    let map = |source| ExperimentError::Kpi { seed, source };
    let travellers = kpi::traveller_kpis(&result.log).map_err(map)?;
    let drivers = kpi::driver_kpis(&result.log).map_err(map)?;
    Ok(kpi::system_kpis(
        result.day,
        &travellers,
        &drivers,
        &scenario.config.platforms,
    ))
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, ExperimentError> {
    let threads = if threads == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        threads
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))
}

/// Seed of replication `r` of a plain replication batch.
pub fn replication_seed(base_seed: u64, r: usize) -> u64 {
    mix_seed(&[base_seed, r as u64])
}

/// Seed of replication `r` in grid cell `c`.
pub fn cell_seed(base_seed: u64, c: usize, r: usize) -> u64 {
    mix_seed(&[base_seed, c as u64, r as u64])
}

/// `n` independent single-day runs, ordered by replication index.
/// `threads = 0` uses every available core.
pub fn replicate(
    scenario: &Scenario,
    decisions: &DecisionSet,
    n: usize,
    base_seed: u64,
    threads: usize,
) -> Result<Vec<RunRecord>, ExperimentError> {
    if n == 0 {
        return Err(ExperimentError::Plan {
            path: "replications".into(),
            message: "must be at least 1".into(),
        });
    }
    pool(threads)?.install(|| {
        (0..n)
            .into_par_iter()
            .map(|r| {
                let seed = replication_seed(base_seed, r);
                let result = simulate_day(scenario, decisions, seed, 0, &DayState::default())?;
                let system = system_of(&result, scenario, seed)?;
                Ok(RunRecord {
                    seed,
                    system,
                    log: result.log,
                })
            })
            .collect()
    })
}

// ---------------------------------------------------------------------------
// day-to-day learning

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningParams {
    pub alpha: f64,
    /// Hourly income below which a driver stays out.
    pub reservation_wage: f64,
    pub epsilon: f64,
    pub convergence_delta: f64,
    pub convergence_window: usize,
    pub max_days: usize,
}

impl Default for LearningParams {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            reservation_wage: 0.0,
            epsilon: 0.05,
            convergence_delta: 0.02,
            convergence_window: 5,
            max_days: 50,
        }
    }
}

impl LearningParams {
    /// Defaults, with the reservation wage and re-entry probability taken
    /// from the scenario's behaviour scalars when present.
    pub fn from_config(config: &ScenarioConfig) -> Self {
        let d = Self::default();
        Self {
            reservation_wage: config.behaviour.get_or(keys::RESERVATION_WAGE, d.reservation_wage),
            epsilon: config.behaviour.get_or(keys::LEARNING_EPSILON, d.epsilon),
            ..d
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |path: &str, message: &str| {
            Err(ExperimentError::Plan {
                path: format!("learning.{path}"),
                message: message.into(),
            })
        };
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha", "must be in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return bad("epsilon", "must be in [0, 1)");
        }
        if !(self.reservation_wage >= 0.0 && self.reservation_wage.is_finite()) {
            return bad("reservation_wage", "must be non-negative");
        }
        if self.convergence_delta.is_nan() || self.convergence_delta < 0.0 {
            return bad("convergence_delta", "must be non-negative");
        }
        if self.convergence_window == 0 {
            return bad("convergence_window", "must be at least 1");
        }
        if self.max_days == 0 {
            return bad("max_days", "must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayRecord {
    pub day: u32,
    pub fleet_participating: usize,
    /// Mean realized hourly income over participants (`None` if nobody drove).
    pub mean_income: Option<f64>,
    /// Mean learned income over all drivers after the day's update.
    pub mean_learned_income: f64,
    pub system: SystemKpi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayTrajectory {
    pub seed: u64,
    pub days: Vec<DayRecord>,
    pub converged: bool,
    pub days_run: usize,
    /// Learned income per driver after every day, for envelope checks.
    pub learned: Vec<BTreeMap<u32, f64>>,
    /// Realized hourly incomes per driver on participation days.
    pub realized: BTreeMap<u32, Vec<f64>>,
}

impl DayTrajectory {
    pub fn fleet(&self) -> Vec<usize> {
        self.days.iter().map(|d| d.fleet_participating).collect()
    }
}

/// Runs consecutive days with participation driven by learned income until
/// the fleet size settles or `max_days` is reached.
pub fn day_to_day(
    scenario: &Scenario,
    decisions: &DecisionSet,
    learning: &LearningParams,
    seed: u64,
) -> Result<DayTrajectory, ExperimentError> {
    day_to_day_inner(scenario, decisions, learning, seed, None)
}

/// As [`day_to_day`], also returning the concatenated event log of all days.
pub fn day_to_day_logged(
    scenario: &Scenario,
    decisions: &DecisionSet,
    learning: &LearningParams,
    seed: u64,
) -> Result<(DayTrajectory, Vec<EventRecord>), ExperimentError> {
    let mut log = Vec::new();
    let t = day_to_day_inner(scenario, decisions, learning, seed, Some(&mut log))?;
    Ok((t, log))
}

fn day_to_day_inner(
    scenario: &Scenario,
    decisions: &DecisionSet,
    learning: &LearningParams,
    seed: u64,
    mut keep_log: Option<&mut Vec<EventRecord>>,
) -> Result<DayTrajectory, ExperimentError> {
    learning.validate()?;
    let mut scenario = scenario.clone();
    scenario
        .config
        .behaviour
        .set(keys::RESERVATION_WAGE, learning.reservation_wage);
    scenario.config.behaviour.set(keys::LEARNING_EPSILON, learning.epsilon);
    let drivers = scenario.supply(seed);

    let mut state = DayState::default();
    for d in &drivers {
        state.drivers.insert(
            d.driver_id,
            DriverMemory {
                learned_income: Some(learning.reservation_wage),
                income_history: Vec::new(),
                participated_yesterday: None,
            },
        );
    }
    let mut days = Vec::new();
    let mut learned_log = Vec::new();
    let mut realized: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut calm_days = 0usize;
    let mut converged = false;
    for day in 0..learning.max_days as u32 {
        let result = simulate_day(&scenario, decisions, seed, day, &state)?;
        let system = system_of(&result, &scenario, seed)?;
        let mut incomes = Vec::new();
        for d in &result.drivers {
            let memory = state.drivers.entry(d.driver_id).or_default();
            if d.participated {
                let income = d.income_per_hour();
                let learned = memory.learned_income.unwrap_or(learning.reservation_wage);
                memory.learned_income = Some((1.0 - learning.alpha) * learned + learning.alpha * income);
                memory.income_history.push(Some(income));
                realized.entry(d.driver_id).or_default().push(income);
                incomes.push(income);
            } else {
                memory.income_history.push(None);
            }
            memory.participated_yesterday = Some(d.participated);
        }
        for t in &result.travellers {
            state.travellers.insert(
                t.traveller_id,
                TravellerMemory {
                    last_outcome: t.status.outcome(),
                },
            );
        }
        let learned: BTreeMap<u32, f64> = state
            .drivers
            .iter()
            .map(|(&id, m)| (id, m.learned_income.unwrap_or(learning.reservation_wage)))
            .collect();
        let fleet = system.fleet_participating;
        if let Some(prev) = days.last().map(|d: &DayRecord| d.fleet_participating) {
            let change = (fleet as f64 - prev as f64).abs() / (prev.max(1) as f64);
            calm_days = if change < learning.convergence_delta {
                calm_days + 1
            } else {
                0
            };
        }
        let mean_learned = if learned.is_empty() {
            0.0
        } else {
            learned.values().sum::<f64>() / learned.len() as f64
        };
        days.push(DayRecord {
            day,
            fleet_participating: fleet,
            mean_income: (!incomes.is_empty()).then(|| incomes.iter().sum::<f64>() / incomes.len() as f64),
            mean_learned_income: mean_learned,
            system,
        });
        learned_log.push(learned);
        if let Some(log) = keep_log.as_deref_mut() {
            log.extend(result.log);
        }
        if calm_days >= learning.convergence_window {
            converged = true;
            break;
        }
    }
    Ok(DayTrajectory {
        seed,
        days_run: days.len(),
        days,
        converged,
        learned: learned_log,
        realized,
    })
}

// ---------------------------------------------------------------------------
// parameter grids

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub base: Value,
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<Value>>,
    pub replications: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    /// When present every run is a day-to-day sequence instead of one day.
    #[serde(default)]
    pub learning: Option<LearningParams>,
}

impl ExperimentPlan {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let value: Value = serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let plan: ExperimentPlan = serde_path_to_error::deserialize(value).map_err(|e| ExperimentError::Plan {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((plan, base_dir))
    }

    /// Cartesian product of the grid values, first path varying slowest.
    pub fn cells(&self) -> Vec<Vec<(String, Value)>> {
        let mut cells: Vec<Vec<(String, Value)>> = vec![Vec::new()];
        for (path, values) in &self.grid {
            let mut next = Vec::with_capacity(cells.len() * values.len());
            for cell in &cells {
                for v in values {
                    let mut c = cell.clone();
                    c.push((path.clone(), v.clone()));
                    next.push(c);
                }
            }
            cells = next;
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Key(String),
    Index(usize),
}

fn parse_path(path: &str) -> Result<Vec<Segment>, String> {
    let mut out = Vec::new();
    for part in path.split('.') {
        let (name, mut rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if name.is_empty() && out.is_empty() {
            return Err("empty field name".into());
        }
        if !name.is_empty() {
            out.push(Segment::Key(name.to_owned()));
        }
        while let Some(stripped) = rest.strip_prefix('[') {
            let end = stripped.find(']').ok_or("unclosed `[`")?;
            let index = stripped[..end]
                .parse()
                .map_err(|_| format!("bad index `{}`", &stripped[..end]))?;
            out.push(Segment::Index(index));
            rest = &stripped[end + 1..];
        }
        if !rest.is_empty() {
            return Err(format!("unexpected `{rest}`"));
        }
    }
    Ok(out)
}

/// Sets `path` inside a config document. Intermediate objects and array
/// elements must already exist; the final key may be new (validity is then
/// checked by parsing the resulting config).
pub fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<(), String> {
    let segments = parse_path(path)?;
    let (last, init) = segments.split_last().ok_or("empty path")?;
    let mut cur = doc;
    for seg in init {
        cur = match seg {
            Segment::Key(k) => cur.get_mut(k.as_str()).ok_or_else(|| format!("no field `{k}`"))?,
            Segment::Index(i) => cur.get_mut(*i).ok_or_else(|| format!("no element [{i}]"))?,
        };
    }
    match last {
        Segment::Key(k) => {
            let obj = cur
                .as_object_mut()
                .ok_or_else(|| format!("`{k}` is not inside an object"))?;
            obj.insert(k.clone(), value);
        }
        Segment::Index(i) => {
            let slot = cur.get_mut(*i).ok_or_else(|| format!("no element [{i}]"))?;
            *slot = value;
        }
    }
    Ok(())
}

/// A fully prepared grid cell.
struct Cell {
    values: Vec<(String, Value)>,
    scenario: Scenario,
}

fn prepare_cells(plan: &ExperimentPlan, base_dir: &Path) -> Result<Vec<Cell>, ExperimentError> {
    if plan.replications == 0 {
        return Err(ExperimentError::Plan {
            path: "replications".into(),
            message: "must be at least 1".into(),
        });
    }
    if let Some(l) = &plan.learning {
        l.validate()?;
    }
    let mut configs = Vec::new();
    for values in plan.cells() {
        let mut doc = plan.base.clone();
        for (path, v) in &values {
            set_path(&mut doc, path, v.clone()).map_err(|message| ExperimentError::Plan {
                path: format!("grid.{path}"),
                message,
            })?;
        }
        let config = ScenarioConfig::from_json_value(doc, base_dir).map_err(|e| match e {
            ConfigError::Schema { path, message } | ConfigError::Semantic { path, message } => ExperimentError::Plan {
                path: format!("base.{path}"),
                message: format!("{message} (cell {})", describe(&values)),
            },
            other => other.into(),
        })?;
        configs.push((values, config));
    }
    // cells usually share their network; build each distinct one once
    let mut networks: HashMap<String, (Arc<RoadNetwork>, Arc<SkimMatrix>)> = HashMap::new();
    let mut cells = Vec::with_capacity(configs.len());
    for (values, config) in configs {
        let key = serde_json::to_string(&config.graph).unwrap_or_default();
        let (net, skim) = match networks.get(&key) {
            Some(pair) => pair.clone(),
            None => {
                let scenario = Scenario::build(config.clone())?;
                let pair = (scenario.net.clone(), scenario.skim.clone());
                networks.insert(key, pair.clone());
                pair
            }
        };
        let scenario = Scenario::with_network(config, net, skim)?;
        cells.push(Cell { values, scenario });
    }
    Ok(cells)
}

fn describe(values: &[(String, Value)]) -> String {
    values
        .iter()
        .map(|(p, v)| format!("{p}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub cell: usize,
    pub values: Vec<(String, Value)>,
    pub replication: usize,
    pub seed: u64,
    pub system: SystemKpi,
    /// Day-to-day runs only.
    pub trajectory: Option<Vec<DayRecord>>,
    pub converged: Option<bool>,
}

/// Runs every (cell, replication) of a plan. All cells are validated before
/// the first run starts.
pub fn run_grid(
    plan: &ExperimentPlan,
    base_dir: &Path,
    registry: &DecisionRegistry,
    threads: usize,
) -> Result<Vec<GridRow>, ExperimentError> {
    let cells = prepare_cells(plan, base_dir)?;
    let mut decision_sets = Vec::with_capacity(cells.len());
    for cell in &cells {
        let set = registry.resolve(&cell.scenario.config.decisions)?;
        set.check_params(&cell.scenario.config.behaviour)?;
        decision_sets.push(set);
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..plan.replications).map(move |r| (c, r)))
        .collect();
    pool(threads)?.install(|| {
        jobs.par_iter()
            .map(|&(c, r)| {
                let cell = &cells[c];
                let seed = cell_seed(plan.base_seed, c, r);
                let decisions = &decision_sets[c];
                let (system, trajectory, converged) = match &plan.learning {
                    None => {
                        let result = simulate_day(&cell.scenario, decisions, seed, 0, &DayState::default())?;
                        (system_of(&result, &cell.scenario, seed)?, None, None)
                    }
                    Some(learning) => {
                        let t = day_to_day(&cell.scenario, decisions, learning, seed)?;
                        let last = t.days.last().expect("at least one day").system.clone();
                        (last, Some(t.days), Some(t.converged))
                    }
                };
                Ok(GridRow {
                    cell: c,
                    values: cell.values.clone(),
                    replication: r,
                    seed,
                    system,
                    trajectory,
                    converged,
                })
            })
            .collect()
    })
}

fn cell_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// `experiment_results.csv`: grid columns, replication, seed, system KPIs.
pub fn results_csv(rows: &[GridRow]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else {
        return out;
    };
    let mut header: Vec<String> = first.values.iter().map(|(p, _)| p.clone()).collect();
    header.push("replication".into());
    header.push("seed".into());
    header.extend(first.system.columns().into_iter().map(|c| c.0));
    let _ = writeln!(out, "{}", header.join(","));
    for row in rows {
        let mut fields: Vec<String> = row.values.iter().map(|(_, v)| csv_field(&cell_value(v))).collect();
        fields.push(row.replication.to_string());
        fields.push(row.seed.to_string());
        fields.extend(row.system.columns().into_iter().map(|c| c.1));
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub const DAY_TO_DAY_HEADER: &str =
    "day,fleet_participating,mean_income,mean_wait_s,mean_learned_income,n_served,n_unserved,mean_driver_idle_s";

/// `day_to_day.csv`, optionally prefixed by grid and replication columns.
pub fn trajectory_csv(rows: &[GridRow]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else {
        return out;
    };
    let mut header: Vec<String> = first.values.iter().map(|(p, _)| p.clone()).collect();
    header.push("replication".into());
    header.push("seed".into());
    let _ = writeln!(out, "{},{DAY_TO_DAY_HEADER}", header.join(","));
    for row in rows {
        let mut prefix: Vec<String> = row.values.iter().map(|(_, v)| csv_field(&cell_value(v))).collect();
        prefix.push(row.replication.to_string());
        prefix.push(row.seed.to_string());
        let prefix = prefix.join(",");
        for d in row.trajectory.iter().flatten() {
            let _ = writeln!(out, "{prefix},{}", day_record_fields(d));
        }
    }
    out
}

fn day_record_fields(d: &DayRecord) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{}",
        d.day,
        d.fleet_participating,
        opt(d.mean_income),
        opt(d.system.mean_wait_s),
        d.mean_learned_income,
        d.system.n_served,
        d.system.n_unserved,
        opt(d.system.mean_driver_idle_s)
    )
}

/// `day_to_day.csv` for a single trajectory.
pub fn single_trajectory_csv(t: &DayTrajectory) -> String {
    let mut out = format!("{DAY_TO_DAY_HEADER}\n");
    for d in &t.days {
        let _ = writeln!(out, "{}", day_record_fields(d));
    }
    out
}

/// Builds the skim for a grid of a given size; helper for callers that
/// sweep over networks themselves.
pub fn grid_network(
    rows: usize,
    cols: usize,
    spacing: f64,
    speed: f64,
) -> Result<(Arc<RoadNetwork>, Arc<SkimMatrix>), ExperimentError> {
    let net = netgraph::grid_city(rows, cols, spacing, speed).map_err(ConfigError::from)?;
    let skim = netgraph::build_skim(&net);
    Ok((Arc::new(net), Arc::new(skim)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base() -> Value {
        json!({
            "horizon_s": 3600, "n_travellers": 30, "n_drivers": 4, "seed": 1,
            "platforms": [
                {"platform_id": 0, "base_fare": 0, "fare_per_km": 1.0, "commission_rate": 0.2, "matching": "instant"},
                {"platform_id": 1, "base_fare": 0, "fare_per_km": 1.0, "commission_rate": 0.2, "matching": "instant"}
            ],
            "graph": {"grid": {"rows": 4, "cols": 4, "spacing_m": 300, "speed_mps": 10}}
        })
    }

    fn plan(grid: Value, reps: usize) -> ExperimentPlan {
        serde_json::from_value(json!({"base": base(), "grid": grid, "replications": reps, "base_seed": 9})).unwrap()
    }

    #[test]
    fn path_parsing() {
        assert_eq!(
            parse_path("platforms[1].fare_per_km").unwrap(),
            vec![
                Segment::Key("platforms".into()),
                Segment::Index(1),
                Segment::Key("fare_per_km".into())
            ]
        );
        assert!(parse_path("a[x]").is_err());
        let mut doc = base();
        set_path(&mut doc, "platforms[1].fare_per_km", json!(0.6)).unwrap();
        assert_eq!(doc["platforms"][1]["fare_per_km"], json!(0.6));
        assert!(set_path(&mut doc, "platforms[5].fare_per_km", json!(1)).is_err());
        assert!(set_path(&mut doc, "nope.x", json!(1)).is_err());
    }

    #[test]
    fn grid_counts_rows() {
        let p = plan(json!({"n_drivers": [5, 10], "platforms[1].fare_per_km": [0.6, 1.0]}), 2);
        let rows = run_grid(&p, Path::new("."), &DecisionRegistry::default(), 2).unwrap();
        assert_eq!(rows.len(), 8);
        let order: Vec<(usize, usize)> = rows.iter().map(|r| (r.cell, r.replication)).collect();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(order, sorted);
    }

    #[test]
    fn bad_grid_path_fails_before_running() {
        let p = plan(json!({"platforms[1].fare_per_kilometre": [0.6]}), 1);
        let e = run_grid(&p, Path::new("."), &DecisionRegistry::default(), 1).unwrap_err();
        assert!(e.to_string().contains("fare_per_kilometre"), "{e}");
        let p = plan(json!({"platforms[3].fare_per_km": [0.6]}), 1);
        let e = run_grid(&p, Path::new("."), &DecisionRegistry::default(), 1).unwrap_err();
        assert!(e.to_string().contains("platforms[3]"), "{e}");
    }

    #[test]
    fn thread_count_invariance() {
        let p = plan(json!({"n_drivers": [2, 6]}), 3);
        let a = run_grid(&p, Path::new("."), &DecisionRegistry::default(), 1).unwrap();
        let b = run_grid(&p, Path::new("."), &DecisionRegistry::default(), 4).unwrap();
        assert_eq!(results_csv(&a), results_csv(&b));
    }

    #[test]
    fn seed_isolation_between_cells() {
        let a = run_grid(
            &plan(json!({"n_travellers": [10, 20]}), 2),
            Path::new("."),
            &DecisionRegistry::default(),
            2,
        )
        .unwrap();
        let b = run_grid(
            &plan(json!({"n_travellers": [10, 40]}), 2),
            Path::new("."),
            &DecisionRegistry::default(),
            2,
        )
        .unwrap();
        assert_eq!(a[0].system, b[0].system);
        assert_eq!(a[1].system, b[1].system);
        assert_ne!(a[2].system, b[2].system);
    }

    #[test]
    fn single_replication_equals_direct_run() {
        let config = ScenarioConfig::from_json_value(base(), Path::new(".")).unwrap();
        let scenario = Scenario::build(config).unwrap();
        let set = DecisionSet::default();
        let runs = replicate(&scenario, &set, 1, 5, 1).unwrap();
        let direct = simulate_day(&scenario, &set, replication_seed(5, 0), 0, &DayState::default()).unwrap();
        assert_eq!(runs[0].log, direct.log);
    }

    #[test]
    fn zero_reservation_wage_keeps_full_fleet() {
        let config = ScenarioConfig::from_json_value(base(), Path::new(".")).unwrap();
        let scenario = Scenario::build(config).unwrap();
        let learning = LearningParams::default();
        let t = day_to_day(&scenario, &DecisionSet::default(), &learning, 3).unwrap();
        assert!(t.converged);
        assert_eq!(t.days_run, learning.convergence_window + 1);
        assert!(t.fleet().iter().all(|&f| f == 4));
    }

    #[test]
    fn learning_params_validated() {
        let bad = LearningParams {
            alpha: 0.0,
            ..LearningParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
