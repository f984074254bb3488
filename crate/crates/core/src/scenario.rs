//! Scenario configuration, synthetic demand and supply, and the request and
//! driver CSV formats.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decisions::DecisionNames;
use crate::netgraph::{self, GraphError, NodeId, RoadNetwork, SkimMatrix};
use crate::rng;

pub type PlatformId = u32;
pub type AgentId = u32;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed JSON: {0}")]
    Parse(String),
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid value at `{path}`: {message}")]
    Semantic { path: String, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl ConfigError {
    pub(crate) fn semantic(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Semantic {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum MatchingMode {
    Instant,
    Batched { window_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformSpec {
    pub platform_id: PlatformId,
    pub base_fare: f64,
    pub fare_per_km: f64,
    pub commission_rate: f64,
    pub matching: MatchingMode,
    /// Dedicated fleet. When every platform sets it, drivers are generated
    /// in consecutive blocks, one block per platform.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fleet_size: Option<usize>,
}

impl PlatformSpec {
    pub fn fare(&self, distance_m: f64) -> f64 {
        self.base_fare + self.fare_per_km * distance_m / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub spacing_m: f64,
    pub speed_mps: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<PathBuf>,
}

/// Named scalars read by decision modules and the engine.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Behaviour(pub BTreeMap<String, f64>);

impl Behaviour {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    pub fn get_or(&self, key: &str, default: f64) -> f64 {
        self.get(key).unwrap_or(default)
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.0.insert(key.to_owned(), value);
    }
}

/// Behaviour keys read by the engine itself.
pub mod keys {
    pub const MAX_WAIT_S: &str = "max_wait_s";
    pub const MAX_REJECTIONS: &str = "max_rejections";
    pub const T_BOARD_S: &str = "t_board_s";
    pub const T_ALIGHT_S: &str = "t_alight_s";
    /// Uniform +/- fraction applied to boarding and alighting durations.
    pub const SERVICE_JITTER: &str = "service_jitter";
    /// Reserved for pickups away from the request origin; unused while
    /// demand lives on graph nodes.
    pub const WALK_SPEED_MPS: &str = "walk_speed_mps";
    pub const RESERVATION_WAGE: &str = "reservation_wage_per_hour";
    pub const LEARNING_EPSILON: &str = "learning_epsilon";
    pub const MAX_PICKUP_ETA_S: &str = "max_pickup_eta_s";
}

pub const DEFAULT_MAX_REJECTIONS: u32 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub horizon_s: f64,
    pub n_travellers: usize,
    /// May be omitted when every platform declares a `fleet_size`.
    #[serde(default)]
    pub n_drivers: Option<usize>,
    pub platforms: Vec<PlatformSpec>,
    pub seed: u64,
    pub graph: GraphSource,
    #[serde(default)]
    pub behaviour: Behaviour,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requests: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drivers: Option<PathBuf>,
    #[serde(default)]
    pub decisions: DecisionNames,
}

impl ScenarioConfig {
    /// Parses and validates a config document. Relative file paths are
    /// resolved against `base_dir`.
    pub fn from_json_value(value: serde_json::Value, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut config: ScenarioConfig = serde_path_to_error::deserialize(value).map_err(|e| ConfigError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        config.resolve_paths(base_dir);
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_str(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_json_value(value, base_dir)
    }

    fn resolve_paths(&mut self, base_dir: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        for p in [
            self.graph.nodes.as_mut(),
            self.graph.edges.as_mut(),
            self.requests.as_mut(),
            self.drivers.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
    }

    /// Checks every invariant that does not need the road network.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.horizon_s > 0.0 && self.horizon_s.is_finite()) {
            return Err(ConfigError::semantic("horizon_s", "must be positive and finite"));
        }
        if self.platforms.is_empty() {
            return Err(ConfigError::semantic("platforms", "at least one platform is required"));
        }
        let mut ids = BTreeSet::new();
        for (i, p) in self.platforms.iter().enumerate() {
            let at = |field: &str| format!("platforms[{i}].{field}");
            if !ids.insert(p.platform_id) {
                return Err(ConfigError::semantic(at("platform_id"), "duplicate platform id"));
            }
            if !(p.base_fare >= 0.0 && p.base_fare.is_finite()) {
                return Err(ConfigError::semantic(at("base_fare"), "must be >= 0"));
            }
            if !(p.fare_per_km >= 0.0 && p.fare_per_km.is_finite()) {
                return Err(ConfigError::semantic(at("fare_per_km"), "must be >= 0"));
            }
            if !(0.0..=1.0).contains(&p.commission_rate) {
                return Err(ConfigError::semantic(at("commission_rate"), "must lie in [0, 1]"));
            }
            if let MatchingMode::Batched { window_s } = p.matching {
                if !(window_s > 0.0 && window_s.is_finite()) {
                    return Err(ConfigError::semantic(
                        at("matching.batched.window_s"),
                        "must be positive",
                    ));
                }
            }
        }
        let fleets: Vec<Option<usize>> = self.platforms.iter().map(|p| p.fleet_size).collect();
        let declared = fleets.iter().filter(|f| f.is_some()).count();
        if declared != 0 && declared != fleets.len() {
            return Err(ConfigError::semantic(
                "platforms",
                "fleet_size must be set on every platform or on none",
            ));
        }
        if declared == 0 && self.n_drivers.is_none() && self.drivers.is_none() {
            return Err(ConfigError::Schema {
                path: "n_drivers".into(),
                message: "missing field `n_drivers`".into(),
            });
        }
        if declared > 0 {
            let total: usize = fleets.iter().flatten().sum();
            if let Some(n) = self.n_drivers {
                if n != total {
                    return Err(ConfigError::semantic(
                        "n_drivers",
                        format!("{n} disagrees with the sum of platform fleet sizes {total}"),
                    ));
                }
            }
        }
        match (&self.graph.grid, &self.graph.nodes, &self.graph.edges) {
            (Some(_), None, None) | (None, Some(_), Some(_)) => {}
            _ => {
                return Err(ConfigError::semantic(
                    "graph",
                    "give either `grid` or both `nodes` and `edges`",
                ))
            }
        }
        for (key, value) in &self.behaviour.0 {
            if !value.is_finite() {
                return Err(ConfigError::semantic(format!("behaviour.{key}"), "must be finite"));
            }
        }
        for key in [keys::T_BOARD_S, keys::T_ALIGHT_S, keys::MAX_REJECTIONS] {
            if self.behaviour.get(key).is_some_and(|v| v < 0.0) {
                return Err(ConfigError::semantic(format!("behaviour.{key}"), "must be >= 0"));
            }
        }
        if let Some(j) = self.behaviour.get(keys::SERVICE_JITTER) {
            if !(0.0..=1.0).contains(&j) {
                return Err(ConfigError::semantic(
                    format!("behaviour.{}", keys::SERVICE_JITTER),
                    "must lie in [0, 1]",
                ));
            }
        }
        if let Some(weights) = &self.demand_weights {
            if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || weights.iter().sum::<f64>() <= 0.0 {
                return Err(ConfigError::semantic(
                    "demand_weights",
                    "weights must be non-negative with a positive sum",
                ));
            }
        }
        Ok(())
    }

    /// Total number of generated drivers.
    pub fn fleet_total(&self) -> usize {
        if self.platforms.iter().all(|p| p.fleet_size.is_some()) {
            self.platforms.iter().filter_map(|p| p.fleet_size).sum()
        } else {
            self.n_drivers.unwrap_or(0)
        }
    }

    pub fn max_rejections(&self) -> u32 {
        self.behaviour
            .get(keys::MAX_REJECTIONS)
            .map(|v| v as u32)
            .unwrap_or(DEFAULT_MAX_REJECTIONS)
    }

    pub fn platform_ids(&self) -> Vec<PlatformId> {
        self.platforms.iter().map(|p| p.platform_id).collect()
    }
}

/// Reads and validates a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    ScenarioConfig::from_json_str(&text, base)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub request_id: AgentId,
    pub traveller_id: AgentId,
    pub origin: NodeId,
    pub destination: NodeId,
    #[serde(rename = "t_request_s")]
    pub t_request: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriverSpec {
    pub driver_id: AgentId,
    pub home_node: NodeId,
    pub shift_start: f64,
    pub shift_end: f64,
    pub platform_ids: Vec<PlatformId>,
}

impl DriverSpec {
    pub fn shift_hours(&self) -> f64 {
        (self.shift_end - self.shift_start) / 3600.0
    }
}

/// Uniform origin-destination demand over the nodes of `net`.
pub fn generate_demand(net: &RoadNetwork, n: usize, horizon: f64, seed: u64) -> Vec<Request> {
    generate_demand_weighted(net, n, horizon, seed, None)
}

/// As [`generate_demand`], with origins drawn proportionally to `weights`
/// when given. Destinations stay uniform.
pub fn generate_demand_weighted(
    net: &RoadNetwork,
    n: usize,
    horizon: f64,
    seed: u64,
    weights: Option<&[f64]>,
) -> Vec<Request> {
    let n_nodes = net.n_nodes() as u32;
    assert!(n_nodes >= 2, "demand needs at least two nodes");
    let mut rng = rng::SimRng::seed_from_u64(seed);
    let origin_dist = weights.map(|w| WeightedIndex::new(w).expect("validated demand weights"));
    let mut drawn: Vec<(f64, NodeId, NodeId)> = (0..n)
        .map(|_| {
            let origin = match &origin_dist {
                Some(dist) => dist.sample(&mut rng) as NodeId,
                None => rng.random_range(0..n_nodes),
            };
            let destination = loop {
                let d = rng.random_range(0..n_nodes);
                if d != origin {
                    break d;
                }
            };
            let t = rng.random::<f64>() * horizon;
            (t, origin, destination)
        })
        .collect();
    // stable: ties keep generation order
    drawn.sort_by(|a, b| a.0.total_cmp(&b.0));
    drawn
        .into_iter()
        .enumerate()
        .map(|(i, (t_request, origin, destination))| Request {
            request_id: i as AgentId,
            traveller_id: i as AgentId,
            origin,
            destination,
            t_request,
        })
        .collect()
}

/// Drivers with uniform home nodes working the whole horizon on every
/// platform in `platform_ids`.
pub fn generate_supply(
    net: &RoadNetwork,
    n: usize,
    horizon: f64,
    seed: u64,
    platform_ids: &[PlatformId],
) -> Vec<DriverSpec> {
    let mut rng = rng::SimRng::seed_from_u64(seed);
    let n_nodes = net.n_nodes() as u32;
    (0..n)
        .map(|i| DriverSpec {
            driver_id: i as AgentId,
            home_node: rng.random_range(0..n_nodes),
            shift_start: 0.0,
            shift_end: horizon,
            platform_ids: platform_ids.to_vec(),
        })
        .collect()
}

/// A config with its network, skim and any external demand/supply loaded.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub net: Arc<RoadNetwork>,
    pub skim: Arc<SkimMatrix>,
    external_requests: Option<Arc<Vec<Request>>>,
    external_drivers: Option<Arc<Vec<DriverSpec>>>,
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self, ConfigError> {
        let net = match (&config.graph.grid, &config.graph.nodes, &config.graph.edges) {
            (Some(g), _, _) => netgraph::grid_city(g.rows, g.cols, g.spacing_m, g.speed_mps)?,
            (None, Some(nodes), Some(edges)) => netgraph::load_graph(nodes, edges)?,
            _ => return Err(ConfigError::semantic("graph", "no graph source")),
        };
        let skim = netgraph::build_skim(&net);
        Self::with_network(config, Arc::new(net), Arc::new(skim))
    }

    /// Reuses an already built network and skim, e.g. across grid cells.
    pub fn with_network(
        config: ScenarioConfig,
        net: Arc<RoadNetwork>,
        skim: Arc<SkimMatrix>,
    ) -> Result<Self, ConfigError> {
        if net.n_nodes() < 2 {
            return Err(ConfigError::semantic("graph", "need at least two nodes"));
        }
        if let Some(w) = &config.demand_weights {
            if w.len() != net.n_nodes() {
                return Err(ConfigError::semantic(
                    "demand_weights",
                    format!("expected {} weights, got {}", net.n_nodes(), w.len()),
                ));
            }
        }
        let external_requests = match &config.requests {
            Some(path) => {
                let requests = read_requests(path)?;
                validate_requests(&requests, &net, config.horizon_s)?;
                if requests.len() != config.n_travellers {
                    return Err(ConfigError::semantic(
                        "n_travellers",
                        format!(
                            "{} does not match {} rows in {}",
                            config.n_travellers,
                            requests.len(),
                            path.display()
                        ),
                    ));
                }
                Some(Arc::new(requests))
            }
            None => None,
        };
        let external_drivers = match &config.drivers {
            Some(path) => {
                let drivers = read_drivers(path)?;
                validate_drivers(&drivers, &net, config.horizon_s, &config.platform_ids())?;
                Some(Arc::new(drivers))
            }
            None => None,
        };
        Ok(Self {
            config,
            net,
            skim,
            external_requests,
            external_drivers,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::build(load_config(path)?)
    }

    /// Requests for `day` under run seed `seed`.
    pub fn demand(&self, seed: u64, day: u32) -> Vec<Request> {
        if let Some(requests) = &self.external_requests {
            return requests.as_ref().clone();
        }
        let stream = rng::mix_seed(&[rng::stream_seed(seed, "demand"), day as u64]);
        generate_demand_weighted(
            &self.net,
            self.config.n_travellers,
            self.config.horizon_s,
            stream,
            self.config.demand_weights.as_deref(),
        )
    }

    pub fn supply(&self, seed: u64) -> Vec<DriverSpec> {
        if let Some(drivers) = &self.external_drivers {
            return drivers.as_ref().clone();
        }
        let stream = rng::stream_seed(seed, "supply");
        let horizon = self.config.horizon_s;
        let all = self.config.platform_ids();
        let mut drivers = generate_supply(&self.net, self.config.fleet_total(), horizon, stream, &all);
        if self.config.platforms.iter().all(|p| p.fleet_size.is_some()) {
            let mut next = 0;
            for p in &self.config.platforms {
                let size = p.fleet_size.unwrap_or(0);
                for d in &mut drivers[next..next + size] {
                    d.platform_ids = vec![p.platform_id];
                }
                next += size;
            }
        }
        drivers
    }
}

fn validate_requests(requests: &[Request], net: &RoadNetwork, horizon: f64) -> Result<(), ConfigError> {
    let mut request_ids = BTreeSet::new();
    let mut traveller_ids = BTreeSet::new();
    for (i, r) in requests.iter().enumerate() {
        let at = |field: &str| format!("requests[{i}].{field}");
        if !request_ids.insert(r.request_id) {
            return Err(ConfigError::semantic(at("request_id"), "duplicate request id"));
        }
        if !traveller_ids.insert(r.traveller_id) {
            return Err(ConfigError::semantic(at("traveller_id"), "one request per traveller"));
        }
        if !net.contains(r.origin) {
            return Err(ConfigError::semantic(
                at("origin"),
                format!("unknown node {}", r.origin),
            ));
        }
        if !net.contains(r.destination) {
            return Err(ConfigError::semantic(
                at("destination"),
                format!("unknown node {}", r.destination),
            ));
        }
        if r.origin == r.destination {
            return Err(ConfigError::semantic(at("destination"), "origin equals destination"));
        }
        if !(0.0..horizon).contains(&r.t_request) {
            return Err(ConfigError::semantic(at("t_request_s"), "outside [0, horizon)"));
        }
    }
    Ok(())
}

fn validate_drivers(
    drivers: &[DriverSpec],
    net: &RoadNetwork,
    horizon: f64,
    platforms: &[PlatformId],
) -> Result<(), ConfigError> {
    let mut ids = BTreeSet::new();
    for (i, d) in drivers.iter().enumerate() {
        let at = |field: &str| format!("drivers[{i}].{field}");
        if !ids.insert(d.driver_id) {
            return Err(ConfigError::semantic(at("driver_id"), "duplicate driver id"));
        }
        if !net.contains(d.home_node) {
            return Err(ConfigError::semantic(
                at("home_node"),
                format!("unknown node {}", d.home_node),
            ));
        }
        if !(0.0 <= d.shift_start && d.shift_start < d.shift_end && d.shift_end <= horizon) {
            return Err(ConfigError::semantic(
                at("shift_start_s"),
                "need 0 <= start < end <= horizon",
            ));
        }
        if d.platform_ids.is_empty() {
            return Err(ConfigError::semantic(at("platform_ids"), "empty platform list"));
        }
        if let Some(p) = d.platform_ids.iter().find(|p| !platforms.contains(p)) {
            return Err(ConfigError::semantic(
                at("platform_ids"),
                format!("unknown platform {p}"),
            ));
        }
    }
    Ok(())
}

fn csv_error(path: &Path, row: usize, message: impl std::fmt::Display) -> ConfigError {
    ConfigError::Schema {
        path: format!("{} row {row}", path.display()),
        message: message.to_string(),
    }
}

fn check_header(path: &Path, reader: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<(), ConfigError> {
    let header = reader.headers().map_err(|e| csv_error(path, 0, e))?;
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(csv_error(path, 0, format!("expected header `{}`", expected.join(","))));
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub const REQUESTS_HEADER: [&str; 5] = ["request_id", "traveller_id", "origin", "destination", "t_request_s"];
pub const DRIVERS_HEADER: [&str; 5] = ["driver_id", "home_node", "shift_start_s", "shift_end_s", "platform_ids"];

pub fn read_requests(path: &Path) -> Result<Vec<Request>, ConfigError> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    check_header(path, &mut reader, &REQUESTS_HEADER)?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| csv_error(path, i + 1, e)))
        .collect()
}

pub fn write_requests(path: &Path, requests: &[Request]) -> std::io::Result<()> {
    fs::write(path, requests_to_csv(requests))
}

pub fn requests_to_csv(requests: &[Request]) -> String {
    let mut text = REQUESTS_HEADER.join(",");
    text.push('\n');
    for r in requests {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.request_id, r.traveller_id, r.origin, r.destination, r.t_request
        ));
    }
    text
}

pub fn read_drivers(path: &Path) -> Result<Vec<DriverSpec>, ConfigError> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    check_header(path, &mut reader, &DRIVERS_HEADER)?;
    let mut drivers = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, i + 1, e))?;
        let field = |k: usize| row.get(k).unwrap_or("");
        let num = |k: usize| -> Result<f64, ConfigError> {
            field(k)
                .parse::<f64>()
                .map_err(|e| csv_error(path, i + 1, format!("{}: {e}", DRIVERS_HEADER[k])))
        };
        let int = |k: usize| -> Result<u32, ConfigError> {
            field(k)
                .parse::<u32>()
                .map_err(|e| csv_error(path, i + 1, format!("{}: {e}", DRIVERS_HEADER[k])))
        };
        let platform_ids = field(4)
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| s.trim().parse::<PlatformId>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| csv_error(path, i + 1, format!("platform_ids: {e}")))?;
        drivers.push(DriverSpec {
            driver_id: int(0)?,
            home_node: int(1)?,
            shift_start: num(2)?,
            shift_end: num(3)?,
            platform_ids,
        });
    }
    Ok(drivers)
}

pub fn write_drivers(path: &Path, drivers: &[DriverSpec]) -> std::io::Result<()> {
    fs::write(path, drivers_to_csv(drivers))
}

pub fn drivers_to_csv(drivers: &[DriverSpec]) -> String {
    let mut text = DRIVERS_HEADER.join(",");
    text.push('\n');
    for d in drivers {
        let platforms: Vec<String> = d.platform_ids.iter().map(|p| p.to_string()).collect();
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            d.driver_id,
            d.home_node,
            d.shift_start,
            d.shift_end,
            platforms.join(";")
        ));
    }
    text
}
