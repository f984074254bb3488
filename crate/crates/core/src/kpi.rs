//! Per-agent and system-level indicators reconstructed from the event log.
//!
//! Every number here is derived from log records alone, never from engine
//! internals, so a log written to disk and read back yields the same rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::decisions::Outcome;
use crate::engine::log::{AgentKind, EventName, EventRecord};
use crate::engine::validate::{validate_log, ValidationError};
use crate::netgraph::NodeId;
use crate::scenario::{AgentId, PlatformId, PlatformSpec};

#[derive(Debug, Error)]
pub enum KpiError {
    #[error("malformed log: {0}")]
    Validation(#[from] ValidationError),
    #[error("log row {index}: {message}")]
    Missing { index: usize, message: String },
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TravellerKpi {
    pub day: u32,
    pub traveller_id: AgentId,
    pub outcome: Outcome,
    pub wait_s: Option<f64>,
    pub in_vehicle_s: Option<f64>,
    pub total_s: Option<f64>,
    pub fare_paid: Option<f64>,
    pub platform_id: Option<PlatformId>,
    pub origin: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriverKpi {
    pub day: u32,
    pub driver_id: AgentId,
    pub participated: bool,
    pub idle_s: f64,
    pub empty_drive_s: f64,
    pub occupied_s: f64,
    pub mileage_m: f64,
    pub revenue: f64,
    pub n_rides: u32,
    pub first_match_wait_s: Option<f64>,
    pub platform_ids: Vec<PlatformId>,
    pub empty_drive_m: f64,
    pub occupied_m: f64,
    /// Gross fares and platform cuts of completed rides, for money checks.
    pub fares: f64,
    pub commissions: f64,
    pub home_node: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlatformKpi {
    pub platform_id: PlatformId,
    pub revenue: f64,
    pub rides: u32,
    pub km_per_driver: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemKpi {
    pub day: u32,
    pub n_served: usize,
    pub n_unserved: usize,
    pub n_opted_out: usize,
    pub n_rejected: usize,
    pub mean_wait_s: Option<f64>,
    pub median_wait_s: Option<f64>,
    pub p90_wait_s: Option<f64>,
    pub mean_driver_idle_s: Option<f64>,
    pub fleet_participating: usize,
    pub platforms: Vec<PlatformKpi>,
    pub empty_vkm: f64,
    pub occupied_vkm: f64,
    pub n_travellers: usize,
    pub mean_driver_first_match_wait_s: Option<f64>,
    pub mean_driver_revenue: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeAggregate {
    pub node: NodeId,
    pub n_travellers: usize,
    pub mean_traveller_wait_s: Option<f64>,
    pub n_drivers: usize,
    pub mean_driver_first_match_wait_s: Option<f64>,
}

fn missing(index: usize, message: impl Into<String>) -> KpiError {
    KpiError::Missing {
        index,
        message: message.into(),
    }
}

fn node_of(rec: &EventRecord) -> Option<NodeId> {
    NodeId::try_from(rec.node).ok()
}

/// One row per traveller and day appearing in the log.
pub fn traveller_kpis(log: &[EventRecord]) -> Result<Vec<TravellerKpi>, KpiError> {
    validate_log(log)?;
    #[derive(Default)]
    struct Acc {
        requested: Option<f64>,
        picked_up: Option<f64>,
        arrived: Option<f64>,
        fare: Option<f64>,
        platform: Option<PlatformId>,
        origin: Option<NodeId>,
        last: Option<EventName>,
    }
    let mut acc: BTreeMap<(u32, AgentId), Acc> = BTreeMap::new();
    for (index, rec) in log.iter().enumerate() {
        if rec.agent_kind != AgentKind::Traveller {
            continue;
        }
        let a = acc.entry((rec.day, rec.agent_id)).or_default();
        match rec.event {
            EventName::Plans => a.origin = node_of(rec),
            EventName::Requests => a.requested = Some(rec.t),
            EventName::PickedUp => a.picked_up = Some(rec.t),
            EventName::Arrives => {
                a.arrived = Some(rec.t);
                a.fare = Some(
                    rec.meta_f64("fare")
                        .ok_or_else(|| missing(index, "ARRIVES without fare"))?,
                );
                a.platform = rec.meta_u32("platform_id");
            }
            _ => {}
        }
        a.last = Some(rec.event);
    }
    acc.into_iter()
        .map(|((day, traveller_id), a)| {
            let outcome = match a.last {
                Some(EventName::Arrives) => Outcome::Arrived,
                Some(EventName::OptsOut) => Outcome::OptedOut,
                Some(EventName::RejectsOffer) => Outcome::RejectedOffer,
                _ => Outcome::Unserved,
            };
            let wait_s = a.requested.zip(a.picked_up).map(|(r, p)| p - r);
            let in_vehicle_s = a.picked_up.zip(a.arrived).map(|(p, x)| x - p);
            let total_s = a.requested.zip(a.arrived).map(|(r, x)| x - r);
            Ok(TravellerKpi {
                day,
                traveller_id,
                outcome,
                wait_s,
                in_vehicle_s,
                total_s,
                fare_paid: a.fare,
                platform_id: a.platform,
                origin: a.origin.unwrap_or_default(),
            })
        })
        .collect()
}

/// One row per driver and day appearing in the log.
pub fn driver_kpis(log: &[EventRecord]) -> Result<Vec<DriverKpi>, KpiError> {
    validate_log(log)?;
    #[derive(Default)]
    struct Acc {
        start: Option<f64>,
        end: Option<f64>,
        home: Option<NodeId>,
        platforms: Vec<PlatformId>,
        pickup_at: Option<f64>,
        first_accept: Option<f64>,
        k: DriverKpiSums,
    }
    #[derive(Default)]
    struct DriverKpiSums {
        empty_s: f64,
        empty_m: f64,
        occupied_s: f64,
        occupied_m: f64,
        revenue: f64,
        fares: f64,
        commissions: f64,
        n_rides: u32,
    }
    let mut acc: BTreeMap<(u32, AgentId), Acc> = BTreeMap::new();
    for (index, rec) in log.iter().enumerate() {
        if rec.agent_kind != AgentKind::Driver {
            continue;
        }
        let leg = |key: &str| {
            rec.meta_f64(key)
                .ok_or_else(|| missing(index, format!("{} without {key}", rec.event)))
        };
        let a = acc.entry((rec.day, rec.agent_id)).or_default();
        match rec.event {
            EventName::OptsOut => a.home = node_of(rec),
            EventName::StartsShift => {
                a.start = Some(rec.t);
                a.home = node_of(rec);
                a.platforms = rec
                    .meta_get("platforms")
                    .map(|s| s.split('|').filter_map(|p| p.parse().ok()).collect())
                    .unwrap_or_default();
            }
            EventName::AcceptsRequest => {
                a.first_accept.get_or_insert(rec.t);
            }
            EventName::ArrivesPickup => {
                a.k.empty_s += leg("leg_s")?;
                a.k.empty_m += leg("leg_m")?;
                a.pickup_at = Some(rec.t);
            }
            EventName::ArrivesReposition => {
                a.k.empty_s += leg("leg_s")?;
                a.k.empty_m += leg("leg_m")?;
            }
            EventName::CompletesRide => {
                let picked = a
                    .pickup_at
                    .take()
                    .ok_or_else(|| missing(index, "ride completed without pickup"))?;
                a.k.occupied_s += rec.t - picked;
                a.k.occupied_m += leg("leg_m")?;
                a.k.revenue += leg("payout")?;
                a.k.fares += leg("fare")?;
                a.k.commissions += leg("commission")?;
                a.k.n_rides += 1;
            }
            EventName::EndsShift => a.end = Some(rec.t),
            _ => {}
        }
    }
    Ok(acc
        .into_iter()
        .map(|((day, driver_id), a)| {
            let worked = a.start.zip(a.end).map_or(0.0, |(s, e)| e - s);
            let k = a.k;
            DriverKpi {
                day,
                driver_id,
                participated: a.start.is_some(),
                idle_s: (worked - k.empty_s - k.occupied_s).max(0.0),
                empty_drive_s: k.empty_s,
                occupied_s: k.occupied_s,
                mileage_m: k.empty_m + k.occupied_m,
                revenue: k.revenue,
                n_rides: k.n_rides,
                first_match_wait_s: a.start.zip(a.first_accept).map(|(s, f)| f - s),
                platform_ids: a.platforms,
                empty_drive_m: k.empty_m,
                occupied_m: k.occupied_m,
                fares: k.fares,
                commissions: k.commissions,
                home_node: a.home,
            }
        })
        .collect())
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Nearest-rank percentile: the smallest value with at least `p` percent of
/// the sample at or below it.
pub fn percentile_nearest_rank(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

/// Aggregates for one day. Rows of other days are ignored.
pub fn system_kpis(
    day: u32,
    travellers: &[TravellerKpi],
    drivers: &[DriverKpi],
    platforms: &[PlatformSpec],
) -> SystemKpi {
    let travellers: Vec<&TravellerKpi> = travellers.iter().filter(|t| t.day == day).collect();
    let drivers: Vec<&DriverKpi> = drivers.iter().filter(|d| d.day == day && d.participated).collect();
    let count = |o: Outcome| travellers.iter().filter(|t| t.outcome == o).count();
    let waits: Vec<f64> = travellers.iter().filter_map(|t| t.wait_s).collect();
    let idle: Vec<f64> = drivers.iter().map(|d| d.idle_s).collect();
    let first: Vec<f64> = drivers.iter().filter_map(|d| d.first_match_wait_s).collect();
    let revenue: Vec<f64> = drivers.iter().map(|d| d.revenue).collect();
    let platforms = platforms
        .iter()
        .map(|p| {
            let id = p.platform_id;
            let served: Vec<&&TravellerKpi> = travellers.iter().filter(|t| t.platform_id == Some(id)).collect();
            let fleet: Vec<f64> = drivers
                .iter()
                .filter(|d| d.platform_ids.contains(&id))
                .map(|d| d.mileage_m / 1000.0)
                .collect();
            PlatformKpi {
                platform_id: id,
                revenue: served.iter().filter_map(|t| t.fare_paid).sum(),
                rides: served.len() as u32,
                km_per_driver: mean(&fleet),
            }
        })
        .collect();
    SystemKpi {
        day,
        n_served: count(Outcome::Arrived),
        n_unserved: count(Outcome::Unserved),
        n_opted_out: count(Outcome::OptedOut),
        n_rejected: count(Outcome::RejectedOffer),
        mean_wait_s: mean(&waits),
        median_wait_s: percentile_nearest_rank(&waits, 50.0),
        p90_wait_s: percentile_nearest_rank(&waits, 90.0),
        mean_driver_idle_s: mean(&idle),
        fleet_participating: drivers.len(),
        platforms,
        empty_vkm: drivers.iter().map(|d| d.empty_drive_m).sum::<f64>() / 1000.0,
        occupied_vkm: drivers.iter().map(|d| d.occupied_m).sum::<f64>() / 1000.0,
        n_travellers: travellers.len(),
        mean_driver_first_match_wait_s: mean(&first),
        mean_driver_revenue: mean(&revenue),
    }
}

/// Per-node mean waits: travellers by origin node, drivers by home node.
pub fn node_aggregates(travellers: &[TravellerKpi], drivers: &[DriverKpi], n_nodes: usize) -> Vec<NodeAggregate> {
    let mut trav: Vec<Vec<f64>> = vec![Vec::new(); n_nodes];
    let mut n_trav = vec![0usize; n_nodes];
    for t in travellers {
        if let Some(slot) = n_trav.get_mut(t.origin as usize) {
            *slot += 1;
            if let Some(w) = t.wait_s {
                trav[t.origin as usize].push(w);
            }
        }
    }
    let mut drv: Vec<Vec<f64>> = vec![Vec::new(); n_nodes];
    let mut n_drv = vec![0usize; n_nodes];
    for d in drivers.iter().filter(|d| d.participated) {
        let Some(home) = d.home_node.filter(|&h| (h as usize) < n_nodes) else {
            continue;
        };
        n_drv[home as usize] += 1;
        if let Some(w) = d.first_match_wait_s {
            drv[home as usize].push(w);
        }
    }
    (0..n_nodes)
        .map(|n| NodeAggregate {
            node: n as NodeId,
            n_travellers: n_trav[n],
            mean_traveller_wait_s: mean(&trav[n]),
            n_drivers: n_drv[n],
            mean_driver_first_match_wait_s: mean(&drv[n]),
        })
        .collect()
}

/// All indicator tables for a (possibly multi-day) log.
#[derive(Debug, Clone, PartialEq)]
pub struct KpiReport {
    pub travellers: Vec<TravellerKpi>,
    pub drivers: Vec<DriverKpi>,
    pub system: Vec<SystemKpi>,
    pub nodes: Vec<NodeAggregate>,
}

impl KpiReport {
    /// `days` lists every simulated day so days without any event still get
    /// a system row.
    pub fn from_log(
        log: &[EventRecord],
        days: &[u32],
        platforms: &[PlatformSpec],
        n_nodes: usize,
    ) -> Result<Self, KpiError> {
        let travellers = traveller_kpis(log)?;
        let drivers = driver_kpis(log)?;
        let system = days
            .iter()
            .map(|&d| system_kpis(d, &travellers, &drivers, platforms))
            .collect();
        let nodes = node_aggregates(&travellers, &drivers, n_nodes);
        Ok(Self {
            travellers,
            drivers,
            system,
            nodes,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<String>, KpiError> {
        let files = [
            ("kpi_travellers.csv", travellers_csv(&self.travellers)),
            ("kpi_drivers.csv", drivers_csv(&self.drivers)),
            ("kpi_system.csv", system_csv(&self.system)),
            ("kpi_nodes.csv", nodes_csv(&self.nodes)),
        ];
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| KpiError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            written.push(name.to_owned());
        }
        Ok(written)
    }
}

/// Formats an optional value; `None` becomes an empty field.
fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const TRAVELLERS_HEADER: &str = "traveller_id,outcome,wait_s,in_vehicle_s,total_s,fare_paid,platform_id,origin,day";
pub const DRIVERS_HEADER: &str = "driver_id,participated,idle_s,empty_drive_s,occupied_s,mileage_m,revenue,n_rides,first_match_wait_s,platform_ids,home_node,day";
pub const NODES_HEADER: &str = "node,n_travellers,mean_traveller_wait_s,n_drivers,mean_driver_first_match_wait_s";

pub fn travellers_csv(rows: &[TravellerKpi]) -> String {
    let mut out = format!("{TRAVELLERS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.traveller_id,
            r.outcome,
            opt(r.wait_s),
            opt(r.in_vehicle_s),
            opt(r.total_s),
            opt(r.fare_paid),
            opt(r.platform_id),
            r.origin,
            r.day
        );
    }
    out
}

pub fn drivers_csv(rows: &[DriverKpi]) -> String {
    let mut out = format!("{DRIVERS_HEADER}\n");
    for r in rows {
        let platforms: Vec<String> = r.platform_ids.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.driver_id,
            r.participated,
            r.idle_s,
            r.empty_drive_s,
            r.occupied_s,
            r.mileage_m,
            r.revenue,
            r.n_rides,
            opt(r.first_match_wait_s),
            platforms.join(";"),
            opt(r.home_node),
            r.day
        );
    }
    out
}

impl SystemKpi {
    /// Column names and formatted values in output order; per-platform
    /// columns are named `p{id}_...`.
    pub fn columns(&self) -> Vec<(String, String)> {
        let mut cols: Vec<(String, String)> = vec![
            ("day".into(), self.day.to_string()),
            ("n_served".into(), self.n_served.to_string()),
            ("n_unserved".into(), self.n_unserved.to_string()),
            ("n_opted_out".into(), self.n_opted_out.to_string()),
            ("n_rejected".into(), self.n_rejected.to_string()),
            ("mean_wait_s".into(), opt(self.mean_wait_s)),
            ("median_wait_s".into(), opt(self.median_wait_s)),
            ("p90_wait_s".into(), opt(self.p90_wait_s)),
            ("mean_driver_idle_s".into(), opt(self.mean_driver_idle_s)),
            ("fleet_participating".into(), self.fleet_participating.to_string()),
        ];
        for p in &self.platforms {
            cols.push((format!("p{}_revenue", p.platform_id), p.revenue.to_string()));
        }
        cols.push(("empty_vkm".into(), self.empty_vkm.to_string()));
        cols.push(("occupied_vkm".into(), self.occupied_vkm.to_string()));
        cols.push(("n_travellers".into(), self.n_travellers.to_string()));
        cols.push((
            "mean_driver_first_match_wait_s".into(),
            opt(self.mean_driver_first_match_wait_s),
        ));
        cols.push(("mean_driver_revenue".into(), opt(self.mean_driver_revenue)));
        for p in &self.platforms {
            cols.push((format!("p{}_rides", p.platform_id), p.rides.to_string()));
            cols.push((format!("p{}_km_per_driver", p.platform_id), opt(p.km_per_driver)));
        }
        cols
    }
}

pub fn system_csv(rows: &[SystemKpi]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else {
        return out;
    };
    let header: Vec<String> = first.columns().into_iter().map(|c| c.0).collect();
    let _ = writeln!(out, "{}", header.join(","));
    for r in rows {
        let values: Vec<String> = r.columns().into_iter().map(|c| c.1).collect();
        let _ = writeln!(out, "{}", values.join(","));
    }
    out
}

pub fn nodes_csv(rows: &[NodeAggregate]) -> String {
    let mut out = format!("{NODES_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.node,
            r.n_travellers,
            opt(r.mean_traveller_wait_s),
            r.n_drivers,
            opt(r.mean_driver_first_match_wait_s)
        );
    }
    out
}
