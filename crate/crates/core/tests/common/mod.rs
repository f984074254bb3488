//! Helpers shared by the integration test targets: brute-force oracles,
//! log conservation checks and small scenario builders.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::Rng;
use ridesim::engine::log::{AgentKind, EventName, EventRecord};
use ridesim::kpi::{driver_kpis, system_kpis, traveller_kpis};
use ridesim::netgraph::{Edge, Node, NodeId, RoadNetwork};
use ridesim::scenario::{AgentId, PlatformSpec, Scenario, ScenarioConfig};

pub fn presets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

pub fn preset(name: &str) -> PathBuf {
    presets_dir().join(name)
}

/// Grid-city scenario with one instant platform and default decisions.
pub fn grid_config(
    rows: usize,
    cols: usize,
    n_travellers: usize,
    n_drivers: usize,
    horizon_s: f64,
    seed: u64,
) -> ScenarioConfig {
    let text = format!(
        r#"{{"horizon_s": {horizon_s}, "n_travellers": {n_travellers}, "n_drivers": {n_drivers}, "seed": {seed},
            "platforms": [{{"platform_id": 0, "base_fare": 1.0, "fare_per_km": 1.0, "commission_rate": 0.2, "matching": "instant"}}],
            "graph": {{"grid": {{"rows": {rows}, "cols": {cols}, "spacing_m": 250, "speed_mps": 8.33}}}}}}"#
    );
    ScenarioConfig::from_json_str(&text, Path::new(".")).expect("valid grid config")
}

pub fn grid_scenario(
    rows: usize,
    cols: usize,
    n_travellers: usize,
    n_drivers: usize,
    horizon_s: f64,
    seed: u64,
) -> Scenario {
    Scenario::build(grid_config(rows, cols, n_travellers, n_drivers, horizon_s, seed)).expect("scenario builds")
}

/// Random strongly connected directed graph: a Hamiltonian cycle through a
/// shuffled node order plus extra random edges (parallel edges allowed).
pub fn random_network(rng: &mut impl Rng, n: usize, extra_edges: usize, integer_weights: bool) -> RoadNetwork {
    let nodes: Vec<Node> = (0..n as NodeId)
        .map(|i| Node {
            node_id: i,
            x: i as f64,
            y: 0.0,
        })
        .collect();
    let mut order: Vec<NodeId> = (0..n as NodeId).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let weight = |rng: &mut dyn rand::RngCore| -> (f64, f64) {
        if integer_weights {
            (rng.random_range(1..=20) as f64, 1.0)
        } else {
            (rng.random_range(10.0..1000.0), rng.random_range(2.0..20.0))
        }
    };
    let mut edges = Vec::new();
    for i in 0..n {
        let (length, speed) = weight(rng);
        edges.push(Edge {
            from: order[i],
            to: order[(i + 1) % n],
            length,
            speed,
        });
    }
    for _ in 0..extra_edges {
        let from = rng.random_range(0..n) as NodeId;
        let to = rng.random_range(0..n) as NodeId;
        if from == to {
            continue;
        }
        let (length, speed) = weight(rng);
        edges.push(Edge {
            from,
            to,
            length,
            speed,
        });
    }
    RoadNetwork::new(nodes, edges).expect("cycle keeps the graph strongly connected")
}

/// Best (time, distance) over all simple paths, summed from the source.
pub fn brute_force_path(net: &RoadNetwork, from: NodeId, to: NodeId) -> (f64, f64) {
    fn walk(
        net: &RoadNetwork,
        at: NodeId,
        to: NodeId,
        time: f64,
        dist: f64,
        seen: &mut Vec<bool>,
        best: &mut (f64, f64),
    ) {
        if at == to {
            if (time, dist) < *best {
                *best = (time, dist);
            }
            return;
        }
        for edge in net.out_edges(at) {
            if seen[edge.to as usize] {
                continue;
            }
            seen[edge.to as usize] = true;
            walk(
                net,
                edge.to,
                to,
                time + edge.travel_time(),
                dist + edge.length,
                seen,
                best,
            );
            seen[edge.to as usize] = false;
        }
    }
    let mut seen = vec![false; net.n_nodes()];
    seen[from as usize] = true;
    let mut best = (f64::INFINITY, f64::INFINITY);
    walk(net, from, to, 0.0, 0.0, &mut seen, &mut best);
    best
}

/// Minimum total cost over every way to pick `min(rows, cols)` pairs, and the
/// lexicographically smallest optimal pair list (by row, then column key).
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> (f64, Vec<(usize, usize)>) {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    let k = rows.min(cols);
    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    // Choose which rows are matched, then permute columns over them.
    fn choose(
        cost: &[Vec<f64>],
        row: usize,
        k: usize,
        used: &mut Vec<bool>,
        pairs: &mut Vec<(usize, usize)>,
        best: &mut Option<(f64, Vec<(usize, usize)>)>,
    ) {
        if pairs.len() == k {
            let total: f64 = pairs.iter().map(|&(r, c)| cost[r][c]).sum();
            let better = match best {
                None => true,
                Some((t, p)) => total < *t || (total == *t && pairs < p),
            };
            if better {
                *best = Some((total, pairs.clone()));
            }
            return;
        }
        if row == cost.len() || cost.len() - row < k - pairs.len() {
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                pairs.push((row, c));
                choose(cost, row + 1, k, used, pairs, best);
                pairs.pop();
                used[c] = false;
            }
        }
        choose(cost, row + 1, k, used, pairs, best);
    }
    choose(cost, 0, k, &mut vec![false; cols], &mut Vec::new(), &mut best);
    best.unwrap_or((0.0, Vec::new()))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Time, outcome and money conservation laws over a (possibly multi-day) log.
pub fn check_conservation(log: &[EventRecord], platforms: &[PlatformSpec]) -> Result<(), String> {
    let travellers = traveller_kpis(log).map_err(|e| e.to_string())?;
    let drivers = driver_kpis(log).map_err(|e| e.to_string())?;

    let occupied: f64 = drivers.iter().map(|d| d.occupied_s).sum();
    let in_vehicle: f64 = travellers.iter().filter_map(|t| t.in_vehicle_s).sum();
    if !close(occupied, in_vehicle, 1e-9) {
        return Err(format!("occupied {occupied} s != in-vehicle {in_vehicle} s"));
    }

    let days: BTreeSet<u32> = log.iter().map(|e| e.day).collect();
    for day in days {
        let t: Vec<_> = travellers.iter().filter(|t| t.day == day).cloned().collect();
        let d: Vec<_> = drivers.iter().filter(|d| d.day == day).cloned().collect();
        let s = system_kpis(day, &t, &d, platforms);
        let planned = log
            .iter()
            .filter(|e| e.day == day && e.agent_kind == AgentKind::Traveller && e.event == EventName::Plans)
            .count();
        let outcomes = s.n_served + s.n_unserved + s.n_opted_out + s.n_rejected;
        if outcomes != s.n_travellers || s.n_travellers != planned {
            return Err(format!(
                "day {day}: outcomes {outcomes} do not partition {} travellers ({planned} planned)",
                s.n_travellers
            ));
        }
    }

    let payouts: f64 = drivers.iter().map(|d| d.revenue).sum();
    let cuts: f64 = drivers.iter().map(|d| d.commissions).sum();
    let fares: f64 = drivers.iter().map(|d| d.fares).sum();
    let paid: f64 = travellers.iter().filter_map(|t| t.fare_paid).sum();
    if (payouts + cuts - fares).abs() > 1e-9 {
        return Err(format!("payouts {payouts} + cuts {cuts} != fares {fares}"));
    }
    if (paid - fares).abs() > 1e-9 {
        return Err(format!("travellers paid {paid} but drivers carried fares {fares}"));
    }
    Ok(())
}

/// Ids of drivers that started a shift on each day of the log.
pub fn participants_by_day(log: &[EventRecord], n_days: usize) -> Vec<BTreeSet<AgentId>> {
    let mut sets = vec![BTreeSet::new(); n_days];
    for e in log {
        if e.agent_kind == AgentKind::Driver && e.event == EventName::StartsShift {
            sets[e.day as usize].insert(e.agent_id);
        }
    }
    sets
}
