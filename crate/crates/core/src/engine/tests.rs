use std::path::Path;
use std::sync::Arc;

use super::log::{AgentKind, EventName};
use super::validate::validate_log;
use super::*;
use crate::decisions::{DecisionRegistry, DecisionSet, DriverDecline, TravellerMode};
use crate::netgraph::{build_skim, grid_city};
use crate::scenario::Behaviour;

/// 3×3 grid with 60 s per hop (600 m at 10 m/s).
fn config(matching: &str, n_platforms: usize) -> ScenarioConfig {
    let platforms: Vec<String> = (0..n_platforms)
        .map(|i| {
            format!(
                r#"{{"platform_id": {i}, "base_fare": 0, "fare_per_km": 1.0, "commission_rate": 0.25, "matching": {matching}}}"#
            )
        })
        .collect();
    let text = format!(
        r#"{{"horizon_s": 3600, "n_travellers": 0, "n_drivers": 0, "seed": 1,
            "platforms": [{}],
            "graph": {{"grid": {{"rows": 3, "cols": 3, "spacing_m": 600, "speed_mps": 10}}}}}}"#,
        platforms.join(",")
    );
    ScenarioConfig::from_json_str(&text, Path::new(".")).unwrap()
}

struct World {
    net: RoadNetwork,
    skim: SkimMatrix,
}

fn world() -> World {
    let net = grid_city(3, 3, 600.0, 10.0).unwrap();
    let skim = build_skim(&net);
    World { net, skim }
}

fn request(id: AgentId, origin: NodeId, destination: NodeId, t: f64) -> Request {
    Request {
        request_id: id,
        traveller_id: id,
        origin,
        destination,
        t_request: t,
    }
}

fn driver(id: AgentId, home: NodeId, platforms: &[PlatformId]) -> DriverSpec {
    DriverSpec {
        driver_id: id,
        home_node: home,
        shift_start: 0.0,
        shift_end: 3600.0,
        platform_ids: platforms.to_vec(),
    }
}

fn run(
    config: &ScenarioConfig,
    w: &World,
    requests: &[Request],
    drivers: &[DriverSpec],
    decisions: &DecisionSet,
) -> DayResult {
    let inputs = DayInputs {
        net: &w.net,
        skim: &w.skim,
        requests,
        drivers,
        seed: 7,
    };
    let result = run_day(config, &inputs, decisions, 0, &DayState::default()).unwrap();
    validate_log(&result.log).unwrap();
    result
}

fn events_of(result: &DayResult, kind: AgentKind, id: AgentId) -> Vec<(f64, EventName)> {
    result
        .log
        .iter()
        .filter(|r| r.agent_kind == kind && r.agent_id == id)
        .map(|r| (r.t, r.event))
        .collect()
}

#[test]
fn empty_demand_logs_only_shifts() {
    let w = world();
    let cfg = config(r#""instant""#, 1);
    let drivers: Vec<_> = (0..3).map(|i| driver(i, i, &[0])).collect();
    let result = run(&cfg, &w, &[], &drivers, &DecisionSet::default());
    assert_eq!(result.log.len(), 6);
    for d in 0..3 {
        assert_eq!(
            events_of(&result, AgentKind::Driver, d),
            vec![(0.0, EventName::StartsShift), (3600.0, EventName::EndsShift)]
        );
        assert_eq!(result.drivers[d as usize].idle_s, 3600.0);
    }
}

#[test]
fn single_ride_hand_trace() {
    let w = world();
    let cfg = config(r#""instant""#, 1);
    // origin 1 is one hop from driver home 0; destination 7 is two hops away
    let result = run(
        &cfg,
        &w,
        &[request(0, 1, 7, 100.0)],
        &[driver(0, 0, &[0])],
        &DecisionSet::default(),
    );
    use EventName::*;
    assert_eq!(
        events_of(&result, AgentKind::Traveller, 0),
        vec![
            (100.0, Plans),
            (100.0, Requests),
            (100.0, ReceivesOffer),
            (100.0, AcceptsOffer),
            (160.0, PickedUp),
            (280.0, Arrives)
        ]
    );
    assert_eq!(
        events_of(&result, AgentKind::Driver, 0),
        vec![
            (0.0, StartsShift),
            (100.0, ReceivesRequest),
            (100.0, AcceptsRequest),
            (160.0, ArrivesPickup),
            (160.0, DepartsWithTraveller),
            (280.0, CompletesRide),
            (3600.0, EndsShift)
        ]
    );
    let d = &result.drivers[0];
    assert_eq!(d.empty_drive_s, 60.0);
    assert_eq!(d.occupied_s, 120.0);
    assert_eq!(d.mileage_m, 1800.0);
    assert_eq!(d.idle_s, 3600.0 - 180.0);
    assert_eq!(d.n_rides, 1);
    // 1.2 km at 1.0/km, 25 % commission
    assert!((d.earnings_today - 0.9).abs() < 1e-12);
    assert!((result.platforms[0].revenue_total - 1.2).abs() < 1e-12);
    assert_eq!(result.travellers[0].status, TravellerStatus::Arrived);
}

#[test]
fn determinism_bit_identical_logs() {
    let w = world();
    let cfg = config(r#""instant""#, 2);
    let requests = crate::scenario::generate_demand(&w.net, 60, 3000.0, 3);
    let drivers = crate::scenario::generate_supply(&w.net, 4, 3600.0, 4, &[0, 1]);
    let a = run(&cfg, &w, &requests, &drivers, &DecisionSet::default());
    let b = run(&cfg, &w, &requests, &drivers, &DecisionSet::default());
    assert_eq!(log::events_to_csv(&a.log), log::events_to_csv(&b.log));
}

#[test]
fn no_driver_means_unserved_at_horizon() {
    let w = world();
    let cfg = config(r#""instant""#, 1);
    let result = run(&cfg, &w, &[request(0, 1, 2, 10.0)], &[], &DecisionSet::default());
    let last = result.log.last().unwrap();
    assert_eq!((last.t, last.event), (3600.0, EventName::Unserved));
}

#[test]
fn batched_matching_waits_for_window() {
    let w = world();
    let cfg = config(r#"{"batched": {"window_s": 60}}"#, 1);
    let result = run(
        &cfg,
        &w,
        &[request(0, 1, 2, 10.0)],
        &[driver(0, 1, &[0])],
        &DecisionSet::default(),
    );
    let m = result.log.iter().find(|r| r.event == EventName::BatchMatch).unwrap();
    assert_eq!(m.t, 60.0);
    assert_eq!(result.travellers[0].status, TravellerStatus::Arrived);
}

struct AlwaysDecline;
impl DriverDecline for AlwaysDecline {
    fn declines(&self, _: &RequestOfferView<'_>, _: &Behaviour, _: &mut DecisionRng) -> bool {
        true
    }
}

#[test]
fn declines_requeue_until_bound_then_unserved() {
    let w = world();
    let cfg = config(r#""instant""#, 1);
    let mut reg = DecisionRegistry::default();
    reg.register_driver_decline("always", Arc::new(AlwaysDecline)).unwrap();
    let mut names = cfg.decisions.clone();
    names.f_driver_decline = "always".into();
    let set = reg.resolve(&names).unwrap();
    let drivers: Vec<_> = (0..7).map(|i| driver(i, i, &[0])).collect();
    let result = run(&cfg, &w, &[request(0, 8, 0, 5.0)], &drivers, &set);
    let declines = result
        .log
        .iter()
        .filter(|r| r.event == EventName::DeclinesRequest)
        .count();
    assert_eq!(declines, 5);
    // each driver asked at most once
    let mut asked: Vec<_> = result
        .log
        .iter()
        .filter(|r| r.event == EventName::DeclinesRequest)
        .map(|r| r.agent_id)
        .collect();
    asked.dedup();
    assert_eq!(asked.len(), 5);
    assert_eq!(result.travellers[0].status, TravellerStatus::Unserved);
    assert_eq!(
        result.log.iter().find(|r| r.event == EventName::Unserved).unwrap().t,
        5.0
    );
}

struct AlwaysReject;
impl TravellerMode for AlwaysReject {
    fn choose(&self, _: &TravellerDayView<'_>, _: &Offer, _: &Behaviour, _: &mut DecisionRng) -> ModeChoice {
        ModeChoice::Reject
    }
}

#[test]
fn traveller_rejections_end_in_rejected_offer() {
    let w = world();
    let cfg = config(r#""instant""#, 1);
    let mut reg = DecisionRegistry::default();
    reg.register_trav_mode("never", Arc::new(AlwaysReject)).unwrap();
    let mut names = cfg.decisions.clone();
    names.f_trav_mode = "never".into();
    let set = reg.resolve(&names).unwrap();
    let drivers: Vec<_> = (0..3).map(|i| driver(i, i, &[0])).collect();
    let result = run(&cfg, &w, &[request(0, 8, 0, 5.0)], &drivers, &set);
    // only three drivers exist, so the queue empties before the bound
    assert_eq!(result.travellers[0].rejections, 3);
    assert_eq!(result.travellers[0].status, TravellerStatus::Unserved);

    let drivers: Vec<_> = (0..8).map(|i| driver(i, i, &[0])).collect();
    let result = run(&cfg, &w, &[request(0, 8, 0, 5.0)], &drivers, &set);
    assert_eq!(result.travellers[0].rejections, 5);
    assert_eq!(result.travellers[0].status, TravellerStatus::RejectedOffer);
    // every driver ended idle for the whole shift
    assert!(result.drivers.iter().all(|d| d.idle_s == 3600.0));
}

#[test]
fn multihoming_traveller_picks_cheapest_and_releases_loser() {
    let w = world();
    let mut cfg = config(r#""instant""#, 2);
    cfg.platforms[1].fare_per_km = 0.5;
    let drivers = vec![driver(0, 1, &[0]), driver(1, 2, &[1])];
    let result = run(&cfg, &w, &[request(0, 1, 7, 10.0)], &drivers, &DecisionSet::default());
    let offers = result
        .log
        .iter()
        .filter(|r| r.event == EventName::ReceivesOffer)
        .count();
    assert_eq!(offers, 2);
    assert_eq!(result.travellers[0].accepted.unwrap().platform_id, 1);
    assert_eq!(result.drivers[0].n_rides, 0);
    assert_eq!(result.drivers[1].n_rides, 1);
    assert_eq!(result.drivers[0].idle_s, 3600.0);
}

#[test]
fn ride_in_progress_completes_after_shift_end() {
    let w = world();
    let cfg = config(r#""instant""#, 1);
    let mut d = driver(0, 0, &[0]);
    d.shift_end = 130.0;
    let result = run(&cfg, &w, &[request(0, 1, 7, 100.0)], &[d], &DecisionSet::default());
    let end = result.log.iter().find(|r| r.event == EventName::EndsShift).unwrap();
    assert_eq!(end.t, 280.0);
    assert_eq!(end.meta_f64("overshoot_s"), Some(150.0));
    assert_eq!(result.travellers[0].status, TravellerStatus::Arrived);
}

#[test]
fn no_new_matches_after_shift_end() {
    let w = world();
    let cfg = config(r#""instant""#, 1);
    let mut d = driver(0, 0, &[0]);
    d.shift_end = 50.0;
    let result = run(&cfg, &w, &[request(0, 1, 7, 100.0)], &[d], &DecisionSet::default());
    assert_eq!(result.travellers[0].status, TravellerStatus::Unserved);
    assert_eq!(result.drivers[0].idle_s, 50.0);
}

#[test]
fn boarding_time_counts_as_occupied() {
    let w = world();
    let mut cfg = config(r#""instant""#, 1);
    cfg.behaviour.set(crate::scenario::keys::T_BOARD_S, 30.0);
    cfg.behaviour.set(crate::scenario::keys::T_ALIGHT_S, 15.0);
    let result = run(
        &cfg,
        &w,
        &[request(0, 1, 7, 100.0)],
        &[driver(0, 0, &[0])],
        &DecisionSet::default(),
    );
    assert_eq!(result.drivers[0].occupied_s, 165.0);
    let arrive = result.log.iter().find(|r| r.event == EventName::Arrives).unwrap();
    assert_eq!(arrive.t, 325.0);
}

#[test]
fn repositioning_accrues_empty_drive() {
    let w = world();
    let mut cfg = config(r#""instant""#, 1);
    cfg.decisions.f_driver_repos = "repos_to_demand".into();
    let set = DecisionRegistry::default().resolve(&cfg.decisions).unwrap();
    // second request at node 8 stays open (only one driver) while the
    // first ride completes, so the driver repositions there
    let requests = [request(0, 1, 7, 0.0), request(1, 8, 0, 10.0)];
    let result = run(&cfg, &w, &requests, &[driver(0, 0, &[0])], &set);
    assert!(result.log.iter().any(|r| r.event == EventName::StartsRepositioning));
    let d = &result.drivers[0];
    let worked = 3600.0;
    assert!((d.idle_s + d.empty_drive_s + d.occupied_s - worked).abs() < 1e-9);
}

#[test]
fn invalid_input_is_rejected() {
    let w = world();
    let cfg = config(r#""instant""#, 1);
    let inputs = DayInputs {
        net: &w.net,
        skim: &w.skim,
        requests: &[request(0, 1, 1, 5.0)],
        drivers: &[],
        seed: 0,
    };
    assert!(matches!(
        run_day(&cfg, &inputs, &DecisionSet::default(), 0, &DayState::default()),
        Err(EngineError::Input(_))
    ));
}
