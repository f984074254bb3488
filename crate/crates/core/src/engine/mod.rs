//! Discrete-event core: one simulated day of traveller, driver and platform
//! routines.
//!
//! Events run in `(time, agent kind, agent id, insertion order)` order with
//! platforms before drivers before travellers at equal timestamps, so
//! matching sees every state change made at an instant before travellers
//! react to it. A traveller's offers made at one instant are resolved by a
//! single decision event at that same instant.

pub mod log;
mod queue;
pub mod validate;

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use thiserror::Error;

use crate::decisions::{
    DecisionError, DecisionRng, DecisionSet, DriverDayView, MatchInput, MatchRequest, ModeChoice, Outcome, ReposView,
    RequestOfferView, TravellerDayView,
};
use crate::netgraph::{NodeId, RoadNetwork, SkimMatrix};
use crate::platform::{make_offer, Offer, PlatformState, TriggerCause};
use crate::rng;
use crate::scenario::{keys, AgentId, DriverSpec, MatchingMode, PlatformId, Request, ScenarioConfig};

use log::{AgentKind, EventName, EventRecord, Meta};
use queue::{Event, EventQueue};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("internal consistency failure at t={t}: {agent}: {message}")]
    Consistency { t: f64, agent: String, message: String },
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error("invalid input: {0}")]
    Input(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TravellerStatus {
    Planning,
    Requesting,
    AwaitingOffers,
    AwaitingPickup,
    InVehicle,
    Arrived,
    OptedOut,
    RejectedOffer,
    Unserved,
}

impl TravellerStatus {
    pub fn outcome(self) -> Option<Outcome> {
        match self {
            TravellerStatus::Arrived => Some(Outcome::Arrived),
            TravellerStatus::OptedOut => Some(Outcome::OptedOut),
            TravellerStatus::RejectedOffer => Some(Outcome::RejectedOffer),
            TravellerStatus::Unserved => Some(Outcome::Unserved),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriverStatus {
    Offline,
    Idle,
    EnRoutePickup,
    WithTraveller,
    Repositioning,
    OffShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MovePurpose {
    Pickup,
    Service,
    Reposition,
}

#[derive(Debug, Clone)]
pub struct TravellerState {
    pub traveller_id: AgentId,
    pub request: Request,
    pub status: TravellerStatus,
    /// Offers collected at the current instant, awaiting a decision.
    pub offers: Vec<Offer>,
    pub rejections: u32,
    /// Drivers who declined or were rejected for this request.
    pub excluded: Vec<AgentId>,
    pub accepted: Option<Offer>,
    decision_pending: bool,
}

#[derive(Debug, Clone)]
pub struct DriverState {
    pub driver_id: AgentId,
    pub spec: DriverSpec,
    pub status: DriverStatus,
    pub position: NodeId,
    pub earnings_today: f64,
    pub occupied_s: f64,
    pub empty_drive_s: f64,
    pub idle_s: f64,
    pub mileage_m: f64,
    pub n_rides: u32,
    pub participated: bool,
    /// Request index and platform index of an accepted but undecided offer.
    reserved: Option<(usize, usize)>,
    idle_since: Option<f64>,
    shift_over: bool,
    ride: Option<Ride>,
    leg: Option<Leg>,
}

impl DriverState {
    fn new(spec: DriverSpec) -> Self {
        Self {
            driver_id: spec.driver_id,
            position: spec.home_node,
            spec,
            status: DriverStatus::Offline,
            earnings_today: 0.0,
            occupied_s: 0.0,
            empty_drive_s: 0.0,
            idle_s: 0.0,
            mileage_m: 0.0,
            n_rides: 0,
            participated: false,
            reserved: None,
            idle_since: None,
            shift_over: false,
            ride: None,
            leg: None,
        }
    }

    /// Scheduled hours' income, the learning signal between days.
    pub fn income_per_hour(&self) -> f64 {
        self.earnings_today / self.spec.shift_hours()
    }
}

#[derive(Debug, Clone, Copy)]
struct Ride {
    traveller: usize,
    offer: Offer,
    picked_up_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    pub purpose: MovePurpose,
    pub from: NodeId,
    pub to: NodeId,
    pub depart: f64,
    pub arrive: f64,
    pub distance: f64,
}

/// Experience carried from one day to the next.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DayState {
    pub drivers: BTreeMap<AgentId, DriverMemory>,
    pub travellers: BTreeMap<AgentId, TravellerMemory>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DriverMemory {
    pub learned_income: Option<f64>,
    pub income_history: Vec<Option<f64>>,
    pub participated_yesterday: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TravellerMemory {
    pub last_outcome: Option<Outcome>,
}

#[derive(Debug, Clone, Copy)]
pub struct DayInputs<'a> {
    pub net: &'a RoadNetwork,
    pub skim: &'a SkimMatrix,
    pub requests: &'a [Request],
    pub drivers: &'a [DriverSpec],
    /// Run seed; the day's decision stream derives from it.
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct DayResult {
    pub day: u32,
    pub log: Vec<EventRecord>,
    pub travellers: Vec<TravellerState>,
    pub drivers: Vec<DriverState>,
    pub platforms: Vec<PlatformState>,
}

/// Simulates one day.
pub fn run_day(
    config: &ScenarioConfig,
    inputs: &DayInputs<'_>,
    decisions: &DecisionSet,
    day: u32,
    state: &DayState,
) -> Result<DayResult, EngineError> {
    let mut engine = Engine::new(config, inputs, decisions, day, state)?;
    engine.run()?;
    Ok(engine.finish())
}

struct Engine<'a> {
    config: &'a ScenarioConfig,
    net: &'a RoadNetwork,
    skim: &'a SkimMatrix,
    decisions: &'a DecisionSet,
    state: &'a DayState,
    day: u32,
    now: f64,
    queue: EventQueue,
    log: Vec<EventRecord>,
    travellers: Vec<TravellerState>,
    drivers: Vec<DriverState>,
    platforms: Vec<PlatformState>,
    request_index: HashMap<AgentId, usize>,
    driver_index: HashMap<AgentId, usize>,
    platform_index: HashMap<PlatformId, usize>,
    rng: DecisionRng,
    max_rejections: u32,
    t_board: f64,
    t_alight: f64,
    jitter: f64,
}

fn agent(kind: AgentKind, id: AgentId) -> String {
    format!("{} {id}", kind.as_str())
}

impl<'a> Engine<'a> {
    fn new(
        config: &'a ScenarioConfig,
        inputs: &DayInputs<'a>,
        decisions: &'a DecisionSet,
        day: u32,
        state: &'a DayState,
    ) -> Result<Self, EngineError> {
        decisions.check_params(&config.behaviour)?;
        let platforms: Vec<PlatformState> = config.platforms.iter().cloned().map(PlatformState::new).collect();
        let platform_index = platforms.iter().enumerate().map(|(i, p)| (p.id(), i)).collect();
        let travellers: Vec<TravellerState> = inputs
            .requests
            .iter()
            .map(|r| TravellerState {
                traveller_id: r.traveller_id,
                request: *r,
                status: TravellerStatus::Planning,
                offers: Vec::new(),
                rejections: 0,
                excluded: Vec::new(),
                accepted: None,
                decision_pending: false,
            })
            .collect();
        let drivers: Vec<DriverState> = inputs.drivers.iter().cloned().map(DriverState::new).collect();
        let mut request_index = HashMap::new();
        for (i, t) in travellers.iter().enumerate() {
            if request_index.insert(t.request.request_id, i).is_some() {
                return Err(EngineError::Input(format!(
                    "duplicate request id {}",
                    t.request.request_id
                )));
            }
            let r = &t.request;
            if !inputs.net.contains(r.origin) || !inputs.net.contains(r.destination) || r.origin == r.destination {
                return Err(EngineError::Input(format!(
                    "request {} has invalid endpoints",
                    r.request_id
                )));
            }
            if !(0.0..config.horizon_s).contains(&r.t_request) {
                return Err(EngineError::Input(format!(
                    "request {} outside the horizon",
                    r.request_id
                )));
            }
        }
        let mut driver_index = HashMap::new();
        for (i, d) in drivers.iter().enumerate() {
            if driver_index.insert(d.driver_id, i).is_some() {
                return Err(EngineError::Input(format!("duplicate driver id {}", d.driver_id)));
            }
            if !inputs.net.contains(d.spec.home_node) {
                return Err(EngineError::Input(format!("driver {} home node invalid", d.driver_id)));
            }
        }
        let behaviour = &config.behaviour;
        let mut engine = Self {
            config,
            net: inputs.net,
            skim: inputs.skim,
            decisions,
            state,
            day,
            now: 0.0,
            queue: EventQueue::default(),
            log: Vec::with_capacity(16 * travellers.len() + 4 * drivers.len()),
            travellers,
            drivers,
            platforms,
            request_index,
            driver_index,
            platform_index,
            rng: rng::indexed_stream(inputs.seed, "decisions", day as u64),
            max_rejections: config.max_rejections(),
            t_board: behaviour.get_or(keys::T_BOARD_S, 0.0),
            t_alight: behaviour.get_or(keys::T_ALIGHT_S, 0.0),
            jitter: behaviour.get_or(keys::SERVICE_JITTER, 0.0),
        };
        engine.probe_repositioning()?;
        Ok(engine)
    }

    /// Calls the repositioning hook once on a synthetic view to catch
    /// modules that return nodes outside the network.
    fn probe_repositioning(&mut self) -> Result<(), EngineError> {
        let open: BTreeMap<NodeId, u32> = (0..self.net.n_nodes() as NodeId).map(|n| (n, 1)).collect();
        let view = ReposView {
            driver_id: AgentId::MAX,
            position: 0,
            now: 0.0,
            n_nodes: self.net.n_nodes(),
            open_requests: &open,
        };
        let mut probe_rng = rng::indexed_stream(0, "repos-probe", 0);
        let target = self
            .decisions
            .driver_repos
            .target(&view, &self.config.behaviour, &mut probe_rng);
        self.check_repos_target(target)
    }

    fn check_repos_target(&self, target: Option<NodeId>) -> Result<(), EngineError> {
        match target {
            Some(node) if !self.net.contains(node) => Err(DecisionError::InvalidOutput {
                hook: "f_driver_repos",
                message: format!("node {node} is not in the network"),
            }
            .into()),
            _ => Ok(()),
        }
    }

    fn run(&mut self) -> Result<(), EngineError> {
        let horizon = self.config.horizon_s;
        for (i, d) in self.drivers.iter().enumerate() {
            self.queue.push(d.spec.shift_start, Event::ShiftStart(i), d.driver_id);
            self.queue.push(d.spec.shift_end, Event::ShiftEnd(i), d.driver_id);
        }
        for (i, t) in self.travellers.iter().enumerate() {
            self.queue.push(t.request.t_request, Event::Request(i), t.traveller_id);
        }
        for (i, p) in self.platforms.iter().enumerate() {
            if let Some(at) = p.next_batch_at.filter(|&at| at < horizon) {
                self.queue.push(at, Event::BatchBoundary(i), p.id());
            }
        }
        self.queue.push(horizon, Event::HorizonEnd, AgentId::MAX);

        while let Some((t, event)) = self.queue.pop() {
            if t < self.now {
                return Err(self.fail(AgentKind::Platform, 0, "event scheduled in the past"));
            }
            self.now = t;
            match event {
                Event::BatchBoundary(p) => self.on_batch_boundary(p)?,
                Event::ShiftStart(d) => self.on_shift_start(d)?,
                Event::ShiftEnd(d) => self.on_shift_end(d)?,
                Event::ArrivePickup(d) => self.on_arrive_pickup(d)?,
                Event::Depart(d) => self.on_depart(d)?,
                Event::ArriveDropoff(d) => self.on_arrive_dropoff(d)?,
                Event::CompleteRide(d) => self.on_complete_ride(d)?,
                Event::ArriveReposition(d) => self.on_arrive_reposition(d)?,
                Event::Request(t) => self.on_request(t)?,
                Event::Decide(t) => self.on_decide(t)?,
                Event::HorizonEnd => self.on_horizon_end()?,
            }
        }

        for t in &self.travellers {
            if t.status.outcome().is_none() {
                return Err(self.fail(
                    AgentKind::Traveller,
                    t.traveller_id,
                    &format!("ended the day in {:?}", t.status),
                ));
            }
        }
        for d in &self.drivers {
            if !matches!(d.status, DriverStatus::OffShift | DriverStatus::Offline) {
                return Err(self.fail(
                    AgentKind::Driver,
                    d.driver_id,
                    &format!("ended the day in {:?}", d.status),
                ));
            }
        }
        Ok(())
    }

    fn finish(self) -> DayResult {
        DayResult {
            day: self.day,
            log: self.log,
            travellers: self.travellers,
            drivers: self.drivers,
            platforms: self.platforms,
        }
    }

    fn fail(&self, kind: AgentKind, id: AgentId, message: &str) -> EngineError {
        EngineError::Consistency {
            t: self.now,
            agent: agent(kind, id),
            message: message.to_owned(),
        }
    }

    fn record(&mut self, kind: AgentKind, id: AgentId, event: EventName, node: Option<NodeId>, meta: Meta) {
        self.log.push(EventRecord {
            day: self.day,
            t: self.now,
            agent_kind: kind,
            agent_id: id,
            event,
            node: node.map_or(-1, i64::from),
            meta: meta.finish(),
        });
    }

    fn traveller_view<'b>(tr: &'b TravellerState, day: u32, state: &DayState) -> TravellerDayView<'b> {
        TravellerDayView {
            traveller_id: tr.traveller_id,
            request: &tr.request,
            day,
            previous_outcome: state.travellers.get(&tr.traveller_id).and_then(|m| m.last_outcome),
        }
    }

    fn service_duration(&mut self, base: f64) -> f64 {
        if base <= 0.0 {
            return 0.0;
        }
        if self.jitter > 0.0 {
            let u: f64 = self.rng.random();
            base * (1.0 + self.jitter * (2.0 * u - 1.0))
        } else {
            base
        }
    }

    // -- traveller routine -------------------------------------------------

    fn on_request(&mut self, t: usize) -> Result<(), EngineError> {
        let (id, request) = (self.travellers[t].traveller_id, self.travellers[t].request);
        self.record(
            AgentKind::Traveller,
            id,
            EventName::Plans,
            Some(request.origin),
            Meta::new()
                .kv("request_id", request.request_id)
                .kv("destination", request.destination),
        );
        let view = Self::traveller_view(&self.travellers[t], self.day, self.state);
        let opts_out = self
            .decisions
            .trav_out
            .opts_out(&view, &self.config.behaviour, &mut self.rng);
        if opts_out {
            self.travellers[t].status = TravellerStatus::OptedOut;
            self.record(
                AgentKind::Traveller,
                id,
                EventName::OptsOut,
                Some(request.origin),
                Meta::new(),
            );
            return Ok(());
        }
        self.travellers[t].status = TravellerStatus::Requesting;
        let platforms: Vec<String> = self.platforms.iter().map(|p| p.id().to_string()).collect();
        self.record(
            AgentKind::Traveller,
            id,
            EventName::Requests,
            Some(request.origin),
            Meta::new()
                .kv("request_id", request.request_id)
                .kv("platforms", platforms.join("|")),
        );
        self.travellers[t].status = TravellerStatus::AwaitingOffers;
        self.enqueue_everywhere(t);
        self.trigger_all(TriggerCause::RequestArrived)
    }

    fn enqueue_everywhere(&mut self, t: usize) {
        let request = self.travellers[t].request;
        let now = self.now;
        for p in &mut self.platforms {
            p.enqueue(&request, now);
        }
    }

    fn dequeue_everywhere(&mut self, t: usize) {
        let id = self.travellers[t].request.request_id;
        for p in &mut self.platforms {
            p.dequeue(id);
        }
    }

    fn on_decide(&mut self, t: usize) -> Result<(), EngineError> {
        let tr = &mut self.travellers[t];
        tr.decision_pending = false;
        let offers = std::mem::take(&mut tr.offers);
        let id = tr.traveller_id;
        let origin = tr.request.origin;
        if offers.is_empty() {
            return Ok(());
        }
        if tr.status != TravellerStatus::AwaitingOffers {
            return Err(self.fail(AgentKind::Traveller, id, "received offers outside AWAITING_OFFERS"));
        }
        let pick = self
            .decisions
            .platform_choice
            .pick(&offers, &self.config.behaviour, &mut self.rng);
        let Some(chosen) = offers.get(pick).copied() else {
            return Err(DecisionError::InvalidOutput {
                hook: "f_platform_choice",
                message: format!("index {pick} out of {} offers", offers.len()),
            }
            .into());
        };
        let view = Self::traveller_view(&self.travellers[t], self.day, self.state);
        let choice = self
            .decisions
            .trav_mode
            .choose(&view, &chosen, &self.config.behaviour, &mut self.rng);
        let offer_meta = |o: &Offer| {
            Meta::new()
                .kv("platform_id", o.platform_id)
                .kv("driver_id", o.driver_id)
                .kv("eta_s", o.pickup_eta)
                .kv("fare", o.fare)
        };
        match choice {
            ModeChoice::Accept => {
                self.record(
                    AgentKind::Traveller,
                    id,
                    EventName::AcceptsOffer,
                    Some(origin),
                    offer_meta(&chosen),
                );
                let tr = &mut self.travellers[t];
                tr.status = TravellerStatus::AwaitingPickup;
                tr.accepted = Some(chosen);
                self.dequeue_everywhere(t);
                let d = self.driver_idx(chosen.driver_id)?;
                self.start_pickup(d, t, chosen)?;
                for other in offers.iter().filter(|o| o.driver_id != chosen.driver_id) {
                    let d = self.driver_idx(other.driver_id)?;
                    self.release_driver(d)?;
                }
            }
            ModeChoice::Reject => {
                let tr = &mut self.travellers[t];
                tr.rejections += 1;
                tr.excluded.push(chosen.driver_id);
                let terminal = tr.rejections >= self.max_rejections;
                let rejections = tr.rejections;
                self.record(
                    AgentKind::Traveller,
                    id,
                    EventName::RejectsOffer,
                    Some(origin),
                    offer_meta(&chosen)
                        .kv("rejections", rejections)
                        .kv("terminal", u8::from(terminal)),
                );
                if terminal {
                    self.travellers[t].status = TravellerStatus::RejectedOffer;
                    self.dequeue_everywhere(t);
                } else {
                    self.enqueue_everywhere(t);
                }
                for o in &offers {
                    let d = self.driver_idx(o.driver_id)?;
                    self.release_driver(d)?;
                }
                if !terminal {
                    self.trigger_all(TriggerCause::RequestArrived)?;
                }
            }
        }
        Ok(())
    }

    fn on_horizon_end(&mut self) -> Result<(), EngineError> {
        for p in &mut self.platforms {
            p.drain_waiting();
        }
        for t in 0..self.travellers.len() {
            let tr = &self.travellers[t];
            if tr.status == TravellerStatus::AwaitingOffers && !tr.decision_pending {
                self.mark_unserved(t);
            }
        }
        Ok(())
    }

    fn mark_unserved(&mut self, t: usize) {
        let tr = &mut self.travellers[t];
        tr.status = TravellerStatus::Unserved;
        let (id, origin, rejections) = (tr.traveller_id, tr.request.origin, tr.rejections);
        self.dequeue_everywhere(t);
        self.record(
            AgentKind::Traveller,
            id,
            EventName::Unserved,
            Some(origin),
            Meta::new().kv("rejections", rejections),
        );
    }

    // -- platform routine --------------------------------------------------

    fn trigger_all(&mut self, cause: TriggerCause) -> Result<(), EngineError> {
        for p in 0..self.platforms.len() {
            if self.platforms[p].trigger(cause) {
                self.run_matching(p)?;
            }
        }
        Ok(())
    }

    fn trigger_driver_platforms(&mut self, d: usize) -> Result<(), EngineError> {
        let ids = self.drivers[d].spec.platform_ids.clone();
        for pid in ids {
            let p = self.platform_idx(pid)?;
            if self.platforms[p].trigger(TriggerCause::DriverIdle) {
                self.run_matching(p)?;
            }
        }
        Ok(())
    }

    fn on_batch_boundary(&mut self, p: usize) -> Result<(), EngineError> {
        self.platforms[p].advance_batch(self.now);
        self.run_matching(p)?;
        if let Some(next) = self.platforms[p].next_batch_at.filter(|&n| n < self.config.horizon_s) {
            let id = self.platforms[p].id();
            self.queue.push(next, Event::BatchBoundary(p), id);
        }
        Ok(())
    }

    fn matchable(&self, d: usize) -> bool {
        let driver = &self.drivers[d];
        driver.status == DriverStatus::Idle && driver.reserved.is_none() && !driver.shift_over
    }

    fn run_matching(&mut self, p: usize) -> Result<(), EngineError> {
        loop {
            let platform = &self.platforms[p];
            let requests: Vec<MatchRequest> = platform
                .waiting()
                .iter()
                .map(|q| {
                    let t = self.request_index[&q.request_id];
                    MatchRequest {
                        request_id: q.request_id,
                        origin: self.travellers[t].request.origin,
                        t_request: q.t_request,
                        excluded: self.travellers[t].excluded.clone(),
                    }
                })
                .collect();
            let drivers: Vec<(AgentId, NodeId)> = platform
                .idle()
                .iter()
                .filter_map(|id| {
                    let d = self.driver_index[id];
                    self.matchable(d).then(|| (*id, self.drivers[d].position))
                })
                .collect();
            if requests.is_empty() || drivers.is_empty() {
                return Ok(());
            }
            let input = MatchInput {
                now: self.now,
                mode: platform.spec.matching,
                requests: &requests,
                drivers: &drivers,
                skim: self.skim,
            };
            let assignment = self
                .decisions
                .matcher
                .assign(&input, &self.config.behaviour, &mut self.rng);
            if assignment.pairs.is_empty() {
                return Ok(());
            }
            let mut seen_r = Vec::new();
            let mut seen_d = Vec::new();
            for &(r, d) in &assignment.pairs {
                let valid_r = requests.iter().find(|q| q.request_id == r);
                let ok = valid_r.is_some_and(|q| !q.excluded.contains(&d))
                    && drivers.iter().any(|x| x.0 == d)
                    && !seen_r.contains(&r)
                    && !seen_d.contains(&d);
                if !ok {
                    return Err(DecisionError::InvalidOutput {
                        hook: "f_match",
                        message: format!("pair (request {r}, driver {d}) is not admissible"),
                    }
                    .into());
                }
                seen_r.push(r);
                seen_d.push(d);
            }
            for (r, d) in assignment.pairs {
                let t = self.request_index[&r];
                let d = self.driver_index[&d];
                self.enact_match(p, t, d)?;
            }
        }
    }

    fn enact_match(&mut self, p: usize, t: usize, d: usize) -> Result<(), EngineError> {
        let request = self.travellers[t].request;
        let (driver_id, position) = (self.drivers[d].driver_id, self.drivers[d].position);
        let spec = &self.platforms[p].spec;
        let offer = make_offer(spec, &request, driver_id, position, self.skim);
        let match_event = match spec.matching {
            MatchingMode::Instant => EventName::Match,
            MatchingMode::Batched { .. } => EventName::BatchMatch,
        };
        let platform_id = spec.platform_id;
        self.record(
            AgentKind::Platform,
            platform_id,
            match_event,
            Some(request.origin),
            Meta::new()
                .kv("request_id", request.request_id)
                .kv("driver_id", driver_id)
                .kv("eta_s", offer.pickup_eta)
                .kv("fare", offer.fare),
        );
        self.platforms[p].dequeue(request.request_id);
        self.record(
            AgentKind::Driver,
            driver_id,
            EventName::ReceivesRequest,
            Some(position),
            Meta::new()
                .kv("request_id", request.request_id)
                .kv("platform_id", platform_id)
                .kv("eta_s", offer.pickup_eta)
                .kv("fare", offer.fare),
        );
        let view = RequestOfferView {
            driver_id,
            position,
            now: self.now,
            request: &request,
            offer: &offer,
        };
        let declines = self
            .decisions
            .driver_decline
            .declines(&view, &self.config.behaviour, &mut self.rng);
        let reply = Meta::new()
            .kv("request_id", request.request_id)
            .kv("platform_id", platform_id);
        if declines {
            self.record(
                AgentKind::Driver,
                driver_id,
                EventName::DeclinesRequest,
                Some(position),
                reply,
            );
            let tr = &mut self.travellers[t];
            tr.rejections += 1;
            tr.excluded.push(driver_id);
            if tr.rejections >= self.max_rejections {
                if tr.decision_pending {
                    self.dequeue_everywhere(t);
                } else {
                    self.mark_unserved(t);
                }
            } else {
                self.platforms[p].enqueue(&request, self.now);
            }
            return Ok(());
        }
        self.record(
            AgentKind::Driver,
            driver_id,
            EventName::AcceptsRequest,
            Some(position),
            reply,
        );
        self.drivers[d].reserved = Some((t, p));
        self.withdraw_idle(d)?;
        let tr = &mut self.travellers[t];
        tr.offers.push(offer);
        let (traveller_id, pending) = (tr.traveller_id, tr.decision_pending);
        tr.decision_pending = true;
        self.record(
            AgentKind::Traveller,
            traveller_id,
            EventName::ReceivesOffer,
            Some(request.origin),
            Meta::new()
                .kv("platform_id", platform_id)
                .kv("driver_id", driver_id)
                .kv("eta_s", offer.pickup_eta)
                .kv("fare", offer.fare),
        );
        if !pending {
            self.queue.push(self.now, Event::Decide(t), traveller_id);
        }
        Ok(())
    }

    // -- driver routine ----------------------------------------------------

    fn driver_idx(&self, id: AgentId) -> Result<usize, EngineError> {
        self.driver_index
            .get(&id)
            .copied()
            .ok_or_else(|| self.fail(AgentKind::Driver, id, "unknown driver"))
    }

    fn platform_idx(&self, id: PlatformId) -> Result<usize, EngineError> {
        self.platform_index
            .get(&id)
            .copied()
            .ok_or_else(|| self.fail(AgentKind::Platform, id, "unknown platform"))
    }

    fn withdraw_idle(&mut self, d: usize) -> Result<(), EngineError> {
        let id = self.drivers[d].driver_id;
        for pid in self.drivers[d].spec.platform_ids.clone() {
            let p = self.platform_idx(pid)?;
            self.platforms[p].remove_idle(id);
        }
        Ok(())
    }

    fn close_idle_interval(&mut self, d: usize) {
        let now = self.now;
        let driver = &mut self.drivers[d];
        if let Some(since) = driver.idle_since.take() {
            driver.idle_s += now - since;
        }
    }

    fn on_shift_start(&mut self, d: usize) -> Result<(), EngineError> {
        let id = self.drivers[d].driver_id;
        let home = self.drivers[d].spec.home_node;
        let memory = self.state.drivers.get(&id);
        let view = DriverDayView {
            driver_id: id,
            spec: &self.drivers[d].spec,
            day: self.day,
            income_history: memory.map_or(&[][..], |m| m.income_history.as_slice()),
            learned_income: memory.and_then(|m| m.learned_income),
            participated_yesterday: memory.and_then(|m| m.participated_yesterday),
        };
        let stays_out = self
            .decisions
            .driver_out
            .stays_offline(&view, &self.config.behaviour, &mut self.rng);
        if stays_out {
            self.record(AgentKind::Driver, id, EventName::OptsOut, Some(home), Meta::new());
            return Ok(());
        }
        let platforms: Vec<String> = self.drivers[d]
            .spec
            .platform_ids
            .iter()
            .map(|p| p.to_string())
            .collect();
        let shift_end = self.drivers[d].spec.shift_end;
        self.record(
            AgentKind::Driver,
            id,
            EventName::StartsShift,
            Some(home),
            Meta::new()
                .kv("platforms", platforms.join("|"))
                .kv("shift_end_s", shift_end),
        );
        self.drivers[d].participated = true;
        self.become_idle(d)
    }

    fn become_idle(&mut self, d: usize) -> Result<(), EngineError> {
        let driver = &mut self.drivers[d];
        driver.status = DriverStatus::Idle;
        driver.idle_since = Some(self.now);
        let id = driver.driver_id;
        for pid in driver.spec.platform_ids.clone() {
            let p = self.platform_idx(pid)?;
            self.platforms[p].add_idle(id);
        }
        self.trigger_driver_platforms(d)
    }

    /// A reserved driver whose offer lost or was rejected.
    fn release_driver(&mut self, d: usize) -> Result<(), EngineError> {
        let driver = &mut self.drivers[d];
        if driver.reserved.take().is_none() || driver.status != DriverStatus::Idle {
            return Err(self.fail(
                AgentKind::Driver,
                self.drivers[d].driver_id,
                "released without a reservation",
            ));
        }
        if driver.shift_over {
            return self.end_shift(d);
        }
        let id = driver.driver_id;
        for pid in driver.spec.platform_ids.clone() {
            let p = self.platform_idx(pid)?;
            self.platforms[p].add_idle(id);
        }
        self.trigger_driver_platforms(d)
    }

    fn on_shift_end(&mut self, d: usize) -> Result<(), EngineError> {
        let driver = &mut self.drivers[d];
        if driver.status == DriverStatus::Offline {
            return Ok(());
        }
        driver.shift_over = true;
        if driver.status == DriverStatus::Idle && driver.reserved.is_none() {
            self.end_shift(d)?;
        }
        Ok(())
    }

    fn end_shift(&mut self, d: usize) -> Result<(), EngineError> {
        self.close_idle_interval(d);
        self.withdraw_idle(d)?;
        let now = self.now;
        let driver = &mut self.drivers[d];
        driver.status = DriverStatus::OffShift;
        let overshoot = (now - driver.spec.shift_end).max(0.0);
        let (id, position) = (driver.driver_id, driver.position);
        self.record(
            AgentKind::Driver,
            id,
            EventName::EndsShift,
            Some(position),
            Meta::new().kv("overshoot_s", overshoot),
        );
        Ok(())
    }

    /// Starts a leg and books its time and distance by purpose. Returns the
    /// arrival time.
    fn move_driver(&mut self, d: usize, to: NodeId, purpose: MovePurpose) -> f64 {
        let now = self.now;
        let driver = &mut self.drivers[d];
        let from = driver.position;
        let (time, distance) = (self.skim.travel_time(from, to), self.skim.distance(from, to));
        match purpose {
            MovePurpose::Service => driver.occupied_s += time,
            MovePurpose::Pickup | MovePurpose::Reposition => driver.empty_drive_s += time,
        }
        driver.mileage_m += distance;
        driver.status = match purpose {
            MovePurpose::Pickup => DriverStatus::EnRoutePickup,
            MovePurpose::Service => DriverStatus::WithTraveller,
            MovePurpose::Reposition => DriverStatus::Repositioning,
        };
        let arrive = now + time;
        driver.leg = Some(Leg {
            purpose,
            from,
            to,
            depart: now,
            arrive,
            distance,
        });
        arrive
    }

    fn leg_meta(leg: &Leg) -> Meta {
        Meta::new()
            .kv("leg_s", leg.arrive - leg.depart)
            .kv("leg_m", leg.distance)
    }

    fn start_pickup(&mut self, d: usize, t: usize, offer: Offer) -> Result<(), EngineError> {
        let driver = &self.drivers[d];
        if driver.reserved.map(|r| r.0) != Some(t) || driver.status != DriverStatus::Idle {
            return Err(self.fail(AgentKind::Driver, driver.driver_id, "pickup without a reservation"));
        }
        self.close_idle_interval(d);
        self.drivers[d].reserved = None;
        self.drivers[d].ride = Some(Ride {
            traveller: t,
            offer,
            picked_up_at: f64::NAN,
        });
        let origin = self.travellers[t].request.origin;
        let arrive = self.move_driver(d, origin, MovePurpose::Pickup);
        let id = self.drivers[d].driver_id;
        self.queue.push(arrive, Event::ArrivePickup(d), id);
        Ok(())
    }

    fn current_ride(&self, d: usize) -> Result<Ride, EngineError> {
        self.drivers[d]
            .ride
            .ok_or_else(|| self.fail(AgentKind::Driver, self.drivers[d].driver_id, "no ride in progress"))
    }

    fn on_arrive_pickup(&mut self, d: usize) -> Result<(), EngineError> {
        let ride = self.current_ride(d)?;
        let leg = self.drivers[d].leg.take().expect("pickup leg");
        let driver = &mut self.drivers[d];
        driver.position = leg.to;
        driver.status = DriverStatus::WithTraveller;
        if let Some(r) = driver.ride.as_mut() {
            r.picked_up_at = self.now;
        }
        let id = driver.driver_id;
        if self.travellers[ride.traveller].status != TravellerStatus::AwaitingPickup {
            let id = self.travellers[ride.traveller].traveller_id;
            return Err(self.fail(AgentKind::Traveller, id, "picked up while not awaiting pickup"));
        }
        let tr = &mut self.travellers[ride.traveller];
        tr.status = TravellerStatus::InVehicle;
        let (traveller_id, request_id) = (tr.traveller_id, tr.request.request_id);
        self.record(
            AgentKind::Driver,
            id,
            EventName::ArrivesPickup,
            Some(leg.to),
            Meta::new()
                .kv("request_id", request_id)
                .kv("leg_s", leg.arrive - leg.depart)
                .kv("leg_m", leg.distance),
        );
        self.record(
            AgentKind::Traveller,
            traveller_id,
            EventName::PickedUp,
            Some(leg.to),
            Meta::new().kv("driver_id", id),
        );
        let board = self.service_duration(self.t_board);
        self.drivers[d].occupied_s += board;
        self.queue.push(self.now + board, Event::Depart(d), id);
        Ok(())
    }

    fn on_depart(&mut self, d: usize) -> Result<(), EngineError> {
        let ride = self.current_ride(d)?;
        let request = self.travellers[ride.traveller].request;
        let id = self.drivers[d].driver_id;
        let position = self.drivers[d].position;
        self.record(
            AgentKind::Driver,
            id,
            EventName::DepartsWithTraveller,
            Some(position),
            Meta::new().kv("request_id", request.request_id),
        );
        let arrive = self.move_driver(d, request.destination, MovePurpose::Service);
        self.queue.push(arrive, Event::ArriveDropoff(d), id);
        Ok(())
    }

    fn on_arrive_dropoff(&mut self, d: usize) -> Result<(), EngineError> {
        let leg = self.drivers[d].leg.expect("service leg");
        self.drivers[d].position = leg.to;
        let alight = self.service_duration(self.t_alight);
        self.drivers[d].occupied_s += alight;
        let id = self.drivers[d].driver_id;
        self.queue.push(self.now + alight, Event::CompleteRide(d), id);
        Ok(())
    }

    fn on_complete_ride(&mut self, d: usize) -> Result<(), EngineError> {
        let ride = self.current_ride(d)?;
        let leg = self.drivers[d].leg.take().expect("service leg");
        let p = self.platform_idx(ride.offer.platform_id)?;
        let fare = ride.offer.fare;
        let (payout, cut) = self.platforms[p].settle(fare);
        let driver = &mut self.drivers[d];
        driver.earnings_today += payout;
        driver.n_rides += 1;
        driver.ride = None;
        let (id, position) = (driver.driver_id, driver.position);
        let tr = &mut self.travellers[ride.traveller];
        tr.status = TravellerStatus::Arrived;
        let (traveller_id, request_id) = (tr.traveller_id, tr.request.request_id);
        self.record(
            AgentKind::Driver,
            id,
            EventName::CompletesRide,
            Some(position),
            Self::leg_meta(&leg)
                .kv("request_id", request_id)
                .kv("platform_id", ride.offer.platform_id)
                .kv("fare", fare)
                .kv("payout", payout)
                .kv("commission", cut),
        );
        self.record(
            AgentKind::Traveller,
            traveller_id,
            EventName::Arrives,
            Some(position),
            Meta::new()
                .kv("driver_id", id)
                .kv("platform_id", ride.offer.platform_id)
                .kv("fare", fare),
        );
        debug_assert!(!ride.picked_up_at.is_nan());
        self.after_ride(d)
    }

    fn open_requests(&self) -> BTreeMap<NodeId, u32> {
        let mut open = BTreeMap::new();
        for t in &self.travellers {
            if t.status == TravellerStatus::AwaitingOffers {
                *open.entry(t.request.origin).or_insert(0) += 1;
            }
        }
        open
    }

    fn after_ride(&mut self, d: usize) -> Result<(), EngineError> {
        if self.drivers[d].shift_over {
            return self.end_shift(d);
        }
        let open = self.open_requests();
        let driver = &self.drivers[d];
        let view = ReposView {
            driver_id: driver.driver_id,
            position: driver.position,
            now: self.now,
            n_nodes: self.net.n_nodes(),
            open_requests: &open,
        };
        let target = self
            .decisions
            .driver_repos
            .target(&view, &self.config.behaviour, &mut self.rng);
        self.check_repos_target(target)?;
        match target {
            Some(node) if node != self.drivers[d].position => {
                let (id, position) = (self.drivers[d].driver_id, self.drivers[d].position);
                self.record(
                    AgentKind::Driver,
                    id,
                    EventName::StartsRepositioning,
                    Some(position),
                    Meta::new().kv("target", node),
                );
                let arrive = self.move_driver(d, node, MovePurpose::Reposition);
                self.queue.push(arrive, Event::ArriveReposition(d), id);
                Ok(())
            }
            _ => self.become_idle(d),
        }
    }

    fn on_arrive_reposition(&mut self, d: usize) -> Result<(), EngineError> {
        let leg = self.drivers[d].leg.take().expect("reposition leg");
        self.drivers[d].position = leg.to;
        let id = self.drivers[d].driver_id;
        self.record(
            AgentKind::Driver,
            id,
            EventName::ArrivesReposition,
            Some(leg.to),
            Self::leg_meta(&leg),
        );
        if self.drivers[d].shift_over {
            self.end_shift(d)
        } else {
            self.become_idle(d)
        }
    }
}

#[cfg(test)]
mod tests;
