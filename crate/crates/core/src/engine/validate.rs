//! Replays an event log through the traveller and driver status machines.
//!
//! The log carries no explicit event for two driver transitions: a reserved
//! driver whose offer lost (or was rejected) silently returns to idle, and a
//! reserved driver whose offer was accepted silently starts the pickup leg.
//! The validator therefore treats "reserved" as a state that may continue
//! with either a new request or the pickup arrival.

use std::collections::BTreeMap;

use thiserror::Error;

use super::log::{AgentKind, EventName, EventRecord};
use crate::scenario::AgentId;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("log row {index} (day {day}, t={t}, {agent}): {message}")]
pub struct ValidationError {
    pub index: usize,
    pub day: u32,
    pub t: f64,
    pub agent: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trav {
    Planning,
    AwaitingOffers,
    AwaitingPickup,
    InVehicle,
    Arrived,
    OptedOut,
    RejectedOffer,
    Unserved,
}

impl Trav {
    fn terminal(self) -> bool {
        matches!(
            self,
            Trav::Arrived | Trav::OptedOut | Trav::RejectedOffer | Trav::Unserved
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Drv {
    Offline,
    Idle,
    /// Received a request, reply pending.
    Asked(AgentId),
    /// Accepted a request; the traveller has not decided yet.
    Reserved(AgentId),
    Boarding(AgentId),
    Carrying(AgentId),
    Repositioning,
    OffShift,
}

fn transition_traveller(state: Option<Trav>, rec: &EventRecord) -> Result<Trav, String> {
    use EventName as E;
    let next = match (state, rec.event) {
        (None, E::Plans) => Trav::Planning,
        (Some(Trav::Planning), E::OptsOut) => Trav::OptedOut,
        (Some(Trav::Planning), E::Requests) => Trav::AwaitingOffers,
        (Some(Trav::AwaitingOffers), E::ReceivesOffer) => Trav::AwaitingOffers,
        (Some(Trav::AwaitingOffers), E::AcceptsOffer) => Trav::AwaitingPickup,
        (Some(Trav::AwaitingOffers), E::RejectsOffer) => {
            if rec.meta_u32("terminal") == Some(1) {
                Trav::RejectedOffer
            } else {
                Trav::AwaitingOffers
            }
        }
        (Some(Trav::AwaitingOffers), E::Unserved) => Trav::Unserved,
        (Some(Trav::AwaitingPickup), E::PickedUp) => Trav::InVehicle,
        (Some(Trav::InVehicle), E::Arrives) => Trav::Arrived,
        (state, event) => return Err(format!("{event} not allowed in state {state:?}")),
    };
    Ok(next)
}

fn request_of(rec: &EventRecord) -> Result<AgentId, String> {
    rec.meta_u32("request_id")
        .ok_or_else(|| format!("{} without request_id", rec.event))
}

fn transition_driver(state: Option<Drv>, rec: &EventRecord) -> Result<Drv, String> {
    use EventName as E;
    let next = match (state, rec.event) {
        (None, E::OptsOut) => Drv::Offline,
        (None, E::StartsShift) => Drv::Idle,
        (Some(Drv::Idle | Drv::Reserved(_)), E::ReceivesRequest) => Drv::Asked(request_of(rec)?),
        (Some(Drv::Asked(r)), E::AcceptsRequest) if request_of(rec)? == r => Drv::Reserved(r),
        (Some(Drv::Asked(r)), E::DeclinesRequest) if request_of(rec)? == r => Drv::Idle,
        (Some(Drv::Reserved(r)), E::ArrivesPickup) if request_of(rec)? == r => Drv::Boarding(r),
        (Some(Drv::Boarding(r)), E::DepartsWithTraveller) if request_of(rec)? == r => Drv::Carrying(r),
        (Some(Drv::Carrying(r)), E::CompletesRide) if request_of(rec)? == r => Drv::Idle,
        (Some(Drv::Idle), E::StartsRepositioning) => Drv::Repositioning,
        (Some(Drv::Repositioning), E::ArrivesReposition) => Drv::Idle,
        (Some(Drv::Idle | Drv::Reserved(_)), E::EndsShift) => Drv::OffShift,
        (state, event) => return Err(format!("{event} not allowed in state {state:?}")),
    };
    Ok(next)
}

/// Checks every per-agent event sequence against the status machines, that
/// time never runs backwards within a day, and that every agent ends the day
/// in a terminal state.
pub fn validate_log(log: &[EventRecord]) -> Result<(), ValidationError> {
    let mut travellers: BTreeMap<(u32, AgentId), (Trav, usize)> = BTreeMap::new();
    let mut drivers: BTreeMap<(u32, AgentId), (Drv, usize)> = BTreeMap::new();
    let mut clock: Option<(u32, f64)> = None;
    for (index, rec) in log.iter().enumerate() {
        let err = |message: String| ValidationError {
            index,
            day: rec.day,
            t: rec.t,
            agent: format!("{} {}", rec.agent_kind.as_str(), rec.agent_id),
            message,
        };
        if !rec.t.is_finite() || rec.t < 0.0 {
            return Err(err("invalid timestamp".into()));
        }
        if let Some((day, t)) = clock {
            if rec.day < day || (rec.day == day && rec.t < t) {
                return Err(err("time runs backwards".into()));
            }
        }
        clock = Some((rec.day, rec.t));
        let key = (rec.day, rec.agent_id);
        match rec.agent_kind {
            AgentKind::Traveller => {
                let state = travellers.get(&key).map(|s| s.0);
                let next = transition_traveller(state, rec).map_err(err)?;
                travellers.insert(key, (next, index));
            }
            AgentKind::Driver => {
                let state = drivers.get(&key).map(|s| s.0);
                let next = transition_driver(state, rec).map_err(err)?;
                drivers.insert(key, (next, index));
            }
            AgentKind::Platform => {
                if !matches!(rec.event, EventName::Match | EventName::BatchMatch) {
                    return Err(err(format!("{} is not a platform event", rec.event)));
                }
                request_of(rec).map_err(err)?;
                rec.meta_u32("driver_id")
                    .ok_or_else(|| err("match without driver_id".into()))?;
            }
        }
    }
    let unfinished = |index: usize, message: String| {
        let rec = &log[index];
        ValidationError {
            index,
            day: rec.day,
            t: rec.t,
            agent: format!("{} {}", rec.agent_kind.as_str(), rec.agent_id),
            message,
        }
    };
    for (state, index) in travellers.values() {
        if !state.terminal() {
            return Err(unfinished(*index, format!("day ends in non-terminal state {state:?}")));
        }
    }
    for (state, index) in drivers.values() {
        if !matches!(state, Drv::Offline | Drv::OffShift) {
            return Err(unfinished(*index, format!("day ends in state {state:?}")));
        }
    }
    Ok(())
}
