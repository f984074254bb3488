//! Append-only event log and its CSV form.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::scenario::AgentId;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("event log row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("event log record {index}: {message}")]
    Invalid { index: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentKind {
    Platform,
    Driver,
    Traveller,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Platform => "PLATFORM",
            AgentKind::Driver => "DRIVER",
            AgentKind::Traveller => "TRAVELLER",
        }
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PLATFORM" => Ok(AgentKind::Platform),
            "DRIVER" => Ok(AgentKind::Driver),
            "TRAVELLER" => Ok(AgentKind::Traveller),
            other => Err(format!("unknown agent kind `{other}`")),
        }
    }
}

macro_rules! event_names {
    ($($variant:ident => $text:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum EventName {
            $($variant),*
        }

        impl EventName {
            pub fn as_str(self) -> &'static str {
                match self {
                    $(EventName::$variant => $text),*
                }
            }
        }

        impl FromStr for EventName {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok(EventName::$variant),)*
                    other => Err(format!("unknown event `{other}`")),
                }
            }
        }
    };
}

event_names! {
    Plans => "PLANS",
    OptsOut => "OPTS_OUT",
    Requests => "REQUESTS",
    ReceivesOffer => "RECEIVES_OFFER",
    AcceptsOffer => "ACCEPTS_OFFER",
    RejectsOffer => "REJECTS_OFFER",
    PickedUp => "PICKED_UP",
    Arrives => "ARRIVES",
    Unserved => "UNSERVED",
    StartsShift => "STARTS_SHIFT",
    ReceivesRequest => "RECEIVES_REQUEST",
    AcceptsRequest => "ACCEPTS_REQUEST",
    DeclinesRequest => "DECLINES_REQUEST",
    ArrivesPickup => "ARRIVES_PICKUP",
    DepartsWithTraveller => "DEPARTS_WITH_TRAVELLER",
    CompletesRide => "COMPLETES_RIDE",
    StartsRepositioning => "STARTS_REPOSITIONING",
    ArrivesReposition => "ARRIVES_REPOSITION",
    EndsShift => "ENDS_SHIFT",
    Match => "MATCH",
    BatchMatch => "BATCH_MATCH",
}

impl fmt::Display for EventName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub day: u32,
    pub t: f64,
    pub agent_kind: AgentKind,
    pub agent_id: AgentId,
    pub event: EventName,
    /// `-1` when the event has no location.
    pub node: i64,
    /// `key=value` pairs joined by `;`.
    pub meta: String,
}

impl EventRecord {
    pub fn meta_get(&self, key: &str) -> Option<&str> {
        self.meta
            .split(';')
            .filter_map(|kv| kv.split_once('='))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta_get(key)?.parse().ok()
    }

    pub fn meta_u32(&self, key: &str) -> Option<u32> {
        self.meta_get(key)?.parse().ok()
    }
}

/// Builds a `meta` string.
#[derive(Debug, Default)]
pub struct Meta(String);

impl Meta {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn kv(mut self, key: &str, value: impl fmt::Display) -> Self {
        if !self.0.is_empty() {
            self.0.push(';');
        }
        let _ = write!(self.0, "{key}={value}");
        self
    }

    pub fn finish(self) -> String {
        self.0
    }
}

pub const EVENTS_HEADER: &str = "day,t_s,agent_kind,agent_id,event,node,meta";

pub fn events_to_csv(records: &[EventRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(EVENTS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.day,
            r.t,
            r.agent_kind.as_str(),
            r.agent_id,
            r.event,
            r.node,
            r.meta
        );
    }
    out
}

pub fn write_events(path: &Path, records: &[EventRecord]) -> Result<(), LogError> {
    fs::write(path, events_to_csv(records)).map_err(|e| LogError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn events_from_csv(text: &str) -> Result<Vec<EventRecord>, LogError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == EVENTS_HEADER => {}
        _ => {
            return Err(LogError::Parse {
                row: 0,
                message: format!("expected header `{EVENTS_HEADER}`"),
            })
        }
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let row = i + 1;
            let err = |message: String| LogError::Parse { row, message };
            let fields: Vec<&str> = line.splitn(7, ',').collect();
            if fields.len() != 7 {
                return Err(err(format!("expected 7 fields, got {}", fields.len())));
            }
            Ok(EventRecord {
                day: fields[0].parse().map_err(|e| err(format!("day: {e}")))?,
                t: fields[1].parse().map_err(|e| err(format!("t_s: {e}")))?,
                agent_kind: fields[2].parse().map_err(err)?,
                agent_id: fields[3].parse().map_err(|e| err(format!("agent_id: {e}")))?,
                event: fields[4].parse().map_err(err)?,
                node: fields[5].parse().map_err(|e| err(format!("node: {e}")))?,
                meta: fields[6].to_owned(),
            })
        })
        .collect()
}

pub fn read_events(path: &Path) -> Result<Vec<EventRecord>, LogError> {
    let text = fs::read_to_string(path).map_err(|e| LogError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    events_from_csv(&text)
}
