//! Pluggable decision modules.
//!
//! Every decision point in the agents' routines calls one hook from a
//! [`DecisionSet`]. Hooks see read-only views and draw randomness only from
//! the run's decision stream, so a run stays reproducible under its seed no
//! matter which modules are installed.
//!
//! Built-in modules are selected from the scenario's `decisions` block by
//! name. User modules are registered on a [`DecisionRegistry`] under a new
//! name; any closure with the hook's signature qualifies.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgraph::{NodeId, SkimMatrix};
use crate::platform::{self, Assignment, Offer};
use crate::rng::SimRng;
use crate::scenario::{keys, AgentId, Behaviour, DriverSpec, MatchingMode, Request};

pub type DecisionRng = SimRng;

#[derive(Debug, Error, PartialEq)]
pub enum DecisionError {
    #[error("unknown module `{name}` for hook {hook}")]
    UnknownModule { hook: &'static str, name: String },
    #[error("module `{name}` for hook {hook} needs behaviour.{param}")]
    MissingParam {
        hook: &'static str,
        name: String,
        param: &'static str,
    },
    #[error("module `{name}` already registered for hook {hook}")]
    Duplicate { hook: &'static str, name: String },
    #[error("hook {hook} returned an invalid value: {message}")]
    InvalidOutput { hook: &'static str, message: String },
}

/// How a traveller ended their day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Arrived,
    Unserved,
    OptedOut,
    RejectedOffer,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Arrived => "ARRIVED",
            Outcome::Unserved => "UNSERVED",
            Outcome::OptedOut => "OPTED_OUT",
            Outcome::RejectedOffer => "REJECTED_OFFER",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "ARRIVED" => Outcome::Arrived,
            "UNSERVED" => Outcome::Unserved,
            "OPTED_OUT" => Outcome::OptedOut,
            "REJECTED_OFFER" => Outcome::RejectedOffer,
            other => return Err(format!("unknown outcome `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DriverDayView<'a> {
    pub driver_id: AgentId,
    pub spec: &'a DriverSpec,
    pub day: u32,
    /// Realized income per scheduled hour on each past day, `None` when the
    /// driver stayed out.
    pub income_history: &'a [Option<f64>],
    pub learned_income: Option<f64>,
    pub participated_yesterday: Option<bool>,
}

#[derive(Debug, Clone, Copy)]
pub struct RequestOfferView<'a> {
    pub driver_id: AgentId,
    pub position: NodeId,
    pub now: f64,
    pub request: &'a Request,
    pub offer: &'a Offer,
}

#[derive(Debug, Clone, Copy)]
pub struct ReposView<'a> {
    pub driver_id: AgentId,
    pub position: NodeId,
    pub now: f64,
    pub n_nodes: usize,
    /// Requests currently waiting for a match, counted by origin node.
    pub open_requests: &'a BTreeMap<NodeId, u32>,
}

#[derive(Debug, Clone, Copy)]
pub struct TravellerDayView<'a> {
    pub traveller_id: AgentId,
    pub request: &'a Request,
    pub day: u32,
    pub previous_outcome: Option<Outcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeChoice {
    Accept,
    Reject,
}

#[derive(Debug, Clone)]
pub struct MatchRequest {
    pub request_id: AgentId,
    pub origin: NodeId,
    pub t_request: f64,
    /// Drivers that may not be offered this request again.
    pub excluded: Vec<AgentId>,
}

#[derive(Debug, Clone, Copy)]
pub struct MatchInput<'a> {
    pub now: f64,
    pub mode: MatchingMode,
    /// Queue order.
    pub requests: &'a [MatchRequest],
    /// `(driver_id, position)` in ascending id order.
    pub drivers: &'a [(AgentId, NodeId)],
    pub skim: &'a SkimMatrix,
}

macro_rules! hook_trait {
    ($(#[$doc:meta])* $name:ident, $method:ident, ($($arg:ident : $ty:ty),*) -> $ret:ty) => {
        $(#[$doc])*
        pub trait $name: Send + Sync {
            fn $method(&self, $($arg: $ty),*) -> $ret;

            /// Behaviour keys this module cannot run without.
            fn required_params(&self) -> &[&'static str] {
                &[]
            }
        }

        impl<F> $name for F
        where
            F: Fn($($ty),*) -> $ret + Send + Sync,
        {
            fn $method(&self, $($arg: $ty),*) -> $ret {
                self($($arg),*)
            }
        }
    };
}

hook_trait!(
    /// `f_driver_out`: true keeps the driver offline for the whole day.
    DriverOut, stays_offline,
    (view: &DriverDayView<'_>, params: &Behaviour, rng: &mut DecisionRng) -> bool
);
hook_trait!(
    /// `f_driver_decline`: true declines the matched request.
    DriverDecline, declines,
    (view: &RequestOfferView<'_>, params: &Behaviour, rng: &mut DecisionRng) -> bool
);
hook_trait!(
    /// `f_driver_repos`: target node for an empty relocation, if any.
    DriverRepos, target,
    (view: &ReposView<'_>, params: &Behaviour, rng: &mut DecisionRng) -> Option<NodeId>
);
hook_trait!(
    /// `f_trav_out`: true skips requesting today.
    TravellerOut, opts_out,
    (view: &TravellerDayView<'_>, params: &Behaviour, rng: &mut DecisionRng) -> bool
);
hook_trait!(
    /// `f_trav_mode`: accept or reject the chosen offer.
    TravellerMode, choose,
    (view: &TravellerDayView<'_>, offer: &Offer, params: &Behaviour, rng: &mut DecisionRng) -> ModeChoice
);
hook_trait!(
    /// `f_platform_choice`: index into a non-empty offer list.
    PlatformChoice, pick,
    (offers: &[Offer], params: &Behaviour, rng: &mut DecisionRng) -> usize
);
hook_trait!(
    /// `f_match`: pairs queued requests with idle drivers.
    Matcher, assign,
    (input: &MatchInput<'_>, params: &Behaviour, rng: &mut DecisionRng) -> Assignment
);

// ---------------------------------------------------------------------------
// built-in modules

/// Threshold-with-exploration participation rule driven by learned income.
///
/// Day 0 and drivers without a learned income always participate. Otherwise
/// a driver participates when the learned income reaches the reservation
/// wage; a driver who stayed out yesterday re-enters with probability
/// `learning_epsilon` even below it.
pub struct LearnedParticipation {
    strict: bool,
}

impl DriverOut for LearnedParticipation {
    fn stays_offline(&self, view: &DriverDayView<'_>, params: &Behaviour, rng: &mut DecisionRng) -> bool {
        let (Some(learned), Some(wage)) = (view.learned_income, params.get(keys::RESERVATION_WAGE)) else {
            return false;
        };
        if view.day == 0 || learned >= wage {
            return false;
        }
        if view.participated_yesterday == Some(false) {
            let epsilon = params.get_or(keys::LEARNING_EPSILON, 0.0);
            return rng.random::<f64>() >= epsilon;
        }
        true
    }

    fn required_params(&self) -> &[&'static str] {
        if self.strict {
            &[keys::RESERVATION_WAGE]
        } else {
            &[]
        }
    }
}

pub struct NeverDecline;

impl DriverDecline for NeverDecline {
    fn declines(&self, _: &RequestOfferView<'_>, _: &Behaviour, _: &mut DecisionRng) -> bool {
        false
    }
}

pub const DEFAULT_MAX_PICKUP_ETA_S: f64 = 600.0;

/// Declines when the pickup takes longer than `max_pickup_eta_s` (600 s if unset).
pub struct DeclineFarPickup;

impl DriverDecline for DeclineFarPickup {
    fn declines(&self, view: &RequestOfferView<'_>, params: &Behaviour, _: &mut DecisionRng) -> bool {
        view.offer.pickup_eta > params.get_or(keys::MAX_PICKUP_ETA_S, DEFAULT_MAX_PICKUP_ETA_S)
    }
}

pub struct StayPut;

impl DriverRepos for StayPut {
    fn target(&self, _: &ReposView<'_>, _: &Behaviour, _: &mut DecisionRng) -> Option<NodeId> {
        None
    }
}

/// Heads for the node with most open requests, lowest id on ties.
pub struct ReposToDemand;

impl DriverRepos for ReposToDemand {
    fn target(&self, view: &ReposView<'_>, _: &Behaviour, _: &mut DecisionRng) -> Option<NodeId> {
        let (&node, &count) = view
            .open_requests
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))?;
        (count > 0 && node != view.position).then_some(node)
    }
}

pub struct NeverOptOut;

impl TravellerOut for NeverOptOut {
    fn opts_out(&self, _: &TravellerDayView<'_>, _: &Behaviour, _: &mut DecisionRng) -> bool {
        false
    }
}

/// Opts out after a day that ended unserved.
pub struct OptOutIfUnserved;

impl TravellerOut for OptOutIfUnserved {
    fn opts_out(&self, view: &TravellerDayView<'_>, _: &Behaviour, _: &mut DecisionRng) -> bool {
        view.previous_outcome == Some(Outcome::Unserved)
    }
}

/// Accepts unless `max_wait_s` is set and the pickup ETA exceeds it.
pub struct MaxWait {
    strict: bool,
}

impl TravellerMode for MaxWait {
    fn choose(&self, _: &TravellerDayView<'_>, offer: &Offer, params: &Behaviour, _: &mut DecisionRng) -> ModeChoice {
        match params.get(keys::MAX_WAIT_S) {
            Some(max_wait) if offer.pickup_eta > max_wait => ModeChoice::Reject,
            _ => ModeChoice::Accept,
        }
    }

    fn required_params(&self) -> &[&'static str] {
        if self.strict {
            &[keys::MAX_WAIT_S]
        } else {
            &[]
        }
    }
}

/// Cheapest offer, then shortest pickup, then lowest platform id.
pub struct CheapestOffer;

impl PlatformChoice for CheapestOffer {
    fn pick(&self, offers: &[Offer], _: &Behaviour, _: &mut DecisionRng) -> usize {
        offers
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                a.fare
                    .total_cmp(&b.fare)
                    .then(a.pickup_eta.total_cmp(&b.pickup_eta))
                    .then(a.platform_id.cmp(&b.platform_id))
            })
            .map(|(i, _)| i)
            .expect("platform choice over an empty offer list")
    }
}

/// Closest idle driver per request in instant mode, optimal assignment in
/// batched mode.
pub struct DefaultMatcher;

impl Matcher for DefaultMatcher {
    fn assign(&self, input: &MatchInput<'_>, _: &Behaviour, _: &mut DecisionRng) -> Assignment {
        let excluded: BTreeMap<AgentId, &[AgentId]> = input
            .requests
            .iter()
            .map(|r| (r.request_id, r.excluded.as_slice()))
            .collect();
        let allowed = |r: AgentId, d: AgentId| !excluded.get(&r).is_some_and(|x| x.contains(&d));
        let requests: Vec<(AgentId, NodeId)> = input.requests.iter().map(|r| (r.request_id, r.origin)).collect();
        match input.mode {
            MatchingMode::Instant => platform::match_sequential(&requests, input.drivers, input.skim, allowed),
            MatchingMode::Batched { .. } => platform::match_batch_with(&requests, input.drivers, input.skim, allowed),
        }
    }
}

// ---------------------------------------------------------------------------
// selection

pub const DEFAULT: &str = "default";

/// Module name per hook, as written in the scenario file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecisionNames {
    pub f_driver_out: String,
    pub f_driver_decline: String,
    pub f_driver_repos: String,
    pub f_trav_out: String,
    pub f_trav_mode: String,
    pub f_platform_choice: String,
    pub f_match: String,
}

impl Default for DecisionNames {
    fn default() -> Self {
        Self {
            f_driver_out: DEFAULT.into(),
            f_driver_decline: DEFAULT.into(),
            f_driver_repos: DEFAULT.into(),
            f_trav_out: DEFAULT.into(),
            f_trav_mode: DEFAULT.into(),
            f_platform_choice: DEFAULT.into(),
            f_match: DEFAULT.into(),
        }
    }
}

/// One filled slot per hook.
#[derive(Clone)]
pub struct DecisionSet {
    pub names: DecisionNames,
    pub driver_out: Arc<dyn DriverOut>,
    pub driver_decline: Arc<dyn DriverDecline>,
    pub driver_repos: Arc<dyn DriverRepos>,
    pub trav_out: Arc<dyn TravellerOut>,
    pub trav_mode: Arc<dyn TravellerMode>,
    pub platform_choice: Arc<dyn PlatformChoice>,
    pub matcher: Arc<dyn Matcher>,
}

impl fmt::Debug for DecisionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("DecisionSet").field(&self.names).finish()
    }
}

impl Default for DecisionSet {
    fn default() -> Self {
        DecisionRegistry::default()
            .resolve(&DecisionNames::default())
            .expect("built-in defaults resolve")
    }
}

impl DecisionSet {
    /// Fails if any installed module needs a behaviour scalar that is absent.
    pub fn check_params(&self, params: &Behaviour) -> Result<(), DecisionError> {
        let slots: [(&'static str, &String, &[&'static str]); 7] = [
            (
                "f_driver_out",
                &self.names.f_driver_out,
                self.driver_out.required_params(),
            ),
            (
                "f_driver_decline",
                &self.names.f_driver_decline,
                self.driver_decline.required_params(),
            ),
            (
                "f_driver_repos",
                &self.names.f_driver_repos,
                self.driver_repos.required_params(),
            ),
            ("f_trav_out", &self.names.f_trav_out, self.trav_out.required_params()),
            ("f_trav_mode", &self.names.f_trav_mode, self.trav_mode.required_params()),
            (
                "f_platform_choice",
                &self.names.f_platform_choice,
                self.platform_choice.required_params(),
            ),
            ("f_match", &self.names.f_match, self.matcher.required_params()),
        ];
        for (hook, name, required) in slots {
            if let Some(param) = required.iter().find(|p| params.get(p).is_none()) {
                return Err(DecisionError::MissingParam {
                    hook,
                    name: name.clone(),
                    param,
                });
            }
        }
        Ok(())
    }
}

/// Named modules per hook; starts with the built-ins.
#[derive(Clone)]
pub struct DecisionRegistry {
    driver_out: BTreeMap<String, Arc<dyn DriverOut>>,
    driver_decline: BTreeMap<String, Arc<dyn DriverDecline>>,
    driver_repos: BTreeMap<String, Arc<dyn DriverRepos>>,
    trav_out: BTreeMap<String, Arc<dyn TravellerOut>>,
    trav_mode: BTreeMap<String, Arc<dyn TravellerMode>>,
    platform_choice: BTreeMap<String, Arc<dyn PlatformChoice>>,
    matcher: BTreeMap<String, Arc<dyn Matcher>>,
}

impl Default for DecisionRegistry {
    fn default() -> Self {
        fn one<T: ?Sized>(entries: Vec<(&str, Arc<T>)>) -> BTreeMap<String, Arc<T>> {
            entries.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
        }
        Self {
            driver_out: one::<dyn DriverOut>(vec![
                (DEFAULT, Arc::new(LearnedParticipation { strict: false })),
                ("learned_participation", Arc::new(LearnedParticipation { strict: true })),
            ]),
            driver_decline: one::<dyn DriverDecline>(vec![
                (DEFAULT, Arc::new(NeverDecline)),
                ("decline_far_pickup", Arc::new(DeclineFarPickup)),
            ]),
            driver_repos: one::<dyn DriverRepos>(vec![
                (DEFAULT, Arc::new(StayPut)),
                ("repos_to_demand", Arc::new(ReposToDemand)),
            ]),
            trav_out: one::<dyn TravellerOut>(vec![
                (DEFAULT, Arc::new(NeverOptOut)),
                ("opt_out_if_unserved", Arc::new(OptOutIfUnserved)),
            ]),
            trav_mode: one::<dyn TravellerMode>(vec![
                (DEFAULT, Arc::new(MaxWait { strict: false })),
                ("max_wait", Arc::new(MaxWait { strict: true })),
            ]),
            platform_choice: one::<dyn PlatformChoice>(vec![(DEFAULT, Arc::new(CheapestOffer))]),
            matcher: one::<dyn Matcher>(vec![(DEFAULT, Arc::new(DefaultMatcher))]),
        }
    }
}

macro_rules! register_fn {
    ($fn_name:ident, $field:ident, $trait:ident, $hook:literal) => {
        pub fn $fn_name(&mut self, name: &str, module: Arc<dyn $trait>) -> Result<(), DecisionError> {
            if self.$field.contains_key(name) {
                return Err(DecisionError::Duplicate {
                    hook: $hook,
                    name: name.to_owned(),
                });
            }
            self.$field.insert(name.to_owned(), module);
            Ok(())
        }
    };
}

impl DecisionRegistry {
    register_fn!(register_driver_out, driver_out, DriverOut, "f_driver_out");
    register_fn!(
        register_driver_decline,
        driver_decline,
        DriverDecline,
        "f_driver_decline"
    );
    register_fn!(register_driver_repos, driver_repos, DriverRepos, "f_driver_repos");
    register_fn!(register_trav_out, trav_out, TravellerOut, "f_trav_out");
    register_fn!(register_trav_mode, trav_mode, TravellerMode, "f_trav_mode");
    register_fn!(
        register_platform_choice,
        platform_choice,
        PlatformChoice,
        "f_platform_choice"
    );
    register_fn!(register_matcher, matcher, Matcher, "f_match");

    pub fn resolve(&self, names: &DecisionNames) -> Result<DecisionSet, DecisionError> {
        fn get<T: ?Sized>(
            map: &BTreeMap<String, Arc<T>>,
            hook: &'static str,
            name: &str,
        ) -> Result<Arc<T>, DecisionError> {
            map.get(name).cloned().ok_or_else(|| DecisionError::UnknownModule {
                hook,
                name: name.to_owned(),
            })
        }
        Ok(DecisionSet {
            names: names.clone(),
            driver_out: get(&self.driver_out, "f_driver_out", &names.f_driver_out)?,
            driver_decline: get(&self.driver_decline, "f_driver_decline", &names.f_driver_decline)?,
            driver_repos: get(&self.driver_repos, "f_driver_repos", &names.f_driver_repos)?,
            trav_out: get(&self.trav_out, "f_trav_out", &names.f_trav_out)?,
            trav_mode: get(&self.trav_mode, "f_trav_mode", &names.f_trav_mode)?,
            platform_choice: get(&self.platform_choice, "f_platform_choice", &names.f_platform_choice)?,
            matcher: get(&self.matcher, "f_match", &names.f_match)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> DecisionRng {
        DecisionRng::seed_from_u64(0)
    }

    fn offer(platform_id: u32, fare: f64, eta: f64) -> Offer {
        Offer {
            platform_id,
            driver_id: 0,
            request_id: 0,
            pickup_eta: eta,
            trip_time: 100.0,
            trip_distance: 1000.0,
            fare,
        }
    }

    fn spec() -> DriverSpec {
        DriverSpec {
            driver_id: 1,
            home_node: 0,
            shift_start: 0.0,
            shift_end: 3600.0,
            platform_ids: vec![0],
        }
    }

    fn day_view(spec: &DriverSpec, day: u32, learned: Option<f64>, yesterday: Option<bool>) -> DriverDayView<'_> {
        DriverDayView {
            driver_id: spec.driver_id,
            spec,
            day,
            income_history: &[],
            learned_income: learned,
            participated_yesterday: yesterday,
        }
    }

    fn wage(w: f64, eps: f64) -> Behaviour {
        let mut b = Behaviour::default();
        b.set(keys::RESERVATION_WAGE, w);
        b.set(keys::LEARNING_EPSILON, eps);
        b
    }

    #[test]
    fn driver_out_day_zero_participates() {
        let s = spec();
        let set = DecisionSet::default();
        assert!(!set
            .driver_out
            .stays_offline(&day_view(&s, 0, Some(0.0), None), &wage(10.0, 0.0), &mut rng()));
    }

    #[test]
    fn driver_out_threshold() {
        let s = spec();
        let out = LearnedParticipation { strict: true };
        // below the wage, stayed out yesterday, epsilon 0 means every draw is above it
        assert!(out.stays_offline(&day_view(&s, 3, Some(5.0), Some(false)), &wage(10.0, 0.0), &mut rng()));
        assert!(out.stays_offline(&day_view(&s, 3, Some(5.0), Some(true)), &wage(10.0, 0.5), &mut rng()));
        assert!(!out.stays_offline(&day_view(&s, 3, Some(12.0), Some(true)), &wage(10.0, 0.0), &mut rng()));
        // epsilon 1 re-enters always
        assert!(!out.stays_offline(&day_view(&s, 3, Some(5.0), Some(false)), &wage(10.0, 1.0), &mut rng()));
    }

    #[test]
    fn decline_modules() {
        let request = Request {
            request_id: 0,
            traveller_id: 0,
            origin: 0,
            destination: 1,
            t_request: 0.0,
        };
        let view = |o: &Offer| -> bool {
            let v = RequestOfferView {
                driver_id: 0,
                position: 0,
                now: 0.0,
                request: &request,
                offer: o,
            };
            DeclineFarPickup.declines(&v, &Behaviour::default(), &mut rng())
                && !NeverDecline.declines(&v, &Behaviour::default(), &mut rng())
        };
        assert!(view(&offer(0, 1.0, 700.0)));
        assert!(!view(&offer(0, 1.0, 300.0)));
    }

    #[test]
    fn repos_to_demand_rules() {
        let mut open = BTreeMap::new();
        let view = |open: &BTreeMap<NodeId, u32>, position| {
            ReposToDemand.target(
                &ReposView {
                    driver_id: 0,
                    position,
                    now: 0.0,
                    n_nodes: 10,
                    open_requests: open,
                },
                &Behaviour::default(),
                &mut rng(),
            )
        };
        assert_eq!(view(&open, 0), None);
        open.insert(3, 2);
        open.insert(7, 2);
        assert_eq!(view(&open, 0), Some(3));
        assert_eq!(view(&open, 3), None);
        let stay = StayPut.target(
            &ReposView {
                driver_id: 0,
                position: 0,
                now: 0.0,
                n_nodes: 10,
                open_requests: &open,
            },
            &Behaviour::default(),
            &mut rng(),
        );
        assert_eq!(stay, None);
    }

    #[test]
    fn trav_out_modules() {
        let request = Request {
            request_id: 0,
            traveller_id: 0,
            origin: 0,
            destination: 1,
            t_request: 0.0,
        };
        let view = |prev| TravellerDayView {
            traveller_id: 0,
            request: &request,
            day: 1,
            previous_outcome: prev,
        };
        let b = Behaviour::default();
        assert!(!NeverOptOut.opts_out(&view(Some(Outcome::Unserved)), &b, &mut rng()));
        assert!(OptOutIfUnserved.opts_out(&view(Some(Outcome::Unserved)), &b, &mut rng()));
        assert!(!OptOutIfUnserved.opts_out(&view(Some(Outcome::Arrived)), &b, &mut rng()));
    }

    #[test]
    fn max_wait_boundary() {
        let request = Request {
            request_id: 0,
            traveller_id: 0,
            origin: 0,
            destination: 1,
            t_request: 0.0,
        };
        let view = TravellerDayView {
            traveller_id: 0,
            request: &request,
            day: 0,
            previous_outcome: None,
        };
        let lenient = MaxWait { strict: false };
        assert_eq!(
            lenient.choose(&view, &offer(0, 1.0, 1e6), &Behaviour::default(), &mut rng()),
            ModeChoice::Accept
        );
        let mut b = Behaviour::default();
        b.set(keys::MAX_WAIT_S, 600.0);
        assert_eq!(
            lenient.choose(&view, &offer(0, 1.0, 601.0), &b, &mut rng()),
            ModeChoice::Reject
        );
        assert_eq!(
            lenient.choose(&view, &offer(0, 1.0, 600.0), &b, &mut rng()),
            ModeChoice::Accept
        );
    }

    #[test]
    fn platform_choice_rules() {
        let b = Behaviour::default();
        assert_eq!(
            CheapestOffer.pick(&[offer(0, 5.0, 10.0), offer(1, 4.0, 90.0)], &b, &mut rng()),
            1
        );
        assert_eq!(
            CheapestOffer.pick(&[offer(0, 5.0, 120.0), offer(1, 5.0, 60.0)], &b, &mut rng()),
            1
        );
        assert_eq!(
            CheapestOffer.pick(&[offer(3, 5.0, 60.0), offer(1, 5.0, 60.0)], &b, &mut rng()),
            1
        );
        assert_eq!(CheapestOffer.pick(&[offer(0, 9.0, 1.0)], &b, &mut rng()), 0);
    }

    #[test]
    fn registry_resolution_and_params() {
        let mut registry = DecisionRegistry::default();
        let names = DecisionNames {
            f_trav_mode: "max_wait".into(),
            ..DecisionNames::default()
        };
        let set = registry.resolve(&names).unwrap();
        assert!(matches!(
            set.check_params(&Behaviour::default()),
            Err(DecisionError::MissingParam {
                param: "max_wait_s",
                ..
            })
        ));

        let bad = DecisionNames {
            f_driver_repos: "teleport".into(),
            ..DecisionNames::default()
        };
        assert!(matches!(
            registry.resolve(&bad),
            Err(DecisionError::UnknownModule { .. })
        ));

        registry
            .register_driver_decline(
                "always",
                Arc::new(|_: &RequestOfferView<'_>, _: &Behaviour, _: &mut DecisionRng| true),
            )
            .unwrap();
        assert!(registry
            .register_driver_decline("always", Arc::new(NeverDecline))
            .is_err());
        let custom = DecisionNames {
            f_driver_decline: "always".into(),
            ..DecisionNames::default()
        };
        assert!(registry.resolve(&custom).is_ok());
    }
}
