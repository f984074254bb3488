//! Two-sided queues, matching, offers and fare settlement.

use std::collections::BTreeSet;

use crate::assignment::{solve_assignment, CostMatrix};
use crate::netgraph::{NodeId, SkimMatrix};
use crate::scenario::{AgentId, MatchingMode, PlatformId, PlatformSpec, Request};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offer {
    pub platform_id: PlatformId,
    pub driver_id: AgentId,
    pub request_id: AgentId,
    pub pickup_eta: f64,
    pub trip_time: f64,
    pub trip_distance: f64,
    pub fare: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerCause {
    RequestArrived,
    DriverIdle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueuedRequest {
    pub request_id: AgentId,
    pub t_request: f64,
    pub t_enqueued: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(AgentId, AgentId)>,
    pub unmatched_requests: Vec<AgentId>,
    pub unmatched_drivers: Vec<AgentId>,
}

impl Assignment {
    /// Fills the unmatched lists from the full candidate sets.
    fn complete(pairs: Vec<(AgentId, AgentId)>, requests: &[AgentId], drivers: &[AgentId]) -> Self {
        let matched_r: BTreeSet<_> = pairs.iter().map(|p| p.0).collect();
        let matched_d: BTreeSet<_> = pairs.iter().map(|p| p.1).collect();
        Self {
            unmatched_requests: requests.iter().copied().filter(|r| !matched_r.contains(r)).collect(),
            unmatched_drivers: drivers.iter().copied().filter(|d| !matched_d.contains(d)).collect(),
            pairs,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlatformState {
    pub spec: PlatformSpec,
    /// Sorted by `(t_request, request_id)`.
    waiting: Vec<QueuedRequest>,
    idle: BTreeSet<AgentId>,
    pub revenue_total: f64,
    pub commission_total: f64,
    pub payouts_total: f64,
    pub next_batch_at: Option<f64>,
}

impl PlatformState {
    pub fn new(spec: PlatformSpec) -> Self {
        let next_batch_at = match spec.matching {
            MatchingMode::Instant => None,
            MatchingMode::Batched { window_s } => Some(window_s),
        };
        Self {
            spec,
            waiting: Vec::new(),
            idle: BTreeSet::new(),
            revenue_total: 0.0,
            commission_total: 0.0,
            payouts_total: 0.0,
            next_batch_at,
        }
    }

    pub fn id(&self) -> PlatformId {
        self.spec.platform_id
    }

    pub fn waiting(&self) -> &[QueuedRequest] {
        &self.waiting
    }

    pub fn idle(&self) -> &BTreeSet<AgentId> {
        &self.idle
    }

    pub fn is_queued(&self, request_id: AgentId) -> bool {
        self.waiting.iter().any(|q| q.request_id == request_id)
    }

    pub fn enqueue(&mut self, request: &Request, now: f64) {
        if self.is_queued(request.request_id) {
            return;
        }
        let key = (request.t_request, request.request_id);
        let at = self
            .waiting
            .partition_point(|q| q.t_request.total_cmp(&key.0).then(q.request_id.cmp(&key.1)).is_lt());
        self.waiting.insert(
            at,
            QueuedRequest {
                request_id: request.request_id,
                t_request: request.t_request,
                t_enqueued: now,
            },
        );
    }

    pub fn dequeue(&mut self, request_id: AgentId) -> bool {
        let before = self.waiting.len();
        self.waiting.retain(|q| q.request_id != request_id);
        before != self.waiting.len()
    }

    /// Returns and clears every queued request (horizon end).
    pub fn drain_waiting(&mut self) -> Vec<QueuedRequest> {
        std::mem::take(&mut self.waiting)
    }

    pub fn add_idle(&mut self, driver_id: AgentId) {
        self.idle.insert(driver_id);
    }

    pub fn remove_idle(&mut self, driver_id: AgentId) -> bool {
        self.idle.remove(&driver_id)
    }

    /// Whether a state change should run matching right away. Batched
    /// platforms only match at window boundaries.
    pub fn trigger(&self, _cause: TriggerCause) -> bool {
        matches!(self.spec.matching, MatchingMode::Instant)
    }

    /// Advances the batch clock past `now`; returns the boundary that was due.
    pub fn advance_batch(&mut self, now: f64) -> Option<f64> {
        let MatchingMode::Batched { window_s } = self.spec.matching else {
            return None;
        };
        let due = self.next_batch_at?;
        if now < due {
            return None;
        }
        let mut next = due;
        while next <= now {
            next += window_s;
        }
        self.next_batch_at = Some(next);
        Some(due)
    }

    /// Splits a fare into (driver payout, platform cut) and books it.
    pub fn settle(&mut self, fare: f64) -> (f64, f64) {
        let (payout, cut) = split_fare(fare, self.spec.commission_rate);
        self.revenue_total += fare;
        self.commission_total += cut;
        self.payouts_total += payout;
        (payout, cut)
    }
}

pub fn split_fare(fare: f64, commission_rate: f64) -> (f64, f64) {
    let cut = fare * commission_rate;
    (fare - cut, cut)
}

pub fn make_offer(
    spec: &PlatformSpec,
    request: &Request,
    driver_id: AgentId,
    driver_position: NodeId,
    skim: &SkimMatrix,
) -> Offer {
    let trip_distance = skim.distance(request.origin, request.destination);
    Offer {
        platform_id: spec.platform_id,
        driver_id,
        request_id: request.request_id,
        pickup_eta: skim.travel_time(driver_position, request.origin),
        trip_time: skim.travel_time(request.origin, request.destination),
        trip_distance,
        fare: spec.fare(trip_distance),
    }
}

/// Closest idle driver to `origin`; ties go to the lowest driver id.
pub fn match_instant(origin: NodeId, idle: &[(AgentId, NodeId)], skim: &SkimMatrix) -> Option<AgentId> {
    idle.iter()
        .map(|&(driver, pos)| (skim.travel_time(pos, origin), driver))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, driver)| driver)
}

/// Optimal batch assignment minimizing total pickup time.
pub fn match_batch(requests: &[(AgentId, NodeId)], idle: &[(AgentId, NodeId)], skim: &SkimMatrix) -> Assignment {
    match_batch_with(requests, idle, skim, |_, _| true)
}

/// [`match_batch`] restricted to pairs accepted by `allowed`.
pub fn match_batch_with(
    requests: &[(AgentId, NodeId)],
    idle: &[(AgentId, NodeId)],
    skim: &SkimMatrix,
    allowed: impl Fn(AgentId, AgentId) -> bool,
) -> Assignment {
    let cost: CostMatrix = requests
        .iter()
        .map(|&(r, origin)| {
            idle.iter()
                .map(|&(d, pos)| allowed(r, d).then(|| skim.travel_time(pos, origin)))
                .collect()
        })
        .collect();
    let row_keys: Vec<u64> = requests.iter().map(|r| r.0 as u64).collect();
    let col_keys: Vec<u64> = idle.iter().map(|d| d.0 as u64).collect();
    let pairs = solve_assignment(&cost, &row_keys, &col_keys)
        .into_iter()
        .map(|(r, d)| (requests[r].0, idle[d].0))
        .collect();
    let request_ids: Vec<_> = requests.iter().map(|r| r.0).collect();
    let driver_ids: Vec<_> = idle.iter().map(|d| d.0).collect();
    Assignment::complete(pairs, &request_ids, &driver_ids)
}

/// Requests in queue order, each taking the closest remaining idle driver.
pub fn match_sequential(
    requests: &[(AgentId, NodeId)],
    idle: &[(AgentId, NodeId)],
    skim: &SkimMatrix,
    allowed: impl Fn(AgentId, AgentId) -> bool,
) -> Assignment {
    let mut free: Vec<(AgentId, NodeId)> = idle.to_vec();
    let mut pairs = Vec::new();
    for &(r, origin) in requests {
        if free.is_empty() {
            break;
        }
        let candidates: Vec<_> = free.iter().copied().filter(|&(d, _)| allowed(r, d)).collect();
        if let Some(d) = match_instant(origin, &candidates, skim) {
            free.retain(|&(x, _)| x != d);
            pairs.push((r, d));
        }
    }
    let request_ids: Vec<_> = requests.iter().map(|r| r.0).collect();
    let driver_ids: Vec<_> = idle.iter().map(|d| d.0).collect();
    Assignment::complete(pairs, &request_ids, &driver_ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{build_skim, grid_city};

    fn spec(base: f64, per_km: f64, commission: f64) -> PlatformSpec {
        PlatformSpec {
            platform_id: 0,
            base_fare: base,
            fare_per_km: per_km,
            commission_rate: commission,
            matching: MatchingMode::Instant,
            fleet_size: None,
        }
    }

    fn line_skim() -> SkimMatrix {
        // 1 x 10 is rejected by grid_city, so use a 2-row grid and stay on row 0
        build_skim(&grid_city(2, 10, 100.0, 10.0).unwrap())
    }

    #[test]
    fn fare_examples() {
        assert_eq!(spec(0.0, 1.0, 0.0).fare(5000.0), 5.0);
        assert_eq!(spec(2.0, 3.7, 0.0).fare(0.0), 2.0);
        assert_eq!(spec(0.0, 1.5, 0.0).fare(2000.0), 3.0);
    }

    #[test]
    fn offer_fields() {
        let skim = line_skim();
        let request = Request {
            request_id: 4,
            traveller_id: 4,
            origin: 2,
            destination: 7,
            t_request: 0.0,
        };
        let offer = make_offer(&spec(0.0, 1.0, 0.0), &request, 9, 0, &skim);
        assert_eq!(offer.pickup_eta, 20.0);
        assert_eq!(offer.trip_time, 50.0);
        assert_eq!(offer.trip_distance, 500.0);
        assert_eq!(offer.fare, 0.5);
    }

    #[test]
    fn settle_splits() {
        let mut p = PlatformState::new(spec(0.0, 1.0, 0.25));
        assert_eq!(p.settle(10.0), (7.5, 2.5));
        assert_eq!(p.revenue_total, 10.0);
        assert_eq!(split_fare(8.0, 0.0), (8.0, 0.0));
        assert_eq!(split_fare(8.0, 1.0), (0.0, 8.0));
    }

    #[test]
    fn instant_closest_then_lowest_id() {
        let skim = line_skim();
        // origin node 5; driver 1 at node 3 (20 s), driver 2 at node 9 (40 s)
        assert_eq!(match_instant(5, &[(2, 9), (1, 3)], &skim), Some(1));
        assert_eq!(match_instant(5, &[], &skim), None);
        // equal distances: ids 7 and 3
        assert_eq!(match_instant(5, &[(7, 3), (3, 7)], &skim), Some(3));
    }

    #[test]
    fn batch_two_by_two() {
        let skim = line_skim();
        // r0 at node 1, r1 at node 8; d0 at node 0, d1 at node 9
        let a = match_batch(&[(0, 1), (1, 8)], &[(0, 0), (1, 9)], &skim);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        assert!(a.unmatched_requests.is_empty() && a.unmatched_drivers.is_empty());
    }

    #[test]
    fn batch_single_request_equals_instant() {
        let skim = line_skim();
        let idle = [(4, 9), (2, 1), (6, 4)];
        let a = match_batch(&[(0, 5)], &idle, &skim);
        assert_eq!(a.pairs, vec![(0, match_instant(5, &idle, &skim).unwrap())]);
    }

    #[test]
    fn batch_no_requests() {
        let skim = line_skim();
        let a = match_batch(&[], &[(1, 0), (2, 3)], &skim);
        assert!(a.pairs.is_empty());
        assert_eq!(a.unmatched_drivers, vec![1, 2]);
    }

    #[test]
    fn queue_ordering() {
        let mut p = PlatformState::new(spec(0.0, 1.0, 0.0));
        let req = |id, t| Request {
            request_id: id,
            traveller_id: id,
            origin: 0,
            destination: 1,
            t_request: t,
        };
        p.enqueue(&req(5, 20.0), 20.0);
        p.enqueue(&req(2, 10.0), 30.0);
        p.enqueue(&req(1, 20.0), 30.0);
        p.enqueue(&req(1, 20.0), 40.0);
        let ids: Vec<_> = p.waiting().iter().map(|q| q.request_id).collect();
        assert_eq!(ids, vec![2, 1, 5]);
        assert!(p.dequeue(1));
        assert!(!p.dequeue(1));
    }

    #[test]
    fn instant_trigger_and_batch_window() {
        let p = PlatformState::new(spec(0.0, 1.0, 0.0));
        assert!(p.trigger(TriggerCause::RequestArrived));
        let mut s = spec(0.0, 1.0, 0.0);
        s.matching = MatchingMode::Batched { window_s: 60.0 };
        let mut b = PlatformState::new(s);
        assert!(!b.trigger(TriggerCause::RequestArrived));
        assert_eq!(b.advance_batch(10.0), None);
        assert_eq!(b.advance_batch(60.0), Some(60.0));
        assert_eq!(b.next_batch_at, Some(120.0));
    }
}
