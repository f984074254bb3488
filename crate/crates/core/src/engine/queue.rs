use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::scenario::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Event {
    BatchBoundary(usize),
    ShiftStart(usize),
    ShiftEnd(usize),
    ArrivePickup(usize),
    Depart(usize),
    ArriveDropoff(usize),
    CompleteRide(usize),
    ArriveReposition(usize),
    Request(usize),
    Decide(usize),
    HorizonEnd,
}

impl Event {
    /// Platforms, then drivers, then travellers, then the horizon marker.
    fn class(self) -> u8 {
        match self {
            Event::BatchBoundary(_) => 0,
            Event::ShiftStart(_)
            | Event::ShiftEnd(_)
            | Event::ArrivePickup(_)
            | Event::Depart(_)
            | Event::ArriveDropoff(_)
            | Event::CompleteRide(_)
            | Event::ArriveReposition(_) => 1,
            Event::Request(_) | Event::Decide(_) => 2,
            Event::HorizonEnd => 3,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Key {
    t: f64,
    class: u8,
    agent: AgentId,
    seq: u64,
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.t
            .total_cmp(&other.t)
            .then(self.class.cmp(&other.class))
            .then(self.agent.cmp(&other.agent))
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug, Default)]
pub(crate) struct EventQueue {
    heap: BinaryHeap<Reverse<(Key, EventSlot)>>,
    seq: u64,
}

/// Wrapper so the heap never compares events themselves.
#[derive(Debug, Clone, Copy)]
struct EventSlot(Event);

impl PartialEq for EventSlot {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}
impl Eq for EventSlot {}
impl PartialOrd for EventSlot {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for EventSlot {
    fn cmp(&self, _: &Self) -> Ordering {
        Ordering::Equal
    }
}

impl EventQueue {
    pub(crate) fn push(&mut self, t: f64, event: Event, agent: AgentId) {
        let key = Key {
            t,
            class: event.class(),
            agent,
            seq: self.seq,
        };
        self.seq += 1;
        self.heap.push(Reverse((key, EventSlot(event))));
    }

    pub(crate) fn pop(&mut self) -> Option<(f64, Event)> {
        self.heap.pop().map(|Reverse((k, e))| (k.t, e.0))
    }

    #[cfg(test)]
    pub(crate) fn len(&self) -> usize {
        self.heap.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_by_time_class_agent_then_insertion() {
        let mut q = EventQueue::default();
        q.push(5.0, Event::Request(0), 1);
        q.push(5.0, Event::ShiftStart(0), 9);
        q.push(5.0, Event::BatchBoundary(0), 3);
        q.push(1.0, Event::HorizonEnd, 0);
        q.push(5.0, Event::Decide(1), 0);
        q.push(5.0, Event::Request(2), 1);
        assert_eq!(q.len(), 6);
        let order: Vec<Event> = std::iter::from_fn(|| q.pop().map(|x| x.1)).collect();
        assert_eq!(
            order,
            vec![
                Event::HorizonEnd,
                Event::BatchBoundary(0),
                Event::ShiftStart(0),
                Event::Decide(1),
                Event::Request(0),
                Event::Request(2),
            ]
        );
    }
}
