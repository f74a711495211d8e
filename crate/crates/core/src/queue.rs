//! FIFO constrained queues, output queues, and busy-cycle tracking.

use std::collections::VecDeque;

use crate::packet::{Packet, PacketId, Slot};

/// One constrained FIFO queue of the real network.
#[derive(Debug)]
pub struct QueueState {
    pub index: usize,
    buffer: VecDeque<Packet>,
    cumulative_departures: u64,
    cumulative_arrivals: u64,
}

impl QueueState {
    pub fn new(index: usize) -> Self {
        Self {
            index,
            buffer: VecDeque::new(),
            cumulative_departures: 0,
            cumulative_arrivals: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn head(&self) -> Option<&Packet> {
        self.buffer.front()
    }

    pub fn head_mut(&mut self) -> Option<&mut Packet> {
        self.buffer.front_mut()
    }

    pub fn push_arrival(&mut self, p: Packet) {
        self.cumulative_arrivals += 1;
        self.buffer.push_back(p);
    }

    pub fn pop_head(&mut self) -> Option<Packet> {
        let p = self.buffer.pop_front();
        if p.is_some() {
            self.cumulative_departures += 1;
        }
        p
    }

    /// Cumulative head-of-line departures (service of a non-empty queue).
    pub fn departures(&self) -> u64 {
        self.cumulative_departures
    }

    pub fn arrivals(&self) -> u64 {
        self.cumulative_arrivals
    }
}

// =============================================================================
// Busy cycles
// =============================================================================

/// Tracks maximal runs of service slots during which a queue is non-empty.
/// A cycle closes the moment service empties the queue; an arrival later in
/// the same slot opens a fresh cycle.
#[derive(Debug, Default, Clone)]
pub struct BusyCycleTracker {
    open_since: Option<Slot>,
    current_len: u64,
    completed: Vec<u64>,
    idle_slots: u64,
    longest_completed: u64,
}

impl BusyCycleTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Called when the queue transitions empty -> non-empty.
    pub fn note_open(&mut self, slot: Slot) {
        debug_assert_eq!(self.current_len, 0);
        self.open_since = Some(slot);
    }

    /// Called once per slot at service time with the pre-service occupancy;
    /// `emptied` reports whether this service drained the queue.
    pub fn note_service_slot(&mut self, non_empty: bool, emptied: bool) {
        if non_empty {
            self.current_len += 1;
            if emptied {
                self.longest_completed = self.longest_completed.max(self.current_len);
                self.completed.push(self.current_len);
                self.current_len = 0;
                self.open_since = None;
            }
        } else {
            debug_assert_eq!(self.current_len, 0);
            self.idle_slots += 1;
        }
    }

    /// Longest cycle so far, counting the still-open one. Under overload a
    /// cycle never closes and this grows linearly.
    pub fn longest(&self) -> u64 {
        self.longest_completed.max(self.current_len)
    }

    pub fn completed(&self) -> &[u64] {
        &self.completed
    }

    pub fn open_since(&self) -> Option<Slot> {
        self.open_since
    }

    /// Busy slots + idle slots; equals the number of service opportunities.
    pub fn accounted_slots(&self) -> u64 {
        self.completed.iter().sum::<u64>() + self.current_len + self.idle_slots
    }
}

// =============================================================================
// Output queues
// =============================================================================

/// Service order of a real-network output queue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutputPolicy {
    /// Ingest order; simultaneous deliveries tie-break by source queue index.
    Fifo,
    /// Ascending shadow departure time, then arrival slot, then source index.
    ShadowDepartureOrder,
    /// Smallest class first, FIFO within a class; `classes[n]` is the class
    /// of source queue `n`.
    StrictPriority { classes: Vec<u32> },
}

/// A unit-speed output line with its queue, kept sorted in service order.
#[derive(Debug)]
pub struct OutputQueue {
    pub index: usize,
    policy: OutputPolicy,
    buffer: VecDeque<Packet>,
    served: u64,
    tracker: BusyCycleTracker,
}

impl OutputQueue {
    pub fn new(index: usize, policy: OutputPolicy) -> Self {
        Self {
            index,
            policy,
            buffer: VecDeque::new(),
            served: 0,
            tracker: BusyCycleTracker::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn served(&self) -> u64 {
        self.served
    }

    pub fn tracker(&self) -> &BusyCycleTracker {
        &self.tracker
    }

    pub fn head(&self) -> Option<&Packet> {
        self.buffer.front()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Packet> {
        self.buffer.iter()
    }

    fn priority_class(&self, p: &Packet) -> u32 {
        match &self.policy {
            OutputPolicy::StrictPriority { classes } => classes[p.source_queue],
            _ => 0,
        }
    }

    /// Inserts a delivered packet at its service position. Callers deliver
    /// same-slot batches in ascending source-queue order; `partition_point`
    /// with `<=` keeps equal keys FIFO.
    pub fn insert(&mut self, p: Packet, slot: Slot) {
        if self.buffer.is_empty() {
            self.tracker.note_open(slot);
        }
        let pos = match &self.policy {
            OutputPolicy::Fifo => self.buffer.len(),
            OutputPolicy::ShadowDepartureOrder => {
                let key = |q: &Packet| {
                    (
                        q.shadow_departure.unwrap_or(Slot::MAX),
                        q.arrival_slot,
                        q.source_queue,
                    )
                };
                debug_assert!(
                    p.shadow_departure.is_some(),
                    "shadow departure must be stamped before delivery"
                );
                self.buffer.partition_point(|q| key(q) <= key(&p))
            }
            OutputPolicy::StrictPriority { .. } => {
                let class = self.priority_class(&p);
                self.buffer
                    .partition_point(|q| self.priority_class(q) <= class)
            }
        };
        self.buffer.insert(pos, p);
    }

    /// One service opportunity: pops the head (stamping its departure) and
    /// updates the busy-cycle bookkeeping. Empty queues record an idle slot.
    pub fn serve(&mut self, slot: Slot) -> Option<Packet> {
        if let Some(mut p) = self.buffer.pop_front() {
            p.real_departure = Some(slot);
            self.served += 1;
            self.tracker.note_service_slot(true, self.buffer.is_empty());
            Some(p)
        } else {
            self.tracker.note_service_slot(false, false);
            None
        }
    }

    pub fn contains(&self, id: PacketId) -> bool {
        self.buffer.iter().any(|p| p.id == id)
    }
}
