//! The shadow network: an unconstrained copy of the system.
//!
//! Every real arrival is mirrored here; because nothing constrains service,
//! a copy skips straight to its destination output line's queue, which
//! drains one copy per slot under a single-queue work-conserving policy.
//! The slot a copy leaves this network is the departure time d(p) that
//! urgencies and output-queue ordering are measured against.
//!
//! `departure_time` answers for any packet: the actual departure slot once
//! the copy has left, otherwise the slot it would leave if no further
//! arrivals occurred. Under FIFO that projection is already exact and never
//! changes; under LIFO / strict priority / round robin later arrivals can
//! push it back, which is why the projection is recomputed on demand.
//!
//! Runs in lockstep with the real network: serve mid-slot, ingest at slot
//! end, so a copy ingested at tau is first servable at tau + 1.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::packet::{Packet, PacketId, PacketLedger, Slot};
use crate::queue::BusyCycleTracker;

#[derive(Debug, Error)]
pub enum ShadowError {
    #[error("packet {0:?} has no shadow copy (never ingested)")]
    UnknownPacket(PacketId),
}

/// Service discipline of a shadow output queue.
#[derive(Debug, Clone, PartialEq)]
pub enum ShadowPolicy {
    /// Ingest order; simultaneous copies tie-break by source queue index.
    Fifo,
    /// Newest unserved copy first (same-slot batches end up newest-source
    /// first, since the batch is ingested in ascending source order).
    Lifo,
    /// Smallest class first, FIFO within a class; `classes[n]` is the class
    /// of source queue `n`.
    StrictPriority { classes: Vec<u32> },
    /// Cycles over source queues with queued copies, one copy per turn;
    /// FIFO within a source. With every source backlogged this alternates
    /// evenly regardless of arrival-rate imbalance.
    RoundRobin,
}

/// Policy-specific buffer. Copies are stored as ids; within any FIFO-like
/// sub-buffer ids ascend (global ids are monotone in arrival order), so
/// positions resolve by binary search instead of side tables.
#[derive(Debug, Clone)]
enum Buf {
    Fifo(VecDeque<PacketId>),
    Lifo(Vec<PacketId>),
    StrictPriority(BTreeMap<u32, VecDeque<PacketId>>),
    RoundRobin {
        /// Per-source sub-queue, indexed by source queue.
        subs: Vec<VecDeque<PacketId>>,
        /// Source served last; scans resume just after it.
        cursor: usize,
    },
}

#[derive(Debug, Clone)]
pub struct ShadowQueue {
    pub index: usize,
    buf: Buf,
    len: usize,
    ingested: u64,
    served: u64,
    tracker: BusyCycleTracker,
    policy: ShadowPolicy,
}

impl ShadowQueue {
    fn new(index: usize, policy: &ShadowPolicy, n_sources: usize) -> Self {
        let buf = match policy {
            ShadowPolicy::Fifo => Buf::Fifo(VecDeque::new()),
            ShadowPolicy::Lifo => Buf::Lifo(Vec::new()),
            ShadowPolicy::StrictPriority { .. } => Buf::StrictPriority(BTreeMap::new()),
            ShadowPolicy::RoundRobin => Buf::RoundRobin {
                subs: vec![VecDeque::new(); n_sources],
                cursor: n_sources.saturating_sub(1),
            },
        };
        Self {
            index,
            buf,
            len: 0,
            ingested: 0,
            served: 0,
            tracker: BusyCycleTracker::new(),
            policy: policy.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn ingested(&self) -> u64 {
        self.ingested
    }

    pub fn served(&self) -> u64 {
        self.served
    }

    pub fn tracker(&self) -> &BusyCycleTracker {
        &self.tracker
    }

    fn ingest(&mut self, id: PacketId, source: usize, slot: Slot) {
        if self.len == 0 {
            self.tracker.note_open(slot);
        }
        match &mut self.buf {
            Buf::Fifo(q) => q.push_back(id),
            Buf::Lifo(stack) => stack.push(id),
            Buf::StrictPriority(subs) => {
                let class = self.policy.strict_class(source);
                subs.entry(class).or_default().push_back(id);
            }
            Buf::RoundRobin { subs, .. } => subs[source].push_back(id),
        }
        self.len += 1;
        self.ingested += 1;
    }

    fn serve(&mut self, _slot: Slot) -> Option<PacketId> {
        if self.len == 0 {
            self.tracker.note_service_slot(false, false);
            return None;
        }
        let id = match &mut self.buf {
            Buf::Fifo(q) => q.pop_front().expect("len tracked"),
            Buf::Lifo(stack) => stack.pop().expect("len tracked"),
            Buf::StrictPriority(subs) => {
                let class = *subs
                    .iter()
                    .find(|(_, q)| !q.is_empty())
                    .expect("len tracked")
                    .0;
                subs.get_mut(&class).unwrap().pop_front().unwrap()
            }
            Buf::RoundRobin { subs, cursor } => {
                let n = subs.len();
                let next = (1..=n)
                    .map(|step| (*cursor + step) % n)
                    .find(|&s| !subs[s].is_empty())
                    .expect("len tracked");
                *cursor = next;
                subs[next].pop_front().unwrap()
            }
        };
        self.len -= 1;
        self.served += 1;
        self.tracker.note_service_slot(true, self.len == 0);
        Some(id)
    }

    /// Projected rank among unserved copies (0 = served next), assuming no
    /// further arrivals. `source` must be the copy's source queue.
    fn position_of(&self, id: PacketId, source: usize) -> Option<u64> {
        match &self.buf {
            Buf::Fifo(q) => idx_of_sorted(q, id).map(|i| i as u64),
            Buf::Lifo(stack) => {
                // Push order ascends in id, so the index is searchable; the
                // rank counts down from the top of the stack.
                let i = stack.partition_point(|&x| x < id);
                (i < stack.len() && stack[i] == id).then(|| (stack.len() - 1 - i) as u64)
            }
            Buf::StrictPriority(subs) => {
                let class = self.policy.strict_class(source);
                let sub = subs.get(&class)?;
                let k = idx_of_sorted(sub, id)? as u64;
                let ahead: u64 = subs
                    .range(..class)
                    .map(|(_, q)| q.len() as u64)
                    .sum();
                Some(ahead + k)
            }
            Buf::RoundRobin { subs, cursor } => {
                let n = subs.len();
                let k = idx_of_sorted(&subs[source], id)? as u64;
                // Sweep view: in sweep r every source with >= r queued copies
                // is served once, in cyclic order starting after the cursor.
                // This copy goes in sweep k + 1 at its source's turn.
                let first = (*cursor + 1) % n;
                let rank = |s: usize| (s + n - first) % n;
                let mut before = k;
                for s in 0..n {
                    if s == source {
                        continue;
                    }
                    let cap = k + u64::from(rank(s) < rank(source));
                    before += (subs[s].len() as u64).min(cap);
                }
                Some(before)
            }
        }
    }

    fn contains(&self, id: PacketId, source: usize) -> bool {
        self.position_of(id, source).is_some()
    }
}

impl ShadowPolicy {
    fn strict_class(&self, source: usize) -> u32 {
        match self {
            ShadowPolicy::StrictPriority { classes } => classes[source],
            _ => 0,
        }
    }
}

/// Index of `id` in a deque whose ids ascend (ingest order).
fn idx_of_sorted(q: &VecDeque<PacketId>, id: PacketId) -> Option<usize> {
    let i = q.partition_point(|&x| x < id);
    (i < q.len() && q[i] == id).then_some(i)
}

/// The shadow network: one policy-ordered queue per output line.
#[derive(Debug, Clone)]
pub struct ShadowCfn {
    queues: Vec<ShadowQueue>,
}

impl ShadowCfn {
    pub fn new(n_outputs: usize, n_queues: usize, policy: &ShadowPolicy) -> Self {
        Self {
            queues: (0..n_outputs)
                .map(|m| ShadowQueue::new(m, policy, n_queues))
                .collect(),
        }
    }

    pub fn n_outputs(&self) -> usize {
        self.queues.len()
    }

    pub fn queue(&self, m: usize) -> &ShadowQueue {
        &self.queues[m]
    }

    pub fn queues(&self) -> &[ShadowQueue] {
        &self.queues
    }

    /// End-of-slot ingest of this slot's arrivals (already in id order).
    pub fn ingest_arrivals(&mut self, arrived: &[Packet], slot: Slot) {
        for p in arrived {
            self.queues[p.dest_output].ingest(p.id, p.source_queue, slot);
        }
    }

    /// Mid-slot service: every non-empty queue departs one copy, which is
    /// stamped into the ledger. Returns the departed ids in output order.
    pub fn serve_all(&mut self, slot: Slot, ledger: &mut PacketLedger) -> Vec<PacketId> {
        let mut departed = Vec::new();
        for q in &mut self.queues {
            if let Some(id) = q.serve(slot) {
                ledger.set_shadow_departure(id, slot);
                departed.push(id);
            }
        }
        departed
    }

    /// Actual departure slot if the copy left; otherwise the projection
    /// `slot + rank` under no further arrivals, ranks taken before this
    /// slot's shadow service.
    pub fn departure_time(
        &self,
        id: PacketId,
        slot: Slot,
        ledger: &PacketLedger,
    ) -> Result<Slot, ShadowError> {
        if let Some(actual) = ledger.shadow_departure(id) {
            return Ok(actual);
        }
        let queue = ledger.dest(id);
        let source = ledger.source(id);
        match self.queues[queue].position_of(id, source) {
            Some(rank) => Ok(slot + rank),
            None => Err(ShadowError::UnknownPacket(id)),
        }
    }

    pub fn contains(&self, id: PacketId, ledger: &PacketLedger) -> bool {
        self.queues[ledger.dest(id)].contains(id, ledger.source(id))
    }

    /// Longest busy cycle of output line `m` so far (open cycle included).
    pub fn theta(&self, m: usize) -> u64 {
        self.queues[m].tracker().longest()
    }

    pub fn live_copies(&self) -> u64 {
        self.queues.iter().map(|q| q.len() as u64).sum()
    }

    /// Conservation across all lines: ingested = live + served.
    pub fn conservation_holds(&self) -> bool {
        self.queues
            .iter()
            .all(|q| q.ingested() == q.len() as u64 + q.served())
    }
}
