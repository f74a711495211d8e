//! The real constrained network N and its per-slot update.
//!
//! Timeline within a slot tau:
//!   1. the driver observes state and picks a maximal feasible schedule;
//!   2. scheduled non-empty queues hand their head packet to the packet's
//!      output queue (ascending queue index);
//!   3. every output queue gets one service opportunity (a packet delivered
//!      in step 2 can depart in the same slot);
//!   4. arrivals append to queue tails and become servable next slot.
//!
//! Queue lengths therefore obey Q(tau+1) = (Q(tau) - S(tau))^+ + A(tau),
//! which is asserted per-slot in debug builds.

use thiserror::Error;

use crate::packet::{Packet, PacketLedger, Slot};
use crate::queue::{OutputPolicy, OutputQueue, QueueState};
use crate::schedules::{FeasibleSchedule, ScheduleSet};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("schedule has {got} entries, network has {expected} queues")]
    LengthMismatch { expected: usize, got: usize },
    #[error("slot {slot}: scheduler produced a schedule outside the feasible set")]
    InfeasibleSchedule { slot: Slot },
    #[error("arrival vector has {got} entries, network has {expected} queues")]
    ArrivalLengthMismatch { expected: usize, got: usize },
}

/// What happened during one slot.
#[derive(Debug, Default)]
pub struct SlotEvents {
    pub slot: Slot,
    /// Queues whose head packet was served (scheduled and non-empty).
    pub served_queues: Vec<usize>,
    /// Packets that left the system through an output line this slot.
    pub departed: Vec<Packet>,
    /// Packets created by this slot's arrivals, in id order.
    pub arrived: Vec<Packet>,
}

/// Full simulator state for the real network.
#[derive(Debug)]
pub struct NetworkState {
    queues: Vec<QueueState>,
    outputs: Vec<OutputQueue>,
    /// Destination output line of each queue's packets (fixed routing).
    dest_map: Vec<usize>,
    schedule_set: ScheduleSet,
}

impl NetworkState {
    pub fn new(schedule_set: ScheduleSet, dest_map: Vec<usize>, n_outputs: usize, output_policy: OutputPolicy) -> Self {
        let n = schedule_set.n_queues();
        assert_eq!(dest_map.len(), n, "dest_map must cover every queue");
        assert!(
            dest_map.iter().all(|&m| m < n_outputs),
            "dest_map entry out of range"
        );
        Self {
            queues: (0..n).map(QueueState::new).collect(),
            outputs: (0..n_outputs)
                .map(|m| OutputQueue::new(m, output_policy.clone()))
                .collect(),
            dest_map,
            schedule_set,
        }
    }

    /// Convenience constructor for an M-port switch: queue (i, j) routes to
    /// output j.
    pub fn switch(schedule_set: ScheduleSet, output_policy: OutputPolicy) -> Self {
        let t = schedule_set
            .switch_topology()
            .expect("switch constructor requires a switch schedule set")
            .clone();
        let dest: Vec<usize> = (0..t.n_queues()).map(|q| t.output_of(q)).collect();
        Self::new(schedule_set, dest, t.ports, output_policy)
    }

    pub fn n_queues(&self) -> usize {
        self.queues.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn schedule_set(&self) -> &ScheduleSet {
        &self.schedule_set
    }

    pub fn queue(&self, n: usize) -> &QueueState {
        &self.queues[n]
    }

    pub fn queues(&self) -> &[QueueState] {
        &self.queues
    }

    pub fn output(&self, m: usize) -> &OutputQueue {
        &self.outputs[m]
    }

    pub fn outputs(&self) -> &[OutputQueue] {
        &self.outputs
    }

    pub fn dest_of(&self, queue: usize) -> usize {
        self.dest_map[queue]
    }

    pub fn queue_lengths(&self) -> Vec<usize> {
        self.queues.iter().map(|q| q.len()).collect()
    }

    /// Stamps the head packet's shadow departure time; must happen before
    /// `advance_slot` when the output policy orders by shadow departures.
    pub fn stamp_head_shadow_departure(&mut self, queue: usize, departure: Slot) {
        if let Some(head) = self.queues[queue].head_mut() {
            head.shadow_departure = Some(departure);
        }
    }

    /// Executes one slot: service per `schedule`, output-queue service, then
    /// arrivals. New packets get their ids here, in ascending queue order.
    pub fn advance_slot(
        &mut self,
        slot: Slot,
        schedule: &FeasibleSchedule,
        arrivals: &[bool],
        ledger: &mut PacketLedger,
    ) -> Result<SlotEvents, NetworkError> {
        let n = self.queues.len();
        if schedule.len() != n {
            return Err(NetworkError::LengthMismatch {
                expected: n,
                got: schedule.len(),
            });
        }
        if arrivals.len() != n {
            return Err(NetworkError::ArrivalLengthMismatch {
                expected: n,
                got: arrivals.len(),
            });
        }
        if !self.schedule_set.contains_unchecked(schedule) {
            return Err(NetworkError::InfeasibleSchedule { slot });
        }

        #[cfg(debug_assertions)]
        let pre_lengths: Vec<usize> = self.queues.iter().map(|q| q.len()).collect();

        let mut events = SlotEvents {
            slot,
            ..SlotEvents::default()
        };

        // Constrained-queue service, ascending index = the delivery tie-break.
        for q in 0..n {
            if schedule.serves(q) && !self.queues[q].is_empty() {
                let p = self.queues[q].pop_head().expect("non-empty queue");
                ledger.set_delivered(p.id, slot);
                self.outputs[p.dest_output].insert(p, slot);
                events.served_queues.push(q);
            }
        }

        // Output lines run after delivery, so a freshly delivered packet can
        // leave in its service slot.
        for m in 0..self.outputs.len() {
            if let Some(p) = self.outputs[m].serve(slot) {
                ledger.set_real_departure(p.id, slot);
                events.departed.push(p);
            }
        }

        for q in 0..n {
            if arrivals[q] {
                let id = ledger.record_arrival(slot, q, self.dest_map[q]);
                let p = Packet {
                    id,
                    arrival_slot: slot,
                    source_queue: q,
                    dest_output: self.dest_map[q],
                    shadow_departure: None,
                    real_departure: None,
                };
                self.queues[q].push_arrival(p);
                events.arrived.push(p);
            }
        }

        #[cfg(debug_assertions)]
        for q in 0..n {
            let served = schedule.serves(q) && pre_lengths[q] > 0;
            let expected = pre_lengths[q].saturating_sub(if schedule.serves(q) { 1 } else { 0 })
                + usize::from(arrivals[q]);
            debug_assert_eq!(
                self.queues[q].len(),
                expected,
                "queue law violated at slot {slot} queue {q}"
            );
            debug_assert_eq!(
                served,
                events.served_queues.contains(&q),
                "service bookkeeping out of sync at queue {q}"
            );
        }

        Ok(events)
    }

    /// Packets still inside the system (constrained queues + output queues).
    pub fn packets_in_flight(&self) -> u64 {
        let queued: u64 = self.queues.iter().map(|q| q.len() as u64).sum();
        let in_outputs: u64 = self.outputs.iter().map(|o| o.len() as u64).sum();
        queued + in_outputs
    }

    /// Conservation: every arrival is queued, in an output queue, or departed.
    pub fn conservation_holds(&self) -> bool {
        let arrivals: u64 = self.queues.iter().map(|q| q.arrivals()).sum();
        let departed: u64 = self.outputs.iter().map(|o| o.served()).sum();
        arrivals == self.packets_in_flight() + departed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::SwitchTopology;

    fn single_queue_net() -> NetworkState {
        // One queue, one output; schedules {0, 1}.
        let set = ScheduleSet::explicit(vec![
            FeasibleSchedule::new(vec![false]),
            FeasibleSchedule::new(vec![true]),
        ])
        .unwrap();
        NetworkState::new(set, vec![0], 1, OutputPolicy::Fifo)
    }

    #[test]
    fn always_served_queue_lags_arrivals_by_one_slot() {
        // Hand-simulated: arrivals every slot, service every slot. Slot 0
        // serves an empty queue (no departure); each later slot serves the
        // packet that arrived at the end of the previous slot. After slots
        // 0..=4 the cumulative departure count is 4 = tau with tau = 4, i.e.
        // D/(slots elapsed) = tau/(tau+1) -> 1.
        let mut net = single_queue_net();
        let mut ledger = PacketLedger::new();
        let serve = FeasibleSchedule::new(vec![true]);
        let mut departures_by_slot = Vec::new();
        for slot in 0..=4 {
            let ev = net
                .advance_slot(slot, &serve, &[true], &mut ledger)
                .unwrap();
            departures_by_slot.push(ev.departed.len());
        }
        assert_eq!(departures_by_slot, vec![0, 1, 1, 1, 1]);
        assert_eq!(net.queue(0).departures(), 4);
        assert_eq!(net.queue(0).len(), 1); // the slot-4 arrival is still queued
        assert!(net.conservation_holds());
    }

    #[test]
    fn latency_is_one_when_queue_never_backs_up() {
        let mut net = single_queue_net();
        let mut ledger = PacketLedger::new();
        let serve = FeasibleSchedule::new(vec![true]);
        // Alternating arrivals: each packet is served the slot after it
        // arrives and departs the output line the same slot.
        for slot in 0..100 {
            net.advance_slot(slot, &serve, &[slot % 2 == 0], &mut ledger)
                .unwrap();
        }
        for id in ledger.iter_ids() {
            if let Some(dep) = ledger.real_departure(id) {
                assert_eq!(dep - ledger.arrival(id), 1);
            }
        }
    }

    #[test]
    fn rejects_infeasible_schedule() {
        let set = ScheduleSet::switch(SwitchTopology::new(2));
        let mut net = NetworkState::switch(set, OutputPolicy::Fifo);
        let mut ledger = PacketLedger::new();
        let bad = FeasibleSchedule::new(vec![true, true, false, false]);
        let err = net
            .advance_slot(0, &bad, &[false; 4], &mut ledger)
            .unwrap_err();
        assert!(matches!(err, NetworkError::InfeasibleSchedule { slot: 0 }));
    }

    #[test]
    fn service_on_empty_queue_is_a_no_op() {
        let mut net = single_queue_net();
        let mut ledger = PacketLedger::new();
        let serve = FeasibleSchedule::new(vec![true]);
        let ev = net.advance_slot(0, &serve, &[false], &mut ledger).unwrap();
        assert!(ev.served_queues.is_empty());
        assert!(ev.departed.is_empty());
        assert_eq!(net.queue(0).departures(), 0);
    }

    #[test]
    fn switch_delivery_routes_to_output_column() {
        let set = ScheduleSet::switch(SwitchTopology::new(2));
        let mut net = NetworkState::switch(set, OutputPolicy::Fifo);
        let mut ledger = PacketLedger::new();
        let idle = FeasibleSchedule::zeros(4);
        // queue 1 = (input 0, output 1) gets a packet at slot 0
        net.advance_slot(0, &idle, &[false, true, false, false], &mut ledger)
            .unwrap();
        let serve_q1 = FeasibleSchedule::new(vec![false, true, false, false]);
        let ev = net
            .advance_slot(1, &serve_q1, &[false; 4], &mut ledger)
            .unwrap();
        assert_eq!(ev.departed.len(), 1);
        assert_eq!(ev.departed[0].dest_output, 1);
        assert_eq!(ev.departed[0].real_departure, Some(1));
        assert_eq!(ledger.real_departure(ev.departed[0].id), Some(1));
    }

    #[test]
    fn ids_assigned_in_slot_then_queue_order() {
        let set = ScheduleSet::switch(SwitchTopology::new(2));
        let mut net = NetworkState::switch(set, OutputPolicy::Fifo);
        let mut ledger = PacketLedger::new();
        let idle = FeasibleSchedule::zeros(4);
        net.advance_slot(0, &idle, &[false, true, true, false], &mut ledger)
            .unwrap();
        net.advance_slot(1, &idle, &[true, false, false, false], &mut ledger)
            .unwrap();
        assert_eq!(ledger.len(), 3);
        assert_eq!(ledger.source(crate::packet::PacketId(0)), 1);
        assert_eq!(ledger.source(crate::packet::PacketId(1)), 2);
        assert_eq!(ledger.source(crate::packet::PacketId(2)), 0);
    }
}
