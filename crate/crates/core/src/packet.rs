//! Packet identity and the per-run departure ledger.
//!
//! Packet ids are dense and monotone in arrival order (slot, then queue
//! index), so the ledger is a flat vector indexed by id. Slots are stored
//! as `u32` internally; horizons beyond `u32::MAX - 1` are rejected at
//! configuration time long before this matters.

pub type Slot = u64;

/// Sentinel for "not yet departed" inside the packed ledger rows.
const NO_SLOT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId(pub u64);

impl PacketId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A packet in flight somewhere in the real network. The shadow network
/// works with copies identified by the same id.
#[derive(Debug, Clone, Copy)]
pub struct Packet {
    pub id: PacketId,
    pub arrival_slot: Slot,
    pub source_queue: usize,
    pub dest_output: usize,
    /// Slot the shadow copy departed (or is projected to depart); stamped
    /// by the driver just before the packet is handed to an output queue.
    pub shadow_departure: Option<Slot>,
    pub real_departure: Option<Slot>,
}

/// One row per packet: arrival, routing, delivery into the output queue,
/// and both departure stamps.
#[derive(Debug, Clone, Copy)]
struct LedgerRow {
    arrival: u32,
    source: u16,
    dest: u16,
    delivered: u32,
    shadow: u32,
    real: u32,
}

/// Append-only per-packet log. Ids are assigned here, in arrival order.
#[derive(Debug, Default)]
pub struct PacketLedger {
    rows: Vec<LedgerRow>,
}

impl PacketLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Registers a new arrival and returns its id.
    pub fn record_arrival(&mut self, arrival: Slot, source: usize, dest: usize) -> PacketId {
        let id = PacketId(self.rows.len() as u64);
        self.rows.push(LedgerRow {
            arrival: arrival as u32,
            source: source as u16,
            dest: dest as u16,
            delivered: NO_SLOT,
            shadow: NO_SLOT,
            real: NO_SLOT,
        });
        id
    }

    /// Stamps the slot the constrained network handed the packet to its
    /// output queue.
    pub fn set_delivered(&mut self, id: PacketId, slot: Slot) {
        let row = &mut self.rows[id.index()];
        debug_assert_eq!(row.delivered, NO_SLOT, "delivery stamped twice");
        row.delivered = slot as u32;
    }

    pub fn set_shadow_departure(&mut self, id: PacketId, slot: Slot) {
        let row = &mut self.rows[id.index()];
        debug_assert_eq!(row.shadow, NO_SLOT, "shadow departure stamped twice");
        row.shadow = slot as u32;
    }

    pub fn set_real_departure(&mut self, id: PacketId, slot: Slot) {
        let row = &mut self.rows[id.index()];
        debug_assert_eq!(row.real, NO_SLOT, "real departure stamped twice");
        row.real = slot as u32;
    }

    pub fn arrival(&self, id: PacketId) -> Slot {
        self.rows[id.index()].arrival as Slot
    }

    pub fn source(&self, id: PacketId) -> usize {
        self.rows[id.index()].source as usize
    }

    pub fn dest(&self, id: PacketId) -> usize {
        self.rows[id.index()].dest as usize
    }

    pub fn delivered(&self, id: PacketId) -> Option<Slot> {
        match self.rows[id.index()].delivered {
            NO_SLOT => None,
            s => Some(s as Slot),
        }
    }

    pub fn shadow_departure(&self, id: PacketId) -> Option<Slot> {
        match self.rows[id.index()].shadow {
            NO_SLOT => None,
            s => Some(s as Slot),
        }
    }

    pub fn real_departure(&self, id: PacketId) -> Option<Slot> {
        match self.rows[id.index()].real {
            NO_SLOT => None,
            s => Some(s as Slot),
        }
    }

    pub fn iter_ids(&self) -> impl Iterator<Item = PacketId> {
        (0..self.rows.len() as u64).map(PacketId)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_dense_and_monotone() {
        let mut ledger = PacketLedger::new();
        let a = ledger.record_arrival(0, 0, 0);
        let b = ledger.record_arrival(0, 1, 0);
        let c = ledger.record_arrival(3, 0, 1);
        assert_eq!((a.0, b.0, c.0), (0, 1, 2));
        assert_eq!(ledger.arrival(c), 3);
        assert_eq!(ledger.dest(c), 1);
    }

    #[test]
    fn departure_stamps_round_trip() {
        let mut ledger = PacketLedger::new();
        let id = ledger.record_arrival(5, 2, 1);
        assert_eq!(ledger.shadow_departure(id), None);
        assert_eq!(ledger.real_departure(id), None);
        assert_eq!(ledger.delivered(id), None);
        ledger.set_shadow_departure(id, 9);
        ledger.set_delivered(id, 10);
        ledger.set_real_departure(id, 11);
        assert_eq!(ledger.shadow_departure(id), Some(9));
        assert_eq!(ledger.delivered(id), Some(10));
        assert_eq!(ledger.real_departure(id), Some(11));
    }
}
