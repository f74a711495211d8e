//! Discrete-time simulation and scheduling for constrained queueing networks.
//!
//! N FIFO queues receive Bernoulli arrivals of unit packets; per slot, a
//! scheduler picks a maximal schedule from a feasible set (crossbar
//! matchings, independent sets of a conflict graph, or an explicit list),
//! and served packets drain through M unit-speed output lines. Alongside
//! the real network runs an unconstrained shadow copy; the gap between a
//! packet's shadow departure time and the clock defines its urgency, and
//! the urgency-fair scheduler serves the max-urgency-weight schedule each
//! slot. Baselines (longest-queue-first, oldest-cell-first, random) and an
//! analysis layer (admissibility, rate stability, delay moments, drift and
//! busy-cycle probes) sit on top, driven by a JSON-configured runner.

pub mod acceptance;
pub mod arrivals;
pub mod network;
pub mod packet;
pub mod queue;
pub mod analysis;
pub mod config;
pub mod election;
pub mod lp;
pub mod report;
pub mod runner;
pub mod scheduler;
pub mod schedules;
pub mod shadow;

pub use acceptance::{run_all, CriterionResult};
pub use arrivals::ArrivalProcess;
pub use config::{Experiment, ExperimentConfig};
pub use election::{Ranking, VoteMatrix, WeightFunction};
pub use network::{NetworkState, SlotEvents};
pub use packet::{Packet, PacketId, PacketLedger, Slot};
pub use queue::{BusyCycleTracker, OutputPolicy, OutputQueue, QueueState};
pub use runner::{
    run_experiment, run_replications, run_replications_sequential, run_with_seed, Checkpoint,
    RunError, RunOutput, RunSummary, SlotSeries,
};
pub use scheduler::{Scheduler, SchedulerKind, TieBreak};
pub use schedules::{ConflictGraph, FeasibleSchedule, ScheduleSet, SwitchTopology};
pub use shadow::{ShadowCfn, ShadowError, ShadowPolicy};
