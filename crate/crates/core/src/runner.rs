//! Experiment driver: wires arrivals, the scheduler, the real network, and
//! the shadow emulation into a slot loop, and collects observables.
//!
//! Per slot tau:
//!   1. optionally record the potential series (pre-service state);
//!   2. ask the scheduler for a feasible schedule;
//!   3. stamp each served head with its shadow departure time, so output
//!      queues that order by shadow departure see the value at insert time;
//!   4. advance the real network (service, output lines, arrivals);
//!   5. advance the shadow in lockstep: serve every line, then ingest the
//!      slot's arrivals.
//!
//! Reruns with the same configuration and seed reproduce every observable
//! bit for bit.

use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::analysis::{latency_moments, oq_delay_moments, MomentReport};
use crate::arrivals::{ArrivalError, ArrivalProcess};
use crate::config::Experiment;
use crate::election::{urgencies, WeightFunction};
use crate::network::{NetworkError, NetworkState};
use crate::packet::{PacketLedger, Slot};
use crate::scheduler::{Scheduler, SchedulerKind};
use crate::schedules::ScheduleError;
use crate::shadow::{ShadowCfn, ShadowError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Arrival(#[from] ArrivalError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Shadow(#[from] ShadowError),
}

/// Snapshot taken after a checkpoint's worth of slots has run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Checkpoint {
    /// Slots completed when the snapshot was taken.
    pub slot: Slot,
    /// Longest shadow busy cycle over all output lines so far, counting a
    /// still-open cycle.
    pub theta: u64,
    /// Packets inside the real network, constrained plus output queues.
    pub backlog: u64,
    /// Cumulative departures through the output lines.
    pub departed: u64,
}

/// Everything a run reports without keeping per-packet state.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub horizon: Slot,
    pub warmup: Slot,
    pub n_queues: usize,
    pub n_outputs: usize,
    pub rates: Vec<f64>,
    pub arrivals_by_queue: Vec<u64>,
    /// Departures through the output lines, grouped by source queue.
    pub departures_by_queue: Vec<u64>,
    /// Packets each constrained queue handed to its output queue.
    pub service_by_queue: Vec<u64>,
    pub total_arrivals: u64,
    pub total_departures: u64,
    pub final_backlog: u64,
    /// Shadow copies still queued at the end of the run.
    pub shadow_live: u64,
    /// Longest shadow busy cycle over all output lines.
    pub theta: u64,
    pub latency: MomentReport,
    /// Emulation gap, real departure minus shadow departure.
    pub oq_delay: MomentReport,
    pub checkpoints: Vec<Checkpoint>,
}

impl RunSummary {
    /// Fraction of all departures owed to each source queue.
    pub fn departure_shares(&self) -> Vec<f64> {
        if self.total_departures == 0 {
            return vec![0.0; self.n_queues];
        }
        self.departures_by_queue
            .iter()
            .map(|&d| d as f64 / self.total_departures as f64)
            .collect()
    }

    /// Departures per slot per queue.
    pub fn empirical_rates(&self) -> Vec<f64> {
        self.departures_by_queue
            .iter()
            .map(|&d| d as f64 / self.horizon as f64)
            .collect()
    }
}

/// Per-slot observables sampled at slot start, before any service.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlotSeries {
    /// Potential L: the rate-weighted sum of the integrated weight
    /// function over each head-of-line waiting time.
    pub potential: Vec<f64>,
    /// Summed head-of-line waiting times over backlogged queues.
    pub hol_wait: Vec<f64>,
    /// Summed gap between head waiting time and urgency, per queue; each
    /// term is non-negative.
    pub urgency_gap: Vec<f64>,
    /// Longest shadow busy cycle seen so far.
    pub theta: Vec<u64>,
}

impl SlotSeries {
    pub fn len(&self) -> usize {
        self.potential.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potential.is_empty()
    }
}

/// A run's summary plus the full per-packet and network state, for callers
/// that audit invariants or export packet-level data.
#[derive(Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub ledger: PacketLedger,
    pub net: NetworkState,
    pub cfn: ShadowCfn,
    /// Present when the experiment records the series.
    pub series: Option<SlotSeries>,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Arrival-process and scheduler seeds derived from one run seed.
fn component_seeds(seed: u64) -> (u64, u64) {
    let mut s = seed;
    (splitmix64(&mut s), splitmix64(&mut s))
}

/// Independent run seeds for `n` replications of a base seed. Seed lists
/// are prefixes of each other, so growing a study keeps earlier runs.
pub fn replication_seeds(base: u64, n: usize) -> Vec<u64> {
    let mut s = base ^ 0xA076_1D64_78BD_642F;
    (0..n).map(|_| splitmix64(&mut s)).collect()
}

/// Runs the experiment with its configured seed.
pub fn run_experiment(exp: &Experiment) -> Result<RunOutput, RunError> {
    run_with_seed(exp, exp.seed)
}

/// Runs the experiment with an overriding seed, as replications do.
pub fn run_with_seed(exp: &Experiment, seed: u64) -> Result<RunOutput, RunError> {
    let n = exp.n_queues();
    let (arrival_seed, scheduler_seed) = component_seeds(seed);
    let mut arrivals = ArrivalProcess::new(exp.rates.clone(), arrival_seed)?;
    let mut scheduler = Scheduler::new(exp.scheduler_kind.clone(), exp.tie_break, scheduler_seed);
    let mut net = NetworkState::new(
        exp.set.clone(),
        exp.dest_map.clone(),
        exp.n_outputs,
        exp.output_policy.clone(),
    );
    let mut cfn = ShadowCfn::new(exp.n_outputs, n, &exp.shadow_policy);
    let mut ledger = PacketLedger::new();

    let series_weight = match &exp.scheduler_kind {
        SchedulerKind::Mucf { weight } => weight.clone(),
        _ => WeightFunction::Identity,
    };
    let mut series = exp.record_series.then(SlotSeries::default);

    let checkpoints_at = exp.checkpoints();
    let mut next_cp = 0usize;
    let mut checkpoints = Vec::with_capacity(checkpoints_at.len());

    let mut arrivals_by_queue = vec![0u64; n];
    let mut departures_by_queue = vec![0u64; n];
    let mut total_departures = 0u64;
    let mut arrival_buf = vec![false; n];

    for slot in 0..exp.horizon {
        if let Some(series) = series.as_mut() {
            let u = urgencies(&net, &cfn, &ledger, slot);
            let mut potential = 0.0;
            let mut hol_wait = 0.0;
            let mut gap = 0.0;
            for q in 0..n {
                let w = net
                    .queue(q)
                    .head()
                    .map_or(0.0, |h| (slot - h.arrival_slot) as f64);
                potential += exp.rates[q] * series_weight.integral(w);
                hol_wait += w;
                gap += w - u[q] as f64;
            }
            series.potential.push(potential);
            series.hol_wait.push(hol_wait);
            series.urgency_gap.push(gap);
            series.theta.push(max_theta(&cfn));
        }

        let schedule = scheduler.select(&net, &cfn, &ledger, slot)?;
        for q in schedule.served_indices() {
            let Some(head_id) = net.queue(q).head().map(|p| p.id) else {
                continue;
            };
            let d = cfn.departure_time(head_id, slot, &ledger)?;
            net.stamp_head_shadow_departure(q, d);
        }

        arrivals.sample_into(&mut arrival_buf);
        let events = net.advance_slot(slot, &schedule, &arrival_buf, &mut ledger)?;
        for p in &events.departed {
            departures_by_queue[p.source_queue] += 1;
        }
        total_departures += events.departed.len() as u64;
        for p in &events.arrived {
            arrivals_by_queue[p.source_queue] += 1;
        }

        cfn.serve_all(slot, &mut ledger);
        cfn.ingest_arrivals(&events.arrived, slot);

        let done = slot + 1;
        if next_cp < checkpoints_at.len() && done == checkpoints_at[next_cp] {
            checkpoints.push(Checkpoint {
                slot: done,
                theta: max_theta(&cfn),
                backlog: net.packets_in_flight(),
                departed: total_departures,
            });
            next_cp += 1;
        }
    }

    debug_assert!(net.conservation_holds(), "real-network conservation");
    debug_assert!(cfn.conservation_holds(), "shadow conservation");
    debug_assert_eq!(
        ledger.len() as u64,
        arrivals_by_queue.iter().sum::<u64>(),
        "every arrival has a ledger row"
    );

    let summary = RunSummary {
        seed,
        horizon: exp.horizon,
        warmup: exp.warmup,
        n_queues: n,
        n_outputs: exp.n_outputs,
        rates: exp.rates.clone(),
        arrivals_by_queue,
        departures_by_queue,
        service_by_queue: net.queues().iter().map(|q| q.departures()).collect(),
        total_arrivals: ledger.len() as u64,
        total_departures,
        final_backlog: net.packets_in_flight(),
        shadow_live: cfn.live_copies(),
        theta: max_theta(&cfn),
        latency: latency_moments(&ledger, exp.warmup),
        oq_delay: oq_delay_moments(&ledger, exp.warmup),
        checkpoints,
    };
    Ok(RunOutput {
        summary,
        ledger,
        net,
        cfn,
        series,
    })
}

fn max_theta(cfn: &ShadowCfn) -> u64 {
    (0..cfn.n_outputs()).map(|m| cfn.theta(m)).max().unwrap_or(0)
}

/// Runs `n` independent replications and keeps the summaries, in seed
/// order. Data-parallel when the `parallel` feature is on.
pub fn run_replications(exp: &Experiment, n: usize) -> Result<Vec<RunSummary>, RunError> {
    let seeds = replication_seeds(exp.seed, n);
    #[cfg(feature = "parallel")]
    {
        seeds
            .par_iter()
            .map(|&s| run_with_seed(exp, s).map(|o| o.summary))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        seeds
            .iter()
            .map(|&s| run_with_seed(exp, s).map(|o| o.summary))
            .collect()
    }
}

/// Single-threaded twin of `run_replications`; always produces the same
/// summaries, and exists so the two can be compared and benchmarked.
pub fn run_replications_sequential(exp: &Experiment, n: usize) -> Result<Vec<RunSummary>, RunError> {
    replication_seeds(exp.seed, n)
        .iter()
        .map(|&s| run_with_seed(exp, s).map(|o| o.summary))
        .collect()
}
