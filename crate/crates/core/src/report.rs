//! CSV export of run results.
//!
//! All writers emit a header line and plain numeric cells, no quoting.
//! Formatting goes through the standard shortest-round-trip float printer,
//! so a rerun of the same configuration and seed produces byte-identical
//! files.

use std::io::{self, Write};

use crate::packet::{PacketLedger, Slot};
use crate::runner::{Checkpoint, RunSummary, SlotSeries};

/// One row per packet: identity, routing, and the three stamps. Stamps a
/// packet never earned stay empty.
pub fn write_packets_csv<W: Write>(w: &mut W, ledger: &PacketLedger) -> io::Result<()> {
    writeln!(
        w,
        "id,source_queue,dest_output,arrival,delivered,shadow_departure,real_departure"
    )?;
    for id in ledger.iter_ids() {
        write!(
            w,
            "{},{},{},{},",
            id.0,
            ledger.source(id),
            ledger.dest(id),
            ledger.arrival(id)
        )?;
        write_opt(w, ledger.delivered(id))?;
        w.write_all(b",")?;
        write_opt(w, ledger.shadow_departure(id))?;
        w.write_all(b",")?;
        write_opt(w, ledger.real_departure(id))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn write_opt<W: Write>(w: &mut W, v: Option<Slot>) -> io::Result<()> {
    match v {
        Some(s) => write!(w, "{s}"),
        None => Ok(()),
    }
}

/// One row per checkpoint of a single run.
pub fn write_checkpoints_csv<W: Write>(w: &mut W, checkpoints: &[Checkpoint]) -> io::Result<()> {
    writeln!(w, "slot,theta,backlog,departed")?;
    for c in checkpoints {
        writeln!(w, "{},{},{},{}", c.slot, c.theta, c.backlog, c.departed)?;
    }
    Ok(())
}

/// The per-slot series; row i holds the values observed at the start of
/// slot i.
pub fn write_series_csv<W: Write>(w: &mut W, series: &SlotSeries) -> io::Result<()> {
    writeln!(w, "slot,potential,hol_wait,urgency_gap,theta")?;
    for slot in 0..series.len() {
        writeln!(
            w,
            "{},{},{},{},{}",
            slot,
            series.potential[slot],
            series.hol_wait[slot],
            series.urgency_gap[slot],
            series.theta[slot],
        )?;
    }
    Ok(())
}

/// One row per run with the scalar observables; replication studies and
/// sweeps concatenate their runs here.
pub fn write_summaries_csv<W: Write>(w: &mut W, summaries: &[RunSummary]) -> io::Result<()> {
    writeln!(
        w,
        "seed,horizon,warmup,n_queues,n_outputs,total_arrivals,total_departures,\
         final_backlog,shadow_live,theta,latency_count,latency_mean,\
         latency_second_moment,latency_max,oq_delay_count,oq_delay_mean,\
         oq_delay_second_moment,oq_delay_max"
    )?;
    for s in summaries {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.seed,
            s.horizon,
            s.warmup,
            s.n_queues,
            s.n_outputs,
            s.total_arrivals,
            s.total_departures,
            s.final_backlog,
            s.shadow_live,
            s.theta,
            s.latency.count,
            s.latency.mean,
            s.latency.second_moment,
            s.latency.max,
            s.oq_delay.count,
            s.oq_delay.mean,
            s.oq_delay.second_moment,
            s.oq_delay.max,
        )?;
    }
    Ok(())
}

/// One row per (run, queue) with the per-queue counters and rates.
pub fn write_queues_csv<W: Write>(w: &mut W, summaries: &[RunSummary]) -> io::Result<()> {
    writeln!(
        w,
        "seed,queue,rate,arrivals,departures,service,empirical_rate,departure_share"
    )?;
    for s in summaries {
        let empirical = s.empirical_rates();
        let shares = s.departure_shares();
        for q in 0..s.n_queues {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                s.seed,
                q,
                s.rates[q],
                s.arrivals_by_queue[q],
                s.departures_by_queue[q],
                s.service_by_queue[q],
                empirical[q],
                shares[q],
            )?;
        }
    }
    Ok(())
}
