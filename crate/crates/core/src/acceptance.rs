//! End-to-end acceptance suite: eight numbered criteria, each a
//! self-contained set of experiments with pinned seeds and tolerances,
//! reported as one PASS/FAIL line. The `acceptance` integration test
//! asserts every criterion; the CLI `acceptance` subcommand prints the
//! same lines.
//!
//! The criteria are quantitative claims about the stack as a whole:
//! service-share fairness under overload, departure rates tracking any
//! admissible load, delay-moment orderings across schedulers, the
//! structural properties of the consensus ranking, exact optimal
//! assignments, logarithmic busy-cycle growth below saturation versus
//! linear growth past it, negative potential drift at high backlog, and
//! the per-slot invariants of the slot loop.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    check_admissibility, equal_count_drift_bins, linear_fit, rate_stability, MomentReport,
};
use crate::arrivals::ArrivalProcess;
use crate::config::{Experiment, ExperimentConfig};
use crate::election::{
    consensus_ranking, consensus_scores, exhaustive_consistent_orders, urgencies, VoteMatrix,
};
use crate::network::NetworkState;
use crate::packet::{PacketId, PacketLedger, Slot};
use crate::report::{write_checkpoints_csv, write_packets_csv, write_summaries_csv};
use crate::runner::{run_experiment, run_replications, RunOutput, RunSummary};
use crate::scheduler::{max_weight_assignment, Scheduler};
use crate::shadow::ShadowCfn;

/// Verdict of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub index: usize,
    pub name: &'static str,
    pub passed: bool,
    /// Every quantity the verdict rests on; failed checks are prefixed
    /// with FAILED.
    pub detail: String,
}

impl CriterionResult {
    /// The one-line verdict printed by the CLI and the test target.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!(
            "criterion {} ({}): {verdict} [{}]",
            self.index, self.name, self.detail
        )
    }
}

/// Runs all eight criteria in order.
pub fn run_all() -> Vec<CriterionResult> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
    ]
}

/// Accumulates named checks; any failed check fails the criterion.
struct Outcome {
    passed: bool,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            passed: true,
            notes: Vec::new(),
        }
    }

    fn check(&mut self, cond: bool, note: String) {
        if cond {
            self.notes.push(note);
        } else {
            self.passed = false;
            self.notes.push(format!("FAILED {note}"));
        }
    }

    fn note(&mut self, note: String) {
        self.notes.push(note);
    }

    fn fail(&mut self, note: String) {
        self.passed = false;
        self.notes.push(format!("FAILED {note}"));
    }

    fn result(self, index: usize, name: &'static str) -> CriterionResult {
        CriterionResult {
            index,
            name,
            passed: self.passed,
            detail: self.notes.join("; "),
        }
    }
}

fn experiment(json: &str) -> Experiment {
    ExperimentConfig::from_json(json)
        .expect("criterion config parses")
        .validate()
        .expect("criterion config validates")
}

fn service_rate(s: &RunSummary, queue: usize) -> f64 {
    s.service_by_queue[queue] as f64 / s.horizon as f64
}

/// Moments pooled across replications, weighted by sample count.
fn pooled(summaries: &[RunSummary], pick: impl Fn(&RunSummary) -> &MomentReport) -> MomentReport {
    let mut count = 0u64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut max = i64::MIN;
    for s in summaries {
        let m = pick(s);
        count += m.count;
        sum += m.mean * m.count as f64;
        sum_sq += m.second_moment * m.count as f64;
        max = max.max(m.max);
    }
    MomentReport {
        count,
        mean: sum / count as f64,
        second_moment: sum_sq / count as f64,
        max,
    }
}

// =============================================================================
// Criterion 1: overload service shares
// =============================================================================

const NAME_1: &str = "overload service shares";

/// Two flows of rate 0.6 and 0.5 overload one output line of a 2x2
/// crossbar. The longest-queue scheduler splits service so both queues
/// grow at the same rate, giving shares 0.55/0.45; the urgency scheduler
/// with a round-robin shadow equalizes the flows at 0.5/0.5.
pub fn criterion_1() -> CriterionResult {
    let mut out = Outcome::new();
    let config = |scheduler: &str, shadow: &str, seed: u64| {
        experiment(&format!(
            r#"{{
                "topology": {{"kind": "SWITCH", "ports": 2}},
                "rates": {{"kind": "MATRIX", "rows": [[0.0, 0.6], [0.0, 0.5]]}},
                "scheduler": {{"kind": "{scheduler}"}},
                "shadow_policy": {{"kind": "{shadow}"}},
                "horizon": 1000000,
                "seed": {seed}
            }}"#
        ))
    };

    // Queue 1 carries the 0.6 flow and queue 3 the 0.5 flow; both feed
    // output line 1, which serves at most one of them per slot.
    let lqf = run_experiment(&config("LQF", "FIFO", 101)).expect("criterion run");
    let (a, b) = (service_rate(&lqf.summary, 1), service_rate(&lqf.summary, 3));
    out.check(
        (a - 0.55).abs() <= 0.02 && (b - 0.45).abs() <= 0.02,
        format!("longest-queue service rates {a:.4}/{b:.4} within 0.02 of 0.55/0.45"),
    );

    let mucf = run_experiment(&config("MUCF", "ROUND_ROBIN", 102)).expect("criterion run");
    let (a, b) = (service_rate(&mucf.summary, 1), service_rate(&mucf.summary, 3));
    out.check(
        (a - 0.5).abs() <= 0.02 && (b - 0.5).abs() <= 0.02,
        format!("urgency-fair service rates {a:.4}/{b:.4} within 0.02 of 0.50/0.50"),
    );

    out.result(1, NAME_1)
}

// =============================================================================
// Criterion 2: rate stability
// =============================================================================

const NAME_2: &str = "rate stability";

/// The run shared with criterion 7: a near-saturated uniform 4x4 crossbar
/// under the urgency scheduler, with the per-slot series recorded.
fn stable_crossbar_config() -> Experiment {
    experiment(
        r#"{
            "topology": {"kind": "SWITCH", "ports": 4},
            "rates": {"kind": "UNIFORM", "load": 0.95},
            "scheduler": {"kind": "MUCF"},
            "horizon": 1000000,
            "seed": 201,
            "record_series": true
        }"#,
    )
}

/// Departure rates must track any admissible load to within 0.01 per
/// queue, and visibly fail to track the inadmissible overload from
/// criterion 1; the admissibility checker must tell the two apart.
pub fn criterion_2() -> CriterionResult {
    let mut out = Outcome::new();

    let stable = stable_crossbar_config();
    let adm = check_admissibility(&stable.set, &stable.rates).expect("admissibility solves");
    out.check(
        adm.admissible,
        format!("uniform 0.95 load admissible, margin {:.4}", adm.margin),
    );
    let run = run_experiment(&stable).expect("criterion run");
    let stability = rate_stability(
        &run.summary.departures_by_queue,
        &stable.rates,
        stable.horizon,
    );
    out.check(
        stability.max_deviation <= 0.01,
        format!(
            "stable run max departure-rate deviation {:.5} <= 0.01",
            stability.max_deviation
        ),
    );

    // Criterion 1's overloaded crossbar: the same checks must flip.
    let over = experiment(
        r#"{
            "topology": {"kind": "SWITCH", "ports": 2},
            "rates": {"kind": "MATRIX", "rows": [[0.0, 0.6], [0.0, 0.5]]},
            "scheduler": {"kind": "MUCF"},
            "shadow_policy": {"kind": "ROUND_ROBIN"},
            "horizon": 1000000,
            "seed": 202
        }"#,
    );
    let adm = check_admissibility(&over.set, &over.rates).expect("admissibility solves");
    out.check(
        !adm.admissible,
        format!("overload flagged inadmissible, margin {:.4}", adm.margin),
    );
    let run = run_experiment(&over).expect("criterion run");
    let stability = rate_stability(&run.summary.departures_by_queue, &over.rates, over.horizon);
    out.check(
        stability.max_deviation > 0.05,
        format!(
            "overload max departure-rate deviation {:.4} > 0.05",
            stability.max_deviation
        ),
    );

    out.result(2, NAME_2)
}

// =============================================================================
// Criterion 3: delay fairness orderings
// =============================================================================

const NAME_3: &str = "delay fairness orderings";

/// On an 8-line crossbar at load 0.8, latency second moments must order
/// urgency-fair < oldest-first < longest-queue, and the urgency scheduler
/// must have the smallest emulation-gap mean and second moment. At load
/// 0.3 all three mean latencies agree within 10%.
pub fn criterion_3() -> CriterionResult {
    let mut out = Outcome::new();
    let config = |scheduler: &str, load: f64, seed: u64| {
        experiment(&format!(
            r#"{{
                "topology": {{"kind": "SWITCH", "ports": 8}},
                "rates": {{"kind": "UNIFORM", "load": {load}}},
                "scheduler": {{"kind": "{scheduler}"}},
                "horizon": 500000,
                "warmup": 50000,
                "seed": {seed}
            }}"#
        ))
    };
    const REPS: usize = 6;
    const SCHEDULERS: [&str; 3] = ["MUCF", "OCF", "LQF"];

    // One base seed for every scheduler, so replication k sees the same
    // arrival stream under each policy.
    let heavy = SCHEDULERS
        .map(|s| run_replications(&config(s, 0.8, 300), REPS).expect("criterion run"));
    let lat2 = heavy
        .each_ref()
        .map(|runs| pooled(runs, |s| &s.latency).second_moment);
    out.check(
        lat2[0] < lat2[1] && lat2[1] < lat2[2],
        format!(
            "latency second moments at load 0.8: urgency {:.0} < oldest-first {:.0} < longest-queue {:.0}",
            lat2[0], lat2[1], lat2[2]
        ),
    );
    let gap = heavy.each_ref().map(|runs| pooled(runs, |s| &s.oq_delay));
    out.check(
        gap[0].mean <= gap[1].mean && gap[0].mean <= gap[2].mean,
        format!(
            "emulation-gap means: urgency {:.3} <= oldest-first {:.3} and longest-queue {:.3}",
            gap[0].mean, gap[1].mean, gap[2].mean
        ),
    );
    out.check(
        gap[0].second_moment <= gap[1].second_moment
            && gap[0].second_moment <= gap[2].second_moment,
        format!(
            "emulation-gap second moments: urgency {:.1} <= oldest-first {:.1} and longest-queue {:.1}",
            gap[0].second_moment, gap[1].second_moment, gap[2].second_moment
        ),
    );

    let light = SCHEDULERS
        .map(|s| run_replications(&config(s, 0.3, 310), REPS).expect("criterion run"));
    let means = light
        .each_ref()
        .map(|runs| pooled(runs, |s| &s.latency).mean);
    let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / lo;
    out.check(
        spread <= 0.10,
        format!(
            "light-load mean latencies {:.3}/{:.3}/{:.3}, spread {:.1}% within 10%",
            means[0],
            means[1],
            means[2],
            spread * 100.0
        ),
    );

    out.result(3, NAME_3)
}

// =============================================================================
// Criterion 4: consensus ranking properties
// =============================================================================

const NAME_4: &str = "consensus ranking properties";

fn positions(order: &[usize], candidates: usize) -> Vec<usize> {
    let mut pos = vec![0usize; candidates];
    for (i, &c) in order.iter().enumerate() {
        pos[c] = i;
    }
    pos
}

/// Random vote matrices must respect domination, voter anonymity, and
/// invariance to shifting two columns by one constant; on every small
/// integer matrix with distinct scores, the ranking must be the unique
/// order consistent with all pairwise margins.
pub fn criterion_4() -> CriterionResult {
    let mut out = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4004);

    const TRIALS: usize = 10_000;
    let mut engineered = 0usize;
    let mut dominated_pairs = 0usize;
    for _ in 0..TRIALS {
        let voters = rng.gen_range(1..=6);
        let candidates = rng.gen_range(2..=6);
        let mut rows: Vec<Vec<f64>> = (0..voters)
            .map(|_| (0..candidates).map(|_| rng.gen_range(0.0..10.0)).collect())
            .collect();

        // Roughly 30% of trials force one candidate to dominate another,
        // so the domination branch is exercised often.
        if rng.gen_bool(0.3) {
            let a = rng.gen_range(0..candidates);
            let b = (a + rng.gen_range(1..candidates)) % candidates;
            for row in &mut rows {
                row[a] = row[b] + rng.gen_range(0.01..1.0);
            }
            engineered += 1;
        }

        let matrix = VoteMatrix::from_rows(&rows).expect("valid matrix");
        let ranking = consensus_ranking(&matrix);
        let pos = positions(&ranking.order, candidates);

        // A candidate every voter scores at least as high, and some voter
        // scores strictly higher, must rank ahead.
        for a in 0..candidates {
            for b in 0..candidates {
                if a == b {
                    continue;
                }
                let ge = (0..voters).all(|v| matrix.entry(v, a) >= matrix.entry(v, b));
                let gt = (0..voters).any(|v| matrix.entry(v, a) > matrix.entry(v, b));
                if ge && gt {
                    dominated_pairs += 1;
                    if pos[a] >= pos[b] {
                        out.fail(format!(
                            "dominating candidate {a} ranked behind {b} in a {voters}x{candidates} matrix"
                        ));
                        return out.result(4, NAME_4);
                    }
                }
            }
        }

        // Shuffling the voters must not change the outcome.
        let mut perm: Vec<usize> = (0..voters).collect();
        for i in (1..voters).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&v| rows[v].clone()).collect();
        let reshuffled = VoteMatrix::from_rows(&shuffled).expect("valid matrix");
        if consensus_ranking(&reshuffled).order != ranking.order {
            out.fail(format!(
                "voter shuffle changed the order of a {voters}x{candidates} matrix"
            ));
            return out.result(4, NAME_4);
        }

        // Adding one constant to two columns leaves their relative order
        // unchanged.
        let a = rng.gen_range(0..candidates);
        let b = (a + rng.gen_range(1..candidates)) % candidates;
        let shift = rng.gen_range(-5.0..5.0);
        let mut shifted = rows.clone();
        for row in &mut shifted {
            row[a] += shift;
            row[b] += shift;
        }
        let shifted = VoteMatrix::from_rows(&shifted).expect("valid matrix");
        let pos_shifted = positions(&consensus_ranking(&shifted).order, candidates);
        if (pos[a] < pos[b]) != (pos_shifted[a] < pos_shifted[b]) {
            out.fail(format!(
                "shifting columns {a} and {b} by {shift:.3} flipped their order"
            ));
            return out.result(4, NAME_4);
        }
    }
    out.note(format!(
        "{TRIALS} random matrices: {dominated_pairs} dominated pairs ranked correctly \
         ({engineered} engineered), voter shuffles and paired column shifts preserved orders"
    ));

    // Exhaustive sweep: every matrix with up to 3 voters, up to 3
    // candidates, and integer entries 0..=3, checked against the
    // brute-force enumeration of margin-consistent orders.
    let mut total = 0u64;
    let mut distinct = 0u64;
    for voters in 1usize..=3 {
        for candidates in 1usize..=3 {
            let cells = voters * candidates;
            for code in 0..4u64.pow(cells as u32) {
                let mut x = code;
                let mut rows = vec![vec![0.0f64; candidates]; voters];
                for cell in 0..cells {
                    rows[cell / candidates][cell % candidates] = (x % 4) as f64;
                    x /= 4;
                }
                let matrix = VoteMatrix::from_rows(&rows).expect("valid matrix");
                let ranking = consensus_ranking(&matrix);
                let orders = exhaustive_consistent_orders(&matrix);
                if !orders.contains(&ranking.order) {
                    out.fail(format!(
                        "ranking of {voters}x{candidates} matrix {code} is not margin-consistent"
                    ));
                    return out.result(4, NAME_4);
                }
                let mut scores = consensus_scores(&matrix);
                scores.sort_by(f64::total_cmp);
                if scores.windows(2).all(|w| w[0] != w[1]) {
                    distinct += 1;
                    if orders.len() != 1 {
                        out.fail(format!(
                            "distinct scores but {} consistent orders for {voters}x{candidates} matrix {code}",
                            orders.len()
                        ));
                        return out.result(4, NAME_4);
                    }
                }
                total += 1;
            }
        }
    }
    out.check(
        total == 270_756,
        format!(
            "exhaustive sweep covered {total} matrices, {distinct} with distinct scores \
             each matching the unique consistent order"
        ),
    );

    out.result(4, NAME_4)
}

// =============================================================================
// Criterion 5: assignment solver exactness
// =============================================================================

const NAME_5: &str = "assignment solver exactness";

/// Max assignment value over all m! row-to-column bijections.
fn brute_force_assignment(m: usize, w: &[f64]) -> f64 {
    fn rec(cols: &mut Vec<usize>, row: usize, w: &[f64], m: usize, best: &mut f64) {
        if row == m {
            let value: f64 = cols.iter().enumerate().map(|(r, &c)| w[r * m + c]).sum();
            if value > *best {
                *best = value;
            }
            return;
        }
        for i in row..m {
            cols.swap(row, i);
            rec(cols, row + 1, w, m, best);
            cols.swap(row, i);
        }
    }
    let mut cols: Vec<usize> = (0..m).collect();
    let mut best = f64::NEG_INFINITY;
    rec(&mut cols, 0, w, m, &mut best);
    best
}

/// The assignment solver must return a permutation whose value equals the
/// brute-force optimum: exactly on integer weights, and to 1e-9 relative
/// tolerance on continuous weights.
pub fn criterion_5() -> CriterionResult {
    let mut out = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5005);

    const CASES: usize = 1000;
    const INTEGER_CASES: usize = 750;
    for case in 0..CASES {
        let m = rng.gen_range(2..=5);
        let continuous = case >= INTEGER_CASES;
        let w: Vec<f64> = if continuous {
            (0..m * m).map(|_| rng.gen_range(-100.0..100.0)).collect()
        } else {
            (0..m * m)
                .map(|_| rng.gen_range(-100i32..=100) as f64)
                .collect()
        };

        let assignment = max_weight_assignment(m, &w);
        let mut seen = vec![false; m];
        let valid = assignment.len() == m
            && assignment.iter().all(|&c| {
                c < m && !std::mem::replace(&mut seen[c], true)
            });
        if !valid {
            out.fail(format!(
                "case {case}: {assignment:?} is not a permutation of 0..{m}"
            ));
            return out.result(5, NAME_5);
        }

        let value: f64 = assignment
            .iter()
            .enumerate()
            .map(|(r, &c)| w[r * m + c])
            .sum();
        let best = brute_force_assignment(m, &w);
        let ok = if continuous {
            (value - best).abs() <= 1e-9 * best.abs().max(1.0)
        } else {
            value == best
        };
        if !ok {
            out.fail(format!(
                "case {case} (m = {m}): solver value {value} vs brute force {best}"
            ));
            return out.result(5, NAME_5);
        }
    }
    out.note(format!(
        "{INTEGER_CASES} integer cases matched the brute force exactly and {} continuous \
         cases to 1e-9 relative, sizes 2..=5",
        CASES - INTEGER_CASES
    ));

    out.result(5, NAME_5)
}

// =============================================================================
// Criterion 6: busy-cycle growth law
// =============================================================================

const NAME_6: &str = "busy-cycle growth law";

/// Two queues share one output line at aggregate load 0.9: the longest
/// shadow busy cycle must grow like ln tau, so theta/tau falls and theta
/// fits an ln-tau line. At aggregate load 1.1 the open cycle never closes
/// and theta stays a fixed fraction of the run.
pub fn criterion_6() -> CriterionResult {
    let mut out = Outcome::new();
    let config = |rate: f64, seed: u64| {
        experiment(&format!(
            r#"{{
                "topology": {{"kind": "EXPLICIT", "schedules": [[true, true]]}},
                "output_map": [0, 0],
                "n_outputs": 1,
                "rates": {{"kind": "VECTOR", "rates": [{rate}, {rate}]}},
                "scheduler": {{"kind": "LQF"}},
                "horizon": 1000000,
                "seed": {seed}
            }}"#
        ))
    };
    const REPS: usize = 10;

    let stable = config(0.45, 601);
    let runs = run_replications(&stable, REPS).expect("criterion run");
    let slots: Vec<u64> = runs[0].checkpoints.iter().map(|c| c.slot).collect();
    out.check(
        runs.iter().all(|r| {
            r.checkpoints.len() == slots.len()
                && r.checkpoints.iter().zip(&slots).all(|(c, &s)| c.slot == s)
        }),
        format!("{REPS} replications checkpoint at the same {} slots", slots.len()),
    );
    let mean_theta: Vec<f64> = (0..slots.len())
        .map(|k| {
            runs.iter().map(|r| r.checkpoints[k].theta as f64).sum::<f64>() / REPS as f64
        })
        .collect();

    let tail: Vec<(f64, f64)> = slots
        .iter()
        .zip(&mean_theta)
        .filter(|&(&s, _)| s >= 10_000)
        .map(|(&s, &t)| (s as f64, t))
        .collect();
    let monotone = tail.windows(2).all(|w| w[1].1 / w[1].0 < w[0].1 / w[0].0);
    out.check(
        monotone && tail.len() >= 5,
        format!(
            "theta/tau strictly decreasing over {} late checkpoints, {:.4} down to {:.5}",
            tail.len(),
            tail.first().map_or(0.0, |(s, t)| t / s),
            tail.last().map_or(0.0, |(s, t)| t / s),
        ),
    );

    let (xs, ys): (Vec<f64>, Vec<f64>) = slots
        .iter()
        .zip(&mean_theta)
        .filter(|&(&s, _)| s >= 1_000)
        .map(|(&s, &t)| ((s as f64).ln(), t))
        .unzip();
    let fit = linear_fit(&xs, &ys);
    out.check(
        fit.r_squared >= 0.8,
        format!(
            "theta against ln tau over {} checkpoints: slope {:.2}, R^2 {:.3} >= 0.8",
            xs.len(),
            fit.slope,
            fit.r_squared
        ),
    );

    let over = config(0.55, 602);
    let runs = run_replications(&over, REPS).expect("criterion run");
    let ratio =
        runs.iter().map(|r| r.theta as f64).sum::<f64>() / REPS as f64 / over.horizon as f64;
    out.check(
        ratio >= 0.05,
        format!("overload mean theta/tau {ratio:.3} >= 0.05"),
    );

    out.result(6, NAME_6)
}

// =============================================================================
// Criterion 7: negative drift at high backlog
// =============================================================================

const NAME_7: &str = "negative drift at high backlog";

/// On criterion 2's stable run, slots binned into 20 equal-count groups
/// by total head-of-line waiting time must show negative mean potential
/// drift in the top two bins, the top decile of backlog.
pub fn criterion_7() -> CriterionResult {
    let mut out = Outcome::new();
    let run = run_experiment(&stable_crossbar_config()).expect("criterion run");
    let series = run.series.expect("series recorded");
    let bins = equal_count_drift_bins(&series.hol_wait, &series.potential, 20);
    if bins.len() != 20 {
        out.fail(format!("expected 20 drift bins, got {}", bins.len()));
        return out.result(7, NAME_7);
    }
    out.check(
        bins[18].mean_drift < 0.0 && bins[19].mean_drift < 0.0,
        format!(
            "top-decile mean potential drift: {:.3} at waiting-time level {:.0} and {:.3} at {:.0}",
            bins[18].mean_drift, bins[18].mean_level, bins[19].mean_drift, bins[19].mean_level
        ),
    );
    out.result(7, NAME_7)
}

// =============================================================================
// Criterion 8: structural invariants
// =============================================================================

const NAME_8: &str = "structural invariants";

struct AuditStats {
    arrivals: u64,
    departures: u64,
    max_live: usize,
}

/// Replays the runner's slot loop with every structural invariant checked
/// explicitly each slot, reporting the first violation.
fn audited_run(exp: &Experiment) -> Result<AuditStats, String> {
    let n = exp.n_queues();
    let mut arrivals = ArrivalProcess::new(exp.rates.clone(), exp.seed).map_err(|e| e.to_string())?;
    let mut scheduler = Scheduler::new(exp.scheduler_kind.clone(), exp.tie_break, exp.seed ^ 1);
    let mut net = NetworkState::new(
        exp.set.clone(),
        exp.dest_map.clone(),
        exp.n_outputs,
        exp.output_policy.clone(),
    );
    let mut cfn = ShadowCfn::new(exp.n_outputs, n, &exp.shadow_policy);
    let mut ledger = PacketLedger::new();
    let maximal = exp.set.enumerate_maximal().map_err(|e| e.to_string())?.to_vec();

    // Live shadow copies and the departure slot first projected for each;
    // FIFO projections must never move.
    let mut projected: HashMap<PacketId, Option<Slot>> = HashMap::new();
    let mut arrival_buf = vec![false; n];
    let mut total_departures = 0u64;
    let mut max_live = 0usize;

    for slot in 0..exp.horizon {
        let u = urgencies(&net, &cfn, &ledger, slot);
        let mut min_backlogged: Option<i64> = None;
        for q in 0..n {
            if let Some(head) = net.queue(q).head() {
                let d = cfn
                    .departure_time(head.id, slot, &ledger)
                    .map_err(|e| e.to_string())?;
                let expected = slot as i64 - d as i64;
                if u[q] != expected {
                    return Err(format!(
                        "slot {slot} queue {q}: urgency {} but the head copy departs at {d}",
                        u[q]
                    ));
                }
                let wait = (slot - head.arrival_slot) as i64;
                if wait < u[q] {
                    return Err(format!(
                        "slot {slot} queue {q}: head waited {wait} slots, less than urgency {}",
                        u[q]
                    ));
                }
                min_backlogged = Some(min_backlogged.map_or(expected, |m| m.min(expected)));
            }
        }
        for q in 0..n {
            if net.queue(q).head().is_some() {
                continue;
            }
            match min_backlogged {
                None if u[q] != 0 => {
                    return Err(format!(
                        "slot {slot} queue {q}: empty network but urgency {}",
                        u[q]
                    ));
                }
                Some(m) if u[q] > 0 || u[q] > m => {
                    return Err(format!(
                        "slot {slot} queue {q}: empty queue urgency {} outranks backlog minimum {m}",
                        u[q]
                    ));
                }
                _ => {}
            }
        }

        for (&id, proj) in projected.iter_mut() {
            let d = cfn.departure_time(id, slot, &ledger).map_err(|e| e.to_string())?;
            match *proj {
                None => *proj = Some(d),
                Some(p) if p != d => {
                    return Err(format!(
                        "slot {slot}: copy {} projected to depart at {p}, now at {d}",
                        id.0
                    ));
                }
                Some(_) => {}
            }
        }
        max_live = max_live.max(projected.len());

        let schedule = scheduler
            .select(&net, &cfn, &ledger, slot)
            .map_err(|e| e.to_string())?;
        if !maximal.contains(&schedule) {
            return Err(format!("slot {slot}: selected schedule is not maximal"));
        }

        for q in schedule.served_indices() {
            let Some(head_id) = net.queue(q).head().map(|p| p.id) else {
                continue;
            };
            let d = cfn
                .departure_time(head_id, slot, &ledger)
                .map_err(|e| e.to_string())?;
            net.stamp_head_shadow_departure(q, d);
        }

        let pre_lengths: Vec<usize> = (0..n).map(|q| net.queue(q).len()).collect();
        arrivals.sample_into(&mut arrival_buf);
        let events = net
            .advance_slot(slot, &schedule, &arrival_buf, &mut ledger)
            .map_err(|e| e.to_string())?;
        total_departures += events.departed.len() as u64;

        for q in 0..n {
            let served = usize::from(schedule.serves(q) && pre_lengths[q] > 0);
            let expected = pre_lengths[q] - served + usize::from(arrival_buf[q]);
            if net.queue(q).len() != expected {
                return Err(format!(
                    "slot {slot} queue {q}: length {} breaks the queue law, expected {expected}",
                    net.queue(q).len()
                ));
            }
        }

        for id in cfn.serve_all(slot, &mut ledger) {
            let Some(proj) = projected.remove(&id) else {
                return Err(format!("slot {slot}: shadow served untracked copy {}", id.0));
            };
            if ledger.shadow_departure(id) != Some(slot) {
                return Err(format!(
                    "slot {slot}: served copy {} stamped {:?}",
                    id.0,
                    ledger.shadow_departure(id)
                ));
            }
            if let Some(p) = proj {
                if p != slot {
                    return Err(format!(
                        "slot {slot}: copy {} departed off its projection {p}",
                        id.0
                    ));
                }
            }
        }
        cfn.ingest_arrivals(&events.arrived, slot);
        for p in &events.arrived {
            projected.insert(p.id, None);
        }

        if !net.conservation_holds() {
            return Err(format!("slot {slot}: real-network conservation broken"));
        }
        if !cfn.conservation_holds() {
            return Err(format!("slot {slot}: shadow conservation broken"));
        }
    }

    Ok(AuditStats {
        arrivals: ledger.len() as u64,
        departures: total_departures,
        max_live,
    })
}

/// Short debug-profile runs of all three topology kinds must hold every
/// per-slot invariant, and a repeated run must reproduce its exports byte
/// for byte.
pub fn criterion_8() -> CriterionResult {
    let mut out = Outcome::new();
    out.check(
        cfg!(debug_assertions),
        "debug assertions compiled in, so the per-slot queue-law checks are live".to_string(),
    );

    let configs: [(&str, &str); 3] = [
        (
            "3x3 crossbar",
            r#"{
                "topology": {"kind": "SWITCH", "ports": 3},
                "rates": {"kind": "UNIFORM", "load": 0.8},
                "scheduler": {"kind": "MUCF"},
                "horizon": 10000,
                "seed": 801
            }"#,
        ),
        (
            "path conflict graph",
            r#"{
                "topology": {"kind": "CONFLICT_GRAPH", "nodes": 3, "edges": [[0, 1], [1, 2]]},
                "rates": {"kind": "VECTOR", "rates": [0.3, 0.3, 0.3]},
                "scheduler": {"kind": "MUCF"},
                "horizon": 10000,
                "seed": 802
            }"#,
        ),
        (
            "shared output line",
            r#"{
                "topology": {"kind": "EXPLICIT", "schedules": [[true, false], [false, true]]},
                "output_map": [0, 0],
                "n_outputs": 1,
                "rates": {"kind": "VECTOR", "rates": [0.4, 0.4]},
                "scheduler": {"kind": "MUCF"},
                "horizon": 10000,
                "seed": 803
            }"#,
        ),
    ];
    for (label, json) in configs {
        let exp = experiment(json);
        match audited_run(&exp) {
            Ok(stats) => out.note(format!(
                "{label}: {} slots clean, {} arrivals, {} departures, {} live copies at peak",
                exp.horizon, stats.arrivals, stats.departures, stats.max_live
            )),
            Err(e) => out.fail(format!("{label}: {e}")),
        }
    }

    let exp = experiment(configs[0].1);
    let export = |r: &RunOutput| -> Vec<u8> {
        let mut buf = Vec::new();
        write_packets_csv(&mut buf, &r.ledger).expect("write to memory");
        write_summaries_csv(&mut buf, std::slice::from_ref(&r.summary)).expect("write to memory");
        write_checkpoints_csv(&mut buf, &r.summary.checkpoints).expect("write to memory");
        buf
    };
    let first = run_experiment(&exp).expect("criterion run");
    let second = run_experiment(&exp).expect("criterion run");
    out.check(
        export(&first) == export(&second),
        "rerunning one seed reproduces packet, summary, and checkpoint bytes exactly".to_string(),
    );

    out.result(8, NAME_8)
}
