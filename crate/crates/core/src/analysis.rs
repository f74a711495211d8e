//! Post-run statistics and load admissibility checks.
//!
//! Admissibility is decided by two independent routes: crossbars check
//! strict row and column sums, while general topologies solve a covering
//! program over the enumerated maximal schedules. On crossbars the two
//! routes must agree exactly, which the test suite exploits as a
//! cross-check of both the solver and the port-sum shortcut.

use thiserror::Error;

use crate::lp::{LpError, LpProblem, Rel};
use crate::packet::{PacketId, PacketLedger, Slot};
use crate::schedules::{ScheduleError, ScheduleSet, SwitchTopology};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("need {expected} rates, got {got}")]
    RateCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmissibilityRoute {
    /// Strict row and column sums of a crossbar rate matrix.
    PortSums,
    /// Covering program over the enumerated maximal schedules.
    CoveringLp,
}

#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    /// Headroom to the load boundary: one minus the binding port sum, or
    /// one minus the covering optimum. Negative when overloaded.
    pub margin: f64,
    pub route: AdmissibilityRoute,
    /// Covering weight per maximal schedule when the program route ran.
    pub witness: Option<Vec<f64>>,
}

/// Decides whether `rates` sit strictly inside the serviceable region of
/// `set`, by the cheapest route the topology allows.
pub fn check_admissibility(
    set: &ScheduleSet,
    rates: &[f64],
) -> Result<AdmissibilityReport, AnalysisError> {
    check_rate_count(set, rates)?;
    match set.switch_topology() {
        Some(topo) => Ok(port_sum_route(topo, rates)),
        None => covering_route(set, rates),
    }
}

/// Forces the covering-program route regardless of topology; used to
/// cross-check the port-sum shortcut on crossbars.
pub fn check_admissibility_by_covering(
    set: &ScheduleSet,
    rates: &[f64],
) -> Result<AdmissibilityReport, AnalysisError> {
    check_rate_count(set, rates)?;
    covering_route(set, rates)
}

/// Minimum total schedule weight that covers `rates`; the serviceable
/// boundary sits at one, and the value scales linearly with the rates.
pub fn covering_optimum(set: &ScheduleSet, rates: &[f64]) -> Result<f64, AnalysisError> {
    let report = check_admissibility(set, rates)?;
    Ok(1.0 - report.margin)
}

fn check_rate_count(set: &ScheduleSet, rates: &[f64]) -> Result<(), AnalysisError> {
    if rates.len() != set.n_queues() {
        return Err(AnalysisError::RateCount {
            expected: set.n_queues(),
            got: rates.len(),
        });
    }
    Ok(())
}

fn port_sum_route(topo: &SwitchTopology, rates: &[f64]) -> AdmissibilityReport {
    let m = topo.ports;
    let mut binding = 0.0f64;
    for i in 0..m {
        let row: f64 = (0..m).map(|j| rates[topo.queue_index(i, j)]).sum();
        let col: f64 = (0..m).map(|j| rates[topo.queue_index(j, i)]).sum();
        binding = binding.max(row).max(col);
    }
    AdmissibilityReport {
        admissible: binding < 1.0,
        margin: 1.0 - binding,
        route: AdmissibilityRoute::PortSums,
        witness: None,
    }
}

fn covering_route(
    set: &ScheduleSet,
    rates: &[f64],
) -> Result<AdmissibilityReport, AnalysisError> {
    let maximal = set.enumerate_maximal()?;
    let mut lp = LpProblem::minimize(vec![1.0; maximal.len()]);
    for n in 0..set.n_queues() {
        let row: Vec<f64> = maximal
            .iter()
            .map(|s| if s.serves(n) { 1.0 } else { 0.0 })
            .collect();
        lp = lp.constrain(row, Rel::Ge, rates[n]);
    }
    let sol = lp.solve()?;
    Ok(AdmissibilityReport {
        admissible: sol.objective < 1.0,
        margin: 1.0 - sol.objective,
        route: AdmissibilityRoute::CoveringLp,
        witness: Some(sol.x),
    })
}

/// Empirical departure rates against their nominal arrival rates.
#[derive(Debug, Clone)]
pub struct RateStabilityReport {
    pub empirical: Vec<f64>,
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
}

pub fn rate_stability(departures: &[u64], rates: &[f64], horizon: Slot) -> RateStabilityReport {
    assert_eq!(departures.len(), rates.len());
    assert!(horizon > 0);
    let empirical: Vec<f64> = departures
        .iter()
        .map(|&d| d as f64 / horizon as f64)
        .collect();
    let deviations: Vec<f64> = empirical
        .iter()
        .zip(rates)
        .map(|(e, r)| (e - r).abs())
        .collect();
    let max_deviation = deviations.iter().cloned().fold(0.0, f64::max);
    RateStabilityReport {
        empirical,
        deviations,
        max_deviation,
    }
}

/// Compensated running sum; keeps millions of small additions exact
/// enough for second moments.
#[derive(Debug, Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub count: u64,
    pub mean: f64,
    pub second_moment: f64,
    pub max: i64,
}

impl MomentReport {
    fn empty() -> Self {
        Self {
            count: 0,
            mean: 0.0,
            second_moment: 0.0,
            max: 0,
        }
    }
}

/// First and second moments of end-to-end latency (real departure minus
/// arrival) over packets that departed at or after `warmup`.
pub fn latency_moments(ledger: &PacketLedger, warmup: Slot) -> MomentReport {
    moments_of(ledger, warmup, |l, id| {
        l.real_departure(id).map(|r| (r, (r - l.arrival(id)) as i64))
    })
}

/// Moments of the emulation gap: real departure minus shadow departure,
/// negative when the real network beat the shadow. Counts packets with
/// both stamps, same warmup filter.
pub fn oq_delay_moments(ledger: &PacketLedger, warmup: Slot) -> MomentReport {
    moments_of(ledger, warmup, |l, id| {
        match (l.real_departure(id), l.shadow_departure(id)) {
            (Some(r), Some(s)) => Some((r, r as i64 - s as i64)),
            _ => None,
        }
    })
}

fn moments_of(
    ledger: &PacketLedger,
    warmup: Slot,
    value: impl Fn(&PacketLedger, PacketId) -> Option<(Slot, i64)>,
) -> MomentReport {
    let mut count = 0u64;
    let mut m1 = Kahan::default();
    let mut m2 = Kahan::default();
    let mut max = i64::MIN;
    for id in ledger.iter_ids() {
        if let Some((departed_at, v)) = value(ledger, id) {
            if departed_at >= warmup {
                count += 1;
                let x = v as f64;
                m1.add(x);
                m2.add(x * x);
                max = max.max(v);
            }
        }
    }
    if count == 0 {
        return MomentReport::empty();
    }
    MomentReport {
        count,
        mean: m1.sum / count as f64,
        second_moment: m2.sum / count as f64,
        max,
    }
}

/// One equal-count bin of one-step drifts, keyed by the level the step
/// started from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_level: f64,
    pub mean_drift: f64,
}

/// Sorts the one-step drifts of `values` by the key the step started from
/// and splits them into `n_bins` nearly equal-count bins, reporting the
/// mean drift in each. Keying a series by itself recovers plain
/// level-binned drift. Fewer steps than bins yields fewer bins.
pub fn equal_count_drift_bins(keys: &[f64], values: &[f64], n_bins: usize) -> Vec<DriftBin> {
    assert!(n_bins > 0);
    assert_eq!(keys.len(), values.len());
    if values.len() < 2 {
        return Vec::new();
    }
    let steps = values.len() - 1;
    let mut idx: Vec<usize> = (0..steps).collect();
    idx.sort_by(|&a, &b| {
        keys[a]
            .partial_cmp(&keys[b])
            .expect("keys must be finite")
            .then(a.cmp(&b))
    });
    let bins = n_bins.min(steps);
    let mut out = Vec::with_capacity(bins);
    for b in 0..bins {
        let start = b * steps / bins;
        let end = (b + 1) * steps / bins;
        let members = &idx[start..end];
        let mut level = Kahan::default();
        let mut drift = Kahan::default();
        for &i in members {
            level.add(keys[i]);
            drift.add(values[i + 1] - values[i]);
        }
        let count = members.len();
        out.push(DriftBin {
            lo: keys[members[0]],
            hi: keys[*members.last().expect("bins are non-empty")],
            count,
            mean_level: level.sum / count as f64,
            mean_drift: drift.sum / count as f64,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `ys` on `xs`. A perfectly flat target gives
/// an r-squared of one, since the fit reproduces it exactly.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points to fit a line");
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    assert!(sxx > 0.0, "x values must not all coincide");
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let fit = slope * x + intercept;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    LinearFit {
        slope,
        intercept,
        r_squared,
    }
}
