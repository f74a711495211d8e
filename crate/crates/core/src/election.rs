//! Ranked-choice selection among candidate schedules.
//!
//! Each queue acts as a voter that assigns a score to every candidate
//! schedule; candidates are ranked by their summed score. This rule is the
//! unique ranking that respects unanimous preferences, treats voters
//! anonymously, and orders every pair of candidates by the sign of their
//! summed score difference. The test suite checks those three properties
//! directly and cross-checks the ranking against an exhaustive reference.
//!
//! The module also provides the ingredients the fair scheduler feeds into
//! the election: per-queue urgencies measured against the shadow network,
//! and the increasing weight functions applied to them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::NetworkState;
use crate::packet::{PacketLedger, Slot};
use crate::schedules::FeasibleSchedule;
use crate::shadow::ShadowCfn;

#[derive(Debug, Error, PartialEq)]
pub enum ElectionError {
    #[error("vote matrix has no voters or no candidates")]
    EmptyMatrix,
    #[error("voter {voter} scored {got} candidates, expected {expected}")]
    RaggedRow {
        voter: usize,
        got: usize,
        expected: usize,
    },
}

/// Scores assigned by each voter to each candidate, row per voter.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteMatrix {
    voters: usize,
    candidates: usize,
    values: Vec<f64>,
}

impl VoteMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ElectionError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(ElectionError::EmptyMatrix);
        }
        let candidates = rows[0].len();
        let mut values = Vec::with_capacity(rows.len() * candidates);
        for (voter, row) in rows.iter().enumerate() {
            if row.len() != candidates {
                return Err(ElectionError::RaggedRow {
                    voter,
                    got: row.len(),
                    expected: candidates,
                });
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            voters: rows.len(),
            candidates,
            values,
        })
    }

    pub fn voters(&self) -> usize {
        self.voters
    }

    pub fn candidates(&self) -> usize {
        self.candidates
    }

    pub fn entry(&self, voter: usize, candidate: usize) -> f64 {
        self.values[voter * self.candidates + candidate]
    }

    /// Sum over voters of `entry(v, a) - entry(v, b)`.
    pub fn pairwise_margin(&self, a: usize, b: usize) -> f64 {
        (0..self.voters)
            .map(|v| self.entry(v, a) - self.entry(v, b))
            .sum()
    }
}

/// Outcome of a consensus election.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    /// Candidate indices from best to worst.
    pub order: Vec<usize>,
    /// Summed score per candidate, indexed by candidate.
    pub scores: Vec<f64>,
    /// True when two candidates tied on score and index order decided.
    pub tie_broken: bool,
}

/// Summed score of each candidate across all voters.
pub fn consensus_scores(matrix: &VoteMatrix) -> Vec<f64> {
    (0..matrix.candidates())
        .map(|c| (0..matrix.voters()).map(|v| matrix.entry(v, c)).sum())
        .collect()
}

/// Ranks candidates by descending summed score; equal scores fall back to
/// ascending candidate index and set the `tie_broken` flag.
pub fn consensus_ranking(matrix: &VoteMatrix) -> Ranking {
    let scores = consensus_scores(matrix);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores are finite")
            .then(a.cmp(&b))
    });
    let tie_broken = order
        .windows(2)
        .any(|w| scores[w[0]] == scores[w[1]]);
    Ranking {
        order,
        scores,
        tie_broken,
    }
}

/// Every ordering of the candidates that agrees, for each pair, with the
/// sign of the summed score difference (exact ties resolved toward the
/// lower index). Exponential in the candidate count; cross-check helper
/// for small instances only.
pub fn exhaustive_consistent_orders(matrix: &VoteMatrix) -> Vec<Vec<usize>> {
    let c = matrix.candidates();
    assert!(c <= 8, "exhaustive enumeration is limited to 8 candidates");
    let mut perm: Vec<usize> = (0..c).collect();
    let mut out = Vec::new();
    permute(&mut perm, 0, &mut |p| {
        let consistent = p.iter().enumerate().all(|(i, &a)| {
            p[i + 1..].iter().all(|&b| {
                let margin = matrix.pairwise_margin(a, b);
                margin > 0.0 || (margin == 0.0 && a < b)
            })
        });
        if consistent {
            out.push(p.to_vec());
        }
    });
    out
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WeightError {
    #[error("slope {0} must be finite and positive")]
    BadSlope(f64),
    #[error("breakpoints must be finite and strictly increasing")]
    BadBreakpoints,
    #[error("need exactly one more slope than breakpoints, got {slopes} slopes for {breakpoints} breakpoints")]
    SlopeCountMismatch { slopes: usize, breakpoints: usize },
}

/// Strictly increasing piecewise-linear weight function fixed at zero.
///
/// Urgencies pass through one of these before the election; any member
/// whose slopes stay inside a band `[1/r, r]` distorts differences by at
/// most that factor in either direction, which is what keeps the weighted
/// election faithful to the underlying urgencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WeightFunction {
    Identity,
    Linear { slope: f64 },
    PiecewiseLinear {
        /// Interval boundaries, strictly increasing.
        breakpoints: Vec<f64>,
        /// One slope per interval, so `breakpoints.len() + 1` entries.
        slopes: Vec<f64>,
    },
}

impl WeightFunction {
    pub fn validate(&self) -> Result<(), WeightError> {
        match self {
            WeightFunction::Identity => Ok(()),
            WeightFunction::Linear { slope } => check_slope(*slope),
            WeightFunction::PiecewiseLinear {
                breakpoints,
                slopes,
            } => {
                if slopes.len() != breakpoints.len() + 1 {
                    return Err(WeightError::SlopeCountMismatch {
                        slopes: slopes.len(),
                        breakpoints: breakpoints.len(),
                    });
                }
                for &s in slopes {
                    check_slope(s)?;
                }
                let ordered = breakpoints.iter().all(|b| b.is_finite())
                    && breakpoints.windows(2).all(|w| w[0] < w[1]);
                if !ordered {
                    return Err(WeightError::BadBreakpoints);
                }
                Ok(())
            }
        }
    }

    /// Smallest and largest slope taken anywhere.
    pub fn slope_band(&self) -> (f64, f64) {
        match self {
            WeightFunction::Identity => (1.0, 1.0),
            WeightFunction::Linear { slope } => (*slope, *slope),
            WeightFunction::PiecewiseLinear { slopes, .. } => slopes
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
                    (lo.min(s), hi.max(s))
                }),
        }
    }

    /// f(u): the slope field integrated from zero, so f(0) = 0.
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            WeightFunction::Identity => u,
            WeightFunction::Linear { slope } => slope * u,
            WeightFunction::PiecewiseLinear {
                breakpoints,
                slopes,
            } => {
                let (lo, hi) = if u < 0.0 { (u, 0.0) } else { (0.0, u) };
                let mut acc = 0.0;
                for (i, &slope) in slopes.iter().enumerate() {
                    let a = if i == 0 {
                        f64::NEG_INFINITY
                    } else {
                        breakpoints[i - 1]
                    };
                    let b = breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
                    let seg = (hi.min(b) - lo.max(a)).max(0.0);
                    acc += slope * seg;
                }
                if u < 0.0 {
                    -acc
                } else {
                    acc
                }
            }
        }
    }

    /// F(y): integral of f from zero to y, in closed form. Nonnegative for
    /// every y because f carries the sign of its argument.
    pub fn integral(&self, y: f64) -> f64 {
        match self {
            WeightFunction::Identity => 0.5 * y * y,
            WeightFunction::Linear { slope } => 0.5 * slope * y * y,
            WeightFunction::PiecewiseLinear { breakpoints, .. } => {
                let (lo, hi, sign) = if y < 0.0 {
                    (y, 0.0, -1.0)
                } else {
                    (0.0, y, 1.0)
                };
                // f is piecewise linear, so trapezoids between breakpoints
                // are exact.
                let mut pts = vec![lo];
                for &b in breakpoints {
                    if b > lo && b < hi {
                        pts.push(b);
                    }
                }
                pts.push(hi);
                let acc: f64 = pts
                    .windows(2)
                    .map(|w| 0.5 * (self.eval(w[0]) + self.eval(w[1])) * (w[1] - w[0]))
                    .sum();
                sign * acc
            }
        }
    }
}

fn check_slope(s: f64) -> Result<(), WeightError> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(WeightError::BadSlope(s))
    }
}

/// Per-queue urgency at the start of `slot`.
///
/// A backlogged queue's urgency is `slot - d`, where `d` is the departure
/// slot of its head packet's shadow copy: actual if the copy already left,
/// projected otherwise. Positive urgency means the real queue has fallen
/// behind its shadow. Empty queues take the smaller of zero and the
/// minimum backlogged urgency, so an idle queue never outranks a
/// backlogged one; with no backlog at all every urgency is zero.
pub fn urgencies(
    net: &NetworkState,
    cfn: &ShadowCfn,
    ledger: &PacketLedger,
    slot: Slot,
) -> Vec<i64> {
    let mut out = vec![0i64; net.n_queues()];
    let mut floor = 0i64;
    let mut any_backlog = false;
    for n in 0..net.n_queues() {
        if let Some(head) = net.queue(n).head() {
            let d = cfn
                .departure_time(head.id, slot, ledger)
                .expect("head packet has a tracked shadow copy");
            out[n] = slot as i64 - d as i64;
            floor = floor.min(out[n]);
            any_backlog = true;
        }
    }
    if any_backlog {
        for n in 0..net.n_queues() {
            if net.queue(n).head().is_none() {
                out[n] = floor;
            }
        }
    }
    out
}

/// Applies the weight function to each urgency.
pub fn urgency_weights(urgencies: &[i64], f: &WeightFunction) -> Vec<f64> {
    urgencies.iter().map(|&u| f.eval(u as f64)).collect()
}

/// A schedule's score in the election: the summed weight of the queues it
/// serves.
pub fn schedule_value(weights: &[f64], schedule: &FeasibleSchedule) -> f64 {
    schedule
        .served_indices()
        .map(|n| weights[n])
        .sum()
}
