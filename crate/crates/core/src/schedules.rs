//! Feasible schedule sets.
//!
//! A schedule is a 0/1 service vector over the N constrained queues. A set
//! of feasible schedules is monotone (shutting links preserves feasibility)
//! and covering (every queue is servable), and scheduling decisions range
//! over its maximal elements. Three representations are supported:
//!
//!  * `Switch`: queue (i, j) carries input port i -> output port j traffic;
//!    feasible schedules are partial matchings, maximal ones are the M!
//!    perfect matchings.
//!  * `ConflictGraph`: one queue per link, an edge forbids simultaneous
//!    service; maximal schedules are maximal independent sets.
//!  * `Explicit`: a raw list; membership is dominance by a stored maximal
//!    element (the list's monotone closure).

use std::collections::HashSet;
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

/// Enumeration guards: beyond these sizes `enumerate_maximal` refuses
/// rather than materializing an astronomically large list.
pub const MAX_ENUMERABLE_PORTS: usize = 8;
pub const MAX_ENUMERABLE_NODES: usize = 24;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("schedule has {got} entries, set is over {expected} queues")]
    LengthMismatch { expected: usize, got: usize },
    #[error("schedule is not feasible in this set")]
    NotFeasible,
    #[error("{0}")]
    EnumerationTooLarge(String),
    #[error("invalid conflict graph: {0}")]
    InvalidGraph(String),
    #[error("invalid explicit schedule list: {0}")]
    InvalidExplicit(String),
}

/// A 0/1 service vector. `Ord` is lexicographic on the bits, which is what
/// deterministic tie-breaking keys on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeasibleSchedule {
    bits: Vec<bool>,
}

impl FeasibleSchedule {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            bits: vec![false; n],
        }
    }

    pub fn from_indices(n: usize, served: &[usize]) -> Self {
        let mut bits = vec![false; n];
        for &i in served {
            bits[i] = true;
        }
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn serves(&self, n: usize) -> bool {
        self.bits[n]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn served_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn count_served(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Componentwise `self <= other`.
    pub fn dominated_by(&self, other: &FeasibleSchedule) -> bool {
        self.bits
            .iter()
            .zip(other.bits.iter())
            .all(|(&a, &b)| !a || b)
    }
}

impl fmt::Display for FeasibleSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// An M-port crossbar: N = M^2 queues, queue (i, j) at index i*M + j.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchTopology {
    pub ports: usize,
}

impl SwitchTopology {
    pub fn new(ports: usize) -> Self {
        Self { ports }
    }

    pub fn n_queues(&self) -> usize {
        self.ports * self.ports
    }

    #[inline]
    pub fn queue_index(&self, input: usize, output: usize) -> usize {
        input * self.ports + output
    }

    #[inline]
    pub fn input_of(&self, queue: usize) -> usize {
        queue / self.ports
    }

    #[inline]
    pub fn output_of(&self, queue: usize) -> usize {
        queue % self.ports
    }
}

/// Undirected conflict relation over queues; an edge forbids serving both.
#[derive(Debug, Clone)]
pub struct ConflictGraph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl ConflictGraph {
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self, ScheduleError> {
        let mut seen = HashSet::new();
        for &(u, v) in &edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(ScheduleError::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for {n_nodes} nodes"
                )));
            }
            if u == v {
                return Err(ScheduleError::InvalidGraph(format!("self-loop at {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(ScheduleError::InvalidGraph(format!(
                    "duplicate edge ({u}, {v})"
                )));
            }
        }
        Ok(Self { n_nodes, edges })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

#[derive(Debug, Clone)]
enum SetKind {
    Switch(SwitchTopology),
    Conflict(ConflictGraph),
    Explicit {
        raw: Vec<FeasibleSchedule>,
        maximal: Vec<FeasibleSchedule>,
    },
}

/// Validation report for explicit lists; structural kinds are monotone and
/// covering by construction and always report clean.
#[derive(Debug, Clone, Default)]
pub struct SetValidation {
    /// (schedule present, immediate sub-schedule missing from the list)
    pub missing_subschedules: Vec<(FeasibleSchedule, FeasibleSchedule)>,
    pub uncovered_queues: Vec<usize>,
}

impl SetValidation {
    pub fn is_valid(&self) -> bool {
        self.missing_subschedules.is_empty() && self.uncovered_queues.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ScheduleSet {
    n_queues: usize,
    kind: SetKind,
    maximal_cache: OnceLock<Vec<FeasibleSchedule>>,
}

impl ScheduleSet {
    pub fn switch(topology: SwitchTopology) -> Self {
        Self {
            n_queues: topology.n_queues(),
            kind: SetKind::Switch(topology),
            maximal_cache: OnceLock::new(),
        }
    }

    pub fn conflict_graph(graph: ConflictGraph) -> Self {
        Self {
            n_queues: graph.n_nodes(),
            kind: SetKind::Conflict(graph),
            maximal_cache: OnceLock::new(),
        }
    }

    /// Builds a set from a raw list. Membership treats the list as its
    /// monotone closure; `validate` reports how far the raw list itself is
    /// from being closed and covering.
    pub fn explicit(raw: Vec<FeasibleSchedule>) -> Result<Self, ScheduleError> {
        let n_queues = match raw.first() {
            None => {
                return Err(ScheduleError::InvalidExplicit(
                    "schedule list is empty".into(),
                ))
            }
            Some(first) => first.len(),
        };
        if n_queues == 0 {
            return Err(ScheduleError::InvalidExplicit(
                "schedules must cover at least one queue".into(),
            ));
        }
        for s in &raw {
            if s.len() != n_queues {
                return Err(ScheduleError::LengthMismatch {
                    expected: n_queues,
                    got: s.len(),
                });
            }
        }
        let mut maximal: Vec<FeasibleSchedule> = Vec::new();
        for s in &raw {
            if raw
                .iter()
                .any(|t| t != s && s.dominated_by(t) && !t.dominated_by(s))
            {
                continue;
            }
            if !maximal.contains(s) {
                maximal.push(s.clone());
            }
        }
        maximal.sort();
        Ok(Self {
            n_queues,
            kind: SetKind::Explicit { raw, maximal },
            maximal_cache: OnceLock::new(),
        })
    }

    pub fn n_queues(&self) -> usize {
        self.n_queues
    }

    pub fn switch_topology(&self) -> Option<&SwitchTopology> {
        match &self.kind {
            SetKind::Switch(t) => Some(t),
            _ => None,
        }
    }

    pub fn contains(&self, s: &FeasibleSchedule) -> Result<bool, ScheduleError> {
        if s.len() != self.n_queues {
            return Err(ScheduleError::LengthMismatch {
                expected: self.n_queues,
                got: s.len(),
            });
        }
        Ok(self.contains_unchecked(s))
    }

    pub(crate) fn contains_unchecked(&self, s: &FeasibleSchedule) -> bool {
        debug_assert_eq!(s.len(), self.n_queues);
        match &self.kind {
            SetKind::Switch(t) => {
                let m = t.ports;
                for i in 0..m {
                    if (0..m).filter(|&j| s.serves(t.queue_index(i, j))).count() > 1 {
                        return false;
                    }
                }
                for j in 0..m {
                    if (0..m).filter(|&i| s.serves(t.queue_index(i, j))).count() > 1 {
                        return false;
                    }
                }
                true
            }
            SetKind::Conflict(g) => g.edges.iter().all(|&(u, v)| !(s.serves(u) && s.serves(v))),
            SetKind::Explicit { maximal, .. } => maximal.iter().any(|m| s.dominated_by(m)),
        }
    }

    /// Greedily extends `s` to a maximal feasible schedule, trying queue
    /// indices in ascending order. Deterministic; the result dominates `s`.
    pub fn maximalize(&self, s: &FeasibleSchedule) -> Result<FeasibleSchedule, ScheduleError> {
        if !self.contains(s)? {
            return Err(ScheduleError::NotFeasible);
        }
        let mut bits = s.bits().to_vec();
        for n in 0..self.n_queues {
            if !bits[n] {
                bits[n] = true;
                let candidate = FeasibleSchedule::new(bits);
                if self.contains_unchecked(&candidate) {
                    bits = candidate.bits;
                } else {
                    bits = candidate.bits;
                    bits[n] = false;
                }
            }
        }
        Ok(FeasibleSchedule::new(bits))
    }

    /// The materialized list of maximal schedules, built once and cached.
    /// Guarded: M! perfect matchings for switches up to M = 8, maximal
    /// independent sets for graphs up to 24 nodes.
    pub fn enumerate_maximal(&self) -> Result<&[FeasibleSchedule], ScheduleError> {
        match &self.kind {
            SetKind::Switch(t) if t.ports > MAX_ENUMERABLE_PORTS => {
                return Err(ScheduleError::EnumerationTooLarge(format!(
                    "refusing to enumerate {}! perfect matchings (limit: {} ports)",
                    t.ports, MAX_ENUMERABLE_PORTS
                )));
            }
            SetKind::Conflict(g) if g.n_nodes > MAX_ENUMERABLE_NODES => {
                return Err(ScheduleError::EnumerationTooLarge(format!(
                    "refusing to enumerate independent sets of a {}-node graph (limit: {} nodes)",
                    g.n_nodes, MAX_ENUMERABLE_NODES
                )));
            }
            _ => {}
        }
        Ok(self.maximal_cache.get_or_init(|| match &self.kind {
            SetKind::Switch(t) => enumerate_perfect_matchings(t),
            SetKind::Conflict(g) => enumerate_maximal_independent_sets(g),
            SetKind::Explicit { maximal, .. } => maximal.clone(),
        }))
    }

    /// Checks the raw explicit list for monotone closure (every immediate
    /// sub-schedule present) and queue coverage.
    pub fn validate(&self) -> SetValidation {
        let SetKind::Explicit { raw, .. } = &self.kind else {
            return SetValidation::default();
        };
        let present: HashSet<&FeasibleSchedule> = raw.iter().collect();
        let mut report = SetValidation::default();
        let mut reported: HashSet<FeasibleSchedule> = HashSet::new();
        for s in raw {
            for n in s.served_indices().collect::<Vec<_>>() {
                let mut bits = s.bits().to_vec();
                bits[n] = false;
                let sub = FeasibleSchedule::new(bits);
                if !present.contains(&sub) && reported.insert(sub.clone()) {
                    report.missing_subschedules.push((s.clone(), sub));
                }
            }
        }
        let mut covered = vec![false; self.n_queues];
        for s in raw {
            for n in s.served_indices() {
                covered[n] = true;
            }
        }
        report.uncovered_queues = covered
            .iter()
            .enumerate()
            .filter_map(|(n, &c)| (!c).then_some(n))
            .collect();
        report
    }
}

/// All M! perfect matchings, in lexicographic order of the row -> column
/// assignment (which is not bit-vector order; callers needing a canonical
/// order sort or compare explicitly).
fn enumerate_perfect_matchings(t: &SwitchTopology) -> Vec<FeasibleSchedule> {
    let m = t.ports;
    let mut out = Vec::new();
    let mut perm = vec![0usize; m];
    let mut used = vec![false; m];
    fn rec(
        row: usize,
        m: usize,
        t: &SwitchTopology,
        perm: &mut [usize],
        used: &mut [bool],
        out: &mut Vec<FeasibleSchedule>,
    ) {
        if row == m {
            let mut bits = vec![false; t.n_queues()];
            for (i, &j) in perm.iter().enumerate() {
                bits[t.queue_index(i, j)] = true;
            }
            out.push(FeasibleSchedule::new(bits));
            return;
        }
        for j in 0..m {
            if !used[j] {
                used[j] = true;
                perm[row] = j;
                rec(row + 1, m, t, perm, used, out);
                used[j] = false;
            }
        }
    }
    rec(0, m, t, &mut perm, &mut used, &mut out);
    out
}

/// Maximal independent sets via Bron–Kerbosch (with pivoting) on the
/// complement graph, returned in ascending bit-vector order.
fn enumerate_maximal_independent_sets(g: &ConflictGraph) -> Vec<FeasibleSchedule> {
    let n = g.n_nodes;
    debug_assert!(n <= MAX_ENUMERABLE_NODES);
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut adj = vec![0u32; n];
    for &(u, v) in &g.edges {
        adj[u] |= 1 << v;
        adj[v] |= 1 << u;
    }
    let compat: Vec<u32> = (0..n).map(|v| full & !adj[v] & !(1u32 << v)).collect();

    let mut masks = Vec::new();
    fn bk(compat: &[u32], r: u32, mut p: u32, mut x: u32, out: &mut Vec<u32>) {
        if p == 0 && x == 0 {
            out.push(r);
            return;
        }
        let pivot = (p | x).trailing_zeros() as usize;
        let mut candidates = p & !compat[pivot];
        while candidates != 0 {
            let v = candidates.trailing_zeros() as usize;
            let bit = 1u32 << v;
            bk(compat, r | bit, p & compat[v], x & compat[v], out);
            p &= !bit;
            x |= bit;
            candidates &= !bit;
        }
    }
    bk(&compat, 0, full, 0, &mut masks);

    let mut sets: Vec<FeasibleSchedule> = masks
        .into_iter()
        .map(|mask| FeasibleSchedule::new((0..n).map(|v| mask & (1 << v) != 0).collect()))
        .collect();
    sets.sort();
    sets
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched(bits: &[u8]) -> FeasibleSchedule {
        FeasibleSchedule::new(bits.iter().map(|&b| b != 0).collect())
    }

    #[test]
    fn switch_membership_checks_row_and_column_sums() {
        let set = ScheduleSet::switch(SwitchTopology::new(2));
        assert!(set.contains(&sched(&[1, 0, 0, 1])).unwrap());
        assert!(set.contains(&sched(&[0, 0, 0, 0])).unwrap());
        assert!(set.contains(&sched(&[0, 1, 0, 0])).unwrap());
        // two in one row / one column
        assert!(!set.contains(&sched(&[1, 1, 0, 0])).unwrap());
        assert!(!set.contains(&sched(&[1, 0, 1, 0])).unwrap());
        assert!(matches!(
            set.contains(&sched(&[1, 0])),
            Err(ScheduleError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn conflict_membership_respects_edges() {
        let g = ConflictGraph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let set = ScheduleSet::conflict_graph(g);
        assert!(set.contains(&sched(&[1, 0, 1])).unwrap());
        assert!(!set.contains(&sched(&[1, 1, 0])).unwrap());
    }

    #[test]
    fn explicit_membership_is_monotone_closure() {
        let set = ScheduleSet::explicit(vec![sched(&[1, 1])]).unwrap();
        // (1,0) is dominated by the stored maximal element, so it is in the
        // closure even though the raw list never mentions it.
        assert!(set.contains(&sched(&[1, 0])).unwrap());
        assert!(set.contains(&sched(&[0, 0])).unwrap());
        assert!(set.contains(&sched(&[1, 1])).unwrap());
    }

    #[test]
    fn maximalize_greedy_on_empty_switch_schedule_gives_identity() {
        let set = ScheduleSet::switch(SwitchTopology::new(2));
        let max = set.maximalize(&FeasibleSchedule::zeros(4)).unwrap();
        assert_eq!(max, sched(&[1, 0, 0, 1]));
    }

    #[test]
    fn maximalize_keeps_middle_of_path_fixed() {
        let g = ConflictGraph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let set = ScheduleSet::conflict_graph(g);
        let max = set.maximalize(&sched(&[0, 1, 0])).unwrap();
        assert_eq!(max, sched(&[0, 1, 0]));
    }

    #[test]
    fn maximalize_rejects_infeasible_input() {
        let set = ScheduleSet::switch(SwitchTopology::new(2));
        assert!(matches!(
            set.maximalize(&sched(&[1, 1, 0, 0])),
            Err(ScheduleError::NotFeasible)
        ));
    }

    #[test]
    fn maximalize_dominates_and_is_idempotent() {
        let g = ConflictGraph::new(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap();
        let set = ScheduleSet::conflict_graph(g);
        for mask in 0..32u32 {
            let s = FeasibleSchedule::new((0..5).map(|v| mask & (1 << v) != 0).collect());
            if !set.contains(&s).unwrap() {
                continue;
            }
            let max = set.maximalize(&s).unwrap();
            assert!(s.dominated_by(&max));
            assert_eq!(set.maximalize(&max).unwrap(), max);
            assert!(set.contains(&max).unwrap());
        }
    }

    #[test]
    fn switch_enumeration_counts_factorial_and_yields_matchings() {
        for m in 1..=5 {
            let set = ScheduleSet::switch(SwitchTopology::new(m));
            let all = set.enumerate_maximal().unwrap();
            let expected: usize = (1..=m).product();
            assert_eq!(all.len(), expected);
            let t = SwitchTopology::new(m);
            for s in all {
                assert_eq!(s.count_served(), m);
                assert!(set.contains(s).unwrap());
                // permutation structure: every row and column served once
                for i in 0..m {
                    assert_eq!((0..m).filter(|&j| s.serves(t.queue_index(i, j))).count(), 1);
                }
            }
        }
    }

    #[test]
    fn triangle_has_three_singleton_maximal_sets() {
        let g = ConflictGraph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let set = ScheduleSet::conflict_graph(g);
        let all = set.enumerate_maximal().unwrap();
        assert_eq!(
            all,
            &[sched(&[0, 0, 1]), sched(&[0, 1, 0]), sched(&[1, 0, 0])]
        );
    }

    #[test]
    fn conflict_enumeration_matches_brute_force() {
        // path on 6 nodes plus a chord
        let g = ConflictGraph::new(6, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (1, 4)]).unwrap();
        let set = ScheduleSet::conflict_graph(g);
        let fast: Vec<_> = set.enumerate_maximal().unwrap().to_vec();
        let mut slow = Vec::new();
        for mask in 0u32..64 {
            let s = FeasibleSchedule::new((0..6).map(|v| mask & (1 << v) != 0).collect());
            if !set.contains(&s).unwrap() {
                continue;
            }
            let maximal = (0..6).all(|v| {
                if s.serves(v) {
                    return true;
                }
                let mut bits = s.bits().to_vec();
                bits[v] = true;
                !set.contains(&FeasibleSchedule::new(bits)).unwrap()
            });
            if maximal {
                slow.push(s);
            }
        }
        slow.sort();
        assert_eq!(fast, slow);
    }

    #[test]
    fn enumeration_guards_trip() {
        let set = ScheduleSet::switch(SwitchTopology::new(9));
        assert!(matches!(
            set.enumerate_maximal(),
            Err(ScheduleError::EnumerationTooLarge(_))
        ));
        let g = ConflictGraph::new(25, vec![]).unwrap();
        let set = ScheduleSet::conflict_graph(g);
        assert!(matches!(
            set.enumerate_maximal(),
            Err(ScheduleError::EnumerationTooLarge(_))
        ));
    }

    #[test]
    fn validate_flags_missing_subschedule() {
        let set = ScheduleSet::explicit(vec![sched(&[1, 1])]).unwrap();
        let report = set.validate();
        assert!(!report.is_valid());
        let missing: Vec<_> = report
            .missing_subschedules
            .iter()
            .map(|(_, sub)| sub.clone())
            .collect();
        assert!(missing.contains(&sched(&[1, 0])));
        assert!(missing.contains(&sched(&[0, 1])));
    }

    #[test]
    fn validate_accepts_closed_covering_list() {
        let set = ScheduleSet::explicit(vec![
            sched(&[0, 0]),
            sched(&[1, 0]),
            sched(&[0, 1]),
        ])
        .unwrap();
        assert!(set.validate().is_valid());
    }

    #[test]
    fn validate_flags_uncovered_queue() {
        let set = ScheduleSet::explicit(vec![sched(&[0, 0]), sched(&[1, 0])]).unwrap();
        let report = set.validate();
        assert_eq!(report.uncovered_queues, vec![1]);
    }

    #[test]
    fn explicit_maximal_elements_drop_dominated_entries() {
        let set = ScheduleSet::explicit(vec![
            sched(&[0, 0, 0]),
            sched(&[1, 0, 0]),
            sched(&[1, 1, 0]),
            sched(&[0, 0, 1]),
        ])
        .unwrap();
        let maximal = set.enumerate_maximal().unwrap();
        assert_eq!(maximal, &[sched(&[0, 0, 1]), sched(&[1, 1, 0])]);
    }

    #[test]
    fn membership_against_constraint_oracle_on_random_switch_schedules() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let t = SwitchTopology::new(4);
        let set = ScheduleSet::switch(t.clone());
        for _ in 0..500 {
            let bits: Vec<bool> = (0..16).map(|_| rng.gen_bool(0.3)).collect();
            let s = FeasibleSchedule::new(bits);
            let oracle = (0..4).all(|i| {
                (0..4).filter(|&j| s.serves(t.queue_index(i, j))).count() <= 1
            }) && (0..4).all(|j| {
                (0..4).filter(|&i| s.serves(t.queue_index(i, j))).count() <= 1
            });
            assert_eq!(set.contains(&s).unwrap(), oracle);
        }
    }
}
