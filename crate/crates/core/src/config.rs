//! JSON experiment configuration and its validation into runnable form.
//!
//! A configuration names the topology, the arrival rates, the scheduling
//! policy, and the run geometry. `ExperimentConfig::validate` turns it
//! into an `Experiment` with every derived structure built and every
//! cross-field constraint checked, so the runner can assume a coherent
//! setup.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{covering_optimum, AnalysisError};
use crate::election::{WeightError, WeightFunction};
use crate::packet::Slot;
use crate::queue::OutputPolicy;
use crate::scheduler::{SchedulerKind, TieBreak};
use crate::schedules::{ConflictGraph, FeasibleSchedule, ScheduleError, ScheduleSet, SwitchTopology};
use crate::shadow::ShadowPolicy;

/// Ledger slots are stored as `u32`; keep one value free for the
/// "not yet" sentinel.
pub const MAX_HORIZON: u64 = (u32::MAX - 1) as u64;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("configuration is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error("uniform load normalization failed: {0}")]
    Normalization(String),
    #[error("queue {queue} has arrival rate {rate}, outside [0, 1]")]
    RateOutOfRange { queue: usize, rate: f64 },
    #[error("{0}")]
    RateShape(String),
    #[error("horizon {horizon} must be between 1 and {max}")]
    BadHorizon { horizon: u64, max: u64 },
    #[error("warmup {warmup} must be below the horizon {horizon}")]
    WarmupBeyondHorizon { warmup: u64, horizon: u64 },
    #[error("checkpoint growth {0} must exceed 1")]
    BadCheckpointGrowth(f64),
    #[error("crossbar topologies fix their own routing; remove {0}")]
    RoutingOnSwitch(&'static str),
    #[error("{0}")]
    BadRouting(String),
    #[error("{0}")]
    BadClasses(String),
}

impl From<AnalysisError> for ConfigError {
    fn from(e: AnalysisError) -> Self {
        ConfigError::Normalization(e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TopologyConfig {
    /// M-port crossbar with one queue per input-output pair.
    Switch { ports: usize },
    /// Queues as graph nodes; an edge forbids serving both endpoints.
    ConflictGraph {
        nodes: usize,
        edges: Vec<(usize, usize)>,
    },
    /// The feasible schedules are everything dominated by these.
    Explicit { schedules: Vec<Vec<bool>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RateConfig {
    /// Equal per-queue rates scaled so the normalized load is `load`;
    /// one is the serviceability boundary.
    Uniform { load: f64 },
    /// Explicit per-queue rates.
    Vector { rates: Vec<f64> },
    /// Crossbar rate matrix, row per input port.
    Matrix { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SchedulerConfig {
    Mucf,
    Lqf,
    Ocf,
    RandomMaximal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ShadowPolicyConfig {
    Fifo,
    Lifo,
    StrictPriority { classes: Vec<u32> },
    RoundRobin,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OutputPolicyConfig {
    Fifo,
    ShadowDepartureOrder,
    StrictPriority { classes: Vec<u32> },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TieBreakConfig {
    DeterministicLex,
    SeededRandom,
}

/// On-disk experiment description. Optional fields fall back to the
/// defaults documented on each accessor of `Experiment`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologyConfig,
    pub rates: RateConfig,
    pub scheduler: SchedulerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_function: Option<WeightFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadow_policy: Option<ShadowPolicyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_policy: Option<OutputPolicyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_break: Option<TieBreakConfig>,
    pub horizon: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<u64>,
    pub seed: u64,
    /// Queue-to-output routing for non-crossbar topologies; identity by
    /// default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_map: Option<Vec<usize>>,
    /// Output line count for non-crossbar topologies; defaults to the
    /// queue count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_outputs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_growth: Option<f64>,
    /// Record the per-slot potential series for drift analysis.
    #[serde(default)]
    pub record_series: bool,
}

/// A validated, runnable experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub set: ScheduleSet,
    pub rates: Vec<f64>,
    pub scheduler_kind: SchedulerKind,
    pub tie_break: TieBreak,
    pub shadow_policy: ShadowPolicy,
    pub output_policy: OutputPolicy,
    pub dest_map: Vec<usize>,
    pub n_outputs: usize,
    pub horizon: Slot,
    pub warmup: Slot,
    pub seed: u64,
    pub checkpoint_growth: f64,
    pub record_series: bool,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<Experiment, ConfigError> {
        let set = match &self.topology {
            TopologyConfig::Switch { ports } => {
                if *ports == 0 {
                    return Err(ConfigError::BadRouting(
                        "a crossbar needs at least one port".into(),
                    ));
                }
                ScheduleSet::switch(SwitchTopology::new(*ports))
            }
            TopologyConfig::ConflictGraph { nodes, edges } => {
                ScheduleSet::conflict_graph(ConflictGraph::new(*nodes, edges.clone())?)
            }
            TopologyConfig::Explicit { schedules } => ScheduleSet::explicit(
                schedules
                    .iter()
                    .map(|bits| FeasibleSchedule::new(bits.clone()))
                    .collect(),
            )?,
        };
        let n = set.n_queues();

        let rates = self.build_rates(&set)?;
        for (queue, &rate) in rates.iter().enumerate() {
            if !rate.is_finite() || !(0.0..=1.0).contains(&rate) {
                return Err(ConfigError::RateOutOfRange { queue, rate });
            }
        }

        let weight = match &self.weight_function {
            Some(f) => {
                f.validate()?;
                f.clone()
            }
            None => WeightFunction::Identity,
        };
        let scheduler_kind = match self.scheduler {
            SchedulerConfig::Mucf => SchedulerKind::Mucf { weight },
            SchedulerConfig::Lqf => SchedulerKind::Lqf,
            SchedulerConfig::Ocf => SchedulerKind::Ocf,
            SchedulerConfig::RandomMaximal => SchedulerKind::RandomMaximal,
        };

        let shadow_policy = match &self.shadow_policy {
            None => ShadowPolicy::Fifo,
            Some(ShadowPolicyConfig::Fifo) => ShadowPolicy::Fifo,
            Some(ShadowPolicyConfig::Lifo) => ShadowPolicy::Lifo,
            Some(ShadowPolicyConfig::RoundRobin) => ShadowPolicy::RoundRobin,
            Some(ShadowPolicyConfig::StrictPriority { classes }) => {
                if classes.len() != n {
                    return Err(ConfigError::BadClasses(format!(
                        "shadow strict-priority needs {n} classes, got {}",
                        classes.len()
                    )));
                }
                ShadowPolicy::StrictPriority {
                    classes: classes.clone(),
                }
            }
        };

        // The urgency policy orders real output queues by shadow
        // departure unless told otherwise; the baselines default to FIFO.
        let output_policy = match &self.output_policy {
            Some(OutputPolicyConfig::Fifo) => OutputPolicy::Fifo,
            Some(OutputPolicyConfig::ShadowDepartureOrder) => OutputPolicy::ShadowDepartureOrder,
            Some(OutputPolicyConfig::StrictPriority { classes }) => {
                if classes.len() != n {
                    return Err(ConfigError::BadClasses(format!(
                        "output strict-priority needs {n} classes, got {}",
                        classes.len()
                    )));
                }
                OutputPolicy::StrictPriority {
                    classes: classes.clone(),
                }
            }
            None => match scheduler_kind {
                SchedulerKind::Mucf { .. } => OutputPolicy::ShadowDepartureOrder,
                _ => OutputPolicy::Fifo,
            },
        };

        let tie_break = match self.tie_break {
            None | Some(TieBreakConfig::DeterministicLex) => TieBreak::DeterministicLex,
            Some(TieBreakConfig::SeededRandom) => TieBreak::SeededRandom,
        };

        let (dest_map, n_outputs) = match set.switch_topology() {
            Some(topo) => {
                if self.output_map.is_some() {
                    return Err(ConfigError::RoutingOnSwitch("output_map"));
                }
                if self.n_outputs.is_some() {
                    return Err(ConfigError::RoutingOnSwitch("n_outputs"));
                }
                ((0..n).map(|q| topo.output_of(q)).collect(), topo.ports)
            }
            None => {
                let n_outputs = self.n_outputs.unwrap_or(n);
                if n_outputs == 0 {
                    return Err(ConfigError::BadRouting(
                        "need at least one output line".into(),
                    ));
                }
                let map = self
                    .output_map
                    .clone()
                    .unwrap_or_else(|| (0..n).map(|q| q % n_outputs).collect());
                if map.len() != n {
                    return Err(ConfigError::BadRouting(format!(
                        "output_map has {} entries for {n} queues",
                        map.len()
                    )));
                }
                if let Some(&bad) = map.iter().find(|&&m| m >= n_outputs) {
                    return Err(ConfigError::BadRouting(format!(
                        "output_map points at line {bad}, but only {n_outputs} exist"
                    )));
                }
                (map, n_outputs)
            }
        };

        if self.horizon == 0 || self.horizon > MAX_HORIZON {
            return Err(ConfigError::BadHorizon {
                horizon: self.horizon,
                max: MAX_HORIZON,
            });
        }
        let warmup = self.warmup.unwrap_or(0);
        if warmup >= self.horizon {
            return Err(ConfigError::WarmupBeyondHorizon {
                warmup,
                horizon: self.horizon,
            });
        }
        let checkpoint_growth = self.checkpoint_growth.unwrap_or(1.5);
        if !checkpoint_growth.is_finite() || checkpoint_growth <= 1.0 {
            return Err(ConfigError::BadCheckpointGrowth(checkpoint_growth));
        }

        Ok(Experiment {
            set,
            rates,
            scheduler_kind,
            tie_break,
            shadow_policy,
            output_policy,
            dest_map,
            n_outputs,
            horizon: self.horizon,
            warmup,
            seed: self.seed,
            checkpoint_growth,
            record_series: self.record_series,
        })
    }

    fn build_rates(&self, set: &ScheduleSet) -> Result<Vec<f64>, ConfigError> {
        let n = set.n_queues();
        match &self.rates {
            RateConfig::Vector { rates } => {
                if rates.len() != n {
                    return Err(ConfigError::RateShape(format!(
                        "rate vector has {} entries for {n} queues",
                        rates.len()
                    )));
                }
                Ok(rates.clone())
            }
            RateConfig::Matrix { rows } => {
                let Some(topo) = set.switch_topology() else {
                    return Err(ConfigError::RateShape(
                        "matrix rates only apply to crossbar topologies".into(),
                    ));
                };
                let m = topo.ports;
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return Err(ConfigError::RateShape(format!(
                        "rate matrix must be {m}x{m}"
                    )));
                }
                let mut rates = vec![0.0; n];
                for (i, row) in rows.iter().enumerate() {
                    for (j, &r) in row.iter().enumerate() {
                        rates[topo.queue_index(i, j)] = r;
                    }
                }
                Ok(rates)
            }
            RateConfig::Uniform { load } => {
                if !load.is_finite() || *load <= 0.0 {
                    return Err(ConfigError::RateShape(format!(
                        "uniform load {load} must be positive"
                    )));
                }
                // The covering cost of the all-ones rate vector scales a
                // uniform vector linearly, so dividing by it puts the
                // normalized load exactly at `load`.
                let unit_cost = covering_optimum(set, &vec![1.0; n])?;
                if unit_cost <= 0.0 {
                    return Err(ConfigError::Normalization(
                        "unit covering cost must be positive".into(),
                    ));
                }
                Ok(vec![load / unit_cost; n])
            }
        }
    }
}

impl Experiment {
    /// Geometric observation slots: distinct floors of the growth powers,
    /// capped by and always ending at the horizon.
    pub fn checkpoints(&self) -> Vec<Slot> {
        let mut out = Vec::new();
        let mut x = 1.0f64;
        loop {
            let s = x as u64;
            if s >= self.horizon {
                break;
            }
            if out.last() != Some(&s) {
                out.push(s);
            }
            x *= self.checkpoint_growth;
            if !x.is_finite() {
                break;
            }
        }
        out.push(self.horizon);
        out
    }

    pub fn n_queues(&self) -> usize {
        self.set.n_queues()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_json() -> String {
        r#"{
            "topology": {"kind": "SWITCH", "ports": 2},
            "rates": {"kind": "UNIFORM", "load": 0.8},
            "scheduler": {"kind": "MUCF"},
            "horizon": 1000,
            "seed": 7
        }"#
        .to_string()
    }

    #[test]
    fn minimal_crossbar_config_fills_defaults() {
        let cfg = ExperimentConfig::from_json(&base_json()).unwrap();
        let exp = cfg.validate().unwrap();
        assert_eq!(exp.n_queues(), 4);
        assert_eq!(exp.rates, vec![0.4; 4], "load 0.8 over 2 ports is 0.4 each");
        assert_eq!(exp.dest_map, vec![0, 1, 0, 1]);
        assert_eq!(exp.n_outputs, 2);
        assert!(matches!(exp.scheduler_kind, SchedulerKind::Mucf { .. }));
        assert_eq!(exp.output_policy, OutputPolicy::ShadowDepartureOrder);
        assert_eq!(exp.tie_break, TieBreak::DeterministicLex);
        assert_eq!(exp.warmup, 0);
        assert_eq!(exp.checkpoint_growth, 1.5);
    }

    #[test]
    fn baselines_default_to_fifo_output_order() {
        let json = base_json().replace("MUCF", "LQF");
        let exp = ExperimentConfig::from_json(&json).unwrap().validate().unwrap();
        assert_eq!(exp.output_policy, OutputPolicy::Fifo);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let json = base_json().replace("\"seed\": 7", "\"seed\": 7, \"sede\": 1");
        assert!(matches!(
            ExperimentConfig::from_json(&json),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn per_queue_rates_above_one_are_rejected() {
        let json = base_json().replace(
            r#"{"kind": "UNIFORM", "load": 0.8}"#,
            r#"{"kind": "VECTOR", "rates": [0.5, 1.2, 0.1, 0.1]}"#,
        );
        let err = ExperimentConfig::from_json(&json)
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(matches!(
            err,
            ConfigError::RateOutOfRange { queue: 1, .. }
        ));
    }

    #[test]
    fn uniform_overload_is_allowed_when_queues_stay_bernoulli() {
        // Load 1.2 on a 2-port crossbar is 0.6 per queue: each queue is a
        // valid arrival process even though the system is overloaded.
        let json = base_json().replace("0.8", "1.2");
        let exp = ExperimentConfig::from_json(&json).unwrap().validate().unwrap();
        assert_eq!(exp.rates, vec![0.6; 4]);
    }

    #[test]
    fn matrix_rates_map_to_queue_indices() {
        let json = base_json().replace(
            r#"{"kind": "UNIFORM", "load": 0.8}"#,
            r#"{"kind": "MATRIX", "rows": [[0.1, 0.2], [0.3, 0.4]]}"#,
        );
        let exp = ExperimentConfig::from_json(&json).unwrap().validate().unwrap();
        assert_eq!(exp.rates, vec![0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn matrix_rates_on_graph_topologies_are_rejected() {
        let json = r#"{
            "topology": {"kind": "CONFLICT_GRAPH", "nodes": 2, "edges": [[0, 1]]},
            "rates": {"kind": "MATRIX", "rows": [[0.1, 0.2], [0.3, 0.4]]},
            "scheduler": {"kind": "LQF"},
            "horizon": 100,
            "seed": 1
        }"#;
        let err = ExperimentConfig::from_json(json)
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(matches!(err, ConfigError::RateShape(_)));
    }

    #[test]
    fn conflict_graph_uniform_load_normalizes_by_covering_cost() {
        // Path a-b-c: covering the all-ones vector costs 2 ({a,c} then
        // {b}), so load 0.9 gives 0.45 per queue.
        let json = r#"{
            "topology": {"kind": "CONFLICT_GRAPH", "nodes": 3, "edges": [[0, 1], [1, 2]]},
            "rates": {"kind": "UNIFORM", "load": 0.9},
            "scheduler": {"kind": "MUCF"},
            "horizon": 100,
            "seed": 1
        }"#;
        let exp = ExperimentConfig::from_json(json).unwrap().validate().unwrap();
        let want = 0.45;
        for r in &exp.rates {
            assert!((r - want).abs() < 1e-9);
        }
        assert_eq!(exp.dest_map, vec![0, 1, 2], "identity routing by default");
        assert_eq!(exp.n_outputs, 3);
    }

    #[test]
    fn routing_overrides_are_validated() {
        let good = r#"{
            "topology": {"kind": "EXPLICIT", "schedules": [[true, true]]},
            "rates": {"kind": "VECTOR", "rates": [0.55, 0.45]},
            "scheduler": {"kind": "MUCF"},
            "horizon": 100,
            "seed": 1,
            "output_map": [0, 0],
            "n_outputs": 1
        }"#;
        let exp = ExperimentConfig::from_json(good).unwrap().validate().unwrap();
        assert_eq!(exp.dest_map, vec![0, 0]);
        assert_eq!(exp.n_outputs, 1);

        let bad = good.replace("[0, 0]", "[0, 3]");
        let err = ExperimentConfig::from_json(&bad)
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(matches!(err, ConfigError::BadRouting(_)));
    }

    #[test]
    fn crossbar_rejects_routing_overrides() {
        let json = base_json().replace("\"seed\": 7", "\"seed\": 7, \"n_outputs\": 2");
        let err = ExperimentConfig::from_json(&json)
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(matches!(err, ConfigError::RoutingOnSwitch("n_outputs")));
    }

    #[test]
    fn horizon_and_warmup_bounds_are_enforced() {
        let zero = base_json().replace("\"horizon\": 1000", "\"horizon\": 0");
        assert!(matches!(
            ExperimentConfig::from_json(&zero).unwrap().validate(),
            Err(ConfigError::BadHorizon { .. })
        ));
        let warm = base_json().replace("\"seed\": 7", "\"seed\": 7, \"warmup\": 1000");
        assert!(matches!(
            ExperimentConfig::from_json(&warm).unwrap().validate(),
            Err(ConfigError::WarmupBeyondHorizon { .. })
        ));
    }

    #[test]
    fn checkpoints_grow_geometrically_and_end_at_the_horizon() {
        let mut cfg = ExperimentConfig::from_json(&base_json()).unwrap();
        cfg.horizon = 100;
        let exp = cfg.validate().unwrap();
        let cps = exp.checkpoints();
        assert_eq!(cps.first(), Some(&1));
        assert_eq!(cps.last(), Some(&100));
        assert!(cps.windows(2).all(|w| w[0] < w[1]), "strictly increasing");
        assert!(cps.contains(&57), "floor of 1.5^10");
    }

    #[test]
    fn config_json_round_trips() {
        let cfg = ExperimentConfig::from_json(&base_json()).unwrap();
        let again = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg.to_json(), again.to_json());
        let exp = again.validate().unwrap();
        assert_eq!(exp.seed, 7);
    }

    #[test]
    fn weight_function_and_policies_deserialize_with_screaming_tags() {
        let json = r#"{
            "topology": {"kind": "SWITCH", "ports": 2},
            "rates": {"kind": "UNIFORM", "load": 0.5},
            "scheduler": {"kind": "MUCF"},
            "weight_function": {"kind": "PIECEWISE_LINEAR", "breakpoints": [0.0], "slopes": [0.5, 2.0]},
            "shadow_policy": {"kind": "ROUND_ROBIN"},
            "tie_break": {"kind": "SEEDED_RANDOM"},
            "horizon": 10,
            "seed": 3
        }"#;
        let exp = ExperimentConfig::from_json(json).unwrap().validate().unwrap();
        assert_eq!(exp.shadow_policy, ShadowPolicy::RoundRobin);
        assert_eq!(exp.tie_break, TieBreak::SeededRandom);
        match exp.scheduler_kind {
            SchedulerKind::Mucf { weight } => {
                assert_eq!(weight.slope_band(), (0.5, 2.0));
            }
            other => panic!("wrong kind {other:?}"),
        }
    }

    #[test]
    fn bad_weight_function_fails_validation() {
        let json = base_json().replace(
            "\"seed\": 7",
            "\"seed\": 7, \"weight_function\": {\"kind\": \"LINEAR\", \"slope\": -1.0}",
        );
        assert!(matches!(
            ExperimentConfig::from_json(&json).unwrap().validate(),
            Err(ConfigError::Weight(_))
        ));
    }
}
