//! Strict JSON run configurations.
//!
//! A configuration file pins everything an experiment needs apart from the
//! master seed, so a config plus a seed reproduces a run bit for bit.
//! Parsing is deliberately unforgiving: unknown keys are rejected rather
//! than ignored, and every file must carry an explicit schema `version`.

use std::fs;
use std::path::Path;

use dosm_core::network::Topology;
use dosm_core::rewards::RewardFamily;
use dosm_core::rng::{sha256_hex, SeedStream};
use dosm_core::sets::DecisionSet;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Schema revision this binary accepts.
pub const CONFIG_VERSION: u32 = 1;

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_resolution() -> f64 {
    0.005
}

fn default_trace_path() -> String {
    "trace.csv".into()
}

fn default_sweep_path() -> String {
    "sweep.csv".into()
}

/// Complete description of one experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Schema revision; must equal [`CONFIG_VERSION`].
    pub version: u32,
    /// Number of scored rounds. Runs may internally extend past this to
    /// complete a block, but regret is always measured here.
    pub horizon: usize,
    pub nodes: usize,
    pub dimension: usize,
    pub topology: TopologySpec,
    pub set: SetSpec,
    pub rewards: RewardSpec,
    pub algorithm: AlgorithmSpec,
    /// Master seeds: `run` writes one trace per entry, `sweep` averages
    /// across all of them.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: OutputSpec,
    /// Grid pitch used by the offline optimum in low dimension.
    #[serde(default = "default_resolution")]
    pub opt_resolution: f64,
    /// Horizons visited by `sweep` when the command line names none.
    #[serde(default)]
    pub sweep_horizons: Vec<usize>,
}

/// Communication graph over `nodes` learners.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    Path,
    Ring,
    Complete,
    Star,
    /// Random spanning tree plus `extra_edges` uniform chords, drawn from
    /// the `net` stream of the master seed.
    Random { extra_edges: usize },
}

/// Feasible decision set; dimension comes from the top-level field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    UnitBox,
    CappedSimplex { budget: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Knapsack { weights: Vec<f64>, budget: f64 },
}

/// Random reward family handed to the adversary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardSpec {
    pub monotone: bool,
    pub linear_scale: f64,
    pub linear_density: f64,
    #[serde(default)]
    pub curvature_scale: f64,
    #[serde(default)]
    pub curvature_density: f64,
    /// Bound on the stochastic gradient noise norm.
    #[serde(default)]
    pub noise: f64,
    /// Optional dedicated seed for the reward draw. When set, the adversary
    /// stays fixed while the master seed varies the algorithm's randomness.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub reduction: ReductionKind,
    pub engine: EngineKind,
    #[serde(default)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionKind {
    /// Per-round boosted gradients fed to a single engine.
    Boosting,
    /// Blockwise Frank-Wolfe chain over one engine per chain stage;
    /// requires a downward-closed set and `dftpl` engines.
    MetaFw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Dogd,
    Adospa,
    Dftpl,
}

/// Manual engine parameters; anything left `null` keeps the prescribed
/// default. Under `meta_fw`, `l` is the chain length and `k` the inner
/// engine's block size.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default)]
    pub l: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        self.l.is_none() && self.k.is_none() && self.theta.is_none() && self.eta.is_none()
    }
}

/// File names for generated artifacts, resolved against `--out`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_trace_path")]
    pub trace: String,
    /// Per-round played decisions; written only when set.
    #[serde(default)]
    pub decisions: Option<String>,
    #[serde(default = "default_sweep_path")]
    pub sweep: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            trace: default_trace_path(),
            decisions: None,
            sweep: default_sweep_path(),
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::invalid(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| CliError::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::invalid(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.horizon == 0 || self.nodes == 0 || self.dimension == 0 {
            return Err(CliError::invalid(
                "horizon, nodes and dimension must all be positive",
            ));
        }
        if self.seeds.is_empty() {
            return Err(CliError::invalid("seeds must not be empty"));
        }
        if !(self.opt_resolution > 0.0 && self.opt_resolution <= 0.5) {
            return Err(CliError::invalid(format!(
                "opt_resolution {} must lie in (0, 0.5]",
                self.opt_resolution
            )));
        }
        for (name, v) in [
            ("linear_scale", self.rewards.linear_scale),
            ("linear_density", self.rewards.linear_density),
            ("curvature_scale", self.rewards.curvature_scale),
            ("curvature_density", self.rewards.curvature_density),
            ("noise", self.rewards.noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::invalid(format!(
                    "rewards.{name} {v} must be finite and nonnegative"
                )));
            }
        }
        if let (Some(l), Some(k)) = (self.algorithm.overrides.l, self.algorithm.overrides.k) {
            if self.algorithm.reduction == ReductionKind::Boosting && k > l {
                return Err(CliError::invalid(format!(
                    "overrides: gossip budget k={k} cannot exceed block size l={l}"
                )));
            }
        }
        let set = self.build_set()?;
        if self.algorithm.reduction == ReductionKind::MetaFw {
            if self.algorithm.engine != EngineKind::Dftpl {
                return Err(CliError::invalid(
                    "meta_fw drives dftpl engines only; pick engine \"dftpl\"",
                ));
            }
            if !set.is_downward_closed() {
                return Err(CliError::invalid(
                    "meta_fw requires a downward-closed set",
                ));
            }
        }
        Ok(())
    }

    pub fn build_topology(&self, streams: &SeedStream) -> Result<Topology, CliError> {
        let n = self.nodes;
        let topo = match &self.topology {
            TopologySpec::Path => Topology::path(n),
            TopologySpec::Ring => Topology::ring(n),
            TopologySpec::Complete => Topology::complete(n),
            TopologySpec::Star => Topology::star(n),
            TopologySpec::Random { extra_edges } => {
                let mut rng = streams.stream("net");
                Topology::random_connected(n, *extra_edges, &mut rng)
            }
        };
        topo.map_err(|e| CliError::invalid(format!("topology: {e}")))
    }

    pub fn build_set(&self) -> Result<DecisionSet, CliError> {
        let d = self.dimension;
        let set = match &self.set {
            SetSpec::UnitBox => DecisionSet::unit_box(d),
            SetSpec::CappedSimplex { budget } => DecisionSet::capped_simplex(d, *budget),
            SetSpec::Box { lower, upper } => {
                if lower.len() != d || upper.len() != d {
                    return Err(CliError::invalid(format!(
                        "box bounds must each have {d} entries"
                    )));
                }
                DecisionSet::box_set(
                    DVector::from_vec(lower.clone()),
                    DVector::from_vec(upper.clone()),
                )
            }
            SetSpec::Knapsack { weights, budget } => {
                if weights.len() != d {
                    return Err(CliError::invalid(format!(
                        "knapsack weights must have {d} entries"
                    )));
                }
                DecisionSet::knapsack(DVector::from_vec(weights.clone()), *budget)
            }
        };
        set.map_err(|e| CliError::invalid(format!("set: {e}")))
    }

    /// Reward family over `horizon` rounds (the scored horizon, not any
    /// padded one: rewards beyond the scored horizon are never consulted).
    pub fn reward_family(&self, horizon: usize) -> RewardFamily {
        RewardFamily {
            horizon,
            nodes: self.nodes,
            dimension: self.dimension,
            monotone: self.rewards.monotone,
            linear_scale: self.rewards.linear_scale,
            linear_density: self.rewards.linear_density,
            curvature_scale: self.rewards.curvature_scale,
            curvature_density: self.rewards.curvature_density,
            noise: self.rewards.noise,
        }
    }

    /// Digest of the parsed configuration alone, independent of the file's
    /// whitespace or key order.
    pub fn hash_base(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        sha256_hex(canon.as_bytes())
    }

    /// Digest of the configuration plus the effective master seed; stamped
    /// into per-run artifacts.
    pub fn hash(&self, seed: u64) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        sha256_hex(format!("{canon}\u{1f}{seed}").as_bytes())
    }

    /// Tag for the trace's `algo` column, e.g. `boost-dogd`.
    pub fn algo_label(&self) -> String {
        let red = match self.algorithm.reduction {
            ReductionKind::Boosting => "boost",
            ReductionKind::MetaFw => "mfw",
        };
        let eng = match self.algorithm.engine {
            EngineKind::Dogd => "dogd",
            EngineKind::Adospa => "adospa",
            EngineKind::Dftpl => "dftpl",
        };
        format!("{red}-{eng}")
    }

    pub fn with_horizon(&self, horizon: usize) -> RunConfig {
        let mut cfg = self.clone();
        cfg.horizon = horizon;
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"{
            "version": 1,
            "horizon": 8,
            "nodes": 2,
            "dimension": 2,
            "topology": {"kind": "path"},
            "set": {"kind": "capped_simplex", "budget": 1.0},
            "rewards": {"monotone": true, "linear_scale": 1.0, "linear_density": 0.5},
            "algorithm": {"reduction": "boosting", "engine": "dogd"}
        }"#
        .to_string()
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = RunConfig::from_json(&minimal()).unwrap();
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.output.trace, "trace.csv");
        assert_eq!(cfg.opt_resolution, 0.005);
        assert!(cfg.algorithm.overrides.is_empty());
        assert_eq!(cfg.algo_label(), "boost-dogd");
    }

    #[test]
    fn unknown_keys_and_missing_version_are_rejected() {
        let extra = minimal().replace("\"horizon\": 8", "\"horizon\": 8, \"horizn\": 9");
        assert!(matches!(
            RunConfig::from_json(&extra),
            Err(CliError::Invalid(_))
        ));
        let unversioned = minimal().replace("\"version\": 1,", "");
        assert!(matches!(
            RunConfig::from_json(&unversioned),
            Err(CliError::Invalid(_))
        ));
        let wrong = minimal().replace("\"version\": 1", "\"version\": 7");
        let err = RunConfig::from_json(&wrong).unwrap_err();
        assert!(err.to_string().contains("version 7"));
    }

    #[test]
    fn chained_reduction_refuses_box_sets_and_foreign_engines() {
        let boxed = minimal()
            .replace("\"reduction\": \"boosting\"", "\"reduction\": \"meta_fw\"")
            .replace("\"engine\": \"dogd\"", "\"engine\": \"dftpl\"")
            .replace(
                r#""kind": "capped_simplex", "budget": 1.0"#,
                r#""kind": "box", "lower": [0.5, 0.5], "upper": [1.0, 1.0]"#,
            );
        let err = RunConfig::from_json(&boxed).unwrap_err();
        assert!(err.to_string().contains("downward-closed"));

        let dogd = minimal().replace("\"reduction\": \"boosting\"", "\"reduction\": \"meta_fw\"");
        let err = RunConfig::from_json(&dogd).unwrap_err();
        assert!(err.to_string().contains("dftpl"));
    }

    #[test]
    fn hashes_ignore_formatting_but_track_content_and_seed() {
        let spaced = minimal().replace('\n', " ");
        let a = RunConfig::from_json(&minimal()).unwrap();
        let b = RunConfig::from_json(&spaced).unwrap();
        assert_eq!(a.hash_base(), b.hash_base());
        assert_eq!(a.hash(3), b.hash(3));
        assert_ne!(a.hash(3), a.hash(4));
        assert_ne!(a.hash_base(), a.with_horizon(16).hash_base());
    }
}
