//! Seeded experiment execution.
//!
//! [`execute`] turns a [`RunConfig`] plus a master seed into a finished
//! regret trace. All randomness flows through named streams of the master
//! seed, so a run is a pure function of `(config, seed)`: the same pair
//! reproduces every decision, reward, and trace byte.

use dosm_core::doco::{
    default_params, dmfw_block_sizes, AdOspa, Dftpl, DocoEngine, Dogd, EngineParams, Role,
};
use dosm_core::eval::{offline_opt, opt_prefix, OfflineOptimum, RegretTrace};
use dosm_core::network::{build_lazy_metropolis, consensus_error, spectral, MixingMatrix};
use dosm_core::reductions::{BoostingReduction, Dmfw};
use dosm_core::rewards::{make_sequence, BoostMode, RewardSequence};
use dosm_core::rng::SeedStream;
use nalgebra::{DMatrix, DVector};

use crate::config::{EngineKind, ReductionKind, RunConfig};
use crate::CliError;

/// Everything produced by one seeded run.
#[derive(Debug)]
pub struct RunOutput {
    pub trace: RegretTrace,
    pub optimum: OfflineOptimum,
    pub alpha: f64,
    /// Rounds that were scored.
    pub nominal_horizon: usize,
    /// Horizon the engines were sized for; exceeds the nominal horizon when
    /// block sizes do not divide it.
    pub padded_horizon: usize,
    /// Rounds per engine block (chain length times inner block under
    /// `meta_fw`).
    pub block: usize,
    /// Gossip exchanges consumed across all engines.
    pub exchanges: u64,
    /// Largest per-round deviation of any node's played decision from the
    /// network mean.
    pub max_consensus: f64,
    /// Played decisions, one `nodes x dimension` matrix per round; kept
    /// only on request.
    pub decisions: Option<Vec<DMatrix<f64>>>,
}

enum Driver {
    Boost(BoostingReduction<Box<dyn DocoEngine>>),
    Chain(Dmfw<Dftpl>),
}

impl Driver {
    fn play_round(&mut self, seq: &RewardSequence) -> Result<Vec<DVector<f64>>, CliError> {
        match self {
            Driver::Boost(red) => {
                let round = red
                    .boost_round(seq)
                    .map_err(|e| CliError::runtime(format!("round failed: {e}")))?;
                Ok(round.played)
            }
            Driver::Chain(mfw) => {
                let n = mfw.engines()[0].nodes();
                let played: Vec<DVector<f64>> = (0..n).map(|i| mfw.decision(i)).collect();
                mfw.feed(seq)
                    .map_err(|e| CliError::runtime(format!("round failed: {e}")))?;
                Ok(played)
            }
        }
    }

    fn alpha(&self) -> f64 {
        match self {
            Driver::Boost(red) => red.alpha(),
            Driver::Chain(mfw) => mfw.alpha(),
        }
    }

    fn exchanges(&self) -> u64 {
        match self {
            Driver::Boost(red) => red.inner().telemetry().exchanges,
            Driver::Chain(mfw) => mfw
                .engines()
                .iter()
                .map(|e| e.telemetry().exchanges)
                .sum(),
        }
    }
}

fn pad_to(t: usize, unit: usize) -> usize {
    t.div_ceil(unit) * unit
}

fn apply_overrides(params: &mut EngineParams, cfg: &RunConfig) {
    let ov = &cfg.algorithm.overrides;
    if let Some(l) = ov.l {
        params.l = l;
    }
    if let Some(k) = ov.k {
        params.k = k;
    }
    if let Some(theta) = ov.theta {
        params.theta = theta;
    }
    if let Some(eta) = ov.eta {
        params.eta = eta;
    }
}

fn invalid<E: std::fmt::Display>(what: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::invalid(format!("{what}: {e}"))
}

/// Run `cfg` under `seed` and score the nominal horizon.
///
/// Engines whose block size does not divide the horizon are built for the
/// next multiple (with a warning) but are only ever fed the scored rounds;
/// parameter prescriptions always use the nominal horizon.
pub fn execute(cfg: &RunConfig, seed: u64, keep_decisions: bool) -> Result<RunOutput, CliError> {
    let t_nominal = cfg.horizon;
    let n = cfg.nodes;
    let d = cfg.dimension;

    let streams = SeedStream::new(seed);
    let topo = cfg.build_topology(&streams)?;
    let a = build_lazy_metropolis(&topo);
    let set = cfg.build_set()?;

    let family = cfg.reward_family(t_nominal);
    let reward_master = cfg.rewards.seed.unwrap_or(seed);
    let mut reward_rng = SeedStream::new(reward_master).stream("rewards");
    let seq = make_sequence(&family, &mut reward_rng).map_err(invalid("rewards"))?;

    let profile = spectral(&a, t_nominal, 1).map_err(invalid("topology"))?;

    let engine_rngs = |streams: &SeedStream| (0..n).map(|i| streams.indexed("engine.node", i)).collect();
    let (mut driver, padded, block) = match cfg.algorithm.reduction {
        ReductionKind::Boosting => {
            let mode = if cfg.rewards.monotone {
                BoostMode::Monotone
            } else {
                BoostMode::NonMonotone
            };
            let scale = match mode {
                BoostMode::Monotone => 1.0 - (-1.0f64).exp(),
                BoostMode::NonMonotone => 3.0 / 8.0,
            };
            let g_fed = scale * seq.g();
            let (engine, padded, block): (Box<dyn DocoEngine>, usize, usize) =
                match cfg.algorithm.engine {
                    EngineKind::Dogd => {
                        if !cfg.algorithm.overrides.is_empty() {
                            log::warn!("dogd takes no parameter overrides; ignoring them");
                        }
                        let eng = Dogd::new(set.clone(), a.clone(), t_nominal, g_fed)
                            .map_err(invalid("engine"))?;
                        (Box::new(eng), t_nominal, 1)
                    }
                    EngineKind::Adospa => {
                        let mut params =
                            default_params(&profile, g_fed, d, t_nominal, Role::SmoothDoco)
                                .map_err(invalid("engine parameters"))?;
                        apply_overrides(&mut params, cfg);
                        let padded = pad_to(t_nominal, params.l);
                        let eng = AdOspa::new(
                            set.clone(),
                            a.clone(),
                            padded,
                            params,
                            engine_rngs(&streams),
                        )
                        .map_err(invalid("engine"))?;
                        (Box::new(eng), padded, params.l)
                    }
                    EngineKind::Dftpl => {
                        let mut params =
                            default_params(&profile, g_fed, d, t_nominal, Role::Dftpl)
                                .map_err(invalid("engine parameters"))?;
                        apply_overrides(&mut params, cfg);
                        let padded = pad_to(t_nominal, params.l.max(1));
                        let eng = Dftpl::new(
                            set.clone(),
                            a.clone(),
                            padded,
                            params,
                            engine_rngs(&streams),
                        )
                        .map_err(invalid("engine"))?;
                        (Box::new(eng), padded, params.l)
                    }
                };
            let boost_rngs = (0..n).map(|i| streams.indexed("boost.node", i)).collect();
            let red = BoostingReduction::new(engine, mode, &set, boost_rngs)
                .map_err(invalid("reduction"))?;
            (Driver::Boost(red), padded, block)
        }
        ReductionKind::MetaFw => {
            let defaults =
                dmfw_block_sizes(&profile, t_nominal).map_err(invalid("engine parameters"))?;
            let chain_len = cfg.algorithm.overrides.l.unwrap_or(defaults.0).max(1);
            let inner_block = cfg.algorithm.overrides.k.unwrap_or(defaults.1);
            let mut params = default_params(&profile, seq.g(), d, t_nominal, Role::DmfwInner)
                .map_err(invalid("engine parameters"))?;
            if (chain_len, inner_block) != defaults && cfg.algorithm.overrides.eta.is_none() {
                params.eta = seq.g()
                    * (d as f64 * (t_nominal as f64 / chain_len as f64) * inner_block as f64)
                        .sqrt();
            }
            if let Some(theta) = cfg.algorithm.overrides.theta {
                params.theta = theta;
            }
            if let Some(eta) = cfg.algorithm.overrides.eta {
                params.eta = eta;
            }
            let inner = EngineParams {
                l: inner_block,
                k: inner_block,
                theta: params.theta,
                eta: params.eta,
            };
            let unit = chain_len * inner_block;
            let padded = pad_to(t_nominal, unit);
            let blocks = padded / chain_len;
            let engines = (0..chain_len)
                .map(|k| {
                    let rngs = (0..n)
                        .map(|i| streams.stream(&format!("engine.{k}.node.{i}")))
                        .collect();
                    Dftpl::new(set.clone(), a.clone(), blocks, inner, rngs)
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(invalid("engine"))?;
            let perm_rng = streams.stream("permutation");
            let grad_rngs = (0..n).map(|i| streams.indexed("noise.node", i)).collect();
            let mfw = Dmfw::new(engines, set.clone(), padded, perm_rng, grad_rngs)
                .map_err(invalid("reduction"))?;
            (Driver::Chain(mfw), padded, unit)
        }
    };

    if padded != t_nominal {
        log::warn!(
            "horizon {t_nominal} is not a multiple of the block size {block}; \
             engines sized for {padded} rounds, scoring stops at {t_nominal}"
        );
    }

    let mut inst = vec![vec![0.0f64; n]; t_nominal];
    let mut consensus = vec![vec![0.0f64; n]; t_nominal];
    let mut decisions = keep_decisions.then(|| Vec::with_capacity(t_nominal));
    let mut max_consensus = 0.0f64;
    for t in 1..=t_nominal {
        let played = driver.play_round(&seq)?;
        let mut xm = DMatrix::zeros(n, d);
        for (i, x) in played.iter().enumerate() {
            xm.row_mut(i).copy_from(&x.transpose());
        }
        let report = consensus_error(&xm);
        max_consensus = max_consensus.max(report.max);
        for i in 0..n {
            inst[t - 1][i] = seq
                .round_value(t, &played[i])
                .map_err(|e| CliError::runtime(format!("scoring round {t}: {e}")))?;
            consensus[t - 1][i] = report.per_node[i];
        }
        if let Some(rows) = decisions.as_mut() {
            rows.push(xm);
        }
    }

    let optimum = offline_opt(&seq, &set, cfg.opt_resolution)
        .map_err(|e| CliError::runtime(format!("offline optimum: {e}")))?;
    let prefix = opt_prefix(&seq, &optimum.point)
        .map_err(|e| CliError::runtime(format!("comparator prefix: {e}")))?;
    let alpha = driver.alpha();
    let trace = RegretTrace::assemble(&cfg.algo_label(), alpha, seed, &inst, &consensus, &prefix)
        .map_err(|e| CliError::runtime(format!("trace: {e}")))?;

    Ok(RunOutput {
        optimum,
        alpha,
        nominal_horizon: t_nominal,
        padded_horizon: padded,
        block,
        exchanges: driver.exchanges(),
        max_consensus,
        decisions,
        trace,
    })
}

/// Render the played decisions as CSV: a config/seed/alpha preamble, then
/// one `round,node,x0..x{d-1}` row per (round, node). Floats print through
/// `{}` and parse back to identical bits.
pub fn decisions_csv(cfg: &RunConfig, seed: u64, out: &RunOutput) -> Result<String, CliError> {
    let rows = out
        .decisions
        .as_ref()
        .ok_or_else(|| CliError::runtime("run did not keep its decisions"))?;
    let d = cfg.dimension;
    let mut text = String::new();
    text.push_str(&format!("# config {}\n", cfg.hash(seed)));
    text.push_str(&format!("# algo {}\n", cfg.algo_label()));
    text.push_str(&format!("# seed {seed}\n"));
    text.push_str(&format!("# alpha {}\n", out.alpha));
    text.push_str("round,node");
    for j in 0..d {
        text.push_str(&format!(",x{j}"));
    }
    text.push('\n');
    for (idx, xm) in rows.iter().enumerate() {
        for i in 0..cfg.nodes {
            text.push_str(&format!("{},{i}", idx + 1));
            for j in 0..d {
                text.push_str(&format!(",{}", xm[(i, j)]));
            }
            text.push('\n');
        }
    }
    Ok(text)
}

/// Final per-node alpha-regret recomputed from a decision dump alone.
///
/// Rebuilds the reward draw from `(config, seed)`, re-scores every dumped
/// decision, and reruns the comparator search. Because dumped coordinates
/// round-trip bit for bit and the optimizer is deterministic, the result
/// must equal the live trace exactly, not merely within tolerance.
pub fn recompute_from_dump(
    cfg: &RunConfig,
    seed: u64,
    dump: &str,
) -> Result<Vec<f64>, CliError> {
    let d = cfg.dimension;
    let n = cfg.nodes;
    let mut alpha: Option<f64> = None;
    let mut header_seen = false;
    let mut points: Vec<DVector<f64>> = Vec::new();
    for line in dump.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some(v) = rest.strip_prefix("alpha ") {
                alpha = Some(v.parse().map_err(|e| {
                    CliError::invalid(format!("decision dump: bad alpha {v:?}: {e}"))
                })?);
            }
            continue;
        }
        if !header_seen {
            let mut expected = String::from("round,node");
            for j in 0..d {
                expected.push_str(&format!(",x{j}"));
            }
            if line != expected {
                return Err(CliError::invalid(format!(
                    "decision dump: header {line:?} does not match {expected:?}"
                )));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 2 {
            return Err(CliError::invalid(format!(
                "decision dump: row has {} fields, expected {}",
                fields.len(),
                d + 2
            )));
        }
        let row: usize = fields[0]
            .parse()
            .map_err(|e| CliError::invalid(format!("decision dump: bad round: {e}")))?;
        let node: usize = fields[1]
            .parse()
            .map_err(|e| CliError::invalid(format!("decision dump: bad node: {e}")))?;
        let idx = points.len();
        if row != idx / n + 1 || node != idx % n {
            return Err(CliError::invalid(format!(
                "decision dump: row ({row}, {node}) out of order"
            )));
        }
        let mut x = DVector::zeros(d);
        for j in 0..d {
            x[j] = fields[j + 2]
                .parse()
                .map_err(|e| CliError::invalid(format!("decision dump: bad coordinate: {e}")))?;
        }
        points.push(x);
    }
    let alpha =
        alpha.ok_or_else(|| CliError::invalid("decision dump: missing `# alpha` line"))?;
    if !header_seen || points.len() != cfg.horizon * n {
        return Err(CliError::invalid(format!(
            "decision dump: {} rows for horizon {} with {n} nodes",
            points.len(),
            cfg.horizon
        )));
    }

    let family = cfg.reward_family(cfg.horizon);
    let reward_master = cfg.rewards.seed.unwrap_or(seed);
    let mut reward_rng = SeedStream::new(reward_master).stream("rewards");
    let seq = make_sequence(&family, &mut reward_rng).map_err(invalid("rewards"))?;
    let set = cfg.build_set()?;
    let optimum = offline_opt(&seq, &set, cfg.opt_resolution)
        .map_err(|e| CliError::runtime(format!("offline optimum: {e}")))?;
    let prefix = opt_prefix(&seq, &optimum.point)
        .map_err(|e| CliError::runtime(format!("comparator prefix: {e}")))?;

    let mut cum = vec![0.0f64; n];
    for t in 1..=cfg.horizon {
        for (i, c) in cum.iter_mut().enumerate() {
            *c += seq
                .round_value(t, &points[(t - 1) * n + i])
                .map_err(|e| CliError::runtime(format!("scoring round {t}: {e}")))?;
        }
    }
    Ok(cum
        .iter()
        .map(|c| alpha * prefix[cfg.horizon - 1] - c)
        .collect())
}

/// Export of the mixing matrix used by `spectrum --export-matrix`.
pub fn mixing_for(cfg: &RunConfig, seed: u64) -> Result<MixingMatrix, CliError> {
    let streams = SeedStream::new(seed);
    let topo = cfg.build_topology(&streams)?;
    Ok(build_lazy_metropolis(&topo))
}
