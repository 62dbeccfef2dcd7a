//! Meta-algorithms that turn networked submodular reward maximization into
//! linear-loss problems for the engines in [`crate::doco`].
//!
//! [`BoostingReduction`] wraps one engine: every round each node draws a
//! scale from the mode's boosting distribution, queries a stochastic reward
//! gradient at the rescaled preparatory decision, and feeds the engine the
//! negated boosted estimate as a linear-loss gradient. [`Dmfw`] runs `L`
//! engines side by side: each block chains their decisions through a
//! Frank-Wolfe recursion, plays the chain's endpoint, and routes each round's
//! gradient to the engine a shared random permutation assigns to it.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::doco::{DocoEngine, DocoError};
use crate::rewards::{
    boosted_grad_monotone, boosted_grad_nonmonotone, BoostMode, BoostSample, RewardError,
    RewardSequence,
};
use crate::sets::DecisionSet;

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("the Frank-Wolfe reduction needs a downward-closed decision set")]
    NotDownwardClosed,
    #[error("need at least one inner engine")]
    NoEngines,
    #[error("inner engine {0} disagrees with engine 0 on nodes or dimension")]
    MismatchedEngines(usize),
    #[error("inner engine {engine} has horizon {got}, expected {expected} blocks")]
    WrongInnerHorizon {
        engine: usize,
        got: usize,
        expected: usize,
    },
    #[error("horizon {0} is not a positive multiple of block size {1}")]
    IndivisibleHorizon(usize, usize),
    #[error("need one RNG per node: {got} for {nodes} nodes")]
    RngCount { nodes: usize, got: usize },
    #[error("reward sequence is {got_nodes} nodes x {got_dim} dims, engine expects {nodes} x {dim}")]
    ShapeMismatch {
        nodes: usize,
        dim: usize,
        got_nodes: usize,
        got_dim: usize,
    },
    #[error(transparent)]
    Doco(#[from] DocoError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

/// Everything one boosted round produced, for tracing and verification.
#[derive(Debug, Clone)]
pub struct BoostRound {
    /// 1-based round that was played.
    pub t: usize,
    /// Decisions the nodes actually played.
    pub played: Vec<DVector<f64>>,
    /// Preparatory decisions fetched from the engine before feeding.
    pub prepared: Vec<DVector<f64>>,
    /// Linear-loss gradients handed to the engine (negated boosted estimates).
    pub fed: Vec<DVector<f64>>,
    /// Scale draws and query points per node.
    pub samples: Vec<BoostSample>,
}

/// Submodular-to-convex boosting wrapper around one engine.
#[derive(Debug)]
pub struct BoostingReduction<E> {
    inner: E,
    mode: BoostMode,
    x_inf: DVector<f64>,
    alpha: f64,
    rngs: Vec<ChaCha12Rng>,
}

impl<E: DocoEngine> BoostingReduction<E> {
    pub fn new(
        inner: E,
        mode: BoostMode,
        set: &DecisionSet,
        rngs: Vec<ChaCha12Rng>,
    ) -> Result<Self, ReductionError> {
        if rngs.len() != inner.nodes() {
            return Err(ReductionError::RngCount {
                nodes: inner.nodes(),
                got: rngs.len(),
            });
        }
        let alpha = match mode {
            BoostMode::NonMonotone => (1.0 - set.nu()) / 4.0,
            BoostMode::Monotone => 1.0 - (-1.0f64).exp(),
        };
        Ok(Self {
            inner,
            mode,
            x_inf: set.inf_norm_minimizer().clone(),
            alpha,
            rngs,
        })
    }

    /// Approximation ratio this mode guarantees against the offline optimum.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> BoostMode {
        self.mode
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    /// 1-based index of the next round to be played.
    pub fn round(&self) -> usize {
        self.inner.round()
    }

    pub fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    /// Play one round against the seeded reward sequence.
    pub fn boost_round(&mut self, seq: &RewardSequence) -> Result<BoostRound, ReductionError> {
        let n = self.inner.nodes();
        let d = self.inner.dimension();
        if seq.nodes() != n || seq.dimension() != d {
            return Err(ReductionError::ShapeMismatch {
                nodes: n,
                dim: d,
                got_nodes: seq.nodes(),
                got_dim: seq.dimension(),
            });
        }
        let t = self.inner.round();
        if t > self.inner.horizon() {
            return Err(ReductionError::Doco(DocoError::HorizonExhausted(
                self.inner.horizon(),
            )));
        }
        let mut played = Vec::with_capacity(n);
        let mut prepared = Vec::with_capacity(n);
        let mut fed = Vec::with_capacity(n);
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let x_hat = self.inner.decision(i);
            let (sample, estimate) = match self.mode {
                BoostMode::NonMonotone => {
                    boosted_grad_nonmonotone(seq, t, i, &x_hat, &self.x_inf, &mut self.rngs[i])?
                }
                BoostMode::Monotone => {
                    boosted_grad_monotone(seq, t, i, &x_hat, &mut self.rngs[i])?
                }
            };
            played.push(match self.mode {
                BoostMode::NonMonotone => (&x_hat + &self.x_inf) / 2.0,
                BoostMode::Monotone => x_hat.clone(),
            });
            fed.push(-estimate);
            prepared.push(x_hat);
            samples.push(sample);
        }
        self.inner.feed(&fed)?;
        Ok(BoostRound {
            t,
            played,
            prepared,
            fed,
            samples,
        })
    }
}

/// What one Frank-Wolfe round fed and where it went.
#[derive(Debug, Clone)]
pub struct DmfwRound {
    /// 1-based round that was played.
    pub t: usize,
    /// 0-based engine slot the shared permutation assigned to this round.
    pub slot: usize,
    /// Linear-loss gradients handed to that slot's engine.
    pub fed: Vec<DVector<f64>>,
}

/// Meta-Frank-Wolfe over `L` engine instances.
#[derive(Debug)]
pub struct Dmfw<E> {
    engines: Vec<E>,
    set: DecisionSet,
    horizon: usize,
    fed: usize,
    perm_rng: ChaCha12Rng,
    grad_rngs: Vec<ChaCha12Rng>,
    /// `chain[k][i]` is node `i`'s k-th recursion point of the current
    /// block; the chain starts at 0 and has `L + 1` entries.
    chain: Vec<Vec<DVector<f64>>>,
    played: Vec<DVector<f64>>,
    slot_of_pos: Vec<usize>,
}

impl<E: DocoEngine> Dmfw<E> {
    pub fn new(
        engines: Vec<E>,
        set: DecisionSet,
        horizon: usize,
        perm_rng: ChaCha12Rng,
        grad_rngs: Vec<ChaCha12Rng>,
    ) -> Result<Self, ReductionError> {
        if !set.is_downward_closed() {
            return Err(ReductionError::NotDownwardClosed);
        }
        if engines.is_empty() {
            return Err(ReductionError::NoEngines);
        }
        let l = engines.len();
        if horizon == 0 || horizon % l != 0 {
            return Err(ReductionError::IndivisibleHorizon(horizon, l));
        }
        let blocks = horizon / l;
        let nodes = engines[0].nodes();
        let dim = engines[0].dimension();
        for (k, engine) in engines.iter().enumerate() {
            if engine.nodes() != nodes || engine.dimension() != dim {
                return Err(ReductionError::MismatchedEngines(k));
            }
            if engine.horizon() != blocks {
                return Err(ReductionError::WrongInnerHorizon {
                    engine: k,
                    got: engine.horizon(),
                    expected: blocks,
                });
            }
        }
        if grad_rngs.len() != nodes {
            return Err(ReductionError::RngCount {
                nodes,
                got: grad_rngs.len(),
            });
        }
        let mut dmfw = Self {
            engines,
            set,
            horizon,
            fed: 0,
            perm_rng,
            grad_rngs,
            chain: Vec::new(),
            played: Vec::new(),
            slot_of_pos: Vec::new(),
        };
        dmfw.block_start();
        Ok(dmfw)
    }

    /// Approximation ratio of the Frank-Wolfe reduction.
    pub fn alpha(&self) -> f64 {
        (-1.0f64).exp()
    }

    pub fn block_size(&self) -> usize {
        self.engines.len()
    }

    pub fn engines(&self) -> &[E] {
        &self.engines
    }

    pub fn set(&self) -> &DecisionSet {
        &self.set
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// 1-based index of the next round to be played.
    pub fn round(&self) -> usize {
        self.fed + 1
    }

    /// The decision every node plays for the whole current block.
    pub fn decision(&self, node: usize) -> DVector<f64> {
        self.played[node].clone()
    }

    /// The current block's recursion points, outer index 0..=L, inner per node.
    pub fn chain(&self) -> &[Vec<DVector<f64>>] {
        &self.chain
    }

    fn block_start(&mut self) {
        let l = self.engines.len();
        let n = self.engines[0].nodes();
        let d = self.engines[0].dimension();
        let ones = DVector::repeat(d, 1.0);
        let mut chain = vec![vec![DVector::zeros(d); n]];
        for (k, engine) in self.engines.iter().enumerate() {
            let prev = &chain[k];
            let mut next = Vec::with_capacity(n);
            for (i, base) in prev.iter().enumerate() {
                let step = engine.decision(i).component_mul(&(&ones - base)) / l as f64;
                next.push(base + step);
            }
            chain.push(next);
        }
        self.played = chain[l].clone();
        self.chain = chain;
        let mut perm: Vec<usize> = (0..l).collect();
        perm.shuffle(&mut self.perm_rng);
        // `perm[k]` is the in-block position engine `k` listens to.
        self.slot_of_pos = vec![0; l];
        for (k, &pos) in perm.iter().enumerate() {
            self.slot_of_pos[pos] = k;
        }
    }

    /// Play one round: query gradients at the permuted slot's chain point and
    /// feed that slot's engine.
    pub fn feed(&mut self, seq: &RewardSequence) -> Result<DmfwRound, ReductionError> {
        let n = self.engines[0].nodes();
        let d = self.engines[0].dimension();
        if seq.nodes() != n || seq.dimension() != d {
            return Err(ReductionError::ShapeMismatch {
                nodes: n,
                dim: d,
                got_nodes: seq.nodes(),
                got_dim: seq.dimension(),
            });
        }
        let t = self.fed + 1;
        if t > self.horizon {
            return Err(ReductionError::Doco(DocoError::HorizonExhausted(
                self.horizon,
            )));
        }
        let l = self.engines.len();
        let pos = (t - 1) % l;
        let slot = self.slot_of_pos[pos];
        let ones = DVector::repeat(d, 1.0);
        let mut fed = Vec::with_capacity(n);
        for i in 0..n {
            let point = &self.chain[slot][i];
            let grad = seq.stoch_grad(t, i, point, &mut self.grad_rngs[i])?;
            fed.push(grad.component_mul(&(point - &ones)));
        }
        self.engines[slot].feed(&fed)?;
        self.fed = t;
        if pos == l - 1 && t < self.horizon {
            self.block_start();
        }
        Ok(DmfwRound { t, slot, fed })
    }
}

/// Monte Carlo check that one shuffled draw per block is an unbiased stand-in
/// for the block's average slot gradient, coordinatewise within `4` standard
/// errors. Exact matches (zero variance) are accepted outright.
pub fn permutation_unbiasedness_check<R: Rng>(
    seq: &RewardSequence,
    node: usize,
    block_rounds: &[usize],
    chain: &[DVector<f64>],
    trials: usize,
    rng: &mut R,
) -> Result<bool, ReductionError> {
    let l = block_rounds.len();
    assert_eq!(chain.len(), l, "one chain point per block round");
    let d = seq.dimension();
    let ones = DVector::repeat(d, 1.0);
    let slot_grad = |t: usize, k: usize| -> Result<DVector<f64>, ReductionError> {
        Ok(seq
            .grad(t, node, &chain[k])?
            .component_mul(&(&chain[k] - &ones)))
    };
    let mut targets = Vec::with_capacity(l);
    for k in 0..l {
        let mut acc = DVector::zeros(d);
        for &t in block_rounds {
            acc += slot_grad(t, k)?;
        }
        targets.push(acc / l as f64);
    }
    let mut sums = vec![DVector::<f64>::zeros(d); l];
    let mut sq_sums = vec![DVector::<f64>::zeros(d); l];
    let mut perm = block_rounds.to_vec();
    for _ in 0..trials {
        perm.shuffle(rng);
        for k in 0..l {
            let g = slot_grad(perm[k], k)?;
            sums[k] += &g;
            sq_sums[k] += g.component_mul(&g);
        }
    }
    let nf = trials as f64;
    for k in 0..l {
        for j in 0..d {
            let mean = sums[k][j] / nf;
            let var = (sq_sums[k][j] / nf - mean * mean).max(0.0);
            let se = (var / nf).sqrt();
            if (mean - targets[k][j]).abs() > 4.0 * se + 1e-12 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doco::{Dftpl, Dogd, EngineParams, EngineTelemetry};
    use crate::network::{build_lazy_metropolis, spectral, Topology};
    use crate::rewards::{make_sequence, RewardFamily};
    use crate::rng::SeedStream;
    use approx::assert_abs_diff_eq;

    fn small_family(monotone: bool, nodes: usize, horizon: usize, d: usize) -> RewardFamily {
        RewardFamily {
            horizon,
            nodes,
            dimension: d,
            monotone,
            linear_scale: 1.0,
            linear_density: 1.0,
            curvature_scale: 0.5,
            curvature_density: 0.5,
            noise: 0.1,
        }
    }

    fn node_rngs(seeds: &SeedStream, prefix: &str, n: usize) -> Vec<ChaCha12Rng> {
        (0..n).map(|i| seeds.indexed(prefix, i)).collect()
    }

    /// Engine stub that always answers with one fixed point and records feeds.
    #[derive(Debug)]
    struct FixedEngine {
        x: DVector<f64>,
        nodes: usize,
        horizon: usize,
        fed_rounds: Vec<Vec<DVector<f64>>>,
        telemetry: EngineTelemetry,
    }

    impl FixedEngine {
        fn new(x: DVector<f64>, nodes: usize, horizon: usize) -> Self {
            Self {
                x,
                nodes,
                horizon,
                fed_rounds: Vec::new(),
                telemetry: EngineTelemetry::default(),
            }
        }
    }

    impl DocoEngine for FixedEngine {
        fn name(&self) -> &'static str {
            "fixed"
        }

        fn nodes(&self) -> usize {
            self.nodes
        }

        fn dimension(&self) -> usize {
            self.x.len()
        }

        fn horizon(&self) -> usize {
            self.horizon
        }

        fn round(&self) -> usize {
            self.fed_rounds.len() + 1
        }

        fn decision(&self, _node: usize) -> DVector<f64> {
            self.x.clone()
        }

        fn feed(&mut self, grads: &[DVector<f64>]) -> Result<(), DocoError> {
            self.fed_rounds.push(grads.to_vec());
            Ok(())
        }

        fn telemetry(&self) -> &EngineTelemetry {
            &self.telemetry
        }
    }

    #[test]
    fn nonmonotone_mode_plays_the_midpoint_toward_the_minimizer() {
        let seeds = SeedStream::new(101);
        let topo = Topology::path(3).unwrap();
        let a = build_lazy_metropolis(&topo);
        let set = DecisionSet::capped_simplex(2, 1.0).unwrap();
        let seq = make_sequence(
            &small_family(false, 3, 8, 2),
            &mut seeds.stream("rewards"),
        )
        .unwrap();
        let engine = Dogd::new(set.clone(), a, 8, seq.g()).unwrap();
        let mut reduction = BoostingReduction::new(
            engine,
            BoostMode::NonMonotone,
            &set,
            node_rngs(&seeds, "boost.node", 3),
        )
        .unwrap();
        assert_abs_diff_eq!(reduction.alpha(), 0.25, epsilon = 0.0);
        for _ in 0..8 {
            let round = reduction.boost_round(&seq).unwrap();
            for i in 0..3 {
                assert_abs_diff_eq!(
                    round.played[i],
                    &round.prepared[i] / 2.0,
                    epsilon = 0.0
                );
                assert!(set.contains_tol(&round.played[i], 1e-9));
            }
        }
    }

    #[test]
    fn monotone_mode_plays_the_preparatory_decision() {
        let seeds = SeedStream::new(103);
        let topo = Topology::ring(4).unwrap();
        let a = build_lazy_metropolis(&topo);
        let set = DecisionSet::unit_box(2).unwrap();
        let seq = make_sequence(
            &small_family(true, 4, 6, 2),
            &mut seeds.stream("rewards"),
        )
        .unwrap();
        let engine = Dogd::new(set.clone(), a, 6, seq.g()).unwrap();
        let mut reduction = BoostingReduction::new(
            engine,
            BoostMode::Monotone,
            &set,
            node_rngs(&seeds, "boost.node", 4),
        )
        .unwrap();
        assert_abs_diff_eq!(reduction.alpha(), 1.0 - (-1.0f64).exp(), epsilon = 0.0);
        for _ in 0..6 {
            let round = reduction.boost_round(&seq).unwrap();
            for i in 0..4 {
                assert_eq!(round.played[i], round.prepared[i]);
            }
        }
    }

    #[test]
    fn fed_gradients_respect_the_mode_scale_bound() {
        let seeds = SeedStream::new(107);
        let topo = Topology::path(3).unwrap();
        let a = build_lazy_metropolis(&topo);
        let set = DecisionSet::capped_simplex(3, 1.5).unwrap();
        for (monotone, mode, scale) in [
            (false, BoostMode::NonMonotone, 0.375),
            (true, BoostMode::Monotone, 1.0 - (-1.0f64).exp()),
        ] {
            let seq = make_sequence(
                &small_family(monotone, 3, 16, 3),
                &mut seeds.stream("rewards"),
            )
            .unwrap();
            let engine = Dogd::new(set.clone(), a.clone(), 16, seq.g()).unwrap();
            let mut reduction =
                BoostingReduction::new(engine, mode, &set, node_rngs(&seeds, "boost.node", 3))
                    .unwrap();
            for _ in 0..16 {
                let round = reduction.boost_round(&seq).unwrap();
                for g in &round.fed {
                    assert!(g.norm() <= scale * seq.g() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn boost_round_errors_after_the_horizon() {
        let seeds = SeedStream::new(109);
        let topo = Topology::path(3).unwrap();
        let a = build_lazy_metropolis(&topo);
        let set = DecisionSet::unit_box(2).unwrap();
        let seq = make_sequence(
            &small_family(true, 3, 2, 2),
            &mut seeds.stream("rewards"),
        )
        .unwrap();
        let engine = Dogd::new(set.clone(), a, 2, seq.g()).unwrap();
        let mut reduction = BoostingReduction::new(
            engine,
            BoostMode::Monotone,
            &set,
            node_rngs(&seeds, "boost.node", 3),
        )
        .unwrap();
        reduction.boost_round(&seq).unwrap();
        reduction.boost_round(&seq).unwrap();
        assert!(matches!(
            reduction.boost_round(&seq).unwrap_err(),
            ReductionError::Doco(DocoError::HorizonExhausted(2))
        ));
    }

    #[test]
    fn single_step_chain_returns_the_engine_decision() {
        let seeds = SeedStream::new(113);
        let set = DecisionSet::capped_simplex(3, 1.0).unwrap();
        let w = DVector::from_vec(vec![0.4, 0.1, 0.3]);
        let engines = vec![FixedEngine::new(w.clone(), 2, 4)];
        let dmfw = Dmfw::new(
            engines,
            set,
            4,
            seeds.stream("permutation"),
            node_rngs(&seeds, "dmfw.grad", 2),
        )
        .unwrap();
        for i in 0..2 {
            assert_eq!(dmfw.decision(i), w);
        }
    }

    #[test]
    fn two_step_chain_of_all_ones_climbs_to_three_quarters() {
        let seeds = SeedStream::new(127);
        let set = DecisionSet::unit_box(2).unwrap();
        let ones = DVector::repeat(2, 1.0);
        let engines = vec![
            FixedEngine::new(ones.clone(), 2, 3),
            FixedEngine::new(ones.clone(), 2, 3),
        ];
        let dmfw = Dmfw::new(
            engines,
            set,
            6,
            seeds.stream("permutation"),
            node_rngs(&seeds, "dmfw.grad", 2),
        )
        .unwrap();
        let chain = dmfw.chain();
        for i in 0..2 {
            assert_abs_diff_eq!(chain[0][i], DVector::zeros(2), epsilon = 0.0);
            assert_abs_diff_eq!(chain[1][i], &ones * 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(chain[2][i], &ones * 0.75, epsilon = 1e-15);
            assert_abs_diff_eq!(dmfw.decision(i), &ones * 0.75, epsilon = 1e-15);
        }
    }

    #[test]
    fn chain_base_slot_feeds_the_negated_gradient() {
        let seeds = SeedStream::new(131);
        let set = DecisionSet::capped_simplex(2, 1.0).unwrap();
        let mut family = small_family(true, 2, 4, 2);
        family.noise = 0.0;
        let seq = make_sequence(&family, &mut seeds.stream("rewards")).unwrap();
        let engines = vec![FixedEngine::new(DVector::zeros(2), 2, 4)];
        let mut dmfw = Dmfw::new(
            engines,
            set,
            4,
            seeds.stream("permutation"),
            node_rngs(&seeds, "dmfw.grad", 2),
        )
        .unwrap();
        for t in 1..=4usize {
            let round = dmfw.feed(&seq).unwrap();
            assert_eq!(round.slot, 0);
            for i in 0..2 {
                let expected = -seq.grad(t, i, &DVector::zeros(2)).unwrap();
                assert_abs_diff_eq!(round.fed[i], expected, epsilon = 0.0);
            }
        }
    }

    #[test]
    fn every_engine_hears_exactly_one_round_per_block() {
        let seeds = SeedStream::new(137);
        let set = DecisionSet::capped_simplex(3, 1.0).unwrap();
        let seq = make_sequence(
            &small_family(true, 2, 12, 3),
            &mut seeds.stream("rewards"),
        )
        .unwrap();
        let engines: Vec<_> = (0..4)
            .map(|_| FixedEngine::new(DVector::from_vec(vec![0.2, 0.3, 0.1]), 2, 3))
            .collect();
        let mut dmfw = Dmfw::new(
            engines,
            set,
            12,
            seeds.stream("permutation"),
            node_rngs(&seeds, "dmfw.grad", 2),
        )
        .unwrap();
        let mut slots_by_block: Vec<Vec<usize>> = vec![Vec::new(); 3];
        for t in 1..=12usize {
            let round = dmfw.feed(&seq).unwrap();
            slots_by_block[(t - 1) / 4].push(round.slot);
        }
        for engine in dmfw.engines() {
            assert_eq!(engine.fed_rounds.len(), 3);
        }
        for mut slots in slots_by_block {
            slots.sort_unstable();
            assert_eq!(slots, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn dmfw_fed_gradients_stay_below_the_gradient_bound() {
        let seeds = SeedStream::new(139);
        let topo = Topology::path(3).unwrap();
        let a = build_lazy_metropolis(&topo);
        let profile = spectral(&a, 8, 2).unwrap();
        let set = DecisionSet::capped_simplex(3, 1.0).unwrap();
        let seq = make_sequence(
            &small_family(true, 3, 16, 3),
            &mut seeds.stream("rewards"),
        )
        .unwrap();
        let params = EngineParams {
            l: 2,
            k: 2,
            theta: profile.theta,
            eta: seq.g() * (3.0f64 * 8.0 * 2.0).sqrt(),
        };
        let engines: Vec<_> = (0..2)
            .map(|k| {
                Dftpl::new(
                    set.clone(),
                    a.clone(),
                    8,
                    params,
                    node_rngs(&seeds, &format!("engine.{k}.node"), 3),
                )
                .unwrap()
            })
            .collect();
        let mut dmfw = Dmfw::new(
            engines,
            set.clone(),
            16,
            seeds.stream("permutation"),
            node_rngs(&seeds, "dmfw.grad", 3),
        )
        .unwrap();
        for _ in 0..16 {
            for i in 0..3 {
                assert!(set.contains_tol(&dmfw.decision(i), 1e-9));
            }
            let round = dmfw.feed(&seq).unwrap();
            for g in &round.fed {
                assert!(g.norm() <= seq.g() + 1e-12);
            }
        }
    }

    #[test]
    fn dmfw_rejects_sets_that_are_not_downward_closed() {
        let seeds = SeedStream::new(149);
        let lower = DVector::from_vec(vec![0.2, 0.2]);
        let upper = DVector::from_vec(vec![1.0, 1.0]);
        let set = DecisionSet::box_set(lower, upper).unwrap();
        let engines = vec![FixedEngine::new(DVector::zeros(2), 2, 4)];
        assert!(matches!(
            Dmfw::new(
                engines,
                set,
                4,
                seeds.stream("permutation"),
                node_rngs(&seeds, "dmfw.grad", 2),
            )
            .unwrap_err(),
            ReductionError::NotDownwardClosed
        ));
    }

    #[test]
    fn boosted_runs_replay_identically_from_equal_seeds() {
        let run = || {
            let seeds = SeedStream::new(163);
            let topo = Topology::ring(3).unwrap();
            let a = build_lazy_metropolis(&topo);
            let set = DecisionSet::capped_simplex(2, 1.0).unwrap();
            let seq = make_sequence(
                &small_family(false, 3, 10, 2),
                &mut seeds.stream("rewards"),
            )
            .unwrap();
            let engine = Dogd::new(set.clone(), a, 10, seq.g()).unwrap();
            let mut reduction = BoostingReduction::new(
                engine,
                BoostMode::NonMonotone,
                &set,
                node_rngs(&seeds, "boost.node", 3),
            )
            .unwrap();
            let mut trace = Vec::new();
            for _ in 0..10 {
                let round = reduction.boost_round(&seq).unwrap();
                trace.extend(round.played.iter().flat_map(|x| x.iter().copied()));
            }
            trace
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn unbiasedness_check_is_exact_for_degenerate_blocks() {
        let seeds = SeedStream::new(151);
        let mut family = small_family(true, 2, 8, 2);
        family.noise = 0.0;
        let seq = make_sequence(&family, &mut seeds.stream("rewards")).unwrap();
        let chain = vec![DVector::from_vec(vec![0.3, 0.4])];
        let mut rng = seeds.stream("test.perm");
        assert!(permutation_unbiasedness_check(&seq, 0, &[3], &chain, 50, &mut rng).unwrap());
    }

    #[test]
    fn unbiasedness_check_passes_on_a_random_block() {
        let seeds = SeedStream::new(157);
        let mut family = small_family(true, 2, 8, 3);
        family.noise = 0.0;
        let seq = make_sequence(&family, &mut seeds.stream("rewards")).unwrap();
        let chain: Vec<_> = (0..4)
            .map(|k| DVector::from_vec(vec![0.1 * k as f64, 0.2, 0.05 * k as f64]))
            .collect();
        let mut rng = seeds.stream("test.perm");
        assert!(
            permutation_unbiasedness_check(&seq, 1, &[1, 2, 3, 4], &chain, 10_000, &mut rng)
                .unwrap()
        );
    }
}
