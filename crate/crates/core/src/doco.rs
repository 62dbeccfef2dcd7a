//! Decentralized online convex optimization engines behind one trait.
//!
//! Three engines implement [`DocoEngine`]: [`AdOspa`] keeps a running
//! network-averaged gradient sum via Chebyshev-accelerated gossip and plays
//! averages of perturbed linear maximizers, [`Dftpl`] runs a blocked
//! follow-the-perturbed-leader whose half-block gossip rounds average first
//! decisions and then gradient sums, and [`Dogd`] is the projection-based
//! baseline (one gossip step, then a projected descent step).
//!
//! All engines are gradient-fed: the caller evaluates each node's linear-loss
//! gradient at the played decision and hands the per-node batch back through
//! [`DocoEngine::feed`], which advances the round. Decisions for round `t`
//! are available before the round-`t` gradients are fed.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::network::{
    c_prime, chebyshev_gossip_step, column_mean, consensus_error, gossip_step, MixingMatrix,
    NetworkError, SpectralProfile,
};
use crate::sampling::uniform_ball;
use crate::sets::{DecisionSet, SetError};

#[derive(Debug, Error)]
pub enum DocoError {
    #[error("horizon {0} is not a positive multiple of block size {1}")]
    IndivisibleHorizon(usize, usize),
    #[error("block size {0} must be even and at least 2")]
    OddBlock(usize),
    #[error("gossip budget {k} must satisfy 1 <= k <= block size {l}")]
    BudgetExceedsBlock { k: usize, l: usize },
    #[error("mixing weight {0} must lie in (0, 1)")]
    InvalidTheta(f64),
    #[error("gradient bound {0} must be positive and finite")]
    InvalidGradBound(f64),
    #[error("need one RNG per node: {got} for {nodes} nodes")]
    RngCount { nodes: usize, got: usize },
    #[error("node count mismatch: mixing matrix has {matrix}, decision state has {state}")]
    NodeMismatch { matrix: usize, state: usize },
    #[error("engine already consumed its {0}-round horizon")]
    HorizonExhausted(usize),
    #[error("expected {expected} per-node gradients, got {got}")]
    GradientCount { expected: usize, got: usize },
    #[error("gradient dimension {got} does not match decision dimension {expected}")]
    GradientDimension { expected: usize, got: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Set(#[from] SetError),
}

/// Diagnostics accumulated while an engine runs.
///
/// Consensus entries are recorded at block boundaries; which series an engine
/// fills depends on what it averages over the network.
#[derive(Debug, Clone, Default)]
pub struct EngineTelemetry {
    /// Matrix-weighted exchanges performed so far (one per gossip step).
    pub exchanges: u64,
    /// Max over nodes of the distance between a node's averaged gradient
    /// history and the network mean, one entry per finalized block.
    pub z_consensus: Vec<f64>,
    /// Max over nodes of the distance between a block's gossiped decision and
    /// the mean preparatory decision, one entry per staged block.
    pub x_consensus: Vec<f64>,
    /// Max over nodes of the distance between a block's gossiped gradient sum
    /// and the block mean, one entry per finalized block.
    pub g_consensus: Vec<f64>,
}

/// Parameter tuple shared by the engines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineParams {
    /// Block size: rounds per block.
    pub l: usize,
    /// Gossip budget inside a block; doubles as the inner block size under
    /// the Frank-Wolfe reduction.
    pub k: usize,
    /// Chebyshev mixing weight.
    pub theta: f64,
    /// Perturbation scale.
    pub eta: f64,
}

/// Which prescription [`default_params`] should apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Chebyshev-gossip engine sized for oblivious smooth losses.
    SmoothDoco,
    /// Chebyshev-gossip engine sized for oblivious linear losses.
    LinearDoco,
    /// Half-block-gossip engine sized so consensus reaches the 1/T scale.
    Dftpl,
    /// Outer Frank-Wolfe block size plus the inner engine's block size.
    DmfwInner,
}

/// Smallest `m` with `m^3 >= t`.
fn ceil_cbrt(t: usize) -> usize {
    let mut m = ((t as f64).cbrt().round() as usize).max(1);
    while m > 1 && (m - 1).pow(3) >= t {
        m -= 1;
    }
    while m.pow(3) < t {
        m += 1;
    }
    m
}

/// Outer Frank-Wolfe block size: the least fixed point of
/// `L = ceil_cbrt(ceil(t / c_prime(t, L)))`, iterated upward from 1.
///
/// Returns `(L, c_prime(t, L))`; the second entry is the inner engine's
/// block size for its `t / L`-round horizon.
pub fn dmfw_block_sizes(profile: &SpectralProfile, t: usize) -> Result<(usize, usize), DocoError> {
    let mut l = 1usize;
    let mut cp = c_prime(profile.n, profile.rho, t, l)?;
    for _ in 0..64 {
        let inner_rounds = t.div_ceil(cp).max(1);
        let next = ceil_cbrt(inner_rounds).min(t);
        let next_cp = c_prime(profile.n, profile.rho, t, next)?;
        if next == l {
            break;
        }
        l = next;
        cp = next_cp;
    }
    Ok((l, cp))
}

/// Prescribed `(L, K, theta, eta)` for a role, gradient bound `g`,
/// dimension `d`, and horizon `t`.
pub fn default_params(
    profile: &SpectralProfile,
    g: f64,
    d: usize,
    t: usize,
    role: Role,
) -> Result<EngineParams, DocoError> {
    if !(g.is_finite() && g > 0.0) {
        return Err(DocoError::InvalidGradBound(g));
    }
    let eta = |l: usize, rounds: f64| g * (d as f64 * rounds * l as f64).sqrt();
    let params = match role {
        Role::SmoothDoco => {
            let l = ceil_cbrt(t).max(profile.c);
            EngineParams {
                l,
                k: profile.c,
                theta: profile.theta,
                eta: eta(l, t as f64),
            }
        }
        Role::LinearDoco => EngineParams {
            l: profile.c,
            k: profile.c,
            theta: profile.theta,
            eta: eta(profile.c, t as f64),
        },
        Role::Dftpl => {
            let l = c_prime(profile.n, profile.rho, t, 1)?;
            EngineParams {
                l,
                k: l,
                theta: profile.theta,
                eta: eta(l, t as f64),
            }
        }
        Role::DmfwInner => {
            let (l, cp) = dmfw_block_sizes(profile, t)?;
            EngineParams {
                l,
                k: cp,
                theta: profile.theta,
                eta: eta(cp, t as f64 / l as f64),
            }
        }
    };
    Ok(params)
}

/// A decentralized online linear-loss learner over a fixed network.
pub trait DocoEngine {
    fn name(&self) -> &'static str;
    fn nodes(&self) -> usize;
    fn dimension(&self) -> usize;
    fn horizon(&self) -> usize;
    /// 1-based index of the next round to be played.
    fn round(&self) -> usize;
    /// The decision node `node` plays in the current round.
    fn decision(&self, node: usize) -> DVector<f64>;
    /// Reveal the per-node loss gradients of the current round and advance.
    fn feed(&mut self, grads: &[DVector<f64>]) -> Result<(), DocoError>;
    fn telemetry(&self) -> &EngineTelemetry;
}

impl<T: DocoEngine + ?Sized> DocoEngine for Box<T> {
    fn name(&self) -> &'static str {
        (**self).name()
    }

    fn nodes(&self) -> usize {
        (**self).nodes()
    }

    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn horizon(&self) -> usize {
        (**self).horizon()
    }

    fn round(&self) -> usize {
        (**self).round()
    }

    fn decision(&self, node: usize) -> DVector<f64> {
        (**self).decision(node)
    }

    fn feed(&mut self, grads: &[DVector<f64>]) -> Result<(), DocoError> {
        (**self).feed(grads)
    }

    fn telemetry(&self) -> &EngineTelemetry {
        (**self).telemetry()
    }
}

fn row_vec(m: &DMatrix<f64>, i: usize) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.row(i).iter().copied())
}

fn set_row(m: &mut DMatrix<f64>, i: usize, v: &DVector<f64>) {
    for (j, x) in v.iter().enumerate() {
        m[(i, j)] = *x;
    }
}

fn add_to_row(m: &mut DMatrix<f64>, i: usize, v: &DVector<f64>) {
    for (j, x) in v.iter().enumerate() {
        m[(i, j)] += *x;
    }
}

fn check_feed(
    grads: &[DVector<f64>],
    nodes: usize,
    d: usize,
    round: usize,
    horizon: usize,
) -> Result<(), DocoError> {
    if round > horizon {
        return Err(DocoError::HorizonExhausted(horizon));
    }
    if grads.len() != nodes {
        return Err(DocoError::GradientCount {
            expected: nodes,
            got: grads.len(),
        });
    }
    for grad in grads {
        if grad.len() != d {
            return Err(DocoError::GradientDimension {
                expected: d,
                got: grad.len(),
            });
        }
    }
    Ok(())
}

fn max_row_distance(m: &DMatrix<f64>, center: &DVector<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        let mut d2 = 0.0;
        for j in 0..m.ncols() {
            let diff = m[(i, j)] - center[j];
            d2 += diff * diff;
        }
        worst = worst.max(d2.sqrt());
    }
    worst
}

/// Gossip-then-descend baseline with step size `R / (G sqrt(t))`.
#[derive(Debug)]
pub struct Dogd {
    set: DecisionSet,
    a: MixingMatrix,
    horizon: usize,
    fed: usize,
    x: DMatrix<f64>,
    lr_scale: f64,
    telemetry: EngineTelemetry,
}

impl Dogd {
    pub fn new(
        set: DecisionSet,
        a: MixingMatrix,
        horizon: usize,
        grad_bound: f64,
    ) -> Result<Self, DocoError> {
        if !(grad_bound.is_finite() && grad_bound > 0.0) {
            return Err(DocoError::InvalidGradBound(grad_bound));
        }
        if horizon == 0 {
            return Err(DocoError::IndivisibleHorizon(horizon, 1));
        }
        let n = a.nodes();
        let d = set.dimension();
        let init = set.initial_point();
        let mut x = DMatrix::zeros(n, d);
        for i in 0..n {
            set_row(&mut x, i, &init);
        }
        Ok(Self {
            lr_scale: set.radius() / grad_bound,
            set,
            a,
            horizon,
            fed: 0,
            x,
            telemetry: EngineTelemetry::default(),
        })
    }
}

impl DocoEngine for Dogd {
    fn name(&self) -> &'static str {
        "dogd"
    }

    fn nodes(&self) -> usize {
        self.a.nodes()
    }

    fn dimension(&self) -> usize {
        self.set.dimension()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn round(&self) -> usize {
        self.fed + 1
    }

    fn decision(&self, node: usize) -> DVector<f64> {
        row_vec(&self.x, node)
    }

    fn feed(&mut self, grads: &[DVector<f64>]) -> Result<(), DocoError> {
        let t = self.fed + 1;
        check_feed(grads, self.nodes(), self.dimension(), t, self.horizon)?;
        self.x = gossip_step(&self.a, &self.x)?;
        self.telemetry.exchanges += 1;
        let lr = self.lr_scale / (t as f64).sqrt();
        for (i, grad) in grads.iter().enumerate() {
            let stepped = row_vec(&self.x, i) - grad * lr;
            set_row(&mut self.x, i, &self.set.project(&stepped)?);
        }
        self.fed = t;
        Ok(())
    }

    fn telemetry(&self) -> &EngineTelemetry {
        &self.telemetry
    }
}

/// Blocked perturbed-leader engine over a Chebyshev-averaged gradient sum.
///
/// Decisions stay constant inside each length-`L` block. The first `K`
/// rounds of a block advance the two-term accelerated gossip recursion on
/// the running gradient history; the block end folds the block's gradient
/// sum into both recursion buffers and stages the next block's decision as
/// an average of `L` perturbed linear maximizers against the history that
/// was finalized one block earlier.
#[derive(Debug)]
pub struct AdOspa {
    set: DecisionSet,
    a: MixingMatrix,
    params: EngineParams,
    horizon: usize,
    fed: usize,
    x: DMatrix<f64>,
    cheb_cur: DMatrix<f64>,
    cheb_prev: DMatrix<f64>,
    /// Finalized averaged history lagging one block behind the recursion.
    z_delayed: DMatrix<f64>,
    g_acc: DMatrix<f64>,
    /// Running network mean of all folded-in block gradient sums.
    zbar: DVector<f64>,
    rngs: Vec<ChaCha12Rng>,
    telemetry: EngineTelemetry,
}

impl AdOspa {
    pub fn new(
        set: DecisionSet,
        a: MixingMatrix,
        horizon: usize,
        params: EngineParams,
        rngs: Vec<ChaCha12Rng>,
    ) -> Result<Self, DocoError> {
        let n = a.nodes();
        let d = set.dimension();
        if params.l == 0 || horizon == 0 || horizon % params.l != 0 {
            return Err(DocoError::IndivisibleHorizon(horizon, params.l));
        }
        if params.k == 0 || params.k > params.l {
            return Err(DocoError::BudgetExceedsBlock {
                k: params.k,
                l: params.l,
            });
        }
        if !(params.theta > 0.0 && params.theta < 1.0) {
            return Err(DocoError::InvalidTheta(params.theta));
        }
        if rngs.len() != n {
            return Err(DocoError::RngCount {
                nodes: n,
                got: rngs.len(),
            });
        }
        let init = set.initial_point();
        let mut x = DMatrix::zeros(n, d);
        for i in 0..n {
            set_row(&mut x, i, &init);
        }
        Ok(Self {
            set,
            a,
            params,
            horizon,
            fed: 0,
            x,
            cheb_cur: DMatrix::zeros(n, d),
            cheb_prev: DMatrix::zeros(n, d),
            z_delayed: DMatrix::zeros(n, d),
            g_acc: DMatrix::zeros(n, d),
            zbar: DVector::zeros(d),
            rngs,
            telemetry: EngineTelemetry::default(),
        })
    }

    pub fn params(&self) -> EngineParams {
        self.params
    }

    fn block_end(&mut self, q: usize) -> Result<(), DocoError> {
        let n = self.nodes();
        let d = self.dimension();
        let l = self.params.l;
        let g = std::mem::replace(&mut self.g_acc, DMatrix::zeros(n, d));
        if q >= 2 {
            // The recursion buffer now holds this block's finalized history.
            let z_new = self.cheb_cur.clone();
            self.telemetry
                .z_consensus
                .push(max_row_distance(&z_new, &self.zbar));
            for i in 0..n {
                let mut avg = DVector::zeros(self.dimension());
                for _ in 0..l {
                    let mut c = uniform_ball(self.dimension(), &mut self.rngs[i]) * self.params.eta;
                    c -= row_vec(&self.z_delayed, i);
                    avg += self.set.lmo(&c)?;
                }
                set_row(&mut self.x, i, &(avg / l as f64));
            }
            self.z_delayed = z_new;
        }
        self.cheb_prev += &g;
        self.cheb_cur = &self.z_delayed + &g;
        self.zbar += column_mean(&g);
        Ok(())
    }
}

impl DocoEngine for AdOspa {
    fn name(&self) -> &'static str {
        "adospa"
    }

    fn nodes(&self) -> usize {
        self.a.nodes()
    }

    fn dimension(&self) -> usize {
        self.set.dimension()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn round(&self) -> usize {
        self.fed + 1
    }

    fn decision(&self, node: usize) -> DVector<f64> {
        row_vec(&self.x, node)
    }

    fn feed(&mut self, grads: &[DVector<f64>]) -> Result<(), DocoError> {
        let t = self.fed + 1;
        check_feed(grads, self.nodes(), self.dimension(), t, self.horizon)?;
        let l = self.params.l;
        let q = (t - 1) / l + 1;
        let k = (t - 1) % l;
        for (i, grad) in grads.iter().enumerate() {
            add_to_row(&mut self.g_acc, i, grad);
        }
        if q >= 2 && k < self.params.k {
            let next =
                chebyshev_gossip_step(&self.a, self.params.theta, &self.cheb_cur, &self.cheb_prev)?;
            self.cheb_prev = std::mem::replace(&mut self.cheb_cur, next);
            self.telemetry.exchanges += 1;
        }
        if k == l - 1 {
            self.block_end(q)?;
        }
        self.fed = t;
        Ok(())
    }

    fn telemetry(&self) -> &EngineTelemetry {
        &self.telemetry
    }
}

/// Blocked follow-the-perturbed-leader with half-block plain gossip.
///
/// Each block starts by drawing one ball perturbation per node and staging a
/// preparatory decision through the linear maximization oracle against the
/// gradient history finalized two blocks back. The block's first `L/2`
/// rounds gossip the staged decisions; the last `L/2` rounds gossip the
/// previous block's gradient sums. Both buffers are frozen at the block end.
#[derive(Debug)]
pub struct Dftpl {
    set: DecisionSet,
    a: MixingMatrix,
    params: EngineParams,
    horizon: usize,
    fed: usize,
    x: DMatrix<f64>,
    x_gossip: DMatrix<f64>,
    g_gossip: DMatrix<f64>,
    g_acc: DMatrix<f64>,
    /// Sum of gradient sums finalized at least two blocks back.
    cum_g: DMatrix<f64>,
    /// Mean preparatory decision of the block being gossiped.
    xbar_pending: DVector<f64>,
    rngs: Vec<ChaCha12Rng>,
    telemetry: EngineTelemetry,
}

impl Dftpl {
    pub fn new(
        set: DecisionSet,
        a: MixingMatrix,
        horizon: usize,
        params: EngineParams,
        rngs: Vec<ChaCha12Rng>,
    ) -> Result<Self, DocoError> {
        let n = a.nodes();
        let d = set.dimension();
        if params.l < 2 || params.l % 2 != 0 {
            return Err(DocoError::OddBlock(params.l));
        }
        if horizon == 0 || horizon % params.l != 0 {
            return Err(DocoError::IndivisibleHorizon(horizon, params.l));
        }
        if rngs.len() != n {
            return Err(DocoError::RngCount {
                nodes: n,
                got: rngs.len(),
            });
        }
        let init = set.initial_point();
        let mut x = DMatrix::zeros(n, d);
        for i in 0..n {
            set_row(&mut x, i, &init);
        }
        Ok(Self {
            set,
            a,
            params,
            horizon,
            fed: 0,
            x_gossip: x.clone(),
            x,
            g_gossip: DMatrix::zeros(n, d),
            g_acc: DMatrix::zeros(n, d),
            cum_g: DMatrix::zeros(n, d),
            xbar_pending: DVector::zeros(d),
            rngs,
            telemetry: EngineTelemetry::default(),
        })
    }

    pub fn params(&self) -> EngineParams {
        self.params
    }

    fn block_start(&mut self) -> Result<(), DocoError> {
        for i in 0..self.nodes() {
            let mut c = uniform_ball(self.dimension(), &mut self.rngs[i]) * self.params.eta;
            c -= row_vec(&self.cum_g, i);
            let prep = self.set.lmo(&c)?;
            set_row(&mut self.x_gossip, i, &prep);
        }
        self.xbar_pending = column_mean(&self.x_gossip);
        Ok(())
    }

    fn block_end(&mut self, q: usize) {
        if q >= 2 {
            self.telemetry
                .g_consensus
                .push(consensus_error(&self.g_gossip).max);
            self.cum_g += &self.g_gossip;
        }
        self.telemetry
            .x_consensus
            .push(max_row_distance(&self.x_gossip, &self.xbar_pending));
        self.x.copy_from(&self.x_gossip);
        self.g_gossip.copy_from(&self.g_acc);
        self.g_acc.fill(0.0);
    }
}

impl DocoEngine for Dftpl {
    fn name(&self) -> &'static str {
        "dftpl"
    }

    fn nodes(&self) -> usize {
        self.a.nodes()
    }

    fn dimension(&self) -> usize {
        self.set.dimension()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn round(&self) -> usize {
        self.fed + 1
    }

    fn decision(&self, node: usize) -> DVector<f64> {
        row_vec(&self.x, node)
    }

    fn feed(&mut self, grads: &[DVector<f64>]) -> Result<(), DocoError> {
        let t = self.fed + 1;
        check_feed(grads, self.nodes(), self.dimension(), t, self.horizon)?;
        let l = self.params.l;
        let q = (t - 1) / l + 1;
        let k_x = t - (q - 1) * l;
        if k_x == 1 {
            self.block_start()?;
        }
        for (i, grad) in grads.iter().enumerate() {
            add_to_row(&mut self.g_acc, i, grad);
        }
        if k_x <= l / 2 {
            self.x_gossip = gossip_step(&self.a, &self.x_gossip)?;
            self.telemetry.exchanges += 1;
        } else if q >= 2 {
            self.g_gossip = gossip_step(&self.a, &self.g_gossip)?;
            self.telemetry.exchanges += 1;
        }
        if k_x == l {
            self.block_end(q);
        }
        self.fed = t;
        Ok(())
    }

    fn telemetry(&self) -> &EngineTelemetry {
        &self.telemetry
    }
}
