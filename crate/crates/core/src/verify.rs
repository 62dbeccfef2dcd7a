//! Self-contained verification suites over the whole pipeline.
//!
//! Each suite draws its own named streams from one master seed, checks one
//! family of properties — surrogate inequalities, reward-family structure,
//! sampler laws, estimator means, gossip contraction, per-block consensus,
//! Frank-Wolfe feasibility, regret bounds, and the regret decomposition —
//! and reports a single pass/fail line with the worst margin it observed.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::doco::{default_params, AdOspa, Dftpl, DocoEngine, DocoError, Dogd, EngineTelemetry, Role};
use crate::eval::{ks_statistic, mc_mean_test, offline_opt};
use crate::network::{build_lazy_metropolis, consensus_error, gossip_step, spectral, Topology};
use crate::quadrature::GaussLegendre;
use crate::reductions::BoostingReduction;
use crate::rewards::{
    boosted_grad_monotone, boosted_grad_nonmonotone, check_dr_submodular, check_monotone,
    check_nonnegative, check_smooth, grad_f_numeric, make_sequence, z_density, z_from_p,
    z_prime_density, z_prime_from_p, BoostMode, QuadraticReward, RewardFamily,
};
use crate::rng::SeedStream;
use crate::sampling::uniform_ball;
use crate::sets::DecisionSet;

/// Outcome of one verification suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.details)
    }
}

type SuiteResult = Result<(bool, String), Box<dyn std::error::Error>>;

fn report(name: &'static str, result: SuiteResult) -> SuiteReport {
    match result {
        Ok((passed, details)) => SuiteReport {
            name,
            passed,
            details,
        },
        Err(e) => SuiteReport {
            name,
            passed: false,
            details: format!("error: {e}"),
        },
    }
}

/// Run every suite against one master seed.
pub fn all_suites(master: u64) -> Vec<SuiteReport> {
    vec![
        boosting_inequality_suite(master),
        reward_property_suite(master),
        sampler_suite(master),
        estimator_unbiasedness_suite(master),
        gossip_contraction_suite(master),
        perturbed_leader_consensus_suite(master),
        accelerated_consensus_suite(master),
        chain_feasibility_suite(master),
        linear_regret_bound_suite(master),
        regret_decomposition_suite(master),
    ]
}

fn one_off_reward<R: Rng>(
    d: usize,
    monotone: bool,
    rng: &mut R,
) -> Result<QuadraticReward, Box<dyn std::error::Error>> {
    let fam = RewardFamily {
        horizon: 1,
        nodes: 1,
        dimension: d,
        monotone,
        linear_scale: 1.0,
        linear_density: 0.9,
        curvature_scale: 0.8,
        curvature_density: 0.7,
        noise: 0.0,
    };
    Ok(make_sequence(&fam, rng)?.func(1, 0)?.clone())
}

fn random_feasible<R: Rng>(
    set: &DecisionSet,
    rng: &mut R,
) -> Result<DVector<f64>, Box<dyn std::error::Error>> {
    let raw = DVector::from_fn(set.dimension(), |_, _| rng.gen::<f64>());
    Ok(set.project(&raw)?)
}

/// The surrogate's linearization dominates the scaled reward gap on random
/// quadratic instances, for both the general and the monotone surrogates.
pub fn boosting_inequality_suite(master: u64) -> SuiteReport {
    report("boosting-inequality", (|| {
        let seeds = SeedStream::new(master);
        let mut rng = seeds.stream("verify.boost.inequality");
        let tol = 1e-6;
        let mut worst = f64::INFINITY;
        let trials = 1000;
        for k in 0..trials {
            let d = 1 + k % 5;
            let f = one_off_reward(d, false, &mut rng)?;
            let set = if k % 2 == 0 {
                let budget = 0.5 + rng.gen::<f64>() * (d as f64 - 0.5);
                DecisionSet::capped_simplex(d, budget)?
            } else {
                let lower = DVector::from_fn(d, |_, _| 0.3 * rng.gen::<f64>());
                let upper = DVector::from_fn(d, |j, _| {
                    (lower[j] + 0.3 + 0.7 * rng.gen::<f64>()).min(1.0)
                });
                DecisionSet::box_set(lower, upper)?
            };
            let x = random_feasible(&set, &mut rng)?;
            let y = random_feasible(&set, &mut rng)?;
            let x_inf = set.inf_norm_minimizer();
            let gf = grad_f_numeric(|p| f.grad(p), &x, x_inf, BoostMode::NonMonotone);
            let lhs = gf.dot(&(&y - &x));
            let alpha = (1.0 - set.nu()) / 4.0;
            let mid = (&x + x_inf) * 0.5;
            let slack = lhs - (alpha * f.value(&y) - f.value(&mid));
            worst = worst.min(slack);
        }
        for k in 0..trials {
            let d = 1 + k % 5;
            let f = one_off_reward(d, true, &mut rng)?;
            let set = if k % 2 == 0 {
                DecisionSet::unit_box(d)?
            } else {
                let budget = 0.5 + rng.gen::<f64>() * (d as f64 - 0.5);
                DecisionSet::capped_simplex(d, budget)?
            };
            let x = random_feasible(&set, &mut rng)?;
            let y = random_feasible(&set, &mut rng)?;
            let zeros = DVector::zeros(d);
            let gf = grad_f_numeric(|p| f.grad(p), &x, &zeros, BoostMode::Monotone);
            let lhs = gf.dot(&(&y - &x));
            let alpha = 1.0 - (-1.0f64).exp();
            let slack = lhs - (alpha * f.value(&y) - f.value(&x));
            worst = worst.min(slack);
        }
        Ok((
            worst >= -tol,
            format!("worst slack {worst:.3e} over {} instances", 2 * trials),
        ))
    })())
}

/// Structural checkers accept the generated reward families and reject a
/// planted positive-curvature-entry counterexample.
pub fn reward_property_suite(master: u64) -> SuiteReport {
    report("reward-properties", (|| {
        let seeds = SeedStream::new(master);
        let mut rng = seeds.stream("verify.reward.properties");
        let mut failures = 0usize;
        let mut first: Option<String> = None;
        let trials = 1000;
        for k in 0..trials {
            let d = 1 + k % 6;
            let monotone = k % 2 == 1;
            let f = one_off_reward(d, monotone, &mut rng)?;
            let mut outcomes = vec![
                ("diminishing returns", check_dr_submodular(&f, 24, &mut rng)),
                ("nonnegativity", check_nonnegative(&f, 24, &mut rng)),
                ("smoothness", check_smooth(&f, f.smoothness(), 16, &mut rng)),
            ];
            if monotone {
                outcomes.push(("monotonicity", check_monotone(&f, 24, &mut rng)));
            }
            for (what, outcome) in outcomes {
                if !outcome.ok {
                    failures += 1;
                    if first.is_none() {
                        first = Some(format!(
                            "{what} violated by {:.3e} on instance {k}",
                            outcome.worst_violation
                        ));
                    }
                }
            }
        }
        let mut planted = DMatrix::zeros(3, 3);
        planted[(0, 1)] = 0.4;
        planted[(1, 0)] = 0.4;
        let bad = QuadraticReward {
            curvature: Some(planted),
            linear: DVector::from_element(3, 1.0),
            offset: 0.0,
        };
        let rejected = !check_dr_submodular(&bad, 400, &mut rng).ok;
        let passed = failures == 0 && rejected;
        let details = match (&first, rejected) {
            (Some(msg), _) => format!("{failures} checker failures; first: {msg}"),
            (None, false) => "planted positive-curvature instance was not rejected".to_string(),
            (None, true) => format!(
                "{trials} instances accepted, planted counterexample rejected"
            ),
        };
        Ok((passed, details))
    })())
}

fn bisect_cdf<F: Fn(f64) -> f64>(cdf: F, p: f64) -> f64 {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Scale samplers follow their quadrature CDFs, and the closed-form
/// quantiles match quadrature inversion.
pub fn sampler_suite(master: u64) -> SuiteReport {
    report("scale-samplers", (|| {
        let seeds = SeedStream::new(master);
        let gl = GaussLegendre::new(200);
        let cdf_z = |u: f64| {
            if u <= 0.0 {
                0.0
            } else {
                u * gl.integrate(|x| z_density(u * x))
            }
        };
        let cdf_zp = |u: f64| {
            if u <= 0.0 {
                0.0
            } else {
                u * gl.integrate(|x| z_prime_density(u * x))
            }
        };
        let n = 100_000;
        let mut rng = seeds.stream("verify.sampler.z");
        let draws: Vec<f64> = (0..n)
            .map(|_| z_from_p(rng.gen::<f64>()))
            .collect();
        let ks_z = ks_statistic(&draws, cdf_z)?;
        let mut rng = seeds.stream("verify.sampler.zprime");
        let draws: Vec<f64> = (0..n)
            .map(|_| z_prime_from_p(rng.gen::<f64>()))
            .collect();
        let ks_zp = ks_statistic(&draws, cdf_zp)?;
        let mut worst_inv = 0.0f64;
        for k in 0..1000 {
            let p = (k as f64 + 0.5) / 1000.0;
            worst_inv = worst_inv.max((z_from_p(p) - bisect_cdf(cdf_z, p)).abs());
            worst_inv = worst_inv.max((z_prime_from_p(p) - bisect_cdf(cdf_zp, p)).abs());
        }
        let passed = ks_z < 0.02 && ks_zp < 0.02 && worst_inv <= 1e-8;
        Ok((
            passed,
            format!("KS {ks_z:.4}/{ks_zp:.4} at {n} draws, worst quantile gap {worst_inv:.2e}"),
        ))
    })())
}

/// Monte Carlo means of both boosted estimators match the quadrature
/// surrogate gradient coordinatewise within four standard errors.
pub fn estimator_unbiasedness_suite(master: u64) -> SuiteReport {
    report("estimator-unbiasedness", (|| {
        let seeds = SeedStream::new(master);
        let d = 3;
        let samples_per_point = 100_000;
        let points = 20;
        let mut all_ok = true;
        let mut checked = 0usize;
        for mode in [BoostMode::NonMonotone, BoostMode::Monotone] {
            for k in 0..points {
                let tag = match mode {
                    BoostMode::NonMonotone => "general",
                    BoostMode::Monotone => "monotone",
                };
                let mut rng = seeds.indexed(&format!("verify.estimator.{tag}"), k);
                let fam = RewardFamily {
                    horizon: 1,
                    nodes: 1,
                    dimension: d,
                    monotone: mode == BoostMode::Monotone,
                    linear_scale: 1.0,
                    linear_density: 1.0,
                    curvature_scale: 0.8,
                    curvature_density: 0.7,
                    noise: 0.2,
                };
                let seq = make_sequence(&fam, &mut rng)?;
                let x_hat = DVector::from_fn(d, |_, _| rng.gen::<f64>());
                let zeros = DVector::zeros(d);
                let f = seq.func(1, 0)?.clone();
                let target = grad_f_numeric(|p| f.grad(p), &x_hat, &zeros, mode);
                let mut samples = Vec::with_capacity(samples_per_point);
                for _ in 0..samples_per_point {
                    let est = match mode {
                        BoostMode::NonMonotone => {
                            boosted_grad_nonmonotone(&seq, 1, 0, &x_hat, &zeros, &mut rng)?.1
                        }
                        BoostMode::Monotone => {
                            boosted_grad_monotone(&seq, 1, 0, &x_hat, &mut rng)?.1
                        }
                    };
                    samples.push(est);
                }
                if !mc_mean_test(&samples, &target, 4.0)? {
                    all_ok = false;
                }
                checked += 1;
            }
        }
        Ok((
            all_ok,
            format!("{checked} query points x {samples_per_point} draws within 4 SE"),
        ))
    })())
}

/// One gossip step contracts the consensus error by the second singular
/// value on random connected graphs.
pub fn gossip_contraction_suite(master: u64) -> SuiteReport {
    report("gossip-contraction", (|| {
        let seeds = SeedStream::new(master);
        let mut rng = seeds.stream("verify.gossip.contraction");
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..100 {
            let n = rng.gen_range(2..=32);
            let extra = rng.gen_range(0..n);
            let topo = Topology::random_connected(n, extra, &mut rng)?;
            let a = build_lazy_metropolis(&topo);
            let sigma2 = spectral(&a, 1, 1)?.sigma2;
            let d = rng.gen_range(1..=4);
            let x = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0));
            let before = consensus_error(&x).frobenius;
            let after = consensus_error(&gossip_step(&a, &x)?).frobenius;
            worst = worst.max(after - sigma2 * before);
        }
        Ok((
            worst <= 1e-10,
            format!("worst Frobenius excess {worst:.3e} over 100 graphs"),
        ))
    })())
}

fn seeded_losses(
    seeds: &SeedStream,
    name: &str,
    rounds: usize,
    nodes: usize,
    d: usize,
    g: f64,
) -> Vec<Vec<DVector<f64>>> {
    let mut rng = seeds.stream(name);
    (0..rounds)
        .map(|_| (0..nodes).map(|_| uniform_ball(d, &mut rng) * g).collect())
        .collect()
}

fn run_engine<E: DocoEngine>(
    engine: &mut E,
    losses: &[Vec<DVector<f64>>],
) -> Result<(), DocoError> {
    for per_node in losses {
        engine.feed(per_node)?;
    }
    Ok(())
}

/// Blocked perturbed-leader consensus: gossiped block gradients and staged
/// decisions stay within their advertised per-block deviation bounds.
pub fn perturbed_leader_consensus_suite(master: u64) -> SuiteReport {
    report("perturbed-leader-consensus", (|| {
        let seeds = SeedStream::new(master);
        let t = 2048usize;
        let (d, g) = (2usize, 1.0f64);
        let set = DecisionSet::capped_simplex(d, 1.0)?;
        let mut details = Vec::new();
        let mut passed = true;
        for (label, topo) in [("path3", Topology::path(3)?), ("ring8", Topology::ring(8)?)] {
            let a = build_lazy_metropolis(&topo);
            let n = topo.nodes();
            let profile = spectral(&a, t, 1)?;
            let params = default_params(&profile, g, d, t, Role::Dftpl)?;
            let padded = t.div_ceil(params.l) * params.l;
            let rngs: Vec<ChaCha12Rng> = (0..n)
                .map(|i| seeds.indexed(&format!("verify.plcons.{label}.node"), i))
                .collect();
            let mut engine = Dftpl::new(set.clone(), a, padded, params, rngs)?;
            let losses = seeded_losses(
                &seeds,
                &format!("verify.plcons.{label}.losses"),
                padded,
                n,
                d,
                g,
            );
            run_engine(&mut engine, &losses)?;
            let tele: &EngineTelemetry = engine.telemetry();
            let g_bound = 2.0 * params.l as f64 * g / t as f64;
            let x_bound = 2.0 * set.radius() / t as f64;
            let g_worst = tele.g_consensus.iter().cloned().fold(0.0, f64::max);
            let x_worst = tele.x_consensus.iter().cloned().fold(0.0, f64::max);
            if g_worst > g_bound + 1e-12 || x_worst > x_bound + 1e-12 {
                passed = false;
            }
            details.push(format!(
                "{label}: L={}, grad dev {g_worst:.2e}<=?{g_bound:.2e}, \
                 decision dev {x_worst:.2e}<=?{x_bound:.2e}",
                params.l
            ));
        }
        Ok((passed, details.join("; ")))
    })())
}

/// Accelerated dual-averaging consensus: the gossiped dual iterates stay
/// within three block-sums of the gradient bound on every block.
pub fn accelerated_consensus_suite(master: u64) -> SuiteReport {
    report("accelerated-consensus", (|| {
        let seeds = SeedStream::new(master);
        let t = 2048usize;
        let (d, g) = (2usize, 1.0f64);
        let set = DecisionSet::capped_simplex(d, 1.0)?;
        let mut details = Vec::new();
        let mut passed = true;
        for (label, topo) in [("path3", Topology::path(3)?), ("ring8", Topology::ring(8)?)] {
            let a = build_lazy_metropolis(&topo);
            let n = topo.nodes();
            let profile = spectral(&a, t, 1)?;
            let params = default_params(&profile, g, d, t, Role::LinearDoco)?;
            let padded = t.div_ceil(params.l) * params.l;
            let rngs: Vec<ChaCha12Rng> = (0..n)
                .map(|i| seeds.indexed(&format!("verify.acccons.{label}.node"), i))
                .collect();
            let mut engine = AdOspa::new(set.clone(), a, padded, params, rngs)?;
            let losses = seeded_losses(
                &seeds,
                &format!("verify.acccons.{label}.losses"),
                padded,
                n,
                d,
                g,
            );
            run_engine(&mut engine, &losses)?;
            let bound = 3.0 * params.l as f64 * g;
            let worst = engine
                .telemetry()
                .z_consensus
                .iter()
                .cloned()
                .fold(0.0, f64::max);
            if worst > bound + 1e-9 {
                passed = false;
            }
            details.push(format!(
                "{label}: L=K={}, dual dev {worst:.2e}<=?{bound:.1e}",
                params.l
            ));
        }
        Ok((passed, details.join("; ")))
    })())
}

/// Engine stub for feasibility fuzzing: every feed redraws each node's
/// decision as the linear-oracle corner of a random direction.
struct CornerEngine {
    set: DecisionSet,
    nodes: usize,
    horizon: usize,
    fed: usize,
    current: Vec<DVector<f64>>,
    rng: ChaCha12Rng,
    telemetry: EngineTelemetry,
}

impl CornerEngine {
    fn new(set: DecisionSet, nodes: usize, horizon: usize, mut rng: ChaCha12Rng) -> Self {
        let current = (0..nodes)
            .map(|_| Self::draw(&set, &mut rng))
            .collect();
        Self {
            set,
            nodes,
            horizon,
            fed: 0,
            current,
            rng,
            telemetry: EngineTelemetry::default(),
        }
    }

    fn draw(set: &DecisionSet, rng: &mut ChaCha12Rng) -> DVector<f64> {
        let dir = DVector::from_fn(set.dimension(), |_, _| rng.gen_range(-1.0..1.0));
        set.lmo(&dir).expect("direction has the set's dimension")
    }
}

impl DocoEngine for CornerEngine {
    fn name(&self) -> &'static str {
        "corner-stub"
    }

    fn nodes(&self) -> usize {
        self.nodes
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
        self.current[node].clone()
    }

    fn feed(&mut self, _grads: &[DVector<f64>]) -> Result<(), DocoError> {
        self.fed += 1;
        for i in 0..self.nodes {
            self.current[i] = Self::draw(&self.set, &mut self.rng);
        }
        Ok(())
    }

    fn telemetry(&self) -> &EngineTelemetry {
        &self.telemetry
    }
}

/// Every Frank-Wolfe chain point stays feasible on the capped simplex and
/// knapsack sets across seeded blocks of random corner decisions.
pub fn chain_feasibility_suite(master: u64) -> SuiteReport {
    report("chain-feasibility", (|| {
        use crate::reductions::Dmfw;
        let seeds = SeedStream::new(master);
        let (n, d, l) = (3usize, 4usize, 5usize);
        let blocks = 500usize;
        let horizon = blocks * l;
        let mut rng = seeds.stream("verify.chain.weights");
        let weights = DVector::from_fn(d, |_, _| 0.5 + 1.5 * rng.gen::<f64>());
        let sets = [
            ("capped-simplex", DecisionSet::capped_simplex(d, 1.5)?),
            ("knapsack", DecisionSet::knapsack(weights, 2.0)?),
        ];
        let fam = RewardFamily {
            horizon,
            nodes: n,
            dimension: d,
            monotone: true,
            linear_scale: 1.0,
            linear_density: 0.8,
            curvature_scale: 0.5,
            curvature_density: 0.5,
            noise: 0.1,
        };
        let mut checked = 0usize;
        let mut infeasible = 0usize;
        for (label, set) in sets {
            let seq = make_sequence(
                &fam,
                &mut seeds.stream(&format!("verify.chain.{label}.rewards")),
            )?;
            let engines: Vec<CornerEngine> = (0..l)
                .map(|k| {
                    CornerEngine::new(
                        set.clone(),
                        n,
                        blocks,
                        seeds.indexed(&format!("verify.chain.{label}.engine"), k),
                    )
                })
                .collect();
            let grad_rngs: Vec<ChaCha12Rng> = (0..n)
                .map(|i| seeds.indexed(&format!("verify.chain.{label}.grad"), i))
                .collect();
            let mut dmfw = Dmfw::new(
                engines,
                set.clone(),
                horizon,
                seeds.stream(&format!("verify.chain.{label}.permutation")),
                grad_rngs,
            )?;
            let audit = |dmfw: &Dmfw<CornerEngine>, checked: &mut usize, bad: &mut usize| {
                for stage in dmfw.chain() {
                    for point in stage {
                        *checked += 1;
                        if !set.contains_tol(point, 1e-12) {
                            *bad += 1;
                        }
                    }
                }
            };
            audit(&dmfw, &mut checked, &mut infeasible);
            for _ in 0..horizon {
                dmfw.feed(&seq)?;
                audit(&dmfw, &mut checked, &mut infeasible);
            }
        }
        Ok((
            infeasible == 0,
            format!("{checked} chain points audited, {infeasible} infeasible"),
        ))
    })())
}

/// Final regrets on fixed seeded linear losses stay under the engines'
/// closed-form bounds at every node, averaged over 20 perturbation seeds.
pub fn linear_regret_bound_suite(master: u64) -> SuiteReport {
    report("linear-regret-bounds", (|| {
        let seeds = SeedStream::new(master);
        let (d, g, seeds_per_cfg) = (2usize, 1.0f64, 20usize);
        let set = DecisionSet::capped_simplex(d, 1.0)?;
        let r = set.radius();
        let mut details = Vec::new();
        let mut passed = true;
        for (label, topo) in [("path3", Topology::path(3)?), ("ring8", Topology::ring(8)?)] {
            let a = build_lazy_metropolis(&topo);
            let n = topo.nodes();
            let nf = n as f64;
            for t in [512usize, 2048] {
                let profile = spectral(&a, t, 1)?;
                let p_ftpl = default_params(&profile, g, d, t, Role::Dftpl)?;
                let p_ospa = default_params(&profile, g, d, t, Role::LinearDoco)?;
                let pad_ftpl = t.div_ceil(p_ftpl.l) * p_ftpl.l;
                let pad_ospa = t.div_ceil(p_ospa.l) * p_ospa.l;
                let losses = seeded_losses(
                    &seeds,
                    &format!("verify.linregret.{label}.{t}.losses"),
                    pad_ftpl.max(pad_ospa),
                    n,
                    d,
                    g,
                );
                let round_sums: Vec<DVector<f64>> = losses
                    .iter()
                    .map(|per_node| {
                        per_node.iter().fold(DVector::zeros(d), |acc, c| acc + c)
                    })
                    .collect();
                let c_total: DVector<f64> =
                    round_sums[..t].iter().fold(DVector::zeros(d), |acc, c| acc + c);
                let best = c_total.dot(&set.lmo(&(-&c_total))?);
                let lf = p_ftpl.l as f64;
                let cf = p_ospa.l as f64;
                let bound_ftpl = 5.0 * nf * r * g * (d as f64 * t as f64 * lf).sqrt()
                    + 4.0 * nf * lf * g * r
                    + 6.0 * nf * g * r;
                let bound_ospa =
                    8.0 * nf * (d as f64 * t as f64 * cf).sqrt() * r * g + 4.0 * nf * cf * r * g;
                for (engine_label, pad, bound) in [
                    ("perturbed-leader", pad_ftpl, bound_ftpl),
                    ("accelerated", pad_ospa, bound_ospa),
                ] {
                    let mut mean_regret = vec![0.0f64; n];
                    for s in 0..seeds_per_cfg {
                        let rngs: Vec<ChaCha12Rng> = (0..n)
                            .map(|i| {
                                seeds.indexed(
                                    &format!(
                                        "verify.linregret.{label}.{t}.{engine_label}.{s}.node"
                                    ),
                                    i,
                                )
                            })
                            .collect();
                        let mut engine: Box<dyn DocoEngine> = match engine_label {
                            "perturbed-leader" => Box::new(Dftpl::new(
                                set.clone(),
                                a.clone(),
                                pad,
                                p_ftpl,
                                rngs,
                            )?),
                            _ => Box::new(AdOspa::new(set.clone(), a.clone(), pad, p_ospa, rngs)?),
                        };
                        let mut cum = vec![0.0f64; n];
                        for round in 1..=pad {
                            if round <= t {
                                for (i, c) in cum.iter_mut().enumerate() {
                                    *c += round_sums[round - 1].dot(&engine.decision(i));
                                }
                            }
                            engine.feed(&losses[round - 1])?;
                        }
                        for i in 0..n {
                            mean_regret[i] += (cum[i] - best) / seeds_per_cfg as f64;
                        }
                    }
                    let worst = mean_regret.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    if worst > bound {
                        passed = false;
                        details.push(format!(
                            "{label} T={t} {engine_label}: regret {worst:.1} EXCEEDS {bound:.1}"
                        ));
                    } else {
                        details.push(format!(
                            "{label} T={t} {engine_label}: {worst:.1}<={bound:.0}"
                        ));
                    }
                }
            }
        }
        Ok((passed, details.join("; ")))
    })())
}

/// The α-regret of boosted runs is dominated by the inner linear regret
/// plus the gradient bound times the preparatory consensus error.
pub fn regret_decomposition_suite(master: u64) -> SuiteReport {
    report("regret-decomposition", (|| {
        let seeds = SeedStream::new(master);
        let (t, d, n_seeds) = (256usize, 2usize, 20usize);
        let topo = Topology::ring(4)?;
        let n = topo.nodes();
        let a = build_lazy_metropolis(&topo);
        let set = DecisionSet::capped_simplex(d, 1.0)?;
        let fam = RewardFamily {
            horizon: t,
            nodes: n,
            dimension: d,
            monotone: false,
            linear_scale: 1.0,
            linear_density: 1.0,
            curvature_scale: 0.5,
            curvature_density: 0.5,
            noise: 0.1,
        };
        let mut mean_lhs = 0.0f64;
        let mut mean_rhs = 0.0f64;
        let samples = (n_seeds * n) as f64;
        for s in 0..n_seeds {
            let seq = make_sequence(
                &fam,
                &mut seeds.stream(&format!("verify.decomp.{s}.rewards")),
            )?;
            let opt = offline_opt(&seq, &set, 1.0 / 200.0)?;
            let engine = Dogd::new(set.clone(), a.clone(), t, seq.g())?;
            let rngs: Vec<ChaCha12Rng> = (0..n)
                .map(|i| seeds.indexed(&format!("verify.decomp.{s}.node"), i))
                .collect();
            let mut reduction =
                BoostingReduction::new(engine, BoostMode::NonMonotone, &set, rngs)?;
            let alpha = reduction.alpha();
            let mut cum = vec![0.0f64; n];
            let mut inner = vec![0.0f64; n];
            let mut inner_star = 0.0f64;
            let mut cons = vec![0.0f64; n];
            for round in 1..=t {
                let out = reduction.boost_round(&seq)?;
                let s_t = out.fed.iter().fold(DVector::zeros(d), |acc, f| acc + f);
                inner_star += s_t.dot(&opt.point);
                for i in 0..n {
                    cum[i] += seq.round_value(round, &out.played[i])?;
                    inner[i] += s_t.dot(&out.prepared[i]);
                    for j in 0..n {
                        cons[i] += (&out.prepared[j] - &out.prepared[i]).norm();
                    }
                }
            }
            for i in 0..n {
                mean_lhs += (alpha * opt.value - cum[i]) / samples;
                mean_rhs += (inner[i] - inner_star + seq.g() * cons[i]) / samples;
            }
        }
        Ok((
            mean_lhs <= mean_rhs + 1e-6,
            format!("mean regret {mean_lhs:.3} <=? decomposed bound {mean_rhs:.3}"),
        ))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_render_as_single_lines() {
        let ok = SuiteReport {
            name: "demo",
            passed: true,
            details: "fine".into(),
        };
        let bad = SuiteReport {
            name: "demo",
            passed: false,
            details: "broken".into(),
        };
        assert_eq!(ok.to_string(), "PASS demo: fine");
        assert_eq!(bad.to_string(), "FAIL demo: broken");
    }

    #[test]
    fn gossip_contraction_suite_passes() {
        let report = gossip_contraction_suite(20240915);
        assert!(report.passed, "{report}");
    }

    #[test]
    fn reward_property_suite_accepts_families_and_rejects_the_plant() {
        let report = reward_property_suite(20240915);
        assert!(report.passed, "{report}");
    }
}
