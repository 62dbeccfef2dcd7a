//! Quadratic DR-submodular reward sequences and boosted gradient oracles.
//!
//! Each reward is `f(x) = x'Hx/2 + h'x + c0` on the unit cube with a
//! symmetric entrywise-nonpositive `H`, which certifies continuous
//! DR-submodularity. The generator produces one reward per (round, node)
//! pair in two flavors:
//!
//! * non-monotone: `h` unrestricted, `c0 = ‖h‖₁ + Σ|H_ij|` keeps values
//!   nonnegative on the cube;
//! * monotone: `c0 = 0` and `h ≥ -H·1`, so the gradient is nonnegative on
//!   the cube and `f(0) = 0`.
//!
//! A stochastic first-order oracle adds isotropic mean-zero noise of norm
//! at most the configured scale; the sequence's `g` bounds the noisy
//! gradient uniformly.
//!
//! The boosting samplers draw the surrogate scale `z` by inverse CDF:
//! `z = 2(1 - (3p + 1)^{-1/2})` for the non-monotone weight
//! `(1 - u/2)^{-3}/3` and `z = 1 + ln(p(1 - 1/e) + 1/e)` for the monotone
//! weight `e^{u-1}/(1 - 1/e)`. The matching surrogate gradients are
//! `(3/8)·∇f((z/2)(x - x̲) + x̲)` and `(1 - 1/e)·∇f(z·x)`; the quadrature
//! oracle integrates the same weights exactly for verification.

use crate::quadrature::GaussLegendre;
use crate::sampling::uniform_ball;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("round {0} out of range for horizon {1}")]
    RoundOutOfRange(usize, usize),
    #[error("node {0} out of range for {1} nodes")]
    NodeOutOfRange(usize, usize),
    #[error("query point of dimension {0} for rewards of dimension {1}")]
    DimensionMismatch(usize, usize),
    #[error("query point leaves the unit cube: coordinate {0} = {1}")]
    OutOfDomain(usize, f64),
    #[error("invalid family parameter: {0}")]
    InvalidFamily(String),
}

/// `f(x) = x'Hx/2 + h'x + c0` with symmetric entrywise-nonpositive `H`.
/// A `None` curvature stands for the zero matrix, so purely linear reward
/// sequences stay cheap to store and evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticReward {
    pub curvature: Option<DMatrix<f64>>,
    pub linear: DVector<f64>,
    pub offset: f64,
}

impl QuadraticReward {
    pub fn linear_only(linear: DVector<f64>, offset: f64) -> Self {
        QuadraticReward { curvature: None, linear, offset }
    }

    pub fn dimension(&self) -> usize {
        self.linear.len()
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let mut v = self.linear.dot(x) + self.offset;
        if let Some(h) = &self.curvature {
            v += 0.5 * x.dot(&(h * x));
        }
        v
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.curvature {
            Some(h) => h * x + &self.linear,
            None => self.linear.clone(),
        }
    }

    /// Uniform bound on `‖∇f‖` over the unit cube: since `H ≤ 0`, each
    /// partial ranges over `[h_j + (H·1)_j, h_j]`.
    pub fn grad_bound(&self) -> f64 {
        let low = match &self.curvature {
            Some(h) => h * DVector::from_element(self.dimension(), 1.0) + &self.linear,
            None => self.linear.clone(),
        };
        let mut acc = 0.0;
        for j in 0..self.dimension() {
            let m = self.linear[j].abs().max(low[j].abs());
            acc += m * m;
        }
        acc.sqrt()
    }

    /// Exact smoothness constant `‖H‖₂` (spectral norm).
    pub fn smoothness(&self) -> f64 {
        match &self.curvature {
            Some(h) => {
                let eigen = nalgebra::SymmetricEigen::new(h.clone());
                eigen.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            }
            None => 0.0,
        }
    }
}

/// Generation parameters for a reward sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardFamily {
    pub horizon: usize,
    pub nodes: usize,
    pub dimension: usize,
    pub monotone: bool,
    /// Scale of the linear coefficients.
    pub linear_scale: f64,
    /// Probability that a coordinate of `h` is active at each (round, node).
    pub linear_density: f64,
    /// Scale of the (nonpositive) curvature entries.
    pub curvature_scale: f64,
    /// Probability that an (i, j) curvature entry is active.
    pub curvature_density: f64,
    /// Bound on the stochastic gradient noise norm.
    pub noise: f64,
}

impl RewardFamily {
    fn validate(&self) -> Result<(), RewardError> {
        if self.horizon == 0 || self.nodes == 0 || self.dimension == 0 {
            return Err(RewardError::InvalidFamily(
                "horizon, nodes and dimension must be positive".into(),
            ));
        }
        for (name, v) in [
            ("linear_scale", self.linear_scale),
            ("curvature_scale", self.curvature_scale),
            ("noise", self.noise),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(RewardError::InvalidFamily(format!("{name} must be >= 0, got {v}")));
            }
        }
        for (name, v) in [
            ("linear_density", self.linear_density),
            ("curvature_density", self.curvature_density),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(RewardError::InvalidFamily(format!(
                    "{name} must be in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A full `(round, node)`-indexed sequence plus its aggregates.
#[derive(Debug, Clone)]
pub struct RewardSequence {
    horizon: usize,
    nodes: usize,
    dimension: usize,
    monotone: bool,
    noise: f64,
    /// Uniform stochastic gradient bound: worst per-reward gradient norm
    /// over the cube plus the noise scale.
    g: f64,
    /// Largest smoothness constant in the sequence.
    beta: f64,
    funcs: Vec<QuadraticReward>,
    /// Per-round network-level sums (over nodes) for fast evaluation.
    round_linear: Vec<DVector<f64>>,
    round_offset: Vec<f64>,
    round_curvature: Option<Vec<DMatrix<f64>>>,
    /// Whole-horizon sum for offline optimization.
    total: QuadraticReward,
}

impl RewardSequence {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn func(&self, t: usize, node: usize) -> Result<&QuadraticReward, RewardError> {
        if t == 0 || t > self.horizon {
            return Err(RewardError::RoundOutOfRange(t, self.horizon));
        }
        if node >= self.nodes {
            return Err(RewardError::NodeOutOfRange(node, self.nodes));
        }
        Ok(&self.funcs[(t - 1) * self.nodes + node])
    }

    /// Sum of all per-node rewards of round `t`, evaluated at `x`.
    pub fn round_value(&self, t: usize, x: &DVector<f64>) -> Result<f64, RewardError> {
        if t == 0 || t > self.horizon {
            return Err(RewardError::RoundOutOfRange(t, self.horizon));
        }
        let mut v = self.round_linear[t - 1].dot(x) + self.round_offset[t - 1];
        if let Some(curv) = &self.round_curvature {
            v += 0.5 * x.dot(&(&curv[t - 1] * x));
        }
        Ok(v)
    }

    /// Whole-horizon network sum `Σ_t Σ_i f_t^i`.
    pub fn total(&self) -> &QuadraticReward {
        &self.total
    }

    pub fn grad(&self, t: usize, node: usize, x: &DVector<f64>) -> Result<DVector<f64>, RewardError> {
        let f = self.func(t, node)?;
        check_domain(x, self.dimension)?;
        Ok(f.grad(x))
    }

    /// Noisy gradient: `∇f + ξ` with `ξ` uniform in a ball of the noise
    /// radius, so `‖result‖ ≤ g` always.
    pub fn stoch_grad<R: Rng>(
        &self,
        t: usize,
        node: usize,
        x: &DVector<f64>,
        rng: &mut R,
    ) -> Result<DVector<f64>, RewardError> {
        let mut g = self.grad(t, node, x)?;
        if self.noise > 0.0 {
            g += uniform_ball(self.dimension, rng) * self.noise;
        }
        Ok(g)
    }
}

fn check_domain(x: &DVector<f64>, d: usize) -> Result<(), RewardError> {
    if x.len() != d {
        return Err(RewardError::DimensionMismatch(x.len(), d));
    }
    for j in 0..d {
        if x[j] < -1e-9 || x[j] > 1.0 + 1e-9 {
            return Err(RewardError::OutOfDomain(j, x[j]));
        }
    }
    Ok(())
}

/// Draw one seeded sequence from the family.
pub fn make_sequence<R: Rng>(family: &RewardFamily, rng: &mut R) -> Result<RewardSequence, RewardError> {
    family.validate()?;
    let d = family.dimension;
    let t_len = family.horizon;
    let n = family.nodes;
    let any_curvature = family.curvature_density > 0.0 && family.curvature_scale > 0.0;
    let mut funcs = Vec::with_capacity(t_len * n);
    let mut round_linear = Vec::with_capacity(t_len);
    let mut round_offset = Vec::with_capacity(t_len);
    let mut round_curvature = if any_curvature { Some(Vec::with_capacity(t_len)) } else { None };
    let mut total_linear = DVector::zeros(d);
    let mut total_offset = 0.0;
    let mut total_curvature = DMatrix::zeros(d, d);
    let mut g: f64 = 0.0;
    let mut beta: f64 = 0.0;

    for _ in 0..t_len {
        let mut rl = DVector::zeros(d);
        let mut ro = 0.0;
        let mut rc = if any_curvature { Some(DMatrix::zeros(d, d)) } else { None };
        for _ in 0..n {
            let curv = if any_curvature {
                let mut m = DMatrix::zeros(d, d);
                for i in 0..d {
                    for j in i..d {
                        if rng.gen::<f64>() < family.curvature_density {
                            let w = -family.curvature_scale * rng.gen::<f64>();
                            m[(i, j)] = w;
                            m[(j, i)] = w;
                        }
                    }
                }
                Some(m)
            } else {
                None
            };
            let mut linear = DVector::zeros(d);
            for j in 0..d {
                if rng.gen::<f64>() < family.linear_density {
                    let mag = family.linear_scale * rng.gen::<f64>();
                    linear[j] = if family.monotone {
                        mag
                    } else if rng.gen::<bool>() {
                        mag
                    } else {
                        -mag
                    };
                }
            }
            let offset;
            if family.monotone {
                // shift so the gradient stays nonnegative on the cube
                if let Some(c) = &curv {
                    linear -= c * DVector::from_element(d, 1.0);
                }
                offset = 0.0;
            } else {
                let abs_h: f64 = linear.iter().map(|v| v.abs()).sum();
                let abs_curv: f64 = curv.as_ref().map_or(0.0, |c| c.iter().map(|v| v.abs()).sum());
                offset = abs_h + abs_curv;
            }
            let f = QuadraticReward { curvature: curv, linear, offset };
            g = g.max(f.grad_bound());
            if any_curvature {
                beta = beta.max(f.smoothness());
            }
            rl += &f.linear;
            ro += f.offset;
            if let (Some(rc), Some(fc)) = (rc.as_mut(), f.curvature.as_ref()) {
                *rc += fc;
            }
            funcs.push(f);
        }
        total_linear += &rl;
        total_offset += ro;
        if let Some(rc) = &rc {
            total_curvature += rc;
        }
        round_linear.push(rl);
        round_offset.push(ro);
        if let (Some(all), Some(rc)) = (round_curvature.as_mut(), rc) {
            all.push(rc);
        }
    }

    Ok(RewardSequence {
        horizon: t_len,
        nodes: n,
        dimension: d,
        monotone: family.monotone,
        noise: family.noise,
        g: g + family.noise,
        beta,
        funcs,
        round_linear,
        round_offset,
        round_curvature,
        total: QuadraticReward {
            curvature: any_curvature.then_some(total_curvature),
            linear: total_linear,
            offset: total_offset,
        },
    })
}

/// Surrogate mode: which correlation-free lower bound the boosting targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoostMode {
    NonMonotone,
    Monotone,
}

/// Inverse-CDF draw for the non-monotone surrogate scale.
pub fn sample_z<R: Rng>(rng: &mut R) -> f64 {
    let p: f64 = rng.gen();
    z_from_p(p)
}

pub fn z_from_p(p: f64) -> f64 {
    2.0 * (1.0 - (3.0 * p + 1.0).powf(-0.5))
}

pub fn z_density(u: f64) -> f64 {
    (1.0 - u / 2.0).powi(-3) / 3.0
}

pub fn z_cdf(u: f64) -> f64 {
    ((1.0 - u / 2.0).powi(-2) - 1.0) / 3.0
}

/// Inverse-CDF draw for the monotone surrogate scale.
pub fn sample_z_prime<R: Rng>(rng: &mut R) -> f64 {
    let p: f64 = rng.gen();
    z_prime_from_p(p)
}

pub fn z_prime_from_p(p: f64) -> f64 {
    let e_inv = (-1.0f64).exp();
    1.0 + (p * (1.0 - e_inv) + e_inv).ln()
}

pub fn z_prime_density(u: f64) -> f64 {
    (u - 1.0).exp() / (1.0 - (-1.0f64).exp())
}

pub fn z_prime_cdf(u: f64) -> f64 {
    let e_inv = (-1.0f64).exp();
    ((u - 1.0).exp() - e_inv) / (1.0 - e_inv)
}

/// One boosted-estimator draw: the sampled scale, the query point, and the
/// multiplier applied to the noisy gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostSample {
    pub z: f64,
    pub query: DVector<f64>,
    pub scale: f64,
}

/// Non-monotone estimator: query `(z/2)(x̂ - x̲) + x̲`, scale `3/8`.
pub fn boosted_grad_nonmonotone<R: Rng>(
    seq: &RewardSequence,
    t: usize,
    node: usize,
    x_hat: &DVector<f64>,
    x_inf: &DVector<f64>,
    rng: &mut R,
) -> Result<(BoostSample, DVector<f64>), RewardError> {
    let z = sample_z(rng);
    let query = x_inf + (x_hat - x_inf) * (z / 2.0);
    let est = seq.stoch_grad(t, node, &query, rng)? * 0.375;
    Ok((BoostSample { z, query, scale: 0.375 }, est))
}

/// Monotone estimator: query `z·x̂`, scale `1 - 1/e`.
pub fn boosted_grad_monotone<R: Rng>(
    seq: &RewardSequence,
    t: usize,
    node: usize,
    x_hat: &DVector<f64>,
    rng: &mut R,
) -> Result<(BoostSample, DVector<f64>), RewardError> {
    let z = sample_z_prime(rng);
    let query = x_hat * z;
    let scale = 1.0 - (-1.0f64).exp();
    let est = seq.stoch_grad(t, node, &query, rng)? * scale;
    Ok((BoostSample { z, query, scale }, est))
}

/// Deterministic surrogate gradient by 200-node Gauss-Legendre quadrature;
/// this is the verification oracle the sampled estimators are unbiased for.
pub fn grad_f_numeric<F>(grad: F, x: &DVector<f64>, x_inf: &DVector<f64>, mode: BoostMode) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let gl = GaussLegendre::new(200);
    let d = x.len();
    let mut acc = DVector::zeros(d);
    match mode {
        BoostMode::NonMonotone => {
            for (&z, &w) in gl.nodes.iter().zip(&gl.weights) {
                let point = x_inf + (x - x_inf) * (z / 2.0);
                let weight = w / (8.0 * (1.0 - z / 2.0).powi(3));
                acc += grad(&point) * weight;
            }
        }
        BoostMode::Monotone => {
            for (&z, &w) in gl.nodes.iter().zip(&gl.weights) {
                let point = x * z;
                let weight = w * (z - 1.0).exp();
                acc += grad(&point) * weight;
            }
        }
    }
    acc
}

/// Outcome of a randomized property check, with the worst violation seen.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub ok: bool,
    pub worst_violation: f64,
    pub witness: Option<String>,
}

const CHECK_TOL: f64 = 1e-9;

/// Randomized diminishing-returns check: for `x ≤ y` and a coordinate
/// step `z·e_j` staying in the cube, the gain at `x` must dominate the
/// gain at `y` up to tolerance.
pub fn check_dr_submodular<R: Rng>(f: &QuadraticReward, trials: usize, rng: &mut R) -> CheckOutcome {
    let d = f.dimension();
    let mut worst = 0.0f64;
    let mut witness = None;
    for _ in 0..trials {
        let y = DVector::from_fn(d, |_, _| rng.gen::<f64>());
        let x = DVector::from_fn(d, |j, _| y[j] * rng.gen::<f64>());
        let j = rng.gen_range(0..d);
        let room = 1.0 - y[j];
        let z = room * rng.gen::<f64>();
        let mut xz = x.clone();
        xz[j] += z;
        let mut yz = y.clone();
        yz[j] += z;
        let gain_low = f.value(&xz) - f.value(&x);
        let gain_high = f.value(&yz) - f.value(&y);
        let violation = gain_high - gain_low;
        if violation > worst {
            worst = violation;
            if violation > CHECK_TOL {
                witness = Some(format!(
                    "coordinate {j}, step {z:.6}: gain {gain_low:.6e} at the smaller point vs {gain_high:.6e}"
                ));
            }
        }
    }
    CheckOutcome {
        ok: worst <= CHECK_TOL,
        worst_violation: worst,
        witness,
    }
}

/// Randomized nonnegativity check over the cube.
pub fn check_nonnegative<R: Rng>(f: &QuadraticReward, trials: usize, rng: &mut R) -> CheckOutcome {
    let d = f.dimension();
    let mut worst = 0.0f64;
    let mut witness = None;
    for _ in 0..trials {
        let x = DVector::from_fn(d, |_, _| rng.gen::<f64>());
        let v = f.value(&x);
        if -v > worst {
            worst = -v;
            witness = Some(format!("f(x) = {v:.6e}"));
        }
    }
    CheckOutcome { ok: worst <= CHECK_TOL, worst_violation: worst, witness }
}

/// Randomized monotonicity check: gradients nonnegative on the cube.
pub fn check_monotone<R: Rng>(f: &QuadraticReward, trials: usize, rng: &mut R) -> CheckOutcome {
    let d = f.dimension();
    let mut worst = 0.0f64;
    let mut witness = None;
    for _ in 0..trials {
        let x = DVector::from_fn(d, |_, _| rng.gen::<f64>());
        let g = f.grad(&x);
        for j in 0..d {
            if -g[j] > worst {
                worst = -g[j];
                witness = Some(format!("partial {j} = {:.6e}", g[j]));
            }
        }
    }
    CheckOutcome { ok: worst <= CHECK_TOL, worst_violation: worst, witness }
}

/// Randomized smoothness check against a given constant.
pub fn check_smooth<R: Rng>(f: &QuadraticReward, beta: f64, trials: usize, rng: &mut R) -> CheckOutcome {
    let d = f.dimension();
    let mut worst = 0.0f64;
    let mut witness = None;
    for _ in 0..trials {
        let x = DVector::from_fn(d, |_, _| rng.gen::<f64>());
        let y = DVector::from_fn(d, |_, _| rng.gen::<f64>());
        let lhs = (f.grad(&x) - f.grad(&y)).norm();
        let rhs = beta * (&x - &y).norm();
        if lhs - rhs > worst {
            worst = lhs - rhs;
            witness = Some(format!("‖Δgrad‖ = {lhs:.6e} vs β‖Δx‖ = {rhs:.6e}"));
        }
    }
    CheckOutcome { ok: worst <= CHECK_TOL, worst_violation: worst, witness }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn small_family(monotone: bool) -> RewardFamily {
        RewardFamily {
            horizon: 6,
            nodes: 3,
            dimension: 4,
            monotone,
            linear_scale: 1.0,
            linear_density: 0.8,
            curvature_scale: 0.6,
            curvature_density: 0.5,
            noise: 0.25,
        }
    }

    #[test]
    fn sampler_frozen_values() {
        assert_abs_diff_eq!(z_from_p(0.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z_from_p(1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z_from_p(1.0 / 3.0), 2.0 - 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(z_prime_from_p(0.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z_prime_from_p(1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z_prime_from_p(0.5), 0.6201145069582775, epsilon = 1e-12);
    }

    #[test]
    fn samplers_invert_their_cdfs() {
        for p in [0.01, 0.2, 0.5, 0.77, 0.99] {
            assert_abs_diff_eq!(z_cdf(z_from_p(p)), p, epsilon = 1e-12);
            assert_abs_diff_eq!(z_prime_cdf(z_prime_from_p(p)), p, epsilon = 1e-12);
        }
        // densities match the CDFs numerically
        let gl = GaussLegendre::new(200);
        let c = 0.63;
        let q: f64 = gl.integrate(|u| if u <= c { z_density(u) } else { 0.0 });
        // crude because of the indicator; integrate on [0, c] instead by scaling
        let scaled: f64 = gl.integrate(|u| c * z_density(c * u));
        assert_abs_diff_eq!(scaled, z_cdf(c), epsilon = 1e-12);
        assert!(q <= 1.0);
        let scaled_p: f64 = gl.integrate(|u| c * z_prime_density(c * u));
        assert_abs_diff_eq!(scaled_p, z_prime_cdf(c), epsilon = 1e-12);
    }

    #[test]
    fn generated_sequences_satisfy_the_mode_contracts() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for monotone in [false, true] {
            let seq = make_sequence(&small_family(monotone), &mut rng).unwrap();
            let mut check_rng = ChaCha12Rng::seed_from_u64(99);
            for t in 1..=seq.horizon() {
                for i in 0..seq.nodes() {
                    let f = seq.func(t, i).unwrap();
                    // curvature stays entrywise nonpositive and symmetric
                    let curv = f.curvature.as_ref().unwrap();
                    for r in 0..f.dimension() {
                        for c in 0..f.dimension() {
                            assert!(curv[(r, c)] <= 0.0);
                            assert_eq!(curv[(r, c)], curv[(c, r)]);
                        }
                    }
                    assert!(check_dr_submodular(f, 40, &mut check_rng).ok);
                    assert!(check_nonnegative(f, 40, &mut check_rng).ok);
                    if monotone {
                        assert!(check_monotone(f, 40, &mut check_rng).ok);
                        assert_eq!(f.offset, 0.0);
                    }
                    assert!(check_smooth(f, seq.beta(), 20, &mut check_rng).ok);
                }
            }
        }
    }

    #[test]
    fn planted_positive_curvature_is_rejected() {
        let mut curv = DMatrix::zeros(3, 3);
        curv[(0, 1)] = 0.4;
        curv[(1, 0)] = 0.4;
        let f = QuadraticReward {
            curvature: Some(curv),
            linear: DVector::from_element(3, 0.5),
            offset: 2.0,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let out = check_dr_submodular(&f, 1000, &mut rng);
        assert!(!out.ok);
        assert!(out.worst_violation > 1e-3);
        assert!(out.witness.is_some());
    }

    #[test]
    fn stochastic_gradients_stay_bounded_and_centered() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let seq = make_sequence(&small_family(false), &mut rng).unwrap();
        let x = DVector::from_element(4, 0.3);
        let exact = seq.grad(2, 1, &x).unwrap();
        let m = 20_000;
        let mut acc = DVector::zeros(4);
        for _ in 0..m {
            let g = seq.stoch_grad(2, 1, &x, &mut rng).unwrap();
            assert!(g.norm() <= seq.g() + 1e-12);
            acc += g;
        }
        acc /= m as f64;
        let se = seq.noise() / (m as f64).sqrt();
        for j in 0..4 {
            assert!((acc[j] - exact[j]).abs() <= 5.0 * se);
        }
    }

    #[test]
    fn domain_violations_are_errors() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let seq = make_sequence(&small_family(false), &mut rng).unwrap();
        let bad = DVector::from_row_slice(&[1.5, 0.0, 0.0, 0.0]);
        assert!(matches!(
            seq.grad(1, 0, &bad),
            Err(RewardError::OutOfDomain(0, _))
        ));
        assert!(seq.func(0, 0).is_err());
        assert!(seq.func(7, 0).is_err());
        assert!(seq.func(1, 3).is_err());
    }

    #[test]
    fn quadrature_oracle_matches_closed_forms_for_linear_rewards() {
        // linear f: the non-monotone surrogate gradient is (3/8)h and the
        // monotone one is (1 - 1/e)h, independent of the query point.
        let h = DVector::from_row_slice(&[0.7, -0.3, 0.1]);
        let f = QuadraticReward::linear_only(h.clone(), 1.1);
        let x = DVector::from_row_slice(&[0.2, 0.8, 0.5]);
        let x_inf = DVector::zeros(3);
        let g_nm = grad_f_numeric(|p| f.grad(p), &x, &x_inf, BoostMode::NonMonotone);
        assert_abs_diff_eq!((g_nm - &h * 0.375).norm(), 0.0, epsilon = 1e-12);
        let g_m = grad_f_numeric(|p| f.grad(p), &x, &x_inf, BoostMode::Monotone);
        let scale = 1.0 - (-1.0f64).exp();
        assert_abs_diff_eq!((g_m - &h * scale).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn boosted_estimators_are_unbiased_for_the_quadrature_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let family = RewardFamily { noise: 0.15, ..small_family(false) };
        let seq = make_sequence(&family, &mut rng).unwrap();
        let x_inf = DVector::zeros(4);
        let x_hat = DVector::from_row_slice(&[0.2, 0.9, 0.4, 0.6]);
        let f = seq.func(3, 0).unwrap().clone();
        let target = grad_f_numeric(|p| f.grad(p), &x_hat, &x_inf, BoostMode::NonMonotone);
        let m = 60_000;
        let mut mean = DVector::zeros(4);
        let mut m2 = DVector::zeros(4);
        for _ in 0..m {
            let (_, est) = boosted_grad_nonmonotone(&seq, 3, 0, &x_hat, &x_inf, &mut rng).unwrap();
            mean += &est;
            m2 += est.component_mul(&est);
        }
        mean /= m as f64;
        for j in 0..4 {
            let var = (m2[j] / m as f64 - mean[j] * mean[j]).max(0.0);
            let se = (var / m as f64).sqrt();
            assert!(
                (mean[j] - target[j]).abs() <= 4.0 * se + 1e-12,
                "coordinate {j}: {} vs {}",
                mean[j],
                target[j]
            );
        }
    }

    #[test]
    fn monotone_estimator_matches_its_oracle_too() {
        let mut rng = ChaCha12Rng::seed_from_u64(37);
        let family = RewardFamily { noise: 0.1, ..small_family(true) };
        let seq = make_sequence(&family, &mut rng).unwrap();
        let x_hat = DVector::from_row_slice(&[0.5, 0.1, 0.8, 0.3]);
        let x_inf = DVector::zeros(4);
        let f = seq.func(1, 2).unwrap().clone();
        let target = grad_f_numeric(|p| f.grad(p), &x_hat, &x_inf, BoostMode::Monotone);
        let m = 60_000;
        let mut mean = DVector::zeros(4);
        let mut m2 = DVector::zeros(4);
        for _ in 0..m {
            let (s, est) = boosted_grad_monotone(&seq, 1, 2, &x_hat, &mut rng).unwrap();
            assert!(s.z >= 0.0 && s.z <= 1.0);
            mean += &est;
            m2 += est.component_mul(&est);
        }
        mean /= m as f64;
        for j in 0..4 {
            let var = (m2[j] / m as f64 - mean[j] * mean[j]).max(0.0);
            let se = (var / m as f64).sqrt();
            assert!((mean[j] - target[j]).abs() <= 4.0 * se + 1e-12);
        }
    }

    #[test]
    fn round_values_match_per_node_sums() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let seq = make_sequence(&small_family(false), &mut rng).unwrap();
        let x = DVector::from_row_slice(&[0.1, 0.6, 0.3, 0.9]);
        for t in 1..=seq.horizon() {
            let direct: f64 = (0..seq.nodes())
                .map(|i| seq.func(t, i).unwrap().value(&x))
                .sum();
            assert_abs_diff_eq!(seq.round_value(t, &x).unwrap(), direct, epsilon = 1e-10);
        }
        let total_direct: f64 = (1..=seq.horizon())
            .map(|t| seq.round_value(t, &x).unwrap())
            .sum();
        assert_abs_diff_eq!(seq.total().value(&x), total_direct, epsilon = 1e-9);
    }

    #[test]
    fn g_bounds_every_gradient_in_the_sequence() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let seq = make_sequence(&small_family(true), &mut rng).unwrap();
        for t in 1..=seq.horizon() {
            for i in 0..seq.nodes() {
                for _ in 0..50 {
                    let x = DVector::from_fn(4, |_, _| rng.gen::<f64>());
                    assert!(seq.grad(t, i, &x).unwrap().norm() <= seq.g() - seq.noise() + 1e-12);
                }
            }
        }
    }
}
