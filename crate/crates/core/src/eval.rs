//! Offline optimum oracles, α-regret traces, and the statistical helpers
//! behind sweeps and verification.
//!
//! The offline comparator maximizes the whole-horizon reward sum, a single
//! quadratic, with two oracles: an exhaustive grid (refused above four
//! dimensions) and 32 deterministic multi-start projected gradient ascents.
//! Their disagreement beyond the grid's Lipschitz slack is flagged.
//! [`RegretTrace`] assembles per-round, per-node reward and consensus series
//! into the canonical CSV layout and parses it back bit-for-bit.

use std::fmt::Write as _;

use log::warn;
use nalgebra::DVector;
use rand::Rng;
use thiserror::Error;

use crate::rewards::{QuadraticReward, RewardError, RewardSequence};
use crate::rng::SeedStream;
use crate::sets::{DecisionSet, SetError};

/// Fixed master seed for the ascent restarts, so the offline optimum is a
/// pure function of its arguments.
const ASCENT_SEED: u64 = 0x0a5c_e57a;
const ASCENT_STARTS: usize = 32;
const ASCENT_ITERS: usize = 2000;
const GRID_MAX_DIM: usize = 4;
/// Membership tolerance when intersecting the grid with the decision set.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("grid optimization refused in dimension {0} (limit {GRID_MAX_DIM})")]
    GridDimension(usize),
    #[error("grid resolution must lie in (0, 1], got {0}")]
    BadResolution(f64),
    #[error("no grid point is feasible")]
    EmptyGrid,
    #[error("empty sample set")]
    EmptySamples,
    #[error("log-log fit needs at least 4 usable horizons, got {usable}")]
    TooFewHorizons { usable: usize },
    #[error("inconsistent series: {0}")]
    BadSeries(String),
    #[error("trace csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

/// Which oracle produced the reported maximizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptMethod {
    Grid,
    MultiStartAscent,
}

/// Best feasible point found for the whole-horizon reward sum.
#[derive(Debug, Clone)]
pub struct OfflineOptimum {
    pub point: DVector<f64>,
    pub value: f64,
    pub method: OptMethod,
    /// Grid maximum, when the dimension admits a grid.
    pub grid_value: Option<f64>,
    /// Best ascent endpoint value.
    pub ascent_value: f64,
    /// Optimality-gap estimate: the grid's exact Lipschitz slack when a grid
    /// ran, otherwise the spread across ascent restarts (a stationarity
    /// diagnostic, not a certificate).
    pub gap: f64,
    /// Set when grid and ascent disagree by more than the Lipschitz slack.
    pub flagged: bool,
}

/// Exhaustive search over the uniform grid of the given spacing intersected
/// with the set. Returns the best point and its value.
pub fn grid_optimum(
    seq: &RewardSequence,
    set: &DecisionSet,
    resolution: f64,
) -> Result<(DVector<f64>, f64), EvalError> {
    let d = set.dimension();
    if d > GRID_MAX_DIM {
        return Err(EvalError::GridDimension(d));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(EvalError::BadResolution(resolution));
    }
    let total = seq.total();
    let steps = (1.0 / resolution).round().max(1.0) as usize;
    let coord = |k: usize| if k == steps { 1.0 } else { k as f64 * resolution };
    let mut idx = vec![0usize; d];
    let mut x = DVector::zeros(d);
    let mut best: Option<(DVector<f64>, f64)> = None;
    loop {
        for j in 0..d {
            x[j] = coord(idx[j]);
        }
        if set.contains_tol(&x, GRID_TOL) {
            let v = total.value(&x);
            if best.as_ref().map_or(true, |(_, bv)| v > *bv) {
                best = Some((x.clone(), v));
            }
        }
        let mut j = 0;
        loop {
            idx[j] += 1;
            if idx[j] <= steps {
                break;
            }
            idx[j] = 0;
            j += 1;
            if j == d {
                return best.ok_or(EvalError::EmptyGrid);
            }
        }
    }
}

/// One projected gradient ascent with step `1/β`; linear objectives are
/// solved exactly by the linear maximization oracle instead.
fn ascend(
    total: &QuadraticReward,
    set: &DecisionSet,
    beta: f64,
    start: &DVector<f64>,
) -> Result<(DVector<f64>, f64), EvalError> {
    if beta == 0.0 {
        let x = set.lmo(&total.linear)?;
        let v = total.value(&x);
        return Ok((x, v));
    }
    let step = 1.0 / beta;
    let mut x = set.project(start)?;
    for _ in 0..ASCENT_ITERS {
        let next = set.project(&(&x + total.grad(&x) * step))?;
        let moved = (&next - &x).norm();
        x = next;
        if moved <= 1e-13 * (1.0 + x.norm()) {
            break;
        }
    }
    let v = total.value(&x);
    Ok((x, v))
}

fn multi_start_ascent(
    seq: &RewardSequence,
    set: &DecisionSet,
    seed_start: Option<&DVector<f64>>,
) -> Result<(DVector<f64>, f64, f64), EvalError> {
    let total = seq.total();
    let beta = total.smoothness();
    let d = set.dimension();
    let mut rng = SeedStream::new(ASCENT_SEED).stream("offline.ascent");
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut worst = f64::INFINITY;
    for s in 0..ASCENT_STARTS {
        let start = if s == 0 {
            match seed_start {
                Some(x) => x.clone(),
                None => set.lmo(&total.linear)?,
            }
        } else {
            DVector::from_fn(d, |_, _| rng.gen::<f64>())
        };
        let (x, v) = ascend(total, set, beta, &start)?;
        worst = worst.min(v);
        if best.as_ref().map_or(true, |(_, bv)| v > *bv) {
            best = Some((x, v));
        }
    }
    let (x, v) = best.expect("at least one restart");
    Ok((x, v, v - worst))
}

/// Offline comparator for the whole-horizon reward sum: grid plus ascent in
/// up to four dimensions, ascent alone above that.
pub fn offline_opt(
    seq: &RewardSequence,
    set: &DecisionSet,
    resolution: f64,
) -> Result<OfflineOptimum, EvalError> {
    let d = set.dimension();
    if d <= GRID_MAX_DIM {
        let (gx, gv) = grid_optimum(seq, set, resolution)?;
        let (ax, av, _) = multi_start_ascent(seq, set, Some(&gx))?;
        let slack = seq.total().grad_bound() * resolution * (d as f64).sqrt();
        let (point, value, method) = if gv >= av {
            (gx, gv, OptMethod::Grid)
        } else {
            (ax, av, OptMethod::MultiStartAscent)
        };
        Ok(OfflineOptimum {
            point,
            value,
            method,
            grid_value: Some(gv),
            ascent_value: av,
            gap: slack,
            flagged: (gv - av).abs() > slack,
        })
    } else {
        let (ax, av, spread) = multi_start_ascent(seq, set, None)?;
        Ok(OfflineOptimum {
            point: ax,
            value: av,
            method: OptMethod::MultiStartAscent,
            grid_value: None,
            ascent_value: av,
            gap: spread,
            flagged: false,
        })
    }
}

/// Running maximum available to the comparator: cumulative network reward of
/// playing `x_star` through each prefix of the horizon.
pub fn opt_prefix(seq: &RewardSequence, x_star: &DVector<f64>) -> Result<Vec<f64>, EvalError> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(seq.horizon());
    for t in 1..=seq.horizon() {
        acc += seq.round_value(t, x_star)?;
        out.push(acc);
    }
    Ok(out)
}

/// Per-node α-regret series `R[t][i] = α·opt_prefix[t] − cum[t][i]`.
pub fn alpha_regret(
    cum: &[Vec<f64>],
    alpha: f64,
    opt_prefix: &[f64],
) -> Result<Vec<Vec<f64>>, EvalError> {
    if cum.len() != opt_prefix.len() {
        return Err(EvalError::BadSeries(format!(
            "{} cumulative rounds vs {} prefix optima",
            cum.len(),
            opt_prefix.len()
        )));
    }
    Ok(cum
        .iter()
        .zip(opt_prefix)
        .map(|(row, opt)| row.iter().map(|c| alpha * opt - c).collect())
        .collect())
}

/// Exact header of the trace CSV layout.
pub const TRACE_HEADER: &str =
    "round,node,algo,alpha,seed,inst_reward,cum_reward,alpha_regret,consensus_err";

/// One `(round, node)` record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub round: usize,
    pub node: usize,
    pub inst_reward: f64,
    pub cum_reward: f64,
    pub alpha_regret: f64,
    pub consensus_err: f64,
}

/// Full per-round, per-node record of one run, in round-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub algo: String,
    pub alpha: f64,
    pub seed: u64,
    pub nodes: usize,
    pub horizon: usize,
    pub rows: Vec<TraceRow>,
}

impl RegretTrace {
    /// Build the trace from instantaneous rewards, consensus deviations, and
    /// the comparator's prefix values; cumulative sums and regrets are
    /// derived here so their invariants hold by construction.
    pub fn assemble(
        algo: &str,
        alpha: f64,
        seed: u64,
        inst: &[Vec<f64>],
        consensus: &[Vec<f64>],
        opt_prefix: &[f64],
    ) -> Result<Self, EvalError> {
        if algo.is_empty() || algo.contains([',', '\n', '#']) {
            return Err(EvalError::BadSeries(format!(
                "algorithm tag {algo:?} is not CSV-safe"
            )));
        }
        let horizon = inst.len();
        if horizon == 0 {
            return Err(EvalError::BadSeries("no rounds".into()));
        }
        let nodes = inst[0].len();
        if nodes == 0 {
            return Err(EvalError::BadSeries("no nodes".into()));
        }
        if inst.iter().any(|row| row.len() != nodes)
            || consensus.len() != horizon
            || consensus.iter().any(|row| row.len() != nodes)
        {
            return Err(EvalError::BadSeries(
                "instantaneous and consensus series must be T rows of n entries".into(),
            ));
        }
        if opt_prefix.len() != horizon {
            return Err(EvalError::BadSeries(format!(
                "{} prefix optima for {horizon} rounds",
                opt_prefix.len()
            )));
        }
        let mut cum = vec![0.0f64; nodes];
        let mut rows = Vec::with_capacity(horizon * nodes);
        for t in 1..=horizon {
            for i in 0..nodes {
                cum[i] += inst[t - 1][i];
                rows.push(TraceRow {
                    round: t,
                    node: i,
                    inst_reward: inst[t - 1][i],
                    cum_reward: cum[i],
                    alpha_regret: alpha * opt_prefix[t - 1] - cum[i],
                    consensus_err: consensus[t - 1][i],
                });
            }
        }
        Ok(Self {
            algo: algo.to_string(),
            alpha,
            seed,
            nodes,
            horizon,
            rows,
        })
    }

    pub fn row(&self, t: usize, node: usize) -> &TraceRow {
        &self.rows[(t - 1) * self.nodes + node]
    }

    /// Final-round α-regret per node.
    pub fn final_regrets(&self) -> Vec<f64> {
        (0..self.nodes)
            .map(|i| self.row(self.horizon, i).alpha_regret)
            .collect()
    }

    /// α-regret of one node across all rounds.
    pub fn regret_series(&self, node: usize) -> Vec<f64> {
        (1..=self.horizon)
            .map(|t| self.row(t, node).alpha_regret)
            .collect()
    }

    /// Consensus deviation of one node across all rounds.
    pub fn consensus_series(&self, node: usize) -> Vec<f64> {
        (1..=self.horizon)
            .map(|t| self.row(t, node).consensus_err)
            .collect()
    }

    /// Render the canonical CSV: `#`-prefixed comment lines, the exact
    /// header, then one row per record with round-tripping float formatting
    /// and LF line endings.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.round,
                r.node,
                self.algo,
                self.alpha,
                self.seed,
                r.inst_reward,
                r.cum_reward,
                r.alpha_regret,
                r.consensus_err
            )
            .expect("writing to String cannot fail");
        }
        out
    }

    /// Parse a canonical CSV back. Comment lines are skipped; the header,
    /// the round-major ordering, the constant run metadata, and the exact
    /// cumulative sums are all enforced.
    pub fn from_csv(text: &str) -> Result<Self, EvalError> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| EvalError::Csv("empty file".into()))?;
        if header != TRACE_HEADER {
            return Err(EvalError::Csv(format!("unexpected header {header:?}")));
        }
        let mut meta: Option<(String, f64, u64)> = None;
        let mut rows: Vec<TraceRow> = Vec::new();
        for (k, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(EvalError::Csv(format!(
                    "row {k}: {} fields, expected 9",
                    fields.len()
                )));
            }
            let parse_usize = |s: &str, what: &str| {
                s.parse::<usize>()
                    .map_err(|e| EvalError::Csv(format!("row {k}: bad {what} {s:?}: {e}")))
            };
            let parse_f64 = |s: &str, what: &str| {
                s.parse::<f64>()
                    .map_err(|e| EvalError::Csv(format!("row {k}: bad {what} {s:?}: {e}")))
            };
            let round = parse_usize(fields[0], "round")?;
            let node = parse_usize(fields[1], "node")?;
            let algo = fields[2];
            let alpha = parse_f64(fields[3], "alpha")?;
            let seed = fields[4]
                .parse::<u64>()
                .map_err(|e| EvalError::Csv(format!("row {k}: bad seed {:?}: {e}", fields[4])))?;
            match &meta {
                None => meta = Some((algo.to_string(), alpha, seed)),
                Some((a, al, s)) => {
                    if a != algo || al.to_bits() != alpha.to_bits() || *s != seed {
                        return Err(EvalError::Csv(format!(
                            "row {k}: run metadata changes mid-file"
                        )));
                    }
                }
            }
            rows.push(TraceRow {
                round,
                node,
                inst_reward: parse_f64(fields[5], "inst_reward")?,
                cum_reward: parse_f64(fields[6], "cum_reward")?,
                alpha_regret: parse_f64(fields[7], "alpha_regret")?,
                consensus_err: parse_f64(fields[8], "consensus_err")?,
            });
        }
        let (algo, alpha, seed) = meta.ok_or_else(|| EvalError::Csv("no data rows".into()))?;
        let nodes = rows.iter().take_while(|r| r.round == 1).count();
        if nodes == 0 {
            return Err(EvalError::Csv("first row is not round 1".into()));
        }
        if rows.len() % nodes != 0 {
            return Err(EvalError::Csv(format!(
                "{} rows is not a multiple of {nodes} nodes",
                rows.len()
            )));
        }
        let horizon = rows.len() / nodes;
        for (k, r) in rows.iter().enumerate() {
            let (t, i) = (k / nodes + 1, k % nodes);
            if r.round != t || r.node != i {
                return Err(EvalError::Csv(format!(
                    "row {k}: expected round {t} node {i}, found round {} node {}",
                    r.round, r.node
                )));
            }
            let prev = if t == 1 { 0.0 } else { rows[k - nodes].cum_reward };
            if r.cum_reward != prev + r.inst_reward {
                return Err(EvalError::Csv(format!(
                    "row {k}: cumulative reward breaks the running sum"
                )));
            }
        }
        Ok(Self {
            algo,
            alpha,
            seed,
            nodes,
            horizon,
            rows,
        })
    }
}

/// Least-squares slope and intercept of `ln(regret)` against `ln(T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub used: usize,
    pub excluded: usize,
}

/// Fit the growth exponent of mean final regrets over horizons. Nonpositive
/// entries carry no log-scale information and are dropped with a warning.
pub fn sublinearity_fit(points: &[(f64, f64)]) -> Result<SlopeFit, EvalError> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, r)| *t > 0.0 && *r > 0.0)
        .map(|(t, r)| (t.ln(), r.ln()))
        .collect();
    let excluded = points.len() - usable.len();
    if excluded > 0 {
        warn!("dropped {excluded} nonpositive points from the log-log regret fit");
    }
    if usable.len() < 4 {
        return Err(EvalError::TooFewHorizons {
            usable: usable.len(),
        });
    }
    let n = usable.len() as f64;
    let mean_x = usable.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = usable.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in &usable {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: mean_y - slope * mean_x,
        used: usable.len(),
        excluded,
    })
}

/// Kolmogorov–Smirnov sup-distance between the empirical distribution of the
/// samples and the reference CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut sup = 0.0f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        sup = sup.max(((i + 1) as f64 / n - f).abs());
        sup = sup.max((f - i as f64 / n).abs());
    }
    Ok(sup)
}

/// Coordinatewise Monte Carlo mean test: accept when every coordinate of the
/// sample mean sits within `max_se` standard errors of the target.
pub fn mc_mean_test(
    samples: &[DVector<f64>],
    target: &DVector<f64>,
    max_se: f64,
) -> Result<bool, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptySamples);
    }
    let d = target.len();
    if samples.iter().any(|s| s.len() != d) {
        return Err(EvalError::BadSeries(
            "sample dimension differs from the target".into(),
        ));
    }
    let n = samples.len() as f64;
    let mut mean = DVector::zeros(d);
    for s in samples {
        mean += s;
    }
    mean /= n;
    let mut var = DVector::zeros(d);
    for s in samples {
        let dev = s - &mean;
        var += dev.component_mul(&dev);
    }
    if samples.len() > 1 {
        var /= n - 1.0;
    }
    for j in 0..d {
        let se = (var[j] / n).sqrt();
        if (mean[j] - target[j]).abs() > max_se * se + 1e-12 * (1.0 + target[j].abs()) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::{make_sequence, RewardFamily};
    use approx::assert_abs_diff_eq;

    fn family(monotone: bool, horizon: usize, nodes: usize, d: usize) -> RewardFamily {
        RewardFamily {
            horizon,
            nodes,
            dimension: d,
            monotone,
            linear_scale: 1.0,
            linear_density: 1.0,
            curvature_scale: 0.5,
            curvature_density: 0.6,
            noise: 0.0,
        }
    }

    #[test]
    fn zero_rewards_have_a_zero_optimum() {
        let mut fam = family(true, 4, 2, 2);
        fam.linear_scale = 0.0;
        fam.curvature_density = 0.0;
        let seq = make_sequence(&fam, &mut SeedStream::new(1).stream("rewards")).unwrap();
        let set = DecisionSet::capped_simplex(2, 1.0).unwrap();
        let opt = offline_opt(&seq, &set, 0.25).unwrap();
        assert_abs_diff_eq!(opt.value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(opt.grid_value.unwrap(), 0.0, epsilon = 1e-12);
        assert!(set.contains_tol(&opt.point, 1e-9));
        assert!(!opt.flagged);
    }

    #[test]
    fn linear_sums_are_maximized_at_the_greedy_corner() {
        let mut fam = family(false, 5, 2, 3);
        fam.curvature_density = 0.0;
        let seq = make_sequence(&fam, &mut SeedStream::new(2).stream("rewards")).unwrap();
        let set = DecisionSet::capped_simplex(3, 1.5).unwrap();
        let star = set.lmo(&seq.total().linear).unwrap();
        let opt = offline_opt(&seq, &set, 0.25).unwrap();
        assert_abs_diff_eq!(opt.value, seq.total().value(&star), epsilon = 1e-12);
        assert!((&opt.point - &star).norm() < 1e-9);
        assert!(set.contains_tol(&opt.point, 1e-9));
    }

    #[test]
    fn grid_and_ascent_agree_within_the_lipschitz_slack() {
        let seq = make_sequence(&family(false, 6, 3, 2), &mut SeedStream::new(3).stream("rewards"))
            .unwrap();
        let set = DecisionSet::capped_simplex(2, 1.0).unwrap();
        let res = 1.0 / 200.0;
        let opt = offline_opt(&seq, &set, res).unwrap();
        let slack = seq.total().grad_bound() * res * 2f64.sqrt();
        let gv = opt.grid_value.unwrap();
        assert!(gv <= opt.ascent_value + slack);
        assert!((gv - opt.ascent_value).abs() <= slack);
        assert!(!opt.flagged);
        assert!(set.contains_tol(&opt.point, 1e-9));
        assert_abs_diff_eq!(opt.gap, slack, epsilon = 0.0);
    }

    #[test]
    fn grids_are_refused_above_four_dimensions() {
        let seq = make_sequence(&family(true, 3, 2, 5), &mut SeedStream::new(4).stream("rewards"))
            .unwrap();
        let set = DecisionSet::unit_box(5).unwrap();
        assert!(matches!(
            grid_optimum(&seq, &set, 0.5).unwrap_err(),
            EvalError::GridDimension(5)
        ));
        let opt = offline_opt(&seq, &set, 0.5).unwrap();
        assert!(opt.grid_value.is_none());
        assert_eq!(opt.method, OptMethod::MultiStartAscent);
        assert!(set.contains_tol(&opt.point, 1e-9));
    }

    #[test]
    fn playing_the_comparator_pins_the_regret_to_alpha_minus_one() {
        let seq = make_sequence(&family(true, 8, 2, 2), &mut SeedStream::new(5).stream("rewards"))
            .unwrap();
        let set = DecisionSet::unit_box(2).unwrap();
        let opt = offline_opt(&seq, &set, 0.05).unwrap();
        let prefix = opt_prefix(&seq, &opt.point).unwrap();
        let inst: Vec<Vec<f64>> = (1..=8)
            .map(|t| vec![seq.round_value(t, &opt.point).unwrap(); 2])
            .collect();
        let consensus = vec![vec![0.0; 2]; 8];
        let alpha = 0.25;
        let trace = RegretTrace::assemble("demo", alpha, 7, &inst, &consensus, &prefix).unwrap();
        for r in trace.final_regrets() {
            assert_abs_diff_eq!(r, (alpha - 1.0) * prefix[7], epsilon = 1e-9);
            assert!(r <= 0.0);
        }
        let zero = RegretTrace::assemble("demo", 0.0, 7, &inst, &consensus, &prefix).unwrap();
        for t in 1..=8 {
            for i in 0..2 {
                let row = zero.row(t, i);
                assert_eq!(row.alpha_regret, -row.cum_reward);
                assert!(row.alpha_regret <= 0.0);
            }
        }
    }

    #[test]
    fn trace_csv_round_trips_byte_for_byte() {
        let inst = vec![
            vec![1.0 / 3.0, 2f64.sqrt()],
            vec![0.1, 1e-17],
            vec![std::f64::consts::PI, 0.0],
        ];
        let consensus = vec![vec![0.5, 0.25]; 3];
        let prefix = vec![1.0, 2.5, 4.125];
        let trace =
            RegretTrace::assemble("adospa", 0.25, 42, &inst, &consensus, &prefix).unwrap();
        assert_eq!(trace.rows.len(), 6);
        let comments = vec!["config 0123abcd".to_string()];
        let csv = trace.to_csv(&comments);
        assert!(csv.starts_with("# config 0123abcd\nround,node,"));
        assert!(!csv.contains('\r'));
        let parsed = RegretTrace::from_csv(&csv).unwrap();
        assert_eq!(parsed, trace);
        assert_eq!(parsed.to_csv(&comments), csv);
    }

    #[test]
    fn tampered_csv_files_are_rejected() {
        let inst = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let consensus = vec![vec![0.0, 0.0]; 2];
        let prefix = vec![2.0, 5.0];
        let trace = RegretTrace::assemble("dogd", 1.0, 1, &inst, &consensus, &prefix).unwrap();
        let csv = trace.to_csv(&[]);
        let bad_header = csv.replacen("alpha_regret", "regret", 1);
        assert!(RegretTrace::from_csv(&bad_header).is_err());
        let mut lines: Vec<&str> = csv.lines().collect();
        lines.pop();
        assert!(RegretTrace::from_csv(&lines.join("\n")).is_err());
        let tampered = csv.replacen("2,0,dogd,1,1,3,4,", "2,0,dogd,1,1,3,5,", 1);
        assert_ne!(tampered, csv);
        assert!(RegretTrace::from_csv(&tampered).is_err());
    }

    #[test]
    fn log_log_fit_recovers_exact_power_laws() {
        let horizons = [256.0f64, 512.0, 1024.0, 2048.0, 4096.0];
        for (expo, scale) in [(0.5f64, 3.0f64), (0.75, 0.2)] {
            let pts: Vec<(f64, f64)> =
                horizons.iter().map(|&t| (t, scale * t.powf(expo))).collect();
            let fit = sublinearity_fit(&pts).unwrap();
            assert_abs_diff_eq!(fit.slope, expo, epsilon = 1e-9);
            assert_abs_diff_eq!(fit.intercept, scale.ln(), epsilon = 1e-9);
            assert_eq!((fit.used, fit.excluded), (5, 0));
        }
    }

    #[test]
    fn nonpositive_regrets_are_dropped_from_the_fit() {
        let mut pts: Vec<(f64, f64)> = [256.0f64, 512.0, 1024.0, 2048.0]
            .iter()
            .map(|&t| (t, t.sqrt()))
            .collect();
        pts.push((4096.0, -3.0));
        let fit = sublinearity_fit(&pts).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.5, epsilon = 1e-9);
        assert_eq!((fit.used, fit.excluded), (4, 1));
        pts.truncate(3);
        pts.push((4096.0, 0.0));
        assert!(matches!(
            sublinearity_fit(&pts).unwrap_err(),
            EvalError::TooFewHorizons { usable: 3 }
        ));
    }

    #[test]
    fn ks_statistic_matches_hand_values_and_accepts_uniform_draws() {
        assert!(matches!(
            ks_statistic(&[], |x| x).unwrap_err(),
            EvalError::EmptySamples
        ));
        let d = ks_statistic(&[0.5], |x| x).unwrap();
        assert_abs_diff_eq!(d, 0.5, epsilon = 1e-15);
        let mut rng = SeedStream::new(6).stream("eval.uniform");
        let samples: Vec<f64> = (0..100_000).map(|_| rng.gen::<f64>()).collect();
        let d = ks_statistic(&samples, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d < 0.02, "KS statistic {d} too large for uniform draws");
    }

    #[test]
    fn mean_test_accepts_exact_and_rejects_shifted_samples() {
        let target = DVector::from_vec(vec![0.1, -2.0]);
        let same = vec![target.clone(); 100];
        assert!(mc_mean_test(&same, &target, 4.0).unwrap());
        let shifted: Vec<DVector<f64>> = (0..100)
            .map(|_| &target + DVector::from_element(2, 1.0))
            .collect();
        assert!(!mc_mean_test(&shifted, &target, 4.0).unwrap());
        assert!(matches!(
            mc_mean_test(&[], &target, 4.0).unwrap_err(),
            EvalError::EmptySamples
        ));
    }
}
