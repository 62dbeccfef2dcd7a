//! Communication graphs and gossip machinery.
//!
//! Learners sit on the nodes of a connected undirected graph and average
//! their state through a lazy Metropolis mixing matrix `A = (I + M) / 2`,
//! where `M` carries weight `1 / (1 + max(deg_i, deg_j))` on every edge and
//! the leftover mass on the diagonal. `A` is symmetric, doubly stochastic,
//! positive semidefinite, and supported on the graph, so one gossip step
//! per round is all the communication the engines ever need.
//!
//! [`spectral`] packages the derived constants the engines consume: the
//! second-largest singular value `sigma2`, the gap `rho = 1 - sigma2`, the
//! Chebyshev budget `C`, the acceleration weight `theta`, and the block
//! length `cPrime` for a given horizon/block pair.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("node count must be at least 1")]
    EmptyGraph,
    #[error("edge ({0}, {1}) is out of range for {2} nodes")]
    EdgeOutOfRange(usize, usize, usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph is not connected")]
    Disconnected,
    #[error("mixing matrix is {0}")]
    InvalidMixing(String),
    #[error("sigma2 = {0} leaves no spectral gap")]
    NoSpectralGap(f64),
    #[error("dimension mismatch: matrix is {0}x{0}, state has {1} rows")]
    DimensionMismatch(usize, usize),
    #[error("malformed edge list line {0}: {1:?}")]
    MalformedEdgeList(usize, String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A connected undirected graph on `n` nodes without self-loops or
/// duplicate edges. Edges are stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Topology {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, NetworkError> {
        if n == 0 {
            return Err(NetworkError::EmptyGraph);
        }
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(NetworkError::EdgeOutOfRange(a, b, n));
            }
            if a == b {
                return Err(NetworkError::SelfLoop(a));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        if let Some(w) = normalized.windows(2).find(|w| w[0] == w[1]) {
            return Err(NetworkError::DuplicateEdge(w[0].0, w[0].1));
        }
        let topo = Topology { n, edges: normalized };
        if !topo.is_connected() {
            return Err(NetworkError::Disconnected);
        }
        Ok(topo)
    }

    pub fn path(n: usize) -> Result<Self, NetworkError> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Topology::new(n, &edges)
    }

    pub fn ring(n: usize) -> Result<Self, NetworkError> {
        if n <= 2 {
            return Topology::path(n);
        }
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        edges.push((0, n - 1));
        Topology::new(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self, NetworkError> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        Topology::new(n, &edges)
    }

    pub fn star(n: usize) -> Result<Self, NetworkError> {
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Topology::new(n, &edges)
    }

    /// Random connected graph: a uniformly attached spanning tree plus
    /// `extra_edges` additional distinct edges (when the graph has room).
    pub fn random_connected<R: Rng>(
        n: usize,
        extra_edges: usize,
        rng: &mut R,
    ) -> Result<Self, NetworkError> {
        if n == 0 {
            return Err(NetworkError::EmptyGraph);
        }
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for i in 1..n {
            let j = rng.gen_range(0..i);
            edges.push((j, i));
        }
        let max_edges = n * (n - 1) / 2;
        let mut have: std::collections::HashSet<(usize, usize)> = edges.iter().copied().collect();
        let mut added = 0;
        while added < extra_edges && have.len() < max_edges {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a == b {
                continue;
            }
            let e = (a.min(b), a.max(b));
            if have.insert(e) {
                edges.push(e);
                added += 1;
            }
        }
        Topology::new(n, &edges)
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    fn is_connected(&self) -> bool {
        if self.n == 1 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }

    /// Parse the `"i j"`-per-line edge-list format (0-indexed). The node
    /// count is one past the largest index mentioned.
    pub fn from_edge_list(text: &str) -> Result<Self, NetworkError> {
        let mut edges = Vec::new();
        let mut max_node = 0usize;
        let mut any = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize, NetworkError> {
                tok.and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| NetworkError::MalformedEdgeList(lineno + 1, line.to_string()))
            };
            let a = parse(it.next())?;
            let b = parse(it.next())?;
            if it.next().is_some() {
                return Err(NetworkError::MalformedEdgeList(lineno + 1, line.to_string()));
            }
            max_node = max_node.max(a).max(b);
            edges.push((a, b));
            any = true;
        }
        if !any {
            return Err(NetworkError::EmptyGraph);
        }
        Topology::new(max_node + 1, &edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for &(a, b) in &self.edges {
            out.push_str(&format!("{a} {b}\n"));
        }
        out
    }
}

/// Symmetric doubly stochastic PSD mixing matrix supported on the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    a: DMatrix<f64>,
}

const MIXING_TOL: f64 = 1e-12;

impl MixingMatrix {
    pub fn nodes(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.a[(i, j)]
    }

    /// Wrap an externally supplied matrix, enforcing all invariants.
    pub fn from_matrix(a: DMatrix<f64>, topo: &Topology) -> Result<Self, NetworkError> {
        let m = MixingMatrix { a };
        m.validate(topo)?;
        Ok(m)
    }

    pub fn validate(&self, topo: &Topology) -> Result<(), NetworkError> {
        let n = self.a.nrows();
        if n != self.a.ncols() || n != topo.nodes() {
            return Err(NetworkError::InvalidMixing("not square on the topology".into()));
        }
        let a = &self.a;
        let mut edge_set = std::collections::HashSet::new();
        for &(i, j) in topo.edges() {
            edge_set.insert((i, j));
        }
        for i in 0..n {
            let mut row = 0.0;
            let mut col = 0.0;
            for j in 0..n {
                row += a[(i, j)];
                col += a[(j, i)];
                if (a[(i, j)] - a[(j, i)]).abs() > MIXING_TOL {
                    return Err(NetworkError::InvalidMixing("not symmetric".into()));
                }
                if i != j && a[(i, j)].abs() > MIXING_TOL {
                    let e = (i.min(j), i.max(j));
                    if !edge_set.contains(&e) {
                        return Err(NetworkError::InvalidMixing(format!(
                            "support outside the graph at ({i}, {j})"
                        )));
                    }
                }
            }
            if (row - 1.0).abs() > MIXING_TOL || (col - 1.0).abs() > MIXING_TOL {
                return Err(NetworkError::InvalidMixing("not doubly stochastic".into()));
            }
        }
        let eigen = SymmetricEigen::new(self.a.clone());
        let mut vals: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
        vals.sort_by(|x, y| y.abs().partial_cmp(&x.abs()).unwrap());
        if vals.last().copied().unwrap_or(0.0) < -MIXING_TOL {
            return Err(NetworkError::InvalidMixing("not positive semidefinite".into()));
        }
        if n > 1 && vals[1].abs() >= 1.0 - MIXING_TOL {
            return Err(NetworkError::NoSpectralGap(vals[1].abs()));
        }
        Ok(())
    }

    /// Matrix rows as CSV (one row of `n` comma-separated entries per line).
    pub fn to_csv(&self) -> String {
        let n = self.nodes();
        let mut out = String::new();
        for i in 0..n {
            for j in 0..n {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{}", self.a[(i, j)]));
            }
            out.push('\n');
        }
        out
    }
}

/// Lazy Metropolis construction: `M` has `1 / (1 + max(deg_i, deg_j))` on
/// each edge and the remainder on the diagonal; the returned matrix is
/// `(I + M) / 2`.
pub fn build_lazy_metropolis(topo: &Topology) -> MixingMatrix {
    let n = topo.nodes();
    let deg = topo.degrees();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for &(i, j) in topo.edges() {
        let w = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
        m[(i, j)] = w;
        m[(j, i)] = w;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        m[(i, i)] = 1.0 - off;
    }
    let mut a = DMatrix::<f64>::identity(n, n);
    a += &m;
    a /= 2.0;
    MixingMatrix { a }
}

/// Spectral constants of a mixing matrix for a given horizon/block pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProfile {
    pub n: usize,
    /// Second-largest singular value of `A`; 0 for a single node.
    pub sigma2: f64,
    /// Spectral gap `1 - sigma2`.
    pub rho: f64,
    /// Chebyshev gossip budget `ceil(sqrt(2) ln(sqrt(14 n)) / ((sqrt(2) - 1) sqrt(rho)))`.
    pub c: usize,
    /// Acceleration weight `1 / (1 + sqrt(1 - sigma2^2))`.
    pub theta: f64,
    pub horizon: usize,
    pub block: usize,
    /// `2 ceil(ln(sqrt(n) horizon / block) / rho)` for the stored pair.
    pub c_prime: usize,
}

/// Plain-gossip block length `2 ceil(ln(sqrt(n) t / l) / rho)`.
pub fn c_prime(n: usize, rho: f64, t: usize, l: usize) -> Result<usize, NetworkError> {
    if t == 0 || l == 0 || l > t {
        return Err(NetworkError::InvalidParameter(format!(
            "horizon {t} and block {l} must satisfy 1 <= l <= t"
        )));
    }
    let inner = ((n as f64).sqrt() * t as f64 / l as f64).ln() / rho;
    Ok(2 * inner.ceil().max(1.0) as usize)
}

pub fn spectral(a: &MixingMatrix, horizon: usize, block: usize) -> Result<SpectralProfile, NetworkError> {
    let n = a.nodes();
    let sigma2 = if n == 1 {
        0.0
    } else {
        let eigen = SymmetricEigen::new(a.matrix().clone());
        let mut vals: Vec<f64> = eigen.eigenvalues.iter().map(|v| v.abs()).collect();
        vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
        vals[1]
    };
    if sigma2 >= 1.0 - 1e-12 {
        return Err(NetworkError::NoSpectralGap(sigma2));
    }
    let rho = 1.0 - sigma2;
    let sqrt2 = 2f64.sqrt();
    let c_raw = sqrt2 * (14.0 * n as f64).sqrt().ln() / ((sqrt2 - 1.0) * rho.sqrt());
    let c = c_raw.ceil().max(1.0) as usize;
    let theta = 1.0 / (1.0 + (1.0 - sigma2 * sigma2).sqrt());
    let cp = c_prime(n, rho, horizon, block)?;
    Ok(SpectralProfile {
        n,
        sigma2,
        rho,
        c,
        theta,
        horizon,
        block,
        c_prime: cp,
    })
}

/// One mixing step: row `i` of the result is `sum_j A_ij x_j`.
pub fn gossip_step(a: &MixingMatrix, x: &DMatrix<f64>) -> Result<DMatrix<f64>, NetworkError> {
    if x.nrows() != a.nodes() {
        return Err(NetworkError::DimensionMismatch(a.nodes(), x.nrows()));
    }
    Ok(a.matrix() * x)
}

/// Chebyshev-accelerated step `(1 + theta) A z_k - theta z_{k-1}`.
pub fn chebyshev_gossip_step(
    a: &MixingMatrix,
    theta: f64,
    z_k: &DMatrix<f64>,
    z_km1: &DMatrix<f64>,
) -> Result<DMatrix<f64>, NetworkError> {
    if z_k.nrows() != a.nodes() || z_km1.nrows() != a.nodes() || z_k.ncols() != z_km1.ncols() {
        return Err(NetworkError::DimensionMismatch(a.nodes(), z_k.nrows()));
    }
    let mut out = a.matrix() * z_k;
    out *= 1.0 + theta;
    out -= &(theta * z_km1);
    Ok(out)
}

/// Per-node distances to the row mean plus max and Frobenius aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusReport {
    pub per_node: Vec<f64>,
    pub max: f64,
    pub frobenius: f64,
}

pub fn consensus_error(x: &DMatrix<f64>) -> ConsensusReport {
    let n = x.nrows();
    let mean = x.row_mean();
    let mut per_node = Vec::with_capacity(n);
    let mut fro2 = 0.0;
    let mut max = 0.0f64;
    for i in 0..n {
        let mut d2 = 0.0;
        for j in 0..x.ncols() {
            let d = x[(i, j)] - mean[j];
            d2 += d * d;
        }
        let d = d2.sqrt();
        fro2 += d2;
        max = max.max(d);
        per_node.push(d);
    }
    ConsensusReport {
        per_node,
        max,
        frobenius: fro2.sqrt(),
    }
}

/// Column means of a node-major state matrix, as a vector.
pub fn column_mean(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(x.ncols(), x.row_mean().iter().copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn three_path_matrix() -> MixingMatrix {
        build_lazy_metropolis(&Topology::path(3).unwrap())
    }

    #[test]
    fn lazy_metropolis_three_node_path() {
        let a = three_path_matrix();
        let expect = [
            [5.0 / 6.0, 1.0 / 6.0, 0.0],
            [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
            [0.0, 1.0 / 6.0, 5.0 / 6.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(a.entry(i, j), expect[i][j], epsilon = 1e-15);
            }
        }
        a.validate(&Topology::path(3).unwrap()).unwrap();
    }

    #[test]
    fn lazy_metropolis_two_node_edge() {
        // deg = (1, 1) gives M = [[1/2, 1/2], [1/2, 1/2]]; the lazy version
        // is (I + M)/2 = [[3/4, 1/4], [1/4, 3/4]].
        let a = build_lazy_metropolis(&Topology::path(2).unwrap());
        assert_abs_diff_eq!(a.entry(0, 0), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(a.entry(0, 1), 0.25, epsilon = 1e-15);
        a.validate(&Topology::path(2).unwrap()).unwrap();
    }

    #[test]
    fn lazy_metropolis_single_node() {
        let a = build_lazy_metropolis(&Topology::path(1).unwrap());
        assert_eq!(a.nodes(), 1);
        assert_abs_diff_eq!(a.entry(0, 0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn spectral_three_node_path() {
        let p = spectral(&three_path_matrix(), 512, 8).unwrap();
        assert_abs_diff_eq!(p.sigma2, 5.0 / 6.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p.rho, 1.0 / 6.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p.theta, 0.6440100503147040, epsilon = 1e-12);
        assert_eq!(p.c, 16);
    }

    #[test]
    fn chebyshev_budget_frozen_example() {
        // n = 16, rho = 1/2: ratio is ~13.065, so the budget rounds to 14.
        let sqrt2 = 2f64.sqrt();
        let raw = sqrt2 * (14.0 * 16.0f64).sqrt().ln() / ((sqrt2 - 1.0) * 0.5f64.sqrt());
        assert_eq!(raw.ceil() as usize, 14);
    }

    #[test]
    fn c_prime_frozen_example() {
        assert_eq!(c_prime(4, 1.0 / 6.0, 512, 8).unwrap(), 60);
    }

    #[test]
    fn single_node_profile() {
        let a = build_lazy_metropolis(&Topology::path(1).unwrap());
        let p = spectral(&a, 16, 2).unwrap();
        assert_eq!(p.sigma2, 0.0);
        assert_eq!(p.rho, 1.0);
        assert!(p.c >= 1);
    }

    #[test]
    fn topology_rejects_bad_edges() {
        assert!(matches!(
            Topology::new(3, &[(0, 0)]),
            Err(NetworkError::SelfLoop(0))
        ));
        assert!(matches!(
            Topology::new(3, &[(0, 1), (1, 0), (1, 2)]),
            Err(NetworkError::DuplicateEdge(0, 1))
        ));
        assert!(matches!(
            Topology::new(2, &[(0, 5)]),
            Err(NetworkError::EdgeOutOfRange(0, 5, 2))
        ));
        assert!(matches!(
            Topology::new(4, &[(0, 1), (2, 3)]),
            Err(NetworkError::Disconnected)
        ));
    }

    #[test]
    fn edge_list_round_trip() {
        let t = Topology::ring(5).unwrap();
        let text = t.to_edge_list();
        let back = Topology::from_edge_list(&text).unwrap();
        assert_eq!(t, back);
        assert!(Topology::from_edge_list("").is_err());
        assert!(Topology::from_edge_list("0 1 2").is_err());
    }

    #[test]
    fn gossip_preserves_column_means() {
        let a = three_path_matrix();
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 4.0, -2.0, 0.5, 3.0, 9.0]);
        let y = gossip_step(&a, &x).unwrap();
        let mx = column_mean(&x);
        let my = column_mean(&y);
        assert_abs_diff_eq!((mx - my).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn gossip_contracts_at_sigma2_on_the_path() {
        let a = three_path_matrix();
        let p = spectral(&a, 16, 2).unwrap();
        let x = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, -1.0]);
        let before = consensus_error(&x).frobenius;
        let after = consensus_error(&gossip_step(&a, &x).unwrap()).frobenius;
        assert!(after <= p.sigma2 * before + 1e-12);
    }

    #[test]
    fn chebyshev_beats_plain_gossip_on_the_path() {
        let a = three_path_matrix();
        let p = spectral(&a, 16, 2).unwrap();
        let x0 = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, -1.0]);
        let mut plain = x0.clone();
        let mut cheb_cur = x0.clone();
        let mut cheb_prev = x0.clone();
        for _ in 0..p.c {
            plain = gossip_step(&a, &plain).unwrap();
            let next = chebyshev_gossip_step(&a, p.theta, &cheb_cur, &cheb_prev).unwrap();
            cheb_prev = cheb_cur;
            cheb_cur = next;
        }
        let e_plain = consensus_error(&plain).max;
        let e_cheb = consensus_error(&cheb_cur).max;
        assert!(
            e_cheb < e_plain,
            "accelerated {e_cheb} should beat plain {e_plain}"
        );
    }

    #[test]
    fn chebyshev_preserves_column_means() {
        let a = three_path_matrix();
        let p = spectral(&a, 16, 2).unwrap();
        let z0 = DMatrix::from_row_slice(3, 2, &[1.0, -1.0, 2.0, 0.0, -3.0, 4.0]);
        let z1 = gossip_step(&a, &z0).unwrap();
        let z2 = chebyshev_gossip_step(&a, p.theta, &z1, &z0).unwrap();
        // (1 + theta) mean - theta mean = mean.
        assert_abs_diff_eq!((column_mean(&z2) - column_mean(&z0)).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn consensus_error_report_shape() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let r = consensus_error(&x);
        assert_eq!(r.per_node.len(), 2);
        assert_abs_diff_eq!(r.per_node[0], (0.5f64.powi(2) * 2.0).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(r.frobenius, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.max, r.per_node[0], epsilon = 1e-15);
    }

    #[test]
    fn gossip_power_reaches_target_accuracy() {
        // sigma2^k <= 1/(t sqrt(n)) once k >= ln(sqrt(n) t) / rho.
        for (topo, t) in [(Topology::path(3).unwrap(), 512usize), (Topology::ring(8).unwrap(), 2048)] {
            let a = build_lazy_metropolis(&topo);
            let p = spectral(&a, t, 1).unwrap();
            let n = topo.nodes() as f64;
            let k = ((n.sqrt() * t as f64).ln() / p.rho).ceil() as i32;
            assert!(p.sigma2.powi(k) <= 1.0 / (t as f64 * n.sqrt()) + 1e-15);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn random_graph_mixing_invariants(seed in 0u64..1_000, n in 2usize..12, extra in 0usize..8) {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let topo = Topology::random_connected(n, extra, &mut rng).unwrap();
            let a = build_lazy_metropolis(&topo);
            prop_assert!(a.validate(&topo).is_ok());
            let p = spectral(&a, 64, 4).unwrap();
            prop_assert!(p.sigma2 < 1.0);
            prop_assert!(p.sigma2 >= 0.0);
            prop_assert!(p.c >= 1);
            prop_assert!(p.theta > 0.0 && p.theta <= 1.0);
        }

        #[test]
        fn gossip_contraction_random_states(seed in 0u64..1_000) {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let n = rng.gen_range(2usize..16);
            let topo = Topology::random_connected(n, rng.gen_range(0..2 * n), &mut rng).unwrap();
            let a = build_lazy_metropolis(&topo);
            let p = spectral(&a, 64, 4).unwrap();
            let d = rng.gen_range(1usize..5);
            let x = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-5.0..5.0));
            let y = gossip_step(&a, &x).unwrap();
            let before = consensus_error(&x).frobenius;
            let after = consensus_error(&y).frobenius;
            prop_assert!(after <= p.sigma2 * before + 1e-10);
            // column means are unchanged
            prop_assert!((column_mean(&x) - column_mean(&y)).norm() < 1e-12);
        }
    }
}
