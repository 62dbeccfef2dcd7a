//! Convex decision sets inside the unit cube.
//!
//! Three families cover the experiments: axis-aligned boxes
//! `[lower, upper] ⊆ [0,1]^d`, capped simplices `{x ∈ [0,1]^d : Σx ≤ b}`,
//! and knapsacks `{x ∈ [0,1]^d : aᵀx ≤ b}` with positive weights. Each set
//! carries an exact linear maximization oracle, a Euclidean projection, the
//! infinity-norm minimizer with its norm, a Euclidean radius bound, and a
//! downward-closedness flag.
//!
//! Projection onto the budgeted sets clamps to the cube and then bisects a
//! single dual multiplier for the budget row, so the capped simplex and the
//! knapsack share one code path.

use nalgebra::DVector;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SetError {
    #[error("dimension must be at least 1")]
    EmptyDimension,
    #[error("box bounds must satisfy 0 <= lower <= upper <= 1 (coordinate {0})")]
    BadBoxBounds(usize),
    #[error("budget must be positive, got {0}")]
    BadBudget(f64),
    #[error("knapsack weights must be positive (coordinate {0})")]
    BadWeight(usize),
    #[error("vector has dimension {0}, set has dimension {1}")]
    DimensionMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetKind {
    Box { lower: DVector<f64>, upper: DVector<f64> },
    CappedSimplex { budget: f64 },
    Knapsack { weights: DVector<f64>, budget: f64 },
}

/// A decision set with its derived geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionSet {
    d: usize,
    kind: SetKind,
    radius: f64,
    inf_min: DVector<f64>,
    nu: f64,
    downward_closed: bool,
}

pub const CONTAINS_TOL: f64 = 1e-9;

impl DecisionSet {
    pub fn box_set(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self, SetError> {
        let d = lower.len();
        if d == 0 {
            return Err(SetError::EmptyDimension);
        }
        if upper.len() != d {
            return Err(SetError::DimensionMismatch(upper.len(), d));
        }
        for j in 0..d {
            if !(0.0..=1.0).contains(&lower[j]) || !(0.0..=1.0).contains(&upper[j]) || lower[j] > upper[j] {
                return Err(SetError::BadBoxBounds(j));
            }
        }
        let radius = upper.norm();
        let nu = lower.amax();
        let downward_closed = lower.iter().all(|&v| v == 0.0);
        Ok(DecisionSet {
            d,
            radius,
            inf_min: lower.clone(),
            nu,
            downward_closed,
            kind: SetKind::Box { lower, upper },
        })
    }

    pub fn unit_box(d: usize) -> Result<Self, SetError> {
        Self::box_set(DVector::zeros(d), DVector::from_element(d, 1.0))
    }

    pub fn capped_simplex(d: usize, budget: f64) -> Result<Self, SetError> {
        if d == 0 {
            return Err(SetError::EmptyDimension);
        }
        if !(budget > 0.0) || !budget.is_finite() {
            return Err(SetError::BadBudget(budget));
        }
        let radius = budget_radius(&DVector::from_element(d, 1.0), budget);
        Ok(DecisionSet {
            d,
            radius,
            inf_min: DVector::zeros(d),
            nu: 0.0,
            downward_closed: true,
            kind: SetKind::CappedSimplex { budget },
        })
    }

    pub fn knapsack(weights: DVector<f64>, budget: f64) -> Result<Self, SetError> {
        let d = weights.len();
        if d == 0 {
            return Err(SetError::EmptyDimension);
        }
        if !(budget > 0.0) || !budget.is_finite() {
            return Err(SetError::BadBudget(budget));
        }
        if let Some(j) = (0..d).find(|&j| !(weights[j] > 0.0) || !weights[j].is_finite()) {
            return Err(SetError::BadWeight(j));
        }
        let radius = budget_radius(&weights, budget);
        Ok(DecisionSet {
            d,
            radius,
            inf_min: DVector::zeros(d),
            nu: 0.0,
            downward_closed: true,
            kind: SetKind::Knapsack { weights, budget },
        })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    /// Euclidean radius bound: `‖x‖ ≤ radius` for every feasible `x`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// The feasible point minimizing the infinity norm (lower corner for a
    /// box, the origin for budgeted sets).
    pub fn inf_norm_minimizer(&self) -> &DVector<f64> {
        &self.inf_min
    }

    /// `‖inf_norm_minimizer‖_∞`.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn is_downward_closed(&self) -> bool {
        self.downward_closed
    }

    /// Shared starting decision for the engines: the minimum-norm feasible
    /// point, which coincides with the infinity-norm minimizer here.
    pub fn initial_point(&self) -> DVector<f64> {
        self.inf_min.clone()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.contains_tol(x, CONTAINS_TOL)
    }

    pub fn contains_tol(&self, x: &DVector<f64>, tol: f64) -> bool {
        if x.len() != self.d {
            return false;
        }
        match &self.kind {
            SetKind::Box { lower, upper } => (0..self.d)
                .all(|j| x[j] >= lower[j] - tol && x[j] <= upper[j] + tol),
            SetKind::CappedSimplex { budget } => {
                (0..self.d).all(|j| x[j] >= -tol && x[j] <= 1.0 + tol) && x.sum() <= budget + tol
            }
            SetKind::Knapsack { weights, budget } => {
                (0..self.d).all(|j| x[j] >= -tol && x[j] <= 1.0 + tol)
                    && weights.dot(x) <= budget + tol
            }
        }
    }

    /// Exact linear maximization: `argmax_{x ∈ K} ⟨c, x⟩`. Ties break
    /// toward the minimal feasible value, so non-positive coefficients get
    /// the lower bound (or zero mass for budgeted sets); equal profit
    /// ratios are filled in ascending index order.
    pub fn lmo(&self, c: &DVector<f64>) -> Result<DVector<f64>, SetError> {
        if c.len() != self.d {
            return Err(SetError::DimensionMismatch(c.len(), self.d));
        }
        match &self.kind {
            SetKind::Box { lower, upper } => Ok(DVector::from_fn(self.d, |j, _| {
                if c[j] > 0.0 {
                    upper[j]
                } else {
                    lower[j]
                }
            })),
            SetKind::CappedSimplex { budget } => {
                Ok(greedy_fill(c, &DVector::from_element(self.d, 1.0), *budget))
            }
            SetKind::Knapsack { weights, budget } => Ok(greedy_fill(c, weights, *budget)),
        }
    }

    /// Euclidean projection onto the set. Boxes clamp coordinatewise;
    /// budgeted sets clamp and then bisect the budget multiplier to 1e-10.
    pub fn project(&self, y: &DVector<f64>) -> Result<DVector<f64>, SetError> {
        if y.len() != self.d {
            return Err(SetError::DimensionMismatch(y.len(), self.d));
        }
        match &self.kind {
            SetKind::Box { lower, upper } => Ok(DVector::from_fn(self.d, |j, _| {
                y[j].clamp(lower[j], upper[j])
            })),
            SetKind::CappedSimplex { budget } => {
                Ok(budget_project(y, &DVector::from_element(self.d, 1.0), *budget))
            }
            SetKind::Knapsack { weights, budget } => Ok(budget_project(y, weights, *budget)),
        }
    }

    /// Random feasible point: a uniform cube draw pushed through `project`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let y = DVector::from_fn(self.d, |_, _| rng.gen::<f64>());
        self.project(&y).expect("dimension is consistent")
    }
}

/// Exact maximum norm over `{x ∈ [0,1]^d : aᵀx ≤ b}`: fill ones along
/// ascending weight while the budget lasts, then a fractional coordinate.
/// Maximizing a convex function picks a vertex, and among vertices the
/// greedy count is optimal because the leftover is below the next weight.
fn budget_radius(a: &DVector<f64>, b: f64) -> f64 {
    let d = a.len();
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&i, &j| a[i].partial_cmp(&a[j]).unwrap().then(i.cmp(&j)));
    let mut rem = b;
    let mut norm2 = 0.0;
    for &j in &idx {
        if a[j] <= rem {
            rem -= a[j];
            norm2 += 1.0;
        } else {
            let frac = (rem / a[j]).min(1.0);
            norm2 += frac * frac;
            break;
        }
    }
    norm2.min(d as f64).sqrt()
}

fn greedy_fill(c: &DVector<f64>, a: &DVector<f64>, b: f64) -> DVector<f64> {
    let d = c.len();
    let mut idx: Vec<usize> = (0..d).filter(|&j| c[j] > 0.0).collect();
    idx.sort_by(|&i, &j| {
        let ri = c[i] / a[i];
        let rj = c[j] / a[j];
        rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
    });
    let mut x = DVector::zeros(d);
    let mut rem = b;
    for &j in &idx {
        if rem <= 0.0 {
            break;
        }
        let take = (rem / a[j]).min(1.0);
        x[j] = take;
        rem -= take * a[j];
    }
    x
}

fn budget_project(y: &DVector<f64>, a: &DVector<f64>, b: f64) -> DVector<f64> {
    let clamp = |lambda: f64| DVector::from_fn(y.len(), |j, _| (y[j] - lambda * a[j]).clamp(0.0, 1.0));
    let budget_at = |x: &DVector<f64>| a.dot(x);
    let x0 = clamp(0.0);
    if budget_at(&x0) <= b {
        return x0;
    }
    // The budget use is continuous and non-increasing in the multiplier.
    let mut lo = 0.0;
    let mut hi = 1.0;
    while budget_at(&clamp(hi)) > b {
        hi *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let used = budget_at(&clamp(mid));
        if used > b {
            lo = mid;
        } else {
            hi = mid;
            if b - used <= 1e-10 * b.max(1.0) {
                break;
            }
        }
        if hi - lo <= 1e-16 * hi.max(1.0) {
            break;
        }
    }
    clamp(hi)
}
