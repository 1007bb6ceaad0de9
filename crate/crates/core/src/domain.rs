//! Feasible allocation sets with exact Euclidean projection: boxes,
//! capped simplices with pinned coordinates, and products of both.
//!
//! The capped simplex `{x in [0,1]^F : sum x_f <= k, x_f >= pin_f}` is the
//! per-cache state space. Pinned coordinates model repository copies; by
//! default they are fixed to 1 and excluded from the capacity budget, with
//! a flag to make them consume budget instead.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("infeasible domain: {0}")]
    Infeasible(String),
    #[error("dimension mismatch: domain has {expected} coordinates, point has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid domain definition: {0}")]
    Invalid(String),
}

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, DomainError> {
        if lower.len() != upper.len() {
            return Err(DomainError::Invalid(
                "lower and upper must have equal length".into(),
            ));
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(DomainError::Infeasible(format!(
                    "box coordinate {i} has lower {lo} > upper {hi} or non-finite bound"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// One-dimensional interval.
    pub fn interval(lo: f64, hi: f64) -> Result<Self, DomainError> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
}

/// `{x in [0,1]^dim : sum over free f of x_f <= budget, x_f = 1 for pinned f}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CappedSimplexDomain {
    dim: usize,
    capacity: f64,
    pinned: Vec<bool>,
    pins_consume_budget: bool,
    free_budget: f64,
}

impl CappedSimplexDomain {
    pub fn new(
        dim: usize,
        capacity: f64,
        pinned: Vec<bool>,
        pins_consume_budget: bool,
    ) -> Result<Self, DomainError> {
        if pinned.len() != dim {
            return Err(DomainError::Invalid(format!(
                "pinned vector length {} != dimension {dim}",
                pinned.len()
            )));
        }
        if !capacity.is_finite() || capacity < 0.0 {
            return Err(DomainError::Invalid(format!(
                "capacity must be finite and >= 0, got {capacity}"
            )));
        }
        let n_pinned = pinned.iter().filter(|&&p| p).count() as f64;
        let free_budget = if pins_consume_budget {
            if n_pinned > capacity {
                return Err(DomainError::Infeasible(format!(
                    "{n_pinned} pinned coordinates exceed capacity {capacity}"
                )));
            }
            capacity - n_pinned
        } else {
            capacity
        };
        Ok(Self {
            dim,
            capacity,
            pinned,
            pins_consume_budget,
            free_budget,
        })
    }

    /// Simplex without pins.
    pub fn plain(dim: usize, capacity: f64) -> Result<Self, DomainError> {
        Self::new(dim, capacity, vec![false; dim], false)
    }

    pub fn pinned(&self) -> &[bool] {
        &self.pinned
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// Budget available to non-pinned coordinates.
    pub fn free_budget(&self) -> f64 {
        self.free_budget
    }

    fn n_free(&self) -> usize {
        self.pinned.iter().filter(|&&p| !p).count()
    }
}

/// Cartesian product of domains, projected factorwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDomain {
    factors: Vec<Domain>,
}

impl ProductDomain {
    pub fn new(factors: Vec<Domain>) -> Result<Self, DomainError> {
        if factors.is_empty() {
            return Err(DomainError::Invalid("product of zero factors".into()));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[Domain] {
        &self.factors
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Box(BoxDomain),
    CappedSimplex(CappedSimplexDomain),
    Product(ProductDomain),
}

impl From<BoxDomain> for Domain {
    fn from(d: BoxDomain) -> Self {
        Domain::Box(d)
    }
}

impl From<CappedSimplexDomain> for Domain {
    fn from(d: CappedSimplexDomain) -> Self {
        Domain::CappedSimplex(d)
    }
}

impl From<ProductDomain> for Domain {
    fn from(d: ProductDomain) -> Self {
        Domain::Product(d)
    }
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Box(b) => b.lower.len(),
            Domain::CappedSimplex(s) => s.dim,
            Domain::Product(p) => p.factors.iter().map(|f| f.dim()).sum(),
        }
    }

    /// Exact Euclidean projection `argmin_{x in domain} |x - y|_2`.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>, DomainError> {
        if y.len() != self.dim() {
            return Err(DomainError::DimensionMismatch {
                expected: self.dim(),
                got: y.len(),
            });
        }
        let mut out = y.to_vec();
        self.project_in_place(&mut out);
        Ok(out)
    }

    pub fn project_in_place(&self, y: &mut [f64]) {
        match self {
            Domain::Box(b) => {
                for ((v, &lo), &hi) in y.iter_mut().zip(&b.lower).zip(&b.upper) {
                    *v = v.clamp(lo, hi);
                }
            }
            Domain::CappedSimplex(s) => project_capped_simplex(s, y),
            Domain::Product(p) => {
                let mut off = 0;
                for f in &p.factors {
                    let d = f.dim();
                    f.project_in_place(&mut y[off..off + d]);
                    off += d;
                }
            }
        }
    }

    /// Upper bound on `max |x - x'|_2`; exact for boxes.
    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Box(b) => b
                .lower
                .iter()
                .zip(&b.upper)
                .map(|(lo, hi)| (hi - lo) * (hi - lo))
                .sum::<f64>()
                .sqrt(),
            Domain::CappedSimplex(s) => {
                let n = s.n_free() as f64;
                // sqrt(2 min(k, n)) is tight when 2k <= n; the full-box
                // diameter sqrt(n) is the better bound otherwise.
                (2.0 * s.free_budget.min(n)).min(n).sqrt()
            }
            Domain::Product(p) => p
                .factors
                .iter()
                .map(|f| {
                    let d = f.diameter();
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Constraint check with tolerance, used by the per-slot invariant suite.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            Domain::Box(b) => x
                .iter()
                .zip(b.lower.iter().zip(&b.upper))
                .all(|(&v, (&lo, &hi))| v >= lo - tol && v <= hi + tol),
            Domain::CappedSimplex(s) => {
                let mut free_sum = 0.0;
                for (&v, &pin) in x.iter().zip(&s.pinned) {
                    if pin {
                        if (v - 1.0).abs() > tol {
                            return false;
                        }
                    } else {
                        if !(v >= -tol && v <= 1.0 + tol) {
                            return false;
                        }
                        free_sum += v;
                    }
                }
                free_sum <= s.free_budget + tol
            }
            Domain::Product(p) => {
                let mut off = 0;
                for f in &p.factors {
                    let d = f.dim();
                    if !f.contains(&x[off..off + d], tol) {
                        return false;
                    }
                    off += d;
                }
                true
            }
        }
    }

    /// Projection of the origin, the default initial allocation. For cache
    /// products this is the repository-only state.
    pub fn origin_projection(&self) -> Vec<f64> {
        let mut zeros = vec![0.0; self.dim()];
        self.project_in_place(&mut zeros);
        zeros
    }
}

fn project_capped_simplex(s: &CappedSimplexDomain, y: &mut [f64]) {
    // Pinned coordinates are fixed; project the free part onto
    // {x in [0,1]^n : sum x <= free_budget}.
    let free_idx: Vec<usize> = (0..s.dim).filter(|&i| !s.pinned[i]).collect();
    for i in 0..s.dim {
        if s.pinned[i] {
            y[i] = 1.0;
        }
    }
    if free_idx.is_empty() {
        return;
    }
    let k = s.free_budget;
    if k <= 0.0 {
        for &i in &free_idx {
            y[i] = 0.0;
        }
        return;
    }
    // Box clip first; if the budget is slack the clip is the projection.
    let mut clipped_sum = 0.0;
    for &i in &free_idx {
        let v = y[i].clamp(0.0, 1.0);
        clipped_sum += v;
    }
    if clipped_sum <= k {
        for &i in &free_idx {
            y[i] = y[i].clamp(0.0, 1.0);
        }
        return;
    }
    // Budget active: find lambda > 0 with sum_f clip(y_f - lambda, 0, 1) = k.
    // clip(y_f - lambda) bends at lambda = y_f - 1 (leaves the upper bound)
    // and at lambda = y_f (reaches zero). Walk the sorted breakpoints,
    // tracking the sum and the slope of the piecewise-linear map exactly.
    let lambda = {
        let ys: Vec<f64> = free_idx.iter().map(|&i| y[i]).collect();
        let mut events: Vec<(f64, i32, usize)> = Vec::with_capacity(2 * ys.len());
        for (j, &v) in ys.iter().enumerate() {
            events.push((v - 1.0, 1, j)); // coordinate becomes active (slope +1)
            events.push((v, -1, j)); // coordinate hits zero (slope -1)
        }
        // Tie-break by coordinate index for determinism.
        events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.2.cmp(&b.2)));

        let sum_at = |lam: f64| -> f64 {
            ys.iter().map(|&v| (v - lam).clamp(0.0, 1.0)).sum::<f64>()
        };

        let mut lambda = None;
        let mut cur = events[0].0;
        let mut slope: i32 = 0;
        let mut s_cur = sum_at(cur);
        for &(b, delta, _) in &events {
            if b > cur {
                let s_next = s_cur - slope as f64 * (b - cur);
                if s_cur >= k && s_next <= k && slope > 0 {
                    lambda = Some(cur + (s_cur - k) / slope as f64);
                    break;
                }
                s_cur = s_next;
                cur = b;
            }
            slope += delta;
        }
        match lambda {
            Some(l) => l,
            None => {
                // Exhaustive fallback: bisection on the monotone sum map.
                let mut lo = events[0].0.min(0.0);
                let mut hi = ys.iter().cloned().fold(0.0_f64, f64::max);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if sum_at(mid) > k {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    };
    let lambda = lambda.max(0.0);
    for &i in &free_idx {
        y[i] = (y[i] - lambda).clamp(0.0, 1.0);
    }
}
