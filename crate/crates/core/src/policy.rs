//! The online horizon-fair policy: synchronized projected gradient ascent
//! over the allocation set and gradient descent over the dual (conjugate)
//! box, with self-confident learning rates, plus the slot-fair variant.
//!
//! Per slot the policy plays `x_t`, then receives per-agent utility values
//! and supergradients. The primal step ascends the concave reward
//! `x -> -theta . u_t(x)` with supergradient
//! `g_X = sum_i (-theta_i) du_i` and rate `diam(X)/sqrt(sum_s |g_s|^2)`;
//! the dual step descends the strongly convex loss in `theta` with
//! gradient `g_Theta_i = (-theta_i)^(-1/alpha) - u_i` and rate
//! `alpha / (u_min^(1+1/alpha) t)`.
//!
//! The slot-fair variant freezes the dual at -1 and feeds the primal step
//! the fairness-transformed supergradients `u_i^(-alpha) du_i`.

use crate::domain::Domain;
use crate::fairness::FairnessParams;
use thiserror::Error;

/// Floor applied to utility values before the slot-fair transform; every
/// application is counted in the run diagnostics.
pub const OSF_CLAMP_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("feedback dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("initial allocation is not feasible")]
    InfeasibleStart,
}

/// Per-slot feedback revealed after an allocation is played.
#[derive(Debug, Clone)]
pub struct UtilityFeedback {
    /// `u_t(x_t)`, one value per agent.
    pub values: Vec<f64>,
    /// One supergradient of `u_{t,i}` at `x_t` per agent, each spanning the
    /// full allocation dimension.
    pub supergradients: Vec<Vec<f64>>,
}

impl UtilityFeedback {
    pub fn n_agents(&self) -> usize {
        self.values.len()
    }
}

/// Diagnostics for a single policy update.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepInfo {
    /// Primal learning rate used, `None` when the step was skipped.
    pub eta_x: Option<f64>,
    /// Dual learning rate used, `None` when the dual is frozen.
    pub eta_theta: Option<f64>,
    /// Number of utility components floored by the slot-fair transform.
    pub clamps: u32,
}

#[derive(Debug, Clone)]
pub struct PolicyState {
    params: FairnessParams,
    domain: Domain,
    diam: f64,
    x: Vec<f64>,
    theta: Vec<f64>,
    theta_lo: f64,
    theta_hi: f64,
    grad_sq_accum: f64,
    t: u64,
    dual_frozen: bool,
    eta_theta_num: f64,
    last_eta_x: Option<f64>,
    clamp_count: u64,
}

impl PolicyState {
    /// Initializes the horizon-fair policy: `theta_1` at the midpoint of the
    /// dual box, `x_1` at the given point or the projection of the origin.
    /// For `alpha = 0` the dual box degenerates to -1 and is frozen.
    pub fn ohf_init(
        params: FairnessParams,
        domain: Domain,
        x1: Option<Vec<f64>>,
    ) -> Result<Self, PolicyError> {
        let (theta_lo, theta_hi) = params.theta_box();
        let theta = params.theta_midpoint();
        let dual_frozen = params.alpha() == 0.0;
        let eta_theta_num = if dual_frozen {
            0.0
        } else {
            params.alpha() * params.u_star_min().powf(-1.0 - 1.0 / params.alpha())
        };
        Self::build(params, domain, x1, theta, theta_lo, theta_hi, dual_frozen, eta_theta_num)
    }

    /// Initializes the slot-fair variant: the dual is pinned to -1
    /// regardless of `alpha`; `alpha` only shapes the utility transform
    /// applied in [`PolicyState::osf_update`].
    pub fn osf_init(
        params: FairnessParams,
        domain: Domain,
        x1: Option<Vec<f64>>,
    ) -> Result<Self, PolicyError> {
        let theta = vec![-1.0; params.n_agents()];
        Self::build(params, domain, x1, theta, -1.0, -1.0, true, 0.0)
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        params: FairnessParams,
        domain: Domain,
        x1: Option<Vec<f64>>,
        theta: Vec<f64>,
        theta_lo: f64,
        theta_hi: f64,
        dual_frozen: bool,
        eta_theta_num: f64,
    ) -> Result<Self, PolicyError> {
        let x = match x1 {
            Some(x) => {
                if x.len() != domain.dim() || !domain.contains(&x, 1e-9) {
                    return Err(PolicyError::InfeasibleStart);
                }
                x
            }
            None => domain.origin_projection(),
        };
        let diam = domain.diameter();
        Ok(Self {
            params,
            domain,
            diam,
            x,
            theta,
            theta_lo,
            theta_hi,
            grad_sq_accum: 0.0,
            t: 1,
            dual_frozen,
            eta_theta_num,
            last_eta_x: None,
            clamp_count: 0,
        })
    }

    /// Overrides the constant `c` in the dual rate schedule `c / t`.
    pub fn with_dual_rate_constant(mut self, c: f64) -> Self {
        self.eta_theta_num = c;
        self
    }

    /// The allocation to play this slot; repeated calls return the same
    /// vector until an update is applied.
    pub fn next_allocation(&self) -> &[f64] {
        &self.x
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn slot(&self) -> u64 {
        self.t
    }

    pub fn params(&self) -> &FairnessParams {
        &self.params
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dual_frozen(&self) -> bool {
        self.dual_frozen
    }

    /// Total slot-fair clamp applications so far.
    pub fn clamp_count(&self) -> u64 {
        self.clamp_count
    }

    pub fn grad_sq_accum(&self) -> f64 {
        self.grad_sq_accum
    }

    pub fn last_eta_x(&self) -> Option<f64> {
        self.last_eta_x
    }

    fn check_feedback(&self, feedback: &UtilityFeedback) -> Result<(), PolicyError> {
        if feedback.values.len() != self.params.n_agents() {
            return Err(PolicyError::DimensionMismatch(format!(
                "expected {} agents, got {}",
                self.params.n_agents(),
                feedback.values.len()
            )));
        }
        if feedback.supergradients.len() != self.params.n_agents() {
            return Err(PolicyError::DimensionMismatch(format!(
                "expected {} supergradients, got {}",
                self.params.n_agents(),
                feedback.supergradients.len()
            )));
        }
        for (i, g) in feedback.supergradients.iter().enumerate() {
            if g.len() != self.domain.dim() {
                return Err(PolicyError::DimensionMismatch(format!(
                    "supergradient of agent {i} has dimension {}, allocation has {}",
                    g.len(),
                    self.domain.dim()
                )));
            }
        }
        Ok(())
    }

    /// Horizon-fair update: primal ascent with `g_X = sum_i (-theta_i) du_i`
    /// and, unless frozen, dual descent with
    /// `g_Theta_i = (-theta_i)^(-1/alpha) - u_i`.
    pub fn ohf_update(&mut self, feedback: &UtilityFeedback) -> Result<StepInfo, PolicyError> {
        self.check_feedback(feedback)?;
        let weights: Vec<f64> = self.theta.iter().map(|&th| -th).collect();
        let mut info = self.primal_step(&weights, &feedback.supergradients);

        if !self.dual_frozen {
            let alpha = self.params.alpha();
            let eta_theta = self.eta_theta_num / self.t as f64;
            for (i, th) in self.theta.iter_mut().enumerate() {
                let g = (-*th).powf(-1.0 / alpha) - feedback.values[i];
                *th = (*th - eta_theta * g).clamp(self.theta_lo, self.theta_hi);
            }
            info.eta_theta = Some(eta_theta);
        }
        self.t += 1;
        Ok(info)
    }

    /// Slot-fair update: primal-only ascent on the fairness-transformed
    /// utilities, with per-agent coefficients `max(u_i, eps)^(-alpha)`.
    /// The dual stays untouched.
    pub fn osf_update(&mut self, feedback: &UtilityFeedback) -> Result<StepInfo, PolicyError> {
        self.check_feedback(feedback)?;
        let alpha = self.params.alpha();
        let mut clamps = 0u32;
        let weights: Vec<f64> = feedback
            .values
            .iter()
            .map(|&u| {
                if alpha == 0.0 {
                    1.0
                } else if u <= OSF_CLAMP_EPS {
                    clamps += 1;
                    OSF_CLAMP_EPS.powf(-alpha)
                } else {
                    u.powf(-alpha)
                }
            })
            .collect();
        self.clamp_count += clamps as u64;
        let mut info = self.primal_step(&weights, &feedback.supergradients);
        info.clamps = clamps;
        self.t += 1;
        Ok(info)
    }

    fn primal_step(&mut self, weights: &[f64], supergradients: &[Vec<f64>]) -> StepInfo {
        let dim = self.domain.dim();
        let mut g = vec![0.0; dim];
        for (w, sg) in weights.iter().zip(supergradients) {
            for (gj, &sj) in g.iter_mut().zip(sg) {
                *gj += w * sj;
            }
        }
        let norm_sq: f64 = g.iter().map(|v| v * v).sum();
        self.grad_sq_accum += norm_sq;
        if self.grad_sq_accum <= 0.0 {
            // No gradient signal yet: the self-confident rate is undefined.
            return StepInfo::default();
        }
        let eta_x = self.diam / self.grad_sq_accum.sqrt();
        for (xj, gj) in self.x.iter_mut().zip(&g) {
            *xj += eta_x * gj;
        }
        self.domain.project_in_place(&mut self.x);
        self.last_eta_x = Some(eta_x);
        StepInfo {
            eta_x: Some(eta_x),
            eta_theta: None,
            clamps: 0,
        }
    }

    /// Per-slot feasibility check used by the invariant suite: the current
    /// iterates must lie in their sets.
    pub fn feasible(&self, tol: f64) -> bool {
        self.domain.contains(&self.x, tol)
            && self
                .theta
                .iter()
                .all(|&th| th >= self.theta_lo - tol && th <= self.theta_hi + tol)
    }
}
