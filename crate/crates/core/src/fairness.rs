//! Alpha-fairness welfare functions, their convex conjugates, and utility
//! transforms (weighted fairness, Nash bargaining).
//!
//! The welfare of a utility vector `u` is `F_a(u) = sum_i f_a(u_i)` where
//! `f_a` interpolates between the utilitarian sum (`a = 0`), proportional
//! fairness (`a = 1`, log utilities) and max-min fairness (`a -> inf`).
//! The dual-space machinery works with the convex conjugate of `-F_a`
//! restricted to the box `Theta = [-1/u_min^a, -1/u_max^a]^n`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FairnessError {
    #[error("invalid utility {value} for agent {agent} (alpha = {alpha}): {reason}")]
    InvalidUtility {
        agent: usize,
        value: f64,
        alpha: f64,
        reason: &'static str,
    },
    #[error("dual point component {value} for agent {agent} outside Theta = [{lo}, {hi}]")]
    ThetaOutOfDomain {
        agent: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("operation unsupported for alpha = {alpha}: {reason}")]
    UnsupportedAlpha { alpha: f64, reason: &'static str },
    #[error("invalid fairness parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// The tuple `(alpha, u_star_min, u_star_max, n_agents)` defining the
/// fairness objective and the dual box Theta.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessParams {
    alpha: f64,
    u_star_min: f64,
    u_star_max: f64,
    n_agents: usize,
}

impl FairnessParams {
    pub fn new(
        alpha: f64,
        u_star_min: f64,
        u_star_max: f64,
        n_agents: usize,
    ) -> Result<Self, FairnessError> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(FairnessError::InvalidParams(format!(
                "alpha must be finite and >= 0, got {alpha}"
            )));
        }
        if !(u_star_min > 0.0) || !(u_star_max >= u_star_min) || !u_star_max.is_finite() {
            return Err(FairnessError::InvalidParams(format!(
                "need 0 < u_star_min <= u_star_max, got [{u_star_min}, {u_star_max}]"
            )));
        }
        if n_agents == 0 {
            return Err(FairnessError::InvalidParams(
                "n_agents must be positive".into(),
            ));
        }
        Ok(Self {
            alpha,
            u_star_min,
            u_star_max,
            n_agents,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn u_star_min(&self) -> f64 {
        self.u_star_min
    }

    pub fn u_star_max(&self) -> f64 {
        self.u_star_max
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    /// Per-coordinate bounds `(lo, hi)` of the dual box
    /// `Theta = [-1/u_min^a, -1/u_max^a]`. For `alpha = 0` both bounds
    /// collapse to -1 (the dual degenerates to a singleton).
    pub fn theta_box(&self) -> (f64, f64) {
        let lo = -self.u_star_min.powf(-self.alpha);
        let hi = -self.u_star_max.powf(-self.alpha);
        (lo, hi)
    }

    /// Componentwise midpoint of Theta, the default dual initializer.
    pub fn theta_midpoint(&self) -> Vec<f64> {
        let (lo, hi) = self.theta_box();
        vec![0.5 * (lo + hi); self.n_agents]
    }

    fn check_theta(&self, theta: &[f64]) -> Result<(), FairnessError> {
        if theta.len() != self.n_agents {
            return Err(FairnessError::DimensionMismatch {
                expected: self.n_agents,
                got: theta.len(),
            });
        }
        let (lo, hi) = self.theta_box();
        // Tiny slack so points produced by clamping to the box re-validate.
        let tol = 1e-12 * (1.0 + lo.abs());
        for (i, &th) in theta.iter().enumerate() {
            if !(th >= lo - tol && th <= hi + tol) {
                return Err(FairnessError::ThetaOutOfDomain {
                    agent: i,
                    value: th,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }
}

/// Scalar fairness kernel `f_a(u)`: `(u^(1-a) - 1)/(1-a)` for `a != 1`,
/// `ln(u)` for `a = 1`. The log branch is selected by exact equality on
/// `alpha`. For `a < 1` the value at `u = 0` is the finite limit
/// `-1/(1-a)`, so zero utilities of absent agents are admissible.
pub fn alpha_fair_scalar(alpha: f64, u: f64) -> Result<f64, FairnessError> {
    alpha_fair_scalar_for_agent(alpha, u, 0)
}

fn alpha_fair_scalar_for_agent(alpha: f64, u: f64, agent: usize) -> Result<f64, FairnessError> {
    if alpha >= 1.0 {
        if !(u > 0.0) {
            return Err(FairnessError::InvalidUtility {
                agent,
                value: u,
                alpha,
                reason: "utility must be strictly positive for alpha >= 1",
            });
        }
    } else if !(u >= 0.0) {
        return Err(FairnessError::InvalidUtility {
            agent,
            value: u,
            alpha,
            reason: "utility must be nonnegative for alpha < 1",
        });
    }
    if alpha == 1.0 {
        Ok(u.ln())
    } else {
        Ok((u.powf(1.0 - alpha) - 1.0) / (1.0 - alpha))
    }
}

/// `F_a(u) = sum_i f_a(u_i)`.
pub fn alpha_fair_value(params: &FairnessParams, u: &[f64]) -> Result<f64, FairnessError> {
    if u.len() != params.n_agents {
        return Err(FairnessError::DimensionMismatch {
            expected: params.n_agents,
            got: u.len(),
        });
    }
    let mut total = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        total += alpha_fair_scalar_for_agent(params.alpha, ui, i)?;
    }
    Ok(total)
}

fn conjugate_scalar(alpha: f64, theta: f64) -> f64 {
    if alpha == 1.0 {
        -(-theta).ln() - 1.0
    } else {
        (alpha * (-theta).powf(1.0 - 1.0 / alpha) - 1.0) / (1.0 - alpha)
    }
}

/// Value of the convex conjugate `(-F_a)*` at `theta` in Theta.
/// Requires `alpha > 0`; for `alpha = 0` the conjugate degenerates (the
/// dual box is the singleton -1) and callers should freeze the dual.
pub fn conjugate_value(params: &FairnessParams, theta: &[f64]) -> Result<f64, FairnessError> {
    if params.alpha == 0.0 {
        return Err(FairnessError::UnsupportedAlpha {
            alpha: 0.0,
            reason: "conjugate degenerates at alpha = 0; the dual is frozen at -1",
        });
    }
    params.check_theta(theta)?;
    Ok(theta
        .iter()
        .map(|&th| conjugate_scalar(params.alpha, th))
        .sum())
}

/// Gradient of the conjugate: component `i` is `(-theta_i)^(-1/alpha)`.
/// Maps Theta into the utility box `[u_min, u_max]^n`.
pub fn conjugate_gradient(
    params: &FairnessParams,
    theta: &[f64],
) -> Result<Vec<f64>, FairnessError> {
    if params.alpha == 0.0 {
        return Err(FairnessError::UnsupportedAlpha {
            alpha: 0.0,
            reason: "conjugate degenerates at alpha = 0; the dual is frozen at -1",
        });
    }
    params.check_theta(theta)?;
    Ok(theta
        .iter()
        .map(|&th| (-th).powf(-1.0 / params.alpha))
        .collect())
}

/// Result of recovering `F_a(u)` from the conjugate.
#[derive(Debug, Clone)]
pub struct FenchelRecovery {
    /// `min_theta { (-F_a)*(theta) - theta . u }` over the box.
    pub value: f64,
    /// The box-constrained minimizer, `-1/u_i^a` clamped to Theta.
    pub minimizer: Vec<f64>,
    /// True when `u` left the assumed box and the minimizer was clamped.
    pub clamped: bool,
}

/// Recovers `F_a(u) = min_{theta in Theta} { (-F_a)*(theta) - theta . u }`.
///
/// For in-box `u` the closed-form minimizer is `theta_i = -1/u_i^a` and the
/// minimum equals `F_a(u)` exactly. Out-of-box `u` is admitted: the
/// per-coordinate minimizer is clamped to Theta (the objective is convex in
/// each `theta_i`, so the projection of the unconstrained minimizer is the
/// constrained one) and the result is flagged.
pub fn fenchel_recover(
    params: &FairnessParams,
    u: &[f64],
) -> Result<FenchelRecovery, FairnessError> {
    if params.alpha == 0.0 {
        return Err(FairnessError::UnsupportedAlpha {
            alpha: 0.0,
            reason: "recovery needs alpha > 0",
        });
    }
    if u.len() != params.n_agents {
        return Err(FairnessError::DimensionMismatch {
            expected: params.n_agents,
            got: u.len(),
        });
    }
    let (lo, hi) = params.theta_box();
    let mut clamped = false;
    let mut minimizer = Vec::with_capacity(u.len());
    let mut value = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        if !(ui > 0.0) {
            return Err(FairnessError::InvalidUtility {
                agent: i,
                value: ui,
                alpha: params.alpha,
                reason: "recovery needs strictly positive utilities",
            });
        }
        let unclamped = -ui.powf(-params.alpha);
        let th = unclamped.clamp(lo, hi);
        if th != unclamped {
            clamped = true;
        }
        value += conjugate_scalar(params.alpha, th) - th * ui;
        minimizer.push(th);
    }
    Ok(FenchelRecovery {
        value,
        minimizer,
        clamped,
    })
}

/// Rescales utilities so plain alpha-fairness of the result realizes the
/// weighted `(w, a)`-fairness of the input: `u_i' = w_i^(1/(1-a)) u_i` for
/// `a != 1` and `u_i' = u_i^(w_i)` for `a = 1`.
pub fn weighted_transform(
    params: &FairnessParams,
    weights: &[f64],
    u: &[f64],
) -> Result<Vec<f64>, FairnessError> {
    if weights.len() != params.n_agents || u.len() != params.n_agents {
        return Err(FairnessError::DimensionMismatch {
            expected: params.n_agents,
            got: weights.len().max(u.len()),
        });
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(FairnessError::InvalidParams(format!(
            "weights must lie on the probability simplex (sum = {sum})"
        )));
    }
    let mut out = Vec::with_capacity(u.len());
    for (i, (&w, &ui)) in weights.iter().zip(u).enumerate() {
        if params.alpha == 1.0 {
            if !(ui > 0.0) {
                return Err(FairnessError::InvalidUtility {
                    agent: i,
                    value: ui,
                    alpha: params.alpha,
                    reason: "u^w needs positive utility at alpha = 1",
                });
            }
            out.push(ui.powf(w));
        } else {
            out.push(w.powf(1.0 / (1.0 - params.alpha)) * ui);
        }
    }
    Ok(out)
}

/// Nash-bargaining shift: componentwise `u - d` against the disagreement
/// point `d`. A nonpositive component signals an infeasible bargaining
/// outcome; the error surfaces downstream when `f_1` is evaluated.
pub fn nbs_transform(u: &[f64], disagreement: &[f64]) -> Vec<f64> {
    u.iter().zip(disagreement).map(|(a, b)| a - b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(alpha: f64, lo: f64, hi: f64, n: usize) -> FairnessParams {
        FairnessParams::new(alpha, lo, hi, n).unwrap()
    }

    #[test]
    fn scalar_values() {
        assert_abs_diff_eq!(alpha_fair_scalar(1.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(alpha_fair_scalar(0.0, 3.0).unwrap(), 2.0);
        assert_abs_diff_eq!(alpha_fair_scalar(2.0, 2.0).unwrap(), 0.5);
        // finite limit at u = 0 for alpha < 1
        assert_abs_diff_eq!(alpha_fair_scalar(0.5, 0.0).unwrap(), -2.0);
        assert!(alpha_fair_scalar(1.0, 0.0).is_err());
        assert!(alpha_fair_scalar(2.0, -0.1).is_err());
        assert!(alpha_fair_scalar(0.5, -0.1).is_err());
    }

    #[test]
    fn vector_values() {
        let p = params(1.0, 0.1, 10.0, 2);
        assert_abs_diff_eq!(alpha_fair_value(&p, &[1.0, 1.0]).unwrap(), 0.0);
        let p0 = params(0.0, 0.1, 10.0, 2);
        assert_abs_diff_eq!(alpha_fair_value(&p0, &[1.5, 2.5]).unwrap(), 2.0);
        let p2 = params(2.0, 0.1, 10.0, 2);
        assert_abs_diff_eq!(alpha_fair_value(&p2, &[2.0, 2.0]).unwrap(), 1.0);
        assert!(alpha_fair_value(&p, &[1.0]).is_err());
    }

    #[test]
    fn theta_box_endpoints() {
        let p = params(1.0, 0.1, 1.0, 3);
        assert_eq!(p.theta_box(), (-10.0, -1.0));
        assert_eq!(p.theta_midpoint(), vec![-5.5; 3]);
        let p2 = params(2.0, 0.5, 1.0, 1);
        assert_eq!(p2.theta_box(), (-4.0, -1.0));
        let p0 = params(0.0, 0.3, 2.0, 1);
        assert_eq!(p0.theta_box(), (-1.0, -1.0));
    }

    #[test]
    fn conjugate_values() {
        let p1 = params(1.0, 0.1, 1.0, 1);
        assert_abs_diff_eq!(conjugate_value(&p1, &[-1.0]).unwrap(), -1.0);
        let p2 = params(2.0, 0.5, 1.0, 1);
        assert_abs_diff_eq!(conjugate_value(&p2, &[-1.0]).unwrap(), -1.0);
        let ph = params(0.5, 0.1, 1.0, 1);
        assert_abs_diff_eq!(conjugate_value(&ph, &[-2.0]).unwrap(), -1.5);
        // outside the box
        assert!(conjugate_value(&p1, &[-11.0]).is_err());
        assert!(conjugate_value(&p1, &[-0.5]).is_err());
        // alpha = 0 unsupported
        let p0 = params(0.0, 0.1, 1.0, 1);
        assert!(matches!(
            conjugate_value(&p0, &[-1.0]),
            Err(FairnessError::UnsupportedAlpha { .. })
        ));
    }

    #[test]
    fn conjugate_gradient_values() {
        let p1 = params(1.0, 0.1, 1.0, 1);
        // -0.5 is outside [-10, -1]
        assert!(matches!(
            conjugate_gradient(&p1, &[-0.5]),
            Err(FairnessError::ThetaOutOfDomain { agent: 0, .. })
        ));
        let p1w = params(1.0, 0.1, 2.0, 1);
        assert_abs_diff_eq!(conjugate_gradient(&p1w, &[-0.5]).unwrap()[0], 2.0);
        let p2 = params(2.0, 0.5, 1.0, 1);
        assert_abs_diff_eq!(conjugate_gradient(&p2, &[-4.0]).unwrap()[0], 0.5);
        // box endpoints map to utility-box endpoints
        let p = params(1.0, 0.1, 1.0, 2);
        let g = conjugate_gradient(&p, &[-10.0, -1.0]).unwrap();
        assert_abs_diff_eq!(g[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn conjugate_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &alpha in &[0.5, 1.0, 2.0, 3.0] {
            let p = params(alpha, 0.2, 2.0, 3);
            let (lo, hi) = p.theta_box();
            for _ in 0..25 {
                // interior points only, so central differences stay in-box
                let theta: Vec<f64> = (0..3)
                    .map(|_| lo + (hi - lo) * rng.random_range(0.05..0.95))
                    .collect();
                let grad = conjugate_gradient(&p, &theta).unwrap();
                for i in 0..3 {
                    let h = 1e-6 * theta[i].abs();
                    let mut tp = theta.clone();
                    let mut tm = theta.clone();
                    tp[i] += h;
                    tm[i] -= h;
                    let fd = (conjugate_value(&p, &tp).unwrap()
                        - conjugate_value(&p, &tm).unwrap())
                        / (2.0 * h);
                    let rel = (grad[i] - fd).abs() / grad[i].abs().max(1e-12);
                    assert!(
                        rel <= 1e-5,
                        "alpha={alpha} i={i} grad={} fd={fd} rel={rel}",
                        grad[i]
                    );
                }
            }
        }
    }

    #[test]
    fn fenchel_recovery_closed_form() {
        let p1 = params(1.0, 0.1, 1.0, 2);
        let rec = fenchel_recover(&p1, &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(rec.value, 0.0, epsilon = 1e-12);
        assert_eq!(rec.minimizer, vec![-1.0, -1.0]);
        assert!(!rec.clamped);

        let p2 = params(2.0, 0.5, 1.0, 1);
        let rec = fenchel_recover(&p2, &[0.5]).unwrap();
        assert_abs_diff_eq!(rec.value, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rec.minimizer[0], -4.0, epsilon = 1e-12);
    }

    #[test]
    fn fenchel_recovery_clamps_out_of_box() {
        let p = params(1.0, 0.5, 2.0, 1);
        let rec = fenchel_recover(&p, &[4.0]).unwrap();
        assert!(rec.clamped);
        assert_abs_diff_eq!(rec.minimizer[0], -0.5, epsilon = 1e-12);
        // clamped value upper-bounds F_a(u): it is the box-constrained min
        assert!(rec.value >= alpha_fair_value(&p, &[4.0]).unwrap() - 1e-12);
    }

    /// Independent oracle: dense per-coordinate grid search over Theta.
    /// The objective is separable, so a 1-D scan per coordinate is exact
    /// up to the grid resolution.
    fn grid_recovery_oracle(p: &FairnessParams, u: &[f64], points: usize) -> f64 {
        let (lo, hi) = p.theta_box();
        let mut total = 0.0;
        for &ui in u {
            let mut best = f64::INFINITY;
            for k in 0..points {
                let th = lo + (hi - lo) * (k as f64) / ((points - 1) as f64);
                let v = conjugate_scalar(p.alpha, th) - th * ui;
                if v < best {
                    best = v;
                }
            }
            total += best;
        }
        total
    }

    #[test]
    fn fenchel_recovery_random_draws_match_value_and_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let alpha = [0.5, 1.0, 2.0, 3.0][rng.random_range(0..4)];
            let p = params(alpha, 0.5, 2.0, 2);
            let u: Vec<f64> = (0..2).map(|_| rng.random_range(0.5..2.0)).collect();
            let rec = fenchel_recover(&p, &u).unwrap();
            let direct = alpha_fair_value(&p, &u).unwrap();
            assert!(
                (rec.value - direct).abs() <= 1e-8,
                "alpha={alpha} u={u:?} rec={} direct={direct}",
                rec.value
            );
            let grid = grid_recovery_oracle(&p, &u, 20_000);
            assert!(
                rec.value <= grid + 1e-12 && (rec.value - grid).abs() <= 1e-6,
                "closed form must match the grid oracle: {} vs {grid}",
                rec.value
            );
        }
    }

    #[test]
    fn weighted_transform_values() {
        let p0 = params(0.0, 0.1, 10.0, 2);
        assert_eq!(
            weighted_transform(&p0, &[0.5, 0.5], &[2.0, 4.0]).unwrap(),
            vec![1.0, 2.0]
        );
        let p1 = params(1.0, 0.1, 10.0, 2);
        let e = std::f64::consts::E;
        let out = weighted_transform(&p1, &[1.0, 0.0], &[e, 5.0]).unwrap();
        assert_abs_diff_eq!(out[0], e, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 1.0, epsilon = 1e-12);
        let p2 = params(2.0, 0.1, 10.0, 2);
        let out = weighted_transform(&p2, &[0.25, 0.75], &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(out[0], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 4.0 / 3.0, epsilon = 1e-12);
        // alpha = 1 with nonpositive utility is a domain error
        assert!(weighted_transform(&p1, &[0.5, 0.5], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn nbs_transform_values() {
        assert_eq!(nbs_transform(&[1.0, 1.0], &[0.0, 0.0]), vec![1.0, 1.0]);
        let out = nbs_transform(&[1.5, 0.9], &[0.5, 0.7]);
        assert_abs_diff_eq!(out[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 0.2, epsilon = 1e-12);
        // violated disagreement surfaces downstream at alpha = 1
        let out = nbs_transform(&[0.6], &[0.7]);
        assert!(alpha_fair_scalar(1.0, out[0]).is_err());
    }

    #[test]
    fn monotonicity_and_concavity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &alpha in &[0.0, 0.5, 1.0, 2.0, 3.0] {
            let p = params(alpha, 0.01, 100.0, 3);
            for _ in 0..200 {
                let u: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..5.0)).collect();
                let mut u2 = u.clone();
                let j = rng.random_range(0..3);
                u2[j] += rng.random_range(0.01..1.0);
                let a = alpha_fair_value(&p, &u).unwrap();
                let b = alpha_fair_value(&p, &u2).unwrap();
                assert!(b > a, "monotonicity violated at alpha={alpha}");

                let v: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..5.0)).collect();
                let lam: f64 = rng.random_range(0.01..0.99);
                let mix: Vec<f64> = u
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| lam * a + (1.0 - lam) * b)
                    .collect();
                let fmix = alpha_fair_value(&p, &mix).unwrap();
                let fv = alpha_fair_value(&p, &v).unwrap();
                assert!(
                    fmix >= lam * a + (1.0 - lam) * fv - 1e-10,
                    "concavity violated at alpha={alpha}"
                );
            }
        }
    }

    #[test]
    fn strong_convexity_witness() {
        // Bregman gap of the conjugate must dominate the quadratic with
        // modulus u_min^(1+1/a)/a over Theta. The conjugate's curvature at
        // theta is (-theta)^(-(1+1/a))/a, so this modulus is valid on boxes
        // with u_min >= 1 (for a >= 1); the witness samples such a box.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &alpha in &[0.5, 1.0, 2.0, 3.0] {
            let p = params(alpha, 1.0, 3.0, 2);
            let (lo, hi) = p.theta_box();
            let sigma = p.u_star_min().powf(1.0 + 1.0 / alpha) / alpha;
            for _ in 0..200 {
                let a: Vec<f64> = (0..2).map(|_| rng.random_range(lo..=hi)).collect();
                let b: Vec<f64> = (0..2).map(|_| rng.random_range(lo..=hi)).collect();
                let fa = conjugate_value(&p, &a).unwrap();
                let fb = conjugate_value(&p, &b).unwrap();
                let gb = conjugate_gradient(&p, &b).unwrap();
                let lin: f64 = gb.iter().zip(a.iter().zip(&b)).map(|(g, (x, y))| g * (x - y)).sum();
                let dist2: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
                assert!(
                    fa - fb - lin >= 0.5 * sigma * dist2 - 1e-10,
                    "Bregman gap too small at alpha={alpha}"
                );
            }
        }
    }
}
