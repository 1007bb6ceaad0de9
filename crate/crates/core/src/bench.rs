//! Offline benchmarks and metrics: horizon-fair / slot-fair / utilitarian
//! solvers over a replayable utility sequence, Pareto-front tracing,
//! price of fairness, fairness regret, and the severity diagnostics.

use crate::domain::Domain;
use crate::fairness::{alpha_fair_scalar, FairnessParams};
use crate::policy::UtilityFeedback;
use thiserror::Error;

/// Floor applied to utilities before fairness evaluation when a solver
/// iterate (or a run) leaves the function's domain; every application is
/// flagged in the result.
pub const UTILITY_FLOOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("benchmark error: {0}")]
    Invalid(String),
    #[error("price of fairness undefined: utilitarian welfare is {0}")]
    ZeroWelfare(f64),
}

/// A replayable utility sequence: the exact record of one run, evaluable
/// at arbitrary allocations. Implementations should override [`average`]
/// with a closed form when one exists.
///
/// [`average`]: ReplaySequence::average
pub trait ReplaySequence {
    fn n_agents(&self) -> usize;
    fn dim(&self) -> usize;
    fn horizon(&self) -> usize;
    /// Utilities and supergradients of slot `t` (0-based) at `x`.
    fn slot(&self, t: usize, x: &[f64]) -> UtilityFeedback;
    /// Time-averaged utilities and supergradients at `x`.
    fn average(&self, x: &[f64]) -> UtilityFeedback {
        let n = self.n_agents();
        let mut values = vec![0.0; n];
        let mut grads = vec![vec![0.0; self.dim()]; n];
        let t_total = self.horizon().max(1) as f64;
        for t in 0..self.horizon() {
            let fb = self.slot(t, x);
            for i in 0..n {
                values[i] += fb.values[i];
                for (acc, g) in grads[i].iter_mut().zip(&fb.supergradients[i]) {
                    *acc += g;
                }
            }
        }
        for i in 0..n {
            values[i] /= t_total;
            for g in grads[i].iter_mut() {
                *g /= t_total;
            }
        }
        UtilityFeedback {
            values,
            supergradients: grads,
        }
    }
}

/// Sequence defined by a slot-indexed closure; handy for small analytic
/// scenarios and tests.
pub struct FunctionSequence<F>
where
    F: Fn(usize, &[f64]) -> UtilityFeedback,
{
    pub f: F,
    pub horizon: usize,
    pub n_agents: usize,
    pub dim: usize,
}

impl<F> ReplaySequence for FunctionSequence<F>
where
    F: Fn(usize, &[f64]) -> UtilityFeedback,
{
    fn n_agents(&self) -> usize {
        self.n_agents
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn slot(&self, t: usize, x: &[f64]) -> UtilityFeedback {
        (self.f)(t, x)
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Starting point; defaults to the projection of the origin.
    pub x_init: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            grad_tol: 1e-6,
            x_init: None,
        }
    }
}

/// Solution of an offline benchmark problem.
#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub x_star: Vec<f64>,
    pub objective: f64,
    pub avg_utilities: Vec<f64>,
    pub iterations: usize,
    pub final_grad_norm: f64,
    /// True when the utility floor engaged anywhere on the solve path.
    pub floored: bool,
}

fn floored(u: f64, flag: &mut bool) -> f64 {
    if u < UTILITY_FLOOR {
        *flag = true;
        UTILITY_FLOOR
    } else {
        u
    }
}

/// `F_a` of a utility vector with the domain floor; flags applications.
pub fn fairness_objective(params: &FairnessParams, values: &[f64], flag: &mut bool) -> f64 {
    values
        .iter()
        .map(|&u| alpha_fair_scalar(params.alpha(), floored(u, flag)).expect("floored utility"))
        .sum()
}

/// Projected supergradient ascent with step `diam/sqrt(k)`, best-iterate
/// tracking and restart-doubling tail averaging. `grad_obj` returns the
/// supergradient and the objective at a point.
fn projected_ascent(
    domain: &Domain,
    opts: &SolverOptions,
    mut grad_obj: impl FnMut(&[f64]) -> (Vec<f64>, f64),
) -> (Vec<f64>, f64, usize, f64) {
    let diam = domain.diameter();
    let mut x = match &opts.x_init {
        Some(x0) => domain.project(x0).expect("x_init dimension"),
        None => domain.origin_projection(),
    };
    let (mut best_x, mut best_obj) = (x.clone(), f64::NEG_INFINITY);
    let mut tail_sum = vec![0.0; x.len()];
    let mut tail_count = 0usize;
    let mut next_restart = 2usize;
    let mut grad_norm = f64::INFINITY;
    let mut iters = 0;
    for k in 1..=opts.max_iters {
        iters = k;
        let (g, obj) = grad_obj(&x);
        if obj > best_obj {
            best_obj = obj;
            best_x.copy_from_slice(&x);
        }
        grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if grad_norm <= opts.grad_tol {
            break;
        }
        // Step length is capped at diam/sqrt(k): when the domain floor
        // engages, supergradient weights reach 1/floor^alpha and an
        // uncapped step would bounce between corners forever.
        let eta = diam / (k as f64).sqrt();
        let scale = if grad_norm > 1.0 { eta / grad_norm } else { eta };
        for (xj, gj) in x.iter_mut().zip(&g) {
            *xj += scale * gj;
        }
        domain.project_in_place(&mut x);
        for (s, xj) in tail_sum.iter_mut().zip(&x) {
            *s += xj;
        }
        tail_count += 1;
        if k == next_restart {
            tail_sum.iter_mut().for_each(|s| *s = 0.0);
            tail_count = 0;
            next_restart *= 2;
        }
    }
    // candidates: best observed iterate, final iterate, tail average
    let mut candidates = vec![best_x.clone(), x];
    if tail_count > 0 {
        candidates.push(tail_sum.iter().map(|s| s / tail_count as f64).collect());
    }
    let (mut out_x, mut out_obj) = (best_x, best_obj);
    for c in candidates {
        let (_, obj) = grad_obj(&c);
        if obj > out_obj {
            out_obj = obj;
            out_x = c;
        }
    }
    (out_x, out_obj, iters, grad_norm)
}

/// Maximizes the horizon-fair objective `F_a(avg_t u_t(x))` over the domain
/// by projected supergradient ascent with the chain-rule supergradient
/// `sum_i avg_u_i(x)^(-a) d avg_u_i(x)`.
pub fn solve_hf(
    seq: &dyn ReplaySequence,
    domain: &Domain,
    params: &FairnessParams,
    opts: &SolverOptions,
) -> Result<BenchmarkResult, BenchError> {
    check_dims(seq, domain, params)?;
    let alpha = params.alpha();
    let mut flag = false;
    let (x_star, objective, iterations, final_grad_norm) =
        projected_ascent(domain, opts, |x| {
            let fb = seq.average(x);
            let mut g = vec![0.0; domain.dim()];
            let mut obj = 0.0;
            for i in 0..params.n_agents() {
                let u = floored(fb.values[i], &mut flag);
                let w = u.powf(-alpha);
                for (gj, &dj) in g.iter_mut().zip(&fb.supergradients[i]) {
                    *gj += w * dj;
                }
                obj += alpha_fair_scalar(alpha, u).expect("floored utility");
            }
            (g, obj)
        });
    let avg = seq.average(&x_star).values;
    Ok(BenchmarkResult {
        x_star,
        objective,
        avg_utilities: avg,
        iterations,
        final_grad_norm,
        floored: flag,
    })
}

/// Maximizes the slot-fair objective `avg_t F_a(u_t(x))`.
pub fn solve_sf(
    seq: &dyn ReplaySequence,
    domain: &Domain,
    params: &FairnessParams,
    opts: &SolverOptions,
) -> Result<BenchmarkResult, BenchError> {
    check_dims(seq, domain, params)?;
    let alpha = params.alpha();
    let t_total = seq.horizon().max(1) as f64;
    let mut flag = false;
    let (x_star, objective, iterations, final_grad_norm) =
        projected_ascent(domain, opts, |x| {
            let mut g = vec![0.0; domain.dim()];
            let mut obj = 0.0;
            for t in 0..seq.horizon() {
                let fb = seq.slot(t, x);
                for i in 0..params.n_agents() {
                    let u = floored(fb.values[i], &mut flag);
                    let w = u.powf(-alpha) / t_total;
                    for (gj, &dj) in g.iter_mut().zip(&fb.supergradients[i]) {
                        *gj += w * dj;
                    }
                    obj += alpha_fair_scalar(alpha, u).expect("floored utility") / t_total;
                }
            }
            (g, obj)
        });
    let avg = seq.average(&x_star).values;
    Ok(BenchmarkResult {
        x_star,
        objective,
        avg_utilities: avg,
        iterations,
        final_grad_norm,
        floored: flag,
    })
}

/// The utilitarian benchmark: the horizon-fair solve at `alpha = 0`.
pub fn solve_utilitarian(
    seq: &dyn ReplaySequence,
    domain: &Domain,
    params: &FairnessParams,
    opts: &SolverOptions,
) -> Result<BenchmarkResult, BenchError> {
    let p0 = FairnessParams::new(
        0.0,
        params.u_star_min(),
        params.u_star_max(),
        params.n_agents(),
    )
    .expect("valid params stay valid at alpha = 0");
    solve_hf(seq, domain, &p0, opts)
}

fn check_dims(
    seq: &dyn ReplaySequence,
    domain: &Domain,
    params: &FairnessParams,
) -> Result<(), BenchError> {
    if seq.dim() != domain.dim() {
        return Err(BenchError::Invalid(format!(
            "sequence dimension {} != domain dimension {}",
            seq.dim(),
            domain.dim()
        )));
    }
    if seq.n_agents() != params.n_agents() {
        return Err(BenchError::Invalid(format!(
            "sequence has {} agents, params expect {}",
            seq.n_agents(),
            params.n_agents()
        )));
    }
    Ok(())
}

/// Social welfare: the plain utility sum.
pub fn welfare(avg_utilities: &[f64]) -> f64 {
    avg_utilities.iter().sum()
}

/// Price of fairness: relative welfare loss of the fair utilities against
/// the utilitarian optimum, in [0, 1] up to solver tolerance.
pub fn price_of_fairness(
    fair_avg_utilities: &[f64],
    utilitarian: &BenchmarkResult,
) -> Result<f64, BenchError> {
    let w_max = welfare(&utilitarian.avg_utilities);
    if w_max.abs() < 1e-12 {
        return Err(BenchError::ZeroWelfare(w_max));
    }
    Ok((w_max - welfare(fair_avg_utilities)) / w_max)
}

/// Fairness regret: benchmark objective minus the objective of the
/// realized average utilities (signed; negative values are kept).
pub fn fairness_regret(
    run_avg_utilities: &[f64],
    benchmark: &BenchmarkResult,
    params: &FairnessParams,
) -> f64 {
    let mut flag = false;
    benchmark.objective - fairness_objective(params, run_avg_utilities, &mut flag)
}

/// Severity diagnostics of a recorded sequence at a reference allocation.
#[derive(Debug, Clone)]
pub struct SeverityDiagnostics {
    /// Exact budgeted severity: total absolute perturbation of the
    /// average utilities.
    pub budgeted: f64,
    /// Upper estimate of the partitioned severity: the best value over the
    /// supplied uniform block sizes.
    pub partitioned_upper: f64,
    /// `(block size, deviation term, length penalty)` per candidate.
    pub per_block_size: Vec<(usize, f64, f64)>,
}

/// Computes the budgeted severity exactly and upper-estimates the
/// partitioned severity over uniform decompositions with the given block
/// sizes (defaults: 1, T^(1/4), T^(1/3), sqrt(T)).
pub fn severity_diagnostics(
    seq: &dyn ReplaySequence,
    x_star: &[f64],
    block_sizes: Option<Vec<usize>>,
) -> SeverityDiagnostics {
    let t_total = seq.horizon();
    let n = seq.n_agents();
    let avg = seq.average(x_star).values;
    // per-slot deviations delta_t = avg - u_t at the reference point
    let mut deltas: Vec<Vec<f64>> = Vec::with_capacity(t_total);
    let mut budgeted = 0.0;
    for t in 0..t_total {
        let fb = seq.slot(t, x_star);
        let d: Vec<f64> = (0..n).map(|i| avg[i] - fb.values[i]).collect();
        budgeted += d.iter().map(|v| v.abs()).sum::<f64>();
        deltas.push(d);
    }
    let tf = t_total as f64;
    let sizes = block_sizes.unwrap_or_else(|| {
        let mut s = vec![
            1,
            tf.powf(0.25).ceil() as usize,
            tf.powf(1.0 / 3.0).ceil() as usize,
            tf.sqrt().ceil() as usize,
        ];
        s.sort_unstable();
        s.dedup();
        s.retain(|&m| m >= 1 && m <= t_total.max(1));
        s
    });
    let mut per_block_size = Vec::with_capacity(sizes.len());
    let mut best = f64::INFINITY;
    for &m in &sizes {
        let mut deviation = 0.0;
        let mut penalty = 0.0;
        let mut start = 0usize;
        let mut seen = 0usize;
        while start < t_total {
            let len = m.min(t_total - start);
            for i in 0..n {
                let s: f64 = (start..start + len).map(|t| deltas[t][i]).sum();
                deviation += s.abs();
            }
            penalty += (len * len) as f64 / (seen as f64 + 1.0);
            seen += len;
            start += len;
        }
        per_block_size.push((m, deviation, penalty));
        if deviation + penalty < best {
            best = deviation + penalty;
        }
    }
    SeverityDiagnostics {
        budgeted,
        partitioned_upper: best,
        per_block_size,
    }
}

/// One point of a two-agent Pareto front.
#[derive(Debug, Clone, Copy)]
pub struct ParetoPoint {
    pub weight: f64,
    pub u1: f64,
    pub u2: f64,
}

/// Traces the average-utility Pareto front of a two-agent instance by
/// maximizing `w . avg_u(x)` over a weight grid and keeping the
/// nondominated hull.
pub fn pareto_front(
    seq: &dyn ReplaySequence,
    domain: &Domain,
    grid: usize,
    opts: &SolverOptions,
) -> Result<Vec<ParetoPoint>, BenchError> {
    if seq.n_agents() != 2 {
        return Err(BenchError::Invalid(format!(
            "Pareto fronts are traced for 2 agents, sequence has {}",
            seq.n_agents()
        )));
    }
    if grid < 2 {
        return Err(BenchError::Invalid("weight grid needs >= 2 points".into()));
    }
    let mut points = Vec::with_capacity(grid);
    for k in 0..grid {
        let w1 = k as f64 / (grid - 1) as f64;
        let w = [w1, 1.0 - w1];
        let (x, _, _, _) = projected_ascent(domain, opts, |x| {
            let fb = seq.average(x);
            let mut g = vec![0.0; domain.dim()];
            for i in 0..2 {
                for (gj, &dj) in g.iter_mut().zip(&fb.supergradients[i]) {
                    *gj += w[i] * dj;
                }
            }
            (g, w[0] * fb.values[0] + w[1] * fb.values[1])
        });
        let avg = seq.average(&x).values;
        points.push(ParetoPoint {
            weight: w1,
            u1: avg[0],
            u2: avg[1],
        });
    }
    // nondominated hull
    let mut front: Vec<ParetoPoint> = Vec::new();
    for p in &points {
        let dominated = points
            .iter()
            .any(|q| q.u1 >= p.u1 + 1e-12 && q.u2 >= p.u2 + 1e-12);
        if !dominated {
            front.push(*p);
        }
    }
    front.sort_by(|a, b| a.u1.partial_cmp(&b.u1).unwrap());
    Ok(front)
}

/// True when some front point strictly dominates `(u1, u2)` in both
/// coordinates by at least `margin`.
pub fn strictly_dominated(front: &[ParetoPoint], u1: f64, u2: f64, margin: f64) -> bool {
    front
        .iter()
        .any(|p| p.u1 > u1 + margin && p.u2 > u2 + margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::BoxDomain;
    use approx::assert_abs_diff_eq;

    /// The two-slot motivating example: utilities alternate between
    /// (1+x, 1-x) and (1+x, 1+x) over X = [0, x_max].
    fn motivating_sequence(horizon: usize) -> impl ReplaySequence {
        FunctionSequence {
            f: |t: usize, x: &[f64]| {
                let x = x[0];
                if t % 2 == 0 {
                    UtilityFeedback {
                        values: vec![1.0 + x, 1.0 - x],
                        supergradients: vec![vec![1.0], vec![-1.0]],
                    }
                } else {
                    UtilityFeedback {
                        values: vec![1.0 + x, 1.0 + x],
                        supergradients: vec![vec![1.0], vec![1.0]],
                    }
                }
            },
            horizon,
            n_agents: 2,
            dim: 1,
        }
    }

    fn interval(lo: f64, hi: f64) -> Domain {
        Domain::Box(BoxDomain::interval(lo, hi).unwrap())
    }

    #[test]
    fn hf_solver_on_motivating_example() {
        let seq = motivating_sequence(2);
        let domain = interval(0.0, 3.0);
        let params = FairnessParams::new(1.0, 0.1, 10.0, 2).unwrap();
        let res = solve_hf(&seq, &domain, &params, &SolverOptions::default()).unwrap();
        // the averaged utilities are (1+x, 1), so the optimum is x_max
        assert_abs_diff_eq!(res.x_star[0], 3.0, epsilon = 1e-3);
        assert_abs_diff_eq!(res.avg_utilities[0], 4.0, epsilon = 1e-3);
        assert_abs_diff_eq!(res.avg_utilities[1], 1.0, epsilon = 1e-3);
    }

    #[test]
    fn sf_solver_on_motivating_example() {
        let seq = motivating_sequence(2);
        let domain = interval(0.0, 3.0);
        let params = FairnessParams::new(1.0, 0.1, 10.0, 2).unwrap();
        let res = solve_sf(&seq, &domain, &params, &SolverOptions::default()).unwrap();
        // slot fairness confines x below 1; the optimum is 1/2
        assert_abs_diff_eq!(res.x_star[0], 0.5, epsilon = 5e-3);
    }

    #[test]
    fn pof_values_on_motivating_example() {
        let seq = motivating_sequence(2);
        let domain = interval(0.0, 3.0);
        let params = FairnessParams::new(1.0, 0.1, 10.0, 2).unwrap();
        let opts = SolverOptions::default();
        let util = solve_utilitarian(&seq, &domain, &params, &opts).unwrap();
        let hf = solve_hf(&seq, &domain, &params, &opts).unwrap();
        let sf = solve_sf(&seq, &domain, &params, &opts).unwrap();
        let pof_hf = price_of_fairness(&hf.avg_utilities, &util).unwrap();
        let pof_sf = price_of_fairness(&sf.avg_utilities, &util).unwrap();
        assert_abs_diff_eq!(pof_hf, 0.0, epsilon = 1e-6);
        // (x_max - 0.5) / (x_max + 2) = 0.5 at x_max = 3
        assert_abs_diff_eq!(pof_sf, 0.5, epsilon = 1e-3);
    }

    #[test]
    fn sf_equals_hf_for_alpha_zero_and_fixed_utilities() {
        let domain = interval(0.0, 1.0);
        let opts = SolverOptions::default();
        // alpha = 0: the objectives coincide by linearity
        let seq = motivating_sequence(4);
        let p0 = FairnessParams::new(0.0, 0.1, 10.0, 2).unwrap();
        let hf = solve_hf(&seq, &domain, &p0, &opts).unwrap();
        let sf = solve_sf(&seq, &domain, &p0, &opts).unwrap();
        assert_abs_diff_eq!(hf.objective, sf.objective, epsilon = 1e-6);
        // fixed utilities: they coincide for any alpha
        let fixed = FunctionSequence {
            f: |_t: usize, x: &[f64]| UtilityFeedback {
                values: vec![1.0 + x[0], 2.0 - x[0]],
                supergradients: vec![vec![1.0], vec![-1.0]],
            },
            horizon: 5,
            n_agents: 2,
            dim: 1,
        };
        let p2 = FairnessParams::new(2.0, 0.1, 10.0, 2).unwrap();
        let hf = solve_hf(&fixed, &domain, &p2, &opts).unwrap();
        let sf = solve_sf(&fixed, &domain, &p2, &opts).unwrap();
        assert_abs_diff_eq!(hf.x_star[0], sf.x_star[0], epsilon = 1e-3);
    }

    #[test]
    fn hf_solver_on_two_phase_strategy() {
        // gamma = 1 phase: fixed utilities (1+x, 2-x); the optimum is 1/2.
        let seq = FunctionSequence {
            f: |_t: usize, x: &[f64]| UtilityFeedback {
                values: vec![1.0 + x[0], 2.0 - x[0]],
                supergradients: vec![vec![1.0], vec![-1.0]],
            },
            horizon: 3,
            n_agents: 2,
            dim: 1,
        };
        let domain = interval(-1.0, 1.0);
        for &alpha in &[1.0, 2.0, 3.0] {
            let params = FairnessParams::new(alpha, 0.1, 10.0, 2).unwrap();
            let res = solve_hf(&seq, &domain, &params, &SolverOptions::default()).unwrap();
            assert_abs_diff_eq!(res.x_star[0], 0.5, epsilon = 2e-3);
        }
    }

    #[test]
    fn hf_objective_dominates_random_feasible_points() {
        let seq = motivating_sequence(2);
        let domain = interval(0.0, 3.0);
        let params = FairnessParams::new(2.0, 0.1, 10.0, 2).unwrap();
        let res = solve_hf(&seq, &domain, &params, &SolverOptions::default()).unwrap();
        let mut flag = false;
        for k in 0..100 {
            let x = vec![3.0 * k as f64 / 99.0];
            let obj = fairness_objective(&params, &seq.average(&x).values, &mut flag);
            assert!(res.objective >= obj - 1e-6);
        }
    }

    #[test]
    fn benchmark_stability_under_doubled_budget() {
        let seq = motivating_sequence(2);
        let domain = interval(0.0, 3.0);
        let params = FairnessParams::new(1.0, 0.1, 10.0, 2).unwrap();
        let a = solve_hf(&seq, &domain, &params, &SolverOptions::default()).unwrap();
        let b = solve_hf(
            &seq,
            &domain,
            &params,
            &SolverOptions {
                max_iters: 20_000,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-7);
    }

    #[test]
    fn regret_zero_when_replaying_the_benchmark() {
        let seq = motivating_sequence(2);
        let domain = interval(0.0, 3.0);
        let params = FairnessParams::new(1.0, 0.1, 10.0, 2).unwrap();
        let bench = solve_hf(&seq, &domain, &params, &SolverOptions::default()).unwrap();
        let run_avg = seq.average(&bench.x_star).values;
        assert_abs_diff_eq!(
            fairness_regret(&run_avg, &bench, &params),
            0.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn severity_of_fixed_utilities_is_zero() {
        let fixed = FunctionSequence {
            f: |_t: usize, x: &[f64]| UtilityFeedback {
                values: vec![1.0 + x[0], 2.0 - x[0]],
                supergradients: vec![vec![1.0], vec![-1.0]],
            },
            horizon: 100,
            n_agents: 2,
            dim: 1,
        };
        let d = severity_diagnostics(&fixed, &[0.5], None);
        assert_eq!(d.budgeted, 0.0);
        // the deviation term vanishes; only the length penalty remains
        assert!(d.partitioned_upper > 0.0);
        for (_, dev, _) in &d.per_block_size {
            assert_eq!(*dev, 0.0);
        }
    }

    #[test]
    fn severity_partition_beats_budget_for_periodic_inputs() {
        // period-2 alternation cancels inside aligned blocks of 2
        let seq = motivating_sequence(1000);
        let d = severity_diagnostics(&seq, &[1.0], Some(vec![2]));
        assert!(d.budgeted > 100.0);
        let (_, dev, pen) = d.per_block_size[0];
        assert_abs_diff_eq!(dev, 0.0, epsilon = 1e-9);
        assert!(dev + pen < d.budgeted);
    }

    #[test]
    fn pareto_front_of_symmetric_instance() {
        // symmetric agents: u = (x1, x2) over the capped simplex sum <= 1
        let seq = FunctionSequence {
            f: |_t: usize, x: &[f64]| UtilityFeedback {
                values: vec![x[0], x[1]],
                supergradients: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            },
            horizon: 1,
            n_agents: 2,
            dim: 2,
        };
        let domain = Domain::CappedSimplex(
            crate::domain::CappedSimplexDomain::plain(2, 1.0).unwrap(),
        );
        let opts = SolverOptions {
            max_iters: 2000,
            ..Default::default()
        };
        let front = pareto_front(&seq, &domain, 11, &opts).unwrap();
        assert!(!front.is_empty());
        for p in &front {
            // the front is the budget line u1 + u2 = 1
            assert_abs_diff_eq!(p.u1 + p.u2, 1.0, epsilon = 5e-3);
        }
        // symmetry about the diagonal
        let w0 = front.iter().find(|p| p.weight == 0.0).unwrap();
        let w1 = front.iter().find(|p| p.weight == 1.0).unwrap();
        assert_abs_diff_eq!(w0.u1, w1.u2, epsilon = 5e-3);
        // the w = (1, 0) endpoint dominates every point in agent-1 utility
        for p in &front {
            assert!(w1.u1 >= p.u1 - 5e-3);
        }
        // interior points are strictly dominated by the front
        assert!(strictly_dominated(&front, 0.2, 0.2, 1e-6));
        assert!(!strictly_dominated(&front, 0.55, 0.55, 1e-6));
    }
}
