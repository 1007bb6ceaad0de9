//! Experiment execution: the decide/reveal/update loop, per-slot invariant
//! checks, metric accumulation, and post-run benchmarks on the recorded
//! sequence.

use crate::bench::{
    fairness_objective, fairness_regret, pareto_front, price_of_fairness, severity_diagnostics,
    solve_hf, solve_sf, solve_utilitarian, BenchError, BenchmarkResult, ParetoPoint,
    ReplaySequence, SeverityDiagnostics, SolverOptions,
};
use crate::cache::{CacheError, CacheNetwork, EvictionKind, PathReplication};
use crate::domain::Domain;
use crate::fairness::{FairnessError, FairnessParams};
use crate::policy::{PolicyError, PolicyState, UtilityFeedback};
use crate::runner::config::{ConfigError, ExperimentConfig, PolicyKind, StartState};
use crate::runner::env::{
    uniform_point, CacheEnv, EnvError, SyntheticEnv, TransformedReplay, UtilityTransform,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Fairness(#[from] FairnessError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("invariant violated at slot {slot}: {detail}")]
    Invariant { slot: usize, detail: String },
    #[error("output error: {0}")]
    Output(String),
}

/// Per-slot telescoping-identity tolerance, relative to the batch scale.
const TELESCOPE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Default)]
pub struct BenchmarkSet {
    pub hf: Option<BenchmarkResult>,
    pub sf: Option<BenchmarkResult>,
    pub utilitarian: Option<BenchmarkResult>,
    pub pareto: Option<Vec<ParetoPoint>>,
}

#[derive(Debug, Clone)]
pub struct RunMetrics {
    /// Raw cumulative utilities, `[slot][agent]`.
    pub per_slot_cum: Vec<Vec<f64>>,
    /// Cumulative utilities in the transformed space, when a transform is
    /// active (the objective the policy optimizes).
    pub per_slot_cum_transformed: Option<Vec<Vec<f64>>>,
    pub final_avg: Vec<f64>,
    pub final_avg_transformed: Option<Vec<f64>>,
    /// Fairness objective of the final averaged (transformed) utilities.
    pub objective: f64,
    pub objective_floored: bool,
    pub regret: Option<f64>,
    pub pof: Option<f64>,
    /// Slot-fair transform floors applied by the policy.
    pub clamp_count: u64,
    /// Floors applied by the utility transform (bargaining/weighted modes).
    pub transform_floor_count: u64,
}

impl RunMetrics {
    /// Time-averaged utilities after `t` slots (1-based), in the space used
    /// for the objective.
    pub fn avg_at(&self, t: usize) -> Vec<f64> {
        let cum = self
            .per_slot_cum_transformed
            .as_ref()
            .unwrap_or(&self.per_slot_cum);
        cum[t - 1].iter().map(|c| c / t as f64).collect()
    }

    pub fn raw_avg_at(&self, t: usize) -> Vec<f64> {
        self.per_slot_cum[t - 1].iter().map(|c| c / t as f64).collect()
    }
}

pub struct RunArtifacts {
    pub config: ExperimentConfig,
    pub params: FairnessParams,
    pub metrics: RunMetrics,
    pub benchmarks: BenchmarkSet,
    pub severity: Option<SeverityDiagnostics>,
    /// Raw average utilities at the fair benchmark's allocation.
    pub hf_raw_avg_utilities: Option<Vec<f64>>,
    pub replay: ReplayHandle,
}

/// Owned recorded sequence of the run, replayable for further analysis.
pub enum ReplayHandle {
    Cache {
        net: CacheNetwork,
        slots: Vec<crate::cache::RequestBatch>,
        scales: Vec<f64>,
    },
    Synthetic(crate::runner::env::SyntheticReplay),
}

impl ReplayHandle {
    pub fn sequence(&self) -> Box<dyn ReplaySequence + '_> {
        match self {
            ReplayHandle::Cache { net, slots, scales } => {
                Box::new(crate::runner::env::CacheReplay::new(net, slots, scales))
            }
            ReplayHandle::Synthetic(s) => Box::new(SyntheticPrefix { inner: s, len: None }),
        }
    }

    /// The recorded sequence truncated to its first `t` slots.
    pub fn prefix_sequence(&self, t: usize) -> Box<dyn ReplaySequence + '_> {
        match self {
            ReplayHandle::Cache { net, slots, scales } => Box::new(
                crate::runner::env::CacheReplay::new(net, &slots[..t.min(slots.len())], scales),
            ),
            ReplayHandle::Synthetic(s) => Box::new(SyntheticPrefix {
                inner: s,
                len: Some(t),
            }),
        }
    }
}

struct SyntheticPrefix<'a> {
    inner: &'a crate::runner::env::SyntheticReplay,
    len: Option<usize>,
}

impl ReplaySequence for SyntheticPrefix<'_> {
    fn n_agents(&self) -> usize {
        self.inner.n_agents()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn horizon(&self) -> usize {
        self.len
            .map(|l| l.min(self.inner.horizon()))
            .unwrap_or_else(|| self.inner.horizon())
    }
    fn slot(&self, t: usize, x: &[f64]) -> UtilityFeedback {
        self.inner.slot(t, x)
    }
    fn average(&self, x: &[f64]) -> UtilityFeedback {
        match self.len {
            None => self.inner.average(x),
            Some(l) => self.inner.prefix(l).average(x),
        }
    }
}

/// Runs the configured experiment: per-slot loop, invariant checks,
/// recorded-sequence benchmarks. Emission is separate so library callers
/// can inspect artifacts without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> Result<RunArtifacts, RunError> {
    config.validate()?;
    let n_agents = config.n_agents()?;
    let params = FairnessParams::new(
        config.alpha,
        config.u_star_min,
        config.u_star_max,
        n_agents,
    )?;
    let transform = UtilityTransform::from_parts(
        config.disagreement.as_deref(),
        config.weights.as_deref(),
        config.alpha,
    );
    if let Some(d) = &config.disagreement {
        if d.len() != n_agents {
            return Err(ConfigError::Invalid {
                key: "disagreement".into(),
                message: format!("{} entries for {n_agents} agents", d.len()),
            }
            .into());
        }
    }
    if let Some(w) = &config.weights {
        if w.len() != n_agents {
            return Err(ConfigError::Invalid {
                key: "weights".into(),
                message: format!("{} entries for {n_agents} agents", w.len()),
            }
            .into());
        }
    }

    if config.is_synthetic() {
        execute_synthetic(config, params, transform)
    } else {
        execute_cache(config, params, transform)
    }
}

fn execute_synthetic(
    config: &ExperimentConfig,
    params: FairnessParams,
    transform: UtilityTransform,
) -> Result<RunArtifacts, RunError> {
    let mut env = SyntheticEnv::new(&config.traces[0], config.horizon, config.seed)?;
    let domain = env.domain();
    let x1 = start_point(config.start_state, &domain);
    let mut policy = init_policy(config, params.clone(), domain, x1)?;
    let mut acc = Accumulator::new(config.horizon, params.n_agents(), !transform.is_identity());

    let mut prev_eta = None;
    for slot in 1..=config.horizon {
        let x = policy.next_allocation().to_vec();
        let raw = env.feedback(&x);
        let (fb, floors) = transform.apply(&raw);
        acc.record(&raw, &fb, floors);
        step_policy(&mut policy, config.policy, &fb, &mut prev_eta, slot)?;
        check_policy_invariants(&policy, slot)?;
    }

    let replay = ReplayHandle::Synthetic(env.into_replay());
    finish(config, params, policy.clamp_count(), acc, transform, replay)
}

fn execute_cache(
    config: &ExperimentConfig,
    params: FairnessParams,
    transform: UtilityTransform,
) -> Result<RunArtifacts, RunError> {
    let spec = config.resolve_topology()?.expect("validated cache scenario");
    let net = CacheNetwork::from_spec(&spec, config.catalog())?;
    let domain = net.allocation_domain()?;
    let mut env = CacheEnv::new(net, &config.traces, config.horizon, config.seed)?;
    let mut acc = Accumulator::new(config.horizon, params.n_agents(), !transform.is_identity());

    let mut clamp_count = 0;
    match config.policy {
        PolicyKind::Ohf | PolicyKind::Osf => {
            let x1 = start_point(config.start_state, &domain);
            let mut policy = init_policy(config, params.clone(), domain, x1)?;
            let mut prev_eta = None;
            for slot in 1..=config.horizon {
                let x = policy.next_allocation().to_vec();
                let batch = env.next_batch();
                let raw = env.feedback_for(&batch, &x);
                check_telescoping(&env, &batch, &x, slot)?;
                let (fb, floors) = transform.apply(&raw);
                acc.record(&raw, &fb, floors);
                step_policy(&mut policy, config.policy, &fb, &mut prev_eta, slot)?;
                check_policy_invariants(&policy, slot)?;
            }
            clamp_count = policy.clamp_count();
        }
        PolicyKind::Lru | PolicyKind::Lfu => {
            let kind = if config.policy == PolicyKind::Lru {
                EvictionKind::Lru
            } else {
                EvictionKind::Lfu
            };
            let mut caches = PathReplication::new(&env.net, kind);
            for slot in 1..=config.horizon {
                let x = caches.as_allocation(&env.net);
                if !domain.contains(&x, 1e-9) {
                    return Err(RunError::Invariant {
                        slot,
                        detail: "integral cache state left the allocation set".into(),
                    });
                }
                let batch = env.next_batch();
                let raw = env.feedback_for(&batch, &x);
                check_telescoping(&env, &batch, &x, slot)?;
                let (fb, floors) = transform.apply(&raw);
                acc.record(&raw, &fb, floors);
                for &(node, file) in &batch.arrivals {
                    caches.process(&env.net, node, file);
                }
            }
        }
    }

    let (net, slots, scales) = env.into_parts();
    let replay = ReplayHandle::Cache { net, slots, scales };
    finish(config, params, clamp_count, acc, transform, replay)
}

fn start_point(start: StartState, domain: &Domain) -> Option<Vec<f64>> {
    match start {
        StartState::Origin => None,
        StartState::Uniform => Some(uniform_point(domain)),
    }
}

fn init_policy(
    config: &ExperimentConfig,
    params: FairnessParams,
    domain: Domain,
    x1: Option<Vec<f64>>,
) -> Result<PolicyState, RunError> {
    let mut policy = match config.policy {
        PolicyKind::Ohf => PolicyState::ohf_init(params, domain, x1)?,
        PolicyKind::Osf => PolicyState::osf_init(params, domain, x1)?,
        _ => unreachable!("replication baselines have no fractional policy"),
    };
    if let Some(c) = config.dual_rate_constant {
        policy = policy.with_dual_rate_constant(c);
    }
    Ok(policy)
}

fn step_policy(
    policy: &mut PolicyState,
    kind: PolicyKind,
    fb: &UtilityFeedback,
    prev_eta_x: &mut Option<f64>,
    slot: usize,
) -> Result<(), RunError> {
    let info = match kind {
        PolicyKind::Ohf => policy.ohf_update(fb)?,
        PolicyKind::Osf => policy.osf_update(fb)?,
        _ => unreachable!(),
    };
    if let Some(eta) = info.eta_x {
        if let Some(prev) = *prev_eta_x {
            if eta > prev * (1.0 + 1e-12) {
                return Err(RunError::Invariant {
                    slot,
                    detail: format!("primal learning rate rose from {prev} to {eta}"),
                });
            }
        }
        *prev_eta_x = Some(eta);
    }
    Ok(())
}

fn check_policy_invariants(policy: &PolicyState, slot: usize) -> Result<(), RunError> {
    if !policy.feasible(1e-9) {
        return Err(RunError::Invariant {
            slot,
            detail: format!(
                "iterates left their sets: x = {:?}, theta = {:?}",
                policy.next_allocation(),
                policy.theta()
            ),
        });
    }
    Ok(())
}

fn check_telescoping(
    env: &CacheEnv,
    batch: &crate::cache::RequestBatch,
    x: &[f64],
    slot: usize,
) -> Result<(), RunError> {
    let residual = env.telescoping_residual(batch, x);
    let scale = env.scales().iter().fold(1.0, |a, &b| f64::max(a, b));
    if residual > TELESCOPE_TOL * scale {
        return Err(RunError::Invariant {
            slot,
            detail: format!("cost/utility telescoping residual {residual}"),
        });
    }
    Ok(())
}

/// Per-slot metric accumulation shared by all policy kinds.
struct Accumulator {
    per_slot_cum: Vec<Vec<f64>>,
    per_slot_cum_tr: Option<Vec<Vec<f64>>>,
    cum: Vec<f64>,
    cum_tr: Vec<f64>,
    transform_floors: u64,
}

impl Accumulator {
    fn new(horizon: usize, n_agents: usize, transformed: bool) -> Self {
        Self {
            per_slot_cum: Vec::with_capacity(horizon),
            per_slot_cum_tr: transformed.then(|| Vec::with_capacity(horizon)),
            cum: vec![0.0; n_agents],
            cum_tr: vec![0.0; n_agents],
            transform_floors: 0,
        }
    }

    fn record(&mut self, raw: &UtilityFeedback, transformed: &UtilityFeedback, floors: u64) {
        for (c, v) in self.cum.iter_mut().zip(&raw.values) {
            *c += v;
        }
        self.per_slot_cum.push(self.cum.clone());
        if let Some(tr) = &mut self.per_slot_cum_tr {
            for (c, v) in self.cum_tr.iter_mut().zip(&transformed.values) {
                *c += v;
            }
            tr.push(self.cum_tr.clone());
        }
        self.transform_floors += floors;
    }
}

fn finish(
    config: &ExperimentConfig,
    params: FairnessParams,
    clamp_count: u64,
    acc: Accumulator,
    transform: UtilityTransform,
    replay: ReplayHandle,
) -> Result<RunArtifacts, RunError> {
    let t = config.horizon;
    let final_avg: Vec<f64> = acc.per_slot_cum[t - 1].iter().map(|c| c / t as f64).collect();
    let final_avg_tr: Option<Vec<f64>> = acc
        .per_slot_cum_tr
        .as_ref()
        .map(|tr| tr[t - 1].iter().map(|c| c / t as f64).collect());
    let mut floored = false;
    let objective = fairness_objective(
        &params,
        final_avg_tr.as_ref().unwrap_or(&final_avg),
        &mut floored,
    );

    // benchmarks replay the exact recorded utility sequence
    let mut benchmarks = BenchmarkSet::default();
    let opts = SolverOptions {
        max_iters: config.benchmarks.solver_iters,
        grad_tol: 1e-6,
        x_init: None,
    };
    let mut severity = None;
    let mut hf_raw_avg = None;
    if config.benchmarks.any() {
        let base = replay.sequence();
        let seq = TransformedReplay {
            inner: base.as_ref(),
            transform: &transform,
        };
        let domain = replay_domain(&replay)?;
        let bench_opts = SolverOptions {
            x_init: Some(uniform_point(&domain)),
            ..opts.clone()
        };
        if config.benchmarks.hf {
            let hf = solve_hf(&seq, &domain, &params, &bench_opts)?;
            severity = Some(severity_diagnostics(&seq, &hf.x_star, None));
            hf_raw_avg = Some(base.average(&hf.x_star).values);
            benchmarks.hf = Some(hf);
        }
        if config.benchmarks.sf {
            benchmarks.sf = Some(solve_sf(&seq, &domain, &params, &bench_opts)?);
        }
        if config.benchmarks.utilitarian {
            benchmarks.utilitarian = Some(solve_utilitarian(&seq, &domain, &params, &bench_opts)?);
        }
        if config.benchmarks.pareto {
            if params.n_agents() == 2 {
                benchmarks.pareto = Some(pareto_front(
                    &seq,
                    &domain,
                    config.benchmarks.pareto_grid,
                    &bench_opts,
                )?);
            }
        }
    }
    let regret = benchmarks
        .hf
        .as_ref()
        .map(|hf| fairness_regret(final_avg_tr.as_ref().unwrap_or(&final_avg), hf, &params));
    let pof = match (&benchmarks.hf, &benchmarks.utilitarian) {
        (Some(hf), Some(util)) => Some(price_of_fairness(&hf.avg_utilities, util)?),
        _ => None,
    };

    Ok(RunArtifacts {
        config: config.clone(),
        params,
        metrics: RunMetrics {
            per_slot_cum: acc.per_slot_cum,
            per_slot_cum_transformed: acc.per_slot_cum_tr,
            final_avg,
            final_avg_transformed: final_avg_tr,
            objective,
            objective_floored: floored,
            regret,
            pof,
            clamp_count,
            transform_floor_count: acc.transform_floors,
        },
        benchmarks,
        severity,
        hf_raw_avg_utilities: hf_raw_avg,
        replay,
    })
}

fn replay_domain(replay: &ReplayHandle) -> Result<Domain, RunError> {
    match replay {
        ReplayHandle::Cache { net, .. } => Ok(net.allocation_domain()?),
        ReplayHandle::Synthetic(s) => Ok(match s {
            crate::runner::env::SyntheticReplay::Example1(_) => {
                Domain::Box(crate::domain::BoxDomain::interval(0.0, 1.0).unwrap())
            }
            crate::runner::env::SyntheticReplay::Example2(_) => {
                Domain::Box(crate::domain::BoxDomain::interval(-1.0, 1.0).unwrap())
            }
        }),
    }
}
