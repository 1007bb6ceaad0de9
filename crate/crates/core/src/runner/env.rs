//! Scenario environments: cache networks driven by request generators and
//! the synthetic two-agent adversaries, each with a recorded replay for
//! offline benchmarking, plus the utility transforms of the bargaining and
//! weighted-fairness modes.

use crate::bench::ReplaySequence;
use crate::cache::{caching_utility, retrieval_cost, utility_supergradient};
use crate::cache::{CacheNetwork, RequestBatch};
use crate::domain::{BoxDomain, Domain};
use crate::policy::UtilityFeedback;
use crate::trace::{
    derived_rng, Example1Adversary, Example1Sequence, Example2Adversary, Example2Mode,
    Example2Sequence, RequestGenerator, TraceConfig, TraceError, TraceKind,
};
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("environment error: {0}")]
    Invalid(String),
}

/// Stream ids of the master seed, one block per component.
const TRACE_STREAM_BASE: u64 = 100;
const ADVERSARY_STREAM: u64 = 1;

/// Floor counter threshold for the weighted power transform.
const TRANSFORM_FLOOR: f64 = 1e-9;

/// Utility rewrite applied before the policy (and the benchmarks) see the
/// feedback: a disagreement shift, then either a constant rescale
/// (weighted fairness away from alpha = 1) or a per-agent power (weighted
/// fairness at alpha = 1).
#[derive(Debug, Clone, Default)]
pub struct UtilityTransform {
    pub shift: Option<Vec<f64>>,
    pub scale: Option<Vec<f64>>,
    pub power: Option<Vec<f64>>,
}

impl UtilityTransform {
    pub fn from_parts(
        disagreement: Option<&[f64]>,
        weights: Option<&[f64]>,
        alpha: f64,
    ) -> Self {
        let shift = disagreement.map(|d| d.to_vec());
        let (scale, power) = match weights {
            None => (None, None),
            Some(w) if alpha == 1.0 => (None, Some(w.to_vec())),
            Some(w) => (
                Some(w.iter().map(|wi| wi.powf(1.0 / (1.0 - alpha))).collect()),
                None,
            ),
        };
        Self { shift, scale, power }
    }

    pub fn is_identity(&self) -> bool {
        self.shift.is_none() && self.scale.is_none() && self.power.is_none()
    }

    /// Whether averages commute with the transform (they do unless a
    /// per-agent power is applied).
    pub fn is_affine(&self) -> bool {
        self.power.is_none()
    }

    /// Applies the transform; returns the rewritten feedback and the number
    /// of floor applications in the power branch.
    pub fn apply(&self, fb: &UtilityFeedback) -> (UtilityFeedback, u64) {
        if self.is_identity() {
            return (fb.clone(), 0);
        }
        let mut floors = 0;
        let n = fb.values.len();
        let mut values = fb.values.clone();
        let mut grads = fb.supergradients.clone();
        if let Some(shift) = &self.shift {
            for i in 0..n {
                values[i] -= shift[i];
            }
        }
        if let Some(scale) = &self.scale {
            for i in 0..n {
                values[i] *= scale[i];
                for g in grads[i].iter_mut() {
                    *g *= scale[i];
                }
            }
        }
        if let Some(power) = &self.power {
            for i in 0..n {
                let base = if values[i] <= TRANSFORM_FLOOR {
                    floors += 1;
                    TRANSFORM_FLOOR
                } else {
                    values[i]
                };
                let w = power[i];
                let coeff = w * base.powf(w - 1.0);
                values[i] = base.powf(w);
                for g in grads[i].iter_mut() {
                    *g *= coeff;
                }
            }
        }
        (
            UtilityFeedback {
                values,
                supergradients: grads,
            },
            floors,
        )
    }
}

/// Replay adapter applying a transform on top of a recorded sequence.
pub struct TransformedReplay<'a> {
    pub inner: &'a dyn ReplaySequence,
    pub transform: &'a UtilityTransform,
}

impl ReplaySequence for TransformedReplay<'_> {
    fn n_agents(&self) -> usize {
        self.inner.n_agents()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }
    fn slot(&self, t: usize, x: &[f64]) -> UtilityFeedback {
        self.transform.apply(&self.inner.slot(t, x)).0
    }
    fn average(&self, x: &[f64]) -> UtilityFeedback {
        if self.transform.is_affine() {
            // shift and scale commute with time averaging
            self.transform.apply(&self.inner.average(x)).0
        } else {
            // the power transform does not; fall back to the slot loop
            let n = self.n_agents();
            let mut values = vec![0.0; n];
            let mut grads = vec![vec![0.0; self.dim()]; n];
            let t_total = self.horizon().max(1) as f64;
            for t in 0..self.horizon() {
                let fb = self.slot(t, x);
                for i in 0..n {
                    values[i] += fb.values[i] / t_total;
                    for (acc, g) in grads[i].iter_mut().zip(&fb.supergradients[i]) {
                        *acc += g / t_total;
                    }
                }
            }
            UtilityFeedback {
                values,
                supergradients: grads,
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Cache environment
// ---------------------------------------------------------------------------

/// Cache network plus per-agent request generators. Utilities are
/// normalized per agent by `batch_size x (largest nearest-repository
/// cost)` so that time-averaged utilities live on the unit scale of the
/// default dual box.
pub struct CacheEnv {
    pub net: CacheNetwork,
    gens: Vec<RequestGenerator>,
    scales: Vec<f64>,
    recorded: Vec<RequestBatch>,
}

impl CacheEnv {
    pub fn new(
        net: CacheNetwork,
        traces: &[TraceConfig],
        horizon: usize,
        master_seed: u64,
    ) -> Result<Self, EnvError> {
        let n_agents = net.n_agents();
        if traces.iter().any(|t| t.kind == TraceKind::File) {
            // an external trace file addresses query nodes directly and
            // drives the whole system through a single generator
            if traces.len() != 1 {
                return Err(EnvError::Invalid(
                    "an external request-trace file must be the only trace".into(),
                ));
            }
            return Self::from_file_trace(net, &traces[0], horizon);
        }
        let per_agent: Vec<TraceConfig> = if traces.len() == 1 {
            vec![traces[0].clone(); n_agents]
        } else if traces.len() == n_agents {
            traces.to_vec()
        } else {
            return Err(EnvError::Invalid(format!(
                "{} traces for {} agents; give one shared trace or one per agent",
                traces.len(),
                n_agents
            )));
        };
        let mut gens = Vec::with_capacity(n_agents);
        let mut scales = Vec::with_capacity(n_agents);
        for (i, cfg) in per_agent.iter().enumerate() {
            if cfg.catalog != net.catalog() {
                return Err(EnvError::Invalid(format!(
                    "trace catalog {} != network catalog {}",
                    cfg.catalog,
                    net.catalog()
                )));
            }
            let rng: ChaCha8Rng = match cfg.seed {
                Some(s) => {
                    let mut r = ChaCha8Rng::seed_from_u64(s);
                    r.set_stream(TRACE_STREAM_BASE + i as u64);
                    r
                }
                None => derived_rng(master_seed, TRACE_STREAM_BASE + i as u64),
            };
            gens.push(RequestGenerator::new(
                cfg,
                net.agents()[i].query_nodes.clone(),
                horizon,
                rng,
            )?);
            scales.push(cfg.batch_size as f64 * net.agent_cost_bound(i));
        }
        Ok(Self {
            net,
            gens,
            scales,
            recorded: Vec::with_capacity(horizon),
        })
    }

    fn from_file_trace(
        net: CacheNetwork,
        cfg: &TraceConfig,
        horizon: usize,
    ) -> Result<Self, EnvError> {
        if cfg.catalog != net.catalog() {
            return Err(EnvError::Invalid(format!(
                "trace catalog {} != network catalog {}",
                cfg.catalog,
                net.catalog()
            )));
        }
        let records = crate::trace::read_request_trace(
            cfg.path.as_ref().expect("validated file trace"),
            horizon,
            cfg.catalog,
        )?;
        let mut max_per_agent = vec![0u32; net.n_agents()];
        for slot in &records {
            let mut counts = vec![0u32; net.n_agents()];
            for &(node, _) in slot {
                if node > net.n_nodes() || !net.is_query_node(node - 1) {
                    return Err(EnvError::Invalid(format!(
                        "trace file requests at node {node}, which is not a query node"
                    )));
                }
                counts[net.agent_of_node(node - 1)] += 1;
            }
            for (m, c) in max_per_agent.iter_mut().zip(&counts) {
                *m = (*m).max(*c);
            }
        }
        let gen = RequestGenerator::new(cfg, Vec::new(), horizon, derived_rng(0, 0))?;
        let scales = (0..net.n_agents())
            .map(|i| max_per_agent[i].max(1) as f64 * net.agent_cost_bound(i))
            .collect();
        Ok(Self {
            net,
            gens: vec![gen],
            scales,
            recorded: Vec::with_capacity(horizon),
        })
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn recorded(&self) -> &[RequestBatch] {
        &self.recorded
    }

    /// Draws (and records) the next slot's batch across all agents, with
    /// per-request file ids converted to 0-based.
    pub fn next_batch(&mut self) -> RequestBatch {
        let mut arrivals = Vec::new();
        for g in &mut self.gens {
            for (node, file) in g.next_slot() {
                arrivals.push((node, file - 1));
            }
        }
        let batch = RequestBatch::from_arrivals(arrivals);
        self.recorded.push(batch.clone());
        batch
    }

    /// Normalized feedback of one batch at allocation `x`.
    pub fn feedback_for(&self, batch: &RequestBatch, x: &[f64]) -> UtilityFeedback {
        feedback_for_batch(&self.net, &self.scales, batch, x)
    }

    /// Largest raw violation of the cost/utility telescoping identity
    /// across agents for this batch; exact zero up to rounding.
    pub fn telescoping_residual(&self, batch: &RequestBatch, x: &[f64]) -> f64 {
        let x0 = self.net.repository_only_state();
        (0..self.net.n_agents())
            .map(|i| {
                let u = caching_utility(&self.net, batch, x, i);
                let c = retrieval_cost(&self.net, batch, x, i);
                let c0 = retrieval_cost(&self.net, batch, &x0, i);
                (u + c - c0).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn replay(&self) -> CacheReplay<'_> {
        CacheReplay::new(&self.net, &self.recorded, &self.scales)
    }

    /// Decomposes the environment into the network, the recorded batches,
    /// and the per-agent normalization scales.
    pub fn into_parts(self) -> (CacheNetwork, Vec<RequestBatch>, Vec<f64>) {
        (self.net, self.recorded, self.scales)
    }
}

fn feedback_for_batch(
    net: &CacheNetwork,
    scales: &[f64],
    batch: &RequestBatch,
    x: &[f64],
) -> UtilityFeedback {
    let n = net.n_agents();
    let mut values = Vec::with_capacity(n);
    let mut grads = Vec::with_capacity(n);
    for i in 0..n {
        let s = scales[i].max(f64::MIN_POSITIVE);
        values.push(caching_utility(net, batch, x, i) / s);
        let mut g = utility_supergradient(net, batch, x, i);
        for gj in g.iter_mut() {
            *gj /= s;
        }
        grads.push(g);
    }
    UtilityFeedback {
        values,
        supergradients: grads,
    }
}

/// Recorded cache run, replayable at arbitrary allocations. The average
/// aggregates request counts once, so evaluating it is as cheap as a
/// single slot.
pub struct CacheReplay<'a> {
    net: &'a CacheNetwork,
    slots: &'a [RequestBatch],
    scales: Vec<f64>,
    aggregate: RequestBatch,
}

impl<'a> CacheReplay<'a> {
    pub fn new(net: &'a CacheNetwork, slots: &'a [RequestBatch], scales: &[f64]) -> Self {
        let mut arrivals = Vec::new();
        for b in slots {
            for &(node, file, count) in &b.counts {
                for _ in 0..count {
                    arrivals.push((node, file));
                }
            }
        }
        let aggregate = RequestBatch::from_arrivals(arrivals);
        Self {
            net,
            slots,
            scales: scales.to_vec(),
            aggregate,
        }
    }
}

impl ReplaySequence for CacheReplay<'_> {
    fn n_agents(&self) -> usize {
        self.net.n_agents()
    }
    fn dim(&self) -> usize {
        self.net.dim()
    }
    fn horizon(&self) -> usize {
        self.slots.len()
    }
    fn slot(&self, t: usize, x: &[f64]) -> UtilityFeedback {
        feedback_for_batch(self.net, &self.scales, &self.slots[t], x)
    }
    fn average(&self, x: &[f64]) -> UtilityFeedback {
        let t_total = self.slots.len().max(1) as f64;
        let mut fb = feedback_for_batch(self.net, &self.scales, &self.aggregate, x);
        for v in fb.values.iter_mut() {
            *v /= t_total;
        }
        for g in fb.supergradients.iter_mut() {
            for gj in g.iter_mut() {
                *gj /= t_total;
            }
        }
        fb
    }
}

// ---------------------------------------------------------------------------
// Synthetic environments
// ---------------------------------------------------------------------------

pub enum SyntheticEnv {
    Example1(Example1Adversary),
    Example2(Example2Adversary),
}

impl SyntheticEnv {
    pub fn new(cfg: &TraceConfig, horizon: usize, master_seed: u64) -> Result<Self, EnvError> {
        let rng = match cfg.seed {
            Some(s) => {
                let mut r = ChaCha8Rng::seed_from_u64(s);
                r.set_stream(ADVERSARY_STREAM);
                r
            }
            None => derived_rng(master_seed, ADVERSARY_STREAM),
        };
        match cfg.kind {
            TraceKind::Example1 => Ok(SyntheticEnv::Example1(Example1Adversary::new(
                cfg.severity_exponent,
                horizon,
                rng,
            ))),
            TraceKind::Example2Cyclic => Ok(SyntheticEnv::Example2(Example2Adversary::new(
                Example2Mode::Cyclic,
                rng,
            ))),
            TraceKind::Example2Uar => Ok(SyntheticEnv::Example2(Example2Adversary::new(
                Example2Mode::Uar,
                rng,
            ))),
            _ => Err(EnvError::Invalid(
                "not a synthetic adversary kind".into(),
            )),
        }
    }

    pub fn domain(&self) -> Domain {
        let (lo, hi) = match self {
            SyntheticEnv::Example1(_) => (0.0, 1.0),
            SyntheticEnv::Example2(_) => (-1.0, 1.0),
        };
        Domain::Box(BoxDomain::interval(lo, hi).expect("static bounds"))
    }

    pub fn feedback(&mut self, x: &[f64]) -> UtilityFeedback {
        match self {
            SyntheticEnv::Example1(adv) => adv.feedback(x[0]),
            SyntheticEnv::Example2(adv) => adv.feedback(x[0]),
        }
    }

    pub fn into_replay(self) -> SyntheticReplay {
        match self {
            SyntheticEnv::Example1(adv) => SyntheticReplay::Example1(adv.into_sequence()),
            SyntheticEnv::Example2(adv) => SyntheticReplay::Example2(adv.into_sequence()),
        }
    }
}

pub enum SyntheticReplay {
    Example1(Example1Sequence),
    Example2(Example2Sequence),
}

impl SyntheticReplay {
    /// Truncation to the first `t` slots.
    pub fn prefix(&self, t: usize) -> SyntheticReplay {
        match self {
            SyntheticReplay::Example1(s) => SyntheticReplay::Example1(s.prefix(t)),
            SyntheticReplay::Example2(s) => SyntheticReplay::Example2(s.prefix(t)),
        }
    }
}

impl ReplaySequence for SyntheticReplay {
    fn n_agents(&self) -> usize {
        2
    }
    fn dim(&self) -> usize {
        1
    }
    fn horizon(&self) -> usize {
        match self {
            SyntheticReplay::Example1(s) => s.horizon(),
            SyntheticReplay::Example2(s) => s.horizon(),
        }
    }
    fn slot(&self, t: usize, x: &[f64]) -> UtilityFeedback {
        match self {
            SyntheticReplay::Example1(s) => s.slot_feedback(t, x[0]),
            SyntheticReplay::Example2(s) => s.slot_feedback(t, x[0]),
        }
    }
    fn average(&self, x: &[f64]) -> UtilityFeedback {
        match self {
            SyntheticReplay::Example1(s) => s.average_feedback(x[0]),
            SyntheticReplay::Example2(s) => s.average_feedback(x[0]),
        }
    }
}

/// Uniform fractional start: boxes at their midpoint, capped simplices
/// with each free coordinate at `free_budget / n_free` (capped at 1).
pub fn uniform_point(domain: &Domain) -> Vec<f64> {
    fn fill(domain: &Domain, out: &mut Vec<f64>) {
        match domain {
            Domain::Box(b) => {
                for (lo, hi) in b.lower().iter().zip(b.upper()) {
                    out.push(0.5 * (lo + hi));
                }
            }
            Domain::CappedSimplex(s) => {
                let n_free = s.pinned().iter().filter(|&&p| !p).count();
                let level = if n_free == 0 {
                    0.0
                } else {
                    (s.free_budget() / n_free as f64).min(1.0)
                };
                for &pin in s.pinned() {
                    out.push(if pin { 1.0 } else { level });
                }
            }
            Domain::Product(p) => {
                for f in p.factors() {
                    fill(f, out);
                }
            }
        }
    }
    let mut out = Vec::with_capacity(domain.dim());
    fill(domain, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::presets::topology_preset;
    use approx::assert_abs_diff_eq;

    fn stationary_trace() -> TraceConfig {
        TraceConfig {
            kind: TraceKind::Stationary,
            sigma: 1.2,
            batch_size: 10,
            catalog: 20,
            shift_period: 50,
            severity_exponent: 0.5,
            path: None,
            seed: None,
        }
    }

    #[test]
    fn cache_env_feedback_is_normalized_and_telescopes() {
        let net =
            CacheNetwork::from_spec(&topology_preset("cycle").unwrap(), 20).unwrap();
        let mut env = CacheEnv::new(net, &[stationary_trace()], 100, 7).unwrap();
        let domain = env.net.allocation_domain().unwrap();
        let x = uniform_point(&domain);
        assert!(domain.contains(&x, 1e-12));
        for _ in 0..50 {
            let batch = env.next_batch();
            let fb = env.feedback_for(&batch, &x);
            for &v in &fb.values {
                assert!((0.0..=1.0 + 1e-12).contains(&v), "normalized utility {v}");
            }
            assert!(env.telescoping_residual(&batch, &x) <= 1e-9);
        }
    }

    #[test]
    fn cache_replay_average_matches_slot_mean() {
        let net =
            CacheNetwork::from_spec(&topology_preset("cycle").unwrap(), 20).unwrap();
        let mut env = CacheEnv::new(net, &[stationary_trace()], 30, 11).unwrap();
        let domain = env.net.allocation_domain().unwrap();
        let x = uniform_point(&domain);
        for _ in 0..30 {
            env.next_batch();
        }
        let replay = env.replay();
        let fast = replay.average(&x);
        // brute-force slot mean
        let mut slow = vec![0.0; 2];
        for t in 0..30 {
            let fb = replay.slot(t, &x);
            for i in 0..2 {
                slow[i] += fb.values[i] / 30.0;
            }
        }
        for i in 0..2 {
            assert_abs_diff_eq!(fast.values[i], slow[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn transforms() {
        let fb = UtilityFeedback {
            values: vec![1.5, 0.9],
            supergradients: vec![vec![2.0], vec![1.0]],
        };
        // bargaining shift
        let t = UtilityTransform::from_parts(Some(&[0.5, 0.7]), None, 1.0);
        let (out, floors) = t.apply(&fb);
        assert_abs_diff_eq!(out.values[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.values[1], 0.2, epsilon = 1e-12);
        assert_eq!(out.supergradients, fb.supergradients);
        assert_eq!(floors, 0);
        // weighted fairness away from alpha = 1: constant rescale
        let t = UtilityTransform::from_parts(None, Some(&[0.25, 0.75]), 2.0);
        let (out, _) = t.apply(&fb);
        assert_abs_diff_eq!(out.values[0], 4.0 * 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.supergradients[0][0], 8.0, epsilon = 1e-12);
        // weighted fairness at alpha = 1: powers
        let t = UtilityTransform::from_parts(None, Some(&[1.0, 0.0]), 1.0);
        let (out, _) = t.apply(&fb);
        assert_abs_diff_eq!(out.values[0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.values[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.supergradients[1][0], 0.0, epsilon = 1e-12);
        // floor flag on nonpositive base
        let t = UtilityTransform::from_parts(Some(&[2.0, 0.0]), Some(&[0.5, 0.5]), 1.0);
        let (_, floors) = t.apply(&fb);
        assert_eq!(floors, 1);
    }

    #[test]
    fn uniform_point_is_feasible() {
        let net =
            CacheNetwork::from_spec(&topology_preset("tree1").unwrap(), 20).unwrap();
        let domain = net.allocation_domain().unwrap();
        let x = uniform_point(&domain);
        assert!(domain.contains(&x, 1e-12));
        // pinned coordinates stay at 1
        for f in 0..20 {
            assert_eq!(x[net.coord(12, f)], 1.0);
        }
    }
}
