//! Request and utility sequence generators: Zipf request traces with
//! batching and non-stationary popularity shifts, the two synthetic
//! two-agent adversaries (perturbed-fixed and multiset), and trace-file
//! ingestion.

use crate::policy::UtilityFeedback;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("invalid trace configuration: {0}")]
    Invalid(String),
    #[error("trace file error: {0}")]
    File(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Deterministic generator seeded from a master seed and a stream id;
/// independent components use distinct streams of the same master seed.
pub fn derived_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceKind {
    Stationary,
    Nonstationary,
    ShuffledNonstationary,
    Example1,
    Example2Cyclic,
    Example2Uar,
    File,
}

fn default_sigma() -> f64 {
    1.2
}
fn default_batch() -> u32 {
    50
}
fn default_catalog() -> u32 {
    20
}
fn default_shift() -> u32 {
    50
}
fn default_severity() -> f64 {
    0.5
}

/// Parameters of one request/utility stream. `horizon` and the seed are
/// supplied by the experiment; per-trace seeds may override the derived one.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    pub kind: TraceKind,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_batch")]
    pub batch_size: u32,
    #[serde(default = "default_catalog")]
    pub catalog: u32,
    /// Requests between popularity shifts (non-stationary kinds).
    #[serde(default = "default_shift")]
    pub shift_period: u32,
    /// Severity exponent `s` of the perturbed-fixed adversary.
    #[serde(default = "default_severity")]
    pub severity_exponent: f64,
    /// Request-trace file for `kind = "file"`.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Explicit stream seed; absent means derived from the master seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl TraceConfig {
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(TraceError::Invalid(format!(
                "trace.sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        if self.batch_size < 1 {
            return Err(TraceError::Invalid("trace.batch_size must be >= 1".into()));
        }
        if self.catalog < 1 {
            return Err(TraceError::Invalid("trace.catalog must be >= 1".into()));
        }
        match self.kind {
            TraceKind::Nonstationary | TraceKind::ShuffledNonstationary => {
                if self.catalog % 2 != 0 {
                    return Err(TraceError::Invalid(format!(
                        "trace.catalog must be even for non-stationary traces (the \
                         popularity shift pairs file f with f + F/2), got {}",
                        self.catalog
                    )));
                }
                if self.shift_period < 1 {
                    return Err(TraceError::Invalid(
                        "trace.shift_period must be >= 1".into(),
                    ));
                }
            }
            TraceKind::Example1 => {
                if !(self.severity_exponent > 0.0) {
                    return Err(TraceError::Invalid(
                        "trace.severity_exponent must be > 0".into(),
                    ));
                }
            }
            TraceKind::File => {
                if self.path.is_none() {
                    return Err(TraceError::Invalid(
                        "trace.path is required for kind = \"file\"".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(
            self.kind,
            TraceKind::Example1 | TraceKind::Example2Cyclic | TraceKind::Example2Uar
        )
    }
}

/// Zipf(F, sigma) sampler over file ids `1..=F`:
/// `P(f) = f^(-sigma) / sum_j j^(-sigma)`.
#[derive(Debug, Clone)]
pub struct ZipfSampler {
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl ZipfSampler {
    pub fn new(sigma: f64, catalog: u32) -> Self {
        let pmf: Vec<f64> = (1..=catalog).map(|f| (f as f64).powf(-sigma)).collect();
        Self::from_weights(pmf)
    }

    fn from_weights(mut pmf: Vec<f64>) -> Self {
        let total: f64 = pmf.iter().sum();
        for p in &mut pmf {
            *p /= total;
        }
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for &p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        // guard the tail against accumulated rounding
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Self { pmf, cdf }
    }

    pub fn pmf(&self, file: u32) -> f64 {
        self.pmf[(file - 1) as usize]
    }

    /// Draws a 1-based file id.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        let u: f64 = rng.random::<f64>();
        match self.cdf.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
            Ok(i) => i as u32 + 2, // landed exactly on a boundary
            Err(i) => i as u32 + 1,
        }
        .min(self.pmf.len() as u32)
    }
}

/// Half-rotation of a popularity vector over `1..=F`: file `f` takes the
/// popularity previously held by `((f - 1 + F/2) mod F) + 1`. The wrap is
/// 1-indexed so the permutation stays a bijection; applying it twice is
/// the identity.
pub fn nonstationary_shift(pop: &[f64]) -> Result<Vec<f64>, TraceError> {
    let f = pop.len();
    if f % 2 != 0 {
        return Err(TraceError::Invalid(format!(
            "popularity shift needs an even catalog, got {f}"
        )));
    }
    let half = f / 2;
    Ok((0..f).map(|i| pop[(i + half) % f]).collect())
}

/// One agent's requests for a slot, in arrival order.
pub type SlotRequests = Vec<(usize, u32)>; // (query node, 1-based file id)

/// Per-agent request stream: batches of `R` draws per slot, assigned
/// round-robin across the agent's query nodes.
#[derive(Debug)]
pub struct RequestGenerator {
    kind: GenKind,
    query_nodes: Vec<usize>,
    batch_size: u32,
    rr_pos: usize,
}

#[derive(Debug)]
enum GenKind {
    Stationary {
        sampler: ZipfSampler,
        rng: ChaCha8Rng,
    },
    NonStationary {
        pop: Vec<f64>,
        sampler: ZipfSampler,
        shift_period: u32,
        requests_seen: u32,
        rng: ChaCha8Rng,
    },
    Pregenerated {
        files: Vec<u32>,
        pos: usize,
    },
    FileTrace {
        slots: Vec<SlotRequests>,
        pos: usize,
    },
}

impl RequestGenerator {
    pub fn new(
        cfg: &TraceConfig,
        query_nodes: Vec<usize>,
        horizon: usize,
        rng: ChaCha8Rng,
    ) -> Result<Self, TraceError> {
        cfg.validate()?;
        if query_nodes.is_empty() && cfg.kind != TraceKind::File {
            return Err(TraceError::Invalid(
                "request generator needs at least one query node".into(),
            ));
        }
        let kind = match cfg.kind {
            TraceKind::Stationary => GenKind::Stationary {
                sampler: ZipfSampler::new(cfg.sigma, cfg.catalog),
                rng,
            },
            TraceKind::Nonstationary => {
                let sampler = ZipfSampler::new(cfg.sigma, cfg.catalog);
                GenKind::NonStationary {
                    pop: sampler.pmf.clone(),
                    sampler,
                    shift_period: cfg.shift_period,
                    requests_seen: 0,
                    rng,
                }
            }
            TraceKind::ShuffledNonstationary => {
                // Materialize the full non-stationary stream, then shuffle:
                // the multiset of requested files is preserved exactly while
                // the non-stationarity is removed.
                let mut rng = rng;
                let mut inner = RequestGenerator::new(
                    &TraceConfig {
                        kind: TraceKind::Nonstationary,
                        ..cfg.clone()
                    },
                    query_nodes.clone(),
                    horizon,
                    rng.clone(),
                )?;
                let mut files = Vec::with_capacity(horizon * cfg.batch_size as usize);
                for _ in 0..horizon {
                    for (_, f) in inner.next_slot() {
                        files.push(f);
                    }
                }
                files.shuffle(&mut rng);
                GenKind::Pregenerated { files, pos: 0 }
            }
            TraceKind::File => {
                let path = cfg.path.as_ref().unwrap();
                GenKind::FileTrace {
                    slots: read_request_trace(path, horizon, cfg.catalog)?,
                    pos: 0,
                }
            }
            TraceKind::Example1 | TraceKind::Example2Cyclic | TraceKind::Example2Uar => {
                return Err(TraceError::Invalid(
                    "synthetic utility adversaries do not generate requests".into(),
                ));
            }
        };
        Ok(Self {
            kind,
            query_nodes,
            batch_size: cfg.batch_size,
            rr_pos: 0,
        })
    }

    pub fn next_slot(&mut self) -> SlotRequests {
        match &mut self.kind {
            GenKind::Stationary { sampler, rng } => {
                let mut out = Vec::with_capacity(self.batch_size as usize);
                for _ in 0..self.batch_size {
                    let f = sampler.sample(rng);
                    let node = self.query_nodes[self.rr_pos % self.query_nodes.len()];
                    self.rr_pos += 1;
                    out.push((node, f));
                }
                out
            }
            GenKind::NonStationary {
                pop,
                sampler,
                shift_period,
                requests_seen,
                rng,
            } => {
                let mut out = Vec::with_capacity(self.batch_size as usize);
                for _ in 0..self.batch_size {
                    let f = sampler.sample(rng);
                    let node = self.query_nodes[self.rr_pos % self.query_nodes.len()];
                    self.rr_pos += 1;
                    out.push((node, f));
                    *requests_seen += 1;
                    if *requests_seen % *shift_period == 0 {
                        *pop = nonstationary_shift(pop).expect("validated even catalog");
                        *sampler = ZipfSampler::from_weights(pop.clone());
                    }
                }
                out
            }
            GenKind::Pregenerated { files, pos } => {
                let mut out = Vec::with_capacity(self.batch_size as usize);
                for _ in 0..self.batch_size {
                    let f = files[(*pos).min(files.len() - 1)];
                    *pos += 1;
                    let node = self.query_nodes[self.rr_pos % self.query_nodes.len()];
                    self.rr_pos += 1;
                    out.push((node, f));
                }
                out
            }
            GenKind::FileTrace { slots, pos } => {
                // records are 1-based on disk; emit 0-based node ids
                let out = if *pos < slots.len() {
                    slots[*pos]
                        .iter()
                        .map(|&(node, file)| (node - 1, file))
                        .collect()
                } else {
                    Vec::new()
                };
                *pos += 1;
                out
            }
        }
    }
}

/// Reads an external request trace: a CSV with header `slot,node,file`,
/// one record per request, slots 1-based.
pub fn read_request_trace(
    path: &Path,
    horizon: usize,
    catalog: u32,
) -> Result<Vec<SlotRequests>, TraceError> {
    let text = std::fs::read_to_string(path)?;
    let mut slots: Vec<SlotRequests> = vec![Vec::new(); horizon];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.eq_ignore_ascii_case("slot,node,file")) {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(TraceError::File(format!(
                "{}:{}: expected `slot,node,file`, got {line:?}",
                path.display(),
                lineno + 1
            )));
        }
        let parse = |s: &str, what: &str| -> Result<u64, TraceError> {
            s.trim().parse::<u64>().map_err(|_| {
                TraceError::File(format!(
                    "{}:{}: invalid {what} {s:?}",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        let slot = parse(parts[0], "slot")? as usize;
        let node = parse(parts[1], "node")? as usize;
        let file = parse(parts[2], "file")? as u32;
        if node < 1 {
            return Err(TraceError::File(format!(
                "{}:{}: node ids are 1-based",
                path.display(),
                lineno + 1
            )));
        }
        if slot < 1 || slot > horizon {
            return Err(TraceError::File(format!(
                "{}:{}: slot {slot} outside 1..={horizon}",
                path.display(),
                lineno + 1
            )));
        }
        if file < 1 || file > catalog {
            return Err(TraceError::File(format!(
                "{}:{}: file {file} outside 1..={catalog}",
                path.display(),
                lineno + 1
            )));
        }
        slots[slot - 1].push((node, file));
    }
    Ok(slots)
}

// ---------------------------------------------------------------------------
// Synthetic two-agent adversaries
// ---------------------------------------------------------------------------

/// Perturbed-fixed adversary over `X = [0, 1]`: fixed utilities
/// `(1 - x^2, 1 + x)` plus a linear perturbation `c_{t,i} x` where
/// `c_{t,i} = gamma_{t,i} a_{t,i}`, `a` uniform in [-1, 1] and the severity
/// multiset `{t^(-s) : t <= T}` assigned to slots by a per-agent random
/// permutation. The schedule needs the horizon; the policy does not.
#[derive(Debug)]
pub struct Example1Adversary {
    coeffs: Vec<[f64; 2]>,
    t: usize,
}

impl Example1Adversary {
    pub fn new(severity_exponent: f64, horizon: usize, mut rng: ChaCha8Rng) -> Self {
        let mut coeffs = vec![[0.0; 2]; horizon];
        for agent in 0..2 {
            let mut gammas: Vec<f64> = (1..=horizon)
                .map(|t| (t as f64).powf(-severity_exponent))
                .collect();
            gammas.shuffle(&mut rng);
            for (t, c) in coeffs.iter_mut().enumerate() {
                let a: f64 = rng.random_range(-1.0..=1.0);
                c[agent] = gammas[t] * a;
            }
        }
        Self { coeffs, t: 0 }
    }

    /// Reveals the slot utilities and exact supergradients at `x`, then
    /// advances to the next slot.
    pub fn feedback(&mut self, x: f64) -> UtilityFeedback {
        let c = self.coeffs[self.t.min(self.coeffs.len() - 1)];
        self.t += 1;
        example1_feedback(x, c)
    }

    /// Recorded per-slot perturbation coefficients, for benchmark replay.
    pub fn into_sequence(self) -> Example1Sequence {
        Example1Sequence::new(self.coeffs)
    }
}

fn example1_feedback(x: f64, c: [f64; 2]) -> UtilityFeedback {
    UtilityFeedback {
        values: vec![1.0 - x * x + c[0] * x, 1.0 + x + c[1] * x],
        supergradients: vec![vec![-2.0 * x + c[0]], vec![1.0 + c[1]]],
    }
}

/// Frozen record of a perturbed-fixed run.
#[derive(Debug, Clone)]
pub struct Example1Sequence {
    coeffs: Vec<[f64; 2]>,
    mean: [f64; 2],
}

impl Example1Sequence {
    pub fn new(coeffs: Vec<[f64; 2]>) -> Self {
        let n = coeffs.len().max(1) as f64;
        let mut mean = [0.0; 2];
        for c in &coeffs {
            mean[0] += c[0];
            mean[1] += c[1];
        }
        mean[0] /= n;
        mean[1] /= n;
        Self { coeffs, mean }
    }

    pub fn horizon(&self) -> usize {
        self.coeffs.len()
    }

    pub fn slot_feedback(&self, t: usize, x: f64) -> UtilityFeedback {
        example1_feedback(x, self.coeffs[t])
    }

    /// Closed-form time average: the perturbation is linear in `x`, so only
    /// the mean coefficients matter.
    pub fn average_feedback(&self, x: f64) -> UtilityFeedback {
        example1_feedback(x, self.mean)
    }

    /// Truncated prefix, for benchmarks at intermediate horizons.
    pub fn prefix(&self, t: usize) -> Self {
        Self::new(self.coeffs[..t.min(self.coeffs.len())].to_vec())
    }
}

/// The three element types of the multiset adversary over `X = [-1, 1]`,
/// with multiplicities 10, 20 and 10 (cycle length 40).
pub const EXAMPLE2_MULTIPLICITIES: [usize; 3] = [10, 20, 10];
pub const EXAMPLE2_CYCLE: usize = 40;

pub fn example2_feedback(x: f64, element: u8) -> UtilityFeedback {
    match element {
        0 => UtilityFeedback {
            values: vec![1.0 - x, 1.0 - (1.0 - x) * (1.0 - x)],
            supergradients: vec![vec![-1.0], vec![2.0 * (1.0 - x)]],
        },
        1 => UtilityFeedback {
            values: vec![1.0 - (1.0 - x) * (1.0 - x), 1.0 - 4.0 * x],
            supergradients: vec![vec![2.0 * (1.0 - x)], vec![-4.0]],
        },
        2 => UtilityFeedback {
            values: vec![1.0, -2.0 * x],
            supergradients: vec![vec![0.0], vec![-2.0]],
        },
        _ => unreachable!("element type is 0..3"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example2Mode {
    /// Elements consumed in the textual order of the multiset definition.
    Cyclic,
    /// Elements drawn uniformly at random without replacement; the multiset
    /// is replenished every 40 draws.
    Uar,
}

/// Multiset adversary: irrevocably consumes elements from a 40-element
/// multiset of utility functions, replenishing it when exhausted.
#[derive(Debug)]
pub struct Example2Adversary {
    mode: Example2Mode,
    rng: ChaCha8Rng,
    cycle: Vec<u8>,
    pos: usize,
    recorded: Vec<u8>,
}

impl Example2Adversary {
    pub fn new(mode: Example2Mode, rng: ChaCha8Rng) -> Self {
        let mut adv = Self {
            mode,
            rng,
            cycle: Vec::new(),
            pos: 0,
            recorded: Vec::new(),
        };
        adv.replenish();
        adv
    }

    fn replenish(&mut self) {
        self.cycle.clear();
        for (ty, &count) in EXAMPLE2_MULTIPLICITIES.iter().enumerate() {
            self.cycle.extend(std::iter::repeat(ty as u8).take(count));
        }
        if self.mode == Example2Mode::Uar {
            self.cycle.shuffle(&mut self.rng);
        }
        self.pos = 0;
    }

    pub fn feedback(&mut self, x: f64) -> UtilityFeedback {
        if self.pos >= self.cycle.len() {
            self.replenish();
        }
        let element = self.cycle[self.pos];
        self.pos += 1;
        self.recorded.push(element);
        example2_feedback(x, element)
    }

    pub fn into_sequence(self) -> Example2Sequence {
        Example2Sequence::new(self.recorded)
    }
}

/// Frozen record of a multiset-adversary run.
#[derive(Debug, Clone)]
pub struct Example2Sequence {
    elements: Vec<u8>,
    counts: [usize; 3],
}

impl Example2Sequence {
    pub fn new(elements: Vec<u8>) -> Self {
        let mut counts = [0usize; 3];
        for &e in &elements {
            counts[e as usize] += 1;
        }
        Self { elements, counts }
    }

    pub fn horizon(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[u8] {
        &self.elements
    }

    pub fn slot_feedback(&self, t: usize, x: f64) -> UtilityFeedback {
        example2_feedback(x, self.elements[t])
    }

    /// Exact time average from the per-type counts.
    pub fn average_feedback(&self, x: f64) -> UtilityFeedback {
        let n = self.elements.len().max(1) as f64;
        let mut values = vec![0.0; 2];
        let mut grads = vec![vec![0.0; 1], vec![0.0; 1]];
        for ty in 0..3u8 {
            let w = self.counts[ty as usize] as f64 / n;
            if w == 0.0 {
                continue;
            }
            let fb = example2_feedback(x, ty);
            for i in 0..2 {
                values[i] += w * fb.values[i];
                grads[i][0] += w * fb.supergradients[i][0];
            }
        }
        UtilityFeedback {
            values,
            supergradients: grads,
        }
    }

    pub fn prefix(&self, t: usize) -> Self {
        Self::new(self.elements[..t.min(self.elements.len())].to_vec())
    }
}
