//! Result emission: per-slot timeseries CSV, run summary JSON, and the
//! optional Pareto-front CSV. Column orders are fixed; identical configs
//! and seeds produce byte-identical files.

use crate::bench::fairness_objective;
use crate::runner::config::ExperimentConfig;
use crate::runner::run::{RunArtifacts, RunError};
use serde::Serialize;
use std::path::Path;

/// `timeseries.csv` header, in order: the slot (1-based), the agent
/// (0-based), the agent's cumulative and time-averaged raw utility, the
/// fairness objective of the running averaged utilities, and the gap to
/// the fair benchmark's objective (empty unless the benchmark ran).
pub const TIMESERIES_HEADER: [&str; 6] = [
    "slot",
    "agent_id",
    "cum_utility",
    "avg_utility",
    "objective_value",
    "regret_estimate",
];

/// `pareto.csv` header: scalarization weight of agent 1 and the two
/// averaged utilities of the solved point.
pub const PARETO_HEADER: [&str; 3] = ["w1", "u1", "u2"];

#[derive(Serialize)]
struct BenchmarkSummary {
    objective: f64,
    avg_utilities: Vec<f64>,
    iterations: usize,
    final_grad_norm: f64,
    floored: bool,
}

#[derive(Serialize)]
struct SeveritySummary {
    budgeted: f64,
    partitioned_upper: f64,
    per_block_size: Vec<(usize, f64, f64)>,
}

#[derive(Serialize)]
struct Summary<'a> {
    name: &'a str,
    version: &'a str,
    policy: String,
    alpha: f64,
    horizon: usize,
    seed: u64,
    final_avg_utilities: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    final_avg_transformed: Option<&'a [f64]>,
    objective: f64,
    objective_floored: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    regret: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pof: Option<f64>,
    clamp_count: u64,
    transform_floor_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    severity: Option<SeveritySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hf_benchmark: Option<BenchmarkSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hf_raw_avg_utilities: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sf_benchmark: Option<BenchmarkSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    utilitarian_benchmark: Option<BenchmarkSummary>,
    config_echo: &'a ExperimentConfig,
}

fn bench_summary(b: &crate::bench::BenchmarkResult) -> BenchmarkSummary {
    BenchmarkSummary {
        objective: b.objective,
        avg_utilities: b.avg_utilities.clone(),
        iterations: b.iterations,
        final_grad_norm: b.final_grad_norm,
        floored: b.floored,
    }
}

/// Probes that the output directory exists and is writable; called before
/// a run starts so failures surface early.
pub fn prepare_out_dir(dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| RunError::Output(format!("cannot create {}: {e}", dir.display())))?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"ok")
        .map_err(|e| RunError::Output(format!("{} is not writable: {e}", dir.display())))?;
    let _ = std::fs::remove_file(&probe);
    Ok(())
}

pub fn emit_outputs(artifacts: &RunArtifacts, dir: &Path) -> Result<(), RunError> {
    prepare_out_dir(dir)?;
    emit_timeseries(artifacts, &dir.join("timeseries.csv"))?;
    emit_summary(artifacts, &dir.join("summary.json"))?;
    if let Some(front) = &artifacts.benchmarks.pareto {
        emit_pareto(front, &dir.join("pareto.csv"))?;
    }
    Ok(())
}

fn emit_timeseries(artifacts: &RunArtifacts, path: &Path) -> Result<(), RunError> {
    let io_err = |e: csv::Error| RunError::Output(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| RunError::Output(format!("{}: {e}", path.display())))?;
    w.write_record(TIMESERIES_HEADER).map_err(io_err)?;
    let m = &artifacts.metrics;
    let n_agents = artifacts.params.n_agents();
    let hf_obj = artifacts.benchmarks.hf.as_ref().map(|b| b.objective);
    for t in 1..=m.per_slot_cum.len() {
        let avg_obj_space = m.avg_at(t);
        let mut floored = false;
        let obj = fairness_objective(&artifacts.params, &avg_obj_space, &mut floored);
        let regret = hf_obj.map(|o| o - obj);
        for agent in 0..n_agents {
            let cum = m.per_slot_cum[t - 1][agent];
            w.write_record(&[
                t.to_string(),
                agent.to_string(),
                format_f64(cum),
                format_f64(cum / t as f64),
                format_f64(obj),
                regret.map(format_f64).unwrap_or_default(),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush()
        .map_err(|e| RunError::Output(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn emit_summary(artifacts: &RunArtifacts, path: &Path) -> Result<(), RunError> {
    let m = &artifacts.metrics;
    let summary = Summary {
        name: &artifacts.config.name,
        version: env!("CARGO_PKG_VERSION"),
        policy: artifacts.config.policy.to_string(),
        alpha: artifacts.config.alpha,
        horizon: artifacts.config.horizon,
        seed: artifacts.config.seed,
        final_avg_utilities: &m.final_avg,
        final_avg_transformed: m.final_avg_transformed.as_deref(),
        objective: m.objective,
        objective_floored: m.objective_floored,
        regret: m.regret,
        pof: m.pof,
        clamp_count: m.clamp_count,
        transform_floor_count: m.transform_floor_count,
        severity: artifacts.severity.as_ref().map(|s| SeveritySummary {
            budgeted: s.budgeted,
            partitioned_upper: s.partitioned_upper,
            per_block_size: s.per_block_size.clone(),
        }),
        hf_benchmark: artifacts.benchmarks.hf.as_ref().map(bench_summary),
        hf_raw_avg_utilities: artifacts.hf_raw_avg_utilities.as_deref(),
        sf_benchmark: artifacts.benchmarks.sf.as_ref().map(bench_summary),
        utilitarian_benchmark: artifacts.benchmarks.utilitarian.as_ref().map(bench_summary),
        config_echo: &artifacts.config,
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| RunError::Output(format!("summary serialization: {e}")))?;
    std::fs::write(path, json + "\n")
        .map_err(|e| RunError::Output(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn emit_pareto(front: &[crate::bench::ParetoPoint], path: &Path) -> Result<(), RunError> {
    let io_err = |e: csv::Error| RunError::Output(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| RunError::Output(format!("{}: {e}", path.display())))?;
    w.write_record(PARETO_HEADER).map_err(io_err)?;
    for p in front {
        w.write_record(&[format_f64(p.weight), format_f64(p.u1), format_f64(p.u2)])
            .map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| RunError::Output(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn format_f64(v: f64) -> String {
    // shortest round-trip representation; stable across runs
    let mut buf = ryu_format(v);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_format(v: f64) -> String {
    // `{v:?}` uses the shortest representation that round-trips
    format!("{v:?}")
}
