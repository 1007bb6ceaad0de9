//! Command-line runner: execute experiment configurations, validate them,
//! and list the built-in network topologies.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use horizonfair::cache::CacheNetwork;
use horizonfair::runner::{
    preset_names, run_experiment, topology_preset, BenchmarkToggles, ExperimentConfig,
};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "horizonfair", version, about = "Online horizon-fair allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file and emit CSV/JSON results.
    Run {
        /// Path to the experiment config (TOML).
        config: PathBuf,
        /// Output directory (overrides the config's `out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated benchmark toggles: hf,sf,util,pareto
        /// (overrides the config's [benchmarks] section).
        #[arg(long, value_delimiter = ',')]
        benchmarks: Option<Vec<String>>,
    },
    /// Parse and validate a config file without running it.
    Validate {
        config: PathBuf,
    },
    /// Operations on built-in topology presets.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
}

#[derive(Subcommand)]
enum PresetsAction {
    /// List the built-in topologies with their published counts.
    List,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            benchmarks,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(toggles) = benchmarks {
                cfg.benchmarks = parse_benchmark_toggles(&toggles, &cfg.benchmarks)?;
            }
            let out_dir = out.or_else(|| cfg.out_dir.clone());
            let artifacts = run_experiment(&cfg, out_dir.as_deref())?;
            let m = &artifacts.metrics;
            println!("run `{}` complete over {} slots", cfg.name, cfg.horizon);
            println!("  final avg utilities: {:?}", m.final_avg);
            println!("  objective: {:.6}", m.objective);
            if let Some(r) = m.regret {
                println!("  fairness regret vs benchmark: {r:.6}");
            }
            if let Some(p) = m.pof {
                println!("  price of fairness: {p:.6}");
            }
            if m.clamp_count > 0 {
                println!("  slot-fair transform floors: {}", m.clamp_count);
            }
            if let Some(dir) = out_dir {
                println!("  outputs in {}", dir.display());
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::from_path(&config)
                .with_context(|| format!("validating {}", config.display()))?;
            println!(
                "ok: `{}` ({} policy, alpha = {}, horizon = {})",
                cfg.name, cfg.policy, cfg.alpha, cfg.horizon
            );
            Ok(())
        }
        Command::Presets { action } => match action {
            PresetsAction::List => {
                println!("{:<10} {:>6} {:>6} {:>7} {:>6}", "name", "nodes", "edges", "agents", "repos");
                for name in preset_names() {
                    let spec = topology_preset(name)?;
                    let net = CacheNetwork::from_spec(&spec, 20)?;
                    println!(
                        "{:<10} {:>6} {:>6} {:>7} {:>6}",
                        name,
                        net.n_nodes(),
                        net.n_edges(),
                        net.n_agents(),
                        spec.repositories.all.len(),
                    );
                }
                Ok(())
            }
        },
    }
}

fn parse_benchmark_toggles(
    toggles: &[String],
    base: &BenchmarkToggles,
) -> Result<BenchmarkToggles> {
    let mut out = BenchmarkToggles {
        hf: false,
        sf: false,
        utilitarian: false,
        pareto: false,
        ..base.clone()
    };
    for t in toggles {
        match t.trim() {
            "hf" => out.hf = true,
            "sf" => out.sf = true,
            "util" | "utilitarian" => out.utilitarian = true,
            "pareto" => out.pareto = true,
            "" => {}
            other => bail!("unknown benchmark toggle {other:?} (expected hf, sf, util, pareto)"),
        }
    }
    Ok(out)
}
