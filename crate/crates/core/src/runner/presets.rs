//! Built-in network topologies and the seeded instance randomizer.

use crate::cache::{CacheError, TopologySpec};
use crate::trace::derived_rng;
use rand::Rng;

const CYCLE: &str = include_str!("../../presets/cycle.toml");
const TREE1: &str = include_str!("../../presets/tree1.toml");
const TREE2: &str = include_str!("../../presets/tree2.toml");
const TREE3: &str = include_str!("../../presets/tree3.toml");
const GRID: &str = include_str!("../../presets/grid.toml");
const ABILENE: &str = include_str!("../../presets/abilene.toml");
const GEANT: &str = include_str!("../../presets/geant.toml");

pub fn preset_names() -> Vec<&'static str> {
    vec!["cycle", "tree1", "tree2", "tree3", "grid", "abilene", "geant"]
}

pub fn topology_preset(name: &str) -> Result<TopologySpec, CacheError> {
    let text = match name {
        "cycle" => CYCLE,
        "tree1" => TREE1,
        "tree2" => TREE2,
        "tree3" => TREE3,
        "grid" => GRID,
        "abilene" => ABILENE,
        "geant" => GEANT,
        other => {
            return Err(CacheError::Invalid(format!(
                "unknown topology preset {other:?}; available: {}",
                preset_names().join(", ")
            )))
        }
    };
    TopologySpec::from_toml(text)
}

/// Stream id for instance randomization within a master seed.
const RANDOMIZE_STREAM: u64 = 7001;

/// Resamples retrieval costs and capacities of a topology: costs uniform
/// over {1..5} (edges incident to a repository node over {6..10}) and
/// capacities uniform over {1..5}, deterministically from the seed.
pub fn randomize_instance(spec: &mut TopologySpec, master_seed: u64) {
    let mut rng = derived_rng(master_seed, RANDOMIZE_STREAM);
    let mut is_repo = vec![false; spec.nodes];
    for &node in &spec.repositories.all {
        is_repo[node - 1] = true;
    }
    for pf in &spec.repositories.per_file {
        for &node in &pf.nodes {
            is_repo[node - 1] = true;
        }
    }
    for e in &mut spec.edges {
        let repo_edge = is_repo[e.a - 1] || is_repo[e.b - 1];
        e.weight = if repo_edge {
            rng.random_range(6..=10u32) as f64
        } else {
            rng.random_range(1..=5u32) as f64
        };
    }
    for c in &mut spec.capacities {
        *c = rng.random_range(1..=5u32);
    }
}
