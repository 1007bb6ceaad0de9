//! Weighted cache-network topology: shortest-path costs, per-(query node,
//! file) retrieval orderings, repository pinning, and the product
//! allocation domain over per-cache capped simplices.

use crate::domain::{CappedSimplexDomain, Domain, DomainError, ProductDomain};
use serde::Deserialize;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("invalid topology: {0}")]
    Invalid(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// On-disk topology description. Node and file ids are 1-based in files;
/// the constructed network uses 0-based indices internally.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub name: String,
    pub nodes: usize,
    pub edges: Vec<EdgeSpec>,
    pub capacities: Vec<u32>,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub repositories: RepositorySpec,
    /// When true, pinned repository copies consume cache capacity
    /// (the literal budget reading); by default they are exempt.
    #[serde(default)]
    pub pins_consume_budget: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub caches: Vec<usize>,
    pub query_nodes: Vec<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepositorySpec {
    /// Nodes permanently storing the entire catalog.
    #[serde(default)]
    pub all: Vec<usize>,
    /// Additional per-file placements.
    #[serde(default)]
    pub per_file: Vec<PerFileRepository>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerFileRepository {
    pub file: u32,
    pub nodes: Vec<usize>,
}

impl TopologySpec {
    pub fn from_toml(text: &str) -> Result<Self, CacheError> {
        toml::from_str(text).map_err(|e| CacheError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct AgentNodes {
    pub caches: Vec<usize>,
    pub query_nodes: Vec<usize>,
}

/// Retrieval ordering for one (query node, file) pair: all caches strictly
/// cheaper than the nearest repository, then that repository, sorted by
/// ascending shortest-path cost with node-id tie-break. The first entry is
/// the query node itself at cost zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalOrder {
    pub nodes: Vec<usize>,
    pub costs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CacheNetwork {
    name: String,
    n_nodes: usize,
    catalog: u32,
    edges: Vec<(usize, usize, f64)>,
    capacities: Vec<u32>,
    repos_per_file: Vec<Vec<usize>>,
    pinned: Vec<bool>,
    agents: Vec<AgentNodes>,
    node_agent: Vec<usize>,
    query_index: Vec<Option<usize>>,
    query_nodes: Vec<usize>,
    pins_consume_budget: bool,
    dist: Vec<Vec<f64>>,
    orders: Vec<Vec<RetrievalOrder>>,
}

impl CacheNetwork {
    pub fn from_spec(spec: &TopologySpec, catalog: u32) -> Result<Self, CacheError> {
        let n = spec.nodes;
        if n == 0 {
            return Err(CacheError::Invalid("topology needs at least one node".into()));
        }
        if catalog == 0 {
            return Err(CacheError::Invalid("catalog must be nonempty".into()));
        }
        if spec.capacities.len() != n {
            return Err(CacheError::Invalid(format!(
                "capacities has {} entries for {n} nodes",
                spec.capacities.len()
            )));
        }
        let to_idx = |id: usize, what: &str| -> Result<usize, CacheError> {
            if id < 1 || id > n {
                Err(CacheError::Invalid(format!("{what} id {id} outside 1..={n}")))
            } else {
                Ok(id - 1)
            }
        };
        let mut edges = Vec::with_capacity(spec.edges.len());
        for e in &spec.edges {
            let a = to_idx(e.a, "edge endpoint")?;
            let b = to_idx(e.b, "edge endpoint")?;
            if a == b {
                return Err(CacheError::Invalid(format!("self-loop at node {}", e.a)));
            }
            if !(e.weight > 0.0) || !e.weight.is_finite() {
                return Err(CacheError::Invalid(format!(
                    "edge ({}, {}) must have positive finite weight, got {}",
                    e.a, e.b, e.weight
                )));
            }
            edges.push((a, b, e.weight));
        }

        // agents must partition the node set
        let mut node_agent = vec![usize::MAX; n];
        let mut agents = Vec::with_capacity(spec.agents.len());
        if spec.agents.is_empty() {
            return Err(CacheError::Invalid("at least one agent is required".into()));
        }
        for (ai, a) in spec.agents.iter().enumerate() {
            let mut caches = Vec::with_capacity(a.caches.len());
            for &c in &a.caches {
                let c = to_idx(c, "agent cache")?;
                if node_agent[c] != usize::MAX {
                    return Err(CacheError::Invalid(format!(
                        "node {} owned by agents {} and {ai}",
                        c + 1,
                        node_agent[c]
                    )));
                }
                node_agent[c] = ai;
                caches.push(c);
            }
            let mut query_nodes = Vec::with_capacity(a.query_nodes.len());
            for &q in &a.query_nodes {
                let q = to_idx(q, "query node")?;
                if !caches.contains(&q) {
                    return Err(CacheError::Invalid(format!(
                        "query node {} of agent {ai} is not among its caches",
                        q + 1
                    )));
                }
                query_nodes.push(q);
            }
            if query_nodes.is_empty() {
                return Err(CacheError::Invalid(format!(
                    "agent {ai} has no query nodes"
                )));
            }
            agents.push(AgentNodes { caches, query_nodes });
        }
        if node_agent.iter().any(|&a| a == usize::MAX) {
            return Err(CacheError::Invalid(
                "agent cache sets must cover every node".into(),
            ));
        }

        // repository placements per file
        let mut repos_per_file = vec![Vec::new(); catalog as usize];
        for &node in &spec.repositories.all {
            let c = to_idx(node, "repository")?;
            for r in repos_per_file.iter_mut() {
                r.push(c);
            }
        }
        for pf in &spec.repositories.per_file {
            if pf.file < 1 || pf.file > catalog {
                return Err(CacheError::Invalid(format!(
                    "per-file repository for file {} outside 1..={catalog}",
                    pf.file
                )));
            }
            for &node in &pf.nodes {
                let c = to_idx(node, "repository")?;
                repos_per_file[(pf.file - 1) as usize].push(c);
            }
        }
        for (f, r) in repos_per_file.iter_mut().enumerate() {
            r.sort_unstable();
            r.dedup();
            if r.is_empty() {
                return Err(CacheError::Invalid(format!(
                    "file {} has no repository",
                    f + 1
                )));
            }
        }

        let mut pinned = vec![false; n * catalog as usize];
        for (f, repos) in repos_per_file.iter().enumerate() {
            for &c in repos {
                pinned[c * catalog as usize + f] = true;
            }
        }

        let mut net = Self {
            name: spec.name.clone(),
            n_nodes: n,
            catalog,
            edges,
            capacities: spec.capacities.clone(),
            repos_per_file,
            pinned,
            agents,
            node_agent,
            query_index: vec![None; n],
            query_nodes: Vec::new(),
            pins_consume_budget: spec.pins_consume_budget,
            dist: Vec::new(),
            orders: Vec::new(),
        };
        let mut query_nodes: Vec<usize> = net
            .agents
            .iter()
            .flat_map(|a| a.query_nodes.iter().copied())
            .collect();
        query_nodes.sort_unstable();
        query_nodes.dedup();
        for (qi, &q) in query_nodes.iter().enumerate() {
            net.query_index[q] = Some(qi);
        }
        net.query_nodes = query_nodes;
        net.rebuild_paths()?;
        // the capped-simplex product must be constructible
        let _ = net.allocation_domain()?;
        Ok(net)
    }

    /// Recomputes shortest paths and retrieval orders; used at construction
    /// and by per-slot weight override hooks.
    fn rebuild_paths(&mut self) -> Result<(), CacheError> {
        self.dist = (0..self.n_nodes)
            .map(|s| self.dijkstra(s))
            .collect();
        let mut orders = Vec::with_capacity(self.query_nodes.len());
        for &q in &self.query_nodes.clone() {
            let mut per_file = Vec::with_capacity(self.catalog as usize);
            for f in 0..self.catalog {
                per_file.push(self.build_order(q, f)?);
            }
            orders.push(per_file);
        }
        self.orders = orders;
        Ok(())
    }

    /// Replaces edge weights (same edge list) and rebuilds paths. Hook for
    /// time-varying retrieval costs; shipped configurations keep weights
    /// fixed for the whole horizon.
    pub fn override_weights(&mut self, weights: &[f64]) -> Result<(), CacheError> {
        if weights.len() != self.edges.len() {
            return Err(CacheError::Invalid(format!(
                "{} weights for {} edges",
                weights.len(),
                self.edges.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(CacheError::Invalid("weights must be positive".into()));
        }
        for (e, &w) in self.edges.iter_mut().zip(weights) {
            e.2 = w;
        }
        self.rebuild_paths()
    }

    fn dijkstra(&self, source: usize) -> Vec<f64> {
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_nodes];
        for &(a, b, w) in &self.edges {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        let mut dist = vec![f64::INFINITY; self.n_nodes];
        dist[source] = 0.0;
        // max-heap on reversed ordering; f64 costs are finite and positive
        let mut heap: BinaryHeap<(std::cmp::Reverse<OrderedCost>, usize)> = BinaryHeap::new();
        heap.push((std::cmp::Reverse(OrderedCost(0.0)), source));
        while let Some((std::cmp::Reverse(OrderedCost(d)), u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push((std::cmp::Reverse(OrderedCost(nd)), v));
                }
            }
        }
        dist
    }

    fn build_order(&self, query: usize, file: u32) -> Result<RetrievalOrder, CacheError> {
        let repos = &self.repos_per_file[file as usize];
        let repo_cost = repos
            .iter()
            .map(|&r| self.dist[query][r])
            .fold(f64::INFINITY, f64::min);
        if !repo_cost.is_finite() {
            return Err(CacheError::Invalid(format!(
                "file {} unreachable from query node {}",
                file + 1,
                query + 1
            )));
        }
        // nearest repository, node-id tie-break
        let nearest_repo = repos
            .iter()
            .copied()
            .filter(|&r| self.dist[query][r] == repo_cost)
            .min()
            .unwrap();
        if nearest_repo == query {
            // the query node permanently stores the file
            return Ok(RetrievalOrder {
                nodes: vec![query],
                costs: vec![0.0],
            });
        }
        let mut entries: Vec<(f64, usize)> = (0..self.n_nodes)
            .filter(|&c| self.dist[query][c] < repo_cost && !repos.contains(&c))
            .map(|c| (self.dist[query][c], c))
            .collect();
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        entries.push((repo_cost, nearest_repo));
        Ok(RetrievalOrder {
            costs: entries.iter().map(|e| e.0).collect(),
            nodes: entries.iter().map(|e| e.1).collect(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn catalog(&self) -> u32 {
        self.catalog
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn agents(&self) -> &[AgentNodes] {
        &self.agents
    }

    pub fn agent_of_node(&self, node: usize) -> usize {
        self.node_agent[node]
    }

    pub fn capacities(&self) -> &[u32] {
        &self.capacities
    }

    pub fn is_pinned(&self, node: usize, file: u32) -> bool {
        self.pinned[node * self.catalog as usize + file as usize]
    }

    pub fn pins_consume_budget(&self) -> bool {
        self.pins_consume_budget
    }

    pub fn coord(&self, node: usize, file: u32) -> usize {
        node * self.catalog as usize + file as usize
    }

    pub fn shortest_path_cost(&self, a: usize, b: usize) -> f64 {
        self.dist[a][b]
    }

    /// Retrieval order for a query node; `file` is 0-based here.
    pub fn retrieval_order(&self, query: usize, file: u32) -> &RetrievalOrder {
        let qi = self.query_index[query].expect("retrieval order requested for non-query node");
        &self.orders[qi][file as usize]
    }

    pub fn is_query_node(&self, node: usize) -> bool {
        self.query_index[node].is_some()
    }

    /// Cost of fetching `file` from the repository nearest to `query`.
    pub fn nearest_repo_cost(&self, query: usize, file: u32) -> f64 {
        let order = self.retrieval_order(query, file);
        *order.costs.last().unwrap()
    }

    /// Largest nearest-repository cost over an agent's query nodes and the
    /// catalog: the per-request utility bound used for normalization.
    pub fn agent_cost_bound(&self, agent: usize) -> f64 {
        self.agents[agent]
            .query_nodes
            .iter()
            .flat_map(|&q| (0..self.catalog).map(move |f| self.nearest_repo_cost(q, f)))
            .fold(0.0, f64::max)
    }

    /// The product of per-cache capped simplices.
    pub fn allocation_domain(&self) -> Result<Domain, CacheError> {
        let f = self.catalog as usize;
        let mut factors = Vec::with_capacity(self.n_nodes);
        for c in 0..self.n_nodes {
            let pins = self.pinned[c * f..(c + 1) * f].to_vec();
            factors.push(Domain::CappedSimplex(CappedSimplexDomain::new(
                f,
                self.capacities[c] as f64,
                pins,
                self.pins_consume_budget,
            )?));
        }
        Ok(Domain::Product(ProductDomain::new(factors)?))
    }

    /// The repository-only state: pinned coordinates at 1, the rest at 0.
    pub fn repository_only_state(&self) -> Vec<f64> {
        self.pinned
            .iter()
            .map(|&p| if p { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.n_nodes * self.catalog as usize
    }
}

/// Total order wrapper for finite shortest-path costs inside the heap.
#[derive(Debug, Clone, Copy, PartialEq)]
struct OrderedCost(f64);

impl Eq for OrderedCost {}

impl PartialOrd for OrderedCost {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedCost {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.partial_cmp(&other.0).expect("costs are finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_node_spec() -> TopologySpec {
        TopologySpec::from_toml(
            r#"
            name = "pair"
            nodes = 2
            capacities = [1, 0]
            edges = [{ a = 1, b = 2, weight = 3.0 }]
            agents = [{ caches = [1, 2], query_nodes = [1] }]
            [repositories]
            all = [2]
            "#,
        )
        .unwrap()
    }

    #[test]
    fn shortest_paths() {
        let net = CacheNetwork::from_spec(&two_node_spec(), 2).unwrap();
        assert_eq!(net.shortest_path_cost(0, 1), 3.0);
        assert_eq!(net.shortest_path_cost(0, 0), 0.0);

        // triangle with a shortcut: direct 5, via node 3 costs 2
        let spec = TopologySpec::from_toml(
            r#"
            name = "triangle"
            nodes = 3
            capacities = [1, 1, 1]
            edges = [
                { a = 1, b = 2, weight = 5.0 },
                { a = 1, b = 3, weight = 1.0 },
                { a = 3, b = 2, weight = 1.0 },
            ]
            agents = [{ caches = [1, 2, 3], query_nodes = [1] }]
            [repositories]
            all = [2]
            "#,
        )
        .unwrap();
        let net = CacheNetwork::from_spec(&spec, 1).unwrap();
        assert_eq!(net.shortest_path_cost(0, 1), 2.0);
        for c in 0..3 {
            assert_eq!(net.shortest_path_cost(c, c), 0.0);
        }
    }

    #[test]
    fn retrieval_orders() {
        let net = CacheNetwork::from_spec(&two_node_spec(), 2).unwrap();
        let order = net.retrieval_order(0, 0);
        assert_eq!(order.nodes, vec![0, 1]);
        assert_eq!(order.costs, vec![0.0, 3.0]);

        // a query node that is itself a repository has a singleton order
        let spec = TopologySpec::from_toml(
            r#"
            name = "self-repo"
            nodes = 2
            capacities = [1, 1]
            edges = [{ a = 1, b = 2, weight = 2.0 }]
            agents = [{ caches = [1, 2], query_nodes = [1] }]
            [repositories]
            all = [1]
            "#,
        )
        .unwrap();
        let net = CacheNetwork::from_spec(&spec, 1).unwrap();
        let order = net.retrieval_order(0, 0);
        assert_eq!(order.nodes, vec![0]);
        assert_eq!(order.costs, vec![0.0]);
    }

    #[test]
    fn cycle_order_interleaves_peers_before_repository() {
        let spec = TopologySpec::from_toml(
            r#"
            name = "cycle"
            nodes = 3
            capacities = [5, 5, 0]
            edges = [
                { a = 1, b = 2, weight = 2.0 },
                { a = 1, b = 3, weight = 3.5 },
                { a = 2, b = 3, weight = 3.0 },
            ]
            agents = [
                { caches = [1, 3], query_nodes = [1] },
                { caches = [2], query_nodes = [2] },
            ]
            [repositories]
            all = [3]
            "#,
        )
        .unwrap();
        let net = CacheNetwork::from_spec(&spec, 4).unwrap();
        let o1 = net.retrieval_order(0, 0);
        assert_eq!(o1.nodes, vec![0, 1, 2]);
        assert_eq!(o1.costs, vec![0.0, 2.0, 3.5]);
        let o2 = net.retrieval_order(1, 0);
        assert_eq!(o2.nodes, vec![1, 0, 2]);
        assert_eq!(o2.costs, vec![0.0, 2.0, 3.0]);
        assert_eq!(net.agent_cost_bound(0), 3.5);
        assert_eq!(net.agent_cost_bound(1), 3.0);
    }

    #[test]
    fn construction_validation() {
        // node owned twice
        let bad = TopologySpec::from_toml(
            r#"
            name = "bad"
            nodes = 2
            capacities = [1, 1]
            edges = [{ a = 1, b = 2, weight = 1.0 }]
            agents = [
                { caches = [1, 2], query_nodes = [1] },
                { caches = [2], query_nodes = [2] },
            ]
            [repositories]
            all = [2]
            "#,
        )
        .unwrap();
        assert!(CacheNetwork::from_spec(&bad, 1).is_err());

        // file with no repository
        let bad = TopologySpec::from_toml(
            r#"
            name = "bad"
            nodes = 2
            capacities = [1, 1]
            edges = [{ a = 1, b = 2, weight = 1.0 }]
            agents = [{ caches = [1, 2], query_nodes = [1] }]
            [repositories]
            per_file = [{ file = 1, nodes = [2] }]
            "#,
        )
        .unwrap();
        assert!(CacheNetwork::from_spec(&bad, 2).is_err());

        // unreachable repository
        let bad = TopologySpec::from_toml(
            r#"
            name = "bad"
            nodes = 3
            capacities = [1, 1, 1]
            edges = [{ a = 1, b = 2, weight = 1.0 }]
            agents = [{ caches = [1, 2, 3], query_nodes = [1] }]
            [repositories]
            all = [3]
            "#,
        )
        .unwrap();
        assert!(CacheNetwork::from_spec(&bad, 1).is_err());

        // nonpositive weight
        let bad = TopologySpec::from_toml(
            r#"
            name = "bad"
            nodes = 2
            capacities = [1, 1]
            edges = [{ a = 1, b = 2, weight = 0.0 }]
            agents = [{ caches = [1, 2], query_nodes = [1] }]
            [repositories]
            all = [2]
            "#,
        )
        .unwrap();
        assert!(CacheNetwork::from_spec(&bad, 1).is_err());
    }

    #[test]
    fn weight_override_rebuilds_orders() {
        let mut net = CacheNetwork::from_spec(&two_node_spec(), 1).unwrap();
        assert_eq!(net.nearest_repo_cost(0, 0), 3.0);
        net.override_weights(&[7.0]).unwrap();
        assert_eq!(net.nearest_repo_cost(0, 0), 7.0);
        assert!(net.override_weights(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn allocation_domain_and_repository_state() {
        let net = CacheNetwork::from_spec(&two_node_spec(), 2).unwrap();
        let domain = net.allocation_domain().unwrap();
        assert_eq!(domain.dim(), 4);
        let x0 = net.repository_only_state();
        assert_eq!(x0, vec![0.0, 0.0, 1.0, 1.0]);
        assert!(domain.contains(&x0, 1e-12));
        assert_eq!(domain.origin_projection(), x0);
    }
}
