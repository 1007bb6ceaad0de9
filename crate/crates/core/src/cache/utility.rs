//! The caching-gain utility: cost reduction of a fractional network state
//! relative to the repository-only state, its supergradient, and the
//! retrieval cost it telescopes against.

use super::network::CacheNetwork;

/// One slot's requests. `arrivals` preserves order for the replication
/// baselines; `counts` aggregates per (query node, 0-based file).
#[derive(Debug, Clone, Default)]
pub struct RequestBatch {
    pub arrivals: Vec<(usize, u32)>,
    pub counts: Vec<(usize, u32, u32)>,
}

impl RequestBatch {
    /// Aggregates an arrival-ordered request list (files 0-based).
    pub fn from_arrivals(arrivals: Vec<(usize, u32)>) -> Self {
        let mut sorted = arrivals.clone();
        sorted.sort_unstable();
        let mut counts: Vec<(usize, u32, u32)> = Vec::new();
        for (node, file) in sorted {
            match counts.last_mut() {
                Some(last) if last.0 == node && last.1 == file => last.2 += 1,
                _ => counts.push((node, file, 1)),
            }
        }
        Self { arrivals, counts }
    }

    pub fn total_requests(&self) -> u32 {
        self.counts.iter().map(|c| c.2).sum()
    }
}

/// Caching gain of agent `agent` for this batch at state `x`: for each
/// request, the telescoping sum of retrieval-cost increments gated by the
/// cumulative fraction stored along the retrieval order.
pub fn caching_utility(net: &CacheNetwork, batch: &RequestBatch, x: &[f64], agent: usize) -> f64 {
    let mut total = 0.0;
    for &(node, file, r) in &batch.counts {
        if net.agent_of_node(node) != agent {
            continue;
        }
        let order = net.retrieval_order(node, file);
        let mut cum = 0.0;
        let mut gain = 0.0;
        for k in 0..order.nodes.len().saturating_sub(1) {
            cum += x[net.coord(order.nodes[k], file)];
            gain += (order.costs[k + 1] - order.costs[k]) * cum.min(1.0);
        }
        total += r as f64 * gain;
    }
    total
}

/// Retrieval cost actually paid by the agent at state `x`; satisfies
/// `utility(x) + cost(x) = cost(x0)` exactly, with `x0` the
/// repository-only state.
pub fn retrieval_cost(net: &CacheNetwork, batch: &RequestBatch, x: &[f64], agent: usize) -> f64 {
    let mut total = 0.0;
    for &(node, file, r) in &batch.counts {
        if net.agent_of_node(node) != agent {
            continue;
        }
        let order = net.retrieval_order(node, file);
        let mut cum = 0.0;
        let mut cost = 0.0;
        for k in 0..order.nodes.len().saturating_sub(1) {
            cum += x[net.coord(order.nodes[k], file)];
            cost += (order.costs[k + 1] - order.costs[k]) * (1.0 - cum.min(1.0));
        }
        total += r as f64 * cost;
    }
    total
}

/// A supergradient of the agent's utility at `x` over the full allocation
/// vector. Along each retrieval order the gated increments stay active
/// until the cumulative stored fraction first reaches 1; position `p` then
/// collects the remaining cost span `costs[K] - costs[p]`. At a kink
/// (cumulative sum exactly 1) the zero branch is chosen.
pub fn utility_supergradient(
    net: &CacheNetwork,
    batch: &RequestBatch,
    x: &[f64],
    agent: usize,
) -> Vec<f64> {
    let mut grad = vec![0.0; net.dim()];
    for &(node, file, r) in &batch.counts {
        if net.agent_of_node(node) != agent {
            continue;
        }
        let order = net.retrieval_order(node, file);
        let m = order.nodes.len();
        if m < 2 {
            continue;
        }
        // first telescoping index whose cumulative sum saturates
        let mut cum = 0.0;
        let mut sat = m - 1;
        for k in 0..m - 1 {
            cum += x[net.coord(order.nodes[k], file)];
            if cum >= 1.0 {
                sat = k;
                break;
            }
        }
        let cost_at_sat = order.costs[sat];
        for p in 0..sat {
            grad[net.coord(order.nodes[p], file)] += r as f64 * (cost_at_sat - order.costs[p]);
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::network::TopologySpec;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_cache_net() -> CacheNetwork {
        let spec = TopologySpec::from_toml(
            r#"
            name = "single"
            nodes = 2
            capacities = [1, 0]
            edges = [{ a = 1, b = 2, weight = 10.0 }]
            agents = [{ caches = [1, 2], query_nodes = [1] }]
            [repositories]
            all = [2]
            "#,
        )
        .unwrap();
        CacheNetwork::from_spec(&spec, 2).unwrap()
    }

    fn chain_net() -> CacheNetwork {
        // query - peer - repo with costs 0, 2, 5
        let spec = TopologySpec::from_toml(
            r#"
            name = "chain"
            nodes = 3
            capacities = [2, 2, 0]
            edges = [
                { a = 1, b = 2, weight = 2.0 },
                { a = 2, b = 3, weight = 3.0 },
            ]
            agents = [
                { caches = [1], query_nodes = [1] },
                { caches = [2, 3], query_nodes = [2] },
            ]
            [repositories]
            all = [3]
            "#,
        )
        .unwrap();
        CacheNetwork::from_spec(&spec, 3).unwrap()
    }

    #[test]
    fn repository_only_state_gains_nothing() {
        let net = chain_net();
        let x0 = net.repository_only_state();
        let batch = RequestBatch::from_arrivals(vec![(0, 0), (0, 1), (1, 2)]);
        for agent in 0..2 {
            assert_eq!(caching_utility(&net, &batch, &x0, agent), 0.0);
        }
    }

    #[test]
    fn single_cache_hand_values() {
        let net = single_cache_net();
        let batch = RequestBatch::from_arrivals(vec![(0, 0)]);
        let mut x = net.repository_only_state();
        x[net.coord(0, 0)] = 1.0;
        assert_abs_diff_eq!(caching_utility(&net, &batch, &x, 0), 10.0);
        x[net.coord(0, 0)] = 0.4;
        assert_abs_diff_eq!(caching_utility(&net, &batch, &x, 0), 4.0);
    }

    #[test]
    fn telescoping_identity() {
        let net = chain_net();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x0 = net.repository_only_state();
        for _ in 0..100 {
            let batch = RequestBatch::from_arrivals(
                (0..20)
                    .map(|_| (rng.random_range(0..2usize), rng.random_range(0..3u32)))
                    .collect(),
            );
            let y: Vec<f64> = (0..net.dim()).map(|_| rng.random_range(-0.5..1.5)).collect();
            let domain = net.allocation_domain().unwrap();
            let x = domain.project(&y).unwrap();
            for agent in 0..2 {
                let u = caching_utility(&net, &batch, &x, agent);
                let c = retrieval_cost(&net, &batch, &x, agent);
                let c0 = retrieval_cost(&net, &batch, &x0, agent);
                assert_abs_diff_eq!(u + c, c0, epsilon = 1e-10);
                assert!(u >= 0.0);
            }
        }
    }

    #[test]
    fn utility_bounded_by_nearest_repo_cost() {
        let net = chain_net();
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let domain = net.allocation_domain().unwrap();
        for _ in 0..50 {
            let batch = RequestBatch::from_arrivals(
                (0..30)
                    .map(|_| (rng.random_range(0..2usize), rng.random_range(0..3u32)))
                    .collect(),
            );
            let y: Vec<f64> = (0..net.dim()).map(|_| rng.random_range(0.0..1.5)).collect();
            let x = domain.project(&y).unwrap();
            for agent in 0..2 {
                let bound: f64 = batch
                    .counts
                    .iter()
                    .filter(|c| net.agent_of_node(c.0) == agent)
                    .map(|&(node, file, r)| r as f64 * net.nearest_repo_cost(node, file))
                    .sum();
                assert!(caching_utility(&net, &batch, &x, agent) <= bound + 1e-10);
            }
        }
    }

    #[test]
    fn supergradient_at_empty_state_is_full_telescoping_weight() {
        let net = single_cache_net();
        let batch = RequestBatch::from_arrivals(vec![(0, 0)]);
        let x = net.repository_only_state();
        let g = utility_supergradient(&net, &batch, &x, 0);
        assert_eq!(g[net.coord(0, 0)], 10.0);
        assert_eq!(g[net.coord(0, 1)], 0.0);
    }

    #[test]
    fn supergradient_zero_past_saturation() {
        let net = chain_net();
        let batch = RequestBatch::from_arrivals(vec![(0, 0)]);
        let mut x = net.repository_only_state();
        x[net.coord(0, 0)] = 1.0; // saturated at the query node
        let g = utility_supergradient(&net, &batch, &x, 0);
        assert_eq!(g[net.coord(0, 0)], 0.0);
        assert_eq!(g[net.coord(1, 0)], 0.0);
    }

    #[test]
    fn supergradient_matches_central_differences_at_interior_points() {
        let net = chain_net();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut checked = 0;
        while checked < 100 {
            let batch = RequestBatch::from_arrivals(
                (0..10)
                    .map(|_| (rng.random_range(0..2usize), rng.random_range(0..3u32)))
                    .collect(),
            );
            // interior point away from the min kinks: cumulative sums along
            // any 2-hop order stay strictly below 1
            let mut x = net.repository_only_state();
            for c in 0..2 {
                for f in 0..3 {
                    if !net.is_pinned(c, f) {
                        x[net.coord(c, f)] = rng.random_range(0.05..0.45);
                    }
                }
            }
            for agent in 0..2 {
                let g = utility_supergradient(&net, &batch, &x, agent);
                for c in 0..2usize {
                    for f in 0..3u32 {
                        let j = net.coord(c, f);
                        if net.is_pinned(c, f) {
                            continue;
                        }
                        let h = 1e-6;
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[j] += h;
                        xm[j] -= h;
                        let fd = (caching_utility(&net, &batch, &xp, agent)
                            - caching_utility(&net, &batch, &xm, agent))
                            / (2.0 * h);
                        let denom = g[j].abs().max(1.0);
                        assert!(
                            (g[j] - fd).abs() / denom <= 1e-6,
                            "coord ({c},{f}) grad {} vs fd {fd}",
                            g[j]
                        );
                    }
                }
                checked += 1;
            }
        }
    }

    #[test]
    fn supergradient_is_valid_and_utility_concave_monotone() {
        let net = chain_net();
        let domain = net.allocation_domain().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let batch = RequestBatch::from_arrivals(
                (0..15)
                    .map(|_| (rng.random_range(0..2usize), rng.random_range(0..3u32)))
                    .collect(),
            );
            let xr: Vec<f64> = (0..net.dim()).map(|_| rng.random_range(-0.2..1.2)).collect();
            let x = domain.project(&xr).unwrap();
            let zr: Vec<f64> = (0..net.dim()).map(|_| rng.random_range(-0.2..1.2)).collect();
            let z = domain.project(&zr).unwrap();
            let lam: f64 = rng.random_range(0.0..1.0);
            let mix: Vec<f64> = x.iter().zip(&z).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
            for agent in 0..2 {
                let ux = caching_utility(&net, &batch, &x, agent);
                let uz = caching_utility(&net, &batch, &z, agent);
                let umix = caching_utility(&net, &batch, &mix, agent);
                assert!(umix >= lam * ux + (1.0 - lam) * uz - 1e-10, "concavity");
                let g = utility_supergradient(&net, &batch, &x, agent);
                let lin: f64 = g.iter().zip(z.iter().zip(&x)).map(|(gj, (zj, xj))| gj * (zj - xj)).sum();
                assert!(uz <= ux + lin + 1e-10, "supergradient inequality");
                // monotonicity: raising one free coordinate never hurts
                let mut up = x.clone();
                let j = rng.random_range(0..net.dim());
                up[j] = (up[j] + 0.1).min(1.0);
                if domain.contains(&up, 1e-9) {
                    assert!(caching_utility(&net, &batch, &up, agent) >= ux - 1e-12);
                }
            }
        }
    }
}
