//! Path-replication baselines over integral cache states: a request is
//! served by the cheapest node storing the file, and every cache strictly
//! cheaper than the serving node inserts the file as if it missed locally,
//! evicting its LRU or LFU victim when full. Repositories never evict.

use super::network::CacheNetwork;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvictionKind {
    Lru,
    Lfu,
}

#[derive(Debug, Clone)]
struct NodeState {
    /// Cached non-pinned files (0-based) with their recency stamp.
    recency: BTreeMap<u32, u64>,
    /// Access counts, kept across evictions for LFU.
    freq: BTreeMap<u32, u64>,
    capacity: usize,
}

/// Integral cache states driven by path replication.
#[derive(Debug, Clone)]
pub struct PathReplication {
    kind: EvictionKind,
    nodes: Vec<NodeState>,
    clock: u64,
}

impl PathReplication {
    pub fn new(net: &CacheNetwork, kind: EvictionKind) -> Self {
        let nodes = (0..net.n_nodes())
            .map(|c| {
                let pinned = (0..net.catalog()).filter(|&f| net.is_pinned(c, f)).count();
                let capacity = if net_pins_consume(net) {
                    (net.capacities()[c] as usize).saturating_sub(pinned)
                } else {
                    net.capacities()[c] as usize
                };
                NodeState {
                    recency: BTreeMap::new(),
                    freq: BTreeMap::new(),
                    capacity,
                }
            })
            .collect();
        Self {
            kind,
            nodes,
            clock: 0,
        }
    }

    pub fn stores(&self, net: &CacheNetwork, node: usize, file: u32) -> bool {
        net.is_pinned(node, file) || self.nodes[node].recency.contains_key(&file)
    }

    /// Processes one request at `query` for `file` (0-based), updating the
    /// hit node and replicating into every strictly cheaper cache.
    pub fn process(&mut self, net: &CacheNetwork, query: usize, file: u32) {
        let order = net.retrieval_order(query, file);
        // serving node: cheapest storing node along the order (the order
        // terminates at the nearest repository, which always stores it)
        let hit_pos = (0..order.nodes.len())
            .find(|&p| self.stores(net, order.nodes[p], file))
            .expect("retrieval order ends at a repository");
        let hit_node = order.nodes[hit_pos];
        self.touch(hit_node, file);
        let hit_cost = order.costs[hit_pos];
        for p in 0..hit_pos {
            if order.costs[p] < hit_cost {
                self.insert(net, order.nodes[p], file);
            }
        }
    }

    fn touch(&mut self, node: usize, file: u32) {
        self.clock += 1;
        let st = &mut self.nodes[node];
        *st.freq.entry(file).or_insert(0) += 1;
        if let Some(stamp) = st.recency.get_mut(&file) {
            *stamp = self.clock;
        }
    }

    fn insert(&mut self, net: &CacheNetwork, node: usize, file: u32) {
        if net.is_pinned(node, file) {
            return;
        }
        self.clock += 1;
        let kind = self.kind;
        let st = &mut self.nodes[node];
        *st.freq.entry(file).or_insert(0) += 1;
        if st.recency.contains_key(&file) {
            *st.recency.get_mut(&file).unwrap() = self.clock;
            return;
        }
        if st.capacity == 0 {
            return;
        }
        if st.recency.len() >= st.capacity {
            let victim = match kind {
                // least recently used; ties broken by lower file id
                EvictionKind::Lru => st
                    .recency
                    .iter()
                    .min_by_key(|(f, stamp)| (**stamp, **f))
                    .map(|(f, _)| *f)
                    .unwrap(),
                // least frequently used among cached files; lower id on ties
                EvictionKind::Lfu => st
                    .recency
                    .keys()
                    .map(|f| (st.freq.get(f).copied().unwrap_or(0), *f))
                    .min()
                    .map(|(_, f)| f)
                    .unwrap(),
            };
            st.recency.remove(&victim);
        }
        st.recency.insert(file, self.clock);
    }

    /// The current integral state as an allocation vector (pins included).
    pub fn as_allocation(&self, net: &CacheNetwork) -> Vec<f64> {
        let mut x = net.repository_only_state();
        for (c, st) in self.nodes.iter().enumerate() {
            for &f in st.recency.keys() {
                x[net.coord(c, f)] = 1.0;
            }
        }
        x
    }
}

fn net_pins_consume(net: &CacheNetwork) -> bool {
    // Capacity semantics mirror the allocation domain: the domain builder
    // errors at construction if pins cannot fit, so here pinned files
    // simply reduce the free integral capacity when configured to consume.
    net.pins_consume_budget()
}
