//! Cooperative multi-agent cache network: weighted topology with
//! repositories, the caching-gain utility and its supergradient, and the
//! LRU/LFU path-replication baselines.

mod network;
mod replication;
mod utility;

pub use network::{
    AgentNodes, AgentSpec, CacheError, CacheNetwork, EdgeSpec, PerFileRepository, RepositorySpec,
    RetrievalOrder, TopologySpec,
};
pub use replication::{EvictionKind, PathReplication};
pub use utility::{caching_utility, retrieval_cost, utility_supergradient, RequestBatch};
