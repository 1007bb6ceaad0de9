//! Online horizon-fair resource allocation.
//!
//! A library and simulator for learning alpha-fair allocations online:
//! the primal-dual horizon-fair policy and its slot-fair counterpart,
//! a cooperative multi-agent cache-network environment with LRU/LFU
//! path-replication baselines, adversarial and stochastic trace
//! generators, offline benchmark solvers, and fairness metrics.

pub mod bench;
pub mod cache;
pub mod domain;
pub mod fairness;
pub mod policy;
pub mod runner;
pub mod trace;
