//! Swarm application controllers: decentralized coverage, flocking from
//! neighbor relative state, and occupancy-grid mapping. Each policy is a
//! pure function of one robot's observations.

mod coverage;
mod flocking;
mod grid;
mod metric;

pub use coverage::{coverage_policy, CoverageParams};
pub use flocking::{flocking_policy, FlockingParams, NeighborState};
pub use grid::{grid_update, OccupancyGrid, DEFAULT_LOG_ODDS_CLAMP, LOG_ODDS_FREE, LOG_ODDS_OCC};
pub use metric::CoverageMetric;
