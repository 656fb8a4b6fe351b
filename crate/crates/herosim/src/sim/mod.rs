//! Deterministic fixed-step 2D world: obstacle geometry, IR ray-casting,
//! first-order servo plants, encoder quantization, noise injection, and
//! multi-robot scheduling with ground-truth poses.

mod plant;
mod report;
mod robot;
mod world;

pub use plant::plant_step;
pub use report::{RobotTick, TickReport};
pub use robot::{NeighborObs, Observations, RobotSim};
pub use world::{NoiseConfig, World, WorldError, DEFAULT_BODY_RADIUS};
