//! Deterministic 2D swarm-robotics simulator.
//!
//! The crate models a small differential-drive robot fleet at desk scale:
//! exact drive kinematics and odometry, infrared range sensing with ADC
//! quantization, quadrature encoders, per-wheel PID control with a scalar
//! Kalman filter on the velocity feedback, a framed topic-multiplexing
//! pub/sub protocol with bandwidth accounting, and the swarm behaviors
//! (random coverage, flocking, occupancy-grid mapping) that run on top.
//!
//! Everything is seeded and fixed-step: the same scenario and seed produce
//! byte-identical telemetry. The `herosim` binary runs scenario files and
//! emits JSONL telemetry plus a summary record; see the `runner` module for
//! the programmatic entry point.

pub mod behaviors;
pub mod control;
pub mod geometry;
pub mod kinematics;
pub mod protocol;
pub mod runner;
pub mod scenario;
pub mod sensing;
pub mod sim;
