//! Closed-loop wheel velocity control: per-wheel PID with anti-windup, a
//! scalar Kalman filter on the encoder-derived velocity, and an optional
//! gyro/odometry heading fusion filter.

mod heading;
mod kalman;
mod pid;
mod wheel;

pub use heading::{HeadingFilter, DEFAULT_HEADING_Q, DEFAULT_HEADING_R};
pub use kalman::ScalarKalman;
pub use pid::{pid_step, PidGains, PidState};
pub use wheel::{WheelController, DEFAULT_KALMAN_Q, DEFAULT_KALMAN_R};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("invalid interval: dt must be positive and finite")]
    InvalidInterval,
}
