//! Gyro/odometry heading fusion.
//!
//! The gyro rate integrates the heading prediction; the odometry heading
//! arrives as a (slowly drifting) absolute measurement. The innovation is
//! the wrap-aware shortest angular difference, so crossings of the +/-PI
//! boundary never produce 2*PI jumps. The defaults weight the gyro heavily:
//! a calibrated rate gyro drifts far less over a run than slip-corrupted
//! wheel odometry, while the weak odometry correction still bounds a
//! constant gyro bias.

use crate::kinematics::{angle_difference, normalize_angle};
use serde::{Deserialize, Serialize};

/// Heading prediction noise, rad^2 per second of gyro integration.
pub const DEFAULT_HEADING_Q: f64 = 1e-7;
/// Odometry heading measurement noise, rad^2.
pub const DEFAULT_HEADING_R: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadingFilter {
    pub estimate: f64,
    pub variance: f64,
    /// Process noise (rad^2 per second).
    pub q: f64,
    /// Measurement noise (rad^2).
    pub r: f64,
}

impl HeadingFilter {
    pub fn new(initial_heading: f64, q: f64, r: f64) -> Self {
        assert!(q > 0.0 && r > 0.0);
        HeadingFilter {
            estimate: normalize_angle(initial_heading),
            variance: q,
            q,
            r,
        }
    }

    pub fn with_defaults(initial_heading: f64) -> Self {
        HeadingFilter::new(initial_heading, DEFAULT_HEADING_Q, DEFAULT_HEADING_R)
    }

    /// Predict with the gyro rate over `dt`, then correct with the odometry
    /// heading. Returns the fused heading in `(-PI, PI]`.
    pub fn fuse(&mut self, gyro_rate: f64, dt: f64, odometry_heading: f64) -> f64 {
        debug_assert!(dt > 0.0);
        self.estimate = normalize_angle(self.estimate + gyro_rate * dt);
        self.variance += self.q * dt;
        let innovation = angle_difference(odometry_heading, self.estimate);
        let gain = self.variance / (self.variance + self.r);
        self.estimate = normalize_angle(self.estimate + gain * innovation);
        self.variance *= 1.0 - gain;
        self.estimate
    }
}
