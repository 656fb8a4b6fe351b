//! Scalar random-walk Kalman filter for denoising encoder velocity.

use serde::{Deserialize, Serialize};

/// One-dimensional Kalman filter with a random-walk process model.
///
/// Each update predicts by inflating the variance with `q`, then corrects
/// toward the measurement with gain `var/(var + r)`. With `q` and `r`
/// positive the gain always lies strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarKalman {
    pub estimate: f64,
    pub variance: f64,
    /// Process noise added per step ((m/s)^2 / step).
    pub q: f64,
    /// Measurement noise ((m/s)^2).
    pub r: f64,
}

impl ScalarKalman {
    pub fn new(initial_estimate: f64, initial_variance: f64, q: f64, r: f64) -> Self {
        assert!(initial_variance > 0.0 && q > 0.0 && r > 0.0);
        ScalarKalman {
            estimate: initial_estimate,
            variance: initial_variance,
            q,
            r,
        }
    }

    /// Fold one measurement in; returns the updated estimate.
    pub fn step(&mut self, measurement: f64) -> f64 {
        debug_assert!(measurement.is_finite());
        self.variance += self.q;
        let gain = self.variance / (self.variance + self.r);
        self.estimate += gain * (measurement - self.estimate);
        self.variance *= 1.0 - gain;
        self.estimate
    }

    /// Steady-state gain of the predict/update cycle.
    pub fn steady_state_gain(q: f64, r: f64) -> f64 {
        // Fixed point of p <- (p + q) r / (p + q + r).
        let p = (-q + (q * q + 4.0 * q * r).sqrt()) / 2.0;
        (p + q) / (p + q + r)
    }
}
