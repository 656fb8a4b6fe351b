//! Per-wheel closed-loop velocity controller.
//!
//! The feedback path converts the raw encoder angular velocity to a
//! tangential speed, denoises it with the scalar Kalman filter, subtracts it
//! from the commanded tangential speed, and runs the PID law. The output is
//! a normalized actuation command in [-1, 1]; the plant maps that to wheel
//! speed.

use super::{pid_step, ControlError, PidGains, PidState, ScalarKalman};
use serde::{Deserialize, Serialize};

/// Velocity filter process noise, (m/s)^2 per 20 Hz step.
pub const DEFAULT_KALMAN_Q: f64 = 1e-5;
/// Velocity filter measurement noise, (m/s)^2 — encoder quantization scale
/// at the 20 Hz loop rate.
pub const DEFAULT_KALMAN_R: f64 = 4e-4;

impl Default for PidGains {
    /// Shipped wheel-loop gains, tuned once against the reference plant
    /// (first-order lag, tau = 0.15 s) for a 1.3 s rise into the 2% band
    /// with no overshoot, then frozen. The velocity filter dominates the
    /// loop lag, so the integral term carries most of the lift.
    fn default() -> Self {
        PidGains {
            kp: 2.5,
            ki: 7.0,
            kd: 0.0,
            integral_limit: 1.0,
            output_limit: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WheelController {
    /// Radius of the controlled wheel (m), for rad/s -> m/s conversion.
    pub wheel_radius: f64,
    pub gains: PidGains,
    pub pid: PidState,
    pub filter: ScalarKalman,
}

impl WheelController {
    pub fn new(wheel_radius: f64, gains: PidGains, q: f64, r: f64) -> Self {
        assert!(wheel_radius > 0.0);
        WheelController {
            wheel_radius,
            gains,
            pid: PidState::default(),
            filter: ScalarKalman::new(0.0, r, q, r),
        }
    }

    /// Latest filtered tangential speed estimate (m/s).
    pub fn filtered_speed(&self) -> f64 {
        self.filter.estimate
    }

    /// One 20 Hz update: returns the actuation command in [-1, 1].
    pub fn update(
        &mut self,
        target_mps: f64,
        encoder_rad_s: f64,
        dt: f64,
    ) -> Result<f64, ControlError> {
        let measured_mps = encoder_rad_s * self.wheel_radius;
        let filtered = self.filter.step(measured_mps);
        let error = target_mps - filtered;
        let (output, next) = pid_step(&self.gains, &self.pid, error, dt)?;
        self.pid = next;
        Ok(output.clamp(-1.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn controller() -> WheelController {
        WheelController::new(
            0.025,
            PidGains::default(),
            DEFAULT_KALMAN_Q,
            DEFAULT_KALMAN_R,
        )
    }

    #[test]
    fn equilibrium_emits_zero_command() {
        // Target equal to the filtered measurement from the first tick:
        // zero error in, zero command out, nothing accumulates.
        let mut c = controller();
        c.filter.estimate = 0.1;
        let omega = 0.1 / 0.025;
        for _ in 0..200 {
            let u = c.update(0.1, omega, 0.05).unwrap();
            assert_eq!(u, 0.0);
        }
        assert_eq!(c.pid.integral, 0.0);
    }

    #[test]
    fn command_is_bounded() {
        let mut c = controller();
        for _ in 0..50 {
            let u = c.update(10.0, 0.0, 0.05).unwrap();
            assert!(u <= 1.0 && u >= -1.0);
        }
    }

    #[test]
    fn reversed_target_is_antisymmetric() {
        let mut a = controller();
        let mut b = controller();
        for k in 0..100 {
            let meas = 0.3 * (k as f64 / 100.0);
            let ua = a.update(0.0675, meas, 0.05).unwrap();
            let ub = b.update(-0.0675, -meas, 0.05).unwrap();
            assert!(
                (ua + ub).abs() < 1e-12,
                "asymmetry at step {k}: {ua} vs {ub}"
            );
        }
    }

    #[test]
    fn propagates_interval_errors() {
        let mut c = controller();
        assert!(c.update(0.1, 0.0, 0.0).is_err());
    }
}
