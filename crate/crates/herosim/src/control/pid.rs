//! PID control law with conditional-integration anti-windup.

use super::ControlError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Magnitude bound on the accumulated integral term.
    pub integral_limit: f64,
    /// Magnitude bound on the controller output.
    pub output_limit: f64,
}

impl PidGains {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.kp < 0.0 || self.ki < 0.0 || self.kd < 0.0 {
            return Err("gains must be non-negative");
        }
        if !(self.integral_limit > 0.0) {
            return Err("integral_limit must be positive");
        }
        if !(self.output_limit > 0.0) {
            return Err("output_limit must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    /// Accumulated error * seconds.
    pub integral: f64,
    pub prev_error: f64,
    pub last_output: f64,
}

/// One controller update: `u = kp*e + ki*I + kd*(e - e_prev)/dt`, clamped to
/// the output limit.
///
/// The integral accumulates before the output is formed. If the unclamped
/// output saturates in the same direction as the error, the accumulation is
/// rejected for this step so the integral cannot wind up against the limit.
pub fn pid_step(
    gains: &PidGains,
    state: &PidState,
    error: f64,
    dt: f64,
) -> Result<(f64, PidState), ControlError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ControlError::InvalidInterval);
    }
    let lim = gains.integral_limit;
    let mut integral = (state.integral + error * dt).clamp(-lim, lim);
    let derivative = (error - state.prev_error) / dt;
    let mut raw = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    if raw.abs() > gains.output_limit && raw.signum() == error.signum() {
        integral = state.integral;
        raw = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    }
    let output = raw.clamp(-gains.output_limit, gains.output_limit);
    Ok((
        output,
        PidState {
            integral,
            prev_error: error,
            last_output: output,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gains(kp: f64, ki: f64, kd: f64) -> PidGains {
        PidGains {
            kp,
            ki,
            kd,
            integral_limit: 10.0,
            output_limit: 100.0,
        }
    }

    #[test]
    fn pure_proportional() {
        let (u, _) = pid_step(&gains(2.0, 0.0, 0.0), &PidState::default(), 0.5, 0.05).unwrap();
        assert_eq!(u, 1.0);
    }

    #[test]
    fn equilibrium_outputs_zero() {
        let (u, st) = pid_step(&gains(2.0, 1.0, 0.5), &PidState::default(), 0.0, 0.05).unwrap();
        assert_eq!(u, 0.0);
        assert_eq!(st.integral, 0.0);
    }

    #[test]
    fn hand_stepped_recurrence() {
        // kp=1, ki=1, kd=0, constant e=0.1, dt=0.05:
        // step 1: I=0.005, u=0.105; step 2: I=0.010, u=0.110.
        let g = gains(1.0, 1.0, 0.0);
        let (u1, st) = pid_step(&g, &PidState::default(), 0.1, 0.05).unwrap();
        assert!((u1 - 0.105).abs() < 1e-15);
        let (u2, _) = pid_step(&g, &st, 0.1, 0.05).unwrap();
        assert!((u2 - 0.110).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_interval() {
        let g = gains(1.0, 0.0, 0.0);
        assert_eq!(
            pid_step(&g, &PidState::default(), 0.1, 0.0),
            Err(ControlError::InvalidInterval)
        );
        assert!(pid_step(&g, &PidState::default(), 0.1, -1.0).is_err());
        assert!(pid_step(&g, &PidState::default(), 0.1, f64::NAN).is_err());
    }

    #[test]
    fn derivative_acts_on_error_change() {
        let g = gains(0.0, 0.0, 2.0);
        let (u1, st) = pid_step(&g, &PidState::default(), 0.1, 0.1).unwrap();
        assert!((u1 - 2.0).abs() < 1e-12); // (0.1 - 0)/0.1 * 2
        let (u2, _) = pid_step(&g, &st, 0.1, 0.1).unwrap();
        assert_eq!(u2, 0.0); // error unchanged
    }

    #[test]
    fn integral_freezes_while_saturated_in_error_direction() {
        let g = PidGains {
            kp: 1.0,
            ki: 1.0,
            kd: 0.0,
            integral_limit: 50.0,
            output_limit: 1.0,
        };
        let mut st = PidState::default();
        for _ in 0..100 {
            let (u, next) = pid_step(&g, &st, 2.0, 0.05).unwrap();
            assert_eq!(u, 1.0);
            st = next;
        }
        // kp*e alone saturates, so nothing should have accumulated.
        assert_eq!(st.integral, 0.0);

        // A flipped error that still saturates on its own keeps the
        // integral frozen in the new direction too.
        let (u, st) = pid_step(&g, &st, -2.0, 0.05).unwrap();
        assert_eq!(u, -1.0);
        assert_eq!(st.integral, 0.0);

        // Once the proportional term alone no longer saturates, the
        // integral starts moving again.
        let (u, st) = pid_step(&g, &st, -0.5, 0.05).unwrap();
        assert!(u > -1.0);
        assert!(st.integral < 0.0);
    }

    #[test]
    fn integral_magnitude_respects_limit() {
        let g = PidGains {
            kp: 0.0,
            ki: 0.1,
            kd: 0.0,
            integral_limit: 0.5,
            output_limit: 100.0,
        };
        let mut st = PidState::default();
        for _ in 0..10_000 {
            let (_, next) = pid_step(&g, &st, 5.0, 0.05).unwrap();
            st = next;
            assert!(st.integral.abs() <= 0.5 + 1e-12);
        }
        assert!((st.integral - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn proportional_only_is_linear_up_to_saturation(
            e in -5.0f64..5.0,
            kp in 0.0f64..10.0,
        ) {
            let g = gains(kp, 0.0, 0.0);
            let (u, _) = pid_step(&g, &PidState::default(), e, 0.05).unwrap();
            let expected = (kp * e).clamp(-g.output_limit, g.output_limit);
            prop_assert!((u - expected).abs() < 1e-12);
        }

        #[test]
        fn output_always_bounded(
            e in -100.0f64..100.0,
            i0 in -10.0f64..10.0,
            pe in -100.0f64..100.0,
        ) {
            let g = PidGains { kp: 3.0, ki: 2.0, kd: 1.0, integral_limit: 10.0, output_limit: 1.0 };
            let st = PidState { integral: i0, prev_error: pe, last_output: 0.0 };
            let (u, next) = pid_step(&g, &st, e, 0.05).unwrap();
            prop_assert!(u.abs() <= 1.0);
            prop_assert!(next.integral.abs() <= 10.0 + 1e-12);
        }
    }
}
