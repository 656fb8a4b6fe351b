//! First-order servo plant: the wheel drive answers an actuation command
//! with an exponential lag toward the commanded speed.

/// Advance one wheel's angular velocity by `dt` under `actuation` in
/// [-1, 1].
///
/// The commanded speed is `actuation * max_omega`; the wheel relaxes toward
/// it with time constant `tau` and saturates at `max_omega` either way.
pub fn plant_step(actuation: f64, current_omega: f64, tau: f64, dt: f64, max_omega: f64) -> f64 {
    debug_assert!(tau > 0.0 && dt > 0.0 && max_omega > 0.0);
    let target = actuation.clamp(-1.0, 1.0) * max_omega;
    let alpha = 1.0 - (-dt / tau).exp();
    (current_omega + (target - current_omega) * alpha).clamp(-max_omega, max_omega)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_actuation_from_rest_stays_at_rest() {
        assert_eq!(plant_step(0.0, 0.0, 0.15, 0.01, 10.0), 0.0);
    }

    #[test]
    fn one_time_constant_reaches_63_percent() {
        let tau: f64 = 0.15;
        let dt: f64 = 0.01;
        let mut omega = 0.0;
        let steps = (tau / dt).round() as usize;
        for _ in 0..steps {
            omega = plant_step(1.0, omega, tau, dt, 10.0);
        }
        let expected = 10.0 * (1.0 - (-1.0f64).exp());
        assert!((omega - expected).abs() < 1e-9, "omega {omega}");
    }

    #[test]
    fn five_time_constants_within_one_percent_of_max() {
        let tau: f64 = 0.15;
        let dt: f64 = 0.01;
        let mut omega = 0.0;
        for _ in 0..(5.0 * tau / dt).round() as usize {
            omega = plant_step(1.0, omega, tau, dt, 10.0);
        }
        assert!(omega > 0.99 * 10.0);
        assert!(omega <= 10.0);
    }

    #[test]
    fn saturates_and_clamps_actuation() {
        let w = plant_step(5.0, 9.9, 0.15, 1.0, 10.0);
        assert!(w <= 10.0);
        let w = plant_step(-5.0, -9.9, 0.15, 1.0, 10.0);
        assert!(w >= -10.0);
    }
}
