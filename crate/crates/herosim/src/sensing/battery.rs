//! Battery charge integration and the measured current-draw table.
//!
//! Draw figures are the bench measurements for the target robot at 3.7 V:
//! sensing and telemetry at the usual 20 Hz rate, indicator LEDs, and the
//! two motor operating points. Only two motor data points exist, so draws
//! between them interpolate linearly in commanded speed.

use serde::{Deserialize, Serialize};

/// Sensing and telemetry at 5 Hz (mA).
pub const DRAW_SENSING_COMM_5HZ_MA: f64 = 161.0;
/// Sensing and telemetry at 20 Hz (mA).
pub const DRAW_SENSING_COMM_20HZ_MA: f64 = 175.0;
/// Sensing and telemetry at 40 Hz (mA).
pub const DRAW_SENSING_COMM_40HZ_MA: f64 = 183.0;
/// Sensing, telemetry and both LEDs at half intensity (mA).
pub const DRAW_COMM_LEDS_HALF_MA: f64 = 205.0;
/// Sensing, telemetry and both LEDs at full intensity (mA).
pub const DRAW_COMM_LEDS_FULL_MA: f64 = 247.0;
/// Sensing, telemetry and motors at 10 cm/s (mA).
pub const DRAW_MOTORS_10CMS_MA: f64 = 512.0;
/// Sensing, telemetry and motors at 25 cm/s (mA).
pub const DRAW_MOTORS_25CMS_MA: f64 = 660.0;
/// Typical mixed use: 20 Hz telemetry, LEDs at half, motors at 10 cm/s (mA).
pub const DRAW_TYPICAL_MA: f64 = 550.0;

/// Current draw (mA) for a commanded speed (m/s), LEDs at half intensity.
///
/// Zero speed idles at the sensing+LED draw; between the two measured motor
/// points the draw interpolates linearly; beyond them it clamps.
pub fn draw_for_speed(speed_mps: f64) -> f64 {
    let s = speed_mps.abs();
    if s == 0.0 {
        return DRAW_COMM_LEDS_HALF_MA;
    }
    if s <= 0.10 {
        return DRAW_MOTORS_10CMS_MA;
    }
    if s >= 0.25 {
        return DRAW_MOTORS_25CMS_MA;
    }
    let t = (s - 0.10) / 0.15;
    DRAW_MOTORS_10CMS_MA + t * (DRAW_MOTORS_25CMS_MA - DRAW_MOTORS_10CMS_MA)
}

/// Charge integrator over a fixed-capacity cell.
///
/// Decrements accumulate with Neumaier compensation so millions of small
/// steps telescope exactly: the sum of per-step decrements always equals
/// initial minus final charge to well under 1e-9 mAh per 1e6 steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryModel {
    pub capacity_mah: f64,
    pub charge_mah: f64,
    #[serde(default, skip_serializing)]
    compensation: f64,
}

impl Default for BatteryModel {
    /// 1800 mAh single-cell pack, full.
    fn default() -> Self {
        BatteryModel::new(1800.0)
    }
}

impl BatteryModel {
    pub fn new(capacity_mah: f64) -> Self {
        BatteryModel {
            capacity_mah,
            charge_mah: capacity_mah,
            compensation: 0.0,
        }
    }

    pub fn is_depleted(&self) -> bool {
        self.charge_mah <= 0.0
    }

    /// Drain `draw_ma` for `dt_s` seconds; charge floors at zero.
    ///
    /// Returns true when this step crossed into depletion.
    pub fn step(&mut self, draw_ma: f64, dt_s: f64) -> bool {
        debug_assert!(draw_ma >= 0.0 && dt_s >= 0.0);
        if self.charge_mah <= 0.0 {
            return false;
        }
        let decrement = -draw_ma * dt_s / 3600.0;
        let adjusted = decrement + self.compensation;
        let next = self.charge_mah + adjusted;
        self.compensation = if self.charge_mah.abs() >= adjusted.abs() {
            (self.charge_mah - next) + adjusted
        } else {
            (adjusted - next) + self.charge_mah
        };
        self.charge_mah = next.max(0.0);
        if self.charge_mah == 0.0 {
            self.compensation = 0.0;
            return true;
        }
        false
    }
}

/// Run the charge integrator at fixed `dt_s` under constant draw and return
/// the depletion time in seconds, interpolating within the final step
/// (charge falls linearly inside a step).
pub fn time_to_depletion(mut battery: BatteryModel, draw_ma: f64, dt_s: f64) -> f64 {
    assert!(draw_ma > 0.0 && dt_s > 0.0);
    let mut t = 0.0;
    loop {
        let before = battery.charge_mah;
        if battery.step(draw_ma, dt_s) {
            return t + before / (draw_ma / 3600.0);
        }
        t += dt_s;
        assert!(
            t < 1e9,
            "battery never depleted; draw too small for the capacity"
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn typical_draw_depletes_in_three_and_a_quarter_hours() {
        // 1800 mAh / 550 mA = 3.2727... h, the low end of the quoted
        // 3 h..9 h runtime band.
        let t = time_to_depletion(BatteryModel::default(), DRAW_TYPICAL_MA, 1.0);
        let expected_s = 1800.0 / 550.0 * 3600.0;
        assert!((t - expected_s).abs() < 1e-6 * 3600.0, "got {t}");
    }

    #[test]
    fn light_draw_reaches_nine_hours() {
        let t = time_to_depletion(BatteryModel::default(), 200.0, 1.0);
        assert!((t - 9.0 * 3600.0).abs() < 1e-6 * 3600.0);
    }

    #[test]
    fn zero_draw_holds_charge() {
        let mut b = BatteryModel::default();
        for _ in 0..1000 {
            b.step(0.0, 1.0);
        }
        assert_eq!(b.charge_mah, 1800.0);
        assert!(!b.is_depleted());
    }

    #[test]
    fn charge_floors_at_zero_and_flags_once() {
        let mut b = BatteryModel::new(1.0);
        // 3600 mA for 1 s costs exactly 1 mAh.
        assert!(b.step(3600.0, 1.0));
        assert!(b.is_depleted());
        assert_eq!(b.charge_mah, 0.0);
        assert!(!b.step(3600.0, 1.0));
        assert_eq!(b.charge_mah, 0.0);
    }

    #[test]
    fn repeated_small_steps_conserve_charge() {
        // One million small decrements must telescope to initial - final
        // without drift beyond 1e-9 mAh. The oracle sums the per-step
        // decrements with its own compensation so its rounding cannot mask
        // drift in the battery.
        let mut b = BatteryModel::default();
        let draw = 550.0;
        let dt = 0.01;
        let (mut drained, mut comp) = (0.0f64, 0.0f64);
        for _ in 0..1_000_000 {
            let before = b.charge_mah;
            b.step(draw, dt);
            let y = (before - b.charge_mah) - comp;
            let t = drained + y;
            comp = (t - drained) - y;
            drained = t;
        }
        assert!(
            ((1800.0 - b.charge_mah) - drained).abs() < 1e-9,
            "drift {}",
            (1800.0 - b.charge_mah) - drained
        );
        // And the end state itself matches the analytic drain.
        let expected = 1800.0 - 1e6 * (draw * dt / 3600.0);
        assert!((b.charge_mah - expected).abs() < 1e-9);
    }

    #[test]
    fn draw_interpolates_between_motor_points() {
        assert_eq!(draw_for_speed(0.0), DRAW_COMM_LEDS_HALF_MA);
        assert_eq!(draw_for_speed(0.05), DRAW_MOTORS_10CMS_MA);
        assert_eq!(draw_for_speed(0.10), DRAW_MOTORS_10CMS_MA);
        assert_eq!(draw_for_speed(0.25), DRAW_MOTORS_25CMS_MA);
        assert_eq!(draw_for_speed(0.30), DRAW_MOTORS_25CMS_MA);
        let mid = draw_for_speed(0.175);
        assert!((mid - (512.0 + 660.0) / 2.0).abs() < 1e-12);
        assert_eq!(draw_for_speed(-0.175), mid);
    }
}
