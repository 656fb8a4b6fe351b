//! Per-tick telemetry records, serialized as one JSON object per line.

use serde::{Deserialize, Serialize};

/// Snapshot of one robot at a control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotTick {
    pub id: usize,
    /// Ground-truth pose [x, y, heading].
    pub true_pose: [f64; 3],
    /// Encoder-only odometry pose.
    pub odom_pose: [f64; 3],
    /// Navigation estimate: odometry, or gyro-fused heading when enabled.
    pub est_pose: [f64; 3],
    /// Range estimates per sensor (m), max-range sentineled.
    pub ir_m: Vec<f64>,
    /// Raw ADC readings per sensor.
    pub ir_adc: Vec<u16>,
    /// True tangential wheel speeds [left, right] (m/s).
    pub wheel_mps: [f64; 2],
    /// Commanded tangential wheel speeds [left, right] (m/s).
    pub target_mps: [f64; 2],
    /// Filtered feedback speeds the controllers acted on (m/s).
    pub filtered_mps: [f64; 2],
    /// Cumulative encoder counts [left, right].
    pub counts: [i64; 2],
    /// Body command issued this tick [linear m/s, angular rad/s].
    pub cmd: [f64; 2],
    pub battery_mah: f64,
    pub collision: bool,
    /// Indicator color state, two RGB triplets.
    pub led: [[u8; 3]; 2],
    /// Behavior-specific state label, filled by the scenario runner.
    #[serde(default)]
    pub behavior: String,
}

/// One control-tick record: emitted exactly once per tick, monotone time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickReport {
    pub time: f64,
    pub robots: Vec<RobotTick>,
}
