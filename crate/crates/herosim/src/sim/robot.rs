//! Per-robot simulation state and the observation bundle handed to
//! behaviors each control tick.

use crate::control::{HeadingFilter, PidGains, WheelController};
use crate::geometry::Vec2;
use crate::kinematics::{Pose2D, RobotGeometry, Twist};
use crate::sensing::{BatteryModel, IrSensorModel, QuadratureState, SensorRing};
use rand_chacha::ChaCha8Rng;

/// Ground-truth neighbor observation in the observer's body frame, as an
/// overhead tracking rig would emulate it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborObs {
    pub relative_position: Vec2,
    pub relative_velocity: Vec2,
}

/// Everything a behavior may look at on one control tick.
#[derive(Debug, Clone)]
pub struct Observations {
    pub time: f64,
    /// The robot's own pose estimate (odometry or fused).
    pub est_pose: Pose2D,
    /// Range per ring sensor (m), max-range sentineled.
    pub ir_distances: Vec<f64>,
    /// Sensor bearings matching `ir_distances` (body frame, rad).
    pub ir_bearings: Vec<f64>,
    /// Neighbors inside the perception radius.
    pub neighbors: Vec<NeighborObs>,
    pub battery_mah: f64,
    /// Wheels were commanded but the body could not move last period —
    /// the stall a firmware detects by comparing commanded and encoder
    /// speeds. Grazing contacts invisible to the IR ring show up here.
    pub stalled: bool,
}

/// Full state of one simulated robot.
#[derive(Debug, Clone)]
pub struct RobotSim {
    pub id: usize,
    pub geometry: RobotGeometry,
    pub body_radius: f64,
    pub plant_tau: f64,

    pub true_pose: Pose2D,
    pub odom_pose: Pose2D,
    pub est_pose: Pose2D,

    /// Actual wheel angular velocities [left, right] (rad/s).
    pub wheel_omega: [f64; 2],
    /// Continuous shaft angle at the encoder [left, right] (rad).
    pub(crate) wheel_angle: [f64; 2],
    pub(crate) encoders: [QuadratureState; 2],
    pub(crate) prev_counts: [i64; 2],

    pub actuation: [f64; 2],
    pub controllers: [WheelController; 2],
    pub target_wheel_mps: [f64; 2],

    pub sensors: SensorRing,
    pub ir_models: Vec<IrSensorModel>,
    pub ir_readings: Vec<u16>,
    pub ir_distances: Vec<f64>,

    pub battery: BatteryModel,
    pub heading_filter: Option<HeadingFilter>,
    pub(crate) prev_true_heading: f64,

    pub cmd: Twist,
    pub collision: bool,
    pub collisions_total: u64,
    pub led: [[u8; 3]; 2],

    pub(crate) rng_slip: ChaCha8Rng,
    pub(crate) rng_sensor: ChaCha8Rng,
    pub(crate) rng_behavior: ChaCha8Rng,
}

impl RobotSim {
    /// Build a robot at `pose` with derived per-purpose RNG streams.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: usize,
        pose: Pose2D,
        geometry: RobotGeometry,
        body_radius: f64,
        plant_tau: f64,
        gains: PidGains,
        kalman_q: f64,
        kalman_r: f64,
        battery: BatteryModel,
        fuse_heading: bool,
        world_seed: u64,
    ) -> Self {
        let sensors = SensorRing::default();
        let n = sensors.count();
        let controller = |radius: f64| WheelController::new(radius, gains, kalman_q, kalman_r);
        RobotSim {
            id,
            geometry,
            body_radius,
            plant_tau,
            true_pose: pose,
            odom_pose: pose,
            est_pose: pose,
            wheel_omega: [0.0; 2],
            wheel_angle: [0.0; 2],
            encoders: [QuadratureState::default(); 2],
            prev_counts: [0; 2],
            actuation: [0.0; 2],
            controllers: [
                controller(geometry.wheel_radius_left),
                controller(geometry.wheel_radius_right),
            ],
            target_wheel_mps: [0.0; 2],
            sensors,
            ir_models: vec![IrSensorModel::default(); n],
            ir_readings: vec![0; n],
            ir_distances: vec![IrSensorModel::default().max_range; n],
            battery,
            heading_filter: fuse_heading.then(|| HeadingFilter::with_defaults(pose.heading)),
            prev_true_heading: pose.heading,
            cmd: Twist::default(),
            collision: false,
            collisions_total: 0,
            led: [[0; 3]; 2],
            rng_slip: derive_rng(world_seed, id, 0),
            rng_sensor: derive_rng(world_seed, id, 1),
            rng_behavior: derive_rng(world_seed, id, 2),
        }
    }

    /// World-frame velocity of the body center (m/s).
    pub fn world_velocity(&self) -> Vec2 {
        let v = (self.wheel_omega[0] * self.geometry.wheel_radius_left
            + self.wheel_omega[1] * self.geometry.wheel_radius_right)
            / 2.0;
        Vec2::from_angle(self.true_pose.heading).scaled(v)
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.true_pose.x, self.true_pose.y)
    }
}

/// Deterministic per-robot, per-purpose RNG stream.
pub(crate) fn derive_rng(world_seed: u64, robot_id: usize, stream: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mixed = world_seed
        ^ (robot_id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
    ChaCha8Rng::seed_from_u64(mixed)
}
