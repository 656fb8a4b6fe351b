//! Differential-drive kinematics: inverse kinematics, odometry deltas, and
//! exact constant-curvature pose integration.
//!
//! All functions here are pure math over value types; quantization, noise
//! and actuation lag live in the simulator. Angles are radians, lengths
//! meters, and headings are kept normalized to `(-PI, PI]`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

/// Default straight-line branch threshold for [`integrate_pose`], in radians.
///
/// Quantized encoder deltas produce near-zero rather than exactly zero
/// rotation, and `dL/dTheta` cancels catastrophically near zero.
pub const DEFAULT_STRAIGHT_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    #[error("invalid command: velocity components must be finite")]
    InvalidCommand,
    #[error("invalid geometry: {0}")]
    InvalidGeometry(&'static str),
}

/// Physical drive-train parameters of one robot.
///
/// Wheel radii are independent so manufacturing asymmetry can be modeled in
/// drift experiments; the odometry equations already distinguish the two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotGeometry {
    /// Left wheel radius (m).
    pub wheel_radius_left: f64,
    /// Right wheel radius (m).
    pub wheel_radius_right: f64,
    /// Distance between the wheel contact points (m).
    pub axle_length: f64,
    /// Encoder counts per full wheel revolution.
    pub counts_per_wheel_rev: u32,
    /// Maximum tangential wheel speed (m/s).
    pub max_wheel_speed: f64,
}

impl Default for RobotGeometry {
    /// Reference profile: 5 cm diameter wheels, 288 counts per wheel
    /// revolution through the 1:6 wheel-encoder train, 25 cm/s top speed,
    /// 6 cm axle.
    fn default() -> Self {
        RobotGeometry {
            wheel_radius_left: 0.025,
            wheel_radius_right: 0.025,
            axle_length: 0.06,
            counts_per_wheel_rev: 288,
            max_wheel_speed: 0.25,
        }
    }
}

impl RobotGeometry {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.wheel_radius_left > 0.0 && self.wheel_radius_left.is_finite()) {
            return Err(KinematicsError::InvalidGeometry(
                "wheel_radius_left must be positive",
            ));
        }
        if !(self.wheel_radius_right > 0.0 && self.wheel_radius_right.is_finite()) {
            return Err(KinematicsError::InvalidGeometry(
                "wheel_radius_right must be positive",
            ));
        }
        if !(self.axle_length > 0.0 && self.axle_length.is_finite()) {
            return Err(KinematicsError::InvalidGeometry(
                "axle_length must be positive",
            ));
        }
        if self.counts_per_wheel_rev < 1 {
            return Err(KinematicsError::InvalidGeometry(
                "counts_per_wheel_rev must be at least 1",
            ));
        }
        if !(self.max_wheel_speed > 0.0 && self.max_wheel_speed.is_finite()) {
            return Err(KinematicsError::InvalidGeometry(
                "max_wheel_speed must be positive",
            ));
        }
        Ok(())
    }

    /// Wheel angle advanced per encoder count (rad): `2*PI / counts_per_rev`.
    ///
    /// 1.25 degrees for the default 288-count profile.
    pub fn wheel_angle_per_count(&self) -> f64 {
        TAU / self.counts_per_wheel_rev as f64
    }

    /// Rim arc length of one encoder count for the given wheel radius (m).
    ///
    /// About 0.545 mm for the default profile.
    pub fn arc_step(&self, wheel_radius: f64) -> f64 {
        self.wheel_angle_per_count() * wheel_radius
    }
}

/// Planar pose `(x, y, heading)`; heading is radians counter-clockwise from
/// the world x-axis and is normalized to `(-PI, PI]` after integration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2D {
    pub const fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose2D { x, y, heading }
    }
}

/// Body velocity command: linear m/s along the heading, angular rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub linear: f64,
    pub angular: f64,
}

impl Twist {
    pub const fn new(linear: f64, angular: f64) -> Self {
        Twist { linear, angular }
    }

    pub fn is_finite(&self) -> bool {
        self.linear.is_finite() && self.angular.is_finite()
    }
}

/// Signed wheel rotation over one interval (rad); reverse rotation allowed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WheelDelta {
    pub dtheta_left: f64,
    pub dtheta_right: f64,
}

/// Tangential wheel velocities (m/s) produced by [`inverse_kinematics`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WheelVelocities {
    pub left: f64,
    pub right: f64,
}

/// Travel and rotation of the body over one interval, from wheel rotations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OdometryDelta {
    /// Distance traveled by the axle midpoint (m).
    pub distance: f64,
    /// Heading change (rad).
    pub rotation: f64,
}

/// Normalize an angle to `(-PI, PI]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % TAU;
    if a > PI {
        a -= TAU;
    } else if a <= -PI {
        a += TAU;
    }
    a
}

/// Shortest signed angular difference `a - b`, in `(-PI, PI]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

/// Map a body velocity command to per-wheel tangential velocities:
/// `v_l = (2v - l*w)/2`, `v_r = (2v + l*w)/2`.
///
/// The mean of the two outputs equals the commanded linear velocity exactly.
pub fn inverse_kinematics(
    cmd: Twist,
    geom: &RobotGeometry,
) -> Result<WheelVelocities, KinematicsError> {
    if !cmd.is_finite() {
        return Err(KinematicsError::InvalidCommand);
    }
    geom.validate()?;
    let half_turn = geom.axle_length * cmd.angular / 2.0;
    Ok(WheelVelocities {
        left: cmd.linear - half_turn,
        right: cmd.linear + half_turn,
    })
}

/// Body travel and rotation from signed wheel rotations:
/// `dL = (dθ_r*r_r + dθ_l*r_l)/2`, `dθ = (dθ_r*r_r - dθ_l*r_l)/l`.
pub fn odometry_delta(
    delta: WheelDelta,
    geom: &RobotGeometry,
) -> Result<OdometryDelta, KinematicsError> {
    geom.validate()?;
    let right = delta.dtheta_right * geom.wheel_radius_right;
    let left = delta.dtheta_left * geom.wheel_radius_left;
    Ok(OdometryDelta {
        distance: (right + left) / 2.0,
        rotation: (right - left) / geom.axle_length,
    })
}

/// Advance a pose by `(distance, rotation)` along a constant-curvature arc.
///
/// For `|rotation| <= straight_epsilon` the straight-line form is used
/// (`x += dL*cos(h)`, `y += dL*sin(h)`, heading unchanged); otherwise the
/// exact arc model with radius `dL/dθ`. The resulting heading is normalized
/// to `(-PI, PI]`.
pub fn integrate_pose(
    pose: Pose2D,
    distance: f64,
    rotation: f64,
    straight_epsilon: f64,
) -> Pose2D {
    debug_assert!(straight_epsilon > 0.0);
    if rotation.abs() <= straight_epsilon {
        Pose2D {
            x: pose.x + distance * pose.heading.cos(),
            y: pose.y + distance * pose.heading.sin(),
            heading: pose.heading,
        }
    } else {
        let radius = distance / rotation;
        let next = pose.heading + rotation;
        Pose2D {
            x: pose.x + radius * (next.sin() - pose.heading.sin()),
            y: pose.y - radius * (next.cos() - pose.heading.cos()),
            heading: normalize_angle(next),
        }
    }
}
