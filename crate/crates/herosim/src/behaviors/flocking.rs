//! Flocking from neighbors' relative position and velocity.
//!
//! The steering law sums three weighted terms in the observer's body frame:
//! separation (push away from neighbors inside the desired distance),
//! cohesion (pull toward the centroid of neighbors beyond it), and
//! alignment (match the mean relative velocity). The resulting vector
//! projects onto the body axes: its forward component modulates the linear
//! speed and its lateral angle steers.

use crate::geometry::Vec2;
use crate::kinematics::Twist;
use serde::{Deserialize, Serialize};

/// One neighbor as the robot perceives it: position and velocity relative
/// to the observer, in the observer's body frame (x forward, y left).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborState {
    pub relative_position: (f64, f64),
    pub relative_velocity: (f64, f64),
}

impl NeighborState {
    fn position(&self) -> Vec2 {
        Vec2::new(self.relative_position.0, self.relative_position.1)
    }

    fn velocity(&self) -> Vec2 {
        Vec2::new(self.relative_velocity.0, self.relative_velocity.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlockingParams {
    pub w_sep: f64,
    pub w_coh: f64,
    pub w_align: f64,
    /// Preferred neighbor spacing (m).
    pub desired_dist: f64,
    /// Base forward speed with no steering input (m/s).
    pub cruise_mps: f64,
    /// Forward-component gain onto linear speed.
    pub linear_gain: f64,
    /// Lateral-angle gain onto angular rate.
    pub angular_gain: f64,
    /// Linear speed bound (m/s).
    pub max_linear: f64,
    /// Angular rate bound (rad/s).
    pub max_angular: f64,
}

impl Default for FlockingParams {
    fn default() -> Self {
        FlockingParams {
            w_sep: 1.5,
            w_coh: 0.8,
            w_align: 0.6,
            desired_dist: 0.15,
            cruise_mps: 0.08,
            linear_gain: 0.4,
            angular_gain: 2.5,
            max_linear: 0.15,
            max_angular: 3.0,
        }
    }
}

/// Steering decision for one robot given its perceived neighbors.
///
/// With no neighbors the robot drifts forward at cruise. The output is
/// saturated so that, after inverse kinematics on the default geometry,
/// neither wheel exceeds its speed limit.
pub fn flocking_policy(neighbors: &[NeighborState], params: &FlockingParams) -> Twist {
    if neighbors.is_empty() {
        return Twist::new(params.cruise_mps, 0.0);
    }

    let mut separation = Vec2::default();
    let mut far_centroid = Vec2::default();
    let mut far_count = 0usize;
    let mut mean_rel_vel = Vec2::default();
    for n in neighbors {
        let p = n.position();
        let dist = p.norm();
        if dist > 0.0 && dist < params.desired_dist {
            // Repulsion grows linearly as the gap closes.
            let strength = (params.desired_dist - dist) / params.desired_dist;
            separation = separation + p.normalized().scaled(-strength);
        } else if dist >= params.desired_dist {
            far_centroid = far_centroid + p;
            far_count += 1;
        }
        mean_rel_vel = mean_rel_vel + n.velocity();
    }
    let cohesion = if far_count > 0 {
        far_centroid.scaled(1.0 / far_count as f64)
    } else {
        Vec2::default()
    };
    mean_rel_vel = mean_rel_vel.scaled(1.0 / neighbors.len() as f64);

    let steer = separation.scaled(params.w_sep)
        + cohesion.scaled(params.w_coh)
        + mean_rel_vel.scaled(params.w_align);

    let magnitude = steer.norm();
    let lateral_angle = if magnitude > 1e-12 {
        (steer.y / magnitude).asin()
    } else {
        0.0
    };
    let linear = (params.cruise_mps + params.linear_gain * steer.x)
        .clamp(-params.max_linear, params.max_linear);
    let angular =
        (params.angular_gain * lateral_angle).clamp(-params.max_angular, params.max_angular);
    Twist::new(linear, angular)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn neighbor(px: f64, py: f64, vx: f64, vy: f64) -> NeighborState {
        NeighborState {
            relative_position: (px, py),
            relative_velocity: (vx, vy),
        }
    }

    #[test]
    fn empty_neighborhood_drifts_forward() {
        let cmd = flocking_policy(&[], &FlockingParams::default());
        assert_eq!(cmd.linear, FlockingParams::default().cruise_mps);
        assert_eq!(cmd.angular, 0.0);
    }

    #[test]
    fn mirror_symmetric_neighbors_cancel_steering() {
        let params = FlockingParams::default();
        // Two neighbors mirrored about the heading axis, equidistant, with
        // mirrored velocities: the lateral component cancels exactly.
        let cases = [
            [neighbor(0.3, 0.2, 0.01, 0.05), neighbor(0.3, -0.2, 0.01, -0.05)],
            [neighbor(0.05, 0.1, -0.02, 0.0), neighbor(0.05, -0.1, -0.02, 0.0)],
        ];
        for pair in &cases {
            let cmd = flocking_policy(pair, &params);
            assert_eq!(cmd.angular, 0.0, "lateral must cancel for {pair:?}");
        }
    }

    #[test]
    fn lone_far_neighbor_ahead_attracts() {
        let params = FlockingParams::default();
        let cmd = flocking_policy(
            &[neighbor(2.0 * params.desired_dist, 0.0, 0.0, 0.0)],
            &params,
        );
        assert!(cmd.linear > 0.0);
        assert_eq!(cmd.angular, 0.0);
        // Cohesion adds to cruise.
        assert!(cmd.linear > params.cruise_mps);
    }

    #[test]
    fn close_neighbor_ahead_repels() {
        let params = FlockingParams::default();
        let near = flocking_policy(&[neighbor(0.05, 0.0, 0.0, 0.0)], &params);
        let open = flocking_policy(&[], &params);
        assert!(near.linear < open.linear, "separation should slow the robot");
    }

    proptest! {
        #[test]
        fn mirror_equivariance(
            n in proptest::collection::vec(
                (0.01f64..0.5, -0.5f64..0.5, -0.1f64..0.1, -0.1f64..0.1), 1..6),
        ) {
            // Reflecting the neighbor set about the heading axis negates the
            // angular command exactly and keeps the linear one unchanged.
            let params = FlockingParams::default();
            let original: Vec<NeighborState> = n.iter()
                .map(|&(px, py, vx, vy)| neighbor(px, py, vx, vy))
                .collect();
            let mirrored: Vec<NeighborState> = n.iter()
                .map(|&(px, py, vx, vy)| neighbor(px, -py, vx, -vy))
                .collect();
            let a = flocking_policy(&original, &params);
            let b = flocking_policy(&mirrored, &params);
            prop_assert_eq!(a.linear, b.linear);
            prop_assert_eq!(a.angular, -b.angular);
        }

        #[test]
        fn output_always_within_limits(
            n in proptest::collection::vec(
                (-0.5f64..0.5, -0.5f64..0.5, -0.3f64..0.3, -0.3f64..0.3), 0..8),
        ) {
            let params = FlockingParams::default();
            let neighbors: Vec<NeighborState> = n.iter()
                .map(|&(px, py, vx, vy)| neighbor(px, py, vx, vy))
                .collect();
            let cmd = flocking_policy(&neighbors, &params);
            prop_assert!(cmd.linear.abs() <= params.max_linear);
            prop_assert!(cmd.angular.abs() <= params.max_angular);
        }
    }
}
