//! The world: geometry, scheduling, sensing, and ground truth.
//!
//! Physics advances at a fixed fine step (default 100 Hz): servo plants
//! relax, true poses integrate kinematically, encoder counts accumulate in
//! quantized Gray steps, and collisions halt the offending robot for that
//! step. Control runs at a coarser fixed rate (default 20 Hz): sensors
//! sample, odometry and heading fusion update, behaviors command twists,
//! wheel controllers emit actuation, and the battery drains. The whole
//! report stream is a pure function of (scenario, seed).

use super::plant::plant_step;
use super::report::{RobotTick, TickReport};
use super::robot::{NeighborObs, Observations, RobotSim};
use crate::geometry::{ray_circle_intersection, ray_segment_intersection, RayHit, Rect, Segment, Vec2};
use crate::kinematics::{
    angle_difference, inverse_kinematics, integrate_pose, odometry_delta, Pose2D, Twist,
    WheelDelta, DEFAULT_STRAIGHT_EPSILON,
};
use crate::sensing::{draw_for_speed, encoder_velocity, ir_forward, ir_invert, QuadratureState};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Body circle radius of the reference robot (6.7 cm footprint).
pub const DEFAULT_BODY_RADIUS: f64 = 0.0335;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("rates.physics_hz: {0} Hz must be a positive integer multiple of control_hz {1}")]
    RatesDoNotDivide(u32, u32),
    #[error("rates: max speed {speed} m/s at {hz} Hz moves {step} m per step; collision soundness needs step < body_radius/2 = {limit} m")]
    TunnelingRisk {
        speed: f64,
        hz: u32,
        step: f64,
        limit: f64,
    },
    #[error("robots[{0}]: spawn pose outside arena bounds")]
    SpawnOutOfBounds(usize),
    #[error("robots[{a}] and robots[{b}]: spawn bodies overlap")]
    SpawnOverlap { a: usize, b: usize },
    #[error("obstacles[{0}]: segment endpoints must be finite")]
    BadSegment(usize),
}

/// Noise switches; everything defaults off except where a scenario says
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Multiplicative sigma on each wheel's per-step ground rotation
    /// (wheel slip); 0.005 is the realistic default when enabled.
    pub slip_sigma: f64,
    /// Additive sigma on IR ADC readings, counts.
    pub ir_sigma: f64,
    /// Constant rate-gyro bias (rad/s).
    pub gyro_bias_rad_s: f64,
    /// White rate-gyro noise per sample (rad/s).
    pub gyro_sigma_rad_s: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            slip_sigma: 0.0,
            ir_sigma: 0.0,
            gyro_bias_rad_s: 0.0,
            gyro_sigma_rad_s: 3e-4,
        }
    }
}

#[derive(Debug)]
pub struct World {
    pub bounds: Rect,
    pub obstacles: Vec<Segment>,
    pub robots: Vec<RobotSim>,
    pub noise: NoiseConfig,
    pub neighbor_radius: f64,
    pub time: f64,
    physics_dt: f64,
    control_dt: f64,
    steps_per_tick: u32,
    seed: u64,
}

impl World {
    pub fn new(
        bounds: Rect,
        obstacles: Vec<Segment>,
        robots: Vec<RobotSim>,
        physics_hz: u32,
        control_hz: u32,
        noise: NoiseConfig,
        seed: u64,
    ) -> Result<Self, WorldError> {
        if control_hz == 0 || physics_hz == 0 || physics_hz % control_hz != 0 {
            return Err(WorldError::RatesDoNotDivide(physics_hz, control_hz));
        }
        if let Some((idx, _)) = obstacles.iter().enumerate().find(|(_, s)| !s.is_finite()) {
            return Err(WorldError::BadSegment(idx));
        }
        let physics_dt = 1.0 / physics_hz as f64;
        for (i, robot) in robots.iter().enumerate() {
            let step = robot.geometry.max_wheel_speed * physics_dt;
            let limit = robot.body_radius / 2.0;
            if step >= limit {
                return Err(WorldError::TunnelingRisk {
                    speed: robot.geometry.max_wheel_speed,
                    hz: physics_hz,
                    step,
                    limit,
                });
            }
            if !bounds.contains_with_margin(robot.position(), robot.body_radius) {
                return Err(WorldError::SpawnOutOfBounds(i));
            }
            for (j, other) in robots.iter().enumerate().take(i) {
                let gap = (robot.position() - other.position()).norm();
                if gap < robot.body_radius + other.body_radius {
                    return Err(WorldError::SpawnOverlap { a: j, b: i });
                }
            }
        }
        Ok(World {
            bounds,
            obstacles,
            robots,
            noise,
            neighbor_radius: 0.5,
            time: 0.0,
            physics_dt,
            control_dt: 1.0 / control_hz as f64,
            steps_per_tick: physics_hz / control_hz,
            seed,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn control_dt(&self) -> f64 {
        self.control_dt
    }

    pub fn physics_dt(&self) -> f64 {
        self.physics_dt
    }

    /// Nearest obstacle-segment hit for a body-frame bearing from `origin`.
    ///
    /// The ray direction is `origin.heading + bearing`; hits beyond
    /// `max_range` count as no-hit.
    pub fn raycast(&self, origin: Pose2D, bearing: f64, max_range: f64) -> Option<RayHit> {
        debug_assert!(max_range > 0.0);
        let start = Vec2::new(origin.x, origin.y);
        let dir = Vec2::from_angle(origin.heading + bearing);
        let mut best: Option<RayHit> = None;
        for seg in &self.obstacles {
            if let Some(hit) = ray_segment_intersection(start, dir, seg) {
                if hit.distance <= max_range
                    && best.map_or(true, |b| hit.distance < b.distance)
                {
                    best = Some(hit);
                }
            }
        }
        best
    }

    /// Like [`World::raycast`] but also sees other robots' body circles.
    pub fn sense_ir(&self, robot_idx: usize, bearing: f64, max_range: f64) -> Option<RayHit> {
        let origin = self.robots[robot_idx].true_pose;
        let start = Vec2::new(origin.x, origin.y);
        let dir = Vec2::from_angle(origin.heading + bearing);
        let mut best = self.raycast(origin, bearing, max_range);
        for (j, other) in self.robots.iter().enumerate() {
            if j == robot_idx {
                continue;
            }
            if let Some(hit) =
                ray_circle_intersection(start, dir, other.position(), other.body_radius)
            {
                if hit.distance > 0.0
                    && hit.distance <= max_range
                    && best.map_or(true, |b| hit.distance < b.distance)
                {
                    best = Some(hit);
                }
            }
        }
        best
    }

    /// Worst body overlap of robot `idx` at `pose` against the arena edge,
    /// obstacle segments and other robots; zero when clear.
    fn penetration(&self, idx: usize, pose: Pose2D) -> f64 {
        let robot = &self.robots[idx];
        let center = Vec2::new(pose.x, pose.y);
        let r = robot.body_radius;
        let mut depth: f64 = 0.0;
        depth = depth.max(self.bounds.min.x + r - center.x);
        depth = depth.max(center.x - (self.bounds.max.x - r));
        depth = depth.max(self.bounds.min.y + r - center.y);
        depth = depth.max(center.y - (self.bounds.max.y - r));
        for seg in &self.obstacles {
            depth = depth.max(r - seg.distance_to_point(center));
        }
        for (j, other) in self.robots.iter().enumerate() {
            if j != idx {
                depth = depth
                    .max(r + other.body_radius - (other.position() - center).norm());
            }
        }
        depth.max(0.0)
    }

    /// One fine physics step: plants, true-pose integration, encoder
    /// accumulation, collision handling.
    pub fn step_physics(&mut self) {
        let dt = self.physics_dt;
        let slip_sigma = self.noise.slip_sigma;
        for i in 0..self.robots.len() {
            let (tau, radii, max_speed, actuation, omega) = {
                let r = &self.robots[i];
                (
                    r.plant_tau,
                    [r.geometry.wheel_radius_left, r.geometry.wheel_radius_right],
                    r.geometry.max_wheel_speed,
                    r.actuation,
                    r.wheel_omega,
                )
            };
            let mut new_omega = [0.0; 2];
            let mut shaft_delta = [0.0; 2];
            let mut ground_delta = [0.0; 2];
            for w in 0..2 {
                let max_omega = max_speed / radii[w];
                new_omega[w] = plant_step(actuation[w], omega[w], tau, dt, max_omega);
                shaft_delta[w] = new_omega[w] * dt;
                ground_delta[w] = shaft_delta[w];
            }
            if slip_sigma > 0.0 {
                let rng = &mut self.robots[i].rng_slip;
                for g in &mut ground_delta {
                    let n: f64 = StandardNormal.sample(rng);
                    *g *= 1.0 + slip_sigma * n;
                }
            }

            let geom = self.robots[i].geometry;
            let od = odometry_delta(
                WheelDelta {
                    dtheta_left: ground_delta[0],
                    dtheta_right: ground_delta[1],
                },
                &geom,
            )
            .expect("geometry validated at construction");
            let tentative = integrate_pose(
                self.robots[i].true_pose,
                od.distance,
                od.rotation,
                DEFAULT_STRAIGHT_EPSILON,
            );

            // A step is a collision when it deepens body overlap beyond a
            // micrometer of slack. Comparing against the current penetration
            // (instead of demanding exactly zero) lets a robot resting at
            // contact still pivot in place and drive away; a strict check
            // can wedge it forever on a nanometer of controller dither.
            let current_penetration = self.penetration(i, self.robots[i].true_pose);
            if self.penetration(i, tentative) > current_penetration + 1e-6 {
                // The drive stalls against the obstruction: wheels stop, no
                // motion, no encoder advance, flag raised for this tick.
                let robot = &mut self.robots[i];
                robot.wheel_omega = [0.0; 2];
                robot.collision = true;
                robot.collisions_total += 1;
            } else {
                let robot = &mut self.robots[i];
                robot.wheel_omega = new_omega;
                robot.true_pose = tentative;
                for w in 0..2 {
                    robot.wheel_angle[w] += shaft_delta[w];
                }
                Self::advance_encoders(robot);
            }
        }
    }

    fn advance_encoders(robot: &mut RobotSim) {
        // Transition boundaries sit half a step from the starting angle;
        // rounding keeps forward and reverse rotation exactly symmetric.
        let angle_per_count = robot.geometry.wheel_angle_per_count();
        for w in 0..2 {
            let target = (robot.wheel_angle[w] / angle_per_count).round() as i64;
            let mut position = robot.encoders[w].count();
            while position != target {
                position += (target - position).signum();
                robot.encoders[w].step(QuadratureState::phase_for_count(position));
            }
        }
    }

    /// One control tick: sense, estimate, let `policy` pick each robot's
    /// twist, close the wheel loops, drain the battery, and emit the tick
    /// report; then advance the physics substeps to the next tick boundary.
    pub fn control_tick<F>(&mut self, mut policy: F) -> TickReport
    where
        F: FnMut(usize, &Observations, &mut ChaCha8Rng) -> Twist,
    {
        let dt = self.control_dt;
        let n = self.robots.len();
        // Clear per-tick flags set during the previous physics batch only
        // after reporting them; collisions are latched per tick below.

        // 1. Encoders and odometry/fusion per robot.
        let mut measured_omega = vec![[0.0f64; 2]; n];
        for i in 0..n {
            let gyro_noise: f64 = if self.robots[i].heading_filter.is_some() {
                StandardNormal.sample(&mut self.robots[i].rng_sensor)
            } else {
                0.0
            };
            let robot = &mut self.robots[i];
            let mut dcounts = [0i64; 2];
            for w in 0..2 {
                let counts = robot.encoders[w].count();
                dcounts[w] = counts - robot.prev_counts[w];
                robot.prev_counts[w] = counts;
                measured_omega[i][w] = encoder_velocity(dcounts[w], dt, &robot.geometry)
                    .expect("control_dt is positive");
            }
            let angle_per_count = robot.geometry.wheel_angle_per_count();
            let od = odometry_delta(
                WheelDelta {
                    dtheta_left: dcounts[0] as f64 * angle_per_count,
                    dtheta_right: dcounts[1] as f64 * angle_per_count,
                },
                &robot.geometry,
            )
            .expect("geometry validated at construction");
            robot.odom_pose = integrate_pose(
                robot.odom_pose,
                od.distance,
                od.rotation,
                DEFAULT_STRAIGHT_EPSILON,
            );
            if robot.heading_filter.is_some() {
                let true_rate =
                    angle_difference(robot.true_pose.heading, robot.prev_true_heading) / dt;
                let gyro_rate = true_rate
                    + self.noise.gyro_bias_rad_s
                    + self.noise.gyro_sigma_rad_s * gyro_noise;
                let filter = robot.heading_filter.as_mut().unwrap();
                let prev_est_heading = robot.est_pose.heading;
                let fused = filter.fuse(gyro_rate, dt, robot.odom_pose.heading);
                let d_heading = angle_difference(fused, prev_est_heading);
                robot.est_pose = integrate_pose(
                    robot.est_pose,
                    od.distance,
                    d_heading,
                    DEFAULT_STRAIGHT_EPSILON,
                );
                robot.est_pose.heading = fused;
            } else {
                robot.est_pose = robot.odom_pose;
            }
            robot.prev_true_heading = robot.true_pose.heading;
        }

        // 2. Sensors.
        for i in 0..n {
            let bearings = self.robots[i].sensors.bearings.clone();
            for (k, bearing) in bearings.iter().enumerate() {
                let model = self.robots[i].ir_models[k];
                let hit = self.sense_ir(i, *bearing, model.max_range);
                let mut reading = match hit {
                    Some(h) if h.distance > 0.0 => ir_forward(&model, h.distance, h.incidence)
                        .expect("hit distance is positive"),
                    _ => model.beta.round().clamp(0.0, model.adc_max() as f64) as u16,
                };
                if self.noise.ir_sigma > 0.0 {
                    let rng = &mut self.robots[i].rng_sensor;
                    let noise: f64 = StandardNormal.sample(rng);
                    reading = (reading as f64 + self.noise.ir_sigma * noise)
                        .round()
                        .clamp(0.0, model.adc_max() as f64) as u16;
                }
                let robot = &mut self.robots[i];
                robot.ir_readings[k] = reading;
                robot.ir_distances[k] = ir_invert(&model, reading, 0.0);
            }
        }

        // 3. Neighbor observations from ground truth (overhead-camera
        //    emulation), then behavior commands.
        let mut observations = Vec::with_capacity(n);
        for i in 0..n {
            let me = &self.robots[i];
            let mut neighbors = Vec::new();
            for (j, other) in self.robots.iter().enumerate() {
                if j == i {
                    continue;
                }
                let rel = other.position() - me.position();
                if rel.norm() <= self.neighbor_radius {
                    neighbors.push(NeighborObs {
                        relative_position: rel.rotated(-me.true_pose.heading),
                        relative_velocity: (other.world_velocity() - me.world_velocity())
                            .rotated(-me.true_pose.heading),
                    });
                }
            }
            observations.push(Observations {
                time: self.time,
                est_pose: me.est_pose,
                ir_distances: me.ir_distances.clone(),
                ir_bearings: me.sensors.bearings.clone(),
                neighbors,
                battery_mah: me.battery.charge_mah,
                stalled: me.collision,
            });
        }

        for i in 0..n {
            let robot = &mut self.robots[i];
            let mut rng = robot.rng_behavior.clone();
            let cmd = policy(i, &observations[i], &mut rng);
            robot.rng_behavior = rng;
            robot.cmd = clamp_twist(cmd, &robot.geometry);
            let wheels = inverse_kinematics(robot.cmd, &robot.geometry)
                .expect("clamped command is finite");
            robot.target_wheel_mps = [wheels.left, wheels.right];
        }

        // 4. Wheel controllers and battery.
        for i in 0..n {
            let robot = &mut self.robots[i];
            if robot.collision {
                // Stall detected (commanded speed, zero counts): discard the
                // wound-up loop state so the recovery command acts cleanly
                // instead of fighting seconds of stale integral.
                for controller in &mut robot.controllers {
                    controller.pid = crate::control::PidState::default();
                }
            }
            for w in 0..2 {
                robot.actuation[w] = robot.controllers[w]
                    .update(robot.target_wheel_mps[w], measured_omega[i][w], dt)
                    .expect("control_dt is positive");
            }
            let commanded = robot.target_wheel_mps[0]
                .abs()
                .max(robot.target_wheel_mps[1].abs());
            robot.battery.step(draw_for_speed(commanded), dt);
        }

        // 5. Report, then advance physics to the next tick boundary.
        let report = self.assemble_report();
        for robot in &mut self.robots {
            robot.collision = false;
        }
        for _ in 0..self.steps_per_tick {
            self.step_physics();
        }
        self.time += dt;
        report
    }

    fn assemble_report(&self) -> TickReport {
        let robots = self
            .robots
            .iter()
            .map(|r| RobotTick {
                id: r.id,
                true_pose: [r.true_pose.x, r.true_pose.y, r.true_pose.heading],
                odom_pose: [r.odom_pose.x, r.odom_pose.y, r.odom_pose.heading],
                est_pose: [r.est_pose.x, r.est_pose.y, r.est_pose.heading],
                ir_m: r.ir_distances.clone(),
                ir_adc: r.ir_readings.clone(),
                wheel_mps: [
                    r.wheel_omega[0] * r.geometry.wheel_radius_left,
                    r.wheel_omega[1] * r.geometry.wheel_radius_right,
                ],
                target_mps: r.target_wheel_mps,
                filtered_mps: [
                    r.controllers[0].filtered_speed(),
                    r.controllers[1].filtered_speed(),
                ],
                counts: [r.encoders[0].count(), r.encoders[1].count()],
                cmd: [r.cmd.linear, r.cmd.angular],
                battery_mah: r.battery.charge_mah,
                collision: r.collision,
                led: r.led,
                behavior: String::new(),
            })
            .collect();
        TickReport {
            time: self.time,
            robots,
        }
    }
}

/// Scale a command so neither wheel exceeds the tangential speed limit.
fn clamp_twist(cmd: Twist, geom: &crate::kinematics::RobotGeometry) -> Twist {
    let mut cmd = cmd;
    if !cmd.is_finite() {
        return Twist::default();
    }
    let half_turn = geom.axle_length * cmd.angular.abs() / 2.0;
    let worst = cmd.linear.abs() + half_turn;
    if worst > geom.max_wheel_speed {
        let scale = geom.max_wheel_speed / worst;
        cmd.linear *= scale;
        cmd.angular *= scale;
    }
    cmd
}
