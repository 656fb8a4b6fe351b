//! Per-robot behavior drivers: thin stateful shells around the pure
//! policies, plus the scripted motion sources used by the bench scenarios.

use crate::behaviors::{
    coverage_policy, flocking_policy, grid_update, CoverageParams, FlockingParams, NeighborState,
    OccupancyGrid,
};
use crate::geometry::Vec2;
use crate::kinematics::{angle_difference, Pose2D, Twist};
use crate::scenario::{
    BehaviorConfig, BehaviorKind, MappingConfig, Scenario, ScriptStep, WaypointConfig,
};
use crate::sim::Observations;
use rand_chacha::ChaCha8Rng;

pub(crate) enum BehaviorDriver {
    Idle,
    Script(ScriptDriver),
    Waypoints(WaypointFollower),
    Coverage(CoverageDriver),
    Flocking(FlockingDriver),
    Mapping(MappingDriver),
}

impl BehaviorDriver {
    pub fn build(scenario: &Scenario) -> Self {
        let cfg: &BehaviorConfig = &scenario.behavior;
        match cfg.kind {
            BehaviorKind::Idle => BehaviorDriver::Idle,
            BehaviorKind::Script => BehaviorDriver::Script(ScriptDriver {
                steps: cfg.script.steps.clone(),
            }),
            BehaviorKind::Waypoints => {
                BehaviorDriver::Waypoints(WaypointFollower::new(&cfg.waypoints))
            }
            BehaviorKind::Coverage => BehaviorDriver::Coverage(CoverageDriver {
                params: cfg.coverage,
                turn_direction: None,
            }),
            BehaviorKind::Flocking => BehaviorDriver::Flocking(FlockingDriver {
                params: cfg.flocking,
                avoid: CoverageParams {
                    turn_rate: 2.0,
                    ..CoverageParams::default()
                },
                turn_direction: None,
            }),
            BehaviorKind::Mapping => BehaviorDriver::Mapping(MappingDriver::new(
                &cfg.mapping,
                scenario.arena.width_m,
                scenario.arena.height_m,
            )),
        }
    }

    pub fn control(&mut self, obs: &Observations, rng: &mut ChaCha8Rng) -> Twist {
        match self {
            BehaviorDriver::Idle => Twist::default(),
            BehaviorDriver::Script(s) => s.command_at(obs.time),
            BehaviorDriver::Waypoints(w) => w.control(obs.est_pose),
            BehaviorDriver::Coverage(c) => c.control(obs, rng),
            BehaviorDriver::Flocking(f) => f.control(obs, rng),
            BehaviorDriver::Mapping(m) => m.control(obs),
        }
    }

    pub fn label(&self) -> String {
        match self {
            BehaviorDriver::Idle => "idle".to_string(),
            BehaviorDriver::Script(_) => "script".to_string(),
            BehaviorDriver::Waypoints(w) => w.label(),
            BehaviorDriver::Coverage(c) => {
                if c.turn_direction.is_some() {
                    "avoid".to_string()
                } else {
                    "cruise".to_string()
                }
            }
            BehaviorDriver::Flocking(_) => "flock".to_string(),
            BehaviorDriver::Mapping(m) => format!("map {}", m.follower.label()),
        }
    }

    pub fn grid(&self) -> Option<&OccupancyGrid> {
        match self {
            BehaviorDriver::Mapping(m) => Some(&m.grid),
            _ => None,
        }
    }

    /// True when a routed behavior has finished its tour.
    pub fn route_completed(&self) -> Option<bool> {
        match self {
            BehaviorDriver::Waypoints(w) => Some(w.done()),
            BehaviorDriver::Mapping(m) => Some(m.follower.done()),
            _ => None,
        }
    }
}

pub(crate) struct ScriptDriver {
    steps: Vec<ScriptStep>,
}

impl ScriptDriver {
    fn command_at(&self, time: f64) -> Twist {
        let mut cmd = Twist::default();
        for step in &self.steps {
            if time + 1e-9 >= step.t {
                cmd = Twist::new(step.v, step.w);
            } else {
                break;
            }
        }
        cmd
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FollowState {
    Align,
    Drive,
}

/// Drive a closed tour of waypoints on the robot's own pose estimate:
/// rotate in place toward the next corner, cruise with small heading
/// corrections, stop after the configured number of loops.
///
/// The tour is the point list repeated `loops` times plus a final return to
/// the first point, so a loop always closes where it started.
pub(crate) struct WaypointFollower {
    cfg: WaypointConfig,
    route: Vec<Vec2>,
    next_idx: usize,
    state: FollowState,
}

impl WaypointFollower {
    pub fn new(cfg: &WaypointConfig) -> Self {
        let loops = cfg.loops.max(1) as usize;
        let points: Vec<Vec2> = cfg.points.iter().map(|p| Vec2::new(p[0], p[1])).collect();
        let mut route = Vec::with_capacity(points.len() * loops + 1);
        for _ in 0..loops {
            route.extend_from_slice(&points);
        }
        if let Some(first) = points.first() {
            route.push(*first);
        }
        WaypointFollower {
            cfg: cfg.clone(),
            route,
            next_idx: 0,
            state: FollowState::Align,
        }
    }

    pub fn done(&self) -> bool {
        self.next_idx >= self.route.len()
    }

    fn label(&self) -> String {
        if self.done() {
            "done".to_string()
        } else {
            let state = match self.state {
                FollowState::Align => "align",
                FollowState::Drive => "drive",
            };
            format!("{state} {}/{}", self.next_idx, self.route.len())
        }
    }

    pub fn control(&mut self, est: Pose2D) -> Twist {
        let here = Vec2::new(est.x, est.y);
        // Arrival advances the route; running out of entries ends the tour.
        while self.next_idx < self.route.len()
            && (self.route[self.next_idx] - here).norm() < self.cfg.arrive_tol_m
        {
            self.next_idx += 1;
        }
        if self.done() {
            return Twist::default();
        }
        let to_target = self.route[self.next_idx] - here;
        let heading_err = angle_difference(to_target.y.atan2(to_target.x), est.heading);
        match self.state {
            FollowState::Align => {
                if heading_err.abs() <= self.cfg.align_tol_rad {
                    self.state = FollowState::Drive;
                    return self.drive(heading_err);
                }
                let rate = (2.0 * heading_err).clamp(-self.cfg.turn_rate, self.cfg.turn_rate);
                Twist::new(0.0, rate)
            }
            FollowState::Drive => {
                if heading_err.abs() > self.cfg.realign_tol_rad {
                    self.state = FollowState::Align;
                    let rate = (2.0 * heading_err).clamp(-self.cfg.turn_rate, self.cfg.turn_rate);
                    return Twist::new(0.0, rate);
                }
                self.drive(heading_err)
            }
        }
    }

    fn drive(&self, heading_err: f64) -> Twist {
        let correction = (self.cfg.k_heading * heading_err).clamp(-0.5, 0.5);
        Twist::new(self.cfg.cruise_mps, correction)
    }
}

pub(crate) struct CoverageDriver {
    params: CoverageParams,
    /// Committed avoidance direction; reset once the front clears so the
    /// robot does not dither between left and right mid-turn.
    turn_direction: Option<f64>,
}

impl CoverageDriver {
    fn control(&mut self, obs: &Observations, rng: &mut ChaCha8Rng) -> Twist {
        let mut cmd = coverage_policy(&obs.ir_distances, &self.params, rng);
        if obs.stalled && cmd.linear > 0.0 {
            // Grazing contact the ring cannot see: stop and turn away.
            cmd = Twist::new(0.0, self.params.turn_rate);
        }
        latch_turn(&mut cmd, &mut self.turn_direction);
        cmd
    }
}

/// Hold an in-place turn to one committed direction until driving resumes.
fn latch_turn(cmd: &mut Twist, turn_direction: &mut Option<f64>) {
    if cmd.linear == 0.0 && cmd.angular != 0.0 {
        match turn_direction {
            Some(sign) => cmd.angular = *sign * cmd.angular.abs(),
            None => *turn_direction = Some(cmd.angular.signum()),
        }
    } else {
        *turn_direction = None;
    }
}

pub(crate) struct FlockingDriver {
    params: FlockingParams,
    avoid: CoverageParams,
    turn_direction: Option<f64>,
}

impl FlockingDriver {
    fn control(&mut self, obs: &Observations, rng: &mut ChaCha8Rng) -> Twist {
        // Walls and stalls preempt the flocking law; neighbors do not,
        // since separation already handles them.
        let front = obs.ir_distances[7]
            .min(obs.ir_distances[0])
            .min(obs.ir_distances[1]);
        let mut cmd = if front <= self.avoid.front_threshold_m || obs.stalled {
            let blocked = coverage_policy(&obs.ir_distances, &self.avoid, rng);
            if blocked.linear > 0.0 {
                // Stalled with a clear-looking front: pick a turn anyway.
                Twist::new(0.0, self.avoid.turn_rate)
            } else {
                blocked
            }
        } else {
            let neighbors: Vec<NeighborState> = obs
                .neighbors
                .iter()
                .map(|n| NeighborState {
                    relative_position: (n.relative_position.x, n.relative_position.y),
                    relative_velocity: (n.relative_velocity.x, n.relative_velocity.y),
                })
                .collect();
            flocking_policy(&neighbors, &self.params)
        };
        latch_turn(&mut cmd, &mut self.turn_direction);
        cmd
    }
}

pub(crate) struct MappingDriver {
    pub follower: WaypointFollower,
    pub grid: OccupancyGrid,
    max_range: f64,
}

impl MappingDriver {
    fn new(cfg: &MappingConfig, arena_w: f64, arena_h: f64) -> Self {
        MappingDriver {
            follower: WaypointFollower::new(&cfg.route),
            grid: OccupancyGrid::new((0.0, 0.0), arena_w, arena_h, cfg.grid_resolution_m),
            max_range: crate::sensing::IrSensorModel::default().max_range,
        }
    }

    fn control(&mut self, obs: &Observations) -> Twist {
        // Only integrate actual returns. A max-range reading may be open
        // space or a grazing surface the normal-incidence inversion cannot
        // rank, and free-marking through it would erode real walls.
        for (bearing, distance) in obs.ir_bearings.iter().zip(&obs.ir_distances) {
            if *distance < self.max_range {
                grid_update(
                    &mut self.grid,
                    obs.est_pose,
                    *bearing,
                    Some(*distance),
                    self.max_range,
                );
            }
        }
        self.follower.control(obs.est_pose)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_holds_last_command() {
        let s = ScriptDriver {
            steps: vec![
                ScriptStep { t: 0.0, v: 0.0, w: 0.0 },
                ScriptStep { t: 2.7, v: 0.0675, w: 0.0 },
            ],
        };
        assert_eq!(s.command_at(0.0).linear, 0.0);
        assert_eq!(s.command_at(2.65).linear, 0.0);
        assert_eq!(s.command_at(2.7).linear, 0.0675);
        assert_eq!(s.command_at(100.0).linear, 0.0675);
    }

    #[test]
    fn follower_walks_the_tour_and_ends_at_the_start() {
        let cfg = WaypointConfig {
            points: vec![[0.0, 0.0], [1.0, 0.0]],
            loops: 2,
            ..WaypointConfig::default()
        };
        let mut f = WaypointFollower::new(&cfg);
        // Route: the two points twice, then back to the first.
        assert_eq!(f.route.len(), 5);
        // Standing at the first waypoint pointing at the second: arrival on
        // wp0 advances and driving starts.
        let cmd = f.control(Pose2D::new(0.0, 0.0, 0.0));
        assert!(cmd.linear > 0.0, "should drive toward wp1");
        assert!(!f.done());
        // Walk the whole tour; it must end back at the start.
        let stations = [
            Pose2D::new(1.0, 0.0, std::f64::consts::PI),
            Pose2D::new(0.0, 0.0, 0.0),
            Pose2D::new(1.0, 0.0, std::f64::consts::PI),
        ];
        for pose in stations {
            assert!(!f.done());
            f.control(pose);
        }
        let cmd = f.control(Pose2D::new(0.0, 0.0, 0.0));
        assert_eq!(cmd, Twist::default());
        assert!(f.done());
    }

    #[test]
    fn follower_rotates_before_driving() {
        let cfg = WaypointConfig {
            points: vec![[1.0, 1.0]],
            loops: 1,
            ..WaypointConfig::default()
        };
        let mut f = WaypointFollower::new(&cfg);
        // Facing away from the target: align in place first.
        let cmd = f.control(Pose2D::new(0.0, 0.0, -std::f64::consts::FRAC_PI_2));
        assert_eq!(cmd.linear, 0.0);
        assert!(cmd.angular > 0.0, "turn left toward the target");
    }

    fn obs_with_ir(ir: Vec<f64>, stalled: bool) -> Observations {
        Observations {
            time: 0.0,
            est_pose: Pose2D::default(),
            ir_bearings: (0..ir.len())
                .map(|k| k as f64 * std::f64::consts::FRAC_PI_4)
                .collect(),
            ir_distances: ir,
            neighbors: Vec::new(),
            battery_mah: 1800.0,
            stalled,
        }
    }

    #[test]
    fn coverage_driver_commits_to_one_turn_direction() {
        use rand::SeedableRng;
        let mut d = CoverageDriver {
            params: CoverageParams::default(),
            turn_direction: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut blocked = vec![0.2; 8];
        blocked[0] = 0.05;
        let first = d.control(&obs_with_ir(blocked.clone(), false), &mut rng);
        assert_eq!(first.linear, 0.0);
        // Even if the side sums momentarily favor the other way, the driver
        // keeps its committed direction until the front clears.
        let mut flipped = blocked.clone();
        flipped[1] = 0.05;
        flipped[7] = 0.19;
        let second = d.control(&obs_with_ir(flipped, false), &mut rng);
        assert_eq!(second.angular.signum(), first.angular.signum());
        let open = vec![0.2; 8];
        let third = d.control(&obs_with_ir(open, false), &mut rng);
        assert!(third.linear > 0.0);
        assert!(d.turn_direction.is_none());
    }

    #[test]
    fn coverage_driver_turns_away_on_a_stall() {
        use rand::SeedableRng;
        let mut d = CoverageDriver {
            params: CoverageParams::default(),
            turn_direction: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // A grazing contact: the ring sees open space but the body stalls.
        let cmd = d.control(&obs_with_ir(vec![0.2; 8], true), &mut rng);
        assert_eq!(cmd.linear, 0.0);
        assert_ne!(cmd.angular, 0.0);
    }

    #[test]
    fn flocking_driver_prefers_wall_avoidance() {
        use rand::SeedableRng;
        let mut d = FlockingDriver {
            params: FlockingParams::default(),
            avoid: CoverageParams::default(),
            turn_direction: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ir = vec![0.2; 8];
        ir[0] = 0.05;
        let cmd = d.control(&obs_with_ir(ir, false), &mut rng);
        assert_eq!(cmd.linear, 0.0, "wall ahead must preempt flocking");
        let cmd = d.control(&obs_with_ir(vec![0.2; 8], false), &mut rng);
        assert!(cmd.linear > 0.0, "open space flocks forward");
    }
}
