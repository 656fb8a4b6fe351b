//! Scenario files: experiment configuration for the headless runner.
//!
//! Scenarios are TOML with nested sections. Everything except `name`,
//! `duration_s` and the behavior selection has sensible defaults matching
//! the reference robot. Validation errors always name the offending field.

use crate::behaviors::{CoverageParams, FlockingParams};
use crate::control::{DEFAULT_KALMAN_Q, DEFAULT_KALMAN_R};
use crate::geometry::{Rect, Segment, Vec2};
use crate::kinematics::{Pose2D, RobotGeometry};
use crate::sim::{NoiseConfig, DEFAULT_BODY_RADIUS};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RatesConfig {
    pub physics_hz: u32,
    pub control_hz: u32,
}

impl Default for RatesConfig {
    fn default() -> Self {
        RatesConfig {
            physics_hz: 100,
            control_hz: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArenaConfig {
    pub width_m: f64,
    pub height_m: f64,
    /// Add the four boundary walls as obstacle segments.
    pub walled: bool,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        ArenaConfig {
            width_m: 1.2,
            height_m: 1.2,
            walled: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleConfig {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotsConfig {
    pub count: usize,
    /// "random" (seeded, collision-free) or "fixed" (uses `poses`).
    pub spawn: SpawnMode,
    /// Spawn poses [x, y, heading] for `spawn = "fixed"`.
    pub poses: Vec<[f64; 3]>,
    pub body_radius_m: f64,
}

impl Default for RobotsConfig {
    fn default() -> Self {
        RobotsConfig {
            count: 1,
            spawn: SpawnMode::Random,
            poses: Vec::new(),
            body_radius_m: DEFAULT_BODY_RADIUS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpawnMode {
    Random,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub integral_limit: f64,
    pub output_limit: f64,
    pub kalman_q: f64,
    pub kalman_r: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        let gains = crate::control::PidGains::default();
        ControlConfig {
            kp: gains.kp,
            ki: gains.ki,
            kd: gains.kd,
            integral_limit: gains.integral_limit,
            output_limit: gains.output_limit,
            kalman_q: DEFAULT_KALMAN_Q,
            kalman_r: DEFAULT_KALMAN_R,
        }
    }
}

impl ControlConfig {
    pub fn gains(&self) -> crate::control::PidGains {
        crate::control::PidGains {
            kp: self.kp,
            ki: self.ki,
            kd: self.kd,
            integral_limit: self.integral_limit,
            output_limit: self.output_limit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    pub tau_s: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig { tau_s: 0.15 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryConfig {
    pub capacity_mah: f64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            capacity_mah: 1800.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Fuse the rate gyro into the heading estimate.
    pub enabled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    /// Time the command takes effect (s).
    pub t: f64,
    /// Linear velocity (m/s).
    pub v: f64,
    /// Angular velocity (rad/s).
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptConfig {
    pub steps: Vec<ScriptStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaypointConfig {
    /// Corners to visit, in order.
    pub points: Vec<[f64; 2]>,
    /// Full tours of the point list before stopping.
    pub loops: u32,
    pub cruise_mps: f64,
    pub turn_rate: f64,
    /// Arrival distance (m).
    pub arrive_tol_m: f64,
    /// Heading error below which driving may start (rad).
    pub align_tol_rad: f64,
    /// Heading error above which the robot stops to re-align (rad).
    pub realign_tol_rad: f64,
    /// Heading correction gain while driving.
    pub k_heading: f64,
}

impl Default for WaypointConfig {
    fn default() -> Self {
        WaypointConfig {
            points: Vec::new(),
            loops: 1,
            cruise_mps: 0.1,
            turn_rate: 1.5,
            arrive_tol_m: 0.02,
            align_tol_rad: 0.05,
            realign_tol_rad: 0.4,
            k_heading: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MappingConfig {
    #[serde(flatten)]
    pub route: WaypointConfig,
    pub grid_resolution_m: f64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig {
            route: WaypointConfig::default(),
            grid_resolution_m: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    Idle,
    Script,
    Waypoints,
    Coverage,
    Flocking,
    Mapping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorConfig {
    pub kind: BehaviorKind,
    #[serde(default)]
    pub coverage: CoverageParams,
    #[serde(default)]
    pub flocking: FlockingParams,
    #[serde(default)]
    pub script: ScriptConfig,
    #[serde(default)]
    pub waypoints: WaypointConfig,
    #[serde(default)]
    pub mapping: MappingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: String,
    /// Export the occupancy grid as PGM + sidecar after a mapping run.
    pub write_map: bool,
    /// Compute front-sensor ranging statistics in the summary.
    pub ir_stats: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".to_string(),
            write_map: false,
            ir_stats: false,
        }
    }
}

/// A full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub rates: RatesConfig,
    #[serde(default)]
    pub arena: ArenaConfig,
    #[serde(default)]
    pub obstacles: Vec<ObstacleConfig>,
    #[serde(default)]
    pub robots: RobotsConfig,
    #[serde(default)]
    pub geometry: RobotGeometry,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub plant: PlantConfig,
    #[serde(default)]
    pub battery: BatteryConfig,
    #[serde(default)]
    pub fusion: FusionConfig,
    pub behavior: BehaviorConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_toml(&text)
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(
            Vec2::new(0.0, 0.0),
            Vec2::new(self.arena.width_m, self.arena.height_m),
        )
    }

    /// All obstacle segments, with the boundary walls materialized when the
    /// arena is walled.
    pub fn resolved_obstacles(&self) -> Vec<Segment> {
        let mut segments: Vec<Segment> = self
            .obstacles
            .iter()
            .map(|o| Segment::new(Vec2::new(o.a[0], o.a[1]), Vec2::new(o.b[0], o.b[1])))
            .collect();
        if self.arena.walled {
            segments.extend(self.bounds().wall_segments());
        }
        segments
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        if !(self.duration_s > 0.0) {
            return Err(invalid("duration_s", "must be positive"));
        }
        let r = &self.rates;
        if r.control_hz == 0 || r.physics_hz == 0 || r.physics_hz % r.control_hz != 0 {
            return Err(invalid(
                "rates.physics_hz",
                format!(
                    "{} Hz must be a positive integer multiple of control_hz {}",
                    r.physics_hz, r.control_hz
                ),
            ));
        }
        if !(self.arena.width_m > 0.0 && self.arena.height_m > 0.0) {
            return Err(invalid("arena", "width_m and height_m must be positive"));
        }
        self.geometry
            .validate()
            .map_err(|e| invalid("geometry", e.to_string()))?;
        self.control
            .gains()
            .validate()
            .map_err(|e| invalid("control", e))?;
        if !(self.control.kalman_q > 0.0 && self.control.kalman_r > 0.0) {
            return Err(invalid("control.kalman_q", "q and r must be positive"));
        }
        if !(self.plant.tau_s > 0.0) {
            return Err(invalid("plant.tau_s", "must be positive"));
        }
        if !(self.battery.capacity_mah > 0.0) {
            return Err(invalid("battery.capacity_mah", "must be positive"));
        }
        if self.robots.count == 0 {
            return Err(invalid("robots.count", "must be at least 1"));
        }
        if self.robots.spawn == SpawnMode::Fixed && self.robots.poses.len() != self.robots.count {
            return Err(invalid(
                "robots.poses",
                format!(
                    "fixed spawn needs exactly {} poses, got {}",
                    self.robots.count,
                    self.robots.poses.len()
                ),
            ));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            let finite = o.a.iter().chain(&o.b).all(|v| v.is_finite());
            if !finite {
                return Err(invalid(
                    &format!("obstacles[{i}]"),
                    "endpoints must be finite",
                ));
            }
        }
        match self.behavior.kind {
            BehaviorKind::Script => {
                let steps = &self.behavior.script.steps;
                if steps.is_empty() {
                    return Err(invalid("behavior.script.steps", "must not be empty"));
                }
                if steps.windows(2).any(|w| w[1].t < w[0].t) {
                    return Err(invalid("behavior.script.steps", "must be sorted by time"));
                }
            }
            BehaviorKind::Waypoints => {
                if self.behavior.waypoints.points.is_empty() {
                    return Err(invalid("behavior.waypoints.points", "must not be empty"));
                }
            }
            BehaviorKind::Mapping => {
                if self.behavior.mapping.route.points.is_empty() {
                    return Err(invalid("behavior.mapping.points", "must not be empty"));
                }
                if !(self.behavior.mapping.grid_resolution_m > 0.0) {
                    return Err(invalid(
                        "behavior.mapping.grid_resolution_m",
                        "must be positive",
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Resolve random spawns into fixed poses using the scenario seed, so a
    /// run's header echoes exactly where everyone started.
    pub fn resolve_spawns(&mut self, seed: u64) -> Result<(), ScenarioError> {
        if self.robots.spawn == SpawnMode::Fixed {
            return Ok(());
        }
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5EED_5EED_5EED);
        let bounds = self.bounds();
        let margin = self.robots.body_radius_m + 0.01;
        let obstacles = self.resolved_obstacles();
        let mut poses: Vec<[f64; 3]> = Vec::with_capacity(self.robots.count);
        let mut attempts = 0;
        while poses.len() < self.robots.count {
            attempts += 1;
            if attempts > 100_000 {
                return Err(invalid(
                    "robots.count",
                    format!("cannot place {} robots in this arena", self.robots.count),
                ));
            }
            let x = rng.random_range(bounds.min.x + margin..bounds.max.x - margin);
            let y = rng.random_range(bounds.min.y + margin..bounds.max.y - margin);
            let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let p = Vec2::new(x, y);
            let clear_of_robots = poses.iter().all(|q| {
                (Vec2::new(q[0], q[1]) - p).norm() > 2.0 * self.robots.body_radius_m + 0.02
            });
            let clear_of_obstacles = obstacles
                .iter()
                .all(|seg| seg.distance_to_point(p) > self.robots.body_radius_m + 0.01);
            if clear_of_robots && clear_of_obstacles {
                poses.push([x, y, heading]);
            }
        }
        self.robots.spawn = SpawnMode::Fixed;
        self.robots.poses = poses;
        Ok(())
    }

    pub fn spawn_poses(&self) -> Vec<Pose2D> {
        self.robots
            .poses
            .iter()
            .map(|p| Pose2D::new(p[0], p[1], p[2]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "mini"
duration_s = 5.0
[behavior]
kind = "idle"
"#;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        assert_eq!(s.rates.physics_hz, 100);
        assert_eq!(s.rates.control_hz, 20);
        assert_eq!(s.robots.count, 1);
        assert_eq!(s.geometry, RobotGeometry::default());
        assert!(s.arena.walled);
        assert_eq!(s.resolved_obstacles().len(), 4);
    }

    #[test]
    fn invalid_rates_name_the_field() {
        let text = MINIMAL.replace(
            "[behavior]",
            "[rates]\nphysics_hz = 30\ncontrol_hz = 20\n[behavior]",
        );
        let err = Scenario::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("rates.physics_hz"), "{err}");
    }

    #[test]
    fn fixed_spawn_pose_count_checked() {
        let text = r#"
name = "x"
duration_s = 1.0
[robots]
count = 2
spawn = "fixed"
poses = [[0.5, 0.5, 0.0]]
[behavior]
kind = "idle"
"#;
        let err = Scenario::from_toml(text).unwrap_err();
        assert!(err.to_string().contains("robots.poses"), "{err}");
    }

    #[test]
    fn script_steps_must_be_sorted() {
        let text = r#"
name = "x"
duration_s = 1.0
[behavior]
kind = "script"
[behavior.script]
steps = [{ t = 2.0, v = 0.1, w = 0.0 }, { t = 1.0, v = 0.0, w = 0.0 }]
"#;
        let err = Scenario::from_toml(text).unwrap_err();
        assert!(err.to_string().contains("behavior.script.steps"));
    }

    #[test]
    fn random_spawns_resolve_deterministically_and_collision_free() {
        let text = r#"
name = "x"
duration_s = 1.0
[arena]
width_m = 0.8
height_m = 1.2
[robots]
count = 5
[behavior]
kind = "coverage"
"#;
        let mut a = Scenario::from_toml(text).unwrap();
        let mut b = Scenario::from_toml(text).unwrap();
        a.resolve_spawns(7).unwrap();
        b.resolve_spawns(7).unwrap();
        assert_eq!(a.robots.poses, b.robots.poses);
        assert_eq!(a.robots.poses.len(), 5);
        for (i, p) in a.robots.poses.iter().enumerate() {
            for q in &a.robots.poses[..i] {
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                assert!(d > 2.0 * a.robots.body_radius_m);
            }
        }
        let mut c = Scenario::from_toml(text).unwrap();
        c.resolve_spawns(8).unwrap();
        assert_ne!(a.robots.poses, c.robots.poses);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut s = Scenario::from_toml(MINIMAL).unwrap();
        s.resolve_spawns(3).unwrap();
        let text = toml::to_string(&s).unwrap();
        let back = Scenario::from_toml(&text).unwrap();
        assert_eq!(s, back);
    }
}
