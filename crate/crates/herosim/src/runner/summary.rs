//! Run summary metrics, accumulated tick by tick.
//!
//! Every figure here is a pure function of the scenario echo and the tick
//! stream, so a replay over the JSONL file reproduces the summary exactly.

use crate::behaviors::{grid_update, CoverageMetric, OccupancyGrid};
use crate::geometry::{ray_segment_intersection, Segment, Vec2};
use crate::kinematics::Pose2D;
use crate::protocol::messages::{CmdVelMsg, ImuMsg, LaserMsg, LedMsg, OdomMsg};
use crate::protocol::FRAME_OVERHEAD;
use crate::scenario::{BehaviorKind, Scenario};
use crate::sensing::{IrSensorModel, SensorRing};
use crate::sim::{RobotTick, TickReport};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Transport bytes added per published message in the bandwidth tally.
const TRANSPORT_OVERHEAD: usize = 20;

/// Final metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub duration_s: f64,
    pub ticks: u64,
    pub robots: usize,
    /// RMS position error of the navigation estimate vs truth, all robots.
    pub odometry_rms_error_m: f64,
    /// Final estimate-vs-truth position gap of robot 0.
    pub closure_error_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rise_time_s: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_state_error_mps: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overshoot_frac: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_robot_visited_cells: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_occupied_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_free_accuracy: Option<f64>,
    pub collision_ticks: u64,
    pub unresolved_collisions: u64,
    pub bandwidth_kbps: BTreeMap<String, f64>,
    pub bandwidth_total_kbps: f64,
    pub frames_published: u64,
    pub battery_remaining_mah: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ir_front_rms_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flocking_polarization: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flocking_mean_pairwise_m: Option<f64>,
}

/// Ticks a collision must persist to count as unresolved (2 s at 20 Hz).
const UNRESOLVED_AFTER_TICKS: u64 = 40;

pub struct SummaryAccumulator {
    scenario_name: String,
    seed: u64,
    control_dt: f64,
    behavior: BehaviorKind,
    obstacles: Vec<Segment>,
    ir_stats: bool,

    ticks: u64,
    robots: usize,
    sq_err_sum: f64,
    err_samples: u64,
    closure_error_m: f64,

    // Robot-0 wheel series for step metrics.
    times: Vec<f64>,
    wheel_series: Vec<[f64; 2]>,
    target_series: Vec<[f64; 2]>,

    coverage: Option<CoverageMetric>,
    per_robot_visited: Vec<BTreeSet<(usize, usize)>>,
    coverage_res: f64,
    last_fraction: f64,
    monotone_violation: bool,

    map_grid: Option<OccupancyGrid>,
    ring: SensorRing,
    ir_max_range: f64,
    traversed_cells: BTreeSet<(usize, usize)>,

    collision_ticks: u64,
    collision_run: Vec<u64>,
    unresolved: u64,

    bytes_per_topic: BTreeMap<String, u64>,
    msgs_published: u64,

    ir_sq_sum: f64,
    ir_samples: u64,

    last_tick: Option<TickReport>,
}

impl SummaryAccumulator {
    pub fn new(scenario: &Scenario) -> Self {
        let behavior = scenario.behavior.kind;
        let coverage = (behavior == BehaviorKind::Coverage).then(|| {
            CoverageMetric::new(scenario.bounds(), CoverageMetric::DEFAULT_RESOLUTION)
        });
        let map_grid = (behavior == BehaviorKind::Mapping).then(|| {
            OccupancyGrid::new(
                (0.0, 0.0),
                scenario.arena.width_m,
                scenario.arena.height_m,
                scenario.behavior.mapping.grid_resolution_m,
            )
        });
        SummaryAccumulator {
            scenario_name: scenario.name.clone(),
            seed: scenario.seed,
            control_dt: 1.0 / scenario.rates.control_hz as f64,
            behavior,
            obstacles: scenario.resolved_obstacles(),
            ir_stats: scenario.output.ir_stats,
            ticks: 0,
            robots: scenario.robots.count,
            sq_err_sum: 0.0,
            err_samples: 0,
            closure_error_m: 0.0,
            times: Vec::new(),
            wheel_series: Vec::new(),
            target_series: Vec::new(),
            coverage,
            per_robot_visited: vec![BTreeSet::new(); scenario.robots.count],
            coverage_res: CoverageMetric::DEFAULT_RESOLUTION,
            last_fraction: 0.0,
            monotone_violation: false,
            map_grid,
            ring: SensorRing::default(),
            ir_max_range: IrSensorModel::default().max_range,
            traversed_cells: BTreeSet::new(),
            collision_ticks: 0,
            collision_run: vec![0; scenario.robots.count],
            unresolved: 0,
            bytes_per_topic: BTreeMap::new(),
            msgs_published: 0,
            ir_sq_sum: 0.0,
            ir_samples: 0,
            last_tick: None,
        }
    }

    /// Coverage fraction decreased: a structural impossibility that voids
    /// the run.
    pub fn monotone_violated(&self) -> bool {
        self.monotone_violation
    }

    pub fn add_tick(&mut self, report: &TickReport) {
        self.ticks += 1;
        for row in &report.robots {
            let dx = row.est_pose[0] - row.true_pose[0];
            let dy = row.est_pose[1] - row.true_pose[1];
            self.sq_err_sum += dx * dx + dy * dy;
            self.err_samples += 1;
            if row.id == 0 {
                self.closure_error_m = (dx * dx + dy * dy).sqrt();
                self.times.push(report.time);
                self.wheel_series.push(row.wheel_mps);
                self.target_series.push(row.target_mps);
            }
            if row.collision {
                self.collision_ticks += 1;
                self.collision_run[row.id] += 1;
                if self.collision_run[row.id] == UNRESOLVED_AFTER_TICKS {
                    self.unresolved += 1;
                }
            } else {
                self.collision_run[row.id] = 0;
            }
            if let Some(metric) = self.coverage.as_mut() {
                let pose = Pose2D::new(row.true_pose[0], row.true_pose[1], row.true_pose[2]);
                metric.update(pose);
                let cx = (row.true_pose[0] / self.coverage_res).floor() as i64;
                let cy = (row.true_pose[1] / self.coverage_res).floor() as i64;
                if cx >= 0 && cy >= 0 {
                    self.per_robot_visited[row.id].insert((cx as usize, cy as usize));
                }
            }
            if row.id == 0 {
                if let Some(grid) = self.map_grid.as_mut() {
                    let est = Pose2D::new(row.est_pose[0], row.est_pose[1], row.est_pose[2]);
                    // Hit returns only, mirroring the mapping behavior.
                    for (bearing, distance) in self.ring.bearings.iter().zip(&row.ir_m) {
                        if *distance < self.ir_max_range {
                            grid_update(grid, est, *bearing, Some(*distance), self.ir_max_range);
                        }
                    }
                    let true_p = Vec2::new(row.true_pose[0], row.true_pose[1]);
                    if let Some(cell) = grid.cell_of(true_p) {
                        self.traversed_cells.insert(cell);
                    }
                }
                if self.ir_stats {
                    self.accumulate_ir_error(row);
                }
            }
            self.account_bandwidth(row);
        }
        if let Some(metric) = &self.coverage {
            if metric.fraction() < self.last_fraction {
                self.monotone_violation = true;
            }
            self.last_fraction = metric.fraction();
        }
        self.last_tick = Some(report.clone());
    }

    fn accumulate_ir_error(&mut self, row: &RobotTick) {
        let pose = Pose2D::new(row.true_pose[0], row.true_pose[1], row.true_pose[2]);
        let origin = Vec2::new(pose.x, pose.y);
        let dir = Vec2::from_angle(pose.heading);
        let mut truth: Option<f64> = None;
        for seg in &self.obstacles {
            if let Some(hit) = ray_segment_intersection(origin, dir, seg) {
                if truth.map_or(true, |t| hit.distance < t) {
                    truth = Some(hit.distance);
                }
            }
        }
        if let Some(t) = truth {
            if (0.02..=self.ir_max_range - 0.002).contains(&t) {
                let err = row.ir_m[0] - t;
                self.ir_sq_sum += err * err;
                self.ir_samples += 1;
            }
        }
    }

    fn account_bandwidth(&mut self, _row: &RobotTick) {
        // Fixed per-robot, per-tick publication set; sizes are the message
        // schema constants plus framing and transport overhead.
        let entries: [(&str, usize); 5] = [
            ("/odom", OdomMsg::WIRE_SIZE),
            ("/laser", LaserMsg::WIRE_SIZE),
            ("/imu", ImuMsg::WIRE_SIZE),
            ("/led", LedMsg::WIRE_SIZE),
            ("/cmd_vel", CmdVelMsg::WIRE_SIZE),
        ];
        for (name, size) in entries {
            let bytes = size + FRAME_OVERHEAD + TRANSPORT_OVERHEAD;
            *self.bytes_per_topic.entry(name.to_string()).or_insert(0) += bytes as u64;
            self.msgs_published += 1;
        }
    }

    /// Occupancy-grid accuracy against the true wall geometry:
    /// (occupied accuracy over the near-wall band, free accuracy over
    /// robot-traversed cells).
    fn map_accuracy(&self) -> Option<(f64, f64)> {
        let grid = self.map_grid.as_ref()?;
        let band = 0.02;
        let mut wall_cells = 0usize;
        let mut wall_hits = 0usize;
        for cy in 0..grid.height {
            for cx in 0..grid.width {
                let center = grid.cell_center((cx, cy));
                let near_wall = self
                    .obstacles
                    .iter()
                    .any(|seg| seg.distance_to_point(center) <= band);
                if near_wall {
                    wall_cells += 1;
                    if grid.probability_at((cx, cy)) > 0.5 {
                        wall_hits += 1;
                    }
                }
            }
        }
        let mut free_cells = 0usize;
        let mut free_hits = 0usize;
        for cell in &self.traversed_cells {
            free_cells += 1;
            if grid.probability_at(*cell) < 0.5 {
                free_hits += 1;
            }
        }
        let occ = if wall_cells > 0 {
            wall_hits as f64 / wall_cells as f64
        } else {
            1.0
        };
        let free = if free_cells > 0 {
            free_hits as f64 / free_cells as f64
        } else {
            1.0
        };
        Some((occ, free))
    }

    /// Rise time, steady-state MAE and overshoot per wheel from the robot-0
    /// series, measured from the last target change. Only scripted step
    /// scenarios have a meaningful settled target.
    fn step_metrics(&self) -> (Option<[f64; 2]>, Option<[f64; 2]>, Option<[f64; 2]>) {
        if self.behavior != BehaviorKind::Script || self.times.len() < 4 {
            return (None, None, None);
        }
        let mut rise = [0.0; 2];
        let mut mae = [0.0; 2];
        let mut overshoot = [0.0; 2];
        for w in 0..2 {
            let final_target = self.target_series.last().unwrap()[w];
            if final_target == 0.0 {
                return (None, None, None);
            }
            let step_idx = (1..self.target_series.len())
                .rev()
                .find(|&k| self.target_series[k][w] != self.target_series[k - 1][w])
                .unwrap_or(0);
            let t_step = self.times[step_idx];
            let band = 0.02 * final_target.abs();
            // Rise: first sample after which the signal stays inside the band.
            let mut last_outside = None;
            for k in step_idx..self.times.len() {
                if (self.wheel_series[k][w] - final_target).abs() > band {
                    last_outside = Some(k);
                }
            }
            rise[w] = match last_outside {
                None => 0.0,
                Some(k) if k + 1 < self.times.len() => self.times[k + 1] - t_step,
                // Never settled: report the whole remaining window.
                Some(_) => *self.times.last().unwrap() - t_step + self.control_dt,
            };
            // Overshoot: worst excursion past the target, as a fraction.
            let sign = final_target.signum();
            overshoot[w] = (step_idx..self.times.len())
                .map(|k| (self.wheel_series[k][w] - final_target) * sign / final_target.abs())
                .fold(0.0, f64::max);
            // Steady state: the last two seconds.
            let t_end = *self.times.last().unwrap();
            let window: Vec<f64> = (step_idx..self.times.len())
                .filter(|&k| self.times[k] >= t_end - 2.0)
                .map(|k| (self.wheel_series[k][w] - final_target).abs())
                .collect();
            mae[w] = window.iter().sum::<f64>() / window.len().max(1) as f64;
        }
        (Some(rise), Some(mae), Some(overshoot))
    }

    pub fn finish(self) -> RunSummary {
        let (rise, mae, overshoot) = self.step_metrics();
        let map_acc = self.map_accuracy();
        let duration = self.ticks as f64 * self.control_dt;
        let bandwidth_kbps: BTreeMap<String, f64> = self
            .bytes_per_topic
            .iter()
            .map(|(k, v)| (k.clone(), *v as f64 / 1024.0 / duration))
            .collect();
        let bandwidth_total_kbps = bandwidth_kbps.values().sum();
        let (polarization, mean_pairwise) = if self.behavior == BehaviorKind::Flocking {
            self.flocking_stats()
        } else {
            (None, None)
        };
        let battery = self
            .last_tick
            .as_ref()
            .map(|t| t.robots.iter().map(|r| r.battery_mah).collect())
            .unwrap_or_default();
        RunSummary {
            scenario: self.scenario_name.clone(),
            seed: self.seed,
            duration_s: duration,
            ticks: self.ticks,
            robots: self.robots,
            odometry_rms_error_m: (self.sq_err_sum / self.err_samples.max(1) as f64).sqrt(),
            closure_error_m: self.closure_error_m,
            rise_time_s: rise,
            steady_state_error_mps: mae,
            overshoot_frac: overshoot,
            coverage_fraction: self.coverage.as_ref().map(|c| c.fraction()),
            per_robot_visited_cells: self
                .coverage
                .as_ref()
                .map(|_| self.per_robot_visited.iter().map(|s| s.len()).collect()),
            map_occupied_accuracy: map_acc.map(|a| a.0),
            map_free_accuracy: map_acc.map(|a| a.1),
            collision_ticks: self.collision_ticks,
            unresolved_collisions: self.unresolved,
            bandwidth_kbps,
            bandwidth_total_kbps,
            frames_published: self.msgs_published,
            battery_remaining_mah: battery,
            ir_front_rms_m: (self.ir_samples > 0)
                .then(|| (self.ir_sq_sum / self.ir_samples as f64).sqrt()),
            flocking_polarization: polarization,
            flocking_mean_pairwise_m: mean_pairwise,
        }
    }

    fn flocking_stats(&self) -> (Option<f64>, Option<f64>) {
        let Some(tick) = &self.last_tick else {
            return (None, None);
        };
        let n = tick.robots.len();
        if n == 0 {
            return (None, None);
        }
        let (mut sx, mut sy) = (0.0, 0.0);
        for r in &tick.robots {
            sx += r.true_pose[2].cos();
            sy += r.true_pose[2].sin();
        }
        let polarization = (sx * sx + sy * sy).sqrt() / n as f64;
        let mut dist_sum = 0.0;
        let mut pairs = 0usize;
        for i in 0..n {
            for j in 0..i {
                let dx = tick.robots[i].true_pose[0] - tick.robots[j].true_pose[0];
                let dy = tick.robots[i].true_pose[1] - tick.robots[j].true_pose[1];
                dist_sum += (dx * dx + dy * dy).sqrt();
                pairs += 1;
            }
        }
        let mean = (pairs > 0).then(|| dist_sum / pairs as f64);
        (Some(polarization), mean)
    }

    /// The rebuilt mapping grid (for consistency checks against the live one).
    pub fn grid(&self) -> Option<&OccupancyGrid> {
        self.map_grid.as_ref()
    }
}
