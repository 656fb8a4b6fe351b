//! Headless scenario runner: wires robots, behaviors and the loopback
//! broker, streams JSONL telemetry, and computes the summary record.

mod drivers;
mod replay;
mod summary;

pub use replay::{replay_check, ReplayReport};
pub use summary::{RunSummary, SummaryAccumulator};

use crate::behaviors::OccupancyGrid;
use crate::protocol::messages::{
    CmdVelMsg, ImuMsg, LaserMsg, LedMsg, OdomMsg, TOPIC_CMD_VEL, TOPIC_IMU, TOPIC_LASER,
    TOPIC_LED, TOPIC_NAMES, TOPIC_ODOM,
};
use crate::protocol::{encode_frame, Broker, FrameDecoder};
use crate::scenario::Scenario;
use crate::sensing::BatteryModel;
use crate::sim::{RobotSim, TickReport, World};
use drivers::BehaviorDriver;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime invariant violated: {0}")]
    Invariant(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit code: 2 for configuration errors, 3 for runtime
    /// invariant violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Invariant(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

/// One line of the telemetry stream.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    /// First line: the fully resolved scenario (spawns materialized) and
    /// the seed, so every summary figure is recomputable from the file.
    Header { scenario: Scenario, seed: u64 },
    Tick {
        #[serde(flatten)]
        report: TickReport,
    },
    Summary {
        #[serde(flatten)]
        summary: RunSummary,
    },
}

/// Command-line overrides applied before a run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub duration_s: Option<f64>,
}

/// In-memory result of a simulation.
pub struct SimulationOutput {
    pub summary: RunSummary,
    /// Full JSONL telemetry (header, ticks, summary), newline-terminated.
    pub jsonl: String,
    /// The occupancy grid after a mapping run.
    pub grid: Option<OccupancyGrid>,
}

/// Files written by [`run_scenario_file`].
pub struct RunArtifacts {
    pub summary: RunSummary,
    pub jsonl_path: PathBuf,
    pub summary_path: PathBuf,
    pub map_path: Option<PathBuf>,
}

fn config_err(e: impl std::fmt::Display) -> RunError {
    RunError::Config(e.to_string())
}

const LED_PALETTE: [[u8; 3]; 5] = [
    [255, 0, 0],
    [0, 200, 0],
    [0, 80, 255],
    [255, 200, 0],
    [0, 220, 220],
];

/// Frame-level loopback: every published payload passes through the wire
/// encoding and the resynchronizing decoder before delivery, exactly as a
/// byte-stream subscriber would see it.
struct LoopbackLink {
    decoder: FrameDecoder,
    bytes: u64,
}

impl LoopbackLink {
    fn new() -> Self {
        LoopbackLink {
            decoder: FrameDecoder::new(),
            bytes: 0,
        }
    }

    fn transfer(&mut self, topic: u16, payload: &[u8]) -> Result<Vec<u8>, RunError> {
        let frame = encode_frame(topic, payload)
            .map_err(|e| RunError::Invariant(format!("frame encode failed: {e}")))?;
        self.bytes += frame.len() as u64 + 20;
        self.decoder.push(&frame);
        let decoded = self
            .decoder
            .next_frame()
            .ok_or_else(|| RunError::Invariant("loopback frame did not decode".into()))?;
        if decoded.topic_id != topic || decoded.payload != payload {
            return Err(RunError::Invariant("loopback frame corrupted".into()));
        }
        Ok(decoded.payload)
    }
}

/// Run a scenario in memory and return the telemetry and summary.
pub fn simulate(scenario: &Scenario) -> Result<SimulationOutput, RunError> {
    scenario.validate().map_err(config_err)?;
    let mut scenario = scenario.clone();
    scenario.resolve_spawns(scenario.seed).map_err(config_err)?;
    let seed = scenario.seed;

    let gains = scenario.control.gains();
    let robots: Vec<RobotSim> = scenario
        .spawn_poses()
        .iter()
        .enumerate()
        .map(|(i, pose)| {
            let mut robot = RobotSim::new(
                i,
                *pose,
                scenario.geometry,
                scenario.robots.body_radius_m,
                scenario.plant.tau_s,
                gains,
                scenario.control.kalman_q,
                scenario.control.kalman_r,
                BatteryModel::new(scenario.battery.capacity_mah),
                scenario.fusion.enabled,
                seed,
            );
            let color = LED_PALETTE[i % LED_PALETTE.len()];
            robot.led = [color, color];
            robot
        })
        .collect();

    let mut world = World::new(
        scenario.bounds(),
        scenario.resolved_obstacles(),
        robots,
        scenario.rates.physics_hz,
        scenario.rates.control_hz,
        scenario.noise,
        seed,
    )
    .map_err(config_err)?;

    let mut behaviors: Vec<BehaviorDriver> = (0..scenario.robots.count)
        .map(|_| BehaviorDriver::build(&scenario))
        .collect();

    let broker = Broker::new();
    for (name, id) in TOPIC_NAMES {
        broker.advertise(id, name);
    }
    let monitor = broker.create_subscription();
    for (_, id) in TOPIC_NAMES {
        broker.subscribe(&monitor, id);
    }
    let mut link = LoopbackLink::new();
    let mut delivered: u64 = 0;

    let mut accumulator = SummaryAccumulator::new(&scenario);
    let mut jsonl = String::new();
    let header = Record::Header {
        scenario: scenario.clone(),
        seed,
    };
    jsonl.push_str(&serde_json::to_string(&header).expect("header serializes"));
    jsonl.push('\n');

    let control_hz = scenario.rates.control_hz as f64;
    let ticks = (scenario.duration_s * control_hz).round().max(1.0) as u64;
    for _ in 0..ticks {
        let mut report = world.control_tick(|i, obs, rng| behaviors[i].control(obs, rng));
        for row in &mut report.robots {
            row.behavior = behaviors[row.id].label();
        }
        publish_tick(&broker, &mut link, &scenario, &report)?;
        delivered += monitor.drain().len() as u64;
        accumulator.add_tick(&report);
        if accumulator.monotone_violated() {
            return Err(RunError::Invariant(
                "coverage fraction decreased between ticks".into(),
            ));
        }
        let line = Record::Tick { report };
        jsonl.push_str(&serde_json::to_string(&line).expect("tick serializes"));
        jsonl.push('\n');
    }

    for (i, behavior) in behaviors.iter().enumerate() {
        if behavior.route_completed() == Some(false) {
            log::warn!(
                "robot {i}: waypoint route not completed within {} s",
                scenario.duration_s
            );
        }
    }

    // Broker conservation on the lossless loopback: everything published is
    // delivered to the monitor, nothing dropped.
    let (published, broker_delivered, dropped) = broker.counters();
    if broker_delivered != published || dropped != 0 || delivered != published {
        return Err(RunError::Invariant(format!(
            "loopback lost frames: published {published}, delivered {broker_delivered}, drained {delivered}, dropped {dropped}"
        )));
    }

    // The live mapping grid and the one rebuilt from telemetry must agree
    // bit for bit, or the summary would not be replayable.
    if let (Some(live), Some(rebuilt)) = (behaviors[0].grid(), accumulator.grid()) {
        if live.log_odds != rebuilt.log_odds {
            return Err(RunError::Invariant(
                "telemetry-rebuilt occupancy grid diverged from the live grid".into(),
            ));
        }
    }

    let summary = accumulator.finish();
    if published != summary.frames_published {
        return Err(RunError::Invariant(format!(
            "bandwidth tally desynchronized: broker {published}, accumulator {}",
            summary.frames_published
        )));
    }
    let line = Record::Summary {
        summary: summary.clone(),
    };
    jsonl.push_str(&serde_json::to_string(&line).expect("summary serializes"));
    jsonl.push('\n');

    let grid = behaviors
        .into_iter()
        .find_map(|b| b.grid().cloned());
    Ok(SimulationOutput {
        summary,
        jsonl,
        grid,
    })
}

fn publish_tick(
    broker: &Broker,
    link: &mut LoopbackLink,
    scenario: &Scenario,
    report: &TickReport,
) -> Result<(), RunError> {
    let axle = scenario.geometry.axle_length;
    for row in &report.robots {
        let v = (row.filtered_mps[0] + row.filtered_mps[1]) / 2.0;
        let w = (row.filtered_mps[1] - row.filtered_mps[0]) / axle;
        let odom = OdomMsg {
            pose: row.est_pose,
            velocity: [v, 0.0, w],
        };
        let mut laser = LaserMsg::default();
        for (k, d) in row.ir_m.iter().enumerate().take(8) {
            laser.ranges_m[k] = *d as f32;
            laser.intensities[k] = row.ir_adc[k];
        }
        let imu = ImuMsg {
            accel: [0.0, 0.0, 0.0],
            gyro: [0.0, 0.0, w as f32],
        };
        let led = LedMsg { colors: row.led };
        let cmd = CmdVelMsg {
            linear: row.cmd[0],
            angular: row.cmd[1],
        };
        for (topic, payload) in [
            (TOPIC_ODOM, odom.encode()),
            (TOPIC_LASER, laser.encode()),
            (TOPIC_IMU, imu.encode()),
            (TOPIC_LED, led.encode()),
            (TOPIC_CMD_VEL, cmd.encode()),
        ] {
            let payload = link.transfer(topic, &payload)?;
            broker
                .publish(topic, &payload)
                .map_err(|e| RunError::Invariant(format!("publish failed: {e}")))?;
        }
    }
    Ok(())
}

/// Load a scenario file, apply overrides, run it, and write the artifacts:
/// `<name>.jsonl`, `<name>_summary.json`, and for mapping runs with map
/// output enabled `<name>_map.pgm` + `<name>_map.txt`.
pub fn run_scenario_file(path: &Path, opts: &RunOptions) -> Result<RunArtifacts, RunError> {
    let mut scenario = Scenario::from_path(path).map_err(config_err)?;
    if let Some(seed) = opts.seed {
        scenario.seed = seed;
    }
    if let Some(duration) = opts.duration_s {
        if !(duration > 0.0) {
            return Err(RunError::Config("duration_s: must be positive".into()));
        }
        scenario.duration_s = duration;
    }
    let out_dir = opts
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&scenario.output.dir));
    std::fs::create_dir_all(&out_dir)?;

    let output = simulate(&scenario)?;

    let base = out_dir.join(&scenario.name);
    let jsonl_path = base.with_extension("jsonl");
    std::fs::write(&jsonl_path, &output.jsonl)?;
    let summary_path = out_dir.join(format!("{}_summary.json", scenario.name));
    let mut summary_json = serde_json::to_string_pretty(&output.summary).expect("serializes");
    summary_json.push('\n');
    std::fs::write(&summary_path, summary_json)?;

    let map_path = match (&output.grid, scenario.output.write_map) {
        (Some(grid), true) => {
            let pgm_path = out_dir.join(format!("{}_map.pgm", scenario.name));
            let mut pgm = Vec::new();
            grid.write_pgm(&mut pgm)?;
            std::fs::write(&pgm_path, pgm)?;
            let meta_path = out_dir.join(format!("{}_map.txt", scenario.name));
            let mut meta = Vec::new();
            grid.write_meta(&mut meta)?;
            std::fs::write(&meta_path, meta)?;
            Some(pgm_path)
        }
        _ => None,
    };

    Ok(RunArtifacts {
        summary: output.summary,
        jsonl_path,
        summary_path,
        map_path,
    })
}

/// Write-through helper used by the CLI to show the summary on stdout.
pub fn print_summary<W: Write>(summary: &RunSummary, mut out: W) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    writeln!(out, "{text}")
}
