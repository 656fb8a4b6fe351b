//! Command-line scenario runner.
//!
//! Subcommands:
//! - `run <scenario.toml>`: execute a simulation, write JSONL telemetry and
//!   a summary; exit 0 on success, 2 on configuration errors, 3 on runtime
//!   invariant violations.
//! - `budget <topics.toml>`: per-topic bandwidth, per-robot total, and the
//!   fleet size a link supports.
//! - `calibrate <samples.txt>`: least-squares IR model fit from a bench
//!   sweep, with a ranging error table.
//! - `replay <run.jsonl>`: recompute the summary from telemetry and verify
//!   it matches the stored record.
//!
//! Set `HEROSIM_LOG` (error/warn/info/debug/trace) for logging verbosity.

use clap::{Parser, Subcommand};
use herosim::protocol::{fleet_capacity, topic_bandwidth, TopicRegistry};
use herosim::runner::{print_summary, replay_check, run_scenario_file, RunError, RunOptions};
use herosim::sensing::{ir_calibrate, ir_forward, ir_invert, read_calibration_samples};
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "herosim", version, about = "Deterministic 2D swarm-robot simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file headlessly.
    Run {
        /// Scenario TOML file.
        file: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for telemetry and summary files.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the simulated duration (seconds).
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Bandwidth accounting over a topic registry file.
    Budget {
        /// Topic registry TOML file.
        file: PathBuf,
        /// Link capacity in KB/s (1024-byte KB).
        #[arg(long)]
        capacity: Option<f64>,
    },
    /// Fit an IR sensor model from a two-column bench sample file.
    Calibrate {
        /// Sample file: `distance_m adc_counts` per line, `#` comments.
        file: PathBuf,
    },
    /// Verify a telemetry file's summary by recomputing it.
    Replay {
        /// JSONL telemetry file produced by `run`.
        file: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("HEROSIM_LOG")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            file,
            seed,
            out,
            duration,
        } => run(file, seed, out, duration),
        Command::Budget { file, capacity } => budget(file, capacity),
        Command::Calibrate { file } => calibrate(file),
        Command::Replay { file } => replay(file),
    };
    ExitCode::from(code)
}

fn run(file: PathBuf, seed: Option<u64>, out: Option<PathBuf>, duration: Option<f64>) -> u8 {
    let opts = RunOptions {
        seed,
        out_dir: out,
        duration_s: duration,
    };
    match run_scenario_file(&file, &opts) {
        Ok(artifacts) => {
            print_summary(&artifacts.summary, std::io::stdout()).ok();
            eprintln!("telemetry: {}", artifacts.jsonl_path.display());
            eprintln!("summary:   {}", artifacts.summary_path.display());
            if let Some(map) = &artifacts.map_path {
                eprintln!("map:       {}", map.display());
            }
            0
        }
        Err(e) => fail(e),
    }
}

fn fail(e: RunError) -> u8 {
    eprintln!("error: {e}");
    e.exit_code() as u8
}

fn budget(file: PathBuf, capacity: Option<f64>) -> u8 {
    let text = match std::fs::read_to_string(&file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return 2;
        }
    };
    let registry = match TopicRegistry::from_toml(&text) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let mut budget = registry.budget();
    if let Some(cap) = capacity {
        if !(cap > 0.0) {
            eprintln!("error: --capacity must be positive");
            return 2;
        }
        budget.link_capacity_kbps = cap;
    }
    println!(
        "{:<12} {:>12} {:>8} {:>14} {:>14}",
        "topic", "packet (KB)", "rate", "formula (KBps)", "measured (KBps)"
    );
    for t in &registry.topics {
        println!(
            "{:<12} {:>12.3} {:>8.1} {:>14.2} {:>14}",
            t.name,
            t.packet_size_kb,
            t.nominal_rate_hz,
            topic_bandwidth(t),
            t.measured_kbps
                .map(|m| format!("{m:.2}"))
                .unwrap_or_else(|| "-".to_string()),
        );
    }
    let total = registry.total_kbps();
    println!("per-robot total: {total:.2} KBps");
    if registry.topics.is_empty() || total <= 0.0 {
        println!("fleet capacity: (no traffic, capacity report suppressed)");
    } else {
        let robots = fleet_capacity(total, &budget);
        println!(
            "fleet capacity: {} robots on a {:.0} KBps link",
            robots, budget.link_capacity_kbps
        );
    }
    0
}

fn calibrate(file: PathBuf) -> u8 {
    let reader = match std::fs::File::open(&file) {
        Ok(f) => BufReader::new(f),
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return 2;
        }
    };
    let samples = match read_calibration_samples(reader) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    // The model is singular at zero range; bench sweeps often include a
    // contact row, so drop anything closer than 1 cm with a warning.
    let (usable, skipped): (Vec<_>, Vec<_>) =
        samples.into_iter().partition(|s| s.distance_m >= 0.01);
    for s in &skipped {
        eprintln!(
            "warning: skipping sample at {} m (below the 1 cm model floor)",
            s.distance_m
        );
    }
    let fit = match ir_calibrate(&usable) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return 3;
        }
    };
    println!("alpha: {:.6e} ADC-counts*m^2", fit.model.alpha);
    println!("beta:  {:.4} ADC-counts", fit.model.beta);
    println!("residual RMS: {:.4e} counts over {} samples", fit.residual_rms, usable.len());
    println!();
    println!("{:>12} {:>9} {:>12} {:>11}", "distance (m)", "ADC", "inverted (m)", "error (m)");
    for cm in 2..=20 {
        let x = cm as f64 / 100.0;
        let reading = match ir_forward(&fit.model, x, 0.0) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {e}");
                return 3;
            }
        };
        let inverted = ir_invert(&fit.model, reading, 0.0);
        println!(
            "{:>12.2} {:>9} {:>12.4} {:>11.2e}",
            x,
            reading,
            inverted,
            (inverted - x).abs()
        );
    }
    0
}

fn replay(file: PathBuf) -> u8 {
    let reader = match std::fs::File::open(&file) {
        Ok(f) => BufReader::new(f),
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return 2;
        }
    };
    match replay_check(reader) {
        Ok(report) => {
            if report.matches() {
                println!(
                    "replay ok: {} ticks, summary reproduced exactly",
                    report.ticks
                );
                0
            } else {
                eprintln!("replay mismatch:");
                eprintln!(
                    "stored:     {}",
                    serde_json::to_string(&report.stored).unwrap()
                );
                eprintln!(
                    "recomputed: {}",
                    serde_json::to_string(&report.recomputed).unwrap()
                );
                3
            }
        }
        Err(e) => fail(e),
    }
}
