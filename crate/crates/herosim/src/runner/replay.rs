//! Recompute a run's summary from its JSONL stream alone and compare it to
//! the stored summary record; the two must match exactly.

use super::summary::{RunSummary, SummaryAccumulator};
use super::{Record, RunError};
use std::io::BufRead;

#[derive(Debug)]
pub struct ReplayReport {
    pub stored: RunSummary,
    pub recomputed: RunSummary,
    pub ticks: u64,
}

impl ReplayReport {
    /// Field-exact equality via the serialized form, so float formatting
    /// can never mask a drifted value.
    pub fn matches(&self) -> bool {
        serde_json::to_value(&self.stored).expect("serializes")
            == serde_json::to_value(&self.recomputed).expect("serializes")
    }
}

/// Parse a telemetry stream, rebuild every summary metric from the header
/// and tick records, and return both summaries for comparison.
pub fn replay_check<R: BufRead>(reader: R) -> Result<ReplayReport, RunError> {
    let mut accumulator: Option<SummaryAccumulator> = None;
    let mut stored: Option<RunSummary> = None;
    let mut ticks = 0u64;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line)
            .map_err(|e| RunError::Config(format!("line {}: {e}", idx + 1)))?;
        match record {
            Record::Header { scenario, seed } => {
                if scenario.seed != seed {
                    return Err(RunError::Config(
                        "header seed disagrees with scenario echo".into(),
                    ));
                }
                accumulator = Some(SummaryAccumulator::new(&scenario));
            }
            Record::Tick { report } => {
                let acc = accumulator
                    .as_mut()
                    .ok_or_else(|| RunError::Config("tick record before header".into()))?;
                acc.add_tick(&report);
                ticks += 1;
            }
            Record::Summary { summary } => {
                stored = Some(summary);
            }
        }
    }
    let accumulator =
        accumulator.ok_or_else(|| RunError::Config("stream has no header record".into()))?;
    let stored = stored.ok_or_else(|| RunError::Config("stream has no summary record".into()))?;
    Ok(ReplayReport {
        stored,
        recomputed: accumulator.finish(),
        ticks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::simulate;
    use crate::scenario::Scenario;

    #[test]
    fn replay_reproduces_the_stored_summary() {
        let toml = r#"
name = "replay_probe"
duration_s = 3.0
seed = 5
[arena]
width_m = 1.0
height_m = 1.0
[robots]
count = 2
[noise]
slip_sigma = 0.005
ir_sigma = 2.0
[behavior]
kind = "coverage"
"#;
        let scenario = Scenario::from_toml(toml).unwrap();
        let output = simulate(&scenario).unwrap();
        let report = replay_check(output.jsonl.as_bytes()).unwrap();
        assert_eq!(report.ticks, 60);
        assert!(
            report.matches(),
            "stored {:#?} != recomputed {:#?}",
            report.stored,
            report.recomputed
        );
    }

    #[test]
    fn tampered_stream_is_detected() {
        let toml = r#"
name = "tamper_probe"
duration_s = 1.0
seed = 1
[behavior]
kind = "idle"
"#;
        let scenario = Scenario::from_toml(toml).unwrap();
        let output = simulate(&scenario).unwrap();
        // Drop one tick line: the recomputed summary must diverge.
        let mut lines: Vec<&str> = output.jsonl.lines().collect();
        lines.remove(3);
        let tampered = lines.join("\n");
        let report = replay_check(tampered.as_bytes()).unwrap();
        assert!(!report.matches());
    }
}
