//! Topic bandwidth arithmetic and fleet-size capacity estimates.
//!
//! Packet sizes count the transport overhead (20 bytes per TCP packet) plus
//! the 8 bytes of frame serialization on top of the message data. KB here is
//! 1024 bytes; a 150 Mbps consumer link is 19200 KB/s under that convention.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopicDirection {
    Publish,
    Subscribe,
}

/// Registry entry for one topic's traffic accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSpec {
    pub name: String,
    pub topic_id: u16,
    /// Full per-message packet size (KB, 1024-byte).
    pub packet_size_kb: f64,
    pub direction: TopicDirection,
    pub nominal_rate_hz: f64,
    /// Bench-measured bandwidth (KB/s), when available. Measured rates can
    /// fall slightly short of packet_size * rate when the publisher misses
    /// its nominal period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_kbps: Option<f64>,
}

impl TopicSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.packet_size_kb > 0.0) {
            return Err(format!("topic {}: packet_size_kb must be positive", self.name));
        }
        if !(self.nominal_rate_hz > 0.0) {
            return Err(format!("topic {}: nominal_rate_hz must be positive", self.name));
        }
        Ok(())
    }

    /// Bandwidth figure used in totals: the measured value when present,
    /// otherwise the formula.
    pub fn effective_kbps(&self) -> f64 {
        self.measured_kbps.unwrap_or_else(|| topic_bandwidth(self))
    }
}

/// Link and per-message overhead assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthBudget {
    /// Transport (TCP) overhead per packet, bytes.
    pub transport_overhead_bytes: u32,
    /// Frame serialization overhead per message, bytes.
    pub framing_overhead_bytes: u32,
    /// Link capacity in KB/s (KB = 1024 bytes).
    pub link_capacity_kbps: f64,
}

impl Default for BandwidthBudget {
    /// 150 Mbps infrastructure-mode link: 150e6/8/1024/1024 MB/s = 18.3
    /// MB/s, carried here as 19200 KB/s (150_000_000 / 8 / 1024 bits).
    fn default() -> Self {
        BandwidthBudget {
            transport_overhead_bytes: 20,
            framing_overhead_bytes: 8,
            link_capacity_kbps: 19200.0,
        }
    }
}

/// Nominal bandwidth of one topic: packet size times rate (KB/s).
pub fn topic_bandwidth(spec: &TopicSpec) -> f64 {
    spec.packet_size_kb * spec.nominal_rate_hz
}

/// Full packet size (KB) for a message body of `data_len` bytes.
pub fn packet_size_kb(data_len: usize, budget: &BandwidthBudget) -> f64 {
    (data_len as u32 + budget.transport_overhead_bytes + budget.framing_overhead_bytes) as f64
        / 1024.0
}

/// How many robots the link supports: `floor(capacity / per_robot_total)`.
pub fn fleet_capacity(per_robot_total_kbps: f64, budget: &BandwidthBudget) -> u64 {
    assert!(per_robot_total_kbps > 0.0);
    (budget.link_capacity_kbps / per_robot_total_kbps).floor() as u64
}

/// A topic registry file: structured text (TOML) listing the topics one
/// robot exchanges, with an optional link capacity override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicRegistry {
    #[serde(default)]
    pub link_capacity_kbps: Option<f64>,
    #[serde(default)]
    pub topics: Vec<TopicSpec>,
}

impl TopicRegistry {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let registry: TopicRegistry =
            toml::from_str(text).map_err(|e| format!("registry parse error: {e}"))?;
        registry.validate()?;
        Ok(registry)
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.topics {
            t.validate()?;
            if !seen.insert(t.topic_id) {
                return Err(format!(
                    "topic {}: topic_id {} is not unique in the registry",
                    t.name, t.topic_id
                ));
            }
        }
        if let Some(cap) = self.link_capacity_kbps {
            if !(cap > 0.0) {
                return Err("link_capacity_kbps must be positive".into());
            }
        }
        Ok(())
    }

    /// Per-robot total bandwidth: measured figures where present, formula
    /// otherwise.
    pub fn total_kbps(&self) -> f64 {
        self.topics.iter().map(|t| t.effective_kbps()).sum()
    }

    pub fn budget(&self) -> BandwidthBudget {
        let mut budget = BandwidthBudget::default();
        if let Some(cap) = self.link_capacity_kbps {
            budget.link_capacity_kbps = cap;
        }
        budget
    }
}

/// The default robot's topic registry with bench-measured figures.
pub fn reference_topics() -> Vec<TopicSpec> {
    let row = |name: &str, id: u16, size: f64, dir: TopicDirection, measured: f64| TopicSpec {
        name: name.to_string(),
        topic_id: id,
        packet_size_kb: size,
        direction: dir,
        nominal_rate_hz: 20.0,
        measured_kbps: Some(measured),
    };
    vec![
        row("/imu", super::messages::TOPIC_IMU, 0.320, TopicDirection::Publish, 5.45),
        row("/laser", super::messages::TOPIC_LASER, 0.130, TopicDirection::Publish, 2.53),
        row("/odom", super::messages::TOPIC_ODOM, 0.730, TopicDirection::Publish, 14.18),
        row("/led", super::messages::TOPIC_LED, 0.016, TopicDirection::Subscribe, 0.32),
        row("/cmd_vel", super::messages::TOPIC_CMD_VEL, 0.048, TopicDirection::Subscribe, 0.96),
    ]
}
