//! Framed topic-multiplexing wire protocol, pub/sub broker, and bandwidth
//! accounting.
//!
//! Frames carry one message for one topic over any reliable ordered byte
//! stream. The broker fans published payloads out to topic subscribers and
//! can be served over TCP or an in-process loopback pipe with identical
//! semantics.

mod broker;
mod budget;
mod frame;
pub mod messages;

pub use broker::{
    duplex_pair, Broker, BrokerServer, DuplexStream, RemoteClient, Subscription,
    DEFAULT_QUEUE_CAPACITY,
};
pub use budget::{
    fleet_capacity, packet_size_kb, reference_topics, topic_bandwidth, BandwidthBudget,
    TopicDirection, TopicRegistry, TopicSpec,
};
pub use frame::{encode_frame, Frame, FrameDecoder, FRAME_OVERHEAD, SYNC};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("frame too large: payload of {0} bytes exceeds 65535")]
    FrameTooLarge(usize),
    #[error("unknown topic {0}: publish requires a prior advertise")]
    UnknownTopic(u16),
    #[error("malformed message payload for topic {topic}: {reason}")]
    MalformedMessage { topic: u16, reason: String },
    #[error("transport error: {0}")]
    Io(#[from] std::io::Error),
    #[error("broker connection closed")]
    ConnectionClosed,
}
