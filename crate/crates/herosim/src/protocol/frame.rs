//! Byte-level frame grammar and the resynchronizing stream decoder.
//!
//! Layout, 8 bytes of framing around the payload:
//!
//! ```text
//! FF FE | len_lo len_hi | len_cksum | topic_lo topic_hi | payload... | cksum
//! ```
//!
//! `len_cksum = 255 - ((len_lo + len_hi) % 256)` guards the length field;
//! `cksum = 255 - ((topic_lo + topic_hi + sum(payload)) % 256)` guards the
//! rest. Both checksums catch any single-byte corruption (two compensating
//! flips can evade an 8-bit sum).

use super::ProtocolError;

/// Frame start marker.
pub const SYNC: [u8; 2] = [0xFF, 0xFE];
/// Fixed framing bytes per message: sync(2) + length(2) + length checksum(1)
/// + topic(2) + payload checksum(1).
pub const FRAME_OVERHEAD: usize = 8;

/// One decoded frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub topic_id: u16,
    pub payload: Vec<u8>,
}

fn length_checksum(len: u16) -> u8 {
    let [lo, hi] = len.to_le_bytes();
    255 - (lo.wrapping_add(hi))
}

fn payload_checksum(topic_id: u16, payload: &[u8]) -> u8 {
    let [lo, hi] = topic_id.to_le_bytes();
    let sum = payload
        .iter()
        .fold(lo as u32 + hi as u32, |acc, &b| acc + b as u32);
    255 - (sum % 256) as u8
}

/// Serialize one frame. Deterministic and byte-exact; payloads above 65535
/// bytes do not fit the 16-bit length field.
pub fn encode_frame(topic_id: u16, payload: &[u8]) -> Result<Vec<u8>, ProtocolError> {
    let len = u16::try_from(payload.len()).map_err(|_| ProtocolError::FrameTooLarge(payload.len()))?;
    let mut out = Vec::with_capacity(FRAME_OVERHEAD + payload.len());
    out.extend_from_slice(&SYNC);
    out.extend_from_slice(&len.to_le_bytes());
    out.push(length_checksum(len));
    out.extend_from_slice(&topic_id.to_le_bytes());
    out.extend_from_slice(payload);
    out.push(payload_checksum(topic_id, payload));
    Ok(out)
}

/// Incremental frame decoder over an arbitrary byte stream.
///
/// Feed bytes with [`FrameDecoder::push`] and drain frames with
/// [`FrameDecoder::next_frame`]. Garbage between frames is skipped while
/// scanning for the sync pair; frames failing a checksum are dropped and
/// counted, never surfaced or fatal.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    start: usize,
    corrupted: u64,
    garbage_bytes: u64,
}

impl FrameDecoder {
    pub fn new() -> Self {
        FrameDecoder::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.compact();
        self.buf.extend_from_slice(bytes);
    }

    /// Frames dropped due to a checksum mismatch.
    pub fn corrupted(&self) -> u64 {
        self.corrupted
    }

    /// Bytes skipped while hunting for a sync marker.
    pub fn garbage_bytes(&self) -> u64 {
        self.garbage_bytes
    }

    fn compact(&mut self) {
        if self.start > 0 {
            self.buf.drain(..self.start);
            self.start = 0;
        }
    }

    fn pending(&self) -> &[u8] {
        &self.buf[self.start..]
    }

    /// Decode the next complete frame, or `None` when more bytes are needed.
    pub fn next_frame(&mut self) -> Option<Frame> {
        loop {
            // Hunt for the sync pair, discarding anything before it.
            while self.pending().len() >= 2 {
                let p = self.pending();
                if p[0] == SYNC[0] && p[1] == SYNC[1] {
                    break;
                }
                self.start += 1;
                self.garbage_bytes += 1;
            }
            // A lone trailing 0xFF may be half a sync marker; keep it.
            if self.pending().len() == 1 && self.pending()[0] != SYNC[0] {
                self.start += 1;
                self.garbage_bytes += 1;
            }
            let p = self.pending();
            if p.len() < 5 {
                return None;
            }
            let (len_lo, len_hi, len_ck) = (p[2], p[3], p[4]);
            if length_checksum(u16::from_le_bytes([len_lo, len_hi])) != len_ck {
                // Corrupt header: drop just the first sync byte and rescan so
                // a real frame sitting right behind survives.
                self.start += 1;
                self.corrupted += 1;
                continue;
            }
            let len = u16::from_le_bytes([len_lo, len_hi]) as usize;
            let total = FRAME_OVERHEAD + len;
            if p.len() < total {
                return None;
            }
            let topic_id = u16::from_le_bytes([p[5], p[6]]);
            let payload = &p[7..7 + len];
            if payload_checksum(topic_id, payload) != p[7 + len] {
                // Skip one byte and rescan rather than trusting the
                // announced length: a sync-looking byte pair inside garbage
                // can fabricate a plausible header, and skipping its claimed
                // extent could swallow real frames. Rescanning never skips a
                // well-formed frame whose bytes are still buffered.
                self.start += 1;
                self.corrupted += 1;
                continue;
            }
            let frame = Frame {
                topic_id,
                payload: payload.to_vec(),
            };
            self.start += total;
            return Some(frame);
        }
    }
}
