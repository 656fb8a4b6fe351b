//! Quadrature encoder decoding and wheel velocity estimation.
//!
//! The rotary encoder emits two square waves 90 degrees out of phase. One
//! Gray-code step of the pair (00 -> 01 -> 11 -> 10 -> 00) is one count in
//! the forward direction; the reverse sequence counts down. A transition
//! where both bits flip at once is physically impossible for a single step
//! and is tallied instead of decoded.

use super::SensingError;
use crate::kinematics::RobotGeometry;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Two-bit encoder phase, `(A << 1) | B`.
pub type QuadraturePhase = u8;

/// Outcome of feeding one new phase sample to the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureTransition {
    /// Phase unchanged.
    Hold,
    /// One Gray step forward; count incremented.
    Forward,
    /// One Gray step backward; count decremented.
    Backward,
    /// Both bits flipped; count untouched, invalid tally incremented.
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureState {
    phase: QuadraturePhase,
    count: i64,
    invalid_transitions: u64,
}

impl Default for QuadratureState {
    fn default() -> Self {
        QuadratureState {
            phase: 0b00,
            count: 0,
            invalid_transitions: 0,
        }
    }
}

impl QuadratureState {
    pub fn new(phase: QuadraturePhase) -> Self {
        assert!(phase < 4, "phase is a 2-bit value");
        QuadratureState {
            phase,
            ..QuadratureState::default()
        }
    }

    pub fn phase(&self) -> QuadraturePhase {
        self.phase
    }

    pub fn count(&self) -> i64 {
        self.count
    }

    pub fn invalid_transitions(&self) -> u64 {
        self.invalid_transitions
    }

    /// Decode one new phase sample, updating count or the invalid tally.
    pub fn step(&mut self, new_phase: QuadraturePhase) -> QuadratureTransition {
        assert!(new_phase < 4, "phase is a 2-bit value");
        // Gray decode: sequence position 0..3 for phases 00,01,11,10.
        let old_pos = gray_position(self.phase);
        let new_pos = gray_position(new_phase);
        let transition = match (new_pos + 4 - old_pos) % 4 {
            0 => QuadratureTransition::Hold,
            1 => {
                self.count += 1;
                QuadratureTransition::Forward
            }
            3 => {
                self.count -= 1;
                QuadratureTransition::Backward
            }
            _ => {
                self.invalid_transitions += 1;
                QuadratureTransition::Invalid
            }
        };
        if transition != QuadratureTransition::Invalid {
            self.phase = new_phase;
        } else {
            // The disc really is wherever it is now; resynchronize so the
            // next legal step decodes.
            self.phase = new_phase;
        }
        transition
    }

    /// Phase that encodes `count` positions forward of the cycle origin.
    pub fn phase_for_count(count: i64) -> QuadraturePhase {
        const CYCLE: [QuadraturePhase; 4] = [0b00, 0b01, 0b11, 0b10];
        CYCLE[count.rem_euclid(4) as usize]
    }
}

fn gray_position(phase: QuadraturePhase) -> u8 {
    phase ^ (phase >> 1)
}

/// Wheel angular velocity (rad/s) from a count delta over `dt` seconds:
/// `w = dcounts * (2*PI / counts_per_rev) / dt`.
pub fn encoder_velocity(
    dcounts: i64,
    dt: f64,
    geom: &RobotGeometry,
) -> Result<f64, SensingError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SensingError::InvalidInterval);
    }
    Ok(dcounts as f64 * (TAU / geom.counts_per_wheel_rev as f64) / dt)
}
