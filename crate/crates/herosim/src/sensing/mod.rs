//! Sensor and power models: infrared ranging, quadrature encoder decoding,
//! and the battery charge integrator.

mod battery;
mod encoder;
mod ir;

pub use battery::{
    draw_for_speed, time_to_depletion, BatteryModel, DRAW_COMM_LEDS_FULL_MA,
    DRAW_COMM_LEDS_HALF_MA, DRAW_MOTORS_10CMS_MA, DRAW_MOTORS_25CMS_MA, DRAW_SENSING_COMM_20HZ_MA,
    DRAW_SENSING_COMM_40HZ_MA, DRAW_SENSING_COMM_5HZ_MA, DRAW_TYPICAL_MA,
};
pub use encoder::{encoder_velocity, QuadraturePhase, QuadratureState, QuadratureTransition};
pub use ir::{
    ambient_compensate, ir_calibrate, ir_forward, ir_invert, read_calibration_samples,
    CalibrationFit, CalibrationSample, IrSensorModel, SensorRing,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SensingError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(&'static str),
    #[error("invalid interval: dt must be positive and finite")]
    InvalidInterval,
    #[error("calibration failure: {0}")]
    CalibrationFailure(String),
    #[error("sample file line {line}: {reason}")]
    SampleParse { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
