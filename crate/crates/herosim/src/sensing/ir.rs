//! Infrared reflectance ranging: forward ADC model, inversion back to
//! distance, and least-squares calibration from bench samples.
//!
//! The reflected intensity of an emitter/receiver pair against a surface at
//! distance `x` and incidence angle `th` is modeled as
//! `s(x, th) = alpha/x^2 * cos(th) + beta`, read through an ADC of
//! `adc_bits` resolution. `alpha` lumps reflectivity, emitter power and
//! receiver sensitivity (ADC-counts * m^2); `beta` is the amplifier/ambient
//! offset in counts.

use super::SensingError;
use serde::{Deserialize, Serialize};
use std::io::BufRead;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrSensorModel {
    /// Reflectivity/power lump (ADC-counts * m^2).
    pub alpha: f64,
    /// Amplifier and ambient offset (ADC counts).
    pub beta: f64,
    /// Ranging ceiling (m); readings at or below `beta` invert to this.
    pub max_range: f64,
    /// Ranging floor (m) guarding the `1/x^2` blow-up near contact.
    pub min_range: f64,
    /// ADC resolution in bits.
    pub adc_bits: u8,
}

impl Default for IrSensorModel {
    /// Default emitter/receiver pair: saturates the 10-bit ADC right at the
    /// 2 cm datasheet floor and still clears the offset at the 20 cm
    /// extended-range ceiling.
    fn default() -> Self {
        IrSensorModel {
            alpha: 0.4,
            beta: 10.0,
            max_range: 0.20,
            min_range: 0.01,
            adc_bits: 10,
        }
    }
}

impl IrSensorModel {
    /// Largest representable ADC reading, `2^adc_bits - 1`.
    pub fn adc_max(&self) -> u16 {
        ((1u32 << self.adc_bits) - 1) as u16
    }
}

/// Ring of range sensors around the body; bearings are body-frame radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRing {
    pub bearings: Vec<f64>,
}

impl Default for SensorRing {
    /// Eight transceivers at 45-degree increments, index 0 facing forward.
    fn default() -> Self {
        SensorRing {
            bearings: (0..8).map(|k| k as f64 * std::f64::consts::FRAC_PI_4).collect(),
        }
    }
}

impl SensorRing {
    pub fn count(&self) -> usize {
        self.bearings.len()
    }
}

/// Predicted ADC reading for a target at `distance` and `incidence`.
///
/// Clamped to `[0, 2^adc_bits - 1]` and rounded to the nearest count.
/// Beyond `max_range` (or past grazing incidence) only the offset `beta`
/// returns. `distance <= 0` is rejected.
pub fn ir_forward(
    model: &IrSensorModel,
    distance: f64,
    incidence: f64,
) -> Result<u16, SensingError> {
    if !(distance > 0.0) {
        return Err(SensingError::InvalidGeometry("distance must be positive"));
    }
    let cos_inc = incidence.cos().max(0.0);
    let raw = if distance > model.max_range {
        model.beta
    } else {
        model.alpha / (distance * distance) * cos_inc + model.beta
    };
    Ok(raw.round().clamp(0.0, model.adc_max() as f64) as u16)
}

/// Invert an ADC reading to a distance estimate (m).
///
/// `x = sqrt(alpha * cos(incidence) / (reading - beta))`, clamped to
/// `[min_range, max_range]`. Readings at or below the offset carry no
/// reflected signal and map to the `max_range` sentinel rather than failing;
/// a full-scale reading says only "at or inside the saturation distance" and
/// maps to `min_range`.
pub fn ir_invert(model: &IrSensorModel, reading: u16, incidence: f64) -> f64 {
    if reading >= model.adc_max() {
        return model.min_range;
    }
    let signal = reading as f64 - model.beta;
    let cos_inc = incidence.cos();
    if signal <= 0.0 || cos_inc <= 0.0 {
        return model.max_range;
    }
    (model.alpha * cos_inc / signal)
        .sqrt()
        .clamp(model.min_range, model.max_range)
}

/// Reject ambient light: reading with the emitter on minus the reading with
/// it off, floored at zero.
pub fn ambient_compensate(lit: u16, unlit: u16) -> u16 {
    lit.saturating_sub(unlit)
}

/// One bench calibration point: target distance and compensated ADC reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSample {
    pub distance_m: f64,
    pub adc_counts: f64,
}

/// Result of [`ir_calibrate`]: the fitted model plus the fit quality.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationFit {
    pub model: IrSensorModel,
    pub residual_rms: f64,
}

/// Least-squares fit of `reading = alpha * (1/x^2) + beta` over bench
/// samples taken at normal incidence.
///
/// The model is linear in `(1/x^2, 1)`, so the normal equations solve it
/// directly. At least two samples with distinct distances are required;
/// a rank-deficient set (all the same distance) is a calibration failure.
pub fn ir_calibrate(samples: &[CalibrationSample]) -> Result<CalibrationFit, SensingError> {
    if samples.len() < 2 {
        return Err(SensingError::CalibrationFailure(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    if let Some(bad) = samples.iter().find(|s| !(s.distance_m > 0.0)) {
        return Err(SensingError::CalibrationFailure(format!(
            "non-positive sample distance {}",
            bad.distance_m
        )));
    }
    let n = samples.len() as f64;
    let u: Vec<f64> = samples
        .iter()
        .map(|s| 1.0 / (s.distance_m * s.distance_m))
        .collect();
    let u_mean = u.iter().sum::<f64>() / n;
    let y_mean = samples.iter().map(|s| s.adc_counts).sum::<f64>() / n;
    let mut s_uu = 0.0;
    let mut s_uy = 0.0;
    for (ui, s) in u.iter().zip(samples) {
        s_uu += (ui - u_mean) * (ui - u_mean);
        s_uy += (ui - u_mean) * (s.adc_counts - y_mean);
    }
    if s_uu <= 0.0 || !s_uu.is_finite() {
        return Err(SensingError::CalibrationFailure(
            "samples share a single distance; the fit is rank-deficient".into(),
        ));
    }
    let alpha = s_uy / s_uu;
    let beta = y_mean - alpha * u_mean;
    let sq_sum: f64 = u
        .iter()
        .zip(samples)
        .map(|(ui, s)| {
            let r = s.adc_counts - (alpha * ui + beta);
            r * r
        })
        .sum();
    Ok(CalibrationFit {
        model: IrSensorModel {
            alpha,
            beta,
            ..IrSensorModel::default()
        },
        residual_rms: (sq_sum / n).sqrt(),
    })
}

/// Read calibration samples from a two-column text stream: `distance_m
/// adc_counts`, one pair per line, `#` starts a comment, blank lines ignored.
pub fn read_calibration_samples<R: BufRead>(
    reader: R,
) -> Result<Vec<CalibrationSample>, SensingError> {
    let mut samples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let parse = |txt: Option<&str>, what: &str| -> Result<f64, SensingError> {
            txt.ok_or_else(|| SensingError::SampleParse {
                line: line_no,
                reason: format!("missing {what} column"),
            })?
            .parse::<f64>()
            .map_err(|e| SensingError::SampleParse {
                line: line_no,
                reason: format!("bad {what}: {e}"),
            })
        };
        let distance_m = parse(parts.next(), "distance")?;
        let adc_counts = parse(parts.next(), "reading")?;
        if parts.next().is_some() {
            return Err(SensingError::SampleParse {
                line: line_no,
                reason: "expected exactly two columns".into(),
            });
        }
        samples.push(CalibrationSample {
            distance_m,
            adc_counts,
        });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn model(alpha: f64, beta: f64) -> IrSensorModel {
        IrSensorModel {
            alpha,
            beta,
            ..IrSensorModel::default()
        }
    }

    #[test]
    fn forward_hand_value() {
        // alpha=40e-4, beta=10, x=0.02, th=0: 0.004/0.0004 + 10 = 20.
        let m = model(40e-4, 10.0);
        assert_eq!(ir_forward(&m, 0.02, 0.0).unwrap(), 20);
    }

    #[test]
    fn forward_cosine_halves_at_sixty_degrees() {
        let m = model(40e-4, 10.0);
        let head_on = ir_forward(&m, 0.02, 0.0).unwrap();
        let slanted = ir_forward(&m, 0.02, std::f64::consts::FRAC_PI_3).unwrap();
        // cos(60 deg) = 0.5 halves the reflected term: (20-10)/2 + 10 = 15.
        assert_eq!(head_on, 20);
        assert_eq!(slanted, 15);
        let negative = ir_forward(&m, 0.02, -std::f64::consts::FRAC_PI_3).unwrap();
        assert_eq!(negative, slanted);
    }

    #[test]
    fn forward_clamps_to_adc_full_scale() {
        let m = IrSensorModel::default();
        assert_eq!(ir_forward(&m, 0.002, 0.0).unwrap(), 1023);
    }

    #[test]
    fn forward_beyond_max_range_returns_offset_floor() {
        let m = IrSensorModel::default();
        assert_eq!(ir_forward(&m, 0.35, 0.0).unwrap(), 10);
    }

    #[test]
    fn forward_rejects_non_positive_distance() {
        let m = IrSensorModel::default();
        assert!(ir_forward(&m, 0.0, 0.0).is_err());
        assert!(ir_forward(&m, -0.1, 0.0).is_err());
    }

    #[test]
    fn forward_strictly_decreasing_up_to_quantization() {
        let m = IrSensorModel::default();
        let mut prev = u16::MAX;
        let mut x = 0.02;
        while x <= 0.20 {
            let r = ir_forward(&m, x, 0.0).unwrap();
            assert!(r <= prev, "reading rose from {prev} to {r} at x={x}");
            prev = r;
            x += 0.001;
        }
    }

    #[test]
    fn invert_round_trip_within_one_adc_step() {
        let m = IrSensorModel::default();
        let mut x = 0.02;
        while x <= 0.20 {
            let reading = ir_forward(&m, x, 0.0).unwrap();
            let est = ir_invert(&m, reading, 0.0);
            // Rounding moves the reading by at most half a count; the
            // distance-equivalent of one full count at x is x^3/(2*alpha).
            let one_count = x.powi(3) / (2.0 * m.alpha);
            assert!(
                (est - x).abs() <= one_count + 1e-12,
                "x={x} est={est} tol={one_count}"
            );
            x += 0.0005;
        }
    }

    #[test]
    fn invert_sentinels() {
        let m = IrSensorModel::default();
        // No reflected signal: offset-only (or weaker) readings say "nothing
        // in range".
        assert_eq!(ir_invert(&m, 10, 0.0), m.max_range);
        assert_eq!(ir_invert(&m, 3, 0.0), m.max_range);
        // Saturated ADC clamps to the near floor.
        assert_eq!(ir_invert(&m, 1023, 0.0), m.min_range);
    }

    #[test]
    fn ambient_compensation_floors_at_zero() {
        assert_eq!(ambient_compensate(500, 100), 400);
        assert_eq!(ambient_compensate(100, 100), 0);
        assert_eq!(ambient_compensate(90, 100), 0);
    }

    #[test]
    fn calibrate_recovers_noise_free_model() {
        let truth = model(0.4, 10.0);
        let samples: Vec<CalibrationSample> = (2..=20)
            .map(|cm| {
                let x = cm as f64 / 100.0;
                CalibrationSample {
                    distance_m: x,
                    adc_counts: truth.alpha / (x * x) + truth.beta,
                }
            })
            .collect();
        let fit = ir_calibrate(&samples).unwrap();
        assert!((fit.model.alpha - truth.alpha).abs() / truth.alpha < 1e-9);
        assert!((fit.model.beta - truth.beta).abs() / truth.beta < 1e-9);
        assert!(fit.residual_rms < 1e-9);
    }

    #[test]
    fn calibrate_two_points_interpolates_exactly() {
        let samples = [
            CalibrationSample {
                distance_m: 0.05,
                adc_counts: 170.0,
            },
            CalibrationSample {
                distance_m: 0.10,
                adc_counts: 50.0,
            },
        ];
        let fit = ir_calibrate(&samples).unwrap();
        assert!(fit.residual_rms < 1e-9);
        for s in &samples {
            let pred = fit.model.alpha / (s.distance_m * s.distance_m) + fit.model.beta;
            assert!((pred - s.adc_counts).abs() < 1e-9);
        }
    }

    #[test]
    fn calibrate_rejects_rank_deficient_set() {
        let samples = [
            CalibrationSample {
                distance_m: 0.05,
                adc_counts: 170.0,
            },
            CalibrationSample {
                distance_m: 0.05,
                adc_counts: 171.0,
            },
        ];
        assert!(matches!(
            ir_calibrate(&samples),
            Err(SensingError::CalibrationFailure(_))
        ));
        assert!(ir_calibrate(&samples[..1]).is_err());
    }

    #[test]
    fn calibrate_noisy_monte_carlo_recovers_alpha_within_five_percent() {
        // 100 seeded trials with sigma = 2 counts of additive noise on the
        // bench sweep; every trial must land within 5% on alpha.
        let truth = IrSensorModel::default();
        let noise = Normal::new(0.0, 2.0).unwrap();
        for seed in 0..100u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<CalibrationSample> = (2..=20)
                .map(|cm| {
                    let x = cm as f64 / 100.0;
                    CalibrationSample {
                        distance_m: x,
                        adc_counts: truth.alpha / (x * x) + truth.beta + noise.sample(&mut rng),
                    }
                })
                .collect();
            let fit = ir_calibrate(&samples).unwrap();
            let rel = (fit.model.alpha - truth.alpha).abs() / truth.alpha;
            assert!(rel < 0.05, "seed {seed}: alpha off by {rel}");
        }
    }

    #[test]
    fn sample_file_parses_comments_and_rejects_garbage() {
        let text = "# bench sweep\n0.02 996\n0.03  454 # mid\n\n0.20 20\n";
        let samples = read_calibration_samples(text.as_bytes()).unwrap();
        assert_eq!(samples.len(), 3);
        assert_eq!(samples[1].distance_m, 0.03);
        assert_eq!(samples[1].adc_counts, 454.0);

        let bad = read_calibration_samples("0.02 abc\n".as_bytes());
        assert!(matches!(bad, Err(SensingError::SampleParse { line: 1, .. })));
        let bad = read_calibration_samples("0.02 1 2 3\n".as_bytes());
        assert!(bad.is_err());
    }

    #[test]
    fn default_ring_has_eight_bearings_at_45_degrees() {
        let ring = SensorRing::default();
        assert_eq!(ring.count(), 8);
        for (k, b) in ring.bearings.iter().enumerate() {
            assert!((b - k as f64 * std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        }
    }
}
