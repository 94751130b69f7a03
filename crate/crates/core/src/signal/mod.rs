//! Vibration-signal pipeline: tachometer-based angle-even resampling,
//! decimation, image encoding, dataset splitting, and the file formats that
//! carry signals between tools.
//!
//! The core idea: gear dynamics are angle-periodic, not time-periodic. With
//! one tach pulse per shaft revolution, shaft angle is reconstructed as a
//! piecewise-linear function of time (each pulse advances the angle by 2*pi)
//! and the time-even samples are linearly interpolated at uniform angle
//! increments. Mesh energy then concentrates at integer orders regardless of
//! speed fluctuation.

pub mod encode;
pub mod io;
pub mod spectrum;
pub mod split;

pub use encode::{encode_image, Encoder, ImageSample};
pub use io::{
    load_labeled_dataset, read_manifest, read_time_record, record_to_image, write_manifest,
    write_signal_csv, write_tach_csv, ManifestEntry, PipelineOptions,
};
pub use spectrum::order_spectrum;
pub use split::{split_dataset, DatasetSplit};

use crate::error::{Error, Result};

/// A time-even vibration record with tach pulses (one per shaft revolution).
#[derive(Debug, Clone)]
pub struct TimeRecord {
    /// Acceleration samples (rad/s^2), uniform at `sample_rate_hz`.
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    /// Strictly increasing pulse times, one per revolution start.
    pub tach_pulse_times_s: Vec<f64>,
}

impl TimeRecord {
    pub fn duration_s(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            (self.samples.len() - 1) as f64 / self.sample_rate_hz
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz <= 0.0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if self
            .tach_pulse_times_s
            .windows(2)
            .any(|w| w[1] <= w[0])
        {
            return Err(Error::Config(
                "tach pulse times must be strictly increasing".into(),
            ));
        }
        let dur = self.duration_s();
        if self
            .tach_pulse_times_s
            .iter()
            .any(|&t| t < 0.0 || t > dur)
        {
            return Err(Error::Config(
                "tach pulses must lie within the record's time span".into(),
            ));
        }
        Ok(())
    }

    /// Linear interpolation of the sample stream at time `t` (seconds).
    pub fn sample_at(&self, t: f64) -> f64 {
        let pos = t * self.sample_rate_hz;
        let n = self.samples.len();
        if pos <= 0.0 {
            return self.samples[0];
        }
        let j = pos.floor() as usize;
        if j >= n - 1 {
            return self.samples[n - 1];
        }
        let w = pos - j as f64;
        self.samples[j] * (1.0 - w) + self.samples[j + 1] * w
    }
}

/// An angle-even resampled signal.
#[derive(Debug, Clone)]
pub struct AngleRecord {
    pub samples: Vec<f64>,
    pub samples_per_revolution: usize,
    pub revolutions: usize,
    pub condition_label: usize,
}

impl AngleRecord {
    pub fn with_label(mut self, label: usize) -> Self {
        self.condition_label = label;
        self
    }
}

/// Resamples a time-even record to `revolutions * samples_per_revolution`
/// angle-even samples. Shaft angle is piecewise-linear between consecutive
/// tach pulses; amplitudes are linearly interpolated in time.
pub fn angle_resample(
    record: &TimeRecord,
    samples_per_revolution: usize,
    revolutions: usize,
) -> Result<AngleRecord> {
    record.validate()?;
    if samples_per_revolution == 0 || revolutions == 0 {
        return Err(Error::Config(
            "samples_per_revolution and revolutions must be >= 1".into(),
        ));
    }
    let pulses = &record.tach_pulse_times_s;
    if pulses.len() < revolutions + 1 {
        return Err(Error::InsufficientData(format!(
            "need {} tach pulses for {} revolutions, got {} ({} revolutions available)",
            revolutions + 1,
            revolutions,
            pulses.len(),
            pulses.len().saturating_sub(1)
        )));
    }
    let total = revolutions * samples_per_revolution;
    let mut samples = Vec::with_capacity(total);
    let spr = samples_per_revolution as f64;
    for k in 0..total {
        let rev = k / samples_per_revolution;
        let frac = (k % samples_per_revolution) as f64 / spr;
        let t = pulses[rev] + frac * (pulses[rev + 1] - pulses[rev]);
        samples.push(record.sample_at(t));
    }
    Ok(AngleRecord {
        samples,
        samples_per_revolution,
        revolutions,
        condition_label: 0,
    })
}

/// Plain point decimation: `out[i] = in[factor * i]`. No anti-alias filter.
pub fn decimate(record: &AngleRecord, factor: usize) -> Result<AngleRecord> {
    if factor == 0 {
        return Err(Error::Config("decimation factor must be >= 1".into()));
    }
    if factor == 1 {
        return Ok(record.clone());
    }
    if record.samples_per_revolution % factor != 0 || record.samples.len() % factor != 0 {
        return Err(Error::Config(format!(
            "length {} ({} per revolution) not divisible by decimation factor {}",
            record.samples.len(),
            record.samples_per_revolution,
            factor
        )));
    }
    let samples: Vec<f64> = record.samples.iter().step_by(factor).copied().collect();
    Ok(AngleRecord {
        samples,
        samples_per_revolution: record.samples_per_revolution / factor,
        revolutions: record.revolutions,
        condition_label: record.condition_label,
    })
}
