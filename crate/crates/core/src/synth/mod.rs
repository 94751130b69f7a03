//! Deterministic synthetic gearbox vibration signals for the nine gear
//! health conditions, plus a disjoint synthetic source task for pretraining.
//!
//! A signal is built in the angle domain and sampled in time:
//!
//! `s(t) = mesh(theta) * gap(theta) * (1 + am(theta)) + burst(theta) + noise`
//!
//! where `mesh` is the tooth-meshing harmonic stack (orders `h * Z` for the
//! 32-tooth pinion), `gap` is a once-per-revolution multiplicative dropout
//! (missing tooth), `am` is shaft-order amplitude modulation, and `burst` is
//! an angle-locked Hann-windowed ring-down whose width, carrier, and
//! amplitude differ per fault family. Shaft angle integrates a slowly
//! fluctuating speed profile in closed form, and tach pulses are emitted at
//! every full revolution. Everything is a pure function of `(config,
//! condition, seed)`.

pub mod source;

pub use source::generate_source_task;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, label, next_standard_normal, rng_from_seed};
use crate::signal::TimeRecord;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GearboxConfig {
    pub pinion_teeth: usize,
    pub gear_teeth: usize,
    pub second_stage: (usize, usize),
    pub nominal_speed_hz: f64,
    /// Peak speed fluctuation, percent of nominal.
    pub speed_fluctuation_pct: f64,
    pub noise_std: f64,
    /// Number of mesh harmonics.
    pub harmonics: usize,
    pub sample_rate_hz: f64,
    /// Full revolutions each record covers (>= 5 so that 4 revolutions can
    /// be resampled with a margin).
    pub revolutions: usize,
    /// Seeds the mesh phases of the physical assembly. Tooth engagement is
    /// locked to the tach reference, so these phases are a property of the
    /// rig, identical across all recordings and conditions.
    pub assembly_seed: u64,
}

impl Default for GearboxConfig {
    fn default() -> Self {
        Self {
            pinion_teeth: 32,
            gear_teeth: 80,
            second_stage: (48, 64),
            nominal_speed_hz: 25.0,
            speed_fluctuation_pct: 1.0,
            noise_std: 0.12,
            harmonics: 5,
            sample_rate_hz: 20_000.0,
            revolutions: 6,
            assembly_seed: 7,
        }
    }
}

/// Fault families, each with its own burst geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultFamily {
    Healthy,
    MissingTooth,
    RootCrack,
    Spalling,
    Chipping,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub label: usize,
    pub name: String,
    pub family: FaultFamily,
    pub impulse_amplitude: f64,
    pub modulation_depth: f64,
    /// In `[0, 1]`; scales the burst amplitude (chipping severities).
    pub severity_scale: f64,
}

/// The nine conditions: healthy, missing tooth, root crack, spalling, and
/// chipping tip at five severities.
pub fn standard_conditions() -> Vec<ConditionSpec> {
    let mut out = vec![
        ConditionSpec {
            label: 0,
            name: "healthy".into(),
            family: FaultFamily::Healthy,
            impulse_amplitude: 0.0,
            modulation_depth: 0.0,
            severity_scale: 0.0,
        },
        ConditionSpec {
            label: 1,
            name: "missing_tooth".into(),
            family: FaultFamily::MissingTooth,
            impulse_amplitude: 0.9,
            modulation_depth: 0.0,
            severity_scale: 1.0,
        },
        ConditionSpec {
            label: 2,
            name: "root_crack".into(),
            family: FaultFamily::RootCrack,
            impulse_amplitude: 3.0,
            modulation_depth: 0.35,
            severity_scale: 1.0,
        },
        ConditionSpec {
            label: 3,
            name: "spalling".into(),
            family: FaultFamily::Spalling,
            impulse_amplitude: 2.5,
            modulation_depth: 0.18,
            severity_scale: 1.0,
        },
    ];
    for k in 1..=5 {
        out.push(ConditionSpec {
            label: 3 + k,
            name: format!("chip_{k}"),
            family: FaultFamily::Chipping,
            impulse_amplitude: 3.0,
            // a larger chip also modulates the mesh slightly more
            modulation_depth: 0.04 * k as f64,
            severity_scale: 0.2 * k as f64,
        });
    }
    out
}

/// Compact-support Hann bump: `cos^2(pi*x/(2*w))` for `|x| < w`, else 0.
fn hann_bump(x: f64, w: f64) -> f64 {
    if x.abs() >= w {
        0.0
    } else {
        let c = (PI * x / (2.0 * w)).cos();
        c * c
    }
}

/// Angular distance to the fault tooth, wrapped to `[-pi, pi)`.
fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y >= PI {
        y - TAU
    } else {
        y
    }
}

/// Burst support half-widths and ring carriers per family, in units of the
/// tooth pitch (2*pi / pinion_teeth) and shaft orders respectively. Ring-down
/// support spans one to a few tooth engagements so the signature survives the
/// image encoding.
struct BurstShape {
    half_width_pitches: f64,
    carrier_order: f64,
    /// Second lobe offset in pitches (spalling), 0 for single bursts.
    second_lobe_pitches: f64,
}

fn burst_shape(condition: &ConditionSpec) -> Option<BurstShape> {
    match condition.family {
        FaultFamily::Healthy | FaultFamily::MissingTooth => None,
        FaultFamily::RootCrack => Some(BurstShape {
            half_width_pitches: 1.0,
            carrier_order: 150.0,
            second_lobe_pitches: 0.0,
        }),
        FaultFamily::Spalling => Some(BurstShape {
            half_width_pitches: 1.0,
            carrier_order: 70.0,
            second_lobe_pitches: 2.5,
        }),
        // chipping grows in both amplitude and ring-down width with severity
        FaultFamily::Chipping => Some(BurstShape {
            half_width_pitches: 0.8 + 2.5 * condition.severity_scale,
            carrier_order: 45.0,
            second_lobe_pitches: 0.0,
        }),
    }
}

/// Missing-tooth gap half-width, in tooth pitches.
const GAP_HALF_WIDTH_PITCHES: f64 = 2.5;

/// Where the fault tooth sits relative to the tach pulse; fixed per
/// condition. The five chipping severities affect the same tooth slot, so
/// severity must be read from the burst itself, not from its position.
pub fn fault_angle(condition_label: usize) -> f64 {
    let slot = condition_label.min(4);
    (slot as f64 * 0.37).fract() * TAU
}

/// Closed-form shaft angle model with slow seeded speed fluctuation.
struct SpeedProfile {
    f0: f64,
    delta: f64,
    comps: Vec<(f64, f64, f64)>, // (weight, rate_hz, phase)
}

impl SpeedProfile {
    fn new(f0: f64, fluctuation_pct: f64, seed: u64) -> Self {
        let delta = fluctuation_pct / 100.0;
        let mut comps = Vec::new();
        if delta > 0.0 {
            let mut rng = rng_from_seed(seed);
            let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.3..1.0)).collect();
            let total: f64 = raw.iter().sum();
            for r in raw {
                let weight = r / total;
                let rate = rng.gen_range(0.5..2.5);
                let phase = rng.gen_range(0.0..TAU);
                comps.push((weight, rate, phase));
            }
        }
        Self { f0, delta, comps }
    }

    /// Shaft angle in radians at time `t`.
    fn angle(&self, t: f64) -> f64 {
        let mut theta = t;
        for &(w, rate, phase) in &self.comps {
            let omega = TAU * rate;
            theta += self.delta * w * ((omega * t + phase).sin() - phase.sin()) / omega;
        }
        TAU * self.f0 * theta
    }

    /// Time of the `i`-th full revolution (`angle == 2*pi*i`), by bisection
    /// over the monotone angle function.
    fn pulse_time(&self, i: usize) -> f64 {
        if self.delta == 0.0 {
            return i as f64 / self.f0;
        }
        let target = TAU * i as f64;
        let mut lo = 0.0;
        let mut hi = (i as f64 + 1.0) / (self.f0 * (1.0 - self.delta));
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.angle(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Generates one vibration record with tach pulses, fully determined by
/// `(config, condition, seed)`.
pub fn generate_signal(
    config: &GearboxConfig,
    condition: &ConditionSpec,
    seed: u64,
) -> Result<TimeRecord> {
    if config.revolutions < 5 {
        return Err(Error::Config(format!(
            "record must cover >= 5 revolutions, config has {}",
            config.revolutions
        )));
    }
    if config.harmonics == 0 {
        return Err(Error::Config("harmonics must be >= 1".into()));
    }
    let z = config.pinion_teeth as f64;
    let pitch = TAU / z;

    // Mesh phases belong to the assembly: tooth engagement is locked to the
    // tach reference, so they are shared by every recording and condition.
    // Per-recording streams (load jitter, speed, noise) derive from the
    // signal seed and never perturb each other.
    let mut assembly_rng = rng_from_seed(derive_seed(config.assembly_seed, &[label("mesh-phases")]));
    let mut jitter_rng = rng_from_seed(derive_seed(seed, &[label("load")]));
    let speed = SpeedProfile::new(
        config.nominal_speed_hz,
        config.speed_fluctuation_pct,
        derive_seed(seed, &[label("speed")]),
    );
    let mut noise_rng = rng_from_seed(derive_seed(seed, &[label("noise")]));

    let base_amps = [1.0, 0.45, 0.20, 0.12, 0.08];
    let harmonics: Vec<(f64, f64, f64)> = (1..=config.harmonics)
        .map(|h| {
            let base = base_amps.get(h - 1).copied().unwrap_or(0.1);
            // recording-to-recording load variation and tiny phase wander
            let amp = base * (1.0 + 0.1 * jitter_rng.gen_range(-1.0..1.0));
            let phase = assembly_rng.gen_range(0.0..TAU) + jitter_rng.gen_range(-0.05..0.05);
            (h as f64, amp, phase)
        })
        .collect();
    // load-side modulation peaks where the faulty tooth engages
    let theta_f = fault_angle(condition.label);
    let am_phase = -theta_f + jitter_rng.gen_range(-0.1..0.1);

    let burst = burst_shape(condition);
    let burst_amp = condition.impulse_amplitude * condition.severity_scale;

    // Duration: the requested revolutions even at the slowest speed.
    let duration = config.revolutions as f64
        / (config.nominal_speed_hz * (1.0 - config.speed_fluctuation_pct / 100.0));
    let n = (duration * config.sample_rate_hz).ceil() as usize + 1;

    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / config.sample_rate_hz;
        let theta = speed.angle(t);
        let mut mesh = 0.0;
        for &(h, amp, phase) in &harmonics {
            mesh += amp * (h * z * theta + phase).cos();
        }
        let d_fault = wrap_angle(theta - theta_f);
        if condition.family == FaultFamily::MissingTooth {
            let gap = hann_bump(d_fault, GAP_HALF_WIDTH_PITCHES * pitch);
            mesh *= 1.0 - burst_amp * gap;
        }
        if condition.modulation_depth > 0.0 {
            mesh *= 1.0 + condition.modulation_depth * (theta + am_phase).cos();
        }
        let mut value = mesh;
        if let Some(shape) = &burst {
            let w = shape.half_width_pitches * pitch;
            let mut b = hann_bump(d_fault, w) * (shape.carrier_order * d_fault).cos();
            if shape.second_lobe_pitches > 0.0 {
                let d2 = wrap_angle(d_fault - shape.second_lobe_pitches * pitch);
                b += hann_bump(d2, w) * (shape.carrier_order * d2).cos();
            }
            value += burst_amp * b;
        }
        if config.noise_std > 0.0 {
            value += config.noise_std * next_standard_normal(&mut noise_rng);
        }
        samples.push(value);
    }

    let mut tach = Vec::new();
    for i in 0.. {
        let t = speed.pulse_time(i);
        if t > duration {
            break;
        }
        tach.push(t);
    }
    let record = TimeRecord {
        samples,
        sample_rate_hz: config.sample_rate_hz,
        tach_pulse_times_s: tach,
    };
    record.validate()?;
    Ok(record)
}

/// One generated record with its provenance.
#[derive(Debug, Clone)]
pub struct CorpusRecord {
    pub record: TimeRecord,
    pub condition: ConditionSpec,
    pub index: usize,
    pub seed: u64,
}

/// A full labeled signal corpus.
#[derive(Debug, Clone)]
pub struct SignalCorpus {
    pub records: Vec<CorpusRecord>,
}

/// Generates `signals_per_condition` records for every condition; per-signal
/// seeds derive from `(seed, label, index)` so the corpus is stable under
/// extension.
pub fn generate_dataset(
    config: &GearboxConfig,
    conditions: &[ConditionSpec],
    signals_per_condition: usize,
    seed: u64,
) -> Result<SignalCorpus> {
    if signals_per_condition == 0 {
        return Err(Error::Config("signals_per_condition must be >= 1".into()));
    }
    use rayon::prelude::*;
    let tasks: Vec<(usize, usize)> = conditions
        .iter()
        .enumerate()
        .flat_map(|(ci, _)| (0..signals_per_condition).map(move |i| (ci, i)))
        .collect();
    let records: Vec<Result<CorpusRecord>> = tasks
        .par_iter()
        .map(|&(ci, i)| {
            let condition = &conditions[ci];
            let sig_seed = derive_seed(
                seed,
                &[label("signal"), condition.label as u64, i as u64],
            );
            Ok(CorpusRecord {
                record: generate_signal(config, condition, sig_seed)?,
                condition: condition.clone(),
                index: i,
                seed: sig_seed,
            })
        })
        .collect();
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SignalCorpus { records })
}

/// Writes a corpus as signal/tach CSV files plus `manifest.json`.
pub fn write_corpus(
    dir: &std::path::Path,
    corpus: &SignalCorpus,
    encoder: crate::signal::Encoder,
) -> Result<()> {
    use crate::signal::{write_manifest, write_signal_csv, ManifestEntry};
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(corpus.records.len());
    for rec in &corpus.records {
        let file = format!("cond{}_{:03}.csv", rec.condition.label, rec.index);
        write_signal_csv(&dir.join(&file), &rec.record)?;
        entries.push(ManifestEntry {
            file,
            condition: rec.condition.label,
            condition_name: rec.condition.name.clone(),
            severity: rec.condition.severity_scale,
            encoder: encoder.name().to_string(),
            seed: rec.seed,
        });
    }
    write_manifest(&dir.join("manifest.json"), &entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{angle_resample, order_spectrum, spectrum::order_bin};

    fn quiet_config() -> GearboxConfig {
        GearboxConfig {
            noise_std: 0.0,
            speed_fluctuation_pct: 0.0,
            sample_rate_hz: 200_000.0,
            nominal_speed_hz: 20.0,
            ..GearboxConfig::default()
        }
    }

    #[test]
    fn healthy_spectrum_confined_to_mesh_orders() {
        let config = quiet_config();
        let healthy = &standard_conditions()[0];
        let record = generate_signal(&config, healthy, 42).unwrap();
        let angle = angle_resample(&record, 900, 4).unwrap();
        let spec = order_spectrum(&angle);
        let energy: Vec<f64> = spec.iter().map(|m| m * m).collect();
        let total: f64 = energy.iter().sum();
        let mesh: f64 = (1..=config.harmonics)
            .map(|h| energy[order_bin(32.0 * h as f64, 4)])
            .sum();
        let leakage = (total - mesh) / total;
        assert!(leakage < 1e-6, "relative leakage {leakage}");
    }

    #[test]
    fn generation_is_deterministic() {
        let config = GearboxConfig::default();
        let cond = &standard_conditions()[5];
        let a = generate_signal(&config, cond, 7).unwrap();
        let b = generate_signal(&config, cond, 7).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.tach_pulse_times_s, b.tach_pulse_times_s);
    }

    #[test]
    fn missing_tooth_differs_only_in_gap_window() {
        let config = quiet_config();
        let conds = standard_conditions();
        let healthy = generate_signal(&config, &conds[0], 3).unwrap();
        let missing = generate_signal(&config, &conds[1], 3).unwrap();
        let theta_f = fault_angle(1);
        let w = GAP_HALF_WIDTH_PITCHES * TAU / 32.0;
        let f0 = config.nominal_speed_hz;
        let mut inside = 0usize;
        for (i, (a, b)) in healthy.samples.iter().zip(&missing.samples).enumerate() {
            let t = i as f64 / config.sample_rate_hz;
            let theta = TAU * f0 * t;
            let d = wrap_angle(theta - theta_f);
            if (a - b).abs() > 0.0 {
                assert!(
                    d.abs() < w,
                    "difference outside burst window at sample {i} (angle offset {d})"
                );
                inside += 1;
            }
        }
        assert!(inside > 0, "fault left no trace");
    }

    #[test]
    fn chip_burst_energy_strictly_increases() {
        let config = quiet_config();
        let conds = standard_conditions();
        let healthy = generate_signal(&config, &conds[0], 9).unwrap();
        let mut energies = Vec::new();
        for k in 0..5 {
            let chip = generate_signal(&config, &conds[4 + k], 9).unwrap();
            let e: f64 = healthy
                .samples
                .iter()
                .zip(&chip.samples)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            energies.push(e);
        }
        for k in 1..5 {
            assert!(
                energies[k] > energies[k - 1],
                "chip_{} energy {} <= chip_{} energy {}",
                k + 1,
                energies[k],
                k,
                energies[k - 1]
            );
        }
    }

    #[test]
    fn too_few_revolutions_rejected() {
        let config = GearboxConfig {
            revolutions: 3,
            ..GearboxConfig::default()
        };
        let cond = &standard_conditions()[0];
        assert!(generate_signal(&config, cond, 0).is_err());
    }

    #[test]
    fn dataset_counts_and_determinism() {
        let config = GearboxConfig {
            sample_rate_hz: 4_000.0,
            ..GearboxConfig::default()
        };
        let conds = standard_conditions();
        let a = generate_dataset(&config, &conds, 2, 5).unwrap();
        assert_eq!(a.records.len(), 18);
        let b = generate_dataset(&config, &conds, 2, 5).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.record.samples, rb.record.samples);
            assert_eq!(ra.seed, rb.seed);
        }
    }

    #[test]
    fn speed_fluctuation_moves_pulses_but_stays_monotone() {
        let config = GearboxConfig {
            speed_fluctuation_pct: 2.0,
            noise_std: 0.0,
            sample_rate_hz: 20_000.0,
            ..GearboxConfig::default()
        };
        let cond = &standard_conditions()[0];
        let rec = generate_signal(&config, cond, 11).unwrap();
        assert!(rec.tach_pulse_times_s.len() >= 6);
        for w in rec.tach_pulse_times_s.windows(2) {
            assert!(w[1] > w[0]);
        }
        let nominal_period = 1.0 / config.nominal_speed_hz;
        let max_offset = rec
            .tach_pulse_times_s
            .iter()
            .enumerate()
            .map(|(i, &t)| (t - i as f64 * nominal_period).abs())
            .fold(0.0, f64::max);
        assert!(max_offset > 1e-5, "fluctuation had no effect");
    }
}
