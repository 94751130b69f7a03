//! Synthetic source task for pretraining.
//!
//! Classes are oscillation-pattern images from a *virtual* gearbox that
//! shares the gear task's generative vocabulary — angle-locked gratings,
//! Hann ring-down bursts, gap dropouts, shaft-order amplitude modulation —
//! but is disjoint in parameters: grating orders avoid the real mesh orders
//! {32, 64, 96}, defect angles, widths, carriers, and severity ladders are
//! its own, and each class is its own virtual assembly (its own locked
//! phases). Per-sample variation comes from load jitter and noise, exactly
//! as in the gear corpus, so pretrained features face the same nuisance
//! statistics they will meet after transplant.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, label, next_standard_normal, rng_from_seed};
use crate::signal::{encode_image, AngleRecord, Encoder, ImageSample};
use rand::Rng;
use std::f64::consts::{PI, TAU};

const SAMPLES_PER_REV: usize = 900;
const REVOLUTIONS: usize = 4;
const IMAGE_SIZE: [usize; 2] = [32, 32];

/// Virtual mesh orders; none coincide with the real mesh orders {32, 64, 96}.
const ORDER_TABLE: [f64; 4] = [26.0, 38.0, 21.0, 44.0];

#[derive(Debug, Clone, Copy)]
enum Pattern {
    Plain,
    Modulated,
    NarrowRing,
    DoubleRing,
    Gap,
    WideRing,
}

struct SourceClass {
    base_order: f64,
    pattern: Pattern,
    burst_amplitude: f64,
    /// Ring-down half-width in radians.
    burst_width: f64,
    am_depth: f64,
}

/// Procedural class table: cycles through the pattern menu with growing
/// intensity, switching grating order every full cycle.
fn class_params(k: usize) -> SourceClass {
    let menu = k % 6;
    let round = k / 6;
    let base_order = ORDER_TABLE[round % ORDER_TABLE.len()];
    let boost = 1.0 + 0.3 * round as f64;
    match menu {
        0 => SourceClass {
            base_order,
            pattern: Pattern::Plain,
            burst_amplitude: 0.0,
            burst_width: 0.0,
            am_depth: 0.0,
        },
        1 => SourceClass {
            base_order,
            pattern: Pattern::Modulated,
            burst_amplitude: 0.0,
            burst_width: 0.0,
            am_depth: 0.35,
        },
        2 => SourceClass {
            base_order,
            pattern: Pattern::NarrowRing,
            burst_amplitude: 2.2 * boost,
            burst_width: 0.20,
            am_depth: 0.0,
        },
        3 => SourceClass {
            base_order,
            pattern: Pattern::DoubleRing,
            burst_amplitude: 1.8 * boost,
            burst_width: 0.22,
            am_depth: 0.12,
        },
        4 => SourceClass {
            base_order,
            pattern: Pattern::Gap,
            burst_amplitude: 0.9,
            burst_width: 0.45,
            am_depth: 0.0,
        },
        _ => SourceClass {
            base_order,
            pattern: Pattern::WideRing,
            burst_amplitude: 1.4 * boost,
            burst_width: 0.55,
            am_depth: 0.20,
        },
    }
}

/// Each class is its own virtual assembly: defect angle and grating phases
/// are fixed class properties.
fn class_angle(k: usize) -> f64 {
    ((k as f64) * 0.41).fract() * TAU
}

fn hann_bump(x: f64, w: f64) -> f64 {
    if x.abs() >= w {
        0.0
    } else {
        let c = (PI * x / (2.0 * w)).cos();
        c * c
    }
}

fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y >= PI {
        y - TAU
    } else {
        y
    }
}

/// Deterministic labeled image corpus of `num_classes * samples_per_class`
/// oscillation patterns, 32x32x3, disjoint in parameters from the gear task.
pub fn generate_source_task(
    seed: u64,
    num_classes: usize,
    samples_per_class: usize,
) -> Result<Vec<ImageSample>> {
    if num_classes < 2 {
        return Err(Error::Config(format!(
            "source task needs >= 2 classes, got {num_classes}"
        )));
    }
    if samples_per_class == 0 {
        return Err(Error::Config("samples_per_class must be >= 1".into()));
    }
    use rayon::prelude::*;
    let tasks: Vec<(usize, usize)> = (0..num_classes)
        .flat_map(|k| (0..samples_per_class).map(move |i| (k, i)))
        .collect();
    tasks
        .par_iter()
        .map(|&(k, i)| {
            let sample_seed = derive_seed(seed, &[label("source"), k as u64, i as u64]);
            let record = synth_pattern(k, sample_seed);
            let mut image = encode_image(&record, Encoder::Reshape, IMAGE_SIZE)?;
            image.source_id = format!("src{k}_{i:03}");
            Ok(image)
        })
        .collect()
}

fn synth_pattern(class: usize, seed: u64) -> AngleRecord {
    let params = class_params(class);
    let n = SAMPLES_PER_REV * REVOLUTIONS;

    // class-locked assembly properties
    let mut assembly_rng = rng_from_seed(derive_seed(
        class as u64,
        &[label("source-assembly")],
    ));
    let phase1 = assembly_rng.gen_range(0.0..TAU);
    let phase2 = assembly_rng.gen_range(0.0..TAU);
    let phase3 = assembly_rng.gen_range(0.0..TAU);
    let burst_angle = class_angle(class);

    // per-sample load jitter and noise
    let mut jitter_rng = rng_from_seed(derive_seed(seed, &[label("load")]));
    let amp = 1.0 + 0.1 * jitter_rng.gen_range(-1.0..1.0);
    let wander = jitter_rng.gen_range(-0.05..0.05);
    let burst_amp = params.burst_amplitude * (1.0 + 0.1 * jitter_rng.gen_range(-1.0..1.0));
    let mut noise_rng = rng_from_seed(derive_seed(seed, &[label("noise")]));

    let mut samples = Vec::with_capacity(n);
    for kidx in 0..n {
        let theta = kidx as f64 * TAU / SAMPLES_PER_REV as f64;
        let o = params.base_order;
        let mut mesh = amp
            * ((o * theta + phase1 + wander).cos()
                + 0.45 * (2.0 * o * theta + phase2 + wander).cos()
                + 0.20 * (3.0 * o * theta + phase3 + wander).cos());
        let d = wrap_angle(theta - burst_angle);
        match params.pattern {
            Pattern::Plain | Pattern::Modulated => {}
            Pattern::NarrowRing | Pattern::WideRing => {
                mesh += burst_amp * hann_bump(d, params.burst_width) * (96.0 * d).cos();
            }
            Pattern::DoubleRing => {
                let d2 = wrap_angle(d - 0.5);
                mesh += burst_amp
                    * (hann_bump(d, params.burst_width) * (62.0 * d).cos()
                        + hann_bump(d2, params.burst_width) * (62.0 * d2).cos());
            }
            Pattern::Gap => {
                mesh *= 1.0 - 0.9 * hann_bump(d, params.burst_width);
            }
        }
        if params.am_depth > 0.0 {
            mesh *= 1.0 + params.am_depth * (theta - burst_angle).cos();
        }
        mesh += 0.12 * next_standard_normal(&mut noise_rng);
        samples.push(mesh);
    }
    AngleRecord {
        samples,
        samples_per_revolution: SAMPLES_PER_REV,
        revolutions: REVOLUTIONS,
        condition_label: class,
    }
}

/// Writes an image corpus as one tensor file per sample plus a manifest.
/// Per-sample seeds are re-derived from `base_seed` the same way
/// [`generate_source_task`] derives them.
pub fn write_image_corpus(
    dir: &std::path::Path,
    samples: &[ImageSample],
    base_seed: u64,
) -> Result<()> {
    use crate::network::checkpoint::{write_tensor_file, DType};
    use crate::signal::{write_manifest, ManifestEntry};
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(samples.len());
    let mut per_class_counter = std::collections::BTreeMap::<usize, u64>::new();
    for sample in samples {
        let idx = per_class_counter.entry(sample.label).or_insert(0);
        let file = format!("{}.tns", sample.source_id);
        write_tensor_file(&dir.join(&file), &sample.source_id, &sample.pixels, DType::F64)?;
        entries.push(ManifestEntry {
            file,
            condition: sample.label,
            condition_name: format!("pattern_{}", sample.label),
            severity: 0.0,
            encoder: "image".into(),
            seed: derive_seed(base_seed, &[label("source"), sample.label as u64, *idx]),
        });
        *idx += 1;
    }
    write_manifest(&dir.join("manifest.json"), &entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_counts() {
        let corpus = generate_source_task(1, 6, 200).unwrap();
        assert_eq!(corpus.len(), 1200);
        for k in 0..6 {
            assert_eq!(corpus.iter().filter(|s| s.label == k).count(), 200);
        }
    }

    #[test]
    fn corpus_is_deterministic() {
        let a = generate_source_task(9, 3, 4).unwrap();
        let b = generate_source_task(9, 3, 4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.pixels.data(), y.pixels.data());
            assert_eq!(x.source_id, y.source_id);
        }
    }

    #[test]
    fn images_are_normalized() {
        let corpus = generate_source_task(2, 4, 3).unwrap();
        for s in &corpus {
            assert_eq!(s.pixels.shape(), [32, 32, 3]);
            assert!(s.pixels.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn too_few_classes_rejected() {
        assert!(generate_source_task(0, 1, 10).is_err());
    }
}
