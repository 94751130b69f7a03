//! On-disk formats: signal CSV (one sample per line, optional `# rate_hz=`
//! header), sibling tach-pulse CSV, JSON dataset manifests, and the
//! manifest-driven dataset loader.

use super::encode::{encode_image, Encoder, ImageSample};
use super::{angle_resample, decimate, AngleRecord, TimeRecord};
use crate::error::{Error, Result};
use crate::network::checkpoint::read_tensor_file;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// One dataset entry. `file` is relative to the manifest's directory; the
/// sibling `<stem>.tach.csv` carries the pulse times for `.csv` signals.
/// `.tns` entries are pre-encoded images loaded directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub condition: usize,
    pub condition_name: String,
    pub severity: f64,
    pub encoder: String,
    pub seed: u64,
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let json = serde_json::to_string_pretty(entries)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_signal_csv(path: &Path, record: &TimeRecord) -> Result<()> {
    let mut text = String::with_capacity(record.samples.len() * 12);
    writeln!(text, "# rate_hz={}", record.sample_rate_hz).expect("string write");
    for v in &record.samples {
        writeln!(text, "{v}").expect("string write");
    }
    std::fs::write(path, text)?;
    write_tach_csv(&tach_path_for(path), &record.tach_pulse_times_s)
}

pub fn write_tach_csv(path: &Path, pulses: &[f64]) -> Result<()> {
    let mut text = String::with_capacity(pulses.len() * 12);
    for p in pulses {
        writeln!(text, "{p}").expect("string write");
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// `signals/foo.csv` -> `signals/foo.tach.csv`
pub fn tach_path_for(signal_path: &Path) -> PathBuf {
    let stem = signal_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("signal");
    signal_path.with_file_name(format!("{stem}.tach.csv"))
}

fn parse_float_lines(text: &str, what: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            Error::Parse(format!("{what} line {}: '{line}' is not a number", lineno + 1))
        })?;
        out.push(v);
    }
    Ok(out)
}

/// Reads a signal CSV and its sibling tach file into a [`TimeRecord`].
/// Falls back to 20 kHz when the `# rate_hz=` header is absent.
pub fn read_time_record(signal_path: &Path) -> Result<TimeRecord> {
    let text = std::fs::read_to_string(signal_path)?;
    let mut rate = 20_000.0;
    for line in text.lines() {
        if let Some(rest) = line.trim().strip_prefix("# rate_hz=") {
            rate = rest
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad rate header '{line}'")))?;
            break;
        }
    }
    let samples = parse_float_lines(&text, "signal")?;
    let tach_path = tach_path_for(signal_path);
    let tach_text = std::fs::read_to_string(&tach_path).map_err(|e| {
        Error::Parse(format!(
            "missing tach file {} for {}: {e}",
            tach_path.display(),
            signal_path.display()
        ))
    })?;
    let tach_pulse_times_s = parse_float_lines(&tach_text, "tach")?;
    let record = TimeRecord {
        samples,
        sample_rate_hz: rate,
        tach_pulse_times_s,
    };
    record.validate()?;
    Ok(record)
}

/// Settings for turning raw records into training images.
#[derive(Debug, Clone, Copy)]
pub struct PipelineOptions {
    pub samples_per_revolution: usize,
    pub revolutions: usize,
    /// 1 disables decimation.
    pub decimate_factor: usize,
    pub encoder: Encoder,
    pub image_size: [usize; 2],
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            samples_per_revolution: 900,
            revolutions: 4,
            decimate_factor: 1,
            encoder: Encoder::Reshape,
            image_size: [32, 32],
        }
    }
}

/// Full record-to-image pipeline: angle resample, optional decimation, encode.
pub fn record_to_image(
    record: &TimeRecord,
    label: usize,
    source_id: &str,
    opts: &PipelineOptions,
) -> Result<ImageSample> {
    let angle: AngleRecord =
        angle_resample(record, opts.samples_per_revolution, opts.revolutions)?.with_label(label);
    let angle = decimate(&angle, opts.decimate_factor)?;
    let mut image = encode_image(&angle, opts.encoder, opts.image_size)?;
    image.source_id = source_id.to_string();
    Ok(image)
}

/// Loads every manifest entry in `dir` as an encoded image sample.
///
/// `.csv` entries run through the signal pipeline with `opts` (the manifest's
/// per-entry encoder applies unless `opts_encoder_override` is set); `.tns`
/// entries are loaded as pre-encoded images and must match `opts.image_size`.
pub fn load_labeled_dataset(
    dir: &Path,
    opts: &PipelineOptions,
    encoder_override: Option<Encoder>,
) -> Result<Vec<ImageSample>> {
    let manifest = read_manifest(&dir.join("manifest.json"))?;
    let mut out = Vec::with_capacity(manifest.len());
    for entry in &manifest {
        let path = dir.join(&entry.file);
        if entry.file.ends_with(".tns") {
            let (_, tensor) = read_tensor_file(&path)?;
            let expect = [opts.image_size[0], opts.image_size[1], 3];
            if tensor.shape() != expect {
                return Err(Error::Config(format!(
                    "image {} has shape {:?}, pipeline expects {:?}",
                    entry.file,
                    tensor.shape(),
                    expect
                )));
            }
            out.push(ImageSample {
                pixels: tensor,
                label: entry.condition,
                source_id: entry.file.clone(),
            });
        } else {
            let record = read_time_record(&path)?;
            let encoder = match encoder_override {
                Some(e) => e,
                None => entry.encoder.parse()?,
            };
            let entry_opts = PipelineOptions { encoder, ..*opts };
            out.push(record_to_image(
                &record,
                entry.condition,
                &entry.file,
                &entry_opts,
            )?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sig.csv");
        let record = TimeRecord {
            samples: vec![0.0, 1.5, -2.25, 1e-7, 123.456789012345],
            sample_rate_hz: 20_000.0,
            tach_pulse_times_s: vec![0.0, 1e-4, 2e-4],
        };
        write_signal_csv(&path, &record).unwrap();
        let back = read_time_record(&path).unwrap();
        assert_eq!(back.samples, record.samples);
        assert_eq!(back.sample_rate_hz, record.sample_rate_hz);
        assert_eq!(back.tach_pulse_times_s, record.tach_pulse_times_s);
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let entries = vec![ManifestEntry {
            file: "cond0_000.csv".into(),
            condition: 0,
            condition_name: "healthy".into(),
            severity: 0.0,
            encoder: "reshape".into(),
            seed: 12345,
        }];
        write_manifest(&path, &entries).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].file, "cond0_000.csv");
        assert_eq!(back[0].condition_name, "healthy");
    }

    #[test]
    fn tach_sibling_naming() {
        assert_eq!(
            tach_path_for(Path::new("/data/cond3_017.csv")),
            PathBuf::from("/data/cond3_017.tach.csv")
        );
    }
}
