//! Signal-to-image encoders.
//!
//! `Reshape` is the default: normalize the signal, lay it out row-major on
//! the most-square grid that factors its length (3600 -> 60x60, 900 -> 30x30),
//! bilinear-resize to the network's input size, and replicate across the 3
//! channels. `PlotRaster` instead rasterizes the waveform as a polyline on a
//! white canvas, matching the look of plotted vibration signals.
//!
//! Both encoders are deterministic; a zero-variance signal encodes as an
//! all-0.5 image.

use super::AngleRecord;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoder {
    Reshape,
    PlotRaster,
}

impl Encoder {
    pub fn name(&self) -> &'static str {
        match self {
            Encoder::Reshape => "reshape",
            Encoder::PlotRaster => "plot_raster",
        }
    }
}

impl std::str::FromStr for Encoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reshape" => Ok(Encoder::Reshape),
            "plot_raster" => Ok(Encoder::PlotRaster),
            other => Err(Error::Parse(format!(
                "unknown encoder '{other}' (expected reshape or plot_raster)"
            ))),
        }
    }
}

/// An encoded input image with its class label and provenance id.
#[derive(Debug, Clone)]
pub struct ImageSample {
    /// `[H, W, 3]`, values in `[0, 1]`.
    pub pixels: Tensor,
    pub label: usize,
    pub source_id: String,
}

/// The most-square factorization of `n`: the largest divisor `h <= sqrt(n)`,
/// paired with `w = n / h`.
pub fn squarest_grid(n: usize) -> (usize, usize) {
    let mut h = (n as f64).sqrt().floor() as usize;
    while h > 1 && n % h != 0 {
        h -= 1;
    }
    (h.max(1), n / h.max(1))
}

/// Bilinear resize with corner alignment: source and destination corners map
/// onto each other exactly.
pub fn bilinear_resize(
    src: &[f64],
    src_h: usize,
    src_w: usize,
    dst_h: usize,
    dst_w: usize,
) -> Vec<f64> {
    let mut dst = vec![0.0; dst_h * dst_w];
    let sy_step = if dst_h > 1 {
        (src_h - 1) as f64 / (dst_h - 1) as f64
    } else {
        0.0
    };
    let sx_step = if dst_w > 1 {
        (src_w - 1) as f64 / (dst_w - 1) as f64
    } else {
        0.0
    };
    for y in 0..dst_h {
        let sy = y as f64 * sy_step;
        let y0 = (sy.floor() as usize).min(src_h - 1);
        let y1 = (y0 + 1).min(src_h - 1);
        let fy = sy - y0 as f64;
        for x in 0..dst_w {
            let sx = x as f64 * sx_step;
            let x0 = (sx.floor() as usize).min(src_w - 1);
            let x1 = (x0 + 1).min(src_w - 1);
            let fx = sx - x0 as f64;
            let top = src[y0 * src_w + x0] * (1.0 - fx) + src[y0 * src_w + x1] * fx;
            let bottom = src[y1 * src_w + x0] * (1.0 - fx) + src[y1 * src_w + x1] * fx;
            dst[y * dst_w + x] = top * (1.0 - fy) + bottom * fy;
        }
    }
    dst
}

fn replicate_channels(gray: &[f64], h: usize, w: usize) -> Tensor {
    let mut data = Vec::with_capacity(h * w * 3);
    for &v in gray {
        data.push(v);
        data.push(v);
        data.push(v);
    }
    Tensor::from_vec(vec![h, w, 3], data).expect("replicate shape")
}

/// Encodes an angle-even record as an `[H, W, 3]` image in `[0, 1]`.
pub fn encode_image(record: &AngleRecord, encoder: Encoder, target: [usize; 2]) -> Result<ImageSample> {
    if record.samples.is_empty() {
        return Err(Error::InsufficientData("cannot encode an empty record".into()));
    }
    let [h, w] = target;
    if h == 0 || w == 0 {
        return Err(Error::Config("image target dimensions must be >= 1".into()));
    }
    let lo = record.samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = record.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // zero-variance rule: constant signals become a flat mid-gray image
    if lo == hi {
        return Ok(ImageSample {
            pixels: Tensor::filled(&[h, w, 3], 0.5),
            label: record.condition_label,
            source_id: String::new(),
        });
    }
    let gray = match encoder {
        Encoder::Reshape => {
            let n = record.samples.len();
            let mean = record.samples.iter().sum::<f64>() / n as f64;
            let var = record
                .samples
                .iter()
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / n as f64;
            let std = var.sqrt();
            let z: Vec<f64> = if std > 0.0 {
                record.samples.iter().map(|v| (v - mean) / std).collect()
            } else {
                vec![0.0; n]
            };
            let zlo = z.iter().cloned().fold(f64::INFINITY, f64::min);
            let zhi = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let span = zhi - zlo;
            let unit: Vec<f64> = if span > 0.0 {
                z.iter().map(|v| (v - zlo) / span).collect()
            } else {
                vec![0.5; n]
            };
            let (gh, gw) = squarest_grid(n);
            bilinear_resize(&unit, gh, gw, h, w)
        }
        Encoder::PlotRaster => rasterize_polyline(&record.samples, lo, hi, h, w),
    };
    Ok(ImageSample {
        pixels: replicate_channels(&gray, h, w),
        label: record.condition_label,
        source_id: String::new(),
    })
}

/// Draws the waveform as a dark polyline on a white canvas: sample index maps
/// to the horizontal axis, normalized amplitude to the vertical.
fn rasterize_polyline(samples: &[f64], lo: f64, hi: f64, h: usize, w: usize) -> Vec<f64> {
    let mut canvas = vec![1.0; h * w];
    let n = samples.len();
    let span = hi - lo;
    let row_of = |v: f64| -> usize {
        let norm = (v - lo) / span;
        let y = (1.0 - norm) * (h - 1) as f64;
        y.round().clamp(0.0, (h - 1) as f64) as usize
    };
    let col_of = |k: usize| -> usize {
        if n <= 1 {
            0
        } else {
            ((k as f64 * (w - 1) as f64 / (n - 1) as f64).round()) as usize
        }
    };
    let set = |row: usize, col: usize, canvas: &mut Vec<f64>| {
        canvas[row * w + col] = 0.0;
    };
    let mut prev_col = col_of(0);
    let mut prev_row = row_of(samples[0]);
    set(prev_row, prev_col, &mut canvas);
    for (k, &v) in samples.iter().enumerate().skip(1) {
        let col = col_of(k);
        let row = row_of(v);
        if col == prev_col {
            // same column: fill the vertical span
            for r in prev_row.min(row)..=prev_row.max(row) {
                set(r, col, &mut canvas);
            }
        } else {
            for c in prev_col..=col {
                let f = (c - prev_col) as f64 / (col - prev_col) as f64;
                let r = (prev_row as f64 + f * (row as f64 - prev_row as f64))
                    .round()
                    .clamp(0.0, (h - 1) as f64) as usize;
                set(r, c, &mut canvas);
            }
        }
        prev_col = col;
        prev_row = row;
    }
    canvas
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(samples: Vec<f64>, spr: usize, revs: usize) -> AngleRecord {
        AngleRecord {
            samples,
            samples_per_revolution: spr,
            revolutions: revs,
            condition_label: 2,
        }
    }

    #[test]
    fn squarest_grid_examples() {
        assert_eq!(squarest_grid(3600), (60, 60));
        assert_eq!(squarest_grid(900), (30, 30));
        assert_eq!(squarest_grid(1800), (40, 45));
        assert_eq!(squarest_grid(7), (1, 7));
    }

    #[test]
    fn constant_signal_encodes_mid_gray() {
        let rec = record(vec![3.7; 900], 225, 4);
        for enc in [Encoder::Reshape, Encoder::PlotRaster] {
            let img = encode_image(&rec, enc, [32, 32]).unwrap();
            assert_eq!(img.pixels.shape(), [32, 32, 3]);
            assert!(img.pixels.data().iter().all(|&v| v == 0.5));
            assert_eq!(img.label, 2);
        }
    }

    #[test]
    fn encoding_is_deterministic() {
        let samples: Vec<f64> = (0..900).map(|i| ((i * i) % 97) as f64).collect();
        let rec = record(samples, 225, 4);
        for enc in [Encoder::Reshape, Encoder::PlotRaster] {
            let a = encode_image(&rec, enc, [32, 32]).unwrap();
            let b = encode_image(&rec, enc, [32, 32]).unwrap();
            assert_eq!(a.pixels.data(), b.pixels.data());
        }
    }

    #[test]
    fn reshape_matches_bilinear_oracle() {
        // 900 samples -> 30x30 grid -> 32x32, checked against an independent
        // reimplementation of corner-aligned bilinear interpolation.
        let samples: Vec<f64> = (0..900).map(|i| (i as f64 * 0.37).sin()).collect();
        let rec = record(samples.clone(), 225, 4);
        let img = encode_image(&rec, Encoder::Reshape, [32, 32]).unwrap();

        let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = samples.iter().sum::<f64>() / 900.0;
        let std = (samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 900.0).sqrt();
        let zlo = (lo - mean) / std;
        let zhi = (hi - mean) / std;
        let unit: Vec<f64> = samples
            .iter()
            .map(|v| ((v - mean) / std - zlo) / (zhi - zlo))
            .collect();
        for y in 0..32 {
            for x in 0..32 {
                let sy = y as f64 * 29.0 / 31.0;
                let sx = x as f64 * 29.0 / 31.0;
                let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
                let (y1, x1) = ((y0 + 1).min(29), (x0 + 1).min(29));
                let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
                let g = |r: usize, c: usize| unit[r * 30 + c];
                let expect = g(y0, x0) * (1.0 - fx) * (1.0 - fy)
                    + g(y0, x1) * fx * (1.0 - fy)
                    + g(y1, x0) * (1.0 - fx) * fy
                    + g(y1, x1) * fx * fy;
                let got = img.pixels.at3(y, x, 0);
                assert!(
                    (got - expect).abs() < 1e-12,
                    "pixel ({y},{x}): {got} vs {expect}"
                );
                // channels replicated
                assert_eq!(got, img.pixels.at3(y, x, 1));
                assert_eq!(got, img.pixels.at3(y, x, 2));
            }
        }
    }

    #[test]
    fn raster_has_dark_line_on_white() {
        let samples: Vec<f64> = (0..100).map(|i| (i as f64 * 0.2).sin()).collect();
        let rec = record(samples, 25, 4);
        let img = encode_image(&rec, Encoder::PlotRaster, [24, 48]).unwrap();
        let dark = img.pixels.data().iter().filter(|&&v| v == 0.0).count();
        let light = img.pixels.data().iter().filter(|&&v| v == 1.0).count();
        assert!(dark >= 48 * 3, "dark pixels {dark}");
        assert_eq!(dark + light, 24 * 48 * 3);
    }
}
