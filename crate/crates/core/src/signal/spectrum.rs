//! Order spectrum of angle-even records.
//!
//! With the record spanning `revolutions` full turns, DFT bin `k` corresponds
//! to order `k / revolutions` — gear-mesh energy appears at integer orders
//! equal to tooth counts.

use super::AngleRecord;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Magnitude spectrum over bins `0..=len/2`, normalized by the record length.
pub fn order_spectrum(record: &AngleRecord) -> Vec<f64> {
    let n = record.samples.len();
    let mut buf: Vec<Complex<f64>> = record
        .samples
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf.iter()
        .take(n / 2 + 1)
        .map(|c| c.norm() / n as f64)
        .collect()
}

/// The spectrum bin holding a given shaft order, if it lies on the grid.
pub fn order_bin(order: f64, revolutions: usize) -> usize {
    (order * revolutions as f64).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_order_lands_in_one_bin() {
        let spr = 900;
        let revs = 4;
        let n = spr * revs;
        let samples: Vec<f64> = (0..n)
            .map(|k| {
                let angle = k as f64 * 2.0 * std::f64::consts::PI / spr as f64;
                (32.0 * angle).cos()
            })
            .collect();
        let rec = AngleRecord {
            samples,
            samples_per_revolution: spr,
            revolutions: revs,
            condition_label: 0,
        };
        let spec = order_spectrum(&rec);
        let bin = order_bin(32.0, revs);
        let total: f64 = spec.iter().map(|m| m * m).sum();
        let peak = spec[bin] * spec[bin];
        assert!(peak / total > 1.0 - 1e-9, "energy ratio {}", peak / total);
    }
}
