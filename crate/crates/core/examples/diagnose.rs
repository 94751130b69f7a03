//! Data-separability diagnostics: nearest-centroid accuracy on encoded
//! images and on order spectra, plus a per-class confusion readout. Useful
//! when tuning the synthetic defaults.
//!
//! Usage: cargo run --release -p gearnet-core --example diagnose -- \
//!        [--noise 0.12] [--per-condition 40] [--decimate 1] [--source]

use gearnet_core::experiment::encode_corpus;
use gearnet_core::signal::{angle_resample, order_spectrum, PipelineOptions};
use gearnet_core::synth::{
    generate_dataset, generate_source_task, standard_conditions, GearboxConfig,
};

fn arg<T: std::str::FromStr>(args: &[String], name: &str, default: T) -> T {
    args.iter()
        .position(|a| a == name)
        .and_then(|i| args.get(i + 1))
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn nearest_centroid(features: &[Vec<f64>], labels: &[usize], num_classes: usize) -> (f64, Vec<Vec<usize>>) {
    // split even/odd halves: even -> centroid, odd -> eval
    let dim = features[0].len();
    let mut centroids = vec![vec![0.0; dim]; num_classes];
    let mut counts = vec![0usize; num_classes];
    for (i, f) in features.iter().enumerate() {
        if i % 2 == 0 {
            for (c, v) in centroids[labels[i]].iter_mut().zip(f) {
                *c += v;
            }
            counts[labels[i]] += 1;
        }
    }
    for (c, n) in centroids.iter_mut().zip(&counts) {
        for v in c.iter_mut() {
            *v /= (*n).max(1) as f64;
        }
    }
    let mut correct = 0;
    let mut total = 0;
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (i, f) in features.iter().enumerate() {
        if i % 2 == 1 {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, c) in centroids.iter().enumerate() {
                let d: f64 = c.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            confusion[labels[i]][best] += 1;
            correct += usize::from(best == labels[i]);
            total += 1;
        }
    }
    (correct as f64 / total as f64, confusion)
}

fn print_confusion(confusion: &[Vec<usize>]) {
    for (i, row) in confusion.iter().enumerate() {
        let s: Vec<String> = row.iter().map(|v| format!("{v:3}")).collect();
        println!("  class {i}: {}", s.join(" "));
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let noise: f64 = arg(&args, "--noise", 0.12);
    let per_condition: usize = arg(&args, "--per-condition", 40);
    let decimate: usize = arg(&args, "--decimate", 1);

    if args.iter().any(|a| a == "--source") {
        let classes: usize = arg(&args, "--src-classes", 16);
        let corpus = generate_source_task(7, classes, 40).expect("source");
        let feats: Vec<Vec<f64>> = corpus.iter().map(|s| s.pixels.data().to_vec()).collect();
        let labels: Vec<usize> = corpus.iter().map(|s| s.label).collect();
        let (acc, confusion) = nearest_centroid(&feats, &labels, classes);
        println!("source task image nearest-centroid accuracy: {acc:.3}");
        print_confusion(&confusion);
        return;
    }

    let config = GearboxConfig {
        noise_std: noise,
        ..GearboxConfig::default()
    };
    let corpus = generate_dataset(&config, &standard_conditions(), per_condition, 7).expect("gen");
    let opts = PipelineOptions {
        decimate_factor: decimate,
        ..PipelineOptions::default()
    };
    let images = encode_corpus(&corpus, &opts).expect("encode");
    let feats: Vec<Vec<f64>> = images.iter().map(|s| s.pixels.data().to_vec()).collect();
    let labels: Vec<usize> = images.iter().map(|s| s.label).collect();
    let (acc, confusion) = nearest_centroid(&feats, &labels, 9);
    println!("gear image nearest-centroid accuracy (noise {noise}, decimate {decimate}): {acc:.3}");
    print_confusion(&confusion);

    let spectra: Vec<Vec<f64>> = corpus
        .records
        .iter()
        .map(|r| {
            let a = angle_resample(&r.record, 900, 4).expect("resample");
            let s = order_spectrum(&a);
            let norm: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
            s.iter().map(|v| v / norm).collect()
        })
        .collect();
    let slabels: Vec<usize> = corpus.records.iter().map(|r| r.condition.label).collect();
    let (sacc, sconf) = nearest_centroid(&spectra, &slabels, 9);
    println!("gear order-spectrum nearest-centroid accuracy: {sacc:.3}");
    print_confusion(&sconf);
}
