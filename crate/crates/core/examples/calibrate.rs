//! Calibration harness for the synthetic-data defaults: runs the desk-scale
//! sweep end to end at a configurable noise level and prints the per-method
//! mean accuracies. The shipped `GearboxConfig::default()` noise level was
//! chosen with this tool so the sweep lands away from both floor and ceiling.
//!
//! Usage:
//!   cargo run --release -p gearnet-core --example calibrate -- \
//!       [--noise 0.25] [--per-condition 104] [--repeats 5] \
//!       [--fractions 0.02,0.05,0.4] [--decimate 1] [--seed 2024] [--pretrain-only]

use gearnet_core::experiment::{
    encode_corpus, pretrain_on_source, run_sweep, ExperimentConfig, Method,
};
use gearnet_core::network::Checkpoint;
use gearnet_core::signal::PipelineOptions;
use gearnet_core::synth::{generate_dataset, standard_conditions, GearboxConfig};
use std::time::Instant;

fn arg<T: std::str::FromStr>(args: &[String], name: &str, default: T) -> T {
    args.iter()
        .position(|a| a == name)
        .and_then(|i| args.get(i + 1))
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let noise: f64 = arg(&args, "--noise", 0.25);
    let per_condition: usize = arg(&args, "--per-condition", 104);
    let repeats: usize = arg(&args, "--repeats", 5);
    let decimate: usize = arg(&args, "--decimate", 1);
    let seed: u64 = arg(&args, "--seed", 2024);
    let fractions: Vec<f64> = arg(&args, "--fractions", "0.02,0.05,0.4".to_string())
        .split(',')
        .map(|s| s.parse().expect("fraction"))
        .collect();

    let src_classes: usize = arg(&args, "--src-classes", 12);
    let src_per_class: usize = arg(&args, "--src-per-class", 150);
    let src_epochs: usize = arg(&args, "--src-epochs", 20);

    let t0 = Instant::now();
    println!("# pretraining mini on the synthetic source task...");
    let (pretrained, history) = pretrain_on_source(
        "mini",
        seed,
        src_classes,
        src_per_class,
        src_epochs,
        16,
        1e-2,
        0.9,
        5e-4,
    )
    .expect("pretrain");
    let tail: Vec<f64> = history
        .rows
        .iter()
        .rev()
        .take(20)
        .map(|r| r.minibatch_accuracy)
        .collect();
    println!(
        "# pretrain done in {:.1}s, last-20-minibatch accuracy {:.3}",
        t0.elapsed().as_secs_f64(),
        tail.iter().sum::<f64>() / tail.len() as f64
    );
    if args.iter().any(|a| a == "--pretrain-only") {
        return;
    }
    let ckpt = Checkpoint::from_network(&pretrained, "calibration pretrain");

    let config = GearboxConfig {
        noise_std: noise,
        ..GearboxConfig::default()
    };
    let t1 = Instant::now();
    let corpus = generate_dataset(&config, &standard_conditions(), per_condition, seed)
        .expect("corpus");
    let opts = PipelineOptions {
        decimate_factor: decimate,
        ..PipelineOptions::default()
    };
    let images = encode_corpus(&corpus, &opts).expect("encode");
    println!(
        "# corpus: {} signals encoded in {:.1}s (noise_std = {noise}, decimate = {decimate})",
        images.len(),
        t1.elapsed().as_secs_f64()
    );

    let sweep_config = ExperimentConfig {
        fractions,
        repeats,
        base_seed: seed,
        decimate_factor: decimate,
        ..ExperimentConfig::default()
    };
    let t2 = Instant::now();
    let results = run_sweep(
        &sweep_config,
        &[Method::Transfer, Method::Local],
        &images,
        Some(&ckpt),
    )
    .expect("sweep");
    println!("# sweep done in {:.1}s", t2.elapsed().as_secs_f64());
    println!("method,fraction,mean_accuracy");
    for (method, fraction, mean) in &results.means {
        println!("{},{},{:.4}", method.name(), fraction, mean);
    }
    for r in &results.runs {
        let last_epoch = r.history.rows.last().map(|x| x.epoch).unwrap_or(0);
        let final_train: Vec<f64> = r
            .history
            .rows
            .iter()
            .filter(|x| x.epoch == last_epoch)
            .map(|x| x.minibatch_accuracy)
            .collect();
        let train_acc = final_train.iter().sum::<f64>() / final_train.len().max(1) as f64;
        eprintln!(
            "  {} f={} r={} val={:.4} train={:.4}",
            r.method.name(),
            r.fraction,
            r.repeat,
            r.accuracy,
            train_acc
        );
    }
}
