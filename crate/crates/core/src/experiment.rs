//! The training-fraction sweep protocol: repeated seeded splits, per-method
//! training (transfer vs local baseline), and CSV emission.
//!
//! Every run's seed derives from `(base_seed, method, fraction, repeat)`, so
//! adding fractions or methods to a sweep never perturbs existing runs, and
//! the whole sweep is a pure function of its config, corpus, and checkpoint.

use crate::error::{Error, Result};
use crate::network::{
    build_network, evaluate_accuracy, save_checkpoint, spec_by_name, transplant, Checkpoint,
    DType, Network, TransferPlan,
};
use crate::nn::LossConfig;
use crate::optim::{fit, OptimizerConfig, Sgd, TrainHistory};
use crate::rng::{derive_seed, label};
use crate::signal::{record_to_image, Encoder, ImageSample, PipelineOptions};
use crate::synth::SignalCorpus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub arch_name: String,
    pub fractions: Vec<f64>,
    pub repeats: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_transferred: f64,
    pub lr_new: f64,
    pub momentum_transfer: f64,
    pub momentum_local: f64,
    pub base_seed: u64,
    pub gamma: f64,
    pub num_classes: usize,
    /// 1 disables decimation; 4 gives the reduced-rate study.
    pub decimate_factor: usize,
    pub encoder: Encoder,
    /// Train transplanted layers at multiplier 0 instead of the slow rate.
    pub freeze_transferred: bool,
    /// Dataset directory (CLI use; library callers pass corpora directly).
    pub data_dir: Option<PathBuf>,
    pub pretrained_checkpoint: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            arch_name: "mini".into(),
            fractions: vec![0.8, 0.6, 0.4, 0.2, 0.1, 0.05, 0.02],
            repeats: 5,
            epochs: 15,
            batch_size: 5,
            lr_transferred: 1e-4,
            lr_new: 1e-2,
            momentum_transfer: 0.9,
            momentum_local: 0.5,
            base_seed: 2024,
            gamma: 5e-4,
            num_classes: 9,
            decimate_factor: 1,
            encoder: Encoder::Reshape,
            freeze_transferred: false,
            data_dir: None,
            pretrained_checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Transfer,
    Local,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Transfer => "transfer",
            Method::Local => "local",
        }
    }

    fn id(&self) -> u64 {
        match self {
            Method::Transfer => 1,
            Method::Local => 2,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transfer" => Ok(Method::Transfer),
            "local" => Ok(Method::Local),
            other => Err(Error::Parse(format!(
                "unknown method '{other}' (expected transfer or local)"
            ))),
        }
    }
}

#[derive(Debug)]
pub struct RunResult {
    pub method: Method,
    pub fraction: f64,
    pub repeat: usize,
    pub accuracy: f64,
    pub history: TrainHistory,
    pub final_network: Network,
}

#[derive(Debug)]
pub struct SweepResults {
    pub runs: Vec<RunResult>,
    /// Mean validation accuracy per (method, fraction), in run order.
    pub means: Vec<(Method, f64, f64)>,
}

impl SweepResults {
    pub fn mean_accuracy(&self, method: Method, fraction: f64) -> Option<f64> {
        self.means
            .iter()
            .find(|(m, f, _)| *m == method && *f == fraction)
            .map(|(_, _, a)| *a)
    }
}

/// Per-run seed: `hash(base_seed, method, fraction, repeat)`.
fn run_seed(base_seed: u64, method: Method, fraction: f64, repeat: usize) -> u64 {
    derive_seed(
        base_seed,
        &[label("run"), method.id(), fraction.to_bits(), repeat as u64],
    )
}

/// Trains one (method, fraction, repeat) cell: seeded split, build or
/// transplant, fit with the method's hyperparameters, evaluate on validation.
pub fn run_single(
    config: &ExperimentConfig,
    method: Method,
    fraction: f64,
    repeat: usize,
    corpus: &[ImageSample],
    pretrained: Option<&Checkpoint>,
) -> Result<RunResult> {
    let seed = run_seed(config.base_seed, method, fraction, repeat);
    let per_condition_total = smallest_class_count(corpus)?;
    let split = crate::signal::DatasetSplit::from_fraction(
        fraction,
        per_condition_total,
        derive_seed(seed, &[label("split")]),
    )?;
    let (train, validation) = crate::signal::split_dataset(corpus, &split)?;

    let (mut network, optimizer_config) = match method {
        Method::Transfer => {
            let ckpt = pretrained.ok_or_else(|| {
                Error::Config(
                    "transfer method requires a pretrained checkpoint; run pretrain first".into(),
                )
            })?;
            let target_spec = spec_by_name(&config.arch_name, config.num_classes)?;
            let mult_transferred = if config.freeze_transferred {
                0.0
            } else {
                config.lr_transferred / config.lr_new
            };
            let plan = TransferPlan::all_but_last_stage(&target_spec, mult_transferred, 1.0)?;
            let outcome = transplant(ckpt, &target_spec, &plan, derive_seed(seed, &[label("init")]))?;
            let opt = OptimizerConfig::new(config.lr_new, config.momentum_transfer)?
                .with_multipliers(outcome.lr_multipliers);
            (outcome.network, opt)
        }
        Method::Local => {
            let local_name = crate::network::registry::local_variant(&config.arch_name)?;
            let spec = spec_by_name(local_name, config.num_classes)?;
            let network = build_network(&spec, derive_seed(seed, &[label("init")]))?;
            let opt = OptimizerConfig::new(config.lr_new, config.momentum_local)?;
            (network, opt)
        }
    };

    let loss_config = LossConfig::new(config.gamma, config.num_classes)?;
    let mut sgd = Sgd::new(optimizer_config, &network);
    let history = fit(
        &mut network,
        &train,
        config.epochs,
        config.batch_size,
        &mut sgd,
        &loss_config,
        derive_seed(seed, &[label("train")]),
    )?;
    let accuracy = evaluate_accuracy(&network, &validation)?;
    Ok(RunResult {
        method,
        fraction,
        repeat,
        accuracy,
        history,
        final_network: network,
    })
}

fn smallest_class_count(corpus: &[ImageSample]) -> Result<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for s in corpus {
        *counts.entry(s.label).or_insert(0) += 1;
    }
    counts
        .values()
        .min()
        .copied()
        .ok_or_else(|| Error::InsufficientData("empty corpus".into()))
}

/// Runs the full sweep. Runs are independent (each carries its own derived
/// seed) and execute in parallel; results come back in deterministic order.
pub fn run_sweep(
    config: &ExperimentConfig,
    methods: &[Method],
    corpus: &[ImageSample],
    pretrained: Option<&Checkpoint>,
) -> Result<SweepResults> {
    if methods.contains(&Method::Transfer) && pretrained.is_none() {
        return Err(Error::Config(
            "sweep includes the transfer method but no pretrained checkpoint was supplied; run pretrain first".into(),
        ));
    }
    let mut cells = Vec::new();
    for &method in methods {
        for &fraction in &config.fractions {
            for repeat in 0..config.repeats {
                cells.push((method, fraction, repeat));
            }
        }
    }
    let runs: Vec<Result<RunResult>> = cells
        .par_iter()
        .map(|&(method, fraction, repeat)| {
            run_single(config, method, fraction, repeat, corpus, pretrained)
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut means = Vec::new();
    for &method in methods {
        for &fraction in &config.fractions {
            let accs: Vec<f64> = runs
                .iter()
                .filter(|r| r.method == method && r.fraction == fraction)
                .map(|r| r.accuracy)
                .collect();
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            means.push((method, fraction, mean));
        }
    }
    Ok(SweepResults { runs, means })
}

/// Writes `results.csv`, per-run history CSVs, and per-run final checkpoints.
pub fn write_sweep_outputs(
    results: &SweepResults,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut csv = String::from("method,fraction,repeat,accuracy\n");
    for r in &results.runs {
        writeln!(csv, "{},{},{},{}", r.method.name(), r.fraction, r.repeat, r.accuracy)
            .expect("string write");
    }
    for (method, fraction, mean) in &results.means {
        writeln!(csv, "{},{},mean,{}", method.name(), fraction, mean).expect("string write");
    }
    std::fs::write(out_dir.join("results.csv"), csv)?;

    for r in &results.runs {
        let stem = format!("{}_f{}_r{}", r.method.name(), r.fraction, r.repeat);
        r.history.write_csv(&out_dir.join(format!("history_{stem}.csv")))?;
        save_checkpoint(
            &r.final_network,
            &out_dir.join(format!("ckpt_{stem}.ckpt")),
            &format!(
                "sweep {} method={} fraction={} repeat={} base_seed={}",
                config.arch_name,
                r.method.name(),
                r.fraction,
                r.repeat,
                config.base_seed
            ),
            DType::F64,
        )?;
    }
    Ok(())
}

/// Encodes a generated signal corpus into training images.
pub fn encode_corpus(corpus: &SignalCorpus, opts: &PipelineOptions) -> Result<Vec<ImageSample>> {
    corpus
        .records
        .par_iter()
        .map(|rec| {
            record_to_image(
                &rec.record,
                rec.condition.label,
                &format!("cond{}_{:03}", rec.condition.label, rec.index),
                opts,
            )
        })
        .collect()
}

/// Pretrains an architecture on the synthetic source task and returns the
/// trained network plus its history.
#[allow(clippy::too_many_arguments)]
pub fn pretrain_on_source(
    arch_name: &str,
    source_seed: u64,
    num_classes: usize,
    samples_per_class: usize,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    momentum: f64,
    gamma: f64,
) -> Result<(Network, TrainHistory)> {
    let corpus = crate::synth::generate_source_task(source_seed, num_classes, samples_per_class)?;
    let spec = spec_by_name(arch_name, num_classes)?;
    let mut network = build_network(&spec, derive_seed(source_seed, &[label("pretrain-init")]))?;
    let mut sgd = Sgd::new(OptimizerConfig::new(learning_rate, momentum)?, &network);
    let loss_config = LossConfig::new(gamma, num_classes)?;
    let history = fit(
        &mut network,
        &corpus,
        epochs,
        batch_size,
        &mut sgd,
        &loss_config,
        derive_seed(source_seed, &[label("pretrain-train")]),
    )?;
    Ok((network, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_seed_is_stable_and_distinct() {
        let a = run_seed(1, Method::Transfer, 0.05, 0);
        let b = run_seed(1, Method::Transfer, 0.05, 0);
        assert_eq!(a, b);
        assert_ne!(a, run_seed(1, Method::Local, 0.05, 0));
        assert_ne!(a, run_seed(1, Method::Transfer, 0.02, 0));
        assert_ne!(a, run_seed(1, Method::Transfer, 0.05, 1));
        assert_ne!(a, run_seed(2, Method::Transfer, 0.05, 0));
    }

    #[test]
    fn config_defaults_match_protocol() {
        let c = ExperimentConfig::default();
        assert_eq!(c.fractions, vec![0.8, 0.6, 0.4, 0.2, 0.1, 0.05, 0.02]);
        assert_eq!(c.repeats, 5);
        assert_eq!(c.epochs, 15);
        assert_eq!(c.batch_size, 5);
        assert_eq!(c.lr_transferred, 1e-4);
        assert_eq!(c.lr_new, 1e-2);
        assert_eq!(c.momentum_transfer, 0.9);
        assert_eq!(c.momentum_local, 0.5);
    }

    #[test]
    fn config_partial_json_fills_defaults() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"fractions": [0.05], "repeats": 2}"#).unwrap();
        assert_eq!(c.fractions, vec![0.05]);
        assert_eq!(c.repeats, 2);
        assert_eq!(c.epochs, 15);
        assert_eq!(c.arch_name, "mini");
    }

    #[test]
    fn transfer_without_checkpoint_is_instructive_error() {
        let config = ExperimentConfig {
            fractions: vec![0.5],
            repeats: 1,
            ..ExperimentConfig::default()
        };
        let err = run_sweep(&config, &[Method::Transfer], &[], None).unwrap_err();
        assert!(err.to_string().contains("pretrain"), "{err}");
    }
}
