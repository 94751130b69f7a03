//! Seeded per-condition train/validation splitting.

use super::encode::ImageSample;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, label, rng_from_seed};
use rand::Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy)]
pub struct DatasetSplit {
    pub train_fraction: f64,
    pub per_condition_train_count: usize,
    pub split_seed: u64,
}

impl DatasetSplit {
    /// Derives the per-condition training count as
    /// `round(fraction * per_condition_total)`.
    pub fn from_fraction(fraction: f64, per_condition_total: usize, split_seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Config(format!(
                "train fraction must be in (0, 1], got {fraction}"
            )));
        }
        let count = (fraction * per_condition_total as f64).round() as usize;
        if count == 0 {
            return Err(Error::Config(format!(
                "fraction {fraction} of {per_condition_total} rounds to zero training samples"
            )));
        }
        Ok(Self {
            train_fraction: fraction,
            per_condition_train_count: count,
            split_seed,
        })
    }
}

/// Picks `per_condition_train_count` samples per condition uniformly without
/// replacement (seeded); the rest become validation. The two sets partition
/// the corpus.
pub fn split_dataset(
    corpus: &[ImageSample],
    split: &DatasetSplit,
) -> Result<(Vec<ImageSample>, Vec<ImageSample>)> {
    let mut by_condition: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in corpus.iter().enumerate() {
        by_condition.entry(s.label).or_default().push(i);
    }
    let want = split.per_condition_train_count;
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for (cond, indices) in &by_condition {
        if indices.len() < want {
            return Err(Error::InsufficientData(format!(
                "condition {cond} has {} samples, need {want} for training",
                indices.len()
            )));
        }
        // partial Fisher-Yates over this condition's positions
        let mut pool: Vec<usize> = indices.clone();
        let mut rng = rng_from_seed(derive_seed(split.split_seed, &[label("split"), *cond as u64]));
        for slot in 0..want {
            let pick = rng.gen_range(slot..pool.len());
            pool.swap(slot, pick);
        }
        let (chosen, rest) = pool.split_at(want);
        let mut chosen = chosen.to_vec();
        let mut rest = rest.to_vec();
        chosen.sort_unstable();
        rest.sort_unstable();
        train_idx.extend(chosen);
        val_idx.extend(rest);
    }
    let train = train_idx.iter().map(|&i| corpus[i].clone()).collect();
    let val = val_idx.iter().map(|&i| corpus[i].clone()).collect();
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    fn corpus(conditions: usize, per_condition: usize) -> Vec<ImageSample> {
        let mut out = Vec::new();
        for c in 0..conditions {
            for i in 0..per_condition {
                out.push(ImageSample {
                    pixels: Tensor::filled(&[2, 2, 3], (c * per_condition + i) as f64),
                    label: c,
                    source_id: format!("c{c}_{i}"),
                });
            }
        }
        out
    }

    #[test]
    fn table_counts_from_fractions() {
        let expect = [
            (0.8, 83),
            (0.6, 62),
            (0.4, 42),
            (0.2, 21),
            (0.1, 10),
            (0.05, 5),
            (0.02, 2),
        ];
        for (f, count) in expect {
            let split = DatasetSplit::from_fraction(f, 104, 0).unwrap();
            assert_eq!(split.per_condition_train_count, count, "fraction {f}");
        }
    }

    #[test]
    fn five_percent_of_104_splits_5_and_99() {
        let corpus = corpus(9, 104);
        let split = DatasetSplit::from_fraction(0.05, 104, 7).unwrap();
        let (train, val) = split_dataset(&corpus, &split).unwrap();
        assert_eq!(train.len(), 5 * 9);
        assert_eq!(val.len(), 99 * 9);
        for c in 0..9 {
            assert_eq!(train.iter().filter(|s| s.label == c).count(), 5);
            assert_eq!(val.iter().filter(|s| s.label == c).count(), 99);
        }
    }

    #[test]
    fn split_partitions_corpus() {
        let corpus = corpus(4, 13);
        let split = DatasetSplit::from_fraction(0.5, 13, 3).unwrap();
        let (train, val) = split_dataset(&corpus, &split).unwrap();
        assert_eq!(train.len() + val.len(), corpus.len());
        let mut ids: Vec<&str> = train
            .iter()
            .chain(val.iter())
            .map(|s| s.source_id.as_str())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), corpus.len(), "train/val overlap or loss");
    }

    #[test]
    fn insufficient_condition_is_named() {
        let mut c = corpus(3, 10);
        c.retain(|s| !(s.label == 1 && s.source_id.ends_with("_9")));
        let split = DatasetSplit {
            train_fraction: 1.0,
            per_condition_train_count: 10,
            split_seed: 0,
        };
        let err = split_dataset(&c, &split).unwrap_err();
        assert!(err.to_string().contains("condition 1"), "{err}");
    }

    #[test]
    fn different_seeds_give_different_picks() {
        let corpus = corpus(1, 50);
        let a = split_dataset(&corpus, &DatasetSplit::from_fraction(0.2, 50, 1).unwrap()).unwrap();
        let b = split_dataset(&corpus, &DatasetSplit::from_fraction(0.2, 50, 2).unwrap()).unwrap();
        let ids_a: Vec<&str> = a.0.iter().map(|s| s.source_id.as_str()).collect();
        let ids_b: Vec<&str> = b.0.iter().map(|s| s.source_id.as_str()).collect();
        assert_ne!(ids_a, ids_b);
    }
}
