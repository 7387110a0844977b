use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::EmbeddedDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
            stratified: true,
        }
    }
}

/// Rows kept for training out of `n`: rounded, but leaving both sides
/// non-empty.
fn train_size(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
}

/// Seeded random train/test split. Both outputs keep the input row order.
pub fn split<T: Scalar>(
    dataset: &EmbeddedDataset<T>,
    spec: &SplitSpec,
) -> Result<(EmbeddedDataset<T>, EmbeddedDataset<T>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {} not in (0, 1)",
            spec.train_fraction
        )));
    }
    if dataset.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 rows to split".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    if spec.stratified {
        let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, s) in dataset.samples().iter().enumerate() {
            by_class.entry(&s.label).or_default().push(i);
        }
        for (label, mut idx) in by_class {
            if idx.len() < 2 {
                return Err(Error::Stratification(format!(
                    "class `{label}` has {} sample(s); stratified split needs 2",
                    idx.len()
                )));
            }
            idx.shuffle(&mut rng);
            train.extend_from_slice(&idx[..train_size(idx.len(), spec.train_fraction)]);
        }
    } else {
        let mut idx: Vec<usize> = (0..dataset.len()).collect();
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..train_size(idx.len(), spec.train_fraction)]);
    }
    train.sort_unstable();
    let mut in_train = vec![false; dataset.len()];
    for &i in &train {
        in_train[i] = true;
    }
    let test: Vec<usize> = (0..dataset.len()).filter(|&i| !in_train[i]).collect();
    Ok((dataset.select(&train)?, dataset.select(&test)?))
}
