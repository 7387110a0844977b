use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One labeled embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Sample<T> {
    pub id: String,
    pub label: String,
    pub vector: Vec<T>,
}

impl<T> Sample<T> {
    pub fn new(id: impl Into<String>, label: impl Into<String>, vector: Vec<T>) -> Self {
        Sample {
            id: id.into(),
            label: label.into(),
            vector,
        }
    }
}

/// Validated collection of labeled, equal-length, finite vectors.
///
/// Row order is preserved; `classes` is the sorted set of distinct labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EmbeddedDataset<T> {
    samples: Vec<Sample<T>>,
    dim: usize,
    classes: Vec<String>,
}

impl<T: Scalar> EmbeddedDataset<T> {
    pub fn new(samples: Vec<Sample<T>>) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyDataset)?;
        let dim = first.vector.len();
        if dim == 0 {
            return Err(Error::InvalidDataset("vectors must have dimension >= 1".into()));
        }
        let mut ids = HashSet::with_capacity(samples.len());
        for (row, s) in samples.iter().enumerate() {
            if s.vector.len() != dim {
                return Err(Error::InvalidDataset(format!(
                    "row {row} (`{}`) has dimension {}, expected {dim}",
                    s.id,
                    s.vector.len()
                )));
            }
            if s.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "row {row} (`{}`) contains a non-finite value",
                    s.id
                )));
            }
            if !ids.insert(s.id.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate id `{}`", s.id)));
            }
        }
        let mut classes: Vec<String> = samples.iter().map(|s| s.label.clone()).collect();
        classes.sort();
        classes.dedup();
        Ok(EmbeddedDataset {
            samples,
            dim,
            classes,
        })
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample<T>> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for s in &self.samples {
            *counts.entry(s.label.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// Vectors grouped by label, in row order within each class.
    pub fn vectors_by_class(&self) -> BTreeMap<&str, Vec<&[T]>> {
        let mut groups: BTreeMap<&str, Vec<&[T]>> = BTreeMap::new();
        for s in &self.samples {
            groups.entry(s.label.as_str()).or_default().push(&s.vector);
        }
        groups
    }

    /// New dataset holding the rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.samples[i].clone()).collect())
    }

    /// Applies `f` to every vector.
    pub fn map_vectors(&self, mut f: impl FnMut(&[T]) -> Vec<T>) -> Result<Self> {
        Self::new(
            self.samples
                .iter()
                .map(|s| Sample::new(s.id.clone(), s.label.clone(), f(&s.vector)))
                .collect(),
        )
    }

    pub(crate) fn require_classification(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "classification needs at least 2 classes, found {}",
                self.classes.len()
            )));
        }
        Ok(())
    }
}
