//! Distances to class geometries, the complexity score, the OOD confidence
//! score and the distance-based baseline classifier.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::EmbeddedDataset;
use crate::error::{Error, Result};
use crate::geometry::{ClassGeometry, GeometryModel};
use crate::linalg::{dot, norm};
use crate::scalar::Scalar;

/// Quadratic forms below `-NEGATIVE_QF_TOLERANCE` are treated as errors;
/// smaller negatives are rounding noise and clamp to zero.
pub const NEGATIVE_QF_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Euclidean,
    Cosine,
    /// Residual whitened by the covariance precision.
    MahalanobisCov,
    /// Raw residual weighted by the inverse Pearson correlation.
    MahalanobisCorr,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 4] = [
        DistanceKind::Euclidean,
        DistanceKind::Cosine,
        DistanceKind::MahalanobisCov,
        DistanceKind::MahalanobisCorr,
    ];

    pub fn is_mahalanobis(self) -> bool {
        matches!(self, DistanceKind::MahalanobisCov | DistanceKind::MahalanobisCorr)
    }

    /// Name of the complexity column this kind produces in analysis tables.
    pub fn feature_name(self) -> &'static str {
        match self {
            DistanceKind::Euclidean => "compl_euc",
            DistanceKind::Cosine => "compl_cos",
            DistanceKind::MahalanobisCov => "compl_mah",
            DistanceKind::MahalanobisCorr => "compl_mah_corr",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DistanceKind::Euclidean => "euclidean",
            DistanceKind::Cosine => "cosine",
            DistanceKind::MahalanobisCov => "mahalanobis",
            DistanceKind::MahalanobisCorr => "mahalanobis_corr",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "euclidean" | "euc" => Ok(DistanceKind::Euclidean),
            "cosine" | "cos" => Ok(DistanceKind::Cosine),
            "mahalanobis" | "mahalanobis_cov" | "mah" => Ok(DistanceKind::MahalanobisCov),
            "mahalanobis_corr" | "mah_corr" => Ok(DistanceKind::MahalanobisCorr),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

/// Per-sample scores against every class of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ComplexityRecord<T> {
    pub id: String,
    pub true_label: String,
    pub distances: BTreeMap<DistanceKind, BTreeMap<String, T>>,
    pub complexity: BTreeMap<DistanceKind, T>,
    pub baseline_prediction: BTreeMap<DistanceKind, String>,
    pub baseline_nll: BTreeMap<DistanceKind, T>,
    /// Present when the model carries covariance precisions.
    pub ood_score: Option<T>,
}

fn check_dim<T>(x: &[T], expected: usize) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: x.len(),
        });
    }
    Ok(())
}

/// Cosine similarity between `x` and the class centroid.
pub fn cosine_similarity<T: Scalar>(x: &[T], geometry: &ClassGeometry<T>) -> Result<T> {
    check_dim(x, geometry.dim())?;
    let nx = norm(x);
    let nm = norm(&geometry.centroid);
    if nx == T::zero() || nm == T::zero() {
        return Err(Error::DegenerateVector);
    }
    Ok(dot(x, &geometry.centroid) / (nx * nm))
}

/// Distance from `x` to a class geometry. Cosine is `1 - similarity`.
pub fn distance<T: Scalar>(x: &[T], geometry: &ClassGeometry<T>, kind: DistanceKind) -> Result<T> {
    check_dim(x, geometry.dim())?;
    let residual: Vec<T> = x.iter().zip(&geometry.centroid).map(|(&a, &m)| a - m).collect();
    match kind {
        DistanceKind::Euclidean => Ok(norm(&residual)),
        DistanceKind::Cosine => Ok(T::one() - cosine_similarity(x, geometry)?),
        DistanceKind::MahalanobisCov | DistanceKind::MahalanobisCorr => {
            let p = if kind == DistanceKind::MahalanobisCov {
                geometry.precision_cov.as_ref()
            } else {
                geometry.precision_corr.as_ref()
            }
            .ok_or_else(|| Error::PrecisionUnavailable(geometry.label.clone()))?;
            let q = p.quadratic_form(&residual);
            if q < T::zero() {
                if q < -T::c(NEGATIVE_QF_TOLERANCE) {
                    return Err(Error::Numerical(format!(
                        "negative quadratic form {q} for class `{}`",
                        geometry.label
                    )));
                }
                return Ok(T::zero());
            }
            if !q.is_finite() {
                return Err(Error::Numerical("non-finite quadratic form".into()));
            }
            Ok(q.sqrt())
        }
    }
}

/// Distances from `x` to each class, in the model's class order.
pub fn class_distances<T: Scalar>(
    x: &[T],
    model: &GeometryModel<T>,
    kind: DistanceKind,
) -> Result<Vec<T>> {
    check_dim(x, model.dim())?;
    model
        .geometries()
        .values()
        .map(|g| {
            if kind == DistanceKind::Cosine && model.config().literal_cosine {
                cosine_similarity(x, g)
            } else {
                distance(x, g, kind)
            }
        })
        .collect()
}

/// `-log softmax(-distances)[own]`, shifted by the minimum distance so no
/// exponent is positive.
pub fn complexity_from_distances<T: Scalar>(distances: &[T], own: usize) -> T {
    let min = distances.iter().fold(T::infinity(), |m, &d| m.min(d));
    let sum: T = distances.iter().map(|&d| (min - d).exp()).sum();
    let h = (distances[own] - min) + sum.ln();
    h.max(T::zero())
}

/// Index of the smallest distance; ties go to the earliest (lexicographically
/// first) class.
fn argmin<T: Scalar>(distances: &[T]) -> usize {
    let mut best = 0;
    for (i, &d) in distances.iter().enumerate().skip(1) {
        if d < distances[best] {
            best = i;
        }
    }
    best
}

fn class_index<T: Scalar>(model: &GeometryModel<T>, label: &str) -> Result<usize> {
    model
        .classes()
        .position(|c| c == label)
        .ok_or_else(|| Error::UnknownClass(label.to_string()))
}

/// Complexity of assigning `x` to class `label`.
pub fn complexity<T: Scalar>(
    x: &[T],
    label: &str,
    model: &GeometryModel<T>,
    kind: DistanceKind,
) -> Result<T> {
    let own = class_index(model, label)?;
    let d = class_distances(x, model, kind)?;
    Ok(complexity_from_distances(&d, own))
}

/// Maximum over classes of the negated covariance-Mahalanobis distance.
pub fn ood_score<T: Scalar>(x: &[T], model: &GeometryModel<T>) -> Result<T> {
    let d = class_distances(x, model, DistanceKind::MahalanobisCov)?;
    Ok(d.iter().fold(T::neg_infinity(), |m, &v| m.max(-v)))
}

/// Nearest class under `kind`, with the complexity of that assignment.
pub fn baseline_predict<T: Scalar>(
    x: &[T],
    model: &GeometryModel<T>,
    kind: DistanceKind,
) -> Result<(String, T)> {
    let d = class_distances(x, model, kind)?;
    let best = argmin(&d);
    let label = model.classes().nth(best).expect("index in range").to_string();
    Ok((label, complexity_from_distances(&d, best)))
}

/// Fraction of samples whose baseline prediction equals their label.
pub fn baseline_accuracy<T: Scalar>(
    dataset: &EmbeddedDataset<T>,
    model: &GeometryModel<T>,
    kind: DistanceKind,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits = dataset
        .samples()
        .par_iter()
        .map(|s| baseline_predict(&s.vector, model, kind).map(|(p, _)| usize::from(p == s.label)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(hits as f64 / dataset.len() as f64)
}

/// Scores every sample of `score_set` against `model`, preserving row order.
///
/// Labels absent from the model are rejected.
pub fn score_dataset<T: Scalar>(
    score_set: &EmbeddedDataset<T>,
    model: &GeometryModel<T>,
    kinds: &[DistanceKind],
) -> Result<Vec<ComplexityRecord<T>>> {
    if score_set.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: score_set.dim(),
        });
    }
    let labels: Vec<String> = model.classes().map(str::to_string).collect();
    let with_ood = model.supports_mahalanobis();
    score_set
        .samples()
        .par_iter()
        .map(|s| {
            let own = labels
                .iter()
                .position(|c| *c == s.label)
                .ok_or_else(|| Error::UnknownClass(s.label.clone()))?;
            let mut rec = ComplexityRecord {
                id: s.id.clone(),
                true_label: s.label.clone(),
                distances: BTreeMap::new(),
                complexity: BTreeMap::new(),
                baseline_prediction: BTreeMap::new(),
                baseline_nll: BTreeMap::new(),
                ood_score: None,
            };
            for &kind in kinds {
                let d = class_distances(&s.vector, model, kind)?;
                let best = argmin(&d);
                rec.complexity.insert(kind, complexity_from_distances(&d, own));
                rec.baseline_prediction.insert(kind, labels[best].clone());
                rec.baseline_nll.insert(kind, complexity_from_distances(&d, best));
                rec.distances
                    .insert(kind, labels.iter().cloned().zip(d).collect());
            }
            if with_ood {
                rec.ood_score = Some(match rec.distances.get(&DistanceKind::MahalanobisCov) {
                    Some(d) => d.values().fold(T::neg_infinity(), |m, &v| m.max(-v)),
                    None => ood_score(&s.vector, model)?,
                });
            }
            Ok(rec)
        })
        .collect()
}
