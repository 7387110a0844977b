use std::collections::HashMap;

use crate::analysis::{AnalysisRow, AnalysisTable};
use crate::dataset::EmbeddedDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scoring::{ComplexityRecord, DistanceKind};

use super::predictions::PredictionsFile;

/// Joins complexity records with optional external predictions and raw
/// coordinates.
///
/// Errors come from `predictions` when given, otherwise from the baseline
/// prediction under `baseline`. Columns are `compl_*` per scored kind,
/// then `confidence`, then `x1..xd` when `coordinates` is given.
///
/// Without external predictions the confidence is the baseline
/// classifier's own, `exp(-nll)`. External predictions without a
/// confidence column drop it.
pub fn build_analysis_table<T: Scalar>(
    records: &[ComplexityRecord<T>],
    predictions: Option<&PredictionsFile>,
    coordinates: Option<&EmbeddedDataset<T>>,
    baseline: DistanceKind,
) -> Result<AnalysisTable> {
    let kinds: Vec<DistanceKind> = records
        .first()
        .map(|r| r.complexity.keys().copied().collect())
        .unwrap_or_default();
    if predictions.is_none() && !kinds.contains(&baseline) && !records.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "records were not scored with the baseline metric `{baseline}`"
        )));
    }
    if let Some(p) = predictions {
        let missing: Vec<String> = records
            .iter()
            .filter(|r| p.get(&r.id).is_none())
            .map(|r| r.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Join(missing));
        }
    }
    let coord_index: Option<HashMap<&str, &[T]>> = coordinates.map(|d| {
        d.samples()
            .iter()
            .map(|s| (s.id.as_str(), s.vector.as_slice()))
            .collect()
    });
    if let Some(ix) = &coord_index {
        let missing: Vec<String> = records
            .iter()
            .filter(|r| !ix.contains_key(r.id.as_str()))
            .map(|r| r.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Join(missing));
        }
    }

    let mut names: Vec<String> = kinds.iter().map(|k| k.feature_name().to_string()).collect();
    let with_conf = predictions.is_none_or(PredictionsFile::has_confidence);
    if with_conf {
        names.push("confidence".into());
    }
    let dim = coordinates.map_or(0, EmbeddedDataset::dim);
    names.extend((1..=dim).map(|k| format!("x{k}")));

    let rows = records
        .iter()
        .map(|r| {
            let mut features = Vec::with_capacity(names.len());
            for k in &kinds {
                let v = r
                    .complexity
                    .get(k)
                    .ok_or_else(|| Error::InvalidArgument(format!("record `{}` lacks metric `{k}`", r.id)))?;
                features.push(v.as_f64());
            }
            let predicted_label = match predictions {
                Some(p) => {
                    let pred = p.get(&r.id).expect("joined above");
                    if with_conf {
                        features.push(pred.confidence.expect("uniform confidence column"));
                    }
                    pred.predicted_label.clone()
                }
                None => {
                    features.push((-r.baseline_nll[&baseline].as_f64()).exp());
                    r.baseline_prediction[&baseline].clone()
                }
            };
            if let Some(ix) = &coord_index {
                features.extend(ix[r.id.as_str()].iter().map(|v| v.as_f64()));
            }
            Ok(AnalysisRow {
                id: r.id.clone(),
                true_label: r.true_label.clone(),
                is_error: predicted_label != r.true_label,
                predicted_label,
                features,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    AnalysisTable::new(names, rows)
}
