use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ParseError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub predicted_label: String,
    pub confidence: Option<f64>,
}

/// External classifier output: CSV `id,predicted_label[,confidence]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionsFile {
    rows: Vec<Prediction>,
    index: HashMap<String, usize>,
    has_confidence: bool,
}

impl PredictionsFile {
    pub fn new(rows: Vec<Prediction>) -> Result<Self> {
        let has_confidence = rows.first().is_some_and(|r| r.confidence.is_some());
        let mut index = HashMap::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            let line = i as u64 + 2;
            if index.insert(r.id.clone(), i).is_some() {
                return Err(ParseError::DuplicateId { line, id: r.id.clone() }.into());
            }
            if r.confidence.is_some() != has_confidence {
                return Err(ParseError::Malformed {
                    line,
                    reason: "confidence present on some rows only".into(),
                }
                .into());
            }
        }
        Ok(PredictionsFile {
            rows,
            index,
            has_confidence,
        })
    }

    pub fn rows(&self) -> &[Prediction] {
        &self.rows
    }

    pub fn get(&self, id: &str) -> Option<&Prediction> {
        self.index.get(id).map(|&i| &self.rows[i])
    }

    pub fn has_confidence(&self) -> bool {
        self.has_confidence
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = rdr.records();
        let bad_header = |reason: &str| ParseError::MalformedHeader {
            line: 1,
            reason: reason.to_string(),
        };
        let header = records
            .next()
            .ok_or_else(|| bad_header("file is empty"))?
            .map_err(|e| bad_header(&e.to_string()))?;
        let fields: Vec<&str> = header.iter().map(str::trim).collect();
        let with_conf = match fields.as_slice() {
            ["id", "predicted_label"] => false,
            ["id", "predicted_label", "confidence"] => true,
            _ => return Err(bad_header("expected `id,predicted_label[,confidence]`").into()),
        };
        let width = fields.len();
        let mut rows = Vec::new();
        for rec in records {
            let rec = rec.map_err(|e| ParseError::Malformed {
                line: e.position().map_or(0, |p| p.line()),
                reason: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != width {
                return Err(ParseError::RaggedRow {
                    line,
                    expected: width,
                    found: rec.len(),
                }
                .into());
            }
            let confidence = if with_conf {
                let raw = &rec[2];
                let v: f64 = raw.trim().parse().map_err(|_| ParseError::InvalidNumber {
                    line,
                    column: "confidence".into(),
                    value: raw.to_string(),
                })?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(ParseError::Malformed {
                        line,
                        reason: format!("confidence {raw} outside [0, 1]"),
                    }
                    .into());
                }
                Some(v)
            } else {
                None
            };
            rows.push(Prediction {
                id: rec[0].trim().to_string(),
                predicted_label: rec[1].trim().to_string(),
                confidence,
            });
        }
        Self::new(rows)
    }
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<PredictionsFile> {
    PredictionsFile::from_reader(File::open(path)?)
}
