use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{DatasetStats, Slice};
use crate::error::{Error, Result};
use crate::geometry::GeometryConfig;
use crate::scalar::Scalar;
use crate::scoring::{ComplexityRecord, DistanceKind};
use crate::synth::HeatmapGrid;

use super::dataset::csv_write_error;
use super::json::{format_float, to_json_string};
use super::split::SplitSpec;

pub const REPORT_VERSION: &str = "cplx-report/1";

/// Settings that produced a report, echoed into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub metric: DistanceKind,
    pub kinds: Vec<DistanceKind>,
    pub geometry: GeometryConfig,
    pub split: Option<SplitSpec>,
    pub min_support: usize,
    pub grid: usize,
    pub predictions: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Report<T> {
    pub format_version: String,
    pub config: ReportConfig,
    pub stats: DatasetStats,
    pub records: Vec<ComplexityRecord<T>>,
    pub slices: Vec<Slice>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// Single JSON document at the output path.
    Json,
    /// `stats.csv`, `records.csv` and `slices.csv` inside the output directory.
    CsvBundle,
}

/// Writes `report` and returns the paths created.
pub fn emit_report<T: Scalar>(report: &Report<T>, format: ReportFormat, output: &Path) -> Result<Vec<PathBuf>> {
    match format {
        ReportFormat::Json => {
            if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(output, to_json_string(report)?)?;
            Ok(vec![output.to_path_buf()])
        }
        ReportFormat::CsvBundle => {
            fs::create_dir_all(output)?;
            let paths = [
                output.join("stats.csv"),
                output.join("records.csv"),
                output.join("slices.csv"),
            ];
            write_stats_csv(&report.stats, fs::File::create(&paths[0])?)?;
            write_records_csv(&report.records, fs::File::create(&paths[1])?)?;
            write_slices_csv(&report.slices, fs::File::create(&paths[2])?)?;
            Ok(paths.to_vec())
        }
    }
}

pub fn read_report_json<T: Scalar>(path: &Path) -> Result<Report<T>> {
    let text = fs::read_to_string(path)?;
    let report: Report<T> = serde_json::from_str(&text)?;
    if report.format_version != REPORT_VERSION {
        return Err(Error::InvalidArgument(format!(
            "unsupported report version `{}`",
            report.format_version
        )));
    }
    Ok(report)
}

fn short(kind: DistanceKind) -> &'static str {
    kind.feature_name().trim_start_matches("compl_")
}

/// `field,value` rows; class counts appear as `class_count:<label>`.
pub fn write_stats_csv<W: Write>(stats: &DatasetStats, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let rows = [
        ("num_classes", stats.num_classes.to_string()),
        ("num_samples", stats.num_samples.to_string()),
        ("normalized_entropy", format_float(stats.normalized_entropy)),
        ("median_class_size", stats.median_class_size.to_string()),
        ("baseline_accuracy", format_float(stats.baseline_accuracy)),
        ("baseline_metric", stats.baseline_metric.to_string()),
    ];
    w.write_record(["field", "value"]).map_err(csv_write_error)?;
    for (k, v) in rows {
        w.write_record([k, v.as_str()]).map_err(csv_write_error)?;
    }
    for (label, c) in &stats.class_counts {
        w.write_record([format!("class_count:{label}"), c.to_string()])
            .map_err(csv_write_error)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per record: `id,true_label,ood_score`, then per metric
/// `compl_<m>,pred_<m>,nll_<m>`, then per metric and class `dist_<m>:<class>`.
pub fn write_records_csv<T: Scalar, W: Write>(records: &[ComplexityRecord<T>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let kinds: Vec<DistanceKind> = records
        .first()
        .map(|r| r.complexity.keys().copied().collect())
        .unwrap_or_default();
    let classes: Vec<String> = records
        .first()
        .and_then(|r| r.distances.values().next())
        .map(|d| d.keys().cloned().collect())
        .unwrap_or_default();
    let mut header = vec!["id".to_string(), "true_label".into(), "ood_score".into()];
    for &k in &kinds {
        header.push(k.feature_name().to_string());
        header.push(format!("pred_{}", short(k)));
        header.push(format!("nll_{}", short(k)));
    }
    for &k in &kinds {
        header.extend(classes.iter().map(|c| format!("dist_{}:{c}", short(k))));
    }
    w.write_record(&header).map_err(csv_write_error)?;
    for r in records {
        let mut row = vec![
            r.id.clone(),
            r.true_label.clone(),
            r.ood_score.map(|v| format_float(v.as_f64())).unwrap_or_default(),
        ];
        for k in &kinds {
            row.push(format_float(r.complexity[k].as_f64()));
            row.push(r.baseline_prediction[k].clone());
            row.push(format_float(r.baseline_nll[k].as_f64()));
        }
        for k in &kinds {
            row.extend(r.distances[k].values().map(|v| format_float(v.as_f64())));
        }
        w.write_record(&row).map_err(csv_write_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Slice table: `features,slice,acc,size,rank,errors,error_precision,error_recall`.
/// Multi-feature slices join names and ranges with `;`; a range is `lo~hi`.
pub fn write_slices_csv<W: Write>(slices: &[Slice], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "features",
        "slice",
        "acc",
        "size",
        "rank",
        "errors",
        "error_precision",
        "error_recall",
    ])
    .map_err(csv_write_error)?;
    for s in slices {
        let ranges: Vec<String> = s
            .ranges
            .iter()
            .map(|(lo, hi)| format!("{}~{}", format_float(*lo), format_float(*hi)))
            .collect();
        w.write_record([
            s.features.join(";"),
            ranges.join(";"),
            format_float(s.slice_accuracy),
            s.support.to_string(),
            format_float(s.rank),
            s.errors.to_string(),
            format_float(s.error_precision),
            format_float(s.error_recall),
        ])
        .map_err(csv_write_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format grid: `x,y,value`, `y` outer.
pub fn write_heatmap_csv<T: Scalar, W: Write>(grid: &HeatmapGrid<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "y", "value"]).map_err(csv_write_error)?;
    for (x, y, v) in grid.points() {
        w.write_record([format_float(x.as_f64()), format_float(y.as_f64()), format_float(v.as_f64())])
            .map_err(csv_write_error)?;
    }
    w.flush()?;
    Ok(())
}
