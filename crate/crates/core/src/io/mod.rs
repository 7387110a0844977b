//! File formats, train/test splitting, analysis-table assembly and report
//! emission.

mod dataset;
mod json;
mod model;
mod predictions;
mod report;
mod split;
mod table;

pub use dataset::{
    read_dataset, read_dataset_binary, read_dataset_csv, write_dataset_binary, write_dataset_csv,
    BINARY_MAGIC,
};
pub use json::{format_float, to_json_string};
pub use model::{read_model_json, write_model_json};
pub use predictions::{read_predictions, Prediction, PredictionsFile};
pub use report::{
    emit_report, read_report_json, write_heatmap_csv, write_records_csv, write_slices_csv,
    write_stats_csv, Report, ReportConfig, ReportFormat, REPORT_VERSION,
};
pub use split::{split, SplitSpec};
pub use table::build_analysis_table;
