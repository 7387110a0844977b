use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cplx_core::io::{
    build_analysis_table, emit_report, read_dataset, read_model_json, read_predictions, split,
    to_json_string, write_dataset_binary, write_dataset_csv, write_heatmap_csv, write_model_json,
    write_records_csv, write_slices_csv, write_stats_csv, PredictionsFile, Report, ReportConfig,
    ReportFormat, SplitSpec, REPORT_VERSION,
};
use cplx_core::{
    dataset_stats, exact_model, find_all_slices, generate, heatmap, padded_bounds, preset,
    score_dataset, Dataset, DistanceKind, Error, ErrorClass, Fallback, GeometryConfig,
    HeatmapValue, LabelMode, Model, Preset, Record, Shrinkage, Slice, SliceConfig, DEFAULT_SEED,
};

/// Raw coordinates become slice features only up to this dimension.
const MAX_COORDINATE_FEATURES: usize = 8;

type Result<T, E = Error> = std::result::Result<T, E>;

/// Per-sample complexity scores, baseline accuracy and error slices for
/// labeled embeddings.
#[derive(Debug, Parser)]
#[command(name = "cplx", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Distance used for the baseline classifier, stats, slicing errors and
    /// heatmaps: euclidean, cosine, mahalanobis, mahalanobis_corr.
    #[arg(long, global = true, default_value = "mahalanobis")]
    metric: DistanceKind,
    /// Covariance shrinkage: ledoit-wolf, none, or ridge:<eps>.
    #[arg(long, global = true, default_value = "ledoit-wolf", value_parser = parse_shrinkage)]
    shrinkage: Shrinkage,
    /// Seed for synthetic data and for --split.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Fit on a seeded stratified train fraction and score the rest.
    #[arg(long, global = true, value_name = "TRAIN_FRACTION")]
    split: Option<f64>,
    /// Minimum rows per slice; defaults to max(10, 1% of rows).
    #[arg(long, global = true)]
    min_support: Option<usize>,
    /// Quantile bins per feature in two-feature slice search.
    #[arg(long, global = true, default_value_t = 32)]
    grid: usize,
    /// External predictions CSV (`id,predicted_label[,confidence]`) that
    /// decides which rows are errors.
    #[arg(long, global = true)]
    predictions: Option<PathBuf>,
    /// Output file (directory for `--format csv` reports). Defaults to stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Share one covariance across classes.
    #[arg(long, global = true)]
    pooled: bool,
    /// Use n-1 covariance normalization.
    #[arg(long, global = true)]
    unbiased: bool,
    /// Inverse used for ill-conditioned covariances.
    #[arg(long, global = true, value_enum, default_value_t = FallbackArg::Ridge)]
    fallback: FallbackArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    /// CPLX1 binary dataset (synth only).
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FallbackArg {
    Ridge,
    Pinv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ValueArg {
    Complexity,
    Confidence,
}

#[derive(Debug, Args)]
struct Input {
    /// Dataset file (CSV `id,label,e0,...` or CPLX1 binary).
    dataset: PathBuf,
    /// Model from `cplx fit`; fitted on the fly when absent.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SliceArgs {
    /// Skip the two-feature rectangle search.
    #[arg(long)]
    no_pairs: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dataset statistics and baseline accuracy.
    Stats(Input),
    /// Fit class geometry and write the model as JSON.
    Fit {
        dataset: PathBuf,
    },
    /// Per-sample distances, complexities, baseline predictions and OOD score.
    Score(Input),
    /// Ranked error slices over complexity, confidence and coordinates.
    Slices {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        slices: SliceArgs,
    },
    /// Sample a synthetic preset.
    Synth {
        /// two_equal, circle_ellipse, three_single_overlap, three_two_overlaps.
        #[arg(long)]
        preset: Preset,
        /// Samples per class.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Complexity or confidence on a dense 2-D grid, as `x,y,value`.
    Heatmap {
        /// Dataset to fit and bound the grid; omit with --preset.
        dataset: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Sample this preset instead of reading a dataset.
        #[arg(long, conflicts_with = "dataset")]
        preset: Option<Preset>,
        /// Use the preset's generating parameters instead of a fit.
        #[arg(long, requires = "preset")]
        exact: bool,
        /// Grid points per axis.
        #[arg(long, default_value_t = 101)]
        resolution: usize,
        #[arg(long, value_enum, default_value_t = ValueArg::Complexity)]
        value: ValueArg,
        /// Evaluate against this class instead of the nearest one.
        #[arg(long)]
        label: Option<String>,
        /// Margin around the data, as a fraction of its extent.
        #[arg(long, default_value_t = 0.1)]
        pad: f64,
    },
    /// Stats, records and slices in one report.
    Report {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        slices: SliceArgs,
    },
}

fn parse_shrinkage(s: &str) -> Result<Shrinkage, String> {
    match s.to_ascii_lowercase().replace('_', "-").as_str() {
        "ledoit-wolf" | "lw" => Ok(Shrinkage::LedoitWolf),
        "none" => Ok(Shrinkage::None),
        other => match other.strip_prefix("ridge:") {
            Some(eps) => match eps.parse::<f64>() {
                Ok(e) if e >= 0.0 && e.is_finite() => Ok(Shrinkage::Ridge(e)),
                _ => Err(format!("invalid ridge size `{eps}`")),
            },
            None => Err(format!("expected ledoit-wolf, none or ridge:<eps>, got `{s}`")),
        },
    }
}

impl Global {
    fn geometry(&self) -> GeometryConfig {
        GeometryConfig {
            shrinkage: self.shrinkage,
            fallback: match self.fallback {
                FallbackArg::Ridge => Fallback::Ridge,
                FallbackArg::Pinv => Fallback::PseudoInverse,
            },
            pooled: self.pooled,
            unbiased: self.unbiased,
            ..GeometryConfig::default()
        }
    }

    fn split_spec(&self) -> Option<SplitSpec> {
        self.split.map(|f| SplitSpec {
            train_fraction: f,
            seed: self.seed,
            stratified: true,
        })
    }

    fn format(&self, default: Format, allowed: &[Format]) -> Result<Format> {
        let f = self.format.unwrap_or(default);
        if allowed.contains(&f) {
            Ok(f)
        } else {
            Err(Error::InvalidArgument(format!("--format {f:?} is not supported here").to_lowercase()))
        }
    }

    fn predictions(&self) -> Result<Option<PredictionsFile>> {
        self.predictions.as_ref().map(read_predictions).transpose()
    }

    fn slice_config(&self, rows: usize) -> SliceConfig {
        let mut c = SliceConfig::for_rows(rows);
        if let Some(m) = self.min_support {
            c.min_support = m;
        }
        c.grid = self.grid;
        c
    }

    /// Writes `bytes` to `--output` or stdout.
    fn emit(&self, bytes: &[u8]) -> Result<()> {
        match &self.output {
            Some(path) => {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    fs::create_dir_all(parent)?;
                }
                fs::write(path, bytes)?;
            }
            None => io::stdout().lock().write_all(bytes)?,
        }
        Ok(())
    }
}

/// Dataset to score and the model to score it with.
struct Prepared {
    scored: Dataset,
    model: Model,
}

fn prepare(global: &Global, input: &Input) -> Result<Prepared> {
    let data: Dataset = read_dataset(&input.dataset)?;
    let (train, scored) = match global.split_spec() {
        Some(spec) => split(&data, &spec)?,
        None => (data.clone(), data),
    };
    let model = match &input.model {
        Some(path) => read_model_json(path)?,
        None => Model::fit(&train, &global.geometry())?,
    };
    Ok(Prepared { scored, model })
}

fn kinds(model: &Model) -> Vec<DistanceKind> {
    DistanceKind::ALL
        .into_iter()
        .filter(|k| !k.is_mahalanobis() || model.supports_mahalanobis())
        .collect()
}

fn slices_for(global: &Global, p: &Prepared, records: &[Record], args: &SliceArgs) -> Result<Vec<Slice>> {
    let predictions = global.predictions()?;
    let coords = (p.scored.dim() <= MAX_COORDINATE_FEATURES).then_some(&p.scored);
    let table = build_analysis_table(records, predictions.as_ref(), coords, global.metric)?;
    find_all_slices(&table, &global.slice_config(table.len()), !args.no_pairs)
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Fit { dataset } => {
            g.format(Format::Json, &[Format::Json])?;
            let data: Dataset = read_dataset(dataset)?;
            let train = match g.split_spec() {
                Some(spec) => split(&data, &spec)?.0,
                None => data,
            };
            let model = Model::fit(&train, &g.geometry())?;
            match &g.output {
                Some(path) => write_model_json(&model, path),
                None => g.emit(to_json_string(&model)?.as_bytes()),
            }
        }
        Command::Stats(input) => {
            let p = prepare(g, input)?;
            let stats = dataset_stats(&p.scored, &p.model, g.metric)?;
            let mut buf = Vec::new();
            match g.format(Format::Json, &[Format::Json, Format::Csv])? {
                Format::Csv => write_stats_csv(&stats, &mut buf)?,
                _ => buf = to_json_string(&stats)?.into_bytes(),
            }
            g.emit(&buf)
        }
        Command::Score(input) => {
            let p = prepare(g, input)?;
            let records = score_dataset(&p.scored, &p.model, &kinds(&p.model))?;
            let mut buf = Vec::new();
            match g.format(Format::Json, &[Format::Json, Format::Csv])? {
                Format::Csv => write_records_csv(&records, &mut buf)?,
                _ => buf = to_json_string(&records)?.into_bytes(),
            }
            g.emit(&buf)
        }
        Command::Slices { input, slices } => {
            let p = prepare(g, input)?;
            let records = score_dataset(&p.scored, &p.model, &kinds(&p.model))?;
            let found = slices_for(g, &p, &records, slices)?;
            let mut buf = Vec::new();
            match g.format(Format::Json, &[Format::Json, Format::Csv])? {
                Format::Csv => write_slices_csv(&found, &mut buf)?,
                _ => buf = to_json_string(&found)?.into_bytes(),
            }
            g.emit(&buf)
        }
        Command::Report { input, slices } => {
            let format = g.format(Format::Json, &[Format::Json, Format::Csv])?;
            let p = prepare(g, input)?;
            let kinds = kinds(&p.model);
            let records = score_dataset(&p.scored, &p.model, &kinds)?;
            let found = slices_for(g, &p, &records, slices)?;
            let rows = records.len();
            let report = Report {
                format_version: REPORT_VERSION.into(),
                config: ReportConfig {
                    metric: g.metric,
                    kinds,
                    geometry: p.model.config().clone(),
                    split: g.split_spec(),
                    min_support: g.slice_config(rows).min_support,
                    grid: g.grid,
                    predictions: g.predictions.as_ref().map(|p| p.display().to_string()),
                },
                stats: dataset_stats(&p.scored, &p.model, g.metric)?,
                records,
                slices: found,
            };
            match (format, &g.output) {
                (Format::Json, None) => g.emit(to_json_string(&report)?.as_bytes()),
                (Format::Json, Some(path)) => emit_report(&report, ReportFormat::Json, path).map(drop),
                (_, Some(dir)) => emit_report(&report, ReportFormat::CsvBundle, dir).map(drop),
                (_, None) => Err(Error::InvalidArgument(
                    "--format csv writes a directory; pass --output".into(),
                )),
            }
        }
        Command::Synth { preset: which, count } => {
            let mut specs = preset::<f64>(*which);
            if let Some(n) = count {
                specs.iter_mut().for_each(|s| s.count = *n);
            }
            let data = generate(&specs, g.seed)?;
            let mut buf = Vec::new();
            match g.format(Format::Csv, &[Format::Csv, Format::Binary])? {
                Format::Binary => write_dataset_binary(&data, &mut buf)?,
                _ => write_dataset_csv(&data, &mut buf)?,
            }
            g.emit(&buf)
        }
        Command::Heatmap {
            dataset,
            model,
            preset: which,
            exact,
            resolution,
            value,
            label,
            pad,
        } => {
            let data: Dataset = match (dataset, which) {
                (Some(path), _) => read_dataset(path)?,
                (None, Some(p)) => generate(&preset::<f64>(*p), g.seed)?,
                (None, None) => {
                    return Err(Error::InvalidArgument("pass a dataset or --preset".into()));
                }
            };
            let model = match (model, which) {
                (Some(path), _) => read_model_json(path)?,
                (None, Some(p)) if *exact => exact_model(&preset::<f64>(*p), &g.geometry())?,
                _ => Model::fit(&data, &g.geometry())?,
            };
            let (xr, yr) = padded_bounds(&data, *pad);
            let hv = match value {
                ValueArg::Complexity => HeatmapValue::Complexity(g.metric),
                ValueArg::Confidence => HeatmapValue::Confidence(g.metric),
            };
            let mode = label.clone().map_or(LabelMode::MinOverClasses, LabelMode::FixedLabel);
            let grid = heatmap(&model, xr, yr, (*resolution, *resolution), hv, &mode)?;
            let mut buf = Vec::new();
            match g.format(Format::Csv, &[Format::Csv, Format::Json])? {
                Format::Json => buf = to_json_string(&grid)?.into_bytes(),
                _ => write_heatmap_csv(&grid, &mut buf)?,
            }
            g.emit(&buf)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Validation => 2,
        ErrorClass::Numerical => 3,
        ErrorClass::Io => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
