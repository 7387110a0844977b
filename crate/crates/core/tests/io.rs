use std::fs;

use cplx_core::io::*;
use cplx_core::*;

fn scored(p: Preset) -> (Dataset, Model, Vec<Record>) {
    let data = generate(&preset::<f64>(p), DEFAULT_SEED).unwrap();
    let model = Model::fit(&data, &GeometryConfig::default()).unwrap();
    let records = score_dataset(&data, &model, &DistanceKind::ALL).unwrap();
    (data, model, records)
}

fn report(p: Preset, with_slices: bool) -> Report<f64> {
    let (data, model, records) = scored(p);
    let stats = dataset_stats(&data, &model, DistanceKind::MahalanobisCov).unwrap();
    let slices = if with_slices {
        let table = build_analysis_table(&records, None, Some(&data), DistanceKind::MahalanobisCov).unwrap();
        find_all_slices(&table, &SliceConfig::for_rows(table.len()), false).unwrap()
    } else {
        Vec::new()
    };
    Report {
        format_version: REPORT_VERSION.into(),
        config: ReportConfig {
            metric: DistanceKind::MahalanobisCov,
            kinds: DistanceKind::ALL.to_vec(),
            geometry: GeometryConfig::default(),
            split: None,
            min_support: 10,
            grid: 32,
            predictions: None,
        },
        stats,
        records,
        slices,
    }
}

#[test]
fn synthetic_table_has_the_expected_columns() {
    let (data, _, records) = scored(Preset::TwoEqual);
    let table = build_analysis_table(&records, None, Some(&data), DistanceKind::MahalanobisCov).unwrap();
    assert_eq!(
        table.feature_names(),
        ["compl_euc", "compl_cos", "compl_mah", "compl_mah_corr", "confidence", "x1", "x2"]
    );
    for (row, rec) in table.rows().iter().zip(&records) {
        assert_eq!(row.predicted_label, rec.baseline_prediction[&DistanceKind::MahalanobisCov]);
        let conf = row.features[4];
        assert!((0.0..=1.0).contains(&conf));
    }
}

#[test]
fn external_predictions_drive_errors() {
    let (_, _, records) = scored(Preset::TwoEqual);
    let rows: Vec<Prediction> = records
        .iter()
        .map(|r| Prediction {
            id: r.id.clone(),
            predicted_label: "c0".into(),
            confidence: Some(0.75),
        })
        .collect();
    let preds = PredictionsFile::new(rows.clone()).unwrap();
    let table = build_analysis_table(&records, Some(&preds), None, DistanceKind::Euclidean).unwrap();
    assert_eq!(table.num_errors(), 500);
    assert_eq!(table.column("confidence").unwrap()[3], 0.75);

    let no_conf = PredictionsFile::new(
        rows.iter()
            .map(|p| Prediction { confidence: None, ..p.clone() })
            .collect(),
    )
    .unwrap();
    let table = build_analysis_table(&records, Some(&no_conf), None, DistanceKind::Euclidean).unwrap();
    assert!(table.feature_index("confidence").is_err());

    let partial = PredictionsFile::new(rows[1..].to_vec()).unwrap();
    match build_analysis_table(&records, Some(&partial), None, DistanceKind::Euclidean) {
        Err(Error::Join(ids)) => assert_eq!(ids, vec![records[0].id.clone()]),
        other => panic!("expected join error, got {other:?}"),
    }
}

#[test]
fn predictions_file_parsing() {
    let p = PredictionsFile::from_reader("id,predicted_label,confidence\na,x,0.5\nb,y,1\n".as_bytes()).unwrap();
    assert_eq!(p.len(), 2);
    assert!(p.has_confidence());
    assert_eq!(p.get("b").unwrap().predicted_label, "y");
    let p = PredictionsFile::from_reader("id,predicted_label\na,x\n".as_bytes()).unwrap();
    assert!(!p.has_confidence());
    assert!(PredictionsFile::from_reader("id,predicted_label,confidence\na,x,1.5\n".as_bytes()).is_err());
    assert!(PredictionsFile::from_reader("id,predicted_label\na,x\na,y\n".as_bytes()).is_err());
    assert!(PredictionsFile::from_reader("id,label\na,x\n".as_bytes()).is_err());
}

#[test]
fn json_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out/report.json");
    let original = report(Preset::CircleEllipse, true);
    assert!(!original.slices.is_empty());
    emit_report(&original, ReportFormat::Json, &path).unwrap();
    let back: Report<f64> = read_report_json(&path).unwrap();
    assert_eq!(back, original);
    // byte-stable on re-emission
    let again = dir.path().join("again.json");
    emit_report(&back, ReportFormat::Json, &again).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn empty_slice_list_is_still_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    emit_report(&report(Preset::TwoEqual, false), ReportFormat::Json, &path).unwrap();
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(value["slices"], serde_json::json!([]));
    assert_eq!(value["format_version"], REPORT_VERSION);
}

#[test]
fn report_version_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let mut r = report(Preset::TwoEqual, false);
    r.format_version = "something-else".into();
    emit_report(&r, ReportFormat::Json, &path).unwrap();
    assert!(read_report_json::<f64>(&path).is_err());
}

#[test]
fn csv_bundle_layout() {
    let dir = tempfile::tempdir().unwrap();
    let r = report(Preset::TwoEqual, true);
    let paths = emit_report(&r, ReportFormat::CsvBundle, dir.path()).unwrap();
    assert_eq!(paths.len(), 3);
    let slices = fs::read_to_string(dir.path().join("slices.csv")).unwrap();
    let mut lines = slices.lines();
    assert_eq!(
        lines.next().unwrap(),
        "features,slice,acc,size,rank,errors,error_precision,error_recall"
    );
    assert_eq!(lines.count(), r.slices.len());
    let records = fs::read_to_string(dir.path().join("records.csv")).unwrap();
    let header = records.lines().next().unwrap();
    assert!(header.starts_with("id,true_label,ood_score,compl_euc,pred_euc,nll_euc,"));
    assert!(header.ends_with("dist_mah_corr:c0,dist_mah_corr:c1"));
    assert_eq!(records.lines().count(), 1001);
    let stats = fs::read_to_string(dir.path().join("stats.csv")).unwrap();
    assert!(stats.contains("normalized_entropy,1.0000000000000000e0"));
    assert!(stats.contains("class_count:c1,500"));
}

#[test]
fn binary_and_csv_files_are_detected() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&preset::<f64>(Preset::ThreeTwoOverlaps), 3).unwrap();
    let csv_path = dir.path().join("d.csv");
    let bin_path = dir.path().join("d.bin");
    write_dataset_csv(&data, fs::File::create(&csv_path).unwrap()).unwrap();
    write_dataset_binary(&data, fs::File::create(&bin_path).unwrap()).unwrap();
    let from_csv: Dataset = read_dataset(&csv_path).unwrap();
    assert_eq!(from_csv.samples(), data.samples());
    let from_bin: Dataset32 = read_dataset(&bin_path).unwrap();
    assert_eq!(from_bin.len(), data.len());
    for (a, b) in from_bin.samples().iter().zip(data.samples()) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.vector, b.vector.iter().map(|&v| v as f32).collect::<Vec<_>>());
    }
}

#[test]
fn ragged_dimensions_are_rejected() {
    let err = read_dataset_csv::<f64, _>("id,label,e0,e1\na,x,1,2\nb,y,3\n".as_bytes()).unwrap_err();
    assert!(matches!(err, Error::Parse(ParseError::RaggedRow { line: 3, .. })));
    assert_eq!(err.class(), ErrorClass::Validation);
}

#[test]
fn split_examples() {
    let data = generate(&preset::<f64>(Preset::TwoEqual), 0).unwrap();
    let spec = SplitSpec::default();
    let (train, test) = split(&data, &spec).unwrap();
    assert_eq!((train.len(), test.len()), (800, 200));
    assert_eq!(train.class_counts().values().copied().collect::<Vec<_>>(), vec![400, 400]);
    let lonely = Dataset::new(vec![
        Sample::new("a", "x", vec![0.0]),
        Sample::new("b", "x", vec![1.0]),
        Sample::new("c", "y", vec![2.0]),
    ])
    .unwrap();
    assert!(matches!(split(&lonely, &spec), Err(Error::Stratification(_))));
    let loose = SplitSpec { stratified: false, ..spec };
    assert!(split(&lonely, &loose).is_ok());
}

#[test]
fn model_json_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let (data, model, records) = scored(Preset::ThreeTwoOverlaps);
    write_model_json(&model, &path).unwrap();
    let back: Model = read_model_json(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(score_dataset(&data, &back, &DistanceKind::ALL).unwrap(), records);
}
