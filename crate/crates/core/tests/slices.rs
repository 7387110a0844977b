use cplx_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn row(i: usize, is_error: bool, features: Vec<f64>) -> AnalysisRow {
    AnalysisRow {
        id: format!("r{i}"),
        true_label: "a".into(),
        predicted_label: if is_error { "b" } else { "a" }.into(),
        is_error,
        features,
    }
}

fn config(min_support: usize, grid: usize) -> SliceConfig {
    SliceConfig {
        min_support,
        grid,
        ..SliceConfig::for_rows(100)
    }
}

#[test]
fn errors_confined_to_an_interval_give_a_perfect_slice() {
    // 10 errors at 0.5..=1.0, 90 correct rows at 1.05..=5.5
    let mut rows: Vec<AnalysisRow> = (0..10).map(|i| row(i, true, vec![0.5 + i as f64 / 18.0])).collect();
    rows.extend((0..90).map(|i| row(10 + i, false, vec![1.05 + i as f64 / 20.0])));
    let table = AnalysisTable::new(vec!["f".into()], rows).unwrap();
    let slices = find_slices_1d(&table, "f", &config(10, 32)).unwrap();
    let top = &slices[0];
    assert_eq!(top.ranges, vec![(0.5, 1.0)]);
    assert_eq!((top.support, top.errors), (10, 10));
    assert_eq!((top.error_precision, top.error_recall, top.rank), (1.0, 1.0, 1.0));
    // nothing else holds an error
    assert_eq!(slices.len(), 1);
}

#[test]
fn no_errors_means_no_slices() {
    let rows = (0..50).map(|i| row(i, false, vec![i as f64])).collect();
    let table = AnalysisTable::new(vec!["f".into()], rows).unwrap();
    assert!(find_slices_1d(&table, "f", &config(10, 32)).unwrap().is_empty());
    assert!(find_all_slices(&table, &config(10, 8), true).unwrap().is_empty());
}

#[test]
fn calibration_slice_rank() {
    let rank = slice_rank(63, 65, 63);
    let p = 63.0 / 65.0;
    assert!((rank - 2.0 * p / (p + 1.0)).abs() < 1e-12);
    assert!((rank - 0.984_375).abs() < 1e-12);
}

#[test]
fn ranking_order_and_tie_breaks() {
    let mk = |rank: f64, support: usize, f: &str| Slice {
        features: vec![f.into()],
        ranges: vec![(0.0, 1.0)],
        support,
        errors: 1,
        slice_accuracy: 0.0,
        error_precision: 0.0,
        error_recall: 0.0,
        rank,
    };
    let out = rank_slices(vec![mk(0.9, 1, "a"), mk(0.5, 1, "a"), mk(0.99, 1, "a")]);
    assert_eq!(out.iter().map(|s| s.rank).collect::<Vec<_>>(), vec![0.99, 0.9, 0.5]);
    let out = rank_slices(vec![mk(0.7, 20, "a"), mk(0.7, 65, "b"), mk(0.7, 20, "0")]);
    assert_eq!(out.iter().map(|s| s.support).collect::<Vec<_>>(), vec![65, 20, 20]);
    assert_eq!(out[1].features, vec!["0".to_string()]);
}

#[test]
fn quadrant_errors_are_recovered_by_a_rectangle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rows = (0..800)
        .map(|i| {
            let (x, y): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let p = if x > 0.0 && y > 0.0 { 0.8 } else { 0.02 };
            row(i, rng.random_bool(p), vec![x, y])
        })
        .collect();
    let table = AnalysisTable::new(vec!["x1".into(), "x2".into()], rows).unwrap();
    let slices = find_slices_2d(&table, ("x1", "x2"), &config(10, 16)).unwrap();
    let top = &slices[0];
    let quadrant_errors = table
        .rows()
        .iter()
        .filter(|r| r.is_error && r.features[0] > 0.0 && r.features[1] > 0.0)
        .count();
    let members = table.members(top).unwrap();
    let caught = members
        .iter()
        .filter(|&&i| {
            let r = &table.rows()[i];
            r.is_error && r.features[0] > 0.0 && r.features[1] > 0.0
        })
        .count();
    assert!(caught as f64 >= 0.9 * quadrant_errors as f64, "{caught}/{quadrant_errors}");
    let (xr, yr) = (top.ranges[0], top.ranges[1]);
    assert!(xr.0 > -0.15 && xr.1 > 0.95 && yr.0 > -0.15 && yr.1 > 0.95, "{top:?}");
}

#[test]
fn uniform_errors_produce_no_strong_slice() {
    // baseline: the whole table as a slice, rank 2p/(1+p)
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let rows = (0..2000)
        .map(|i| row(i, rng.random_bool(0.1), vec![rng.random::<f64>(), rng.random::<f64>()]))
        .collect();
    let table = AnalysisTable::new(vec!["x1".into(), "x2".into()], rows).unwrap();
    let p = table.num_errors() as f64 / table.len() as f64;
    let baseline = 2.0 * p / (1.0 + p);
    let slices = find_all_slices(&table, &SliceConfig::for_rows(table.len()), true).unwrap();
    assert!(!slices.is_empty());
    for s in &slices {
        assert!(s.rank <= baseline + 0.1, "{s:?} vs baseline {baseline}");
    }
}

#[test]
fn support_bound_on_tiny_grid() {
    let rows = (0..16).map(|i| row(i, i % 3 == 0, vec![i as f64, (i * 7 % 16) as f64])).collect();
    let table = AnalysisTable::new(vec!["a".into(), "b".into()], rows).unwrap();
    let slices = find_slices_2d(&table, ("a", "b"), &config(16, 4)).unwrap();
    assert!(slices.len() <= 1);
    for s in &slices {
        assert_eq!(s.support, 16);
        assert_eq!(s.ranges, vec![(0.0, 15.0), (0.0, 15.0)]);
    }
}

#[test]
fn grid_below_four_is_rejected() {
    let rows = (0..16).map(|i| row(i, i % 2 == 0, vec![i as f64, i as f64])).collect();
    let table = AnalysisTable::new(vec!["a".into(), "b".into()], rows).unwrap();
    assert!(matches!(
        find_slices_2d(&table, ("a", "b"), &config(2, 3)),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn one_dimensional_results_are_disjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rows = (0..500)
        .map(|i| {
            let v: f64 = rng.random_range(0.0..10.0);
            let p = if (2.0..3.0).contains(&v) || (7.0..8.0).contains(&v) { 0.7 } else { 0.05 };
            row(i, rng.random_bool(p), vec![v])
        })
        .collect();
    let table = AnalysisTable::new(vec!["f".into()], rows).unwrap();
    let slices = find_slices_1d(&table, "f", &config(10, 32)).unwrap();
    assert!(slices.len() >= 2);
    for (i, a) in slices.iter().enumerate() {
        for b in &slices[i + 1..] {
            let (x, y) = (a.ranges[0], b.ranges[0]);
            assert!(x.1 < y.0 || y.1 < x.0, "{x:?} overlaps {y:?}");
        }
    }
    // the two error bands are the two best intervals
    let mut tops: Vec<(f64, f64)> = slices[..2].iter().map(|s| s.ranges[0]).collect();
    tops.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!(tops[0].0 > 1.5 && tops[0].1 < 3.5 && tops[1].0 > 6.5 && tops[1].1 < 8.5, "{tops:?}");
}

#[test]
fn statistics_examples() {
    let counts = |c: &[usize]| {
        c.iter()
            .enumerate()
            .map(|(i, &n)| (format!("c{i}"), n))
            .collect::<std::collections::BTreeMap<_, _>>()
    };
    assert_eq!(normalized_entropy(&counts(&[7, 7, 7])).unwrap(), 1.0);
    assert_eq!(normalized_entropy(&counts(&[500, 500])).unwrap(), 1.0);
    assert!((normalized_entropy(&counts(&[900, 100])).unwrap() - 0.4690).abs() < 1e-4);
    assert!(matches!(normalized_entropy(&counts(&[10])), Err(Error::UndefinedEntropy)));
    assert_eq!(median_class_size(&counts(&[10, 20, 30])), 20);
    assert_eq!(median_class_size(&counts(&[40, 10, 30, 20])), 20);
    assert_eq!(median_class_size(&counts(&[500, 500])), 500);
}
