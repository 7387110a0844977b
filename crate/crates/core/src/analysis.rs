//! Dataset statistics and error-concentration slice mining.
//!
//! A slice is a conjunction of one or two closed feature ranges. Slices are
//! ranked by the harmonic mean of their error precision (errors / support)
//! and error recall (errors / all errors), so a slice scores 1 exactly when
//! it holds every error and nothing else.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::EmbeddedDataset;
use crate::error::{Error, Result};
use crate::geometry::GeometryModel;
use crate::scalar::Scalar;
use crate::scoring::{baseline_accuracy, DistanceKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub id: String,
    pub true_label: String,
    pub predicted_label: String,
    pub is_error: bool,
    /// Values aligned with [`AnalysisTable::feature_names`].
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisTable {
    feature_names: Vec<String>,
    rows: Vec<AnalysisRow>,
}

impl AnalysisTable {
    pub fn new(feature_names: Vec<String>, rows: Vec<AnalysisRow>) -> Result<Self> {
        for r in &rows {
            if r.features.len() != feature_names.len() {
                return Err(Error::DimensionMismatch {
                    expected: feature_names.len(),
                    actual: r.features.len(),
                });
            }
            if let Some(i) = r.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "row `{}` has non-finite feature `{}`",
                    r.id, feature_names[i]
                )));
            }
            if r.is_error != (r.predicted_label != r.true_label) {
                return Err(Error::InvalidDataset(format!(
                    "row `{}` error flag disagrees with its labels",
                    r.id
                )));
            }
        }
        Ok(AnalysisTable { feature_names, rows })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[AnalysisRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn num_errors(&self) -> usize {
        self.rows.iter().filter(|r| r.is_error).count()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.feature_index(name)?;
        Ok(self.rows.iter().map(|r| r.features[i]).collect())
    }

    /// Row indices falling inside every range of `slice`.
    pub fn members(&self, slice: &Slice) -> Result<Vec<usize>> {
        let cols: Vec<usize> = slice
            .features
            .iter()
            .map(|f| self.feature_index(f))
            .collect::<Result<_>>()?;
        Ok(self
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| {
                cols.iter()
                    .zip(&slice.ranges)
                    .all(|(&c, &(lo, hi))| r.features[c] >= lo && r.features[c] <= hi)
            })
            .map(|(i, _)| i)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub features: Vec<String>,
    /// Closed `[lo, hi]` interval per feature.
    pub ranges: Vec<(f64, f64)>,
    pub support: usize,
    pub errors: usize,
    pub slice_accuracy: f64,
    pub error_precision: f64,
    pub error_recall: f64,
    pub rank: f64,
}

/// Harmonic mean of error precision and error recall.
pub fn slice_rank(errors_in_slice: usize, support: usize, total_errors: usize) -> f64 {
    if errors_in_slice == 0 || support == 0 || total_errors == 0 {
        return 0.0;
    }
    let p = errors_in_slice as f64 / support as f64;
    let r = errors_in_slice as f64 / total_errors as f64;
    2.0 * p * r / (p + r)
}

impl Slice {
    fn build(
        features: Vec<String>,
        ranges: Vec<(f64, f64)>,
        support: usize,
        errors: usize,
        total_errors: usize,
    ) -> Self {
        Slice {
            features,
            ranges,
            support,
            errors,
            slice_accuracy: 1.0 - errors as f64 / support as f64,
            error_precision: errors as f64 / support as f64,
            error_recall: errors as f64 / total_errors as f64,
            rank: slice_rank(errors, support, total_errors),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceConfig {
    pub min_support: usize,
    /// Bins per feature for two-feature search.
    pub grid: usize,
    /// Result cap per feature set.
    pub max_slices: usize,
    /// Distinct values kept per feature in one-feature search before
    /// quantile compression.
    pub max_unique: usize,
}

impl SliceConfig {
    /// `max(10, 1% of rows)`.
    pub fn default_min_support(rows: usize) -> usize {
        10.max(rows.div_ceil(100))
    }

    pub fn for_rows(rows: usize) -> Self {
        SliceConfig {
            min_support: Self::default_min_support(rows),
            grid: 32,
            max_slices: 20,
            max_unique: 2048,
        }
    }
}

/// Groups sorted values into at most `bins` contiguous bins of roughly
/// equal row mass, never splitting tied values. Returns, per bin, the
/// value range and the row indices it holds.
struct Binning {
    lo: Vec<f64>,
    hi: Vec<f64>,
    bin_of_row: Vec<usize>,
}

fn quantile_bins(values: &[f64], bins: usize) -> Binning {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    let mut bin_of_row = vec![0; n];
    let mut i = 0;
    let mut current: Option<usize> = None;
    while i < n {
        let v = values[order[i]];
        let mut j = i;
        while j < n && values[order[j]] == v {
            j += 1;
        }
        // bin chosen by the row mass preceding this value
        let target = (i * bins / n).min(bins - 1);
        let b = match current {
            Some(c) if lo.len() > target => c,
            _ => {
                lo.push(v);
                hi.push(v);
                lo.len() - 1
            }
        };
        current = Some(b);
        hi[b] = v;
        for &r in &order[i..j] {
            bin_of_row[r] = b;
        }
        i = j;
    }
    Binning { lo, hi, bin_of_row }
}

fn rank_order(a: &Slice, b: &Slice) -> Ordering {
    b.rank
        .total_cmp(&a.rank)
        .then(b.support.cmp(&a.support))
        .then_with(|| a.features.cmp(&b.features))
        .then_with(|| {
            for (x, y) in a.ranges.iter().zip(&b.ranges) {
                let o = x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1));
                if o != Ordering::Equal {
                    return o;
                }
            }
            Ordering::Equal
        })
}

/// Sorts by rank descending, then support descending, then feature names.
pub fn rank_slices(mut slices: Vec<Slice>) -> Vec<Slice> {
    slices.sort_by(rank_order);
    slices
}

/// Scored candidate before it is materialized as a [`Slice`]: inclusive bin
/// ranges per feature plus counts.
#[derive(Debug, Clone, Copy)]
struct Candidate<const K: usize> {
    bins: [(usize, usize); K],
    support: usize,
    errors: usize,
    rank: f64,
}

impl<const K: usize> Candidate<K> {
    fn new(bins: [(usize, usize); K], support: usize, errors: usize, total_errors: usize) -> Self {
        Candidate {
            bins,
            support,
            errors,
            rank: slice_rank(errors, support, total_errors),
        }
    }

    /// Same ordering as [`rank_slices`] for slices over one feature set,
    /// since bin order matches value order.
    fn order(&self, other: &Self) -> Ordering {
        other
            .rank
            .total_cmp(&self.rank)
            .then(other.support.cmp(&self.support))
            .then_with(|| self.bins.cmp(&other.bins))
    }

    fn overlaps(&self, other: &Self) -> bool {
        self.bins
            .iter()
            .zip(&other.bins)
            .all(|(x, y)| x.0 <= y.1 && y.0 <= x.1)
    }

    fn to_slice(&self, names: &[String], bins: &[&Binning], total_errors: usize) -> Slice {
        let ranges = self
            .bins
            .iter()
            .zip(bins)
            .map(|(&(a, b), bn)| (bn.lo[a], bn.hi[b]))
            .collect();
        Slice::build(names.to_vec(), ranges, self.support, self.errors, total_errors)
    }
}

fn is_better<const K: usize>(c: &Candidate<K>, best: &Option<Candidate<K>>) -> bool {
    best.as_ref().is_none_or(|b| c.order(b) == Ordering::Less)
}

/// Exhaustive interval scan over the sorted distinct values of `feature`
/// (quantile-compressed beyond `max_unique` values).
///
/// Returns up to `max_slices` pairwise-disjoint intervals, best first: the
/// best interval overall, then the best one disjoint from it, and so on.
pub fn find_slices_1d(table: &AnalysisTable, feature: &str, config: &SliceConfig) -> Result<Vec<Slice>> {
    let values = table.column(feature)?;
    let total_errors = table.num_errors();
    if total_errors == 0 || table.len() < config.min_support.max(1) {
        return Ok(Vec::new());
    }
    let bins = quantile_bins(&values, config.max_unique.max(1));
    let nb = bins.lo.len();
    let mut rows = vec![0usize; nb + 1];
    let mut errs = vec![0usize; nb + 1];
    for (r, &b) in table.rows.iter().zip(&bins.bin_of_row) {
        rows[b + 1] += 1;
        errs[b + 1] += usize::from(r.is_error);
    }
    for i in 0..nb {
        rows[i + 1] += rows[i];
        errs[i + 1] += errs[i];
    }

    // Best interval per start bin, restricted to end before the next taken
    // interval. Taking an interval only changes the starts in its own gap, so
    // the other entries stay valid between rounds.
    let best_from = |i: usize, limit: usize| {
        let mut best: Option<Candidate<1>> = None;
        for j in i..=limit {
            let support = rows[j + 1] - rows[i];
            let e = errs[j + 1] - errs[i];
            if support < config.min_support || e == 0 {
                continue;
            }
            let c = Candidate::new([(i, j)], support, e, total_errors);
            if is_better(&c, &best) {
                best = Some(c);
            }
        }
        best
    };
    let mut per_start: Vec<Option<Candidate<1>>> = (0..nb).map(|i| best_from(i, nb - 1)).collect();
    let mut taken: Vec<Candidate<1>> = Vec::new();
    while taken.len() < config.max_slices {
        let mut best: Option<Candidate<1>> = None;
        for c in per_start.iter().flatten() {
            if is_better(c, &best) {
                best = Some(*c);
            }
        }
        let Some(c) = best else { break };
        let (a, b) = c.bins[0];
        for entry in &mut per_start[a..=b] {
            *entry = None;
        }
        // starts between the previous taken interval and this one
        let gap_start = taken
            .iter()
            .map(|t| t.bins[0].1 + 1)
            .filter(|&e| e <= a)
            .max()
            .unwrap_or(0);
        for (i, entry) in per_start.iter_mut().enumerate().take(a).skip(gap_start) {
            // an entry ending before `a` was already the best over a wider range
            if entry.is_some_and(|p| p.bins[0].1 >= a) {
                *entry = best_from(i, a - 1);
            }
        }
        taken.push(c);
    }
    let names = [feature.to_string()];
    Ok(taken
        .iter()
        .map(|c| c.to_slice(&names, &[&bins], total_errors))
        .collect())
}

/// Exhaustive search over axis-aligned rectangles of a `grid × grid`
/// quantile binning of two features. Selection is greedy and disjoint as in
/// [`find_slices_1d`].
pub fn find_slices_2d(
    table: &AnalysisTable,
    features: (&str, &str),
    config: &SliceConfig,
) -> Result<Vec<Slice>> {
    if config.grid < 4 {
        return Err(Error::InvalidArgument(format!(
            "grid must be at least 4, got {}",
            config.grid
        )));
    }
    let xs = table.column(features.0)?;
    let ys = table.column(features.1)?;
    let total_errors = table.num_errors();
    if total_errors == 0 || table.len() < config.min_support.max(1) {
        return Ok(Vec::new());
    }
    let bx = quantile_bins(&xs, config.grid);
    let by = quantile_bins(&ys, config.grid);
    let (nx, ny) = (bx.lo.len(), by.lo.len());
    // 2-D prefix sums over (nx+1) × (ny+1)
    let w = ny + 1;
    let mut rows = vec![0usize; (nx + 1) * w];
    let mut errs = vec![0usize; (nx + 1) * w];
    for (k, r) in table.rows.iter().enumerate() {
        let (i, j) = (bx.bin_of_row[k] + 1, by.bin_of_row[k] + 1);
        rows[i * w + j] += 1;
        errs[i * w + j] += usize::from(r.is_error);
    }
    for i in 1..=nx {
        for j in 1..=ny {
            let up = (i - 1) * w + j;
            let left = i * w + j - 1;
            let diag = (i - 1) * w + j - 1;
            rows[i * w + j] += rows[up] + rows[left] - rows[diag];
            errs[i * w + j] += errs[up] + errs[left] - errs[diag];
        }
    }
    let rect = |p: &[usize], i0: usize, i1: usize, j0: usize, j1: usize| {
        p[(i1 + 1) * w + j1 + 1] + p[i0 * w + j0] - p[i0 * w + j1 + 1] - p[(i1 + 1) * w + j0]
    };

    let mut cands = Vec::new();
    for i0 in 0..nx {
        for i1 in i0..nx {
            // a band without errors or without enough rows has no valid sub-rectangle
            if rect(&errs, i0, i1, 0, ny - 1) == 0 || rect(&rows, i0, i1, 0, ny - 1) < config.min_support {
                continue;
            }
            for j0 in 0..ny {
                for j1 in j0..ny {
                    let support = rect(&rows, i0, i1, j0, j1);
                    let e = rect(&errs, i0, i1, j0, j1);
                    if support < config.min_support || e == 0 {
                        continue;
                    }
                    cands.push(Candidate::new([(i0, i1), (j0, j1)], support, e, total_errors));
                }
            }
        }
    }
    cands.sort_by(|a, b| a.order(b));
    let mut taken: Vec<Candidate<2>> = Vec::new();
    for c in cands {
        if taken.len() >= config.max_slices {
            break;
        }
        if !taken.iter().any(|t| t.overlaps(&c)) {
            taken.push(c);
        }
    }
    let names = [features.0.to_string(), features.1.to_string()];
    Ok(taken
        .iter()
        .map(|c| c.to_slice(&names, &[&bx, &by], total_errors))
        .collect())
}

/// Searches every single feature and every feature pair in parallel and
/// merges the results in rank order.
pub fn find_all_slices(table: &AnalysisTable, config: &SliceConfig, pairs: bool) -> Result<Vec<Slice>> {
    let names = table.feature_names().to_vec();
    let mut jobs: Vec<Vec<&str>> = names.iter().map(|n| vec![n.as_str()]).collect();
    if pairs {
        for i in 0..names.len() {
            for j in (i + 1)..names.len() {
                jobs.push(vec![names[i].as_str(), names[j].as_str()]);
            }
        }
    }
    let found = jobs
        .par_iter()
        .map(|job| match job.as_slice() {
            [f] => find_slices_1d(table, f, config),
            [a, b] => find_slices_2d(table, (a, b), config),
            _ => unreachable!(),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_slices(found.into_iter().flatten().collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub num_classes: usize,
    pub num_samples: usize,
    pub normalized_entropy: f64,
    pub median_class_size: usize,
    pub baseline_accuracy: f64,
    pub baseline_metric: DistanceKind,
    pub class_counts: BTreeMap<String, usize>,
}

/// Class-distribution entropy divided by `ln |classes|`.
pub fn normalized_entropy(class_counts: &BTreeMap<String, usize>) -> Result<f64> {
    if class_counts.len() < 2 {
        return Err(Error::UndefinedEntropy);
    }
    if let Some((label, _)) = class_counts.iter().find(|(_, &c)| c == 0) {
        return Err(Error::EmptyClass(label.clone()));
    }
    let first = *class_counts.values().next().expect("non-empty");
    if class_counts.values().all(|&c| c == first) {
        return Ok(1.0);
    }
    let n: usize = class_counts.values().sum();
    let n = n as f64;
    let h: f64 = class_counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    Ok((h / (class_counts.len() as f64).ln()).clamp(0.0, 1.0))
}

/// Lower median of the class sizes.
pub fn median_class_size(class_counts: &BTreeMap<String, usize>) -> usize {
    let mut sizes: Vec<usize> = class_counts.values().copied().collect();
    sizes.sort_unstable();
    if sizes.is_empty() {
        return 0;
    }
    sizes[(sizes.len() - 1) / 2]
}

pub fn dataset_stats<T: Scalar>(
    dataset: &EmbeddedDataset<T>,
    model: &GeometryModel<T>,
    kind: DistanceKind,
) -> Result<DatasetStats> {
    let class_counts = dataset.class_counts();
    Ok(DatasetStats {
        num_classes: class_counts.len(),
        num_samples: dataset.len(),
        normalized_entropy: normalized_entropy(&class_counts)?,
        median_class_size: median_class_size(&class_counts),
        baseline_accuracy: baseline_accuracy(dataset, model, kind)?,
        baseline_metric: kind,
        class_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(v: &[usize]) -> BTreeMap<String, usize> {
        v.iter().enumerate().map(|(i, &c)| (format!("c{i}"), c)).collect()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(normalized_entropy(&counts(&[7, 7, 7])).unwrap(), 1.0);
        let e = normalized_entropy(&counts(&[900, 100])).unwrap();
        assert!((e - 0.4690).abs() < 1e-4);
        assert!(matches!(normalized_entropy(&counts(&[5])), Err(Error::UndefinedEntropy)));
    }

    #[test]
    fn median_examples() {
        assert_eq!(median_class_size(&counts(&[500, 500])), 500);
        assert_eq!(median_class_size(&counts(&[30, 10, 20])), 20);
        assert_eq!(median_class_size(&counts(&[10, 40, 20, 30])), 20);
    }

    #[test]
    fn rank_formula() {
        let r = slice_rank(63, 65, 63);
        let p = 63.0 / 65.0;
        assert!((r - 2.0 * p / (p + 1.0)).abs() < 1e-12);
        assert_eq!(slice_rank(10, 10, 10), 1.0);
        assert_eq!(slice_rank(0, 10, 10), 0.0);
    }

    fn mk(rank: f64, support: usize, f: &str) -> Slice {
        Slice {
            features: vec![f.into()],
            ranges: vec![(0.0, 1.0)],
            support,
            errors: 1,
            slice_accuracy: 0.0,
            error_precision: 0.0,
            error_recall: 0.0,
            rank,
        }
    }

    #[test]
    fn rank_ordering() {
        let s = rank_slices(vec![mk(0.9, 1, "a"), mk(0.5, 1, "a"), mk(0.99, 1, "a")]);
        assert_eq!(s.iter().map(|s| s.rank).collect::<Vec<_>>(), [0.99, 0.9, 0.5]);
        let s = rank_slices(vec![mk(0.7, 20, "a"), mk(0.7, 65, "b")]);
        assert_eq!(s[0].support, 65);
        let s = rank_slices(vec![mk(0.7, 20, "b"), mk(0.7, 20, "a")]);
        assert_eq!(s[0].features[0], "a");
    }

    #[test]
    fn quantile_bins_keep_ties_together() {
        let v = [1.0, 1.0, 1.0, 2.0, 3.0, 3.0, 4.0, 5.0];
        let b = quantile_bins(&v, 4);
        assert!(b.lo.len() <= 4);
        assert_eq!(b.bin_of_row[0], b.bin_of_row[2]);
        assert_eq!(b.bin_of_row[4], b.bin_of_row[5]);
        for w in b.lo.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    fn table_1d(values: &[f64], errors: &[bool]) -> AnalysisTable {
        let rows = values
            .iter()
            .zip(errors)
            .enumerate()
            .map(|(i, (&v, &e))| AnalysisRow {
                id: i.to_string(),
                true_label: "a".into(),
                predicted_label: if e { "b".into() } else { "a".into() },
                is_error: e,
                features: vec![v],
            })
            .collect();
        AnalysisTable::new(vec!["f".into()], rows).unwrap()
    }

    #[test]
    fn no_errors_no_slices() {
        let t = table_1d(&[1.0; 20], &[false; 20]);
        let cfg = SliceConfig { min_support: 2, ..SliceConfig::for_rows(20) };
        assert!(find_slices_1d(&t, "f", &cfg).unwrap().is_empty());
        assert!(matches!(find_slices_1d(&t, "g", &cfg), Err(Error::UnknownFeature(_))));
    }

    #[test]
    fn rejects_small_grid() {
        let t = table_1d(&[1.0, 2.0], &[true, false]);
        let cfg = SliceConfig { grid: 3, min_support: 1, ..SliceConfig::for_rows(2) };
        assert!(find_slices_2d(&t, ("f", "f"), &cfg).is_err());
    }
}
