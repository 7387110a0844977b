//! Per-class geometric summaries: centroid, covariance, Pearson correlation
//! and their regularized inverses.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::EmbeddedDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Largest condition number accepted for a direct inverse.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Covariance estimate used before inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Shrinkage {
    None,
    #[default]
    LedoitWolf,
    /// Adds an absolute `ε·I`.
    Ridge(f64),
}

/// What to do with a matrix whose condition number exceeds [`CONDITION_LIMIT`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    PseudoInverse,
    /// Ridge with `ε = ridge_scale · tr(M)/d`.
    #[default]
    Ridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub shrinkage: Shrinkage,
    pub fallback: Fallback,
    /// Relative ridge size, multiplied by the mean diagonal entry.
    pub ridge_scale: f64,
    /// Share one within-class covariance across all classes.
    pub pooled: bool,
    /// Normalize by `n - 1` instead of `n`.
    pub unbiased: bool,
    /// Compute precision matrices; required by both Mahalanobis kinds.
    pub mahalanobis: bool,
    /// Use raw cosine similarity as the cosine "distance" instead of
    /// `1 - similarity`.
    pub literal_cosine: bool,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            shrinkage: Shrinkage::LedoitWolf,
            fallback: Fallback::Ridge,
            ridge_scale: 1e-6,
            pooled: false,
            unbiased: false,
            mahalanobis: true,
            literal_cosine: false,
        }
    }
}

/// Inversion strategy for [`precision`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrecisionMode<T> {
    Direct,
    PseudoInverse,
    Ridge(T),
}

/// Record of the regularization actually applied to a class covariance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Regularization<T> {
    /// Ledoit-Wolf mixing coefficient, when shrinkage ran.
    pub ledoit_wolf: Option<T>,
    /// Ridge added to the covariance diagonal (configured or fallback).
    pub ridge: Option<T>,
}

impl<T> Regularization<T> {
    pub fn is_none(&self) -> bool {
        self.ledoit_wolf.is_none() && self.ridge.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ClassGeometry<T> {
    pub label: String,
    pub count: usize,
    pub centroid: Vec<T>,
    /// Covariance after any configured shrinkage.
    pub covariance: Matrix<T>,
    pub correlation: Matrix<T>,
    pub precision_cov: Option<Matrix<T>>,
    pub precision_corr: Option<Matrix<T>>,
    pub regularization: Regularization<T>,
}

/// Fitted class geometries. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GeometryModel<T> {
    geometries: BTreeMap<String, ClassGeometry<T>>,
    dim: usize,
    config: GeometryConfig,
}

/// Explicit class parameters for [`GeometryModel::from_parameters`].
#[derive(Debug, Clone)]
pub struct ClassParameters<T> {
    pub label: String,
    pub mean: Vec<T>,
    pub covariance: Matrix<T>,
    pub count: usize,
}

pub fn centroid<T: Scalar, R: AsRef<[T]>>(rows: &[R]) -> Result<Vec<T>> {
    let first = rows.first().ok_or_else(|| Error::EmptyClass(String::new()))?;
    let mut acc = vec![T::zero(); first.as_ref().len()];
    for r in rows {
        for (a, &v) in acc.iter_mut().zip(r.as_ref()) {
            *a += v;
        }
    }
    let n = T::c(rows.len() as f64);
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

fn residuals<T: Scalar, R: AsRef<[T]>>(rows: &[R], mean: &[T]) -> Vec<Vec<T>> {
    rows.iter()
        .map(|r| r.as_ref().iter().zip(mean).map(|(&v, &m)| v - m).collect())
        .collect()
}

/// `Σ r rᵀ / divisor`.
fn scatter<T: Scalar>(residuals: &[Vec<T>], d: usize, divisor: T) -> Matrix<T> {
    let mut m = Matrix::zeros(d, d);
    for r in residuals {
        for i in 0..d {
            let ri = r[i];
            if ri == T::zero() {
                continue;
            }
            for j in i..d {
                m[(i, j)] += ri * r[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = m[(i, j)] / divisor;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Maximum-likelihood covariance, normalized by `1/n`.
pub fn covariance_mle<T: Scalar, R: AsRef<[T]>>(rows: &[R]) -> Result<Matrix<T>> {
    let mean = centroid(rows)?;
    let res = residuals(rows, &mean);
    Ok(scatter(&res, mean.len(), T::c(rows.len() as f64)))
}

/// Unbiased covariance, normalized by `1/(n-1)`.
pub fn covariance_unbiased<T: Scalar, R: AsRef<[T]>>(rows: &[R]) -> Result<Matrix<T>> {
    if rows.len() < 2 {
        return Err(Error::InsufficientSamples {
            label: String::new(),
            required: 2,
            actual: rows.len(),
        });
    }
    let mean = centroid(rows)?;
    let res = residuals(rows, &mean);
    Ok(scatter(&res, mean.len(), T::c((rows.len() - 1) as f64)))
}

/// Pearson correlation from a covariance matrix.
///
/// Dimensions with zero variance get 1 on the diagonal and 0 elsewhere.
pub fn correlation_matrix<T: Scalar>(covariance: &Matrix<T>) -> Matrix<T> {
    let d = covariance.rows();
    let diag = covariance.diagonal();
    let max_var = diag.iter().fold(T::zero(), |m, &v| m.max(v));
    let floor = T::epsilon() * max_var;
    let sd: Vec<Option<T>> = diag
        .iter()
        .map(|&v| if v > floor && v > T::zero() { Some(v.sqrt()) } else { None })
        .collect();
    let mut r = Matrix::zeros(d, d);
    for i in 0..d {
        r[(i, i)] = T::one();
        for j in (i + 1)..d {
            let v = match (sd[i], sd[j]) {
                (Some(si), Some(sj)) => covariance[(i, j)] / (si * sj),
                _ => T::zero(),
            };
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

/// Ledoit-Wolf shrinkage toward `(tr(S)/d)·I`. Returns the shrunk matrix
/// and the mixing coefficient in `[0, 1]`.
pub fn shrink_ledoit_wolf<T: Scalar, R: AsRef<[T]>>(rows: &[R]) -> Result<(Matrix<T>, T)> {
    if rows.len() < 2 {
        return Err(Error::InsufficientSamples {
            label: String::new(),
            required: 2,
            actual: rows.len(),
        });
    }
    let mean = centroid(rows)?;
    Ok(ledoit_wolf_centered(&residuals(rows, &mean), mean.len()))
}

fn ledoit_wolf_centered<T: Scalar>(res: &[Vec<T>], d: usize) -> (Matrix<T>, T) {
    let n = T::c(res.len() as f64);
    let s = scatter(res, d, n);
    let mu = s.trace() / T::c(d as f64);
    // ‖S − μI‖²_F
    let dist_sq = s.add_diagonal(-mu).frobenius_sq();
    if !(dist_sq > T::zero()) {
        return (s, T::zero());
    }
    // (1/n²) Σ_k ‖x_k x_kᵀ − S‖²_F, expanded as ‖x‖⁴ − 2 xᵀSx + ‖S‖²_F.
    let s_frob = s.frobenius_sq();
    let mut beta_bar = T::zero();
    for x in res {
        let nx: T = x.iter().map(|&v| v * v).sum();
        beta_bar += nx * nx - T::c(2.0) * s.quadratic_form(x) + s_frob;
    }
    beta_bar = beta_bar / (n * n);
    let beta = beta_bar.min(dist_sq);
    let alpha = (beta / dist_sq).max(T::zero()).min(T::one());
    let mut out = s.scale(T::one() - alpha);
    for i in 0..d {
        out[(i, i)] += alpha * mu;
    }
    (out, alpha)
}

/// Inverse of a symmetric matrix.
///
/// Inverts directly when the condition number is at most
/// [`CONDITION_LIMIT`]; otherwise `mode` decides between failing, a
/// Moore-Penrose pseudo-inverse, or inverting `M + εI`.
pub fn precision<T: Scalar>(matrix: &Matrix<T>, mode: PrecisionMode<T>) -> Result<Matrix<T>> {
    if !matrix.is_square() {
        return Err(Error::DimensionMismatch {
            expected: matrix.rows(),
            actual: matrix.cols(),
        });
    }
    let eig = matrix.symmetric_eigen()?;
    if eig.condition_number() <= T::c(CONDITION_LIMIT) {
        return Ok(eig.reconstruct_with(|l| l.recip()));
    }
    match mode {
        PrecisionMode::Direct => Err(Error::SingularMatrix),
        PrecisionMode::PseudoInverse => {
            let top = eig.values.iter().fold(T::zero(), |m, &l| m.max(l.abs()));
            let cutoff = top * T::epsilon() * T::c(matrix.rows() as f64);
            Ok(eig.reconstruct_with(|l| if l.abs() > cutoff { l.recip() } else { T::zero() }))
        }
        PrecisionMode::Ridge(eps) => {
            if eig.min() + eps <= T::zero() {
                return Err(Error::SingularMatrix);
            }
            Ok(eig.reconstruct_with(|l| (l + eps).recip()))
        }
    }
}

fn relative_ridge<T: Scalar>(m: &Matrix<T>, scale: f64) -> T {
    let mean_diag = m.trace() / T::c(m.rows() as f64);
    let base = if mean_diag > T::zero() { mean_diag } else { T::one() };
    T::c(scale) * base
}

impl GeometryConfig {
    fn fallback_mode<T: Scalar>(&self, m: &Matrix<T>) -> PrecisionMode<T> {
        match self.fallback {
            Fallback::PseudoInverse => PrecisionMode::PseudoInverse,
            Fallback::Ridge => PrecisionMode::Ridge(relative_ridge(m, self.ridge_scale)),
        }
    }

    /// Configured shrinkage followed by a relative ridge if the result still
    /// fails Cholesky.
    fn regularize<T: Scalar>(
        &self,
        raw: Matrix<T>,
        res: &[Vec<T>],
        label: &str,
    ) -> Result<(Matrix<T>, Regularization<T>)> {
        let mut reg = Regularization::default();
        let mut cov = match self.shrinkage {
            Shrinkage::None => raw,
            Shrinkage::LedoitWolf => {
                if res.len() < 2 {
                    return Err(insufficient(label, res.len()));
                }
                let (shrunk, alpha) = ledoit_wolf_centered(res, raw.rows());
                reg.ledoit_wolf = Some(alpha);
                shrunk
            }
            Shrinkage::Ridge(eps) => {
                let eps = T::c(eps);
                reg.ridge = Some(eps);
                raw.add_diagonal(eps)
            }
        };
        if cov.cholesky().is_none() {
            let eps = relative_ridge(&cov, self.ridge_scale);
            cov = cov.add_diagonal(eps);
            reg.ridge = Some(reg.ridge.unwrap_or_else(T::zero) + eps);
        }
        Ok((cov, reg))
    }
}

fn insufficient(label: &str, actual: usize) -> Error {
    Error::InsufficientSamples {
        label: label.to_string(),
        required: 2,
        actual,
    }
}

impl<T: Scalar> ClassGeometry<T> {
    /// Builds a geometry from an explicit centroid and covariance, deriving
    /// correlation and precision matrices.
    fn from_covariance(
        label: &str,
        count: usize,
        centroid: Vec<T>,
        covariance: Matrix<T>,
        regularization: Regularization<T>,
        config: &GeometryConfig,
    ) -> Result<Self> {
        let correlation = correlation_matrix(&covariance);
        let (precision_cov, precision_corr) = if config.mahalanobis {
            (
                Some(precision(&covariance, config.fallback_mode(&covariance))?),
                Some(precision(&correlation, config.fallback_mode(&correlation))?),
            )
        } else {
            (None, None)
        };
        Ok(ClassGeometry {
            label: label.to_string(),
            count,
            centroid,
            covariance,
            correlation,
            precision_cov,
            precision_corr,
            regularization,
        })
    }

    pub fn dim(&self) -> usize {
        self.centroid.len()
    }
}

impl<T: Scalar> GeometryModel<T> {
    /// Fits one geometry per class of `dataset`.
    pub fn fit(dataset: &EmbeddedDataset<T>, config: &GeometryConfig) -> Result<Self> {
        dataset.require_classification()?;
        let d = dataset.dim();
        let groups: Vec<(String, Vec<&[T]>)> = dataset
            .vectors_by_class()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();

        let centered: Vec<(Vec<T>, Vec<Vec<T>>)> = groups
            .par_iter()
            .map(|(label, rows)| {
                let mean = centroid(rows).map_err(|_| Error::EmptyClass(label.clone()))?;
                let res = residuals(rows, &mean);
                Ok((mean, res))
            })
            .collect::<Result<_>>()?;

        let divisor = |n: usize, k: usize| {
            if config.unbiased && n > k {
                T::c((n - k) as f64)
            } else {
                T::c(n as f64)
            }
        };

        let pooled = if config.pooled {
            let all: Vec<Vec<T>> = centered.iter().flat_map(|(_, r)| r.iter().cloned()).collect();
            let raw = scatter(&all, d, divisor(all.len(), groups.len()));
            if config.mahalanobis {
                if all.len() < 2 {
                    return Err(insufficient("<pooled>", all.len()));
                }
                Some(config.regularize(raw, &all, "<pooled>")?)
            } else {
                Some((raw, Regularization::default()))
            }
        } else {
            None
        };

        let geometries = groups
            .par_iter()
            .zip(centered.par_iter())
            .map(|((label, rows), (mean, res))| {
                let n = rows.len();
                let (cov, reg) = match &pooled {
                    Some((cov, reg)) => (cov.clone(), *reg),
                    None => {
                        let raw = scatter(res, d, divisor(n, 1));
                        if !config.mahalanobis {
                            (raw, Regularization::default())
                        } else {
                            if n < 2 && !matches!(config.shrinkage, Shrinkage::Ridge(_)) {
                                return Err(insufficient(label, n));
                            }
                            config.regularize(raw, res, label)?
                        }
                    }
                };
                let g = ClassGeometry::from_covariance(label, n, mean.clone(), cov, reg, config)?;
                Ok((label.clone(), g))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .collect();

        Ok(GeometryModel {
            geometries,
            dim: d,
            config: config.clone(),
        })
    }

    /// Builds a model from known class means and covariances, bypassing
    /// estimation. Covariances are used as given (no shrinkage).
    pub fn from_parameters(params: &[ClassParameters<T>], config: &GeometryConfig) -> Result<Self> {
        if params.len() < 2 {
            return Err(Error::InvalidDataset("at least 2 classes required".into()));
        }
        let d = params[0].mean.len();
        let mut geometries = BTreeMap::new();
        for p in params {
            if p.mean.len() != d || p.covariance.rows() != d || !p.covariance.is_square() {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: p.mean.len(),
                });
            }
            let g = ClassGeometry::from_covariance(
                &p.label,
                p.count,
                p.mean.clone(),
                p.covariance.clone(),
                Regularization::default(),
                config,
            )?;
            geometries.insert(p.label.clone(), g);
        }
        Ok(GeometryModel {
            geometries,
            dim: d,
            config: config.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn config(&self) -> &GeometryConfig {
        &self.config
    }

    pub fn geometries(&self) -> &BTreeMap<String, ClassGeometry<T>> {
        &self.geometries
    }

    pub fn get(&self, label: &str) -> Result<&ClassGeometry<T>> {
        self.geometries
            .get(label)
            .ok_or_else(|| Error::UnknownClass(label.to_string()))
    }

    /// Class labels in lexicographic order.
    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.geometries.keys().map(String::as_str)
    }

    pub fn num_classes(&self) -> usize {
        self.geometries.len()
    }

    pub fn supports_mahalanobis(&self) -> bool {
        self.geometries
            .values()
            .all(|g| g.precision_cov.is_some() && g.precision_corr.is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Sample;

    fn close(a: &Matrix<f64>, b: &Matrix<f64>, tol: f64) -> bool {
        a.max_abs_diff(b) <= tol
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(centroid(&[[0.0, 0.0], [2.0, 0.0]]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(centroid(&[[3.0, 4.0]]).unwrap(), vec![3.0, 4.0]);
        let empty: [[f64; 2]; 0] = [];
        assert!(matches!(centroid(&empty), Err(Error::EmptyClass(_))));
    }

    #[test]
    fn covariance_examples() {
        let c = covariance_mle(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        assert_eq!(c, Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]));
        let single = covariance_mle(&[[5.0, -1.0, 2.0]]).unwrap();
        assert_eq!(single, Matrix::zeros(3, 3));
        let u = covariance_unbiased(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        assert_eq!(u[(0, 0)], 2.0);
    }

    #[test]
    fn correlation_examples() {
        let r = correlation_matrix(&Matrix::from_diagonal(&[4.0, 9.0]));
        assert_eq!(r, Matrix::identity(2));
        let r = correlation_matrix(&Matrix::from_rows(&[[4.0, 2.0], [2.0, 4.0]]));
        assert!(close(&r, &Matrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]), 1e-15));
        let r = correlation_matrix(&Matrix::from_rows(&[[4.0, 0.0], [0.0, 0.0]]));
        assert_eq!(r, Matrix::identity(2));
    }

    #[test]
    fn ledoit_wolf_spherical_is_fixed_point() {
        // Residuals ±e_i give S = (1/2)·... spherical: every axis same variance.
        let rows = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        let (m, alpha) = shrink_ledoit_wolf(&rows).unwrap();
        assert!(close(&m, &Matrix::identity(2).scale(0.5), 1e-15));
        assert!((0.0..=1.0).contains(&alpha));
    }

    #[test]
    fn ledoit_wolf_needs_two_rows() {
        assert!(matches!(
            shrink_ledoit_wolf(&[[1.0, 2.0]]),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn ledoit_wolf_alpha_clamped() {
        // Two points: extreme rank deficiency.
        let (_, alpha) = shrink_ledoit_wolf(&[[1e9, -3.0, 0.0], [-1e9, 3.0, 1e-9]]).unwrap();
        assert!((0.0..=1.0).contains(&alpha));
    }

    #[test]
    fn precision_examples() {
        let i = Matrix::<f64>::identity(3);
        assert!(close(&precision(&i, PrecisionMode::Direct).unwrap(), &i, 1e-15));

        let m = Matrix::<f64>::from_diagonal(&[2.0, 0.0]);
        let p = precision(&m, PrecisionMode::Ridge(1e-6)).unwrap();
        assert!((p[(0, 0)] - 1.0 / (2.0 + 1e-6)).abs() < 1e-15);
        assert!((p[(1, 1)] - 1e6).abs() < 1e-6);
        assert!(p[(0, 0)] < 0.5);

        let proj = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]);
        let p = precision(&proj, PrecisionMode::PseudoInverse).unwrap();
        assert!(close(&p, &proj, 1e-15));

        assert!(matches!(
            precision(&proj, PrecisionMode::Direct),
            Err(Error::SingularMatrix)
        ));
    }

    fn toy() -> EmbeddedDataset<f64> {
        EmbeddedDataset::new(vec![
            Sample::new("1", "a", vec![0.0, 0.0]),
            Sample::new("2", "a", vec![2.0, 0.0]),
            Sample::new("3", "b", vec![3.0, 4.0]),
            Sample::new("4", "b", vec![3.0, 6.0]),
        ])
        .unwrap()
    }

    #[test]
    fn fit_toy_centroids() {
        let m = GeometryModel::fit(&toy(), &GeometryConfig::default()).unwrap();
        assert_eq!(m.get("a").unwrap().centroid, vec![1.0, 0.0]);
        assert_eq!(m.get("b").unwrap().centroid, vec![3.0, 5.0]);
        assert!(m.supports_mahalanobis());
        // rank-1 class covariances force the Cholesky fallback ridge
        assert!(m.get("a").unwrap().regularization.ridge.is_some());
    }

    #[test]
    fn singleton_class_rejected_without_pooling() {
        let d = EmbeddedDataset::new(vec![
            Sample::new("1", "a", vec![0.0, 0.0]),
            Sample::new("2", "a", vec![2.0, 0.0]),
            Sample::new("3", "b", vec![3.0, 4.0]),
        ])
        .unwrap();
        let cfg = GeometryConfig {
            shrinkage: Shrinkage::None,
            ..Default::default()
        };
        assert!(matches!(
            GeometryModel::fit(&d, &cfg),
            Err(Error::InsufficientSamples { actual: 1, .. })
        ));
        let pooled = GeometryConfig {
            pooled: true,
            ..cfg.clone()
        };
        assert!(GeometryModel::fit(&d, &pooled).is_ok());
        let euclid_only = GeometryConfig {
            mahalanobis: false,
            ..cfg
        };
        assert!(GeometryModel::fit(&d, &euclid_only).is_ok());
    }

    #[test]
    fn pooled_covariance_shared() {
        let cfg = GeometryConfig {
            pooled: true,
            shrinkage: Shrinkage::None,
            ..Default::default()
        };
        let m = GeometryModel::fit(&toy(), &cfg).unwrap();
        let a = &m.get("a").unwrap().covariance;
        let b = &m.get("b").unwrap().covariance;
        assert_eq!(a, b);
        // residuals (±1,0) and (0,±1): pooled diag(0.5, 0.5)
        assert!((a[(0, 0)] - 0.5).abs() < 1e-15 && (a[(1, 1)] - 0.5).abs() < 1e-15);
    }
}
