use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::GeometryModel;
use crate::scalar::Scalar;

use super::json::to_json_string;

/// Writes a fitted model as JSON with the same float formatting as reports,
/// so a reloaded model scores bit-identically.
pub fn write_model_json<T: Scalar>(model: &GeometryModel<T>, path: &Path) -> Result<()> {
    fs::write(path, to_json_string(model)?)?;
    Ok(())
}

pub fn read_model_json<T: Scalar>(path: &Path) -> Result<GeometryModel<T>> {
    let model: GeometryModel<T> = serde_json::from_str(&fs::read_to_string(path)?)?;
    let dim = model.dim();
    for g in model.geometries().values() {
        let square = |m: &crate::linalg::Matrix<T>| m.rows() == dim && m.cols() == dim;
        if g.centroid.len() != dim || !square(&g.covariance) || !square(&g.correlation) {
            return Err(Error::InvalidDataset(format!(
                "model class `{}` does not match dimension {dim}",
                g.label
            )));
        }
    }
    if model.num_classes() < 2 {
        return Err(Error::InvalidDataset("model has fewer than 2 classes".into()));
    }
    Ok(model)
}
