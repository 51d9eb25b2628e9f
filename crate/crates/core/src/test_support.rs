use crate::geo::PlanarPoint;
use crate::spatial::SpatialModel;

pub(crate) fn model_from_points(id: &str, points: Vec<PlanarPoint>) -> SpatialModel {
    SpatialModel::from_points(id, points)
}

/// `n` points at x = 0, 1, .., n-1 on the line y = `offset`.
pub(crate) fn line_model(id: &str, offset: f64, n: usize) -> SpatialModel {
    model_from_points(
        id,
        (0..n).map(|i| PlanarPoint::new(i as f64, offset)).collect(),
    )
}
