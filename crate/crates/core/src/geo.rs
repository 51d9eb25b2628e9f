//! Local planar projection of GPS fixes.
//!
//! All distances downstream are Euclidean norms in meters, so every
//! trajectory in a run is projected into one shared east/north frame with
//! an equirectangular approximation around a fixed origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius (IUGG), meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// A raw GPS fix for one frame of a recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoFrame {
    pub frame_index: u64,
    /// Seconds, strictly increasing within a sequence.
    pub timestamp: f64,
    pub latitude: f64,
    pub longitude: f64,
}

impl GeoFrame {
    pub fn new(frame_index: u64, timestamp: f64, latitude: f64, longitude: f64) -> Self {
        Self {
            frame_index,
            timestamp,
            latitude,
            longitude,
        }
    }

    pub fn has_valid_position(&self) -> bool {
        valid_lat_lon(self.latitude, self.longitude)
    }
}

pub(crate) fn valid_lat_lon(lat: f64, lon: f64) -> bool {
    lat.is_finite()
        && lon.is_finite()
        && (-90.0..=90.0).contains(&lat)
        && (-180.0..=180.0).contains(&lon)
}

/// Point in the local frame: `x` meters east, `y` meters north of the origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Euclidean distance. Every coverage and nearest-frame comparison in the
    /// crate goes through this one expression so results are reproducible.
    #[inline]
    pub fn distance(&self, other: &PlanarPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Projection origin shared by every sequence of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalOrigin {
    pub latitude: f64,
    pub longitude: f64,
}

impl LocalOrigin {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self> {
        if !valid_lat_lon(latitude, longitude) {
            return Err(Error::InvalidInput(format!(
                "origin ({latitude}, {longitude}) is not a valid latitude/longitude"
            )));
        }
        Ok(Self {
            latitude,
            longitude,
        })
    }

    pub fn from_frame(frame: &GeoFrame) -> Result<Self> {
        Self::new(frame.latitude, frame.longitude)
    }

    pub fn project(&self, latitude: f64, longitude: f64) -> Result<PlanarPoint> {
        if !valid_lat_lon(latitude, longitude) {
            return Err(Error::InvalidInput(format!(
                "({latitude}, {longitude}) is not a valid latitude/longitude"
            )));
        }
        let lat0 = self.latitude.to_radians();
        let x = EARTH_RADIUS_M * (longitude - self.longitude).to_radians() * lat0.cos();
        let y = EARTH_RADIUS_M * (latitude - self.latitude).to_radians();
        Ok(PlanarPoint::new(x, y))
    }

    /// Inverse of [`LocalOrigin::project`]; used by the fixture generator.
    pub fn unproject(&self, point: PlanarPoint) -> (f64, f64) {
        let lat0 = self.latitude.to_radians();
        let lat = self.latitude + (point.y / EARTH_RADIUS_M).to_degrees();
        let lon = self.longitude + (point.x / (EARTH_RADIUS_M * lat0.cos())).to_degrees();
        (lat, lon)
    }
}

/// Projects `frames` into the planar frame centred on `origin`.
pub fn project_to_local(frames: &[GeoFrame], origin: &GeoFrame) -> Result<Vec<PlanarPoint>> {
    if frames.is_empty() {
        return Err(Error::InvalidInput("no frames to project".into()));
    }
    let origin = LocalOrigin::from_frame(origin)?;
    frames
        .iter()
        .map(|f| {
            origin.project(f.latitude, f.longitude).map_err(|_| {
                Error::InvalidInput(format!(
                    "frame {} has invalid position ({}, {})",
                    f.frame_index, f.latitude, f.longitude
                ))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(lat: f64, lon: f64) -> GeoFrame {
        GeoFrame::new(0, 0.0, lat, lon)
    }

    // Great-circle oracle, independent of the projection.
    fn haversine(a: &GeoFrame, b: &GeoFrame) -> f64 {
        let (p1, p2) = (a.latitude.to_radians(), b.latitude.to_radians());
        let dp = p2 - p1;
        let dl = (b.longitude - a.longitude).to_radians();
        let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * h.sqrt().asin()
    }

    #[test]
    fn origin_maps_to_zero() {
        let o = frame(43.4723, -80.5449);
        let p = project_to_local(&[o], &o).unwrap();
        assert_eq!(p, vec![PlanarPoint::new(0.0, 0.0)]);
    }

    #[test]
    fn one_arc_second_north() {
        let o = frame(43.4723, -80.5449);
        let n = frame(43.4723 + 1.0 / 3600.0, -80.5449);
        let p = project_to_local(&[n], &o).unwrap()[0];
        assert!(p.x.abs() < 1e-9);
        assert!((p.y - 30.87).abs() < 0.05, "{}", p.y);
        let truth = haversine(&o, &n);
        assert!(((p.y - truth) / truth).abs() < 1e-3);
    }

    #[test]
    fn identical_inputs_identical_outputs() {
        let o = frame(43.0, -80.0);
        let a = frame(43.01, -80.02);
        let p = project_to_local(&[a, a], &o).unwrap();
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn rejects_invalid_positions() {
        let o = frame(43.0, -80.0);
        assert!(project_to_local(&[frame(91.0, 0.0)], &o).is_err());
        assert!(project_to_local(&[frame(0.0, 181.0)], &o).is_err());
        assert!(project_to_local(&[frame(f64::NAN, 0.0)], &o).is_err());
        assert!(project_to_local(&[frame(0.0, 0.0)], &frame(-95.0, 0.0)).is_err());
        assert!(project_to_local(&[], &o).is_err());
    }

    #[test]
    fn unproject_inverts_project() {
        let o = LocalOrigin::new(43.47, -80.54).unwrap();
        let p = PlanarPoint::new(3210.5, -812.25);
        let (lat, lon) = o.unproject(p);
        let q = o.project(lat, lon).unwrap();
        assert!(p.distance(&q) < 1e-6);
    }

    #[test]
    fn haversine_agreement_within_ten_km() {
        let o = frame(43.47, -80.54);
        // Sweep bearings and ranges up to 10 km.
        for k in 0..36 {
            let bearing = (k as f64 * 10.0).to_radians();
            for range in [50.0, 500.0, 2_000.0, 10_000.0] {
                let origin = LocalOrigin::from_frame(&o).unwrap();
                let (lat, lon) = origin
                    .unproject(PlanarPoint::new(range * bearing.sin(), range * bearing.cos()));
                let f = frame(lat, lon);
                let p = project_to_local(&[f], &o).unwrap()[0];
                let planar = p.distance(&PlanarPoint::default());
                let truth = haversine(&o, &f);
                assert!(((planar - truth) / truth).abs() < 5e-3, "{range} {k}");
            }
        }
    }

    #[test]
    fn reprojection_shifts_by_constant_vector() {
        // Origins on the same parallel give a pure translation. With origins on
        // different parallels only the northing is a translation, since the
        // easting scale follows cos(origin latitude).
        let base = LocalOrigin::new(43.47, -80.54).unwrap();
        let pts: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let t = i as f64 / 49.0;
                base.unproject(PlanarPoint::new(5_000.0 * t, 2_500.0 * (1.0 - t)))
            })
            .collect();
        let other = LocalOrigin::new(43.47, -80.51).unwrap();
        let shifted_lat = LocalOrigin::new(43.49, -80.51).unwrap();
        let first_a = base.project(pts[0].0, pts[0].1).unwrap();
        let first_b = other.project(pts[0].0, pts[0].1).unwrap();
        let first_c = shifted_lat.project(pts[0].0, pts[0].1).unwrap();
        for &(lat, lon) in &pts {
            let a = base.project(lat, lon).unwrap();
            let b = other.project(lat, lon).unwrap();
            let c = shifted_lat.project(lat, lon).unwrap();
            assert!(((a.x - b.x) - (first_a.x - first_b.x)).abs() < 1e-6);
            assert!(((a.y - b.y) - (first_a.y - first_b.y)).abs() < 1e-6);
            assert!(((a.y - c.y) - (first_a.y - first_c.y)).abs() < 1e-6);
        }
    }
}
