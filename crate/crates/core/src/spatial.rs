//! Constant-distance spatial models.
//!
//! GPS logs are uniform in time, not in space. A [`SpatialModel`] resamples
//! the piecewise-linear path through a trajectory's frames at a constant
//! arc-length spacing so that traversals at different speeds become
//! comparable point sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{GeoFrame, LocalOrigin, PlanarPoint};

/// Relative tolerance on inter-frame time around the nominal step.
pub const FRAME_PERIOD_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFrame {
    pub frame_index: u64,
    pub timestamp: f64,
    pub position: PlanarPoint,
}

/// A recording sampled at a constant frame period, in the run's planar frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalTrajectory {
    sequence_id: String,
    frames: Vec<TrajectoryFrame>,
    delta_t: f64,
}

impl TemporalTrajectory {
    /// Validates ordering and uniform sampling. The nominal frame period is
    /// the median inter-frame time; every step must lie within 10% of it.
    pub fn new(sequence_id: impl Into<String>, frames: Vec<TrajectoryFrame>) -> Result<Self> {
        let sequence_id = sequence_id.into();
        if frames.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "sequence {sequence_id}: need at least 2 frames, got {}",
                frames.len()
            )));
        }
        if let Some(bad) = frames
            .iter()
            .position(|f| !f.position.is_finite() || !f.timestamp.is_finite())
        {
            return Err(Error::InvalidInput(format!(
                "sequence {sequence_id}: non-finite value at frame position {bad}"
            )));
        }
        let mut steps = Vec::with_capacity(frames.len() - 1);
        for (i, w) in frames.windows(2).enumerate() {
            let dt = w[1].timestamp - w[0].timestamp;
            if dt <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "sequence {sequence_id}: timestamps not strictly increasing at frame position {}",
                    i + 1
                )));
            }
            steps.push(dt);
        }
        let mut sorted = steps.clone();
        sorted.sort_by(f64::total_cmp);
        let delta_t = sorted[sorted.len() / 2];
        if let Some(i) = steps
            .iter()
            .position(|dt| (dt - delta_t).abs() > FRAME_PERIOD_TOLERANCE * delta_t)
        {
            return Err(Error::InvalidInput(format!(
                "sequence {sequence_id}: step {:.4} s at frame position {} deviates from the frame period {delta_t:.4} s",
                steps[i],
                i + 1
            )));
        }
        Ok(Self {
            sequence_id,
            frames,
            delta_t,
        })
    }

    /// Projects GPS fixes with `origin` and validates the result.
    pub fn from_geo(
        sequence_id: impl Into<String>,
        frames: &[GeoFrame],
        origin: &LocalOrigin,
    ) -> Result<Self> {
        let frames = frames
            .iter()
            .map(|f| {
                Ok(TrajectoryFrame {
                    frame_index: f.frame_index,
                    timestamp: f.timestamp,
                    position: origin.project(f.latitude, f.longitude)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sequence_id, frames)
    }

    pub fn sequence_id(&self) -> &str {
        &self.sequence_id
    }

    pub fn frames(&self) -> &[TrajectoryFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn delta_t(&self) -> f64 {
        self.delta_t
    }

    pub fn positions(&self) -> impl Iterator<Item = PlanarPoint> + '_ {
        self.frames.iter().map(|f| f.position)
    }

    /// Length of the piecewise-linear path through all frames.
    pub fn arc_length(&self) -> f64 {
        self.frames
            .windows(2)
            .map(|w| w[0].position.distance(&w[1].position))
            .sum()
    }
}

/// Where a model point came from: it lies at `alpha` along the segment from
/// frame `segment - 1` to frame `segment`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSegment {
    pub segment: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialModel {
    sequence_id: String,
    points: Vec<PlanarPoint>,
    delta_d: f64,
    source: Vec<SourceSegment>,
}

impl SpatialModel {
    /// Single-point model at the first frame, for recordings whose path is
    /// shorter than one spatial step.
    pub fn stationary(traj: &TemporalTrajectory, delta_d: f64) -> Self {
        Self {
            sequence_id: traj.sequence_id.clone(),
            points: vec![traj.frames[0].position],
            delta_d,
            source: vec![SourceSegment {
                segment: 1,
                alpha: 0.0,
            }],
        }
    }

    /// Wraps an arbitrary point list, e.g. a hand-built fixture. No spacing
    /// invariant is implied; `delta_d` is recorded as 0.
    pub fn from_points(sequence_id: impl Into<String>, points: Vec<PlanarPoint>) -> Self {
        let source = vec![
            SourceSegment {
                segment: 0,
                alpha: 0.0
            };
            points.len()
        ];
        Self {
            sequence_id: sequence_id.into(),
            points,
            delta_d: 0.0,
            source,
        }
    }

    pub fn sequence_id(&self) -> &str {
        &self.sequence_id
    }

    pub fn points(&self) -> &[PlanarPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn delta_d(&self) -> f64 {
        self.delta_d
    }

    pub fn source(&self) -> &[SourceSegment] {
        &self.source
    }
}

/// Resamples `traj` every `delta_d` meters of arc length.
///
/// Point 0 is the first frame. Point `j` lies in the segment `i` whose
/// cumulative length brackets `j * delta_d`, at
/// `alpha * (w[i] - w[i-1]) + w[i-1]` with `alpha` the fractional position
/// inside that segment. Zero-length segments never bracket a target and are
/// skipped. No point is emitted for a trailing remainder shorter than
/// `delta_d`.
pub fn interpolate_constant_distance(
    traj: &TemporalTrajectory,
    delta_d: f64,
) -> Result<SpatialModel> {
    if !(delta_d > 0.0) || !delta_d.is_finite() {
        return Err(Error::InvalidInput(format!(
            "spacing must be positive and finite, got {delta_d}"
        )));
    }
    let w: Vec<PlanarPoint> = traj.positions().collect();
    let seg_len: Vec<f64> = w.windows(2).map(|p| p[0].distance(&p[1])).collect();
    let total: f64 = seg_len.iter().sum();
    if total < delta_d {
        return Err(Error::DegenerateModel {
            sequence_id: traj.sequence_id.clone(),
            arc_length: total,
            delta_d,
        });
    }
    let last_positive = seg_len
        .iter()
        .rposition(|&l| l > 0.0)
        .expect("positive arc length implies a positive segment");

    let count = (total / delta_d).floor() as usize + 1;
    let mut points = Vec::with_capacity(count);
    let mut source = Vec::with_capacity(count);
    points.push(w[0]);
    source.push(SourceSegment {
        segment: 1,
        alpha: 0.0,
    });

    // `seg` indexes seg_len, so the frame pair is (seg, seg + 1) and the
    // 1-based segment number is seg + 1. `before` is the length up to frame `seg`.
    let mut seg = 0usize;
    let mut before = 0.0f64;
    for j in 1..count {
        let target = j as f64 * delta_d;
        while seg < last_positive && before + seg_len[seg] < target {
            before += seg_len[seg];
            seg += 1;
        }
        // Rounding in `floor(total / delta_d) * delta_d` can overshoot the
        // final segment by an ulp; pin that to its end.
        let alpha = ((target - before) / seg_len[seg]).clamp(0.0, 1.0);
        let (a, b) = (w[seg], w[seg + 1]);
        points.push(PlanarPoint::new(
            alpha * (b.x - a.x) + a.x,
            alpha * (b.y - a.y) + a.y,
        ));
        source.push(SourceSegment {
            segment: seg + 1,
            alpha,
        });
    }

    Ok(SpatialModel {
        sequence_id: traj.sequence_id.clone(),
        points,
        delta_d,
        source,
    })
}

/// Like [`interpolate_constant_distance`], but falls back to a single-point
/// model for near-stationary recordings. The flag reports the fallback.
pub fn interpolate_or_stationary(
    traj: &TemporalTrajectory,
    delta_d: f64,
) -> Result<(SpatialModel, bool)> {
    match interpolate_constant_distance(traj, delta_d) {
        Ok(m) => Ok((m, false)),
        Err(Error::DegenerateModel { .. }) => Ok((SpatialModel::stationary(traj, delta_d), true)),
        Err(e) => Err(e),
    }
}
