//! Frame selection for a matched pair.
//!
//! The clear frames nearest to the snowy frames bound a clear window. The
//! window is sampled at the largest interval that still yields the minimum
//! frame count; windows that would give too many frames at that interval
//! move to the next interval and keep exactly the minimum count, and
//! windows that are too short are widened inside the clear sequence.

use serde::{Deserialize, Serialize};

use crate::coverage::d_max;
use crate::error::{Error, Result};
use crate::matcher::MatchOutcome;
use crate::spatial::{interpolate_or_stationary, TemporalTrajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub base_rate_hz: f64,
    pub min_frames: usize,
    pub max_frames: usize,
    /// Candidate sampling intervals, strictly increasing.
    pub intervals: Vec<usize>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            base_rate_hz: 10.0,
            min_frames: 100,
            max_frames: 150,
            intervals: vec![1, 2, 3, 4, 5],
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_rate_hz > 0.0) || !self.base_rate_hz.is_finite() {
            return Err(Error::Config(format!("base rate {} Hz", self.base_rate_hz)));
        }
        if self.min_frames == 0 || self.min_frames > self.max_frames {
            return Err(Error::Config(format!(
                "need 0 < min_frames <= max_frames, got {} and {}",
                self.min_frames, self.max_frames
            )));
        }
        if self.intervals.is_empty()
            || self.intervals[0] == 0
            || self.intervals.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config(format!(
                "intervals must be positive and strictly increasing: {:?}",
                self.intervals
            )));
        }
        Ok(())
    }
}

/// Frames kept when sampling `len` frames every `interval`: the first and
/// every `interval`-th after it.
pub fn sampled_count(len: usize, interval: usize) -> usize {
    len.div_ceil(interval)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingChoice {
    pub interval: usize,
    pub frame_count: usize,
    pub effective_rate_hz: f64,
    /// No interval reaches the minimum frame count.
    pub shortfall: bool,
    /// The maximum was exceeded; the interval was incremented and the count
    /// pinned to the minimum.
    pub capped: bool,
}

/// Chooses the sampling interval for a window of `c_prime_len` frames.
pub fn select_sampling(c_prime_len: usize, config: &SamplingConfig) -> Result<SamplingChoice> {
    config.validate()?;
    if c_prime_len == 0 {
        return Err(Error::InvalidInput("empty clear window".into()));
    }
    let best = config
        .intervals
        .iter()
        .rev()
        .copied()
        .find(|&k| sampled_count(c_prime_len, k) >= config.min_frames);
    let choice = match best {
        None => {
            let k = config.intervals[0];
            SamplingChoice {
                interval: k,
                frame_count: sampled_count(c_prime_len, k),
                effective_rate_hz: config.base_rate_hz / k as f64,
                shortfall: true,
                capped: false,
            }
        }
        Some(k) if sampled_count(c_prime_len, k) > config.max_frames => SamplingChoice {
            interval: k + 1,
            frame_count: config.min_frames,
            effective_rate_hz: config.base_rate_hz / (k + 1) as f64,
            shortfall: false,
            capped: true,
        },
        Some(k) => SamplingChoice {
            interval: k,
            frame_count: sampled_count(c_prime_len, k),
            effective_rate_hz: config.base_rate_hz / k as f64,
            shortfall: false,
            capped: false,
        },
    };
    Ok(choice)
}

/// First and last clear frame positions among the nearest clear frame of
/// every snowy frame. Ties go to the lower clear position.
pub fn align_endpoints(s: &TemporalTrajectory, c: &TemporalTrajectory) -> Result<(usize, usize)> {
    let nearest = nearest_frames(s, c)?;
    let first = *nearest.iter().min().expect("non-empty");
    let last = *nearest.iter().max().expect("non-empty");
    Ok((first, last))
}

/// Position of the spatially nearest clear frame for every snowy frame.
pub fn nearest_frames(s: &TemporalTrajectory, c: &TemporalTrajectory) -> Result<Vec<usize>> {
    if s.is_empty() || c.is_empty() {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }
    Ok(s.frames()
        .iter()
        .map(|sf| {
            let mut best = (0usize, f64::INFINITY);
            for (i, cf) in c.frames().iter().enumerate() {
                let d = sf.position.distance(&cf.position);
                if d < best.1 {
                    best = (i, d);
                }
            }
            best.0
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSubsequence {
    pub snowy_id: String,
    pub clear_id: String,
    /// Clear window bounded by the nearest frames, before any widening.
    pub aligned_window: (usize, usize),
    /// Positions of the sampled frames within the clear trajectory.
    pub clear_frame_indices: Vec<usize>,
    pub sampling_interval: usize,
    pub effective_rate_hz: f64,
    /// Directed Hausdorff distance from the snowy model to the model of the
    /// sampled clear frames, meters.
    pub d_max: f64,
    pub extended_beyond_alignment: bool,
    /// Fewer than the minimum frames were available even after widening.
    pub shortfall: bool,
    pub capped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Growth {
    Symmetric,
    ForwardThenBackward,
}

/// Widens `[first, last]` inside `[0, len - 1]` until it spans `span`
/// frames or cannot grow further.
fn widen(first: usize, last: usize, len: usize, span: usize, growth: Growth) -> (usize, usize) {
    let (mut lo, mut hi) = (first, last);
    let mut after = true;
    while hi - lo + 1 < span && (lo > 0 || hi + 1 < len) {
        let grow_after = match growth {
            Growth::Symmetric => (after && hi + 1 < len) || lo == 0,
            Growth::ForwardThenBackward => hi + 1 < len,
        };
        if grow_after {
            hi += 1;
        } else {
            lo -= 1;
        }
        after = !after;
    }
    (lo, hi)
}

/// Builds the clear subsequence for a resolved match of `s` with `c`.
pub fn build_pair(
    s: &TemporalTrajectory,
    c: &TemporalTrajectory,
    outcome: &MatchOutcome,
    config: &SamplingConfig,
    delta_d: f64,
) -> Result<PairedSubsequence> {
    let Some(clear_id) = outcome.matched_clear() else {
        return Err(Error::InvalidInput(format!(
            "{} has no resolved match",
            outcome.snowy_id
        )));
    };
    if clear_id != c.sequence_id() || outcome.snowy_id != s.sequence_id() {
        return Err(Error::InvalidInput(format!(
            "outcome pairs {} with {clear_id}, got trajectories {} and {}",
            outcome.snowy_id,
            s.sequence_id(),
            c.sequence_id()
        )));
    }
    let (first, last) = align_endpoints(s, c)?;
    let choice = select_sampling(last - first + 1, config)?;
    let k = choice.interval;
    let span_for = |frames: usize| (frames - 1) * k + 1;

    let (lo, hi) = if choice.shortfall {
        widen(first, last, c.len(), span_for(config.min_frames), Growth::Symmetric)
    } else if choice.capped {
        let (lo, hi) = widen(
            first,
            last,
            c.len(),
            span_for(config.min_frames),
            Growth::ForwardThenBackward,
        );
        (lo, hi.min(lo + span_for(config.min_frames) - 1))
    } else {
        (first, last)
    };
    let mut indices: Vec<usize> = (lo..=hi).step_by(k).collect();
    if choice.capped {
        indices.truncate(config.min_frames);
    }
    let shortfall = indices.len() < config.min_frames;
    let extended = lo < first || hi > last;
    if shortfall {
        log::warn!(
            "pair ({}, {}): only {} frames available, wanted {}",
            s.sequence_id(),
            c.sequence_id(),
            indices.len(),
            config.min_frames
        );
    }

    let d_max = sampled_d_max(s, c, &indices, delta_d)?;
    Ok(PairedSubsequence {
        snowy_id: s.sequence_id().to_string(),
        clear_id: c.sequence_id().to_string(),
        aligned_window: (first, last),
        clear_frame_indices: indices,
        sampling_interval: k,
        effective_rate_hz: choice.effective_rate_hz,
        d_max,
        extended_beyond_alignment: extended,
        shortfall,
        capped: choice.capped,
    })
}

fn sampled_d_max(
    s: &TemporalTrajectory,
    c: &TemporalTrajectory,
    indices: &[usize],
    delta_d: f64,
) -> Result<f64> {
    let (s_model, _) = interpolate_or_stationary(s, delta_d)?;
    let c_model = if indices.len() >= 2 {
        let frames = indices.iter().map(|&i| c.frames()[i]).collect();
        let sub = TemporalTrajectory::new(c.sequence_id(), frames)?;
        interpolate_or_stationary(&sub, delta_d)?.0
    } else {
        crate::spatial::SpatialModel::from_points(
            c.sequence_id(),
            vec![c.frames()[indices[0]].position],
        )
    };
    d_max(&s_model, &c_model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::PlanarPoint;
    use crate::matcher::{DecidedBy, Decision, MatchStatus};
    use crate::spatial::TrajectoryFrame;

    fn traj(id: &str, pts: impl IntoIterator<Item = (f64, f64)>) -> TemporalTrajectory {
        let frames = pts
            .into_iter()
            .enumerate()
            .map(|(i, (x, y))| TrajectoryFrame {
                frame_index: i as u64,
                timestamp: i as f64 * 0.1,
                position: PlanarPoint::new(x, y),
            })
            .collect();
        TemporalTrajectory::new(id, frames).unwrap()
    }

    fn matched(s: &str, c: &str) -> MatchOutcome {
        MatchOutcome {
            snowy_id: s.into(),
            tier: Some(1),
            candidates: vec![],
            status: MatchStatus::AutoMatched,
            decision: Some(Decision {
                clear_id: c.into(),
                decided_by: DecidedBy::Auto,
                note: String::new(),
                decided_at: None,
            }),
        }
    }

    fn choice(len: usize) -> SamplingChoice {
        select_sampling(len, &SamplingConfig::default()).unwrap()
    }

    #[test]
    fn sampling_examples() {
        let c = choice(520);
        assert_eq!((c.interval, c.frame_count, c.capped), (5, 104, false));
        assert_eq!(c.effective_rate_hz, 2.0);
        let c = choice(260);
        assert_eq!((c.interval, c.frame_count), (2, 130));
        assert_eq!(c.effective_rate_hz, 5.0);
        let c = choice(160);
        assert_eq!((c.interval, c.frame_count, c.capped), (2, 100, true));
        let c = choice(320);
        assert_eq!((c.interval, c.frame_count), (3, 107));
        assert_eq!(format!("{:.1}", c.effective_rate_hz), "3.3");
        let c = choice(60);
        assert_eq!((c.interval, c.frame_count, c.shortfall), (1, 60, true));
    }

    #[test]
    fn sampling_rejects_bad_config() {
        let mut cfg = SamplingConfig::default();
        cfg.min_frames = 200;
        assert!(select_sampling(10, &cfg).is_err());
        let cfg = SamplingConfig {
            intervals: vec![2, 1],
            ..SamplingConfig::default()
        };
        assert!(select_sampling(10, &cfg).is_err());
        assert!(select_sampling(0, &SamplingConfig::default()).is_err());
    }

    #[test]
    fn align_identical() {
        let s = traj("s", (0..50).map(|i| (i as f64, 0.0)));
        assert_eq!(align_endpoints(&s, &s).unwrap(), (0, 49));
    }

    #[test]
    fn align_middle_third() {
        let c = traj("c", (0..300).map(|i| (i as f64, 0.0)));
        let s = traj("s", (0..100).map(|i| (100.0 + i as f64 + 0.3, 1.0)));
        assert_eq!(align_endpoints(&s, &c).unwrap(), (100, 199));
    }

    #[test]
    fn align_stationary_and_ties() {
        let c = traj("c", (0..100).map(|i| (i as f64, 0.0)));
        let s = traj("s", (0..20).map(|_| (37.1, 2.0)));
        assert_eq!(align_endpoints(&s, &c).unwrap(), (37, 37));
        // Equidistant from frames 37 and 38: lower wins.
        let s = traj("s", (0..5).map(|_| (37.5, 0.0)));
        assert_eq!(align_endpoints(&s, &c).unwrap(), (37, 37));
    }

    #[test]
    fn full_overlap_pair() {
        let c = traj("c", (0..320).map(|i| (i as f64 * 0.5, 0.0)));
        let s = traj("s", (0..320).map(|i| (i as f64 * 0.5, 0.5)));
        let p = build_pair(&s, &c, &matched("s", "c"), &SamplingConfig::default(), 1.0).unwrap();
        assert_eq!(p.sampling_interval, 3);
        assert_eq!(p.clear_frame_indices.len(), 107);
        assert!(!p.extended_beyond_alignment);
        assert!(!p.shortfall);
        assert!(p.d_max < 1.0);
    }

    #[test]
    fn partial_overlap_extends() {
        let c = traj("c", (0..400).map(|i| (i as f64, 0.0)));
        let s = traj("s", (0..60).map(|i| (200.0 + i as f64, 0.2)));
        let p = build_pair(&s, &c, &matched("s", "c"), &SamplingConfig::default(), 1.0).unwrap();
        assert_eq!(p.aligned_window, (200, 259));
        assert_eq!(p.sampling_interval, 1);
        assert_eq!(p.clear_frame_indices.len(), 100);
        assert!(p.extended_beyond_alignment);
        assert_eq!(p.clear_frame_indices[0], 180);
        assert_eq!(*p.clear_frame_indices.last().unwrap(), 279);
        // The widened clear window reaches 20 m past either end of s; d_max is
        // measured from s, so it stays small.
        assert!(p.d_max < 1.0);
    }

    #[test]
    fn stationary_snowy_extends_around_frame() {
        let c = traj("c", (0..400).map(|i| (i as f64, 0.0)));
        let s = traj("s", (0..30).map(|_| (37.0, 1.0)));
        let p = build_pair(&s, &c, &matched("s", "c"), &SamplingConfig::default(), 1.0).unwrap();
        assert_eq!(p.aligned_window, (37, 37));
        assert!(p.extended_beyond_alignment);
        assert_eq!(p.clear_frame_indices.len(), 100);
        assert!(p.clear_frame_indices[0] <= 37 && *p.clear_frame_indices.last().unwrap() >= 37);
    }

    #[test]
    fn window_near_start_extends_one_way() {
        let c = traj("c", (0..400).map(|i| (i as f64, 0.0)));
        let s = traj("s", (0..10).map(|i| (i as f64, 0.0)));
        let p = build_pair(&s, &c, &matched("s", "c"), &SamplingConfig::default(), 1.0).unwrap();
        assert_eq!(p.clear_frame_indices, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn short_clear_sequence_reports_shortfall() {
        let c = traj("c", (0..40).map(|i| (i as f64, 0.0)));
        let s = traj("s", (0..40).map(|i| (i as f64, 0.0)));
        let p = build_pair(&s, &c, &matched("s", "c"), &SamplingConfig::default(), 1.0).unwrap();
        assert!(p.shortfall);
        assert_eq!(p.clear_frame_indices.len(), 40);
    }

    #[test]
    fn capped_window_takes_exactly_min_frames() {
        // 180 aligned frames: interval 1 gives 180 > 150, so interval 2 with
        // 100 frames, which needs 199 frames of span.
        let c = traj("c", (0..400).map(|i| (i as f64 * 0.2, 0.0)));
        let s = traj("s", (100..280).map(|i| (i as f64 * 0.2, 0.0)));
        let p = build_pair(&s, &c, &matched("s", "c"), &SamplingConfig::default(), 1.0).unwrap();
        assert_eq!(p.aligned_window, (100, 279));
        assert!(p.capped);
        assert_eq!(p.sampling_interval, 2);
        assert_eq!(p.clear_frame_indices.len(), 100);
        assert_eq!(p.clear_frame_indices[0], 100);
        assert_eq!(*p.clear_frame_indices.last().unwrap(), 298);
        assert!(p.extended_beyond_alignment);
    }

    #[test]
    fn unresolved_outcome_rejected() {
        let c = traj("c", (0..10).map(|i| (i as f64, 0.0)));
        let mut o = matched("c", "c");
        o.decision = None;
        assert!(build_pair(&c, &c, &o, &SamplingConfig::default(), 1.0).is_err());
        assert!(build_pair(&c, &c, &matched("s", "c"), &SamplingConfig::default(), 1.0).is_err());
    }
}
