//! Reference implementations written for clarity rather than speed, and
//! random fixture generators. Used only by tests.

use rand::Rng;
use weatherpair_core::geo::EARTH_RADIUS_M;
use weatherpair_core::{PlanarPoint, TemporalTrajectory, TrajectoryFrame};

fn dist(a: &PlanarPoint, b: &PlanarPoint) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

/// Fraction of `s` within `theta` of some point of `c`, by double loop.
pub fn brute_cover(s: &[PlanarPoint], c: &[PlanarPoint], theta: f64) -> f64 {
    let hits = s
        .iter()
        .filter(|p| c.iter().any(|q| dist(p, q) <= theta))
        .count();
    hits as f64 / s.len() as f64
}

/// Directed Hausdorff distance from `s` to `c`, by double loop.
pub fn brute_d_max(s: &[PlanarPoint], c: &[PlanarPoint]) -> f64 {
    s.iter()
        .map(|p| c.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Resamples a polyline by walking it and dropping a point each time
/// `delta` meters have been covered since the last one. Carries the
/// leftover distance from segment to segment instead of using cumulative
/// lengths.
pub fn walk_resample(path: &[PlanarPoint], delta: f64) -> Vec<PlanarPoint> {
    let mut out = vec![path[0]];
    let mut need = delta;
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = dist(&a, &b);
        if len == 0.0 {
            continue;
        }
        let mut at = 0.0;
        while len - at >= need {
            at += need;
            let t = at / len;
            out.push(PlanarPoint::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
            need = delta;
        }
        need -= len - at;
    }
    out
}

/// Two-sample Kolmogorov-Smirnov statistic evaluated at every sample point.
pub fn brute_ks(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |xs: &[f64], x: f64| xs.iter().filter(|&&v| v <= x).count() as f64 / xs.len() as f64;
    a.iter()
        .chain(b)
        .map(|&x| (cdf(a, x) - cdf(b, x)).abs())
        .fold(0.0, f64::max)
}

/// Great-circle distance in meters.
pub fn haversine(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().asin()
}

/// Builds a 10 Hz trajectory through `points`.
pub fn trajectory(id: &str, points: &[PlanarPoint]) -> TemporalTrajectory {
    let frames = points
        .iter()
        .enumerate()
        .map(|(i, &position)| TrajectoryFrame {
            frame_index: i as u64,
            timestamp: i as f64 * 0.1,
            position,
        })
        .collect();
    TemporalTrajectory::new(id, frames).expect("valid fixture trajectory")
}

/// Random drive: heading drifts, step lengths vary, and roughly one step in
/// ten is a standstill. Always moves at least `min_length` in total.
pub fn random_path(rng: &mut impl Rng, frames: usize, min_length: f64) -> Vec<PlanarPoint> {
    loop {
        let mut p = PlanarPoint::new(rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0));
        let mut heading: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut out = vec![p];
        let mut length = 0.0;
        for _ in 1..frames {
            let step = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.05..3.0) };
            heading += rng.gen_range(-0.6..0.6);
            p = PlanarPoint::new(p.x + step * heading.cos(), p.y + step * heading.sin());
            length += step;
            out.push(p);
        }
        if length >= min_length {
            return out;
        }
    }
}

/// Uniform random points in a square of side `spread` centred at `center`.
pub fn random_cloud(rng: &mut impl Rng, n: usize, center: PlanarPoint, spread: f64) -> Vec<PlanarPoint> {
    (0..n)
        .map(|_| {
            PlanarPoint::new(
                center.x + rng.gen_range(-0.5..0.5) * spread,
                center.y + rng.gen_range(-0.5..0.5) * spread,
            )
        })
        .collect()
}

/// A noisy copy of `base`, shifted by `offset`, with some points dropped.
pub fn perturbed(rng: &mut impl Rng, base: &[PlanarPoint], offset: PlanarPoint, noise: f64) -> Vec<PlanarPoint> {
    let mut out = Vec::with_capacity(base.len());
    for p in base {
        if rng.gen_bool(0.9) {
            out.push(PlanarPoint::new(
                p.x + offset.x + rng.gen_range(-noise..=noise),
                p.y + offset.y + rng.gen_range(-noise..=noise),
            ));
        }
    }
    if out.is_empty() {
        vec![base[0]]
    } else {
        out
    }
}
