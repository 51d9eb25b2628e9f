//! Seeded synthetic corpus: vehicles driving a rectangular road grid.
//!
//! Clear sequences are random grid routes. Most snowy sequences re-drive a
//! stretch of some clear route with a lane offset; a few park, and a few
//! drive in a different town far from every clear route.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geo::{GeoFrame, LocalOrigin, PlanarPoint};
use crate::manifest::{RawSequence, TrajectorySet};
use crate::splits::Domain;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub snowy: usize,
    pub clear: usize,
    pub origin: LocalOrigin,
    pub rate_hz: f64,
    /// Blocks per side of the road grid.
    pub grid_blocks: usize,
    pub block_m: f64,
    /// Frame count range of clear sequences.
    pub clear_frames: (usize, usize),
    /// Frame count range of snowy sequences.
    pub snowy_frames: (usize, usize),
    /// Every n-th snowy sequence is parked, every m-th drives elsewhere.
    pub stationary_every: usize,
    pub remote_every: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            snowy: 74,
            clear: 400,
            origin: LocalOrigin {
                latitude: 43.4723,
                longitude: -80.5449,
            },
            rate_hz: 10.0,
            grid_blocks: 30,
            block_m: 150.0,
            clear_frames: (600, 1500),
            snowy_frames: (150, 600),
            stationary_every: 25,
            remote_every: 18,
        }
    }
}

/// A polyline traced at constant speed, sampled once per frame.
fn sample_route(nodes: &[PlanarPoint], speed: f64, dt: f64, frames: usize) -> Vec<PlanarPoint> {
    let step = speed * dt;
    let mut out = Vec::with_capacity(frames);
    let mut seg = 0;
    let mut into = 0.0;
    while out.len() < frames {
        let (a, b) = (nodes[seg], nodes[seg + 1]);
        let len = a.distance(&b);
        if into > len && seg + 2 < nodes.len() {
            into -= len;
            seg += 1;
            continue;
        }
        let t = (into / len).min(1.0);
        out.push(PlanarPoint::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
        into += step;
    }
    out
}

/// Random walk over grid intersections without immediate U-turns.
fn grid_walk(rng: &mut ChaCha8Rng, blocks: usize, block_m: f64, min_len: f64) -> Vec<PlanarPoint> {
    let n = blocks as i64;
    let mut at = (rng.gen_range(0..=n), rng.gen_range(0..=n));
    let mut prev: Option<(i64, i64)> = None;
    let node = |p: (i64, i64)| PlanarPoint::new(p.0 as f64 * block_m, p.1 as f64 * block_m);
    let mut nodes = vec![node(at)];
    let mut length = 0.0;
    while length < min_len {
        let mut moves: Vec<(i64, i64)> = [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .into_iter()
            .map(|(dx, dy)| (at.0 + dx, at.1 + dy))
            .filter(|p| (0..=n).contains(&p.0) && (0..=n).contains(&p.1) && Some(*p) != prev)
            .collect();
        // Prefer going straight.
        if let Some(p) = prev {
            let straight = (2 * at.0 - p.0, 2 * at.1 - p.1);
            if moves.contains(&straight) && rng.gen_bool(0.6) {
                moves = vec![straight];
            }
        }
        let next = *moves.choose(rng).expect("grid has at least one neighbour");
        prev = Some(at);
        at = next;
        nodes.push(node(at));
        length += block_m;
    }
    nodes
}

/// Offsets a polyline sideways by `offset` meters (positive to the right).
fn lane_offset(points: &[PlanarPoint], offset: f64) -> Vec<PlanarPoint> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let (a, b) = (points[i.saturating_sub(1)], points[(i + 1).min(n - 1)]);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let len = (dx * dx + dy * dy).sqrt();
            if len == 0.0 {
                return points[i];
            }
            PlanarPoint::new(points[i].x + offset * dy / len, points[i].y - offset * dx / len)
        })
        .collect()
}

fn to_frames(
    origin: &LocalOrigin,
    points: &[PlanarPoint],
    t0: f64,
    dt: f64,
    rng: &mut ChaCha8Rng,
    jitter: f64,
) -> Vec<GeoFrame> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let q = if jitter > 0.0 {
                PlanarPoint::new(
                    p.x + rng.gen_range(-jitter..jitter),
                    p.y + rng.gen_range(-jitter..jitter),
                )
            } else {
                *p
            };
            let (lat, lon) = origin.unproject(q);
            GeoFrame::new(i as u64, t0 + i as f64 * dt, lat, lon)
        })
        .collect()
}

/// Generates the corpus. Identical configs give identical corpora.
pub fn generate(config: &SynthConfig) -> TrajectorySet {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dt = 1.0 / config.rate_hz;
    let origin = config.origin;
    let mut sequences = Vec::with_capacity(config.snowy + config.clear);

    let mut clear_paths = Vec::with_capacity(config.clear);
    for i in 0..config.clear {
        let frames = rng.gen_range(config.clear_frames.0..=config.clear_frames.1);
        let speed = rng.gen_range(6.0..14.0);
        let walk = grid_walk(&mut rng, config.grid_blocks, config.block_m, speed * dt * frames as f64 + config.block_m);
        let pts = sample_route(&lane_offset(&walk, 1.75), speed, dt, frames);
        let t0 = rng.gen_range(0.0..1.0e5f64).floor();
        sequences.push(RawSequence {
            sequence_id: format!("clear_{i:04}"),
            domain: Domain::Clear,
            frames: to_frames(&origin, &pts, t0, dt, &mut rng, 0.05),
            road_users: Some(rng.gen_range(0..40)),
        });
        clear_paths.push(walk);
    }

    for i in 0..config.snowy {
        let frames = rng.gen_range(config.snowy_frames.0..=config.snowy_frames.1);
        let t0 = rng.gen_range(0.0..1.0e5f64).floor();
        let pts = if config.stationary_every > 0 && i % config.stationary_every == config.stationary_every - 1 {
            let x = rng.gen_range(0..=config.grid_blocks) as f64 * config.block_m;
            let y = rng.gen_range(0..=config.grid_blocks) as f64 * config.block_m + 3.0;
            vec![PlanarPoint::new(x, y); frames]
        } else {
            let speed = rng.gen_range(5.0..12.0);
            let lane = rng.gen_range(0.5..3.5);
            let path = if clear_paths.is_empty() || (config.remote_every > 0 && i % config.remote_every == config.remote_every - 1) {
                let walk = grid_walk(&mut rng, config.grid_blocks, config.block_m, speed * dt * frames as f64 + config.block_m);
                walk.iter().map(|p| PlanarPoint::new(p.x + 50_000.0, p.y)).collect()
            } else {
                let walk = &clear_paths[rng.gen_range(0..clear_paths.len())];
                let start = rng.gen_range(0..walk.len().saturating_sub(2).max(1));
                walk[start..].to_vec()
            };
            sample_route(&lane_offset(&path, lane), speed, dt, frames)
        };
        let jitter = if pts.first() == pts.last() && pts.len() > 1 && pts[0] == pts[1] {
            0.0
        } else {
            0.05
        };
        sequences.push(RawSequence {
            sequence_id: format!("snowy_{i:04}"),
            domain: Domain::Snowy,
            frames: to_frames(&origin, &pts, t0, dt, &mut rng, jitter),
            road_users: Some(rng.gen_range(0..40)),
        });
    }
    sequences.sort_by(|a, b| a.sequence_id.cmp(&b.sequence_id));
    TrajectorySet { sequences }
}
