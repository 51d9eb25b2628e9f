#![allow(dead_code)]

use std::path::{Path, PathBuf};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use tower::ServiceExt;

use weatherpair_core::manifest::{write_trajectories, RawSequence, TrajectorySet};
use weatherpair_core::{run_pipeline, write_outputs, Domain, GeoFrame, LocalOrigin, PlanarPoint, RunConfig};

pub fn origin() -> LocalOrigin {
    LocalOrigin::new(43.4723, -80.5449).unwrap()
}

/// `n` frames one meter apart along x at height `y`, starting at `x0`.
pub fn line(x0: f64, y: f64, n: usize) -> Vec<PlanarPoint> {
    (0..n).map(|i| PlanarPoint::new(x0 + i as f64, y)).collect()
}

pub fn write_corpus(dir: &Path, sequences: &[(&str, Domain, Vec<PlanarPoint>)]) {
    let o = origin();
    let sequences = sequences
        .iter()
        .map(|(id, domain, pts)| RawSequence {
            sequence_id: id.to_string(),
            domain: *domain,
            road_users: Some(3),
            frames: pts
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let (lat, lon) = o.unproject(*p);
                    GeoFrame::new(i as u64, i as f64 * 0.1, lat, lon)
                })
                .collect(),
        })
        .collect();
    write_trajectories(dir, &TrajectorySet { sequences }).unwrap();
}

/// s1 ties between c1 and c2 (mirror lanes), s2 drives far from every clear
/// sequence, c3 is elsewhere.
pub fn review_corpus(dir: &Path) {
    write_corpus(
        dir,
        &[
            ("s1", Domain::Snowy, line(0.0, 0.0, 300)),
            ("s2", Domain::Snowy, line(20_000.0, 0.0, 300)),
            ("c1", Domain::Clear, line(0.0, 1.0, 300)),
            ("c2", Domain::Clear, line(0.0, -1.0, 300)),
            ("c3", Domain::Clear, line(0.0, 500.0, 400)),
        ],
    );
}

/// Runs the pipeline on the review corpus and returns the state path.
pub fn review_state(root: &Path) -> PathBuf {
    let data = root.join("data");
    let out = root.join("out");
    review_corpus(&data);
    let run = run_pipeline(&RunConfig::default(), &data, None).unwrap();
    write_outputs(&run, &out).unwrap();
    out.join("state.json")
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, serde_json::Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        serde_json::Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| serde_json::Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}
