use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weatherpair_core::{project_to_local, GeoFrame, LocalOrigin};
use weatherpair_testkit::haversine;

fn frames_near(rng: &mut ChaCha8Rng, lat: f64, lon: f64, n: usize, extent_deg: f64) -> Vec<GeoFrame> {
    (0..n)
        .map(|i| {
            GeoFrame::new(
                i as u64,
                i as f64 * 0.1,
                lat + rng.gen_range(-extent_deg..extent_deg),
                lon + rng.gen_range(-extent_deg..extent_deg),
            )
        })
        .collect()
}

#[test]
fn planar_distance_tracks_haversine_within_ten_km() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for &(lat, lon) in &[(43.47, -80.54), (0.0, 10.0), (60.1, 24.9), (-33.9, 151.2)] {
        let origin = GeoFrame::new(0, 0.0, lat, lon);
        let frames = frames_near(&mut rng, lat, lon, 200, 0.06);
        let pts = project_to_local(&frames, &origin).unwrap();
        for i in 0..frames.len() {
            for j in (i + 1)..frames.len() {
                let (a, b) = (&frames[i], &frames[j]);
                let far = [a, b].iter().any(|f| haversine(lat, lon, f.latitude, f.longitude) > 10_000.0);
                let h = haversine(a.latitude, a.longitude, b.latitude, b.longitude);
                if far || h < 1.0 {
                    continue;
                }
                let d = pts[i].distance(&pts[j]);
                assert!((d - h).abs() / h < 0.005, "{d} vs {h}");
            }
        }
    }
}

#[test]
fn one_arc_second_north() {
    let origin = GeoFrame::new(0, 0.0, 43.47, -80.54);
    let north = GeoFrame::new(1, 0.1, 43.47 + 1.0 / 3600.0, -80.54);
    let p = project_to_local(&[origin, north], &origin).unwrap();
    assert_eq!((p[0].x, p[0].y), (0.0, 0.0));
    let h = haversine(origin.latitude, origin.longitude, north.latitude, north.longitude);
    assert!((p[1].y - 30.887).abs() < 1e-3);
    assert!((p[1].y - h).abs() / h < 0.001);
    assert_eq!(p[1].x, 0.0);
}

#[test]
fn same_latitude_origins_differ_by_a_translation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let frames = frames_near(&mut rng, 43.47, -80.54, 100, 0.02);
    let a = LocalOrigin::new(43.47, -80.54).unwrap();
    let b = LocalOrigin::new(43.47, -80.51).unwrap();
    let shift = |f: &GeoFrame| {
        let p = a.project(f.latitude, f.longitude).unwrap();
        let q = b.project(f.latitude, f.longitude).unwrap();
        (p.x - q.x, p.y - q.y)
    };
    let first = shift(&frames[0]);
    for f in &frames {
        let s = shift(f);
        assert!((s.0 - first.0).abs() < 1e-6 && (s.1 - first.1).abs() < 1e-6);
    }
}
