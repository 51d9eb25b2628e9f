//! Distribution statistics for comparing the two domains of a paired
//! dataset: instance counts per category, point counts per box, objects per
//! frame and track speeds, each summarised by an ECDF and compared with a
//! two-sample Kolmogorov-Smirnov statistic.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::geo::PlanarPoint;

/// Average speed below which a track counts as stationary, m/s.
pub const STATIONARY_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub sequence_id: String,
    pub frame_index: u64,
    pub object_id: String,
    pub category: String,
    pub center: PlanarPoint,
    pub z: f64,
    pub point_count: u64,
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    values: Vec<f64>,
}

impl Ecdf {
    pub fn new(samples: impl IntoIterator<Item = f64>) -> Self {
        let mut values: Vec<f64> = samples.into_iter().filter(|v| !v.is_nan()).collect();
        values.sort_by(f64::total_cmp);
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sorted samples.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Fraction of samples <= x.
    pub fn eval(&self, x: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let at_or_below = self.values.partition_point(|&v| v <= x);
        at_or_below as f64 / self.values.len() as f64
    }

    /// Step points `(value, fraction)`, one per distinct value.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.values.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in self.values.iter().enumerate() {
            let f = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 = f,
                _ => out.push((v, f)),
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "value,fraction")?;
        for (v, f) in self.steps() {
            writeln!(out, "{v},{f}")?;
        }
        Ok(())
    }
}

/// Two-sample Kolmogorov-Smirnov statistic: the largest vertical gap
/// between the ECDFs. `None` if either sample is empty.
pub fn ks_statistic(a: &Ecdf, b: &Ecdf) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let (xs, ys) = (a.values(), b.values());
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut stat: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        stat = stat.max((i as f64 / na - j as f64 / nb).abs());
    }
    Some(stat)
}

/// Mean of per-step planar speed over a time-ordered track. `None` for
/// tracks with fewer than two records or repeated timestamps.
pub fn track_speed(track: &[AnnotationRecord]) -> Option<f64> {
    mean_speed(track.iter())
}

fn mean_speed<'a>(track: impl Iterator<Item = &'a AnnotationRecord>) -> Option<f64> {
    let mut prev: Option<&AnnotationRecord> = None;
    let mut sum = 0.0;
    let mut steps = 0usize;
    for r in track {
        if let Some(p) = prev {
            let dt = r.timestamp - p.timestamp;
            if !(dt > 0.0) {
                return None;
            }
            sum += p.center.distance(&r.center) / dt;
            steps += 1;
        }
        prev = Some(r);
    }
    (steps > 0).then(|| sum / steps as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    Stationary,
    Dynamic,
}

pub fn classify_motion(speed: f64, threshold: f64) -> Motion {
    if speed < threshold {
        Motion::Stationary
    } else {
        Motion::Dynamic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainStats {
    pub annotations: usize,
    /// Unique (sequence, object) instances per category.
    pub instances_per_category: BTreeMap<String, usize>,
    pub point_counts: Ecdf,
    pub objects_per_frame: Ecdf,
    pub track_speeds: Ecdf,
    pub undefined_speed_tracks: usize,
    pub stationary: usize,
    pub dynamic: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsSummary {
    pub point_counts: Option<f64>,
    pub objects_per_frame: Option<f64>,
    pub track_speeds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    /// Category the speed and motion statistics are restricted to, if any.
    pub speed_category: Option<String>,
    pub stationary_threshold: f64,
    pub snowy: DomainStats,
    pub clear: DomainStats,
    pub ks: KsSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub stationary_threshold: f64,
    pub speed_category: Option<String>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            stationary_threshold: STATIONARY_THRESHOLD,
            speed_category: None,
        }
    }
}

pub fn domain_stats(records: &[AnnotationRecord], options: &ReportOptions) -> DomainStats {
    let mut instances: BTreeMap<String, BTreeSet<(&str, &str)>> = BTreeMap::new();
    let mut per_frame: BTreeMap<(&str, u64), usize> = BTreeMap::new();
    let mut tracks: BTreeMap<(&str, &str), Vec<&AnnotationRecord>> = BTreeMap::new();
    for r in records {
        instances
            .entry(r.category.clone())
            .or_default()
            .insert((&r.sequence_id, &r.object_id));
        *per_frame.entry((&r.sequence_id, r.frame_index)).or_default() += 1;
        if options
            .speed_category
            .as_ref()
            .is_none_or(|c| *c == r.category)
        {
            tracks.entry((&r.sequence_id, &r.object_id)).or_default().push(r);
        }
    }

    let mut speeds = Vec::new();
    let mut undefined = 0;
    for track in tracks.values_mut() {
        track.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        match mean_speed(track.iter().copied()) {
            Some(v) => speeds.push(v),
            None => undefined += 1,
        }
    }
    let stationary = speeds
        .iter()
        .filter(|&&v| classify_motion(v, options.stationary_threshold) == Motion::Stationary)
        .count();

    DomainStats {
        annotations: records.len(),
        instances_per_category: instances.into_iter().map(|(k, v)| (k, v.len())).collect(),
        point_counts: Ecdf::new(records.iter().map(|r| r.point_count as f64)),
        objects_per_frame: Ecdf::new(per_frame.values().map(|&n| n as f64)),
        dynamic: speeds.len() - stationary,
        stationary,
        track_speeds: Ecdf::new(speeds),
        undefined_speed_tracks: undefined,
    }
}

pub fn distribution_report(
    snowy: &[AnnotationRecord],
    clear: &[AnnotationRecord],
    options: &ReportOptions,
) -> DistributionReport {
    let s = domain_stats(snowy, options);
    let c = domain_stats(clear, options);
    let ks = KsSummary {
        point_counts: ks_statistic(&s.point_counts, &c.point_counts),
        objects_per_frame: ks_statistic(&s.objects_per_frame, &c.objects_per_frame),
        track_speeds: ks_statistic(&s.track_speeds, &c.track_speeds),
    };
    DistributionReport {
        speed_category: options.speed_category.clone(),
        stationary_threshold: options.stationary_threshold,
        snowy: s,
        clear: c,
        ks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(obj: &str, frame: u64, x: f64, t: f64, points: u64) -> AnnotationRecord {
        AnnotationRecord {
            sequence_id: "seq".into(),
            frame_index: frame,
            object_id: obj.into(),
            category: "Car".into(),
            center: PlanarPoint::new(x, 0.0),
            z: 0.0,
            point_count: points,
            timestamp: t,
        }
    }

    fn brute_ks(a: &Ecdf, b: &Ecdf) -> f64 {
        a.values()
            .iter()
            .chain(b.values())
            .map(|&x| (a.eval(x) - b.eval(x)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn speeds() {
        let still = [rec("a", 0, 1.0, 0.0, 1), rec("a", 1, 1.0, 0.3, 1)];
        assert_eq!(track_speed(&still), Some(0.0));
        let steady: Vec<_> = (0..5).map(|i| rec("a", i, i as f64, i as f64 * 0.3, 1)).collect();
        assert!((track_speed(&steady).unwrap() - 10.0 / 3.0).abs() < 1e-12);
        let mixed = [rec("a", 0, 0.0, 0.0, 1), rec("a", 1, 1.0, 0.3, 1), rec("a", 2, 3.0, 0.6, 1)];
        assert!((track_speed(&mixed).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(track_speed(&still[..1]), None);
        let same_time = [rec("a", 0, 0.0, 0.0, 1), rec("a", 1, 1.0, 0.0, 1)];
        assert_eq!(track_speed(&same_time), None);
    }

    #[test]
    fn motion_threshold() {
        assert_eq!(classify_motion(0.0, STATIONARY_THRESHOLD), Motion::Stationary);
        assert_eq!(classify_motion(0.2, STATIONARY_THRESHOLD), Motion::Dynamic);
        assert_eq!(classify_motion(0.199_999, STATIONARY_THRESHOLD), Motion::Stationary);
        assert_eq!(classify_motion(5.0, STATIONARY_THRESHOLD), Motion::Dynamic);
    }

    #[test]
    fn ecdf_shape() {
        let e = Ecdf::new([3.0, 1.0, 2.0, 2.0]);
        assert_eq!(e.values(), &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(2.0), 0.75);
        assert_eq!(e.eval(3.0), 1.0);
        assert_eq!(e.steps(), vec![(1.0, 0.25), (2.0, 0.75), (3.0, 1.0)]);
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "value,fraction\n1,0.25\n2,0.75\n3,1\n");
    }

    #[test]
    fn ks_identical_and_shifted() {
        let a = Ecdf::new([1.0, 5.0, 7.0, 7.0, 20.0]);
        assert_eq!(ks_statistic(&a, &a), Some(0.0));
        let b = Ecdf::new(a.values().iter().map(|v| v + 10.0));
        assert_eq!(ks_statistic(&a, &b), Some(brute_ks(&a, &b)));
        assert_eq!(ks_statistic(&a, &Ecdf::new([])), None);
    }

    #[test]
    fn ks_with_ties_across_samples() {
        let a = Ecdf::new([1.0, 2.0, 2.0, 3.0]);
        let b = Ecdf::new([2.0, 2.0, 2.0, 4.0, 5.0]);
        assert_eq!(ks_statistic(&a, &b).unwrap(), brute_ks(&a, &b));
    }

    #[test]
    fn objects_per_frame_and_instances() {
        let recs = vec![rec("a", 0, 0.0, 0.0, 10), rec("b", 0, 5.0, 0.0, 3), rec("a", 1, 1.0, 0.1, 12)];
        let s = domain_stats(&recs, &ReportOptions::default());
        assert_eq!(s.objects_per_frame.values(), &[1.0, 2.0]);
        assert_eq!(s.instances_per_category["Car"], 2);
        assert_eq!(s.undefined_speed_tracks, 1);
        assert_eq!(s.track_speeds.values(), &[10.0]);
        assert_eq!((s.stationary, s.dynamic), (0, 1));
    }

    #[test]
    fn identical_domains_have_zero_gap() {
        let recs: Vec<_> = (0..20).map(|i| rec(&format!("o{}", i % 4), i / 4, i as f64, i as f64 * 0.1, i * 3)).collect();
        let r = distribution_report(&recs, &recs, &ReportOptions::default());
        assert_eq!(r.ks.point_counts, Some(0.0));
        assert_eq!(r.ks.objects_per_frame, Some(0.0));
        assert_eq!(r.ks.track_speeds, Some(0.0));
    }

    #[test]
    fn category_filter_limits_speeds() {
        let mut recs = vec![rec("a", 0, 0.0, 0.0, 1), rec("a", 1, 1.0, 0.5, 1)];
        let mut ped = rec("p", 0, 0.0, 0.0, 1);
        ped.category = "Pedestrian".into();
        let mut ped2 = ped.clone();
        ped2.frame_index = 1;
        ped2.timestamp = 0.5;
        recs.extend([ped, ped2]);
        let opts = ReportOptions {
            speed_category: Some("Car".into()),
            ..ReportOptions::default()
        };
        let s = domain_stats(&recs, &opts);
        assert_eq!(s.track_speeds.len(), 1);
        assert_eq!(s.instances_per_category.len(), 2);
    }
}
