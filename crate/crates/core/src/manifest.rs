//! File formats.
//!
//! Inputs:
//! - a trajectory directory holding `index.csv` (`sequence_id,domain`), one
//!   `<sequence_id>.csv` per sequence (`frame_index,timestamp,latitude,longitude`),
//!   and optionally `road_users.csv` (`sequence_id,road_users`);
//! - annotation files (`sequence_id,frame_index,object_id,category,x,y,z,point_count,timestamp`);
//! - a TOML run config.
//!
//! Outputs are versioned: JSON documents carry `schema_version` and `kind`,
//! the coverage CSV carries a leading `# weatherpair coverage-table v1` line.
//! Every writer is deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::coverage::LateralThresholds;
use crate::endpoint::{PairedSubsequence, SamplingConfig};
use crate::error::{Error, Result};
use crate::geo::{valid_lat_lon, GeoFrame, LocalOrigin, PlanarPoint};
use crate::matcher::{MatchOutcome, MatchStatus};
use crate::spatial::TemporalTrajectory;
use crate::splits::{Domain, SplitFraction, SplitManifest, DEFAULT_STRIDE};
use crate::stats::{AnnotationRecord, STATIONARY_THRESHOLD};

pub const SCHEMA_VERSION: u32 = 1;
pub const INDEX_FILE: &str = "index.csv";
pub const ROAD_USERS_FILE: &str = "road_users.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Lateral thresholds, meters.
    pub thresholds: LateralThresholds,
    /// Spatial model spacing, meters.
    pub delta_d: f64,
    /// Sparse labelling stride, frames.
    pub stride: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub intervals: Vec<usize>,
    pub base_rate_hz: f64,
    /// Training fractions offered for split generation.
    pub fractions: Vec<SplitFraction>,
    /// Snowy sequences whose pairs form the validation split.
    pub validation: Vec<String>,
    pub stationary_threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sampling = SamplingConfig::default();
        Self {
            thresholds: LateralThresholds::default(),
            delta_d: 1.0,
            stride: DEFAULT_STRIDE,
            min_frames: sampling.min_frames,
            max_frames: sampling.max_frames,
            intervals: sampling.intervals,
            base_rate_hz: sampling.base_rate_hz,
            fractions: SplitFraction::ALL.to_vec(),
            validation: Vec::new(),
            stationary_threshold: STATIONARY_THRESHOLD,
        }
    }
}

impl RunConfig {
    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            base_rate_hz: self.base_rate_hz,
            min_frames: self.min_frames,
            max_frames: self.max_frames,
            intervals: self.intervals.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_d > 0.0) || !self.delta_d.is_finite() {
            return Err(Error::Config(format!("delta_d must be positive, got {}", self.delta_d)));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if self.fractions.is_empty() {
            return Err(Error::Config("at least one split fraction required".into()));
        }
        if !(self.stationary_threshold >= 0.0) {
            return Err(Error::Config("stationary_threshold must be non-negative".into()));
        }
        self.sampling().validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// A sequence as read from disk, before projection.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSequence {
    pub sequence_id: String,
    pub domain: Domain,
    pub frames: Vec<GeoFrame>,
    pub road_users: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectorySet {
    /// Sorted by sequence id.
    pub sequences: Vec<RawSequence>,
}

impl TrajectorySet {
    pub fn domain(&self, domain: Domain) -> impl Iterator<Item = &RawSequence> {
        self.sequences.iter().filter(move |s| s.domain == domain)
    }

    /// First frame of the first snowy sequence, or of the first sequence if
    /// there are no snowy ones.
    pub fn default_origin(&self) -> Option<LocalOrigin> {
        self.domain(Domain::Snowy)
            .next()
            .or(self.sequences.first())
            .and_then(|s| s.frames.first())
            .and_then(|f| LocalOrigin::from_frame(f).ok())
    }

    pub fn project(&self, origin: &LocalOrigin) -> Result<Vec<(Domain, TemporalTrajectory)>> {
        self.sequences
            .iter()
            .map(|s| {
                Ok((
                    s.domain,
                    TemporalTrajectory::from_geo(&s.sequence_id, &s.frames, origin)?,
                ))
            })
            .collect()
    }
}

fn csv_line(pos: Option<&csv::Position>) -> u64 {
    pos.map(|p| p.line()).unwrap_or(0)
}

fn malformed(path: &Path, err: csv::Error) -> Error {
    let line = match err.kind() {
        csv::ErrorKind::Deserialize { pos, .. } => csv_line(pos.as_ref()),
        csv::ErrorKind::UnequalLengths { pos, .. } => csv_line(pos.as_ref()),
        csv::ErrorKind::Utf8 { pos, .. } => csv_line(pos.as_ref()),
        _ => 0,
    };
    if let csv::ErrorKind::Io(_) = err.kind() {
        return Error::Parse {
            path: path.to_path_buf(),
            message: err.to_string(),
        };
    }
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        message: err.to_string(),
    }
}

/// Reads every record of a headed CSV file with its line number.
fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<(u64, T)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers().map_err(|e| malformed(path, e))?.clone();
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = csv_line(record.position());
                let value = record.deserialize(Some(&headers)).map_err(|e| Error::Malformed {
                    path: path.to_path_buf(),
                    line,
                    message: e.to_string(),
                })?;
                out.push((line, value));
            }
            Err(e) => return Err(malformed(path, e)),
        }
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct IndexRow {
    sequence_id: String,
    domain: String,
}

#[derive(Debug, Deserialize)]
struct FrameRow {
    frame_index: u64,
    timestamp: f64,
    latitude: f64,
    longitude: f64,
}

#[derive(Debug, Deserialize)]
struct RoadUsersRow {
    sequence_id: String,
    road_users: u32,
}

fn check_sequence_id(path: &Path, line: u64, id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !id.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(Error::Malformed {
            path: path.to_path_buf(),
            line,
            message: format!("sequence id {id:?} must be non-empty [A-Za-z0-9_.-]"),
        })
    }
}

/// Loads one sequence file, validating positions and timestamp order.
pub fn load_sequence_file(path: &Path) -> Result<Vec<GeoFrame>> {
    let rows: Vec<(u64, FrameRow)> = read_records(path)?;
    let mut frames: Vec<GeoFrame> = Vec::with_capacity(rows.len());
    for (position, (line, row)) in rows.into_iter().enumerate() {
        if !row.timestamp.is_finite() || !valid_lat_lon(row.latitude, row.longitude) {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line,
                message: format!(
                    "invalid fix: timestamp {} latitude {} longitude {}",
                    row.timestamp, row.latitude, row.longitude
                ),
            });
        }
        if let Some(prev) = frames.last() {
            if row.timestamp <= prev.timestamp {
                return Err(Error::NonMonotoneTimestamps {
                    path: path.to_path_buf(),
                    line,
                    position,
                });
            }
        }
        frames.push(GeoFrame::new(row.frame_index, row.timestamp, row.latitude, row.longitude));
    }
    Ok(frames)
}

/// Loads a trajectory directory. A directory without an index and without
/// CSV files yields an empty set and a warning.
pub fn load_trajectories(dir: &Path) -> Result<TrajectorySet> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let index_path = dir.join(INDEX_FILE);
    if !index_path.exists() {
        let has_csv = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok())
            .any(|e| e.path().extension().is_some_and(|x| x == "csv"));
        if has_csv {
            return Err(Error::Parse {
                path: index_path,
                message: "sequence files present but no index".into(),
            });
        }
        log::warn!("{}: no trajectories found", dir.display());
        return Ok(TrajectorySet::default());
    }

    let mut seen = BTreeSet::new();
    let mut index = Vec::new();
    for (line, row) in read_records::<IndexRow>(&index_path)? {
        check_sequence_id(&index_path, line, &row.sequence_id)?;
        let domain = row.domain.parse::<Domain>().map_err(|e| Error::Malformed {
            path: index_path.clone(),
            line,
            message: e.to_string(),
        })?;
        if !seen.insert(row.sequence_id.clone()) {
            return Err(Error::DuplicateSequence(row.sequence_id));
        }
        index.push((row.sequence_id, domain));
    }

    let mut road_users = BTreeMap::new();
    let ru_path = dir.join(ROAD_USERS_FILE);
    if ru_path.exists() {
        for (line, row) in read_records::<RoadUsersRow>(&ru_path)? {
            if !seen.contains(&row.sequence_id) {
                return Err(Error::Malformed {
                    path: ru_path.clone(),
                    line,
                    message: format!("unknown sequence {}", row.sequence_id),
                });
            }
            road_users.insert(row.sequence_id, row.road_users);
        }
    }

    let mut sequences = index
        .into_iter()
        .map(|(id, domain)| {
            let frames = load_sequence_file(&dir.join(format!("{id}.csv")))?;
            Ok(RawSequence {
                road_users: road_users.get(&id).copied(),
                sequence_id: id,
                domain,
                frames,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    sequences.sort_by(|a, b| a.sequence_id.cmp(&b.sequence_id));
    Ok(TrajectorySet { sequences })
}

/// Writes a trajectory directory in the format read by [`load_trajectories`].
pub fn write_trajectories(dir: &Path, set: &TrajectorySet) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut index = String::from("sequence_id,domain\n");
    let mut road_users = String::from("sequence_id,road_users\n");
    let mut any_road_users = false;
    for s in &set.sequences {
        index.push_str(&format!("{},{}\n", s.sequence_id, s.domain));
        if let Some(n) = s.road_users {
            any_road_users = true;
            road_users.push_str(&format!("{},{n}\n", s.sequence_id));
        }
        let mut body = String::from("frame_index,timestamp,latitude,longitude\n");
        for f in &s.frames {
            body.push_str(&format!(
                "{},{},{},{}\n",
                f.frame_index, f.timestamp, f.latitude, f.longitude
            ));
        }
        write_atomic(&dir.join(format!("{}.csv", s.sequence_id)), body.as_bytes())?;
    }
    write_atomic(&dir.join(INDEX_FILE), index.as_bytes())?;
    if any_road_users {
        write_atomic(&dir.join(ROAD_USERS_FILE), road_users.as_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct AnnotationRow {
    sequence_id: String,
    frame_index: u64,
    object_id: String,
    category: String,
    x: f64,
    y: f64,
    z: f64,
    point_count: u64,
    timestamp: f64,
}

/// Loads an annotation file. `(sequence_id, frame_index, object_id)` must be unique.
pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let mut seen = BTreeSet::new();
    read_records::<AnnotationRow>(path)?
        .into_iter()
        .map(|(line, r)| {
            if !seen.insert((r.sequence_id.clone(), r.frame_index, r.object_id.clone())) {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    line,
                    message: format!(
                        "duplicate annotation ({}, {}, {})",
                        r.sequence_id, r.frame_index, r.object_id
                    ),
                });
            }
            Ok(AnnotationRecord {
                sequence_id: r.sequence_id,
                frame_index: r.frame_index,
                object_id: r.object_id,
                category: r.category,
                center: PlanarPoint::new(r.x, r.y),
                z: r.z,
                point_count: r.point_count,
                timestamp: r.timestamp,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceInfo {
    pub sequence_id: String,
    pub domain: Domain,
    pub frame_count: usize,
    /// Path shorter than one spatial step; modelled by its first frame.
    pub stationary: bool,
    pub road_users: Option<u32>,
}

/// Everything a run produces and the review step mutates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunState {
    pub schema_version: u32,
    pub config: RunConfig,
    /// Trajectory directory the run was computed from.
    pub data_dir: String,
    pub origin: LocalOrigin,
    pub sequences: Vec<SequenceInfo>,
    /// File name of the coverage table export, next to the state file.
    pub coverage_table: String,
    pub outcomes: Vec<MatchOutcome>,
    pub pairs: Vec<PairedSubsequence>,
    pub splits: Vec<SplitManifest>,
}

impl RunState {
    pub fn outcome(&self, snowy_id: &str) -> Option<&MatchOutcome> {
        self.outcomes.iter().find(|o| o.snowy_id == snowy_id)
    }

    pub fn sequence(&self, id: &str) -> Option<&SequenceInfo> {
        self.sequences.iter().find(|s| s.sequence_id == id)
    }

    pub fn is_clear(&self, id: &str) -> bool {
        self.sequence(id).is_some_and(|s| s.domain == Domain::Clear)
    }

    pub fn pending(&self) -> impl Iterator<Item = &MatchOutcome> {
        self.outcomes.iter().filter(|o| !o.is_resolved())
    }

    pub fn count_status(&self, status: MatchStatus) -> usize {
        self.outcomes.iter().filter(|o| o.status == status).count()
    }

    /// Checks cross-references: decided outcomes name known clear sequences
    /// and pairs belong to resolved outcomes.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        for o in &self.outcomes {
            if self.sequence(&o.snowy_id).map(|s| s.domain) != Some(Domain::Snowy) {
                return Err(Error::UnknownSequence(o.snowy_id.clone()));
            }
            if let Some(d) = &o.decision {
                if !self.is_clear(&d.clear_id) {
                    return Err(Error::UnknownSequence(d.clear_id.clone()));
                }
            }
        }
        for p in &self.pairs {
            if self.outcome(&p.snowy_id).and_then(|o| o.matched_clear()) != Some(&p.clear_id) {
                return Err(Error::InvalidInput(format!(
                    "pair ({}, {}) does not match a resolved outcome",
                    p.snowy_id, p.clear_id
                )));
            }
        }
        Ok(())
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

/// Writes via a temporary file and rename so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_path(path);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

pub fn state_to_bytes(state: &RunState) -> Vec<u8> {
    to_json(state)
}

pub fn save_state(state: &RunState, path: &Path) -> Result<()> {
    write_atomic(path, &state_to_bytes(state))
}

/// Loads a state file. Unknown schema versions fail with
/// [`Error::UpgradeRequired`]; truncated or malformed files with
/// [`Error::Parse`].
pub fn load_state(path: &Path) -> Result<RunState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |e: serde_json::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(parse_err)?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            message: "missing schema_version".into(),
        })?;
    if version != SCHEMA_VERSION as u64 {
        return Err(Error::UpgradeRequired {
            path: path.to_path_buf(),
            found: version.min(u32::MAX as u64) as u32,
            expected: SCHEMA_VERSION,
        });
    }
    let state: RunState = serde_json::from_value(value).map_err(parse_err)?;
    state.validate()?;
    Ok(state)
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize)]
struct MatchReportBody<'a> {
    thresholds: &'a LateralThresholds,
    outcomes: &'a [MatchOutcome],
}

/// Match report: one record per snowy sequence.
pub fn match_report_bytes(thresholds: &LateralThresholds, outcomes: &[MatchOutcome]) -> Vec<u8> {
    to_json(&Document {
        schema_version: SCHEMA_VERSION,
        kind: "match-report",
        body: MatchReportBody {
            thresholds,
            outcomes,
        },
    })
}

#[derive(Serialize)]
struct PairBody<'a> {
    pairs: &'a [PairedSubsequence],
}

pub fn pair_manifest_bytes(pairs: &[PairedSubsequence]) -> Vec<u8> {
    to_json(&Document {
        schema_version: SCHEMA_VERSION,
        kind: "pair-manifest",
        body: PairBody { pairs },
    })
}

#[derive(Serialize)]
struct SplitBody<'a> {
    summary: &'a crate::splits::SplitSummary,
    labels: Vec<crate::splits::LabelEntry>,
}

/// Split manifest: every label as (domain, sequence_id, pair_id,
/// frame_index, role) plus the summary counts.
pub fn split_manifest_bytes(manifest: &SplitManifest) -> Vec<u8> {
    to_json(&Document {
        schema_version: SCHEMA_VERSION,
        kind: "split-manifest",
        body: SplitBody {
            summary: &manifest.summary,
            labels: manifest.entries().collect(),
        },
    })
}

pub fn coverage_bytes(table: &crate::coverage::CoverageTable) -> Vec<u8> {
    let mut out = Vec::new();
    table.write_csv(&mut out).expect("writing to memory");
    out
}

/// File name of the split manifest for a snowy fraction, e.g. `splits_0.25.json`.
pub fn split_file_name(fraction_snowy: f64) -> String {
    format!("splits_{fraction_snowy:.2}.json")
}
