//! End-to-end run: load, project, interpolate, cover, match, pair, split.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::coverage::{coverage_table, CoverageTable};
use crate::endpoint::{build_pair, PairedSubsequence};
use crate::error::{Error, Result};
use crate::geo::LocalOrigin;
use crate::manifest::{
    coverage_bytes, load_trajectories, match_report_bytes, pair_manifest_bytes, save_state,
    write_atomic, RunConfig, RunState, SequenceInfo, SCHEMA_VERSION,
};
use crate::matcher::{apply_decision, tiered_select, DecidedBy, MatchOutcome};
use crate::spatial::{interpolate_or_stationary, SpatialModel, TemporalTrajectory};
use crate::splits::{mix_splits, Domain, LabelPlan, SplitFraction, SplitManifest};

pub const STATE_FILE: &str = "state.json";
pub const COVERAGE_FILE: &str = "coverage.csv";
pub const MATCHES_FILE: &str = "matches.json";
pub const PAIRS_FILE: &str = "pairs.json";

/// Projected trajectories of a data directory.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub origin: LocalOrigin,
    pub sequences: Vec<SequenceInfo>,
    trajectories: BTreeMap<String, TemporalTrajectory>,
}

impl Corpus {
    /// Loads and projects `data_dir`. Without an explicit origin the first
    /// frame of the first snowy sequence is used.
    pub fn load(data_dir: &Path, origin: Option<LocalOrigin>, delta_d: f64) -> Result<Self> {
        let set = load_trajectories(data_dir)?;
        let origin = match origin.or_else(|| set.default_origin()) {
            Some(o) => o,
            None => LocalOrigin::new(0.0, 0.0)?,
        };
        let mut sequences = Vec::with_capacity(set.sequences.len());
        let mut trajectories = BTreeMap::new();
        for (raw, (domain, traj)) in set.sequences.iter().zip(set.project(&origin)?) {
            sequences.push(SequenceInfo {
                sequence_id: raw.sequence_id.clone(),
                domain,
                frame_count: traj.len(),
                stationary: traj.arc_length() < delta_d,
                road_users: raw.road_users,
            });
            trajectories.insert(raw.sequence_id.clone(), traj);
        }
        Ok(Self {
            origin,
            sequences,
            trajectories,
        })
    }

    pub fn trajectory(&self, id: &str) -> Option<&TemporalTrajectory> {
        self.trajectories.get(id)
    }

    pub fn domain(&self, domain: Domain) -> impl Iterator<Item = &TemporalTrajectory> {
        self.sequences
            .iter()
            .filter(move |s| s.domain == domain)
            .map(|s| &self.trajectories[&s.sequence_id])
    }

    fn require(&self, id: &str) -> Result<&TemporalTrajectory> {
        self.trajectory(id)
            .ok_or_else(|| Error::UnknownSequence(id.to_string()))
    }
}

/// Result of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub state: RunState,
    pub table: CoverageTable,
}

impl PipelineRun {
    pub fn pending(&self) -> usize {
        self.state.pending().count()
    }
}

fn models(
    trajectories: impl ParallelIterator<Item = TemporalTrajectory>,
    delta_d: f64,
) -> Result<Vec<SpatialModel>> {
    trajectories
        .map(|t| interpolate_or_stationary(&t, delta_d).map(|(m, _)| m))
        .collect()
}

/// Runs matching over `data_dir`. Human decisions from `previous` are
/// re-applied where they remain admissible.
pub fn run_pipeline(
    config: &RunConfig,
    data_dir: &Path,
    previous: Option<&RunState>,
) -> Result<PipelineRun> {
    config.validate()?;
    let corpus = Corpus::load(data_dir, None, config.delta_d)?;
    let snowy: Vec<TemporalTrajectory> = corpus.domain(Domain::Snowy).cloned().collect();
    let clear: Vec<TemporalTrajectory> = corpus.domain(Domain::Clear).cloned().collect();
    log::info!(
        "{} snowy and {} clear sequences from {}",
        snowy.len(),
        clear.len(),
        data_dir.display()
    );

    let snowy_models = models(snowy.into_par_iter(), config.delta_d)?;
    let clear_models = models(clear.into_par_iter(), config.delta_d)?;
    let table = if snowy_models.is_empty() || clear_models.is_empty() {
        CoverageTable::from_entries(
            config.thresholds.clone(),
            snowy_models.iter().map(|m| m.sequence_id().to_string()).collect(),
            clear_models.iter().map(|m| m.sequence_id().to_string()).collect(),
            [],
        )?
    } else {
        coverage_table(&snowy_models, &clear_models, &config.thresholds)?
    };

    let is_clear = |id: &str| table.contains_clear(id);
    let outcomes = table
        .snowy_ids()
        .par_iter()
        .map(|s| {
            let fresh = tiered_select(&table, s, &config.thresholds)?;
            let Some(prior) = previous
                .and_then(|p| p.outcome(s))
                .and_then(|o| o.decision.as_ref())
                .filter(|d| d.decided_by == DecidedBy::Human)
            else {
                return Ok(fresh);
            };
            if fresh.is_resolved() {
                return Ok(fresh);
            }
            match apply_decision(
                &fresh,
                &prior.clear_id,
                &prior.note,
                is_clear,
                prior.decided_at.clone(),
            ) {
                Ok(o) => Ok(o),
                Err(e) => {
                    log::warn!("dropping earlier decision for {s}: {e}");
                    Ok(fresh)
                }
            }
        })
        .collect::<Result<Vec<MatchOutcome>>>()?;

    let mut state = RunState {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        data_dir: data_dir.to_string_lossy().into_owned(),
        origin: corpus.origin,
        sequences: corpus.sequences.clone(),
        coverage_table: COVERAGE_FILE.to_string(),
        outcomes,
        pairs: Vec::new(),
        splits: Vec::new(),
    };
    ensure_pairs_with(&mut state, &corpus)?;
    Ok(PipelineRun { state, table })
}

/// Builds the pair for one resolved outcome.
pub fn pair_for(corpus: &Corpus, config: &RunConfig, outcome: &MatchOutcome) -> Result<PairedSubsequence> {
    let clear_id = outcome
        .matched_clear()
        .ok_or_else(|| Error::InvalidInput(format!("{} is not resolved", outcome.snowy_id)))?;
    let s = corpus.require(&outcome.snowy_id)?;
    let c = corpus.require(clear_id)?;
    build_pair(s, c, outcome, &config.sampling(), config.delta_d).map_err(|e| Error::Pair {
        snowy_id: outcome.snowy_id.clone(),
        clear_id: clear_id.to_string(),
        source: Box::new(e),
    })
}

/// Adds pairs for resolved outcomes that have none, keeping pairs sorted by
/// snowy id.
pub fn ensure_pairs_with(state: &mut RunState, corpus: &Corpus) -> Result<()> {
    let have: BTreeMap<&str, &str> = state
        .pairs
        .iter()
        .map(|p| (p.snowy_id.as_str(), p.clear_id.as_str()))
        .collect();
    let missing: Vec<&MatchOutcome> = state
        .outcomes
        .iter()
        .filter(|o| o.matched_clear().is_some_and(|c| have.get(o.snowy_id.as_str()) != Some(&c)))
        .collect();
    if missing.is_empty() {
        return Ok(());
    }
    let built = missing
        .par_iter()
        .map(|o| pair_for(corpus, &state.config, o))
        .collect::<Result<Vec<_>>>()?;
    let rebuilt: Vec<String> = built.iter().map(|p| p.snowy_id.clone()).collect();
    state.pairs.retain(|p| !rebuilt.contains(&p.snowy_id));
    state.pairs.extend(built);
    state.pairs.sort_by(|a, b| a.snowy_id.cmp(&b.snowy_id));
    Ok(())
}

/// Like [`ensure_pairs_with`], loading the corpus from the state's data
/// directory only when pairs are missing.
pub fn ensure_pairs(state: &mut RunState) -> Result<()> {
    let missing = state
        .outcomes
        .iter()
        .filter(|o| o.is_resolved())
        .any(|o| !state.pairs.iter().any(|p| p.snowy_id == o.snowy_id));
    if !missing {
        return Ok(());
    }
    let corpus = Corpus::load(
        Path::new(&state.data_dir),
        Some(state.origin),
        state.config.delta_d,
    )?;
    ensure_pairs_with(state, &corpus)
}

/// Writes state, coverage table, match report and pair manifest into
/// `out_dir`. Nothing is written until every document has been rendered.
pub fn write_outputs(run: &PipelineRun, out_dir: &Path) -> Result<()> {
    let docs = [
        (COVERAGE_FILE, coverage_bytes(&run.table)),
        (
            MATCHES_FILE,
            match_report_bytes(&run.state.config.thresholds, &run.state.outcomes),
        ),
        (PAIRS_FILE, pair_manifest_bytes(&run.state.pairs)),
    ];
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for (name, bytes) in &docs {
        write_atomic(&out_dir.join(name), bytes)?;
    }
    save_state(&run.state, &out_dir.join(STATE_FILE))
}

/// Builds the mixed split at `fraction_snowy` (clear gets the complement).
///
/// Each pair contributes a snowy plan over the snowy sequence and a clear
/// plan over the sampled clear frames, whose labels are frame positions in
/// the clear sequence. Pairs whose snowy id is listed in the config's
/// validation set are fully labelled validation plans.
pub fn generate_splits(state: &RunState, fraction_snowy: f64) -> Result<SplitManifest> {
    let pending = state.pending().count();
    if pending > 0 {
        return Err(Error::PendingReviews(pending));
    }
    let fraction_clear = 1.0 - fraction_snowy;
    for f in [fraction_snowy, fraction_clear] {
        if f == 0.0 {
            continue;
        }
        let f = SplitFraction::from_value(f)?;
        if f != SplitFraction::Full && !state.config.fractions.contains(&f) {
            return Err(Error::UnsupportedFraction(f.value()));
        }
    }
    let stride = state.config.stride;
    let mut snowy = Vec::new();
    let mut clear = Vec::new();
    for pair in &state.pairs {
        let info = state
            .sequence(&pair.snowy_id)
            .ok_or_else(|| Error::UnknownSequence(pair.snowy_id.clone()))?;
        let pair_id = pair.snowy_id.as_str();
        let clear_len = pair.clear_frame_indices.len();
        let is_validation = state.config.validation.iter().any(|v| v == pair_id);
        let (snowy_plan, mut clear_plan) = if is_validation {
            (
                LabelPlan::validation(Domain::Snowy, &pair.snowy_id, pair_id, info.frame_count),
                LabelPlan::validation(Domain::Clear, &pair.clear_id, pair_id, clear_len),
            )
        } else {
            (
                LabelPlan::train(Domain::Snowy, &pair.snowy_id, pair_id, info.frame_count, stride),
                LabelPlan::train(Domain::Clear, &pair.clear_id, pair_id, clear_len, stride),
            )
        };
        clear_plan.labelled_indices = clear_plan
            .labelled_indices
            .iter()
            .map(|&p| pair.clear_frame_indices[p])
            .collect();
        snowy.push(snowy_plan);
        clear.push(clear_plan);
    }
    mix_splits(&snowy, fraction_snowy, &clear, fraction_clear)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{GeoFrame, PlanarPoint};
    use crate::manifest::{write_trajectories, RawSequence, TrajectorySet};
    use crate::matcher::MatchStatus;

    fn raw(origin: &LocalOrigin, id: &str, domain: Domain, pts: &[(f64, f64)]) -> RawSequence {
        RawSequence {
            sequence_id: id.into(),
            domain,
            road_users: None,
            frames: pts
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| {
                    let (lat, lon) = origin.unproject(PlanarPoint::new(x, y));
                    GeoFrame::new(i as u64, i as f64 * 0.1, lat, lon)
                })
                .collect(),
        }
    }

    fn line(n: usize, dy: f64) -> Vec<(f64, f64)> {
        (0..n).map(|i| (i as f64, dy)).collect()
    }

    fn fixture(dir: &Path, extra_clear: bool) {
        let o = LocalOrigin::new(43.47, -80.54).unwrap();
        let mut sequences = vec![
            raw(&o, "s1", Domain::Snowy, &line(300, 0.0)),
            raw(&o, "c1", Domain::Clear, &line(300, 0.5)),
        ];
        if extra_clear {
            sequences.push(raw(&o, "c2", Domain::Clear, &line(300, -0.5)));
        }
        write_trajectories(dir, &TrajectorySet { sequences }).unwrap();
    }

    #[test]
    fn single_pair_auto_matches() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), false);
        let run = run_pipeline(&RunConfig::default(), dir.path(), None).unwrap();
        assert_eq!(run.pending(), 0);
        let o = run.state.outcome("s1").unwrap();
        assert_eq!((o.tier, o.status), (Some(1), MatchStatus::AutoMatched));
        assert_eq!(run.state.pairs.len(), 1);
        let p = &run.state.pairs[0];
        assert_eq!(p.sampling_interval, 3);
        assert_eq!(p.clear_frame_indices.len(), 100);
        // Last sampled frame is 297; snowy frame 299 is 2 m past it.
        assert!((p.d_max - 4.25f64.sqrt()).abs() < 1e-3, "{}", p.d_max);
        let m = generate_splits(&run.state, 0.5).unwrap();
        assert_eq!(m.summary.train_snowy, 15);
        assert_eq!(m.summary.train_clear, 5);
    }

    #[test]
    fn tie_goes_to_review_and_decision_survives_rerun() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), true);
        let cfg = RunConfig::default();
        let run = run_pipeline(&cfg, dir.path(), None).unwrap();
        assert_eq!(run.pending(), 1);
        assert!(matches!(generate_splits(&run.state, 1.0), Err(Error::PendingReviews(1))));
        let o = run.state.outcome("s1").unwrap();
        assert_eq!(o.status, MatchStatus::NeedsReview);
        let decided = apply_decision(o, "c2", "left lane", |_| true, None).unwrap();
        let mut state = run.state.clone();
        state.outcomes[0] = decided;
        ensure_pairs(&mut state).unwrap();
        assert_eq!(state.pairs[0].clear_id, "c2");

        let again = run_pipeline(&cfg, dir.path(), Some(&state)).unwrap();
        assert_eq!(again.pending(), 0);
        assert_eq!(again.state.pairs, state.pairs);
    }

    #[test]
    fn outputs_are_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), true);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for out in [a.path(), b.path()] {
            let run = run_pipeline(&RunConfig::default(), dir.path(), None).unwrap();
            write_outputs(&run, out).unwrap();
        }
        for name in [STATE_FILE, COVERAGE_FILE, MATCHES_FILE, PAIRS_FILE] {
            assert_eq!(
                std::fs::read(a.path().join(name)).unwrap(),
                std::fs::read(b.path().join(name)).unwrap(),
                "{name}"
            );
        }
    }

    #[test]
    fn empty_directory_runs() {
        let dir = tempfile::tempdir().unwrap();
        let run = run_pipeline(&RunConfig::default(), dir.path(), None).unwrap();
        assert!(run.state.outcomes.is_empty());
        assert!(run.table.is_empty());
    }

    #[test]
    fn unsupported_split_fraction() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path(), false);
        let run = run_pipeline(&RunConfig::default(), dir.path(), None).unwrap();
        assert!(matches!(generate_splits(&run.state, 0.3), Err(Error::UnsupportedFraction(_))));
        let pure = generate_splits(&run.state, 1.0).unwrap();
        assert_eq!(pure.summary.train_clear, 0);
        assert_eq!(pure.summary.train_snowy, 30);
    }
}
