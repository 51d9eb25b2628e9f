//! Tiered selection of a clear sequence for each snowy sequence.
//!
//! For every threshold the argmax of coverage gives the best clear
//! sequences; their union (restricted to nonzero coverage) is the candidate
//! set. The candidate set is refined, in decreasing order of desirability,
//! into:
//!
//! 1. candidates fully covering at the smallest threshold,
//! 2. candidates reaching 0.95 coverage at some threshold,
//! 3. the candidate set itself when it holds exactly one sequence,
//! 4. candidates that are best at more than one threshold,
//! 5. the whole candidate set.
//!
//! The first nonempty subset is the tier. A singleton is matched
//! automatically; anything larger is left for a human reviewer.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::coverage::{CoverageTable, LateralThresholds};
use crate::error::{Error, Result};

/// Coverage required at the smallest threshold for tier 1.
pub const FULL_COVERAGE: f64 = 1.0;
/// Coverage required at any threshold for tier 2.
pub const NEAR_FULL_COVERAGE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchStatus {
    AutoMatched,
    NeedsReview,
    Unmatched,
    /// Resolved by a reviewer, from either needs_review or unmatched.
    HumanMatched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecidedBy {
    Auto,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub clear_id: String,
    pub decided_by: DecidedBy,
    pub note: String,
    /// RFC 3339; absent for automatic decisions so pipeline output stays
    /// reproducible.
    pub decided_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub clear_id: String,
    /// One fraction per threshold, in threshold order.
    pub coverage: Vec<f64>,
    pub d_max: Option<f64>,
}

impl Candidate {
    pub fn max_coverage(&self) -> f64 {
        self.coverage.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub snowy_id: String,
    pub tier: Option<u8>,
    pub candidates: Vec<Candidate>,
    pub status: MatchStatus,
    pub decision: Option<Decision>,
}

impl MatchOutcome {
    pub fn is_resolved(&self) -> bool {
        self.decision.is_some()
    }

    pub fn matched_clear(&self) -> Option<&str> {
        self.decision.as_ref().map(|d| d.clear_id.as_str())
    }
}

fn fractions_at<'a>(table: &'a CoverageTable, snowy_id: &str, theta: f64) -> Result<Vec<(&'a str, f64)>> {
    if !table.contains_snowy(snowy_id) {
        return Err(Error::UnknownSequence(snowy_id.to_string()));
    }
    table
        .clear_ids()
        .iter()
        .map(|c| Ok((c.as_str(), table.get(snowy_id, c, theta)?)))
        .collect()
}

/// All clear sequences attaining the greatest coverage of `snowy_id` at
/// `theta`, ties included. When every coverage is zero this is every clear
/// sequence.
pub fn best_clear(table: &CoverageTable, snowy_id: &str, theta: f64) -> Result<BTreeSet<String>> {
    let fractions = fractions_at(table, snowy_id, theta)?;
    let best = fractions.iter().map(|f| f.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(fractions
        .into_iter()
        .filter(|f| f.1 == best)
        .map(|f| f.0.to_string())
        .collect())
}

/// Union over thresholds of the best clear sequences with nonzero coverage.
pub fn candidate_set(
    table: &CoverageTable,
    snowy_id: &str,
    thresholds: &LateralThresholds,
) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for &theta in thresholds.values() {
        for c in best_clear(table, snowy_id, theta)? {
            if table.get(snowy_id, &c, theta)? > 0.0 {
                out.insert(c);
            }
        }
    }
    Ok(out)
}

/// Thresholds at which `clear_id` is among the best, with nonzero coverage.
pub fn consistency(
    table: &CoverageTable,
    snowy_id: &str,
    clear_id: &str,
    thresholds: &LateralThresholds,
) -> Result<Vec<f64>> {
    if !table.contains_clear(clear_id) {
        return Err(Error::UnknownSequence(clear_id.to_string()));
    }
    let mut out = Vec::new();
    for &theta in thresholds.values() {
        if table.get(snowy_id, clear_id, theta)? > 0.0
            && best_clear(table, snowy_id, theta)?.contains(clear_id)
        {
            out.push(theta);
        }
    }
    Ok(out)
}

/// Tier subsets 1 to 5 for `snowy_id`, in order.
pub fn tier_subsets(
    table: &CoverageTable,
    snowy_id: &str,
    thresholds: &LateralThresholds,
) -> Result<[BTreeSet<String>; 5]> {
    let candidates = candidate_set(table, snowy_id, thresholds)?;
    let mut perfect = BTreeSet::new();
    let mut good = BTreeSet::new();
    let mut consistent = BTreeSet::new();
    for c in &candidates {
        if table.get(snowy_id, c, thresholds.min())? == FULL_COVERAGE {
            perfect.insert(c.clone());
        }
        let mut reaches = false;
        for &theta in thresholds.values() {
            reaches |= table.get(snowy_id, c, theta)? >= NEAR_FULL_COVERAGE;
        }
        if reaches {
            good.insert(c.clone());
        }
        if consistency(table, snowy_id, c, thresholds)?.len() > 1 {
            consistent.insert(c.clone());
        }
    }
    let unique = if candidates.len() == 1 {
        candidates.clone()
    } else {
        BTreeSet::new()
    };
    Ok([perfect, good, unique, consistent, candidates])
}

fn candidate(table: &CoverageTable, snowy_id: &str, clear_id: &str) -> Result<Candidate> {
    Ok(Candidate {
        clear_id: clear_id.to_string(),
        coverage: table.fractions(snowy_id, clear_id)?.to_vec(),
        d_max: table.d_max(snowy_id, clear_id)?,
    })
}

/// Review order: highest coverage first, then smallest d_max (unknown
/// last), then id.
fn review_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.max_coverage()
        .total_cmp(&a.max_coverage())
        .then_with(|| {
            a.d_max
                .unwrap_or(f64::INFINITY)
                .total_cmp(&b.d_max.unwrap_or(f64::INFINITY))
        })
        .then_with(|| a.clear_id.cmp(&b.clear_id))
}

/// Picks the first nonempty tier subset for `snowy_id`.
pub fn tiered_select(
    table: &CoverageTable,
    snowy_id: &str,
    thresholds: &LateralThresholds,
) -> Result<MatchOutcome> {
    let subsets = tier_subsets(table, snowy_id, thresholds)?;
    let Some((k, subset)) = subsets.iter().enumerate().find(|(_, s)| !s.is_empty()) else {
        return Ok(MatchOutcome {
            snowy_id: snowy_id.to_string(),
            tier: None,
            candidates: Vec::new(),
            status: MatchStatus::Unmatched,
            decision: None,
        });
    };
    let mut candidates = subset
        .iter()
        .map(|c| candidate(table, snowy_id, c))
        .collect::<Result<Vec<_>>>()?;
    candidates.sort_by(review_order);
    let tier = Some(k as u8 + 1);
    if candidates.len() == 1 {
        let clear_id = candidates[0].clear_id.clone();
        Ok(MatchOutcome {
            snowy_id: snowy_id.to_string(),
            tier,
            candidates,
            status: MatchStatus::AutoMatched,
            decision: Some(Decision {
                clear_id,
                decided_by: DecidedBy::Auto,
                note: format!("tier {}", k + 1),
                decided_at: None,
            }),
        })
    } else {
        Ok(MatchOutcome {
            snowy_id: snowy_id.to_string(),
            tier,
            candidates,
            status: MatchStatus::NeedsReview,
            decision: None,
        })
    }
}

/// Records a reviewer's choice.
///
/// For needs_review outcomes the choice must be one of the candidates; for
/// unmatched outcomes any clear sequence for which `is_known_clear` holds.
/// Re-submitting the recorded choice is a no-op; a different choice on a
/// decided outcome is a conflict.
pub fn apply_decision(
    outcome: &MatchOutcome,
    clear_id: &str,
    note: &str,
    is_known_clear: impl Fn(&str) -> bool,
    decided_at: Option<String>,
) -> Result<MatchOutcome> {
    if let Some(existing) = &outcome.decision {
        if existing.clear_id == clear_id {
            return Ok(outcome.clone());
        }
        return Err(Error::Conflict {
            snowy_id: outcome.snowy_id.clone(),
            existing: existing.clear_id.clone(),
        });
    }
    match outcome.status {
        MatchStatus::NeedsReview => {
            if !outcome.candidates.iter().any(|c| c.clear_id == clear_id) {
                return Err(Error::InvalidDecision(format!(
                    "{clear_id} is not a candidate for {}",
                    outcome.snowy_id
                )));
            }
        }
        MatchStatus::Unmatched => {
            if !is_known_clear(clear_id) {
                return Err(Error::InvalidDecision(format!(
                    "{clear_id} is not a known clear sequence"
                )));
            }
        }
        MatchStatus::AutoMatched | MatchStatus::HumanMatched => {
            return Err(Error::InvalidDecision(format!(
                "{} has no decision but status {:?}",
                outcome.snowy_id, outcome.status
            )));
        }
    }
    let mut next = outcome.clone();
    next.status = MatchStatus::HumanMatched;
    next.decision = Some(Decision {
        clear_id: clear_id.to_string(),
        decided_by: DecidedBy::Human,
        note: note.to_string(),
        decided_at,
    });
    Ok(next)
}
