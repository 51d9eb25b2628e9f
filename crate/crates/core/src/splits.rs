//! Sparse label plans and mixed-domain training splits.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label the first and every `DEFAULT_STRIDE`-th frame after it.
pub const DEFAULT_STRIDE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Snowy,
    Clear,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Snowy => "snowy",
            Domain::Clear => "clear",
        })
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "snowy" => Ok(Domain::Snowy),
            "clear" => Ok(Domain::Clear),
            other => Err(Error::InvalidInput(format!("unknown domain {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Validation,
}

/// Nominal fraction of the sparse labels kept in a training split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub enum SplitFraction {
    Quarter,
    Half,
    ThreeQuarters,
    Full,
}

impl SplitFraction {
    pub const ALL: [SplitFraction; 4] = [
        SplitFraction::Quarter,
        SplitFraction::Half,
        SplitFraction::ThreeQuarters,
        SplitFraction::Full,
    ];

    pub fn value(self) -> f64 {
        match self {
            SplitFraction::Quarter => 0.25,
            SplitFraction::Half => 0.5,
            SplitFraction::ThreeQuarters => 0.75,
            SplitFraction::Full => 1.0,
        }
    }

    pub fn from_value(v: f64) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.value() == v)
            .ok_or(Error::UnsupportedFraction(v))
    }

    /// Whether the label at `position` of the labelled list is kept.
    fn keeps(self, position: usize) -> bool {
        match self {
            SplitFraction::Full => true,
            SplitFraction::Half => position.is_multiple_of(2),
            SplitFraction::Quarter => position.is_multiple_of(4),
            SplitFraction::ThreeQuarters => position % 4 != 3,
        }
    }
}

impl TryFrom<f64> for SplitFraction {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::from_value(v)
    }
}

impl From<SplitFraction> for f64 {
    fn from(f: SplitFraction) -> f64 {
        f.value()
    }
}

/// Frame positions 0, stride, 2 * stride, .. below `seq_len`.
pub fn sparse_plan(seq_len: usize, stride: usize) -> Vec<usize> {
    (0..seq_len).step_by(stride.max(1)).collect()
}

/// Keeps the labels of `labelled` selected by `fraction`, counting positions
/// in the labelled list from 0: every second for 0.5, every fourth for
/// 0.25, and all but positions 3, 7, 11, .. for 0.75.
pub fn fractional_split(labelled: &[usize], fraction: SplitFraction) -> Vec<usize> {
    labelled
        .iter()
        .enumerate()
        .filter(|(i, _)| fraction.keeps(*i))
        .map(|(_, &v)| v)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelPlan {
    pub domain: Domain,
    pub sequence_id: String,
    /// Snowy sequence of the pair this plan belongs to.
    pub pair_id: String,
    pub labelled_indices: Vec<usize>,
    pub role: Role,
    pub fraction: SplitFraction,
}

impl LabelPlan {
    /// Stride-sampled training plan over a sequence of `seq_len` frames.
    pub fn train(
        domain: Domain,
        sequence_id: &str,
        pair_id: &str,
        seq_len: usize,
        stride: usize,
    ) -> Self {
        Self {
            domain,
            sequence_id: sequence_id.to_string(),
            pair_id: pair_id.to_string(),
            labelled_indices: sparse_plan(seq_len, stride),
            role: Role::Train,
            fraction: SplitFraction::Full,
        }
    }

    /// Validation plans label every frame.
    pub fn validation(domain: Domain, sequence_id: &str, pair_id: &str, seq_len: usize) -> Self {
        Self {
            domain,
            sequence_id: sequence_id.to_string(),
            pair_id: pair_id.to_string(),
            labelled_indices: (0..seq_len).collect(),
            role: Role::Validation,
            fraction: SplitFraction::Full,
        }
    }

    /// Subsamples a full training plan.
    pub fn at_fraction(&self, fraction: SplitFraction) -> Result<Self> {
        if self.role != Role::Train || self.fraction != SplitFraction::Full {
            return Err(Error::InvalidInput(format!(
                "only full training plans can be subsampled ({})",
                self.sequence_id
            )));
        }
        Ok(Self {
            labelled_indices: fractional_split(&self.labelled_indices, fraction),
            fraction,
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub domain: Domain,
    pub sequence_id: String,
    pub pair_id: String,
    pub frame_index: usize,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub fraction_snowy: f64,
    pub fraction_clear: f64,
    pub train_snowy: usize,
    pub train_clear: usize,
    pub train_total: usize,
    pub validation_snowy: usize,
    pub validation_clear: usize,
    /// Pure (1.0) split label counts weighted by the two fractions.
    pub reference_total: f64,
    /// Train total within 10% of the reference.
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub plans: Vec<LabelPlan>,
    pub summary: SplitSummary,
}

impl SplitManifest {
    /// One entry per label in plan order.
    pub fn entries(&self) -> impl Iterator<Item = LabelEntry> + '_ {
        self.plans.iter().flat_map(|p| {
            p.labelled_indices.iter().map(move |&i| LabelEntry {
                domain: p.domain,
                sequence_id: p.sequence_id.clone(),
                pair_id: p.pair_id.clone(),
                frame_index: i,
                role: p.role,
            })
        })
    }
}

fn domain_fraction(f: f64) -> Result<Option<SplitFraction>> {
    if f == 0.0 {
        Ok(None)
    } else {
        SplitFraction::from_value(f).map(Some)
    }
}

/// Combines `snowy` training plans at `fraction_snowy` with `clear` training
/// plans at `fraction_clear`. The fractions must sum to one. Validation
/// plans are carried through unchanged and do not count towards the
/// training totals.
pub fn mix_splits(
    snowy: &[LabelPlan],
    fraction_snowy: f64,
    clear: &[LabelPlan],
    fraction_clear: f64,
) -> Result<SplitManifest> {
    if fraction_snowy + fraction_clear != 1.0 {
        return Err(Error::InvalidInput(format!(
            "split fractions {fraction_snowy} + {fraction_clear} do not sum to 1"
        )));
    }
    let fs = domain_fraction(fraction_snowy)?;
    let fc = domain_fraction(fraction_clear)?;
    for (plans, domain) in [(snowy, Domain::Snowy), (clear, Domain::Clear)] {
        if let Some(p) = plans.iter().find(|p| p.domain != domain) {
            return Err(Error::InvalidInput(format!(
                "plan for {} is tagged {} but passed as {domain}",
                p.sequence_id, p.domain
            )));
        }
    }

    let full_count = |plans: &[LabelPlan]| -> usize {
        plans
            .iter()
            .filter(|p| p.role == Role::Train)
            .map(|p| p.labelled_indices.len())
            .sum()
    };
    let pure_snowy = full_count(snowy);
    let pure_clear = full_count(clear);

    let mut out = Vec::new();
    let mut counts = [0usize; 2];
    let mut validation = [0usize; 2];
    for (plans, fraction, slot) in [(snowy, fs, 0), (clear, fc, 1)] {
        for plan in plans {
            match plan.role {
                Role::Validation => {
                    validation[slot] += plan.labelled_indices.len();
                    out.push(plan.clone());
                }
                Role::Train => {
                    if let Some(f) = fraction {
                        let sub = plan.at_fraction(f)?;
                        counts[slot] += sub.labelled_indices.len();
                        out.push(sub);
                    }
                }
            }
        }
    }

    let total = counts[0] + counts[1];
    // Reference is f_s * a + f_c * b; fractions are quarters, so compare
    // |4 total - 4 ref| <= 4 ref / 10 in integers.
    let quarters = |f: f64| (f * 4.0).round() as usize;
    let ref4 = quarters(fraction_snowy) * pure_snowy + quarters(fraction_clear) * pure_clear;
    let within = 10 * (4 * total).abs_diff(ref4) <= ref4;
    Ok(SplitManifest {
        plans: out,
        summary: SplitSummary {
            fraction_snowy,
            fraction_clear,
            train_snowy: counts[0],
            train_clear: counts[1],
            train_total: total,
            validation_snowy: validation[0],
            validation_clear: validation[1],
            reference_total: ref4 as f64 / 4.0,
            within_tolerance: within,
        },
    })
}
