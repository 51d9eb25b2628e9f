//! Coverage of one spatial model by another.
//!
//! `cover(s, c, theta)` is the fraction of points of `s` that have some point
//! of `c` within `theta` meters; `d_max(s, c)` is the directed Hausdorff
//! distance from `s` to `c`. Both are answered through a uniform grid over
//! the points of `c` and use [`PlanarPoint::distance`] exactly as a
//! brute-force double loop would, so results match it bit for bit.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::PlanarPoint;
use crate::spatial::SpatialModel;

/// Cells are padded by this relative amount so that any point within the
/// cell size of a query falls in the 3x3 neighbourhood despite rounding in
/// the cell assignment.
const CELL_PAD: f64 = 1e-9;

/// The set of lateral distances considered, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LateralThresholds(Vec<f64>);

impl LateralThresholds {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("at least one threshold required".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "thresholds must be positive and finite: {values:?}"
            )));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "thresholds must be strictly increasing: {values:?}"
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0[0]
    }

    pub fn max(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn index_of(&self, theta: f64) -> Option<usize> {
        self.0.iter().position(|&t| t == theta)
    }
}

impl Default for LateralThresholds {
    /// Same lane, adjacent lane, same road.
    fn default() -> Self {
        Self(vec![2.0, 4.0, 8.0])
    }
}

impl TryFrom<Vec<f64>> for LateralThresholds {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LateralThresholds> for Vec<f64> {
    fn from(t: LateralThresholds) -> Self {
        t.0
    }
}

/// Uniform grid over a point set.
#[derive(Debug, Clone)]
pub struct GridIndex {
    points: Vec<PlanarPoint>,
    cell: f64,
    cells: HashMap<(i64, i64), Vec<u32>>,
    min_cell: (i64, i64),
    max_cell: (i64, i64),
    min: PlanarPoint,
    max: PlanarPoint,
}

impl GridIndex {
    /// Builds an index whose cells are `cell_size` meters wide (plus padding).
    pub fn new(points: &[PlanarPoint], cell_size: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("cannot index an empty point set".into()));
        }
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::InvalidInput(format!("bad cell size {cell_size}")));
        }
        let cell = cell_size * (1.0 + CELL_PAD);
        let mut cells: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        let mut min = points[0];
        let mut max = points[0];
        let mut min_cell = (i64::MAX, i64::MAX);
        let mut max_cell = (i64::MIN, i64::MIN);
        for (i, p) in points.iter().enumerate() {
            let key = cell_key(p, cell);
            cells.entry(key).or_default().push(i as u32);
            min_cell = (min_cell.0.min(key.0), min_cell.1.min(key.1));
            max_cell = (max_cell.0.max(key.0), max_cell.1.max(key.1));
            min = PlanarPoint::new(min.x.min(p.x), min.y.min(p.y));
            max = PlanarPoint::new(max.x.max(p.x), max.y.max(p.y));
        }
        Ok(Self {
            points: points.to_vec(),
            cell,
            cells,
            min_cell,
            max_cell,
            min,
            max,
        })
    }

    pub fn points(&self) -> &[PlanarPoint] {
        &self.points
    }

    /// Axis-aligned bounds of the indexed points.
    pub fn bounds(&self) -> (PlanarPoint, PlanarPoint) {
        (self.min, self.max)
    }

    fn neighbourhood(&self, q: &PlanarPoint, reach: i64) -> impl Iterator<Item = &PlanarPoint> {
        let (cx, cy) = cell_key(q, self.cell);
        (cx - reach..=cx + reach)
            .flat_map(move |x| (cy - reach..=cy + reach).map(move |y| (x, y)))
            .filter_map(|k| self.cells.get(&k))
            .flatten()
            .map(|&i| &self.points[i as usize])
    }

    fn reach(&self, radius: f64) -> i64 {
        ((radius / self.cell).ceil() as i64).max(1)
    }

    /// True if some indexed point is within `theta` (inclusive) of `q`.
    pub fn any_within(&self, q: &PlanarPoint, theta: f64) -> bool {
        self.neighbourhood(q, self.reach(theta))
            .any(|p| q.distance(p) <= theta)
    }

    /// Smallest distance from `q` to an indexed point, if one is within `radius`.
    pub fn min_distance_within(&self, q: &PlanarPoint, radius: f64) -> Option<f64> {
        self.neighbourhood(q, self.reach(radius))
            .map(|p| q.distance(p))
            .filter(|&d| d <= radius)
            .min_by(f64::total_cmp)
    }

    /// Exact nearest-neighbour distance. Searches Chebyshev rings of cells
    /// outward and falls back to a linear scan once the rings would visit more
    /// cell slots than the grid holds occupied cells.
    pub fn nearest_distance(&self, q: &PlanarPoint) -> f64 {
        let (cx, cy) = cell_key(q, self.cell);
        let budget = 4 * self.cells.len() + 16;
        let max_ring = [
            (cx - self.min_cell.0).abs(),
            (self.max_cell.0 - cx).abs(),
            (cy - self.min_cell.1).abs(),
            (self.max_cell.1 - cy).abs(),
        ]
        .into_iter()
        .max()
        .unwrap_or(0);
        let mut best = f64::INFINITY;
        let mut visited = 0usize;
        for k in 0..=max_ring {
            for (x, y) in ring(cx, cy, k) {
                if let Some(ids) = self.cells.get(&(x, y)) {
                    for &i in ids {
                        let d = q.distance(&self.points[i as usize]);
                        if d < best {
                            best = d;
                        }
                    }
                }
            }
            // Anything outside ring k is at least k cells away, minus a
            // margin for rounding in the cell assignment.
            if best <= (k as f64 - 1e-6) * self.cell {
                return best;
            }
            visited += (8 * k as usize).max(1);
            if visited + 8 * (k as usize + 1) > budget {
                return self.linear_nearest(q);
            }
        }
        best
    }

    fn linear_nearest(&self, q: &PlanarPoint) -> f64 {
        self.points
            .iter()
            .map(|p| q.distance(p))
            .min_by(f64::total_cmp)
            .unwrap_or(f64::INFINITY)
    }
}

fn cell_key(p: &PlanarPoint, cell: f64) -> (i64, i64) {
    ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
}

fn ring(cx: i64, cy: i64, k: i64) -> Box<dyn Iterator<Item = (i64, i64)>> {
    if k == 0 {
        return Box::new(std::iter::once((cx, cy)));
    }
    let top = (cx - k..=cx + k).map(move |x| (x, cy - k));
    let bottom = (cx - k..=cx + k).map(move |x| (x, cy + k));
    let left = (cy - k + 1..cy + k).map(move |y| (cx - k, y));
    let right = (cy - k + 1..cy + k).map(move |y| (cx + k, y));
    Box::new(top.chain(bottom).chain(left).chain(right))
}

fn require_points(points: &[PlanarPoint], what: &str) -> Result<()> {
    if points.is_empty() {
        Err(Error::InvalidInput(format!("{what} model is empty")))
    } else {
        Ok(())
    }
}

/// Fraction of points of `s` within `theta` meters of some point of `c`.
pub fn cover(s: &SpatialModel, c: &SpatialModel, theta: f64) -> Result<f64> {
    cover_points(s.points(), c.points(), theta)
}

pub fn cover_points(s: &[PlanarPoint], c: &[PlanarPoint], theta: f64) -> Result<f64> {
    require_points(s, "snowy")?;
    require_points(c, "clear")?;
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::InvalidInput(format!("theta must be positive, got {theta}")));
    }
    let index = GridIndex::new(c, theta)?;
    let hits = s.iter().filter(|p| index.any_within(p, theta)).count();
    Ok(hits as f64 / s.len() as f64)
}

/// Greatest distance from a point of `s` to its nearest point of `c`.
pub fn d_max(s: &SpatialModel, c: &SpatialModel) -> Result<f64> {
    d_max_points(s.points(), c.points())
}

pub fn d_max_points(s: &[PlanarPoint], c: &[PlanarPoint]) -> Result<f64> {
    require_points(s, "snowy")?;
    require_points(c, "clear")?;
    let index = GridIndex::new(c, suggested_cell(c))?;
    Ok(directed_hausdorff(s, &index))
}

fn directed_hausdorff(s: &[PlanarPoint], index: &GridIndex) -> f64 {
    s.iter()
        .map(|p| index.nearest_distance(p))
        .fold(0.0, f64::max)
}

/// Cell size for nearest-neighbour queries: roughly one point per cell.
fn suggested_cell(points: &[PlanarPoint]) -> f64 {
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points {
        lo = PlanarPoint::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = PlanarPoint::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let extent = (hi.x - lo.x).max(hi.y - lo.y);
    let per_side = (points.len() as f64).sqrt().max(1.0);
    (extent / per_side).max(1.0)
}

/// cover(s, c, theta) for every snowy, clear and threshold, plus d_max for
/// pairs with nonzero coverage at the largest threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageTable {
    thresholds: LateralThresholds,
    snowy_ids: Vec<String>,
    clear_ids: Vec<String>,
    snowy_pos: BTreeMap<String, usize>,
    clear_pos: BTreeMap<String, usize>,
    /// Row-major `[snowy][clear][theta]`.
    fractions: Vec<f64>,
    d_max: BTreeMap<(usize, usize), f64>,
}

/// Row of [`CoverageTable::from_entries`]: snowy id, clear id, one fraction per threshold.
pub type CoverageEntry = (String, String, Vec<f64>);

impl CoverageTable {
    fn empty(
        thresholds: LateralThresholds,
        mut snowy_ids: Vec<String>,
        mut clear_ids: Vec<String>,
    ) -> Result<Self> {
        snowy_ids.sort();
        clear_ids.sort();
        for ids in [&snowy_ids, &clear_ids] {
            if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::DuplicateSequence(w[0].clone()));
            }
        }
        let snowy_pos = snowy_ids.iter().cloned().zip(0..).collect();
        let clear_pos = clear_ids.iter().cloned().zip(0..).collect();
        let len = snowy_ids.len() * clear_ids.len() * thresholds.len();
        Ok(Self {
            thresholds,
            snowy_ids,
            clear_ids,
            snowy_pos,
            clear_pos,
            fractions: vec![0.0; len],
            d_max: BTreeMap::new(),
        })
    }

    /// Builds a table from explicit values. Pairs not listed have zero
    /// coverage. Each row must hold one fraction in [0, 1] per threshold,
    /// non-decreasing in theta.
    pub fn from_entries(
        thresholds: LateralThresholds,
        snowy_ids: Vec<String>,
        clear_ids: Vec<String>,
        entries: impl IntoIterator<Item = CoverageEntry>,
    ) -> Result<Self> {
        let mut table = Self::empty(thresholds, snowy_ids, clear_ids)?;
        for (s, c, values) in entries {
            if values.len() != table.thresholds.len() {
                return Err(Error::InvalidInput(format!(
                    "({s}, {c}): expected {} fractions, got {}",
                    table.thresholds.len(),
                    values.len()
                )));
            }
            if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidInput(format!("({s}, {c}): fraction outside [0, 1]")));
            }
            if values.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidInput(format!(
                    "({s}, {c}): coverage decreases with theta"
                )));
            }
            let base = table.offset(&s, &c)?;
            table.fractions[base..base + values.len()].copy_from_slice(&values);
        }
        Ok(table)
    }

    /// Records d_max for a pair.
    pub fn set_d_max(&mut self, snowy_id: &str, clear_id: &str, value: f64) -> Result<()> {
        let s = self.snowy_index(snowy_id)?;
        let c = self.clear_index(clear_id)?;
        self.d_max.insert((s, c), value);
        Ok(())
    }

    fn offset(&self, snowy_id: &str, clear_id: &str) -> Result<usize> {
        let s = self.snowy_index(snowy_id)?;
        let c = self.clear_index(clear_id)?;
        Ok((s * self.clear_ids.len() + c) * self.thresholds.len())
    }

    fn snowy_index(&self, id: &str) -> Result<usize> {
        self.snowy_pos
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownSequence(id.to_string()))
    }

    fn clear_index(&self, id: &str) -> Result<usize> {
        self.clear_pos
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownSequence(id.to_string()))
    }

    pub fn thresholds(&self) -> &LateralThresholds {
        &self.thresholds
    }

    pub fn snowy_ids(&self) -> &[String] {
        &self.snowy_ids
    }

    pub fn clear_ids(&self) -> &[String] {
        &self.clear_ids
    }

    pub fn contains_snowy(&self, id: &str) -> bool {
        self.snowy_pos.contains_key(id)
    }

    pub fn contains_clear(&self, id: &str) -> bool {
        self.clear_pos.contains_key(id)
    }

    /// Fractions for a pair, one per threshold.
    pub fn fractions(&self, snowy_id: &str, clear_id: &str) -> Result<&[f64]> {
        let base = self.offset(snowy_id, clear_id)?;
        Ok(&self.fractions[base..base + self.thresholds.len()])
    }

    pub fn get(&self, snowy_id: &str, clear_id: &str, theta: f64) -> Result<f64> {
        let t = self.thresholds.index_of(theta).ok_or_else(|| {
            Error::InvalidInput(format!("theta {theta} is not one of {:?}", self.thresholds))
        })?;
        Ok(self.fractions(snowy_id, clear_id)?[t])
    }

    pub fn d_max(&self, snowy_id: &str, clear_id: &str) -> Result<Option<f64>> {
        let s = self.snowy_index(snowy_id)?;
        let c = self.clear_index(clear_id)?;
        Ok(self.d_max.get(&(s, c)).copied())
    }

    pub fn len(&self) -> usize {
        self.fractions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fractions.is_empty()
    }

    /// Rows in export order: snowy id, clear id, theta ascending.
    pub fn rows(&self) -> impl Iterator<Item = (&str, &str, f64, f64)> + '_ {
        let nt = self.thresholds.len();
        let nc = self.clear_ids.len();
        self.fractions.iter().enumerate().map(move |(i, &f)| {
            let t = i % nt;
            let c = (i / nt) % nc;
            let s = i / (nt * nc);
            (
                self.snowy_ids[s].as_str(),
                self.clear_ids[c].as_str(),
                self.thresholds.values()[t],
                f,
            )
        })
    }

    /// Writes the tabular export: a version line, a header, then one row per
    /// (snowy_id, clear_id, theta).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# weatherpair coverage-table v1")?;
        writeln!(out, "snowy_id,clear_id,theta,fraction")?;
        for (s, c, t, f) in self.rows() {
            writeln!(out, "{s},{c},{t},{f}")?;
        }
        Ok(())
    }
}

/// Computes the full table over `snowy` x `clear` x `thresholds`.
///
/// One grid per clear model (cell = max threshold) is built once and shared
/// across workers. For each snowy point the nearest clear point within the
/// largest threshold decides membership at every threshold at once; pairs
/// whose padded bounding boxes do not meet are skipped as all-zero.
pub fn coverage_table(
    snowy: &[SpatialModel],
    clear: &[SpatialModel],
    thresholds: &LateralThresholds,
) -> Result<CoverageTable> {
    if snowy.is_empty() || clear.is_empty() {
        return Err(Error::InvalidInput(
            "coverage needs at least one snowy and one clear model".into(),
        ));
    }
    let mut table = CoverageTable::empty(
        thresholds.clone(),
        snowy.iter().map(|m| m.sequence_id().to_string()).collect(),
        clear.iter().map(|m| m.sequence_id().to_string()).collect(),
    )?;
    let max_theta = thresholds.max();

    let indices: Vec<GridIndex> = clear
        .par_iter()
        .map(|c| {
            GridIndex::new(c.points(), max_theta).map_err(|e| Error::Pair {
                snowy_id: String::new(),
                clear_id: c.sequence_id().to_string(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let nt = thresholds.len();
    let rows: Vec<(usize, Vec<(usize, Vec<f64>, Option<f64>)>)> = snowy
        .par_iter()
        .map(|s| {
            let si = table.snowy_index(s.sequence_id())?;
            if s.is_empty() {
                return Err(Error::Pair {
                    snowy_id: s.sequence_id().to_string(),
                    clear_id: String::new(),
                    source: Box::new(Error::InvalidInput("snowy model is empty".into())),
                });
            }
            let (slo, shi) = bounds(s.points());
            let mut row = Vec::new();
            for (c, index) in clear.iter().zip(&indices) {
                let ci = table.clear_index(c.sequence_id())?;
                let (clo, chi) = index.bounds();
                if slo.x - max_theta > chi.x
                    || clo.x - max_theta > shi.x
                    || slo.y - max_theta > chi.y
                    || clo.y - max_theta > shi.y
                {
                    continue;
                }
                let mut hits = vec![0usize; nt];
                for p in s.points() {
                    if let Some(d) = index.min_distance_within(p, max_theta) {
                        for (h, &theta) in hits.iter_mut().zip(thresholds.values()) {
                            if d <= theta {
                                *h += 1;
                            }
                        }
                    }
                }
                if hits[nt - 1] == 0 {
                    continue;
                }
                let n = s.len() as f64;
                let fractions = hits.iter().map(|&h| h as f64 / n).collect();
                let dm = directed_hausdorff(s.points(), index);
                row.push((ci, fractions, Some(dm)));
            }
            Ok((si, row))
        })
        .collect::<Result<_>>()?;

    let nc = table.clear_ids.len();
    for (si, row) in rows {
        for (ci, fractions, dm) in row {
            let base = (si * nc + ci) * nt;
            table.fractions[base..base + nt].copy_from_slice(&fractions);
            if let Some(dm) = dm {
                table.d_max.insert((si, ci), dm);
            }
        }
    }
    Ok(table)
}

fn bounds(points: &[PlanarPoint]) -> (PlanarPoint, PlanarPoint) {
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = PlanarPoint::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = PlanarPoint::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (lo, hi)
}
