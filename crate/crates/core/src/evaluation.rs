//! Blind tile sampling, weighted expert grades and confusion matrices.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const MAX_STRENGTH: u8 = 3;
pub const MAX_PATTERN: u8 = 2;

/// Expression strength (none, low, moderate, strong) and pattern (none,
/// sparse, dense) levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradingScheme {
    pub strength: Vec<String>,
    pub pattern: Vec<String>,
}

impl Default for GradingScheme {
    fn default() -> Self {
        Self {
            strength: ["none", "low", "moderate", "strong"].map(String::from).to_vec(),
            pattern: ["none", "sparse", "dense"].map(String::from).to_vec(),
        }
    }
}

/// Tile id used by class-level annotation rows.
pub const CLASS_ROW_TILE_ID: i64 = -1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub evaluator_id: String,
    pub weight: f64,
    pub tile_id: i64,
    pub strength: i64,
    pub pattern: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_id: Option<usize>,
}

impl AnnotationRecord {
    pub fn is_class_level(&self) -> bool {
        self.tile_id == CLASS_ROW_TILE_ID
    }

    fn validate(&self) -> Result<()> {
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(Error::OutOfRangeScore(format!(
                "evaluator {} has non-positive weight {}",
                self.evaluator_id, self.weight
            )));
        }
        if !(0..=MAX_STRENGTH as i64).contains(&self.strength) {
            return Err(Error::OutOfRangeScore(format!(
                "strength {} from {} on tile {}",
                self.strength, self.evaluator_id, self.tile_id
            )));
        }
        if !(0..=MAX_PATTERN as i64).contains(&self.pattern) {
            return Err(Error::OutOfRangeScore(format!(
                "pattern {} from {} on tile {}",
                self.pattern, self.evaluator_id, self.tile_id
            )));
        }
        Ok(())
    }
}

/// Candidate tile for blind sampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleCandidate {
    pub tile_id: usize,
    pub class: usize,
    /// `[x0, y0, x1, y1]`, end-exclusive.
    pub bbox: [usize; 4],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub tile_id: usize,
    pub image_path: String,
    pub bbox: [usize; 4],
    pub hidden_class: usize,
    /// Presentation position, a seeded shuffle over all entries.
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub scheme: GradingScheme,
    pub tiles: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn crop_path(tile_id: usize) -> String {
    format!("tiles/tile_{tile_id:06}.png")
}

/// Draws up to `per_class` tiles per class without replacement.
///
/// Classes are visited in ascending order over tile-id-sorted candidates, so
/// the draw depends only on the seed and the label set.
pub fn sample_tiles(candidates: &[SampleCandidate], per_class: usize, seed: u64) -> SampleManifest {
    let mut by_class: BTreeMap<usize, Vec<&SampleCandidate>> = BTreeMap::new();
    for c in candidates {
        by_class.entry(c.class).or_default().push(c);
    }
    let mut rng = seed::rng(seed);
    let mut tiles = Vec::new();
    let mut warnings = Vec::new();
    for (class, mut members) in by_class {
        members.sort_by_key(|c| c.tile_id);
        let mut picked: Vec<&SampleCandidate> = if members.len() <= per_class {
            if members.len() < per_class {
                let msg = format!(
                    "class {class} has only {} tile(s), fewer than {per_class}; sampled all",
                    members.len()
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
            members
        } else {
            rand::seq::index::sample(&mut rng, members.len(), per_class)
                .into_iter()
                .map(|i| members[i])
                .collect()
        };
        picked.sort_by_key(|c| c.tile_id);
        tiles.extend(picked.into_iter().map(|c| ManifestEntry {
            tile_id: c.tile_id,
            image_path: crop_path(c.tile_id),
            bbox: c.bbox,
            hidden_class: c.class,
            order: 0,
        }));
    }
    let mut order: Vec<usize> = (0..tiles.len()).collect();
    order.shuffle(&mut rng);
    for (entry, pos) in tiles.iter_mut().zip(order) {
        entry.order = pos;
    }
    SampleManifest {
        scheme: GradingScheme::default(),
        tiles,
        warnings,
    }
}

/// `sum w s / sum w`, clamped into `[min s, max s]` against rounding drift.
pub fn weighted_mean(scores: &[(f64, f64)]) -> f64 {
    let wsum: f64 = scores.iter().map(|(w, _)| w).sum();
    let num: f64 = scores.iter().map(|(w, s)| w * s).sum();
    let lo = scores.iter().map(|(_, s)| *s).fold(f64::INFINITY, f64::min);
    let hi = scores.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
    (num / wsum).clamp(lo, hi)
}

/// Round half away from zero.
pub fn to_grade(mean: f64) -> u8 {
    mean.round() as u8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileGrade {
    pub tile_id: i64,
    pub strength_mean: f64,
    pub pattern_mean: f64,
    pub strength: u8,
    pub pattern: u8,
    /// Number of evaluators who scored the tile.
    pub evaluators: usize,
    pub weight_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGrade {
    pub class: usize,
    pub strength_mean: f64,
    pub pattern_mean: f64,
    pub strength: u8,
    pub pattern: u8,
}

#[derive(Debug, Default)]
struct Scores {
    strength: Vec<(f64, f64)>,
    pattern: Vec<(f64, f64)>,
    evaluators: BTreeSet<String>,
}

impl Scores {
    fn push(&mut self, r: &AnnotationRecord) {
        self.strength.push((r.weight, r.strength as f64));
        self.pattern.push((r.weight, r.pattern as f64));
        self.evaluators.insert(r.evaluator_id.clone());
    }

    fn weight_total(&self) -> f64 {
        self.strength.iter().map(|(w, _)| w).sum()
    }
}

/// Weighted mean grade per tile over the evaluators who scored it.
/// Class-level rows are ignored. When `known_tiles` is given, any other tile id
/// is rejected.
pub fn aggregate(records: &[AnnotationRecord], known_tiles: Option<&BTreeSet<i64>>) -> Result<Vec<TileGrade>> {
    let mut by_tile: BTreeMap<i64, Scores> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.is_class_level()) {
        r.validate()?;
        if r.tile_id < 0 || known_tiles.is_some_and(|k| !k.contains(&r.tile_id)) {
            return Err(Error::UnknownTile(r.tile_id));
        }
        by_tile.entry(r.tile_id).or_default().push(r);
    }
    Ok(by_tile
        .into_iter()
        .map(|(tile_id, s)| {
            let strength_mean = weighted_mean(&s.strength);
            let pattern_mean = weighted_mean(&s.pattern);
            TileGrade {
                tile_id,
                strength_mean,
                pattern_mean,
                strength: to_grade(strength_mean),
                pattern: to_grade(pattern_mean),
                evaluators: s.evaluators.len(),
                weight_total: s.weight_total(),
            }
        })
        .collect())
}

/// Consensus grade per class from the class-level rows.
pub fn grade_classes(records: &[AnnotationRecord], classes: &BTreeSet<usize>) -> Result<Vec<ClassGrade>> {
    let mut by_class: BTreeMap<usize, Scores> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_class_level()) {
        r.validate()?;
        let class = r
            .class_id
            .ok_or_else(|| Error::MissingData(format!("class-level row from {} lacks class_id", r.evaluator_id)))?;
        if !classes.contains(&class) {
            return Err(Error::UnknownClass(class));
        }
        by_class.entry(class).or_default().push(r);
    }
    classes
        .iter()
        .map(|&class| {
            let s = by_class.get(&class).ok_or(Error::MissingClassScore(class))?;
            let strength_mean = weighted_mean(&s.strength);
            let pattern_mean = weighted_mean(&s.pattern);
            Ok(ClassGrade {
                class,
                strength_mean,
                pattern_mean,
                strength: to_grade(strength_mean),
                pattern: to_grade(pattern_mean),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisReport {
    /// `matrix[expert][class_derived]`.
    pub matrix: Vec<Vec<u64>>,
    pub accuracy: f64,
    pub adjacent_accuracy: f64,
}

impl AxisReport {
    fn new(levels: usize, pairs: &[(u8, u8)]) -> Self {
        let mut matrix = vec![vec![0u64; levels]; levels];
        let mut exact = 0usize;
        let mut adjacent = 0usize;
        for &(expert, derived) in pairs {
            matrix[expert as usize][derived as usize] += 1;
            exact += usize::from(expert == derived);
            adjacent += usize::from(expert.abs_diff(derived) <= 1);
        }
        let n = pairs.len() as f64;
        Self {
            matrix,
            accuracy: exact as f64 / n,
            adjacent_accuracy: adjacent as f64 / n,
        }
    }

    pub fn total(&self) -> u64 {
        self.matrix.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileComparison {
    pub tile_id: i64,
    pub class: usize,
    pub expert_strength: u8,
    pub expert_pattern: u8,
    pub class_strength: u8,
    pub class_pattern: u8,
    pub strength_mean: f64,
    pub pattern_mean: f64,
    pub evaluators: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub annotated_tiles: usize,
    pub strength: AxisReport,
    pub pattern: AxisReport,
    pub class_grades: Vec<ClassGrade>,
    pub tiles: Vec<TileComparison>,
}

/// Compares expert tile grades with the grade of the class each tile was
/// assigned to.
pub fn confusion(
    tile_grades: &[TileGrade],
    class_grades: &[ClassGrade],
    labels: &BTreeMap<i64, usize>,
) -> Result<EvaluationReport> {
    if tile_grades.is_empty() {
        return Err(Error::MissingData("no annotated tiles".into()));
    }
    let by_class: BTreeMap<usize, &ClassGrade> = class_grades.iter().map(|g| (g.class, g)).collect();
    let mut tiles = Vec::with_capacity(tile_grades.len());
    for tg in tile_grades {
        let class = *labels
            .get(&tg.tile_id)
            .ok_or_else(|| Error::MissingData(format!("tile {} has no cluster label", tg.tile_id)))?;
        let cg = by_class.get(&class).ok_or(Error::MissingClassScore(class))?;
        tiles.push(TileComparison {
            tile_id: tg.tile_id,
            class,
            expert_strength: tg.strength,
            expert_pattern: tg.pattern,
            class_strength: cg.strength,
            class_pattern: cg.pattern,
            strength_mean: tg.strength_mean,
            pattern_mean: tg.pattern_mean,
            evaluators: tg.evaluators,
        });
    }
    let strength: Vec<(u8, u8)> = tiles.iter().map(|t| (t.expert_strength, t.class_strength)).collect();
    let pattern: Vec<(u8, u8)> = tiles.iter().map(|t| (t.expert_pattern, t.class_pattern)).collect();
    Ok(EvaluationReport {
        annotated_tiles: tiles.len(),
        strength: AxisReport::new(MAX_STRENGTH as usize + 1, &strength),
        pattern: AxisReport::new(MAX_PATTERN as usize + 1, &pattern),
        class_grades: class_grades.to_vec(),
        tiles,
    })
}
