//! Gray-level co-occurrence matrices and the 13 Haralick features per channel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{quantize_channel, Channel, ChannelPlane, RasterImage, TissueMask};
use crate::tiling::{build_grid, Tile, TileSpec};

pub const HARALICK_COUNT: usize = 13;
pub const FEATURE_COUNT: usize = 2 * HARALICK_COUNT;

pub const HARALICK_NAMES: [&str; HARALICK_COUNT] = [
    "angular_second_moment",
    "contrast",
    "correlation",
    "sum_of_squares",
    "inverse_difference_moment",
    "sum_average",
    "sum_variance",
    "sum_entropy",
    "entropy",
    "difference_variance",
    "difference_entropy",
    "info_measure_correlation_1",
    "info_measure_correlation_2",
];

/// Column names in feature-vector order: `F0_B..F12_B, F0_S..F12_S`.
pub fn feature_columns() -> Vec<String> {
    Channel::MEASURED
        .iter()
        .flat_map(|ch| (0..HARALICK_COUNT).map(move |k| format!("F{k}_{}", ch.suffix())))
        .collect()
}

/// Co-occurrence direction. Offsets are `(dx, dy)` in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "0")]
    Deg0,
    #[serde(rename = "45")]
    Deg45,
    #[serde(rename = "90")]
    Deg90,
    #[serde(rename = "135")]
    Deg135,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Deg0, Direction::Deg45, Direction::Deg90, Direction::Deg135];

    pub fn offset(self, distance: usize) -> (isize, isize) {
        let d = distance as isize;
        match self {
            Direction::Deg0 => (d, 0),
            Direction::Deg45 => (d, d),
            Direction::Deg90 => (0, d),
            Direction::Deg135 => (-d, d),
        }
    }
}

/// Normalized, symmetric co-occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    gray_levels: usize,
    p: Vec<f64>,
    distance: usize,
    directions: Vec<Direction>,
}

impl Glcm {
    /// Wraps an already-normalized `G x G` row-major matrix.
    pub fn from_probabilities(gray_levels: usize, p: Vec<f64>) -> Result<Self> {
        if gray_levels < 2 {
            return Err(Error::InvalidBinCount(gray_levels));
        }
        if p.len() != gray_levels * gray_levels {
            return Err(Error::InvalidMatrix(format!(
                "GLCM needs {} entries, got {}",
                gray_levels * gray_levels,
                p.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidMatrix(
                "GLCM entries must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMatrix(format!("GLCM sums to {total}, expected 1")));
        }
        Ok(Self {
            gray_levels,
            p,
            distance: 0,
            directions: Vec::new(),
        })
    }

    pub fn gray_levels(&self) -> usize {
        self.gray_levels
    }

    pub fn distance(&self) -> usize {
        self.distance
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.gray_levels + j]
    }
}

/// Accumulates co-occurrences of member pixel pairs of `tile` in `plane`.
///
/// A pair counts only when both endpoints are tile members, and every pair
/// contributes to `(a, b)` and `(b, a)`.
pub fn compute_glcm(
    plane: &ChannelPlane,
    mask: &TissueMask,
    tile: &Tile,
    distance: usize,
    directions: &[Direction],
) -> Result<Glcm> {
    if distance == 0 {
        return Err(Error::InvalidGlcmParams("distance must be at least 1".into()));
    }
    if directions.is_empty() {
        return Err(Error::InvalidGlcmParams("at least one direction is required".into()));
    }
    if plane.width() != mask.width() || plane.height() != mask.height() {
        return Err(Error::DimensionMismatch {
            mask_width: mask.width(),
            mask_height: mask.height(),
            image_width: plane.width(),
            image_height: plane.height(),
        });
    }
    let g = plane.gray_levels();
    let offsets: Vec<(isize, isize)> = directions.iter().map(|d| d.offset(distance)).collect();
    let mut counts = vec![0u64; g * g];
    let mut pairs = 0u64;
    for (x, y) in tile.members(mask) {
        let a = plane.level(x, y) as usize;
        for &(dx, dy) in &offsets {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if nx < 0 || ny < 0 {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if !tile.contains(mask, nx, ny) {
                continue;
            }
            let b = plane.level(nx, ny) as usize;
            counts[a * g + b] += 1;
            counts[b * g + a] += 1;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(Error::NoValidPairs { tile_id: tile.tile_id });
    }
    let total = (2 * pairs) as f64;
    Ok(Glcm {
        gray_levels: g,
        p: counts.into_iter().map(|c| c as f64 / total).collect(),
        distance,
        directions: directions.to_vec(),
    })
}

#[inline]
fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// The 13 Haralick features `F0..F12` of a normalized GLCM.
///
/// Natural logarithms throughout with `0 ln 0 = 0`. Sum variance is centred on
/// the sum average. Correlation is 0 for a zero-variance marginal, IMC1 is 0
/// when both marginal entropies vanish.
pub fn haralick_features(glcm: &Glcm) -> [f64; HARALICK_COUNT] {
    let g = glcm.gray_levels;
    let p = &glcm.p;

    let mut px = vec![0.0; g];
    let mut py = vec![0.0; g];
    let mut p_sum = vec![0.0; 2 * g - 1];
    let mut p_diff = vec![0.0; g];
    let mut asm = 0.0;
    let mut entropy = 0.0;
    let mut ij_moment = 0.0;
    for i in 0..g {
        let row = &p[i * g..(i + 1) * g];
        for (j, &v) in row.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            px[i] += v;
            py[j] += v;
            p_sum[i + j] += v;
            p_diff[i.abs_diff(j)] += v;
            asm += v * v;
            entropy -= plogp(v);
            ij_moment += (i * j) as f64 * v;
        }
    }

    let mean: f64 = px.iter().enumerate().map(|(i, &v)| i as f64 * v).sum();
    let variance: f64 = px.iter().enumerate().map(|(i, &v)| (i as f64 - mean).powi(2) * v).sum();

    let contrast: f64 = p_diff.iter().enumerate().map(|(k, &v)| (k * k) as f64 * v).sum();
    let correlation = if variance > 0.0 {
        ((ij_moment - mean * mean) / variance).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let idm: f64 = p_diff
        .iter()
        .enumerate()
        .map(|(k, &v)| v / (1.0 + (k * k) as f64))
        .sum();
    let sum_average: f64 = p_sum.iter().enumerate().map(|(k, &v)| k as f64 * v).sum();
    let sum_variance: f64 = p_sum
        .iter()
        .enumerate()
        .map(|(k, &v)| (k as f64 - sum_average).powi(2) * v)
        .sum();
    let sum_entropy: f64 = -p_sum.iter().map(|&v| plogp(v)).sum::<f64>();
    let diff_mean: f64 = p_diff.iter().enumerate().map(|(k, &v)| k as f64 * v).sum();
    let diff_variance: f64 = p_diff
        .iter()
        .enumerate()
        .map(|(k, &v)| (k as f64 - diff_mean).powi(2) * v)
        .sum();
    let diff_entropy: f64 = -p_diff.iter().map(|&v| plogp(v)).sum::<f64>();

    let hx: f64 = -px.iter().map(|&v| plogp(v)).sum::<f64>();
    let hy: f64 = -py.iter().map(|&v| plogp(v)).sum::<f64>();
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    for i in 0..g {
        if px[i] == 0.0 {
            continue;
        }
        for j in 0..g {
            let prod = px[i] * py[j];
            if prod == 0.0 {
                continue;
            }
            let ln_prod = prod.ln();
            hxy1 -= p[i * g + j] * ln_prod;
            hxy2 -= prod * ln_prod;
        }
    }
    let hmax = hx.max(hy);
    let imc1 = if hmax > 0.0 { (entropy - hxy1) / hmax } else { 0.0 };
    let imc2 = (1.0 - (-2.0 * (hxy2 - entropy).max(0.0)).exp()).sqrt();

    [
        asm,
        contrast,
        correlation,
        variance,
        idm,
        sum_average,
        sum_variance,
        sum_entropy,
        entropy,
        diff_variance,
        diff_entropy,
        imc1,
        imc2,
    ]
    // Adding +0.0 turns -0.0 (entropy of a single-entry GLCM) into 0.0.
    .map(|v| v + 0.0)
}

/// Co-occurrence settings shared by every tile of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureParams {
    pub gray_levels: usize,
    pub distance: usize,
    pub directions: Vec<Direction>,
}

impl Default for TextureParams {
    fn default() -> Self {
        Self {
            gray_levels: crate::imaging::DEFAULT_GRAY_LEVELS,
            distance: 1,
            directions: Direction::ALL.to_vec(),
        }
    }
}

/// 26 Haralick values of one tile, Brightness first.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub tile_id: usize,
    pub cx: usize,
    pub cy: usize,
    pub values: [f64; FEATURE_COUNT],
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub tiles: Vec<Tile>,
    pub features: Vec<FeatureVector>,
    /// Tiles without any co-occurring pair in at least one channel.
    pub skipped: Vec<usize>,
}

pub fn tile_features(
    planes: &[ChannelPlane; 2],
    mask: &TissueMask,
    tile: &Tile,
    params: &TextureParams,
) -> Result<FeatureVector> {
    let mut values = [0.0; FEATURE_COUNT];
    for (slot, plane) in values.chunks_exact_mut(HARALICK_COUNT).zip(planes) {
        let glcm = compute_glcm(plane, mask, tile, params.distance, &params.directions)?;
        slot.copy_from_slice(&haralick_features(&glcm));
    }
    Ok(FeatureVector {
        tile_id: tile.tile_id,
        cx: tile.cx,
        cy: tile.cy,
        values,
    })
}

/// Tiles the image and measures every tile on the Brightness and Saturation planes.
pub fn extract_features(
    image: &RasterImage,
    mask: &TissueMask,
    spec: &TileSpec,
    params: &TextureParams,
) -> Result<Extraction> {
    let tiles = build_grid(image, mask, spec)?;
    let planes = [
        quantize_channel(image, Channel::Brightness, params.gray_levels)?,
        quantize_channel(image, Channel::Saturation, params.gray_levels)?,
    ];
    let results: Vec<Result<FeatureVector>> = tiles
        .par_iter()
        .map(|t| tile_features(&planes, mask, t, params))
        .collect();

    let mut features = Vec::with_capacity(tiles.len());
    let mut skipped = Vec::new();
    for res in results {
        match res {
            Ok(fv) => features.push(fv),
            Err(Error::NoValidPairs { tile_id }) => {
                log::warn!("tile {tile_id} has no valid pixel pairs, skipped");
                skipped.push(tile_id);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Extraction {
        tiles,
        features,
        skipped,
    })
}
