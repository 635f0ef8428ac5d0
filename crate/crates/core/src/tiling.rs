//! Overlapping circular tiles on a square lattice.
//!
//! Geometry is continuous: pixel `(x, y)` covers `[x, x+1) x [y, y+1)` and is
//! a member of a tile when its centre `(x + 0.5, y + 0.5)` lies within the
//! tile radius. Tile centres are integer lattice coordinates, so a tile
//! centred at `(150, 150)` with radius 150 exactly spans `[0, 300]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{RasterImage, TissueMask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TileSpec {
    pub diameter_um: f64,
    pub step_um: f64,
    pub min_mask_fraction: f64,
}

impl Default for TileSpec {
    fn default() -> Self {
        Self {
            diameter_um: 150.0,
            step_um: 100.0,
            min_mask_fraction: 0.5,
        }
    }
}

impl TileSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.diameter_um) {
            return Err(Error::InvalidTileSpec(format!("diameter_um = {}", self.diameter_um)));
        }
        if !positive(self.step_um) {
            return Err(Error::InvalidTileSpec(format!("step_um = {}", self.step_um)));
        }
        if !(self.min_mask_fraction > 0.0 && self.min_mask_fraction <= 1.0) {
            return Err(Error::InvalidTileSpec(format!(
                "min_mask_fraction = {} is outside (0, 1]",
                self.min_mask_fraction
            )));
        }
        Ok(())
    }

    pub fn radius_px(&self, pixel_size_um: f64) -> f64 {
        self.diameter_um / (2.0 * pixel_size_um)
    }

    pub fn pitch_px(&self, pixel_size_um: f64) -> f64 {
        self.step_um / pixel_size_um
    }
}

/// A circular sampling region. Membership is evaluated lazily against the
/// tissue mask rather than stored, since slide-scale grids hold many tiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub tile_id: usize,
    pub cx: usize,
    pub cy: usize,
    pub radius_px: f64,
}

impl Tile {
    pub fn new(tile_id: usize, cx: usize, cy: usize, radius_px: f64) -> Self {
        Self {
            tile_id,
            cx,
            cy,
            radius_px,
        }
    }

    /// Squared distance from the centre of pixel `(x, y)` to the tile centre.
    #[inline]
    pub fn dist2(&self, x: usize, y: usize) -> f64 {
        let dx = x as f64 + 0.5 - self.cx as f64;
        let dy = y as f64 + 0.5 - self.cy as f64;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn in_circle(&self, x: usize, y: usize) -> bool {
        self.dist2(x, y) <= self.radius_px * self.radius_px
    }

    #[inline]
    pub fn contains(&self, mask: &TissueMask, x: usize, y: usize) -> bool {
        x < mask.width() && y < mask.height() && self.in_circle(x, y) && mask.is_inside(x, y)
    }

    /// Pixel bounding box `(x0, y0, x1, y1)`, end-exclusive, clipped to the image.
    pub fn bbox(&self, width: usize, height: usize) -> (usize, usize, usize, usize) {
        let r = self.radius_px;
        let clip = |v: f64, hi: usize| v.clamp(0.0, hi as f64) as usize;
        let x0 = clip((self.cx as f64 - r - 0.5 - 1e-9).ceil(), width);
        let y0 = clip((self.cy as f64 - r - 0.5 - 1e-9).ceil(), height);
        let x1 = clip((self.cx as f64 + r - 0.5 + 1e-9).floor() + 1.0, width);
        let y1 = clip((self.cy as f64 + r - 0.5 + 1e-9).floor() + 1.0, height);
        (x0, y0, x1, y1)
    }

    /// Member pixels in row-major order.
    pub fn members<'a>(&'a self, mask: &'a TissueMask) -> impl Iterator<Item = (usize, usize)> + 'a {
        let (x0, y0, x1, y1) = self.bbox(mask.width(), mask.height());
        (y0..y1)
            .flat_map(move |y| (x0..x1).map(move |x| (x, y)))
            .filter(move |&(x, y)| self.contains(mask, x, y))
    }

    pub fn member_count(&self, mask: &TissueMask) -> usize {
        self.members(mask).count()
    }
}

/// Lattice coordinates along one axis whose circle fits within `[0, extent]`.
fn lattice_axis(extent: usize, radius: f64, pitch: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0usize;
    loop {
        let c = radius + i as f64 * pitch;
        if c + radius > extent as f64 + 1e-9 {
            break;
        }
        out.push(c.round() as usize);
        i += 1;
    }
    out
}

/// Lays the tile lattice over the image and keeps tiles with enough tissue.
pub fn build_grid(image: &RasterImage, mask: &TissueMask, spec: &TileSpec) -> Result<Vec<Tile>> {
    spec.validate()?;
    if mask.width() != image.width() || mask.height() != image.height() {
        return Err(Error::DimensionMismatch {
            mask_width: mask.width(),
            mask_height: mask.height(),
            image_width: image.width(),
            image_height: image.height(),
        });
    }
    let radius = spec.radius_px(image.pixel_size_um());
    let pitch = spec.pitch_px(image.pixel_size_um());
    let min_members = spec.min_mask_fraction * std::f64::consts::PI * radius * radius;

    let xs = lattice_axis(image.width(), radius, pitch);
    let ys = lattice_axis(image.height(), radius, pitch);
    let mut tiles = Vec::new();
    for &cy in &ys {
        for &cx in &xs {
            let tile = Tile::new(tiles.len(), cx, cy, radius);
            if tile.member_count(mask) as f64 >= min_members {
                tiles.push(tile);
            }
        }
    }
    if tiles.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(tiles)
}
