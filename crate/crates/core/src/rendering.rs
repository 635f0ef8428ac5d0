//! Class colour maps painted from tile labels.

use image::RgbImage;

use crate::error::{Error, Result};
use crate::imaging::{RasterImage, TissueMask};
use crate::tiling::Tile;

/// Fixed ten-colour palette; class `k` always maps to entry `k mod 10`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette(Vec<[u8; 3]>);

impl Default for Palette {
    fn default() -> Self {
        Self(vec![
            [31, 119, 180],
            [255, 127, 14],
            [44, 160, 44],
            [214, 39, 40],
            [148, 103, 189],
            [140, 86, 75],
            [227, 119, 194],
            [127, 127, 127],
            [188, 189, 34],
            [23, 190, 207],
        ])
    }
}

impl Palette {
    pub fn new(colors: Vec<[u8; 3]>) -> Result<Self> {
        if colors.is_empty() {
            return Err(Error::InvalidMatrix("palette needs at least one colour".into()));
        }
        Ok(Self(colors))
    }

    pub fn color(&self, class: usize) -> [u8; 3] {
        self.0[class % self.0.len()]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-pixel class index, `None` for background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    pub width: usize,
    pub height: usize,
    pub classes: Vec<Option<usize>>,
}

impl ClassMap {
    pub fn class_at(&self, x: usize, y: usize) -> Option<usize> {
        self.classes[y * self.width + x]
    }
}

/// Assigns every covered pixel the label of the nearest containing tile
/// centre (lowest tile id on ties).
pub fn class_map(mask: &TissueMask, tiles: &[Tile], labels: &[usize]) -> Result<ClassMap> {
    if tiles.len() != labels.len() {
        return Err(Error::MissingData(format!(
            "{} tiles but {} labels",
            tiles.len(),
            labels.len()
        )));
    }
    let (w, h) = (mask.width(), mask.height());
    let mut best: Vec<Option<(f64, usize, usize)>> = vec![None; w * h];
    let mut order: Vec<usize> = (0..tiles.len()).collect();
    order.sort_by_key(|&i| tiles[i].tile_id);
    for i in order {
        let tile = &tiles[i];
        let (x0, y0, x1, y1) = tile.bbox(w, h);
        for y in y0..y1 {
            for x in x0..x1 {
                if !tile.contains(mask, x, y) {
                    continue;
                }
                let d2 = tile.dist2(x, y);
                let slot = &mut best[y * w + x];
                // Tiles arrive in ascending id, so only a strictly closer centre wins.
                if slot.is_none_or(|(bd, _, _)| d2 < bd) {
                    *slot = Some((d2, tile.tile_id, labels[i]));
                }
            }
        }
    }
    Ok(ClassMap {
        width: w,
        height: h,
        classes: best.into_iter().map(|b| b.map(|(_, _, label)| label)).collect(),
    })
}

/// Paints the class map over the image. Uncovered pixels show the original at
/// 40% brightness.
pub fn render_class_map(
    image: &RasterImage,
    mask: &TissueMask,
    tiles: &[Tile],
    labels: &[usize],
    palette: &Palette,
) -> Result<RgbImage> {
    let map = class_map(mask, tiles, labels)?;
    let mut out = RgbImage::new(image.width() as u32, image.height() as u32);
    for (i, (px, class)) in image.pixels().iter().zip(&map.classes).enumerate() {
        let color = match class {
            Some(k) => palette.color(*k),
            None => px.map(|c| (c as f64 * 0.4).round() as u8),
        };
        let (x, y) = ((i % image.width()) as u32, (i / image.width()) as u32);
        out.put_pixel(x, y, image::Rgb(color));
    }
    Ok(out)
}

/// Horizontal strip of `classes` swatches, `swatch` pixels square each.
pub fn render_legend(classes: usize, palette: &Palette, swatch: u32) -> RgbImage {
    let width = (classes as u32).max(1) * swatch;
    RgbImage::from_fn(width, swatch, |x, _| {
        let k = (x / swatch) as usize;
        if k < classes {
            image::Rgb(palette.color(k))
        } else {
            image::Rgb([0, 0, 0])
        }
    })
}

/// Bounding-box crop of one tile; pixels outside the tile are white.
pub fn tile_crop(image: &RasterImage, mask: &TissueMask, tile: &Tile) -> RgbImage {
    let (x0, y0, x1, y1) = tile.bbox(image.width(), image.height());
    RgbImage::from_fn((x1 - x0) as u32, (y1 - y0) as u32, |cx, cy| {
        let (x, y) = (x0 + cx as usize, y0 + cy as usize);
        if tile.contains(mask, x, y) {
            image::Rgb(image.pixel(x, y))
        } else {
            image::Rgb([255, 255, 255])
        }
    })
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)?;
    Ok(buf.into_inner())
}
