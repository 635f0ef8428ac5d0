//! Raster ingestion, HSB conversion, gray-level quantization and tissue masks.

use std::path::Path;

use image::{DynamicImage, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default scanner resolution in micrometres per pixel.
pub const DEFAULT_PIXEL_SIZE_UM: f64 = 0.5;

/// Default number of gray levels per quantized channel.
pub const DEFAULT_GRAY_LEVELS: usize = 127;

/// A flat 8-bit RGB raster with its physical pixel size.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
    pixel_size_um: f64,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>, pixel_size_um: f64) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::InvalidMatrix(format!(
                "{} pixels supplied for a {width}x{height} image",
                pixels.len()
            )));
        }
        if !(pixel_size_um.is_finite() && pixel_size_um > 0.0) {
            return Err(Error::InvalidTileSpec(format!(
                "pixel size must be positive, got {pixel_size_um}"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            pixel_size_um,
        })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel in row-major order.
    pub fn from_fn(
        width: usize,
        height: usize,
        pixel_size_um: f64,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels, pixel_size_um)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_size_um(&self) -> f64 {
        self.pixel_size_um
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn width_um(&self) -> f64 {
        self.width as f64 * self.pixel_size_um
    }

    pub fn height_um(&self) -> f64 {
        self.height as f64 * self.pixel_size_um
    }

    pub fn to_rgb_image(&self) -> image::RgbImage {
        let raw: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("pixel buffer length matches dimensions")
    }
}

fn open_dynamic(path: &Path) -> Result<DynamicImage> {
    let unreadable = |reason: String| Error::UnreadableFile {
        path: path.to_path_buf(),
        reason,
    };
    ImageReader::open(path)
        .map_err(|e| unreadable(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| unreadable(e.to_string()))?
        .decode()
        .map_err(|e| unreadable(e.to_string()))
}

/// Reads an 8-bit PNG or TIFF as RGB. Alpha is discarded and gray images are
/// expanded to three equal channels.
pub fn load_image(path: &Path, pixel_size_um: f64) -> Result<RasterImage> {
    let img = open_dynamic(path)?;
    let rgb = match img {
        DynamicImage::ImageRgb8(buf) => buf,
        DynamicImage::ImageRgba8(_) | DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => img.to_rgb8(),
        other => {
            return Err(Error::UnsupportedBitDepth {
                path: path.to_path_buf(),
                color_type: format!("{:?}", other.color()),
            })
        }
    };
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let pixels = rgb.pixels().map(|p| p.0).collect();
    RasterImage::new(w, h, pixels, pixel_size_um)
}

/// Hexcone RGB to HSB. Hue in degrees `[0, 360)`, saturation and brightness
/// in `[0, 1]`. Achromatic pixels get hue 0.
pub fn rgb_to_hsb(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let v = max as f64 / 255.0;
    if max == 0 {
        return (0.0, 0.0, 0.0);
    }
    let delta = (max - min) as f64;
    let s = delta / max as f64;
    if max == min {
        return (0.0, s, v);
    }
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let mut h = if max as f64 == r {
        60.0 * ((g - b) / delta)
    } else if max as f64 == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    if h < 0.0 {
        h += 360.0;
    }
    if h >= 360.0 {
        h -= 360.0;
    }
    (h, s, v)
}

/// Inverse of [`rgb_to_hsb`], rounding each channel to the nearest 8-bit value.
pub fn hsb_to_rgb(h: f64, s: f64, v: f64) -> (u8, u8, u8) {
    let c = v * s;
    let hp = (h.rem_euclid(360.0)) / 60.0;
    let x = c * (1.0 - ((hp % 2.0) - 1.0).abs());
    let (r1, g1, b1) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let to8 = |u: f64| ((u + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    (to8(r1), to8(g1), to8(b1))
}

/// HSB channel measured by the texture stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Brightness,
    Saturation,
}

impl Channel {
    pub const MEASURED: [Channel; 2] = [Channel::Brightness, Channel::Saturation];

    pub fn suffix(self) -> &'static str {
        match self {
            Channel::Brightness => "B",
            Channel::Saturation => "S",
        }
    }

    fn value(self, [r, g, b]: [u8; 3]) -> f64 {
        let (_, s, v) = rgb_to_hsb(r, g, b);
        match self {
            Channel::Brightness => v,
            Channel::Saturation => s,
        }
    }
}

/// Maps a channel value in `[0, 1]` to a gray level in `[0, G-1]`.
pub fn quantize_value(value: f64, gray_levels: usize) -> u16 {
    let level = (value * gray_levels as f64).floor();
    let level = level.clamp(0.0, (gray_levels - 1) as f64);
    level as u16
}

/// A single quantized HSB channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPlane {
    channel: Channel,
    width: usize,
    height: usize,
    gray_levels: usize,
    levels: Vec<u16>,
}

impl ChannelPlane {
    /// Wraps precomputed levels. Every level must be below `gray_levels`.
    pub fn from_levels(
        channel: Channel,
        width: usize,
        height: usize,
        gray_levels: usize,
        levels: Vec<u16>,
    ) -> Result<Self> {
        check_gray_levels(gray_levels)?;
        if levels.len() != width * height {
            return Err(Error::InvalidMatrix(format!(
                "{} levels supplied for a {width}x{height} plane",
                levels.len()
            )));
        }
        if let Some(bad) = levels.iter().find(|&&l| l as usize >= gray_levels) {
            return Err(Error::InvalidMatrix(format!(
                "level {bad} out of range for {gray_levels} gray levels"
            )));
        }
        Ok(Self {
            channel,
            width,
            height,
            gray_levels,
            levels,
        })
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn gray_levels(&self) -> usize {
        self.gray_levels
    }

    pub fn levels(&self) -> &[u16] {
        &self.levels
    }

    #[inline]
    pub fn level(&self, x: usize, y: usize) -> u16 {
        self.levels[y * self.width + x]
    }
}

fn check_gray_levels(gray_levels: usize) -> Result<()> {
    if gray_levels < 2 || gray_levels > u16::MAX as usize + 1 {
        return Err(Error::InvalidBinCount(gray_levels));
    }
    Ok(())
}

pub fn quantize_channel(image: &RasterImage, channel: Channel, gray_levels: usize) -> Result<ChannelPlane> {
    check_gray_levels(gray_levels)?;
    let levels = image
        .pixels()
        .iter()
        .map(|&px| quantize_value(channel.value(px), gray_levels))
        .collect();
    Ok(ChannelPlane {
        channel,
        width: image.width(),
        height: image.height(),
        gray_levels,
        levels,
    })
}

/// Binary tissue selection; measurement only happens on `inside` pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TissueMask {
    width: usize,
    height: usize,
    inside: Vec<bool>,
}

impl TissueMask {
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            inside: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut inside = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                inside.push(f(x, y));
            }
        }
        Self { width, height, inside }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn is_inside(&self, x: usize, y: usize) -> bool {
        self.inside[y * self.width + x]
    }

    pub fn inside_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            inside: self.inside.iter().map(|b| !b).collect(),
        }
    }

    fn check_matches(&self, image: &RasterImage) -> Result<()> {
        if self.width != image.width() || self.height != image.height() {
            return Err(Error::DimensionMismatch {
                mask_width: self.width,
                mask_height: self.height,
                image_width: image.width(),
                image_height: image.height(),
            });
        }
        Ok(())
    }
}

/// Loads a mask raster (nonzero = tissue). Without a path every pixel is inside.
pub fn load_mask(path: Option<&Path>, image: &RasterImage) -> Result<TissueMask> {
    let Some(path) = path else {
        return Ok(TissueMask::full(image.width(), image.height()));
    };
    let raw = open_dynamic(path)?.into_rgba16();
    let mask = TissueMask {
        width: raw.width() as usize,
        height: raw.height() as usize,
        inside: raw.pixels().map(|p| p.0[..3].iter().any(|&c| c != 0)).collect(),
    };
    mask.check_matches(image)?;
    Ok(mask)
}
