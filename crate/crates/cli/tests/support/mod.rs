#![allow(dead_code)]

use std::path::{Path, PathBuf};

use cishtex_cli::RunConfig;
use cishtex_core::imaging::RasterImage;
use cishtex_core::seed::splitmix64;
use cishtex_core::tiling::TileSpec;

/// Purple-ish speckle whose intensity varies smoothly along x, so tiles differ.
pub fn speckle_image(w: usize, h: usize, seed: u64) -> RasterImage {
    RasterImage::from_fn(w, h, 0.5, |x, y| {
        let r = splitmix64(seed ^ (y * w + x) as u64);
        let base = 60 + (120 * x / w) as u64;
        let jitter = r % 60;
        let v = (base + jitter) as u8;
        [v, (v as u64 * 2 / 3) as u8, 200u8.saturating_sub((r >> 8) as u8 % 40)]
    })
    .unwrap()
}

pub fn save_png(image: &RasterImage, path: &Path) {
    image.to_rgb_image().save(path).unwrap();
}

/// Config pointing at a fresh speckle PNG inside `dir`.
pub fn fixture_config(dir: &Path, w: usize, h: usize) -> RunConfig {
    let image_path = dir.join("slide.png");
    save_png(&speckle_image(w, h, 11), &image_path);
    RunConfig {
        image: Some(image_path),
        output_dir: dir.join("out"),
        seed: 42,
        ..RunConfig::default()
    }
}

/// Small tiles over a 300 x 300 image: a 5 x 5 lattice of 25 tiles.
pub fn many_tiles_config(dir: &Path) -> RunConfig {
    let mut cfg = fixture_config(dir, 300, 300);
    cfg.tile = TileSpec {
        diameter_um: 50.0,
        step_um: 25.0,
        ..TileSpec::default()
    };
    cfg.clustering.clusters = 3;
    cfg
}

pub fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}
