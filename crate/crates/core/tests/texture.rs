mod support;

use cishtex_core::imaging::{Channel, ChannelPlane, RasterImage, TissueMask};
use cishtex_core::seed;
use cishtex_core::texture::{
    compute_glcm, extract_features, haralick_features, Direction, Glcm, TextureParams, HARALICK_COUNT,
};
use cishtex_core::tiling::{Tile, TileSpec};
use cishtex_core::Error;
use proptest::prelude::*;
use rand::Rng;

use support::{close, haralick_oracle, random_glcm};

fn glcm(g: usize, p: Vec<f64>) -> Glcm {
    Glcm::from_probabilities(g, p).unwrap()
}

fn glcm_strategy() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (
        prop::sample::select(vec![2usize, 3, 8, 16, 127]),
        any::<u64>(),
        0.02f64..1.0,
    )
        .prop_map(|(g, s, density)| {
            let mut rng = seed::rng(s);
            (g, random_glcm(&mut rng, g, density))
        })
}

#[test]
fn features_match_naive_oracle() {
    let mut rng = seed::rng(0x61c3);
    for case in 0..100 {
        let g = [2, 8, 127][case % 3];
        let density = [1.0, 0.3, 0.02][case / 3 % 3];
        let p = random_glcm(&mut rng, g, density);
        let got = haralick_features(&glcm(g, p.clone()));
        let want = haralick_oracle::features(g, &p);
        for k in 0..HARALICK_COUNT {
            assert!(
                close(got[k], want[k], 1e-10),
                "case {case} G={g} F{k}: {} vs {}",
                got[k],
                want[k]
            );
        }
    }
}

#[test]
fn diagonal_example() {
    let f = haralick_features(&glcm(2, vec![0.5, 0.0, 0.0, 0.5]));
    assert_eq!(f[0], 0.5);
    assert_eq!(f[1], 0.0);
    assert_eq!(f[2], 1.0);
    assert_eq!(f[4], 1.0);
    assert!((f[8] - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn anti_diagonal_example() {
    let f = haralick_features(&glcm(2, vec![0.0, 0.5, 0.5, 0.0]));
    assert_eq!(f[0], 0.5);
    assert_eq!(f[1], 1.0);
    assert_eq!(f[2], -1.0);
    assert_eq!(f[4], 0.5);
}

#[test]
fn constant_tile_example() {
    let mut p = vec![0.0; 127 * 127];
    p[0] = 1.0;
    let f = haralick_features(&glcm(127, p));
    assert_eq!(f[0], 1.0);
    assert_eq!(f[1], 0.0);
    assert_eq!(f[2], 0.0);
    assert_eq!(f[8], 0.0);
    assert_eq!(f[11], 0.0);
    assert_eq!(f[12], 0.0);
}

proptest! {
    #[test]
    fn reversal_invariance((g, p) in glcm_strategy()) {
        let mut rev = vec![0.0; g * g];
        for i in 0..g {
            for j in 0..g {
                rev[(g - 1 - i) * g + (g - 1 - j)] = p[i * g + j];
            }
        }
        let a = haralick_features(&glcm(g, p));
        let b = haralick_features(&glcm(g, rev));
        for k in [0, 1, 3, 4, 6, 7, 8, 9, 10] {
            prop_assert!(close(a[k], b[k], 1e-9), "F{k}: {} vs {}", a[k], b[k]);
        }
        prop_assert!(close(a[2].abs(), b[2].abs(), 1e-9));
    }

    #[test]
    fn feature_bounds((g, p) in glcm_strategy()) {
        let f = haralick_features(&glcm(g, p));
        prop_assert!(f[0] > 0.0 && f[0] <= 1.0);
        prop_assert!(f[1] >= 0.0);
        prop_assert!((-1.0..=1.0).contains(&f[2]));
        prop_assert!(f[4] > 0.0 && f[4] <= 1.0);
        prop_assert!(f[8] >= 0.0);
        prop_assert!((0.0..1.0).contains(&f[12]));
    }

    #[test]
    fn unit_asm_iff_single_entry((g, p) in glcm_strategy(), single in any::<bool>(), at in 0usize..127) {
        let p = if single {
            let mut q = vec![0.0; g * g];
            q[(at % g) * (g + 1)] = 1.0;
            q
        } else {
            p
        };
        let nonzero = p.iter().filter(|&&v| v > 0.0).count();
        let f = haralick_features(&glcm(g, p));
        prop_assert_eq!(f[0] == 1.0, nonzero == 1);
    }
}

fn random_plane(rng: &mut rand_chacha::ChaCha8Rng, w: usize, h: usize, g: usize) -> ChannelPlane {
    let levels = (0..w * h).map(|_| rng.gen_range(0..g) as u16).collect();
    ChannelPlane::from_levels(Channel::Brightness, w, h, g, levels).unwrap()
}

fn random_mask(rng: &mut rand_chacha::ChaCha8Rng, w: usize, h: usize) -> TissueMask {
    let keep: f64 = rng.gen_range(0.3..1.0);
    let cells: Vec<bool> = (0..w * h).map(|_| rng.gen::<f64>() < keep).collect();
    TissueMask::from_fn(w, h, |x, y| cells[y * w + x])
}

/// Every ordered member pair at each offset, counted over the whole image.
fn brute_force_counts(
    plane: &ChannelPlane,
    mask: &TissueMask,
    tile: &Tile,
    d: usize,
    dirs: &[Direction],
) -> (Vec<u64>, u64) {
    let g = plane.gray_levels();
    let mut counts = vec![0u64; g * g];
    let mut pairs = 0;
    for y in 0..plane.height() as isize {
        for x in 0..plane.width() as isize {
            for dir in dirs {
                let (dx, dy) = dir.offset(d);
                let (x2, y2) = (x + dx, y + dy);
                if x2 < 0 || y2 < 0 {
                    continue;
                }
                let (a, b) = ((x as usize, y as usize), (x2 as usize, y2 as usize));
                if tile.contains(mask, a.0, a.1) && tile.contains(mask, b.0, b.1) {
                    let (la, lb) = (plane.level(a.0, a.1) as usize, plane.level(b.0, b.1) as usize);
                    counts[la * g + lb] += 1;
                    counts[lb * g + la] += 1;
                    pairs += 1;
                }
            }
        }
    }
    (counts, pairs)
}

#[test]
fn glcm_normalized_and_symmetric_on_random_tiles() {
    let mut rng = seed::rng(7);
    let start = std::time::Instant::now();
    let mut checked = 0;
    while checked < 1000 {
        let g = [2, 8, 127][checked % 3];
        let (w, h) = (rng.gen_range(8..40), rng.gen_range(8..40));
        let plane = random_plane(&mut rng, w, h, g);
        let mask = random_mask(&mut rng, w, h);
        let tile = Tile::new(
            checked,
            rng.gen_range(0..w),
            rng.gen_range(0..h),
            rng.gen_range(1.0..12.0),
        );
        let d = rng.gen_range(1..3);
        let m = match compute_glcm(&plane, &mask, &tile, d, &Direction::ALL) {
            Ok(m) => m,
            Err(Error::NoValidPairs { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        let total: f64 = m.as_slice().iter().sum();
        assert!((total - 1.0).abs() <= 1e-9, "sum {total}");
        for i in 0..g {
            for j in 0..g {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
        checked += 1;
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn glcm_matches_brute_force_pair_count() {
    let mut rng = seed::rng(8);
    for case in 0..60 {
        let g = [2, 5, 16][case % 3];
        let plane = random_plane(&mut rng, 30, 25, g);
        let mask = random_mask(&mut rng, 30, 25);
        let tile = Tile::new(0, rng.gen_range(0..30), rng.gen_range(0..25), rng.gen_range(2.0..14.0));
        let d = rng.gen_range(1..4);
        let dirs: Vec<Direction> = Direction::ALL.into_iter().filter(|_| rng.gen_bool(0.6)).collect();
        if dirs.is_empty() {
            continue;
        }
        let (counts, pairs) = brute_force_counts(&plane, &mask, &tile, d, &dirs);
        match compute_glcm(&plane, &mask, &tile, d, &dirs) {
            Ok(m) => {
                for (got, &c) in m.as_slice().iter().zip(&counts) {
                    assert_eq!(*got, c as f64 / (2 * pairs) as f64);
                }
            }
            Err(Error::NoValidPairs { .. }) => assert_eq!(pairs, 0),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn pixels_outside_mask_do_not_matter() {
    let mut rng = seed::rng(9);
    let a = random_plane(&mut rng, 30, 30, 8);
    let mask = random_mask(&mut rng, 30, 30);
    let levels: Vec<u16> = a
        .levels()
        .iter()
        .enumerate()
        .map(|(i, &l)| if mask.is_inside(i % 30, i / 30) { l } else { 7 - l })
        .collect();
    let b = ChannelPlane::from_levels(Channel::Brightness, 30, 30, 8, levels).unwrap();
    let tile = Tile::new(0, 15, 15, 12.0);
    assert_eq!(
        compute_glcm(&a, &mask, &tile, 1, &Direction::ALL).unwrap(),
        compute_glcm(&b, &mask, &tile, 1, &Direction::ALL).unwrap()
    );
}

#[test]
fn lone_member_pixel_has_no_pairs() {
    let plane = ChannelPlane::from_levels(Channel::Saturation, 3, 3, 2, vec![0; 9]).unwrap();
    let tile = Tile::new(4, 1, 1, 1.0);
    let mask = TissueMask::from_fn(3, 3, |x, y| (x, y) == (1, 1));
    assert!(matches!(
        compute_glcm(&plane, &mask, &tile, 1, &Direction::ALL),
        Err(Error::NoValidPairs { tile_id: 4 })
    ));
}

fn image_600(f: impl Fn(usize, usize) -> [u8; 3]) -> RasterImage {
    RasterImage::from_fn(600, 600, 0.5, f).unwrap()
}

#[test]
fn four_tiles_on_600px_image() {
    let img = image_600(|x, y| [(x % 251) as u8, (y % 239) as u8, 90]);
    let ex = extract_features(
        &img,
        &TissueMask::full(600, 600),
        &TileSpec::default(),
        &TextureParams::default(),
    )
    .unwrap();
    assert_eq!(
        ex.features.iter().map(|f| f.tile_id).collect::<Vec<_>>(),
        vec![0, 1, 2, 3]
    );
    assert_eq!(
        ex.features.iter().map(|f| (f.cx, f.cy)).collect::<Vec<_>>(),
        vec![(150, 150), (350, 150), (150, 350), (350, 350)]
    );
    assert!(ex.skipped.is_empty());
}

#[test]
fn uniform_image_is_a_single_gray_pair() {
    let img = image_600(|_, _| [120, 60, 180]);
    let ex = extract_features(
        &img,
        &TissueMask::full(600, 600),
        &TileSpec::default(),
        &TextureParams::default(),
    )
    .unwrap();
    for fv in &ex.features {
        for channel in 0..2 {
            let f = &fv.values[channel * HARALICK_COUNT..(channel + 1) * HARALICK_COUNT];
            assert_eq!(f[0], 1.0);
            assert_eq!(f[1], 0.0);
            assert_eq!(f[2], 0.0);
            assert_eq!(f[8], 0.0);
        }
    }
}

#[test]
fn horizontal_checkerboard_contrast() {
    let img = image_600(|x, y| if (x + y) % 2 == 0 { [0, 0, 0] } else { [255, 255, 255] });
    let params = TextureParams {
        directions: vec![Direction::Deg0],
        ..TextureParams::default()
    };
    let ex = extract_features(&img, &TissueMask::full(600, 600), &TileSpec::default(), &params).unwrap();
    for fv in &ex.features {
        // Brightness alternates between levels 0 and 126 along every row.
        assert_eq!(fv.values[1], 126.0 * 126.0);
        assert_eq!(fv.values[4], 1.0 / (1.0 + 126.0 * 126.0));
        assert_eq!(fv.values[2], -1.0);
        // Black and white are both unsaturated.
        assert_eq!(fv.values[HARALICK_COUNT], 1.0);
    }
}

#[test]
fn parallel_extraction_equals_single_thread() {
    let mut rng = seed::rng(10);
    let noise: Vec<[u8; 3]> = (0..400 * 400).map(|_| rng.gen()).collect();
    let img = RasterImage::new(400, 400, noise, 0.5).unwrap();
    let mask = TissueMask::from_fn(400, 400, |x, y| (x / 50 + y / 70) % 4 != 0);
    let spec = TileSpec {
        diameter_um: 40.0,
        step_um: 30.0,
        ..TileSpec::default()
    };
    let run = || extract_features(&img, &mask, &spec, &TextureParams::default()).unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(run);
    let multi = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(run);
    assert_eq!(single.features, multi.features);
    assert_eq!(single.tiles, multi.tiles);
}
