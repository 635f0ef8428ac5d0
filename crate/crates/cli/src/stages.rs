//! Pipeline stages. Each stage reads its predecessor's files from the output
//! directory and writes its own artifacts atomically.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use cishtex_core::clustering::{canonicalize, fcm, hard_assign, sweep_clusters};
use cishtex_core::evaluation::{self, EvaluationReport, SampleCandidate, SampleManifest};
use cishtex_core::imaging::{load_image, load_mask, RasterImage, TissueMask};
use cishtex_core::io::{self as cio, ClusterRow, ClusterSummary};
use cishtex_core::reduction::reduce as reduce_matrix;
use cishtex_core::rendering::{encode_png, render_class_map, render_legend, tile_crop, Palette};
use cishtex_core::seed::stage_seed;
use cishtex_core::texture::{extract_features, FeatureVector};
use cishtex_core::tiling::Tile;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const FEATURES: &str = "features.csv";
pub const EXTRACT_META: &str = "features.json";
pub const REDUCED: &str = "reduced.csv";
pub const REDUCED_META: &str = "reduced.json";
pub const CLUSTERS: &str = "clusters.csv";
pub const CLUSTERS_META: &str = "clusters.json";
pub const FPC: &str = "fpc.csv";
pub const FPC_CURVE: &str = "fpc_curve.csv";
pub const CLASS_MAP: &str = "class_map.png";
pub const LEGEND: &str = "legend.png";
pub const MANIFEST: &str = "manifest.json";
pub const REPORT: &str = "report.json";
pub const RUN_MANIFEST: &str = "run_manifest.json";

const LEGEND_SWATCH_PX: u32 = 32;

/// What a stage wrote, relative to the output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: String,
    pub files: Vec<String>,
    pub counts: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
}

impl StageReport {
    fn new(stage: &str) -> Self {
        Self {
            stage: stage.into(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Serialize)]
struct ExtractSummary {
    tiles: usize,
    features: usize,
    skipped: Vec<usize>,
    radius_px: f64,
    pitch_px: f64,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    #[serde(flatten)]
    evaluation: &'a EvaluationReport,
    warnings: &'a [String],
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    stage_seeds: BTreeMap<&'static str, u64>,
    stages: &'a [StageReport],
    files: Vec<FileDigest>,
    warnings: Vec<String>,
}

/// Writes `path` through a temporary file in the same directory, then renames it.
fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> cishtex_core::Result<()>,
{
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, |w| Ok(w.write_all(bytes)?))
}

fn open_input(path: &Path) -> Result<BufReader<File>> {
    if !path.is_file() {
        return Err(CliError::StageInputMissing(path.to_path_buf()));
    }
    Ok(BufReader::new(File::open(path)?))
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn load_inputs(cfg: &RunConfig) -> Result<(RasterImage, TissueMask)> {
    let image = load_image(cfg.require_image()?, cfg.pixel_size_um)?;
    let mask = load_mask(cfg.mask.as_deref(), &image)?;
    Ok((image, mask))
}

fn read_features(cfg: &RunConfig) -> Result<Vec<FeatureVector>> {
    Ok(cio::read_features(open_input(&out_path(cfg, FEATURES))?)?)
}

fn read_clusters(cfg: &RunConfig) -> Result<Vec<ClusterRow>> {
    Ok(cio::read_clusters(open_input(&out_path(cfg, CLUSTERS))?)?)
}

/// Tile geometry recovered from features.csv, paired with cluster labels.
fn labelled_tiles(
    cfg: &RunConfig,
    features: &[FeatureVector],
    clusters: &[ClusterRow],
) -> Result<(Vec<Tile>, Vec<usize>)> {
    let radius = cfg.tile.radius_px(cfg.pixel_size_um);
    let geometry: BTreeMap<usize, (usize, usize)> = features.iter().map(|f| (f.tile_id, (f.cx, f.cy))).collect();
    let mut tiles = Vec::with_capacity(clusters.len());
    let mut labels = Vec::with_capacity(clusters.len());
    for row in clusters {
        let &(cx, cy) = geometry
            .get(&row.tile_id)
            .ok_or_else(|| CliError::Core(cishtex_core::Error::UnknownTile(row.tile_id as i64)))?;
        tiles.push(Tile::new(row.tile_id, cx, cy, radius));
        labels.push(row.label);
    }
    Ok((tiles, labels))
}

pub fn extract(cfg: &RunConfig) -> Result<StageReport> {
    cfg.validate()?;
    let (image, mask) = load_inputs(cfg)?;
    let ex = extract_features(&image, &mask, &cfg.tile, &cfg.texture_params())?;
    write_atomic(&out_path(cfg, FEATURES), |w| cio::write_features(w, &ex.features))?;
    let summary = ExtractSummary {
        tiles: ex.tiles.len(),
        features: ex.features.len(),
        skipped: ex.skipped.clone(),
        radius_px: cfg.tile.radius_px(cfg.pixel_size_um),
        pitch_px: cfg.tile.pitch_px(cfg.pixel_size_um),
    };
    write_atomic(&out_path(cfg, EXTRACT_META), |w| cio::write_json(w, &summary))?;

    let mut report = StageReport::new("extract");
    report.files = vec![FEATURES.into(), EXTRACT_META.into()];
    report.counts.insert("tiles".into(), ex.tiles.len());
    report.counts.insert("features".into(), ex.features.len());
    report.counts.insert("skipped".into(), ex.skipped.len());
    report.warnings.extend(
        ex.skipped
            .iter()
            .map(|id| format!("tile {id} has no valid pixel pairs, skipped")),
    );
    Ok(report)
}

pub fn reduce(cfg: &RunConfig) -> Result<StageReport> {
    cfg.validate()?;
    let features = read_features(cfg)?;
    let matrix = cio::feature_matrix(&features)?;
    let r = &cfg.reduction;
    let reduced = reduce_matrix(&matrix, r.method, r.components, r.standardize)?;
    write_atomic(&out_path(cfg, REDUCED), |w| cio::write_reduced(w, &reduced))?;
    write_atomic(&out_path(cfg, REDUCED_META), |w| {
        cio::write_reduction_info(w, &reduced.info)
    })?;

    let mut report = StageReport::new("reduce");
    report.files = vec![REDUCED.into(), REDUCED_META.into()];
    report.counts.insert("rows".into(), reduced.tile_ids.len());
    report.counts.insert("components".into(), reduced.scores.ncols());
    report.warnings = reduced.info.warnings.clone();
    Ok(report)
}

pub fn cluster(cfg: &RunConfig) -> Result<StageReport> {
    cfg.validate()?;
    let (tile_ids, points) = cio::read_reduced(open_input(&out_path(cfg, REDUCED))?)?;
    let seed = stage_seed(cfg.seed, "cluster");
    let fcm_cfg = cfg.fcm_config(cfg.clustering.clusters, seed);
    let partition = canonicalize(&fcm(&points, &fcm_cfg)?);
    let labels = hard_assign(&partition);
    write_atomic(&out_path(cfg, CLUSTERS), |w| {
        cio::write_clusters(w, &tile_ids, &partition, &labels)
    })?;
    let summary = ClusterSummary {
        clusters: partition.clusters(),
        fuzziness: fcm_cfg.fuzziness,
        seed,
        centroids: partition.centroids.clone(),
        objective: partition.objective,
        fpc: partition.fpc,
        iterations: partition.iterations,
        converged: partition.converged,
    };
    write_atomic(&out_path(cfg, CLUSTERS_META), |w| cio::write_json(w, &summary))?;

    let mut report = StageReport::new("cluster");
    report.files = vec![CLUSTERS.into(), CLUSTERS_META.into()];
    report.counts.insert("rows".into(), tile_ids.len());
    report.counts.insert("clusters".into(), partition.clusters());
    if !partition.converged {
        report.warnings.push(format!(
            "clustering stopped at max_iter = {} before converging",
            fcm_cfg.max_iter
        ));
    }
    Ok(report)
}

pub fn sweep(cfg: &RunConfig) -> Result<StageReport> {
    cfg.validate()?;
    let (_, points) = cio::read_reduced(open_input(&out_path(cfg, REDUCED))?)?;
    let fcm_cfg = cfg.fcm_config(cfg.clustering.clusters, stage_seed(cfg.seed, "cluster"));
    let entries = sweep_clusters(&points, &fcm_cfg, cfg.sweep.min_clusters..=cfg.sweep.max_clusters)?;
    write_atomic(&out_path(cfg, FPC), |w| cio::write_sweep(w, &entries))?;
    write_atomic(&out_path(cfg, FPC_CURVE), |w| cio::render_fpc_curve(w, &entries))?;

    let mut report = StageReport::new("sweep");
    report.files = vec![FPC.into(), FPC_CURVE.into()];
    report.counts.insert("rows".into(), entries.len());
    report.warnings.extend(
        entries
            .iter()
            .filter(|e| !e.converged)
            .map(|e| format!("c = {} did not converge", e.clusters)),
    );
    Ok(report)
}

pub fn render(cfg: &RunConfig) -> Result<StageReport> {
    cfg.validate()?;
    let features = read_features(cfg)?;
    let clusters = read_clusters(cfg)?;
    let (image, mask) = load_inputs(cfg)?;
    let (tiles, labels) = labelled_tiles(cfg, &features, &clusters)?;
    let palette = Palette::default();
    let map = render_class_map(&image, &mask, &tiles, &labels, &palette)?;
    write_bytes(&out_path(cfg, CLASS_MAP), &encode_png(&map)?)?;
    let classes = clusters.first().map_or(0, |r| r.memberships.len());
    let legend = render_legend(classes, &palette, LEGEND_SWATCH_PX);
    write_bytes(&out_path(cfg, LEGEND), &encode_png(&legend)?)?;

    let mut report = StageReport::new("render");
    report.files = vec![CLASS_MAP.into(), LEGEND.into()];
    report.counts.insert("tiles".into(), tiles.len());
    if classes > palette.len() {
        report
            .warnings
            .push(format!("{classes} classes share a {}-colour palette", palette.len()));
    }
    Ok(report)
}

pub fn sample(cfg: &RunConfig) -> Result<StageReport> {
    cfg.validate()?;
    let features = read_features(cfg)?;
    let clusters = read_clusters(cfg)?;
    let (image, mask) = load_inputs(cfg)?;
    let (tiles, labels) = labelled_tiles(cfg, &features, &clusters)?;
    let candidates: Vec<SampleCandidate> = tiles
        .iter()
        .zip(&labels)
        .map(|(t, &class)| {
            let (x0, y0, x1, y1) = t.bbox(image.width(), image.height());
            SampleCandidate {
                tile_id: t.tile_id,
                class,
                bbox: [x0, y0, x1, y1],
            }
        })
        .collect();
    let manifest = evaluation::sample_tiles(&candidates, cfg.sampling.per_class, stage_seed(cfg.seed, "sample"));

    let by_id: BTreeMap<usize, &Tile> = tiles.iter().map(|t| (t.tile_id, t)).collect();
    let mut files = Vec::with_capacity(manifest.tiles.len() + 1);
    for entry in &manifest.tiles {
        let crop = tile_crop(&image, &mask, by_id[&entry.tile_id]);
        write_bytes(&cfg.output_dir.join(&entry.image_path), &encode_png(&crop)?)?;
        files.push(entry.image_path.clone());
    }
    write_atomic(&out_path(cfg, MANIFEST), |w| cio::write_json(w, &manifest))?;
    files.insert(0, MANIFEST.into());

    let mut report = StageReport::new("sample");
    report.files = files;
    report.counts.insert("sampled".into(), manifest.tiles.len());
    report.warnings = manifest.warnings.clone();
    Ok(report)
}

pub fn aggregate(cfg: &RunConfig) -> Result<StageReport> {
    cfg.validate()?;
    let path = cfg
        .annotations
        .as_deref()
        .ok_or_else(|| CliError::ConfigInvalid("no annotations path configured".into()))?;
    let records = cio::read_annotations(open_input(path)?)?;
    let manifest: SampleManifest = cio::read_json(open_input(&out_path(cfg, MANIFEST))?)?;

    let labels: BTreeMap<i64, usize> = manifest
        .tiles
        .iter()
        .map(|e| (e.tile_id as i64, e.hidden_class))
        .collect();
    let known: BTreeSet<i64> = labels.keys().copied().collect();
    let classes: BTreeSet<usize> = labels.values().copied().collect();
    let tile_grades = evaluation::aggregate(&records, Some(&known))?;
    let class_grades = evaluation::grade_classes(&records, &classes)?;
    let evaluation = evaluation::confusion(&tile_grades, &class_grades, &labels)?;

    let graded: BTreeSet<i64> = tile_grades.iter().map(|g| g.tile_id).collect();
    let warnings: Vec<String> = known
        .difference(&graded)
        .map(|id| format!("tile {id} in the manifest has no annotations"))
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    let report_body = Report {
        evaluation: &evaluation,
        warnings: &warnings,
    };
    write_atomic(&out_path(cfg, REPORT), |w| cio::write_json(w, &report_body))?;

    let mut report = StageReport::new("aggregate");
    report.files = vec![REPORT.into()];
    report
        .counts
        .insert("annotated_tiles".into(), evaluation.annotated_tiles);
    report.warnings = warnings;
    Ok(report)
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// extract, reduce, cluster, render and sample in order, then the run manifest.
pub fn pipeline(cfg: &RunConfig) -> Result<Vec<StageReport>> {
    cfg.validate()?;
    cfg.require_image()?;
    let stages: [fn(&RunConfig) -> Result<StageReport>; 5] = [extract, reduce, cluster, render, sample];
    let mut reports = Vec::with_capacity(stages.len());
    for stage in stages {
        let report = stage(cfg)?;
        log::info!("{} wrote {} file(s)", report.stage, report.files.len());
        reports.push(report);
    }

    let mut paths: Vec<&String> = reports.iter().flat_map(|r| &r.files).collect();
    paths.sort();
    let files = paths
        .into_iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.clone(),
                sha256: sha256_file(&cfg.output_dir.join(p))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        tool: "cishtex",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        stage_seeds: [
            ("cluster", stage_seed(cfg.seed, "cluster")),
            ("sample", stage_seed(cfg.seed, "sample")),
        ]
        .into_iter()
        .collect(),
        stages: &reports,
        files,
        warnings: reports.iter().flat_map(|r| r.warnings.iter().cloned()).collect(),
    };
    write_atomic(&out_path(cfg, RUN_MANIFEST), |w| cio::write_json(w, &manifest))?;
    Ok(reports)
}
