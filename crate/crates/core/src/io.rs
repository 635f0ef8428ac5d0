//! CSV and JSON stage artifacts.
//!
//! Reals are written with 17 significant digits so every value round-trips.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::clustering::{FuzzyPartition, SweepEntry};
use crate::error::{Error, Result};
use crate::evaluation::AnnotationRecord;
use crate::reduction::{FeatureMatrix, ReducedMatrix, ReductionInfo};
use crate::texture::{feature_columns, FeatureVector, FEATURE_COUNT};

pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_err(what: &str, reason: impl std::fmt::Display) -> Error {
    Error::Parse {
        what: what.to_string(),
        reason: reason.to_string(),
    }
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec
        .get(idx)
        .ok_or_else(|| parse_err(what, format!("missing column {idx}")))?;
    raw.trim()
        .parse()
        .map_err(|e| parse_err(what, format!("column {idx} value {raw:?}: {e}")))
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[String], what: &str) -> Result<()> {
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != expected {
        return Err(parse_err(what, format!("header {header:?}, expected {expected:?}")));
    }
    Ok(())
}

pub fn features_header() -> Vec<String> {
    let mut cols = vec!["tile_id".to_string(), "cx_px".into(), "cy_px".into()];
    cols.extend(feature_columns());
    cols
}

pub fn write_features(out: impl Write, rows: &[FeatureVector]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(features_header())?;
    for r in rows {
        let mut rec = vec![r.tile_id.to_string(), r.cx.to_string(), r.cy.to_string()];
        rec.extend(r.values.iter().map(|&v| fmt_real(v)));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features(input: impl Read) -> Result<Vec<FeatureVector>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(&mut rdr, &features_header(), "features.csv")?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let mut values = [0.0; FEATURE_COUNT];
        for (k, v) in values.iter_mut().enumerate() {
            *v = field(&rec, 3 + k, "features.csv")?;
        }
        rows.push(FeatureVector {
            tile_id: field(&rec, 0, "features.csv")?,
            cx: field(&rec, 1, "features.csv")?,
            cy: field(&rec, 2, "features.csv")?,
            values,
        });
    }
    Ok(rows)
}

pub fn feature_matrix(rows: &[FeatureVector]) -> Result<FeatureMatrix> {
    let ids = rows.iter().map(|r| r.tile_id).collect();
    let data: Vec<Vec<f64>> = rows.iter().map(|r| r.values.to_vec()).collect();
    FeatureMatrix::from_rows(ids, &data)
}

pub fn write_reduced(out: impl Write, reduced: &ReducedMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["tile_id".to_string()];
    header.extend((1..=reduced.scores.ncols()).map(|k| format!("c{k}")));
    w.write_record(header)?;
    for (i, id) in reduced.tile_ids.iter().enumerate() {
        let mut rec = vec![id.to_string()];
        rec.extend(reduced.scores.row(i).iter().map(|&v| fmt_real(v)));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reduced scores as `(tile_ids, points)`.
pub fn read_reduced(input: impl Read) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.get(0).map(str::trim) != Some("tile_id") || header.len() < 2 {
        return Err(parse_err("reduced.csv", "expected tile_id, c1, ... header"));
    }
    let dims = header.len() - 1;
    let mut ids = Vec::new();
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        ids.push(field(&rec, 0, "reduced.csv")?);
        points.push(
            (1..=dims)
                .map(|k| field(&rec, k, "reduced.csv"))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok((ids, points))
}

pub fn write_json<T: Serialize>(out: impl Write, value: &T) -> Result<()> {
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(input: impl Read) -> Result<T> {
    Ok(serde_json::from_reader(input)?)
}

pub fn write_reduction_info(out: impl Write, info: &ReductionInfo) -> Result<()> {
    write_json(out, info)
}

pub fn write_clusters(out: impl Write, tile_ids: &[usize], partition: &FuzzyPartition, labels: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["tile_id".to_string(), "label".into()];
    header.extend((0..partition.clusters()).map(|k| format!("u_{k}")));
    w.write_record(header)?;
    for ((id, label), row) in tile_ids.iter().zip(labels).zip(&partition.memberships) {
        let mut rec = vec![id.to_string(), label.to_string()];
        rec.extend(row.iter().map(|&u| fmt_real(u)));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRow {
    pub tile_id: usize,
    pub label: usize,
    pub memberships: Vec<f64>,
}

pub fn read_clusters(input: impl Read) -> Result<Vec<ClusterRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("tile_id") || header.get(1) != Some("label") {
        return Err(parse_err("clusters.csv", "expected tile_id, label, u_0, ... header"));
    }
    let c = header.len() - 2;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(ClusterRow {
            tile_id: field(&rec, 0, "clusters.csv")?,
            label: field(&rec, 1, "clusters.csv")?,
            memberships: (0..c)
                .map(|k| field(&rec, 2 + k, "clusters.csv"))
                .collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}

/// Sidecar for clusters.csv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub clusters: usize,
    pub fuzziness: f64,
    pub seed: u64,
    pub centroids: Vec<Vec<f64>>,
    pub objective: f64,
    pub fpc: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn write_sweep(out: impl Write, entries: &[SweepEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["c", "fpc", "objective", "iterations", "converged"])?;
    for e in entries {
        w.write_record([
            e.clusters.to_string(),
            fmt_real(e.fpc),
            fmt_real(e.objective),
            e.iterations.to_string(),
            e.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep(input: impl Read) -> Result<Vec<SweepEntry>> {
    let mut rdr = csv::Reader::from_reader(input);
    let expected: Vec<String> = ["c", "fpc", "objective", "iterations", "converged"]
        .map(String::from)
        .to_vec();
    check_header(&mut rdr, &expected, "fpc.csv")?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(SweepEntry {
            clusters: field(&rec, 0, "fpc.csv")?,
            fpc: field(&rec, 1, "fpc.csv")?,
            objective: field(&rec, 2, "fpc.csv")?,
            iterations: field(&rec, 3, "fpc.csv")?,
            converged: field(&rec, 4, "fpc.csv")?,
        });
    }
    Ok(out)
}

/// Two-column `(c, fpc)` curve, ascending in `c`.
pub fn render_fpc_curve(out: impl Write, entries: &[SweepEntry]) -> Result<()> {
    if entries.is_empty() {
        return Err(Error::MissingData("empty sweep".into()));
    }
    let mut sorted = entries.to_vec();
    sorted.sort_by_key(|e| e.clusters);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["c", "fpc"])?;
    for e in &sorted {
        w.write_record([e.clusters.to_string(), fmt_real(e.fpc)])?;
    }
    w.flush()?;
    Ok(())
}

pub const ANNOTATION_HEADER: [&str; 6] = ["evaluator_id", "weight", "tile_id", "strength", "pattern", "class_id"];

/// Reads annotations.csv. The `class_id` column is optional and only used on
/// class-level rows (`tile_id = -1`).
pub fn read_annotations(input: impl Read) -> Result<Vec<AnnotationRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header.len() < 5 || header[..5] != ANNOTATION_HEADER[..5] {
        return Err(parse_err("annotations.csv", format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec.map_err(|e| parse_err("annotations.csv", e))?);
    }
    Ok(out)
}

pub fn write_annotations(out: impl Write, records: &[AnnotationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ANNOTATION_HEADER)?;
    for r in records {
        w.write_record([
            r.evaluator_id.clone(),
            r.weight.to_string(),
            r.tile_id.to_string(),
            r.strength.to_string(),
            r.pattern.to_string(),
            r.class_id.map(|c| c.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
