//! Fuzzy c-means, the fuzzy partition coefficient, and canonical cluster order.

use std::cmp::Ordering;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FcmConfig {
    pub clusters: usize,
    /// Fuzziness exponent `m > 1`.
    pub fuzziness: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub n_init: usize,
    pub seed: u64,
}

impl Default for FcmConfig {
    fn default() -> Self {
        Self {
            clusters: 7,
            fuzziness: 2.0,
            tol: 1e-6,
            max_iter: 1000,
            n_init: 10,
            seed: 0,
        }
    }
}

impl FcmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clusters < 2 {
            return Err(Error::InvalidFcmConfig(format!("c = {} (need >= 2)", self.clusters)));
        }
        if !(self.fuzziness.is_finite() && self.fuzziness > 1.0) {
            return Err(Error::InvalidFcmConfig(format!("m = {} (need > 1)", self.fuzziness)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidFcmConfig(format!("tol = {}", self.tol)));
        }
        if self.max_iter == 0 || self.n_init == 0 {
            return Err(Error::InvalidFcmConfig("max_iter and n_init must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyPartition {
    /// N rows of c memberships.
    pub memberships: Vec<Vec<f64>>,
    pub centroids: Vec<Vec<f64>>,
    pub objective: f64,
    pub fpc: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FuzzyPartition {
    pub fn clusters(&self) -> usize {
        self.centroids.len()
    }
}

/// `(1/N) sum_i sum_k u_ik^2`. Each row is summed in ascending order so the
/// value does not depend on column order.
pub fn fpc(memberships: &[Vec<f64>]) -> f64 {
    if memberships.is_empty() {
        return 0.0;
    }
    let total: f64 = memberships
        .iter()
        .map(|row| {
            let mut sq: Vec<f64> = row.iter().map(|u| u * u).collect();
            sq.sort_by(f64::total_cmp);
            sq.iter().sum::<f64>()
        })
        .sum();
    total / memberships.len() as f64
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn weight(u: f64, m: f64) -> f64 {
    if m == 2.0 {
        u * u
    } else {
        u.powf(m)
    }
}

/// `J_m = sum_i sum_k u_ik^m d_ik^2`, row terms summed in ascending order.
pub fn objective(points: &[Vec<f64>], memberships: &[Vec<f64>], centroids: &[Vec<f64>], m: f64) -> f64 {
    points
        .iter()
        .zip(memberships)
        .map(|(p, row)| {
            let mut terms: Vec<f64> = row
                .iter()
                .zip(centroids)
                .map(|(&u, v)| weight(u, m) * dist2(p, v))
                .collect();
            terms.sort_by(f64::total_cmp);
            terms.iter().sum::<f64>()
        })
        .sum()
}

/// Membership row of one point. Points sitting on one or more centroids split
/// their membership equally over those centroids.
pub fn membership_row(point: &[f64], centroids: &[Vec<f64>], m: f64) -> Vec<f64> {
    let exponent = -1.0 / (m - 1.0);
    let w: Vec<f64> = centroids
        .iter()
        .map(|v| {
            let d2 = dist2(point, v);
            if d2 == 0.0 {
                f64::INFINITY
            } else if m == 2.0 {
                1.0 / d2
            } else {
                d2.powf(exponent)
            }
        })
        .collect();
    let coincident = w.iter().filter(|x| x.is_infinite()).count();
    if coincident > 0 {
        let share = 1.0 / coincident as f64;
        return w.iter().map(|x| if x.is_infinite() { share } else { 0.0 }).collect();
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// One alternating-optimization run, advanced an iteration at a time.
#[derive(Debug, Clone)]
pub struct FcmSolver<'a> {
    points: &'a [Vec<f64>],
    fuzziness: f64,
    memberships: Vec<Vec<f64>>,
    centroids: Vec<Vec<f64>>,
    objective: f64,
    iterations: usize,
}

impl<'a> FcmSolver<'a> {
    /// Starts from seeded uniform memberships, each row normalized to 1.
    pub fn new(points: &'a [Vec<f64>], clusters: usize, fuzziness: f64, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let memberships = points
            .iter()
            .map(|_| {
                let raw: Vec<f64> = (0..clusters).map(|_| 1.0 - rng.gen::<f64>()).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|u| u / s).collect()
            })
            .collect();
        Self::from_memberships(points, memberships, fuzziness)
    }

    pub fn from_memberships(points: &'a [Vec<f64>], memberships: Vec<Vec<f64>>, fuzziness: f64) -> Self {
        let c = memberships.first().map_or(0, Vec::len);
        let dim = points.first().map_or(0, Vec::len);
        Self {
            points,
            fuzziness,
            memberships,
            centroids: vec![vec![0.0; dim]; c],
            objective: f64::INFINITY,
            iterations: 0,
        }
    }

    pub fn memberships(&self) -> &[Vec<f64>] {
        &self.memberships
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn update_centroids(&mut self) {
        let m = self.fuzziness;
        let anchor = &self.points[0];
        let dim = anchor.len();
        for (k, centroid) in self.centroids.iter_mut().enumerate() {
            let mut num = vec![0.0; dim];
            let mut den = 0.0;
            for (p, row) in self.points.iter().zip(&self.memberships) {
                let w = weight(row[k], m);
                if w == 0.0 {
                    continue;
                }
                den += w;
                for ((n, x), a) in num.iter_mut().zip(p).zip(anchor) {
                    *n += w * (x - a);
                }
            }
            // A cluster with no weight keeps its previous position.
            if den > 0.0 {
                for ((c, n), a) in centroid.iter_mut().zip(&num).zip(anchor) {
                    *c = a + n / den;
                }
            }
        }
    }

    /// Centroid update followed by membership update. Returns `max |dU|`.
    pub fn step(&mut self) -> f64 {
        self.update_centroids();
        let mut delta = 0.0f64;
        for (p, row) in self.points.iter().zip(self.memberships.iter_mut()) {
            let next = membership_row(p, &self.centroids, self.fuzziness);
            for (old, new) in row.iter().zip(&next) {
                delta = delta.max((old - new).abs());
            }
            *row = next;
        }
        self.objective = objective(self.points, &self.memberships, &self.centroids, self.fuzziness);
        self.iterations += 1;
        delta
    }

    /// Iterates until `max |dU| < tol` or `max_iter` steps.
    pub fn run(mut self, tol: f64, max_iter: usize) -> FuzzyPartition {
        let mut converged = false;
        while self.iterations < max_iter {
            if self.step() < tol {
                converged = true;
                break;
            }
        }
        let fpc = fpc(&self.memberships);
        FuzzyPartition {
            memberships: self.memberships,
            centroids: self.centroids,
            objective: self.objective,
            fpc,
            iterations: self.iterations,
            converged,
        }
    }
}

fn check_points(points: &[Vec<f64>], clusters: usize) -> Result<()> {
    if points.len() < clusters {
        return Err(Error::TooFewPoints {
            points: points.len(),
            clusters,
        });
    }
    let dim = points[0].len();
    if dim == 0
        || points
            .iter()
            .any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::InvalidMatrix(
            "points must share a nonzero dimension and be finite".into(),
        ));
    }
    Ok(())
}

/// Best of `n_init` seeded runs by objective; ties go to the lowest restart.
pub fn fcm(points: &[Vec<f64>], cfg: &FcmConfig) -> Result<FuzzyPartition> {
    cfg.validate()?;
    check_points(points, cfg.clusters)?;
    let runs: Vec<FuzzyPartition> = (0..cfg.n_init as u64)
        .into_par_iter()
        .map(|r| {
            FcmSolver::new(points, cfg.clusters, cfg.fuzziness, seed::sub_seed(cfg.seed, r)).run(cfg.tol, cfg.max_iter)
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, run| if run.objective < best.objective { run } else { best })
        .expect("n_init >= 1");
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub clusters: usize,
    pub fpc: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs [`fcm`] once per cluster count, all with `cfg.seed`.
pub fn sweep_clusters(
    points: &[Vec<f64>],
    cfg: &FcmConfig,
    range: std::ops::RangeInclusive<usize>,
) -> Result<Vec<SweepEntry>> {
    let max_c = *range.end();
    check_points(points, max_c)?;
    range
        .map(|c| {
            let part = fcm(
                points,
                &FcmConfig {
                    clusters: c,
                    ..cfg.clone()
                },
            )?;
            Ok(SweepEntry {
                clusters: c,
                fpc: part.fpc,
                objective: part.objective,
                iterations: part.iterations,
                converged: part.converged,
            })
        })
        .collect()
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Permutation that sorts centroids by first component, then second, and so on.
/// `order[new] = old`.
pub fn canonical_order(centroids: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..centroids.len()).collect();
    order.sort_by(|&a, &b| lexicographic(&centroids[a], &centroids[b]).then(a.cmp(&b)));
    order
}

/// Reorders clusters into canonical order; objective and FPC are carried over.
pub fn canonicalize(partition: &FuzzyPartition) -> FuzzyPartition {
    let order = canonical_order(&partition.centroids);
    FuzzyPartition {
        memberships: partition
            .memberships
            .iter()
            .map(|row| order.iter().map(|&k| row[k]).collect())
            .collect(),
        centroids: order.iter().map(|&k| partition.centroids[k].clone()).collect(),
        ..partition.clone()
    }
}

/// Index of the largest membership in a row, lowest index on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &u) in row.iter().enumerate() {
        if u > row[best] {
            best = k;
        }
    }
    best
}

pub fn hard_assign(partition: &FuzzyPartition) -> Vec<usize> {
    partition.memberships.iter().map(|row| argmax(row)).collect()
}
