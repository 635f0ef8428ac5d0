//! Two-dimensional embedding of the feature matrix by truncated SVD or PCA.
//!
//! Both paths share one sign convention: every loading vector is flipped so
//! that its largest-magnitude entry is positive (lowest index on ties).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionMethod {
    Svd,
    Pca,
}

impl std::str::FromStr for ReductionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svd" => Ok(Self::Svd),
            "pca" => Ok(Self::Pca),
            other => Err(Error::Parse {
                what: "reduction method".into(),
                reason: format!("expected svd or pca, got {other:?}"),
            }),
        }
    }
}

/// Tiles x features, rows in tile order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    tile_ids: Vec<usize>,
    data: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(tile_ids: Vec<usize>, data: DMatrix<f64>) -> Result<Self> {
        if tile_ids.len() != data.nrows() {
            return Err(Error::InvalidMatrix(format!(
                "{} tile ids for {} rows",
                tile_ids.len(),
                data.nrows()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("feature matrix contains non-finite values".into()));
        }
        Ok(Self { tile_ids, data })
    }

    pub fn from_rows(tile_ids: Vec<usize>, rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::InvalidMatrix("ragged feature rows".into()));
        }
        let data = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
        Self::new(tile_ids, data)
    }

    pub fn tile_ids(&self) -> &[usize] {
        &self.tile_ids
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionInfo {
    pub method: ReductionMethod,
    pub components: usize,
    /// SVD only: the leading singular values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub singular_values: Option<Vec<f64>>,
    /// PCA only: fraction of total variance per kept component.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explained_variance: Option<Vec<f64>>,
    /// PCA only: whether columns were scaled to unit sample variance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standardized: Option<bool>,
    /// PCA only: column means and scales applied before projection.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column_means: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column_scales: Option<Vec<f64>>,
    #[serde(default)]
    pub zero_variance_columns: Vec<usize>,
    /// One loading vector per component.
    pub loadings: Vec<Vec<f64>>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Tiles x components scores with the metadata of the method that made them.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedMatrix {
    pub tile_ids: Vec<usize>,
    pub scores: DMatrix<f64>,
    pub info: ReductionInfo,
}

impl ReducedMatrix {
    /// Scores as row vectors, the layout the clustering stage consumes.
    pub fn points(&self) -> Vec<Vec<f64>> {
        self.scores.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

/// Flips `v` so its largest-magnitude entry is positive.
pub fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn check_shape(x: &FeatureMatrix, k: usize) -> Result<()> {
    if x.nrows() < 2 {
        return Err(Error::InvalidMatrix(format!("need at least 2 rows, got {}", x.nrows())));
    }
    let max_k = x.nrows().min(x.ncols());
    if k == 0 || k > max_k {
        return Err(Error::InvalidMatrix(format!(
            "cannot keep {k} components of a {}x{} matrix",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

fn project(data: &DMatrix<f64>, loadings: &[Vec<f64>], zero: &[bool]) -> DMatrix<f64> {
    DMatrix::from_fn(data.nrows(), loadings.len(), |i, c| {
        if zero[c] {
            0.0
        } else {
            data.row(i).iter().zip(&loadings[c]).map(|(a, b)| a * b).sum()
        }
    })
}

/// Truncated SVD of the raw, uncentered matrix. Scores are `X V_k = U_k S_k`.
pub fn svd_reduce(x: &FeatureMatrix, k: usize) -> Result<ReducedMatrix> {
    check_shape(x, k)?;
    let svd = x.data.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let tol = x.nrows().max(x.ncols()) as f64 * f64::EPSILON * sv[order[0]];
    let mut singular_values = Vec::with_capacity(k);
    let mut loadings = Vec::with_capacity(k);
    let mut zero = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut v: Vec<f64> = v_t.row(idx).iter().copied().collect();
        orient(&mut v);
        let negligible = sv[idx] <= tol;
        singular_values.push(if negligible { 0.0 } else { sv[idx] });
        zero.push(negligible);
        loadings.push(v);
    }
    let scores = project(&x.data, &loadings, &zero);
    Ok(ReducedMatrix {
        tile_ids: x.tile_ids.clone(),
        scores,
        info: ReductionInfo {
            method: ReductionMethod::Svd,
            components: k,
            singular_values: Some(singular_values),
            explained_variance: None,
            standardized: None,
            column_means: None,
            column_scales: None,
            zero_variance_columns: Vec::new(),
            loadings,
            warnings: Vec::new(),
        },
    })
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matching unit eigenvectors, unsorted.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let frob2: f64 = a.iter().map(|x| x * x).sum();

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off == 0.0 || off <= 1e-32 * frob2 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[(i, i)]).collect();
    let vectors = (0..n).map(|j| v.column(j).iter().copied().collect()).collect();
    (values, vectors)
}

/// PCA on centered (and by default standardized) columns via the eigenvectors
/// of the sample covariance.
pub fn pca_reduce(x: &FeatureMatrix, k: usize, standardize: bool) -> Result<ReducedMatrix> {
    check_shape(x, k)?;
    let (n, d) = (x.nrows(), x.ncols());
    let mut z = x.data.clone();
    let mut means = vec![0.0; d];
    let mut scales = vec![1.0; d];
    let mut zero_variance_columns = Vec::new();
    let mut warnings = Vec::new();

    for j in 0..d {
        // Shifted mean: identical entries centre to exactly zero.
        let anchor = z[(0, j)];
        let shift: f64 = z.column(j).iter().map(|v| v - anchor).sum::<f64>() / n as f64;
        let mean = anchor + shift;
        means[j] = mean;
        let mut ss = 0.0;
        for i in 0..n {
            let c = (z[(i, j)] - anchor) - shift;
            z[(i, j)] = c;
            ss += c * c;
        }
        let sd = (ss / (n - 1) as f64).sqrt();
        if sd == 0.0 || sd <= 16.0 * f64::EPSILON * mean.abs() {
            zero_variance_columns.push(j);
            z.column_mut(j).fill(0.0);
            scales[j] = 0.0;
        } else if standardize {
            scales[j] = sd;
            z.column_mut(j).iter_mut().for_each(|v| *v /= sd);
        }
    }
    if !zero_variance_columns.is_empty() {
        warnings.push(format!(
            "{} zero-variance column(s) left centered: {:?}",
            zero_variance_columns.len(),
            zero_variance_columns
        ));
    }

    let cov = (z.transpose() * &z) / (n - 1) as f64;
    let total: f64 = cov.diagonal().iter().sum();
    let (values, vectors) = symmetric_eigen(&cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let top = values[order[0]].max(0.0);
    let tol = d as f64 * f64::EPSILON * top;
    let mut loadings = Vec::with_capacity(k);
    let mut explained = Vec::with_capacity(k);
    let mut zero = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut v = vectors[idx].clone();
        orient(&mut v);
        let lambda = values[idx].max(0.0);
        let negligible = lambda <= tol;
        zero.push(negligible);
        explained.push(if total > 0.0 && !negligible {
            lambda / total
        } else {
            0.0
        });
        loadings.push(v);
    }
    if total <= 0.0 {
        warnings.push("total variance is zero; explained variance undefined, reported as 0".into());
        log::warn!("PCA input has zero total variance");
    }
    let scores = project(&z, &loadings, &zero);
    Ok(ReducedMatrix {
        tile_ids: x.tile_ids.clone(),
        scores,
        info: ReductionInfo {
            method: ReductionMethod::Pca,
            components: k,
            singular_values: None,
            explained_variance: Some(explained),
            standardized: Some(standardize),
            column_means: Some(means),
            column_scales: Some(scales),
            zero_variance_columns,
            loadings,
            warnings,
        },
    })
}

pub fn reduce(x: &FeatureMatrix, method: ReductionMethod, k: usize, standardize: bool) -> Result<ReducedMatrix> {
    match method {
        ReductionMethod::Svd => svd_reduce(x, k),
        ReductionMethod::Pca => pca_reduce(x, k, standardize),
    }
}
