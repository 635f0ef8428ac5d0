use std::path::{Path, PathBuf};

use cishtex_core::clustering::FcmConfig;
use cishtex_core::imaging::{DEFAULT_GRAY_LEVELS, DEFAULT_PIXEL_SIZE_UM};
use cishtex_core::reduction::ReductionMethod;
use cishtex_core::texture::{Direction, TextureParams};
use cishtex_core::tiling::TileSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReductionConfig {
    pub method: ReductionMethod,
    pub components: usize,
    pub standardize: bool,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        Self {
            method: ReductionMethod::Pca,
            components: 2,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub clusters: usize,
    pub fuzziness: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub n_init: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        let d = FcmConfig::default();
        Self {
            clusters: d.clusters,
            fuzziness: d.fuzziness,
            tol: d.tol,
            max_iter: d.max_iter,
            n_init: d.n_init,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub min_clusters: usize,
    pub max_clusters: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            min_clusters: 2,
            max_clusters: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub per_class: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { per_class: 10 }
    }
}

/// Every parameter of a run. The JSON config file mirrors these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub image: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub pixel_size_um: f64,
    pub tile: TileSpec,
    pub gray_levels: usize,
    pub distance: usize,
    pub directions: Vec<Direction>,
    pub reduction: ReductionConfig,
    pub clustering: ClusteringConfig,
    pub sweep: SweepConfig,
    pub sampling: SamplingConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            image: None,
            mask: None,
            annotations: None,
            pixel_size_um: DEFAULT_PIXEL_SIZE_UM,
            tile: TileSpec::default(),
            gray_levels: DEFAULT_GRAY_LEVELS,
            distance: 1,
            directions: Direction::ALL.to_vec(),
            reduction: ReductionConfig::default(),
            clustering: ClusteringConfig::default(),
            sweep: SweepConfig::default(),
            sampling: SamplingConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::ConfigInvalid(msg.into())
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))
    }

    pub fn texture_params(&self) -> TextureParams {
        TextureParams {
            gray_levels: self.gray_levels,
            distance: self.distance,
            directions: self.directions.clone(),
        }
    }

    pub fn fcm_config(&self, clusters: usize, seed: u64) -> FcmConfig {
        FcmConfig {
            clusters,
            fuzziness: self.clustering.fuzziness,
            tol: self.clustering.tol,
            max_iter: self.clustering.max_iter,
            n_init: self.clustering.n_init,
            seed,
        }
    }

    pub fn require_image(&self) -> Result<&Path> {
        self.image.as_deref().ok_or_else(|| invalid("no image path configured"))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pixel_size_um.is_finite() && self.pixel_size_um > 0.0) {
            return Err(invalid(format!("pixel_size_um = {}", self.pixel_size_um)));
        }
        self.tile.validate().map_err(|e| invalid(e.to_string()))?;
        if self.gray_levels < 2 || self.gray_levels > u16::MAX as usize + 1 {
            return Err(invalid(format!("gray_levels = {}", self.gray_levels)));
        }
        if self.distance == 0 {
            return Err(invalid("distance must be at least 1"));
        }
        if self.directions.is_empty() {
            return Err(invalid("at least one direction is required"));
        }
        if self.reduction.components == 0 {
            return Err(invalid("reduction.components must be positive"));
        }
        self.fcm_config(self.clustering.clusters, 0)
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        if self.sweep.min_clusters < 2 || self.sweep.min_clusters > self.sweep.max_clusters {
            return Err(invalid(format!(
                "sweep range [{}..{}] is empty or starts below 2",
                self.sweep.min_clusters, self.sweep.max_clusters
            )));
        }
        if self.sampling.per_class == 0 {
            return Err(invalid("sampling.per_class must be positive"));
        }
        Ok(())
    }
}
