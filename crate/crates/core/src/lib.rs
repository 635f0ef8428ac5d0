//! Texture-based classification of chromogenic in-situ hybridization slide
//! images: circular tiling, Haralick features on the HSB brightness and
//! saturation planes, SVD/PCA reduction, fuzzy c-means and expert evaluation.

pub mod clustering;
pub mod error;
pub mod evaluation;
pub mod imaging;
pub mod io;
pub mod reduction;
pub mod rendering;
pub mod seed;
pub mod texture;
pub mod tiling;

pub use error::{Error, Result};
