//! Mask extraction from direction-shifted image pairs, refinement filters,
//! and synthetic-dataset materialization.

mod components;
mod dataset;
mod extract;
mod refine;

pub use components::{remove_small_components, Connectivity};
pub use dataset::{
    load_training_images, synthesize_dataset, DatasetManifest, SampleEntry, TrainingPair,
};
pub use extract::{extract_mask, MaskDirections};
pub use refine::{refine, RefineOutcome, RejectReason};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::{GeneratorError, Image, LatentCode};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("epsilon must be positive")]
    NonPositiveEpsilon,
    #[error("n_accepted must be at least 1")]
    NoSamplesRequested,
    #[error("invalid refine config: {0}")]
    InvalidRefineConfig(String),
    #[error(
        "acceptance rate {rate:.4} too low: {accepted}/{attempts} accepted \
         (area: {rejected_area}, low-contrast: {rejected_contrast}) within the attempt budget"
    )]
    LowAcceptanceRate {
        accepted: usize,
        attempts: usize,
        rate: f64,
        rejected_area: usize,
        rejected_contrast: usize,
    },
    #[error("dataset io: {0}")]
    Io(#[from] std::io::Error),
    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),
    #[error("manifest: {0}")]
    Manifest(String),
}

/// Binary foreground mask, `1` = foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    data: Array2<u8>,
}

impl BinaryMask {
    pub fn new(data: Array2<u8>) -> Self {
        debug_assert!(data.iter().all(|&v| v <= 1));
        Self { data }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            data: Array2::zeros((height, width)),
        }
    }

    pub fn data(&self) -> &Array2<u8> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<u8> {
        &mut self.data
    }

    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    pub fn count_foreground(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn foreground_fraction(&self) -> f64 {
        self.count_foreground() as f64 / (self.height() * self.width()) as f64
    }
}

/// Thresholds controlling dataset refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    /// Reject masks whose foreground fraction exceeds this.
    pub max_area_fraction: f64,
    /// Reject samples whose mean |delta| falls below this (canonical
    /// intensity units).
    pub min_mean_abs_change: f64,
    /// Remove connected components smaller than this fraction of the image.
    pub min_component_fraction: f64,
    pub connectivity: Connectivity,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            max_area_fraction: 0.5,
            min_mean_abs_change: 0.1,
            min_component_fraction: 0.001,
            connectivity: Connectivity::Four,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.max_area_fraction > 0.0 && self.max_area_fraction <= 1.0) {
            return Err(SynthError::InvalidRefineConfig(
                "max_area_fraction must lie in (0, 1]".into(),
            ));
        }
        if self.min_mean_abs_change < 0.0 {
            return Err(SynthError::InvalidRefineConfig(
                "min_mean_abs_change must be non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.min_component_fraction) {
            return Err(SynthError::InvalidRefineConfig(
                "min_component_fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Provenance carried by every synthetic sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub direction_fingerprints: Vec<String>,
    pub epsilon: f64,
    /// Attempt index the sample was drawn at (seeds its latent).
    pub attempt: usize,
    /// Foreground pixels removed by the component filter.
    pub components_removed_pixels: usize,
}

/// One synthetic training sample: image, mask and provenance.
#[derive(Debug, Clone)]
pub struct MaskedSample {
    pub image: Image,
    pub mask: BinaryMask,
    pub latent: LatentCode,
    pub meta: SampleMeta,
}

#[cfg(test)]
mod tests;
