//! Latent-direction probing: finds the foreground-lighter and
//! foreground-darker unit directions by minimizing a contrast plus
//! edge-consistency objective over the unit sphere.

mod objective;
mod optimize;
mod record;
mod sobel;

pub use objective::probe_objective;
pub use optimize::{
    direction_diagnostics, find_direction_pair, optimize_direction, random_pair_dot_stats,
    DiagnosticsRecord,
};
pub use record::DirectionRecord;
pub use sobel::{radial_prior, sobel_energy};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::GeneratorError;

/// Tolerance on the unit-norm invariant of [`Direction`].
pub const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("invalid probe config: {0}")]
    InvalidConfig(String),
    #[error("direction is not unit norm (norm {norm})")]
    NotUnitNorm { norm: f64 },
    #[error("empty latent batch")]
    EmptyBatch,
    #[error("image too small for the Sobel operator: {height}x{width}")]
    ImageTooSmall { height: usize, width: usize },
    #[error("non-finite loss at step {step}")]
    Diverged { step: usize },
    #[error("direction collapsed to zero norm at step {step}")]
    ZeroNorm { step: usize },
    #[error("direction record io: {0}")]
    Io(#[from] std::io::Error),
    #[error("direction record format: {0}")]
    Record(String),
}

/// Whether a direction shifts the foreground lighter or darker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Light,
    Dark,
}

/// A unit vector in latent space tagged with its brightness polarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    values: Vec<f64>,
    polarity: Polarity,
}

impl Direction {
    /// Wraps a vector that is already unit norm (within [`UNIT_NORM_TOL`]).
    pub fn new(values: Vec<f64>, polarity: Polarity) -> Result<Self, ProbeError> {
        let norm = norm2(&values);
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(ProbeError::NotUnitNorm { norm });
        }
        Ok(Self { values, polarity })
    }

    /// Normalizes an arbitrary nonzero vector onto the sphere.
    pub fn normalized(mut values: Vec<f64>, polarity: Polarity) -> Result<Self, ProbeError> {
        let norm = norm2(&values);
        if norm == 0.0 || !norm.is_finite() {
            return Err(ProbeError::NotUnitNorm { norm });
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Ok(Self { values, polarity })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Short stable identifier derived from the coefficients.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for v in &self.values {
            hasher.update(v.to_le_bytes());
        }
        let digest = hasher.finalize();
        let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
        let tag = match self.polarity {
            Polarity::Light => "light",
            Polarity::Dark => "dark",
        };
        format!("{tag}-{hex}")
    }
}

/// The two probed directions along with their cached inner product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionPair {
    v_light: Direction,
    v_dark: Direction,
    dot: f64,
}

impl DirectionPair {
    pub fn new(v_light: Direction, v_dark: Direction) -> Result<Self, ProbeError> {
        if v_light.polarity() != Polarity::Light || v_dark.polarity() != Polarity::Dark {
            return Err(ProbeError::InvalidConfig(
                "pair must combine a light and a dark direction".into(),
            ));
        }
        if v_light.dim() != v_dark.dim() {
            return Err(ProbeError::InvalidConfig(
                "directions must share a latent dimension".into(),
            ));
        }
        let dot = dot(v_light.values(), v_dark.values());
        Ok(Self { v_light, v_dark, dot })
    }

    pub fn light(&self) -> &Direction {
        &self.v_light
    }

    pub fn dark(&self) -> &Direction {
        &self.v_dark
    }

    pub fn dot(&self) -> f64 {
        self.dot
    }
}

/// Hyperparameters of the direction search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    /// Weight of the edge-consistency term.
    pub lambda_edge: f64,
    /// Latent shift magnitude used both here and at mask extraction.
    pub epsilon: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Compatibility switch: negate the edge weight for the dark direction
    /// instead of signing the contrast term.
    pub negate_lambda_compat: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            lambda_edge: 0.2,
            epsilon: 2.0,
            batch_size: 32,
            steps: 1000,
            learning_rate: 0.05,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            negate_lambda_compat: false,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<(), ProbeError> {
        if self.steps < 1 {
            return Err(ProbeError::InvalidConfig("steps must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(ProbeError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.epsilon <= 0.0 {
            return Err(ProbeError::InvalidConfig("epsilon must be positive".into()));
        }
        if self.lambda_edge < 0.0 {
            return Err(ProbeError::InvalidConfig("lambda_edge must be non-negative".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(ProbeError::InvalidConfig("learning_rate must be positive".into()));
        }
        Ok(())
    }

    /// Contrast sign and effective edge weight for a polarity.
    ///
    /// Default reading: the contrast term is signed (+1 darkens the center,
    /// -1 lightens it) while the edge weight stays non-negative. The
    /// compatibility reading instead negates the edge weight for the dark
    /// direction, as printed in the source description.
    pub(crate) fn polarity_weights(&self, polarity: Polarity) -> (f64, f64) {
        if self.negate_lambda_compat {
            match polarity {
                Polarity::Light => (1.0, self.lambda_edge),
                Polarity::Dark => (1.0, -self.lambda_edge),
            }
        } else {
            match polarity {
                Polarity::Light => (-1.0, self.lambda_edge),
                Polarity::Dark => (1.0, self.lambda_edge),
            }
        }
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests;
