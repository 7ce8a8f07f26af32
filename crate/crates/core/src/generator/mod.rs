//! Generator abstraction: latent sampling, the differentiable toy
//! compositor, and the adapter registry for external generators.

mod toy;

pub use toy::{ToyCompositor, ToyCompositorParams};

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::masksynth::BinaryMask;

/// Generator id under which the toy compositor registers itself.
pub const TOY_GENERATOR_ID: &str = "toy-compositor-v1";

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("latent dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("latent code contains non-finite entries")]
    NonFiniteLatent,
    #[error("class label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("conditional generator requires a class label")]
    MissingLabel,
    #[error("sample count must be at least 1")]
    NonPositiveCount,
    #[error("analytic gradients are not available for this generator")]
    GradientUnavailable,
    #[error("finite-difference step must be positive")]
    NonPositiveStep,
    #[error("direction must be a unit vector (norm {norm})")]
    NotUnitNorm { norm: f64 },
    #[error("operation requires the toy compositor, got generator '{0}'")]
    NotToyGenerator(String),
    #[error("unknown generator id '{0}'")]
    UnknownGenerator(String),
    #[error("invalid generator params: {0}")]
    InvalidParams(String),
}

/// How gradients of the generator are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    Analytic,
    FiniteDifference,
}

/// Static description of a generator's latent and image geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub latent_dim: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Closed interval of image intensities, canonically [-1, 1].
    pub value_range: (f64, f64),
    pub conditional: bool,
    /// 0 if unconditional.
    pub num_classes: usize,
    pub gradient_mode: GradientMode,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.latent_dim < 2 {
            return Err(GeneratorError::InvalidSpec("latent_dim must be >= 2".into()));
        }
        if self.height < 8 || self.width < 8 {
            return Err(GeneratorError::InvalidSpec("height and width must be >= 8".into()));
        }
        if self.channels != 3 {
            return Err(GeneratorError::InvalidSpec("channels must be 3".into()));
        }
        if self.value_range.0 >= self.value_range.1 {
            return Err(GeneratorError::InvalidSpec("empty value range".into()));
        }
        if self.conditional && self.num_classes < 2 {
            return Err(GeneratorError::InvalidSpec(
                "conditional generators need num_classes >= 2".into(),
            ));
        }
        Ok(())
    }
}

/// A point in the generator's latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCode {
    pub values: Vec<f64>,
    pub class_label: Option<usize>,
}

impl LatentCode {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            class_label: None,
        }
    }

    pub fn with_label(values: Vec<f64>, label: usize) -> Self {
        Self {
            values,
            class_label: Some(label),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// The code shifted by `scale * direction`, keeping the class label.
    pub fn shifted(&self, direction: &[f64], scale: f64) -> Self {
        assert_eq!(self.values.len(), direction.len());
        Self {
            values: self
                .values
                .iter()
                .zip(direction)
                .map(|(z, v)| z + scale * v)
                .collect(),
            class_label: self.class_label,
        }
    }
}

/// A generated image, stored as `(C, H, W)` with values in the generator's
/// value range.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub data: Array3<f64>,
}

impl Image {
    pub fn new(data: Array3<f64>) -> Self {
        Self { data }
    }

    pub fn channels(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }
}

/// Validates that a latent code matches a generator spec.
pub fn check_latent(spec: &GeneratorSpec, z: &LatentCode) -> Result<(), GeneratorError> {
    if z.values.len() != spec.latent_dim {
        return Err(GeneratorError::DimensionMismatch {
            expected: spec.latent_dim,
            got: z.values.len(),
        });
    }
    if z.values.iter().any(|v| !v.is_finite()) {
        return Err(GeneratorError::NonFiniteLatent);
    }
    if spec.conditional {
        match z.class_label {
            None => return Err(GeneratorError::MissingLabel),
            Some(label) if label >= spec.num_classes => {
                return Err(GeneratorError::LabelOutOfRange {
                    label,
                    num_classes: spec.num_classes,
                })
            }
            _ => {}
        }
    }
    Ok(())
}

/// A differentiable map from latent codes to images.
///
/// Implementations must be pure: identical codes produce bit-identical
/// images, and evaluation is safe from multiple threads.
pub trait Generator: Send + Sync {
    fn spec(&self) -> &GeneratorSpec;

    /// Stable identifier of this generator instance (id plus parameter hash).
    fn fingerprint(&self) -> String;

    fn generate(&self, z: &LatentCode) -> Result<Image, GeneratorError>;

    /// Vector-Jacobian product: pulls an image-shaped cotangent back to a
    /// latent-space gradient. Only available in analytic gradient mode.
    fn vjp(&self, z: &LatentCode, cotangent: &Array3<f64>) -> Result<Vec<f64>, GeneratorError> {
        let _ = (z, cotangent);
        Err(GeneratorError::GradientUnavailable)
    }

    /// Jacobian-vector product: pushes a latent tangent forward to an
    /// image-shaped directional derivative. Only in analytic mode.
    fn jvp(&self, z: &LatentCode, tangent: &[f64]) -> Result<Array3<f64>, GeneratorError> {
        let _ = (z, tangent);
        Err(GeneratorError::GradientUnavailable)
    }

    /// Ground-truth foreground mask, for generators that carry one.
    fn oracle_mask(&self, z: &LatentCode) -> Option<BinaryMask> {
        let _ = z;
        None
    }
}

/// Draws `count` latent codes with i.i.d. standard-normal entries using the
/// given RNG; conditional specs get uniform class labels.
pub fn sample_latent_with_rng<R: Rng>(
    spec: &GeneratorSpec,
    count: usize,
    rng: &mut R,
) -> Vec<LatentCode> {
    (0..count)
        .map(|_| {
            let values: Vec<f64> = (0..spec.latent_dim).map(|_| rng.sample(StandardNormal)).collect();
            let class_label = if spec.conditional {
                Some(rng.random_range(0..spec.num_classes))
            } else {
                None
            };
            LatentCode { values, class_label }
        })
        .collect()
}

/// Seeded latent sampling; deterministic given `seed`.
pub fn sample_latent(
    spec: &GeneratorSpec,
    count: usize,
    seed: u64,
) -> Result<Vec<LatentCode>, GeneratorError> {
    if count == 0 {
        return Err(GeneratorError::NonPositiveCount);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_latent_with_rng(spec, count, &mut rng))
}

/// Oracle foreground mask of the toy compositor; errors for other generators.
pub fn toy_oracle_mask<G: Generator + ?Sized>(
    gen: &G,
    z: &LatentCode,
) -> Result<BinaryMask, GeneratorError> {
    gen.oracle_mask(z)
        .ok_or_else(|| GeneratorError::NotToyGenerator(gen.fingerprint()))
}

/// Compares the analytic directional derivative of `gen` at `z` along the
/// unit direction `v` against a central finite difference with step `h`,
/// returning the relative error in Frobenius norm.
pub fn directional_derivative_check<G: Generator + ?Sized>(
    gen: &G,
    z: &LatentCode,
    v: &[f64],
    h: f64,
) -> Result<f64, GeneratorError> {
    if gen.spec().gradient_mode != GradientMode::Analytic {
        return Err(GeneratorError::GradientUnavailable);
    }
    if h <= 0.0 {
        return Err(GeneratorError::NonPositiveStep);
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(GeneratorError::NotUnitNorm { norm });
    }
    let analytic = gen.jvp(z, v)?;
    let plus = gen.generate(&z.shifted(v, h))?;
    let minus = gen.generate(&z.shifted(v, -h))?;
    let mut diff_sq = 0.0;
    let mut ref_sq = 0.0;
    for ((a, p), m) in analytic.iter().zip(plus.data.iter()).zip(minus.data.iter()) {
        let fd = (p - m) / (2.0 * h);
        diff_sq += (a - fd) * (a - fd);
        ref_sq += fd * fd;
    }
    Ok(diff_sq.sqrt() / ref_sq.sqrt().max(f64::MIN_POSITIVE))
}

type GeneratorFactory =
    Box<dyn Fn(&serde_json::Value) -> Result<Box<dyn Generator>, GeneratorError> + Send + Sync>;

/// Name-indexed registry of in-process generator adapters.
pub struct GeneratorRegistry {
    factories: BTreeMap<String, GeneratorFactory>,
}

impl GeneratorRegistry {
    /// Registry pre-populated with the built-in toy compositor.
    pub fn with_builtins() -> Self {
        let mut reg = Self {
            factories: BTreeMap::new(),
        };
        reg.register(TOY_GENERATOR_ID, |params| {
            let params: ToyCompositorParams = serde_json::from_value(params.clone())
                .map_err(|e| GeneratorError::InvalidParams(e.to_string()))?;
            Ok(Box::new(ToyCompositor::new(params)?) as Box<dyn Generator>)
        });
        reg
    }

    pub fn register<F>(&mut self, id: &str, factory: F)
    where
        F: Fn(&serde_json::Value) -> Result<Box<dyn Generator>, GeneratorError>
            + Send
            + Sync
            + 'static,
    {
        self.factories.insert(id.to_string(), Box::new(factory));
    }

    pub fn create(
        &self,
        id: &str,
        params: &serde_json::Value,
    ) -> Result<Box<dyn Generator>, GeneratorError> {
        let factory = self
            .factories
            .get(id)
            .ok_or_else(|| GeneratorError::UnknownGenerator(id.to_string()))?;
        factory(params)
    }
}

#[cfg(test)]
mod tests;
