//! Binary mask extraction from direction-shifted renderings.

use ndarray::Array2;

use super::{BinaryMask, SynthError};
use crate::generator::{Generator, LatentCode};
use crate::probe::{Direction, DirectionPair, Polarity};

/// Which latent direction(s) drive the brightness difference.
#[derive(Debug, Clone, Copy)]
pub enum MaskDirections<'a> {
    /// Both directions: delta between the lighter and darker shift.
    Pair(&'a DirectionPair),
    /// A single direction, differenced against the unshifted rendering.
    Single(&'a Direction),
}

/// Extracts the foreground mask for `z`.
///
/// `delta` is the channel-mean brightness difference; the mask is its
/// positive part, with ties (delta == 0) resolved to background.
pub fn extract_mask<G: Generator + ?Sized>(
    gen: &G,
    z: &LatentCode,
    directions: MaskDirections<'_>,
    epsilon: f64,
) -> Result<(BinaryMask, Array2<f64>), SynthError> {
    if epsilon <= 0.0 {
        return Err(SynthError::NonPositiveEpsilon);
    }
    let (lighter, darker) = match directions {
        MaskDirections::Pair(pair) => (
            gen.generate(&z.shifted(pair.light().values(), epsilon))?,
            gen.generate(&z.shifted(pair.dark().values(), epsilon))?,
        ),
        MaskDirections::Single(dir) => match dir.polarity() {
            Polarity::Light => (
                gen.generate(&z.shifted(dir.values(), epsilon))?,
                gen.generate(z)?,
            ),
            Polarity::Dark => (
                gen.generate(z)?,
                gen.generate(&z.shifted(dir.values(), epsilon))?,
            ),
        },
    };

    let (c, h, w) = lighter.data.dim();
    let mut delta = Array2::<f64>::zeros((h, w));
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                delta[[i, j]] += lighter.data[[ch, i, j]] - darker.data[[ch, i, j]];
            }
        }
    }
    delta.mapv_inplace(|v| v / c as f64);

    Ok((threshold_delta(&delta), delta))
}

/// `delta > 0` becomes foreground; zero and negative stay background.
pub(crate) fn threshold_delta(delta: &Array2<f64>) -> BinaryMask {
    BinaryMask::new(delta.mapv(|v| u8::from(v > 0.0)))
}
