//! Projected Adam on the unit sphere, plus reporting on probed pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{dot, norm2, probe_objective, Direction, DirectionPair, Polarity, ProbeConfig, ProbeError};
use crate::adam::Adam;
use crate::generator::{sample_latent_with_rng, Generator, LatentCode};
use crate::probe::radial_prior;

/// Seeded uniform point on the unit sphere.
fn random_unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = norm2(&v);
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Minimizes the probe objective over the sphere: Adam updates with a fresh
/// latent batch per step and renormalization after every update.
/// Deterministic given `cfg.seed` under serial execution.
pub fn optimize_direction<G: Generator + ?Sized>(
    gen: &G,
    cfg: &ProbeConfig,
    polarity: Polarity,
) -> Result<Direction, ProbeError> {
    cfg.validate()?;
    let spec = gen.spec();
    let dim = spec.latent_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut v = random_unit_vector(dim, &mut rng);
    let mut adam = Adam::<f64>::new(dim, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

    for step in 0..cfg.steps {
        let batch = sample_latent_with_rng(spec, cfg.batch_size, &mut rng);
        let (loss, grad) =
            probe_objective(gen, &v, &batch, cfg, polarity).map_err(|e| match e {
                ProbeError::Diverged { .. } => ProbeError::Diverged { step },
                other => other,
            })?;
        if !loss.is_finite() {
            return Err(ProbeError::Diverged { step });
        }
        adam.update(&mut v, &grad, cfg.learning_rate);
        let norm = norm2(&v);
        if norm <= 1e-12 || !norm.is_finite() {
            return Err(ProbeError::ZeroNorm { step });
        }
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Direction::new(v, polarity)
}

/// Optimizes the light direction with `cfg.seed` and the dark direction
/// with `cfg.seed + 1`, returning both with their cached dot product.
pub fn find_direction_pair<G: Generator + ?Sized>(
    gen: &G,
    cfg: &ProbeConfig,
) -> Result<DirectionPair, ProbeError> {
    let v_light = optimize_direction(gen, cfg, Polarity::Light)?;
    let mut dark_cfg = cfg.clone();
    dark_cfg.seed = cfg.seed.wrapping_add(1);
    let v_dark = optimize_direction(gen, &dark_cfg, Polarity::Dark)?;
    DirectionPair::new(v_light, v_dark)
}

/// Shift statistics of a probed pair, measured over fresh samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub dot: f64,
    pub samples: usize,
    /// Mean per-pixel brightness change of `G(z + eps v)` against `G(z)`.
    pub mean_change_light: f64,
    pub mean_change_dark: f64,
    /// Mean center-minus-border brightness difference induced by the shift.
    pub center_border_diff_light: f64,
    pub center_border_diff_dark: f64,
}

/// Pure reporting: how strongly each direction shifts brightness and how it
/// redistributes it between the image center and border.
pub fn direction_diagnostics<G: Generator + ?Sized>(
    pair: &DirectionPair,
    gen: &G,
    n: usize,
    seed: u64,
) -> Result<DiagnosticsRecord, ProbeError> {
    if n == 0 {
        return Err(ProbeError::InvalidConfig("diagnostics need n >= 1".into()));
    }
    let spec = gen.spec();
    let epsilon = 2.0;
    let prior = radial_prior(spec.height, spec.width);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch = sample_latent_with_rng(spec, n, &mut rng);

    let mut mean_change = [0.0; 2];
    let mut center_border = [0.0; 2];
    for z in &batch {
        let base = gen.generate(z)?;
        for (slot, dir) in [pair.light(), pair.dark()].iter().enumerate() {
            let shifted = gen.generate(&z.shifted(dir.values(), epsilon))?;
            let (change, diff) = shift_stats(&base, &shifted, &prior);
            mean_change[slot] += change;
            center_border[slot] += diff;
        }
    }
    let n_f = n as f64;
    Ok(DiagnosticsRecord {
        dot: pair.dot(),
        samples: n,
        mean_change_light: mean_change[0] / n_f,
        mean_change_dark: mean_change[1] / n_f,
        center_border_diff_light: center_border[0] / n_f,
        center_border_diff_dark: center_border[1] / n_f,
    })
}

/// Returns the mean per-pixel brightness change and the change of the
/// center-minus-border mean brightness (center = positive prior region).
fn shift_stats(
    base: &crate::generator::Image,
    shifted: &crate::generator::Image,
    prior: &ndarray::Array2<f64>,
) -> (f64, f64) {
    let (c, h, w) = base.data.dim();
    let mut change = 0.0;
    let mut center = 0.0;
    let mut border = 0.0;
    let mut n_center = 0usize;
    let mut n_border = 0usize;
    for i in 0..h {
        for j in 0..w {
            let mut delta = 0.0;
            for ch in 0..c {
                delta += shifted.data[[ch, i, j]] - base.data[[ch, i, j]];
            }
            delta /= c as f64;
            change += delta;
            if prior[[i, j]] > 0.0 {
                center += delta;
                n_center += 1;
            } else {
                border += delta;
                n_border += 1;
            }
        }
    }
    let pixels = (h * w) as f64;
    let center_mean = if n_center > 0 { center / n_center as f64 } else { 0.0 };
    let border_mean = if n_border > 0 { border / n_border as f64 } else { 0.0 };
    (change / pixels, center_mean - border_mean)
}

/// Mean dot product magnitude of independently drawn unit-vector pairs;
/// the null distribution the probed pair is compared against.
pub fn random_pair_dot_stats(dim: usize, pairs: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean_abs = 0.0;
    let mut mean = 0.0;
    for _ in 0..pairs {
        let a = random_unit_vector(dim, &mut rng);
        let b = random_unit_vector(dim, &mut rng);
        let d = dot(&a, &b);
        mean += d;
        mean_abs += d.abs();
    }
    (mean / pairs as f64, mean_abs / pairs as f64)
}
