//! The combined contrast + edge-consistency objective and its gradient.

use ndarray::{Array2, Array3};
use rayon::prelude::*;

use super::sobel::{radial_prior, sobel_forward, sobel_vjp};
use super::{Polarity, ProbeConfig, ProbeError};
use crate::generator::{Generator, GradientMode, LatentCode};

/// Finite-difference step used when the generator has no analytic gradient.
const FD_STEP: f64 = 1e-4;

struct SampleEval {
    loss: f64,
    grad: Option<Vec<f64>>,
}

/// Evaluates `loss = s * L_c(v) + lambda * L_s(v)` over the batch together
/// with its gradient with respect to `v`.
///
/// `L_c` is the inner product of the shifted rendering with the radial
/// prior, summed over channels; `L_s` is the squared difference of Sobel
/// energy maps before and after the shift. The gradient is analytic when
/// the generator supports it and a central finite difference otherwise.
pub fn probe_objective<G: Generator + ?Sized>(
    gen: &G,
    v: &[f64],
    batch: &[LatentCode],
    cfg: &ProbeConfig,
    polarity: Polarity,
) -> Result<(f64, Vec<f64>), ProbeError> {
    if batch.is_empty() {
        return Err(ProbeError::EmptyBatch);
    }
    let spec = gen.spec();
    let (contrast_sign, edge_weight) = cfg.polarity_weights(polarity);
    let prior = radial_prior(spec.height, spec.width);
    let analytic = spec.gradient_mode == GradientMode::Analytic;

    if analytic {
        let evals: Vec<Result<SampleEval, ProbeError>> = batch
            .par_iter()
            .map(|z| sample_loss_and_grad(gen, v, z, cfg, contrast_sign, edge_weight, &prior))
            .collect();
        let mut loss = 0.0;
        let mut grad = vec![0.0; v.len()];
        for eval in evals {
            let eval = eval?;
            loss += eval.loss;
            let g = eval.grad.expect("analytic path always yields gradients");
            for (acc, gi) in grad.iter_mut().zip(&g) {
                *acc += gi;
            }
        }
        let n = batch.len() as f64;
        loss /= n;
        grad.iter_mut().for_each(|g| *g /= n);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(ProbeError::Diverged { step: 0 });
        }
        Ok((loss, grad))
    } else {
        let loss = batch_loss(gen, v, batch, cfg, contrast_sign, edge_weight, &prior)?;
        // central finite differences per coordinate
        let mut grad = vec![0.0; v.len()];
        let mut shifted = v.to_vec();
        for k in 0..v.len() {
            shifted[k] = v[k] + FD_STEP;
            let plus = batch_loss(gen, &shifted, batch, cfg, contrast_sign, edge_weight, &prior)?;
            shifted[k] = v[k] - FD_STEP;
            let minus = batch_loss(gen, &shifted, batch, cfg, contrast_sign, edge_weight, &prior)?;
            shifted[k] = v[k];
            grad[k] = (plus - minus) / (2.0 * FD_STEP);
        }
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(ProbeError::Diverged { step: 0 });
        }
        Ok((loss, grad))
    }
}

fn batch_loss<G: Generator + ?Sized>(
    gen: &G,
    v: &[f64],
    batch: &[LatentCode],
    cfg: &ProbeConfig,
    contrast_sign: f64,
    edge_weight: f64,
    prior: &Array2<f64>,
) -> Result<f64, ProbeError> {
    let losses: Vec<Result<f64, ProbeError>> = batch
        .par_iter()
        .map(|z| {
            let shifted = gen.generate(&z.shifted(v, cfg.epsilon))?;
            let contrast = contrast_term(&shifted.data, prior);
            let edge = if edge_weight != 0.0 {
                let base = gen.generate(z)?;
                let s_base = sobel_forward(&base.data)?;
                let s_shift = sobel_forward(&shifted.data)?;
                edge_term(&s_shift.energy, &s_base.energy)
            } else {
                0.0
            };
            Ok(contrast_sign * contrast + edge_weight * edge)
        })
        .collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / batch.len() as f64)
}

fn sample_loss_and_grad<G: Generator + ?Sized>(
    gen: &G,
    v: &[f64],
    z: &LatentCode,
    cfg: &ProbeConfig,
    contrast_sign: f64,
    edge_weight: f64,
    prior: &Array2<f64>,
) -> Result<SampleEval, ProbeError> {
    let z_shift = z.shifted(v, cfg.epsilon);
    let shifted = gen.generate(&z_shift)?;
    let (c, h, w) = shifted.data.dim();

    let contrast = contrast_term(&shifted.data, prior);
    // cotangent on the shifted image: the prior, broadcast over channels
    let mut cotangent = Array3::zeros((c, h, w));
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                cotangent[[ch, i, j]] = contrast_sign * prior[[i, j]];
            }
        }
    }

    let mut loss = contrast_sign * contrast;
    if edge_weight != 0.0 {
        let base = gen.generate(z)?;
        let s_base = sobel_forward(&base.data)?;
        let s_shift = sobel_forward(&shifted.data)?;
        loss += edge_weight * edge_term(&s_shift.energy, &s_base.energy);
        // d/dE' of ||E' - E||^2, weighted
        let mut e_cot = Array2::zeros((h, w));
        for i in 0..h {
            for j in 0..w {
                e_cot[[i, j]] =
                    edge_weight * 2.0 * (s_shift.energy[[i, j]] - s_base.energy[[i, j]]);
            }
        }
        cotangent += &sobel_vjp(&s_shift, &e_cot);
    }

    let mut grad = gen.vjp(&z_shift, &cotangent)?;
    // the shift enters as z + epsilon * v
    grad.iter_mut().for_each(|g| *g *= cfg.epsilon);
    Ok(SampleEval {
        loss,
        grad: Some(grad),
    })
}

fn contrast_term(data: &Array3<f64>, prior: &Array2<f64>) -> f64 {
    let (c, h, w) = data.dim();
    let mut acc = 0.0;
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                acc += data[[ch, i, j]] * prior[[i, j]];
            }
        }
    }
    acc
}

fn edge_term(shifted: &Array2<f64>, base: &Array2<f64>) -> f64 {
    shifted
        .iter()
        .zip(base.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}
