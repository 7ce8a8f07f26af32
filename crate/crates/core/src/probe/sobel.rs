//! Sobel-Feldman edge energy and the radial contrast prior.

use ndarray::{Array2, Array3, ArrayView2};

use super::ProbeError;
use crate::generator::Image;

/// Horizontal-derivative kernel: smoothing [1,2,1] (vertical) times
/// derivative [1,0,-1] (horizontal). The vertical kernel is its transpose.
const KX: [[f64; 3]; 3] = [[1.0, 0.0, -1.0], [2.0, 0.0, -2.0], [1.0, 0.0, -1.0]];
const KY: [[f64; 3]; 3] = [[1.0, 2.0, 1.0], [0.0, 0.0, 0.0], [-1.0, -2.0, -1.0]];

/// Mirror index without repeating the border pixel.
#[inline]
fn reflect(i: i64, len: usize) -> usize {
    let len = len as i64;
    let r = if i < 0 {
        -i
    } else if i >= len {
        2 * len - 2 - i
    } else {
        i
    };
    r as usize
}

fn correlate3x3(plane: ArrayView2<'_, f64>, kernel: &[[f64; 3]; 3]) -> Array2<f64> {
    let (h, w) = plane.dim();
    let mut out = Array2::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for (di, row) in kernel.iter().enumerate() {
                let si = reflect(i as i64 + di as i64 - 1, h);
                for (dj, &kv) in row.iter().enumerate() {
                    if kv == 0.0 {
                        continue;
                    }
                    let sj = reflect(j as i64 + dj as i64 - 1, w);
                    acc += kv * plane[[si, sj]];
                }
            }
            out[[i, j]] = acc;
        }
    }
    out
}

/// Adjoint of [`correlate3x3`]: scatters through the same reflected taps.
fn correlate3x3_adjoint(cotangent: ArrayView2<'_, f64>, kernel: &[[f64; 3]; 3]) -> Array2<f64> {
    let (h, w) = cotangent.dim();
    let mut out = Array2::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            let g = cotangent[[i, j]];
            if g == 0.0 {
                continue;
            }
            for (di, row) in kernel.iter().enumerate() {
                let si = reflect(i as i64 + di as i64 - 1, h);
                for (dj, &kv) in row.iter().enumerate() {
                    if kv == 0.0 {
                        continue;
                    }
                    let sj = reflect(j as i64 + dj as i64 - 1, w);
                    out[[si, sj]] += kv * g;
                }
            }
        }
    }
    out
}

/// Per-channel Sobel responses cached for the backward pass.
pub(crate) struct SobelCache {
    pub gx: Array3<f64>,
    pub gy: Array3<f64>,
    pub energy: Array2<f64>,
}

pub(crate) fn sobel_forward(data: &Array3<f64>) -> Result<SobelCache, ProbeError> {
    let (c, h, w) = data.dim();
    if h < 3 || w < 3 {
        return Err(ProbeError::ImageTooSmall { height: h, width: w });
    }
    let mut gx = Array3::zeros((c, h, w));
    let mut gy = Array3::zeros((c, h, w));
    let mut energy = Array2::zeros((h, w));
    for ch in 0..c {
        let plane = data.index_axis(ndarray::Axis(0), ch);
        let rx = correlate3x3(plane, &KX);
        let ry = correlate3x3(plane, &KY);
        for i in 0..h {
            for j in 0..w {
                energy[[i, j]] += rx[[i, j]] * rx[[i, j]] + ry[[i, j]] * ry[[i, j]];
            }
        }
        gx.index_axis_mut(ndarray::Axis(0), ch).assign(&rx);
        gy.index_axis_mut(ndarray::Axis(0), ch).assign(&ry);
    }
    Ok(SobelCache { gx, gy, energy })
}

/// Pulls a cotangent on the energy map back to an image-shaped cotangent.
pub(crate) fn sobel_vjp(cache: &SobelCache, cotangent: &Array2<f64>) -> Array3<f64> {
    let (c, h, w) = cache.gx.dim();
    let mut out = Array3::zeros((c, h, w));
    for ch in 0..c {
        let mut wx = Array2::zeros((h, w));
        let mut wy = Array2::zeros((h, w));
        for i in 0..h {
            for j in 0..w {
                let g = cotangent[[i, j]];
                wx[[i, j]] = 2.0 * g * cache.gx[[ch, i, j]];
                wy[[i, j]] = 2.0 * g * cache.gy[[ch, i, j]];
            }
        }
        let bx = correlate3x3_adjoint(wx.view(), &KX);
        let by = correlate3x3_adjoint(wy.view(), &KY);
        let mut plane = out.index_axis_mut(ndarray::Axis(0), ch);
        plane += &bx;
        plane += &by;
    }
    out
}

/// Per-pixel channel-summed squared Sobel response, same size as the input,
/// with reflect padding at the borders.
pub fn sobel_energy(image: &Image) -> Result<Array2<f64>, ProbeError> {
    Ok(sobel_forward(&image.data)?.energy)
}

/// Radial contrast prior: exactly 1 at the center of an odd-sized image and
/// exactly -1 at the corners, decaying quadratically with distance.
pub fn radial_prior(height: usize, width: usize) -> Array2<f64> {
    assert!(height >= 2 && width >= 2, "radial prior needs H, W >= 2");
    let hc = (height as f64 + 1.0) / 2.0;
    let wc = (width as f64 + 1.0) / 2.0;
    let alpha = ((height as f64 - 1.0).powi(2) + (width as f64 - 1.0).powi(2)) / 8.0;
    Array2::from_shape_fn((height, width), |(i, j)| {
        // 1-based pixel coordinates
        let di = (i as f64 + 1.0) - hc;
        let dj = (j as f64 + 1.0) - wc;
        1.0 - (di * di + dj * dj) / alpha
    })
}
