//! Bilinear resampling with half-pixel alignment, plus its adjoint.
//!
//! The same kernel backs the UNet's 2x down/up-sampling (a factor-2
//! downsample degenerates to 2x2 averaging), inference-time resolution
//! adaptation, and evaluation-time mask resizing. The adjoint applies the
//! exact transpose of the forward interpolation, which is what the
//! backward pass needs.

use ndarray::{Array2, Array3, ArrayView2, ArrayView3};

use crate::element::Element;

/// Source taps for one output coordinate: indices and interpolation weight.
#[derive(Clone, Copy)]
struct Tap {
    lo: usize,
    hi: usize,
    w_hi: f64,
}

fn taps(src_len: usize, dst_len: usize) -> Vec<Tap> {
    let scale = src_len as f64 / dst_len as f64;
    (0..dst_len)
        .map(|d| {
            let pos = (d as f64 + 0.5) * scale - 0.5;
            let clamped = pos.clamp(0.0, (src_len - 1) as f64);
            let lo = clamped.floor() as usize;
            let hi = (lo + 1).min(src_len - 1);
            Tap {
                lo,
                hi,
                w_hi: clamped - lo as f64,
            }
        })
        .collect()
}

/// Resample a single plane to `(out_h, out_w)`.
pub fn resize_plane<T: Element>(src: ArrayView2<'_, T>, out_h: usize, out_w: usize) -> Array2<T> {
    let (h, w) = src.dim();
    assert!(h > 0 && w > 0 && out_h > 0 && out_w > 0);
    if h == out_h && w == out_w {
        return src.to_owned();
    }
    let ty = taps(h, out_h);
    let tx = taps(w, out_w);
    let mut out = Array2::<T>::zeros((out_h, out_w));
    for (oy, t_y) in ty.iter().enumerate() {
        let wy1 = T::from_f64(t_y.w_hi);
        let wy0 = T::one() - wy1;
        for (ox, t_x) in tx.iter().enumerate() {
            let wx1 = T::from_f64(t_x.w_hi);
            let wx0 = T::one() - wx1;
            let v = src[[t_y.lo, t_x.lo]] * wy0 * wx0
                + src[[t_y.lo, t_x.hi]] * wy0 * wx1
                + src[[t_y.hi, t_x.lo]] * wy1 * wx0
                + src[[t_y.hi, t_x.hi]] * wy1 * wx1;
            out[[oy, ox]] = v;
        }
    }
    out
}

/// Adjoint of [`resize_plane`]: scatters an `(out_h, out_w)` cotangent back
/// to a `(src_h, src_w)` plane using the transposed interpolation weights.
pub fn resize_plane_adjoint<T: Element>(
    cotangent: ArrayView2<'_, T>,
    src_h: usize,
    src_w: usize,
) -> Array2<T> {
    let (out_h, out_w) = cotangent.dim();
    if src_h == out_h && src_w == out_w {
        return cotangent.to_owned();
    }
    let ty = taps(src_h, out_h);
    let tx = taps(src_w, out_w);
    let mut out = Array2::<T>::zeros((src_h, src_w));
    for (oy, t_y) in ty.iter().enumerate() {
        let wy1 = T::from_f64(t_y.w_hi);
        let wy0 = T::one() - wy1;
        for (ox, t_x) in tx.iter().enumerate() {
            let wx1 = T::from_f64(t_x.w_hi);
            let wx0 = T::one() - wx1;
            let g = cotangent[[oy, ox]];
            out[[t_y.lo, t_x.lo]] += g * wy0 * wx0;
            out[[t_y.lo, t_x.hi]] += g * wy0 * wx1;
            out[[t_y.hi, t_x.lo]] += g * wy1 * wx0;
            out[[t_y.hi, t_x.hi]] += g * wy1 * wx1;
        }
    }
    out
}

/// Resample every channel of a `(C, H, W)` stack.
pub fn resize_chw<T: Element>(src: ArrayView3<'_, T>, out_h: usize, out_w: usize) -> Array3<T> {
    let (c, h, w) = src.dim();
    if h == out_h && w == out_w {
        return src.to_owned();
    }
    let mut out = Array3::<T>::zeros((c, out_h, out_w));
    for ch in 0..c {
        out.index_axis_mut(ndarray::Axis(0), ch)
            .assign(&resize_plane(src.index_axis(ndarray::Axis(0), ch), out_h, out_w));
    }
    out
}

/// Adjoint of [`resize_chw`].
pub fn resize_chw_adjoint<T: Element>(
    cotangent: ArrayView3<'_, T>,
    src_h: usize,
    src_w: usize,
) -> Array3<T> {
    let (c, _, _) = cotangent.dim();
    let mut out = Array3::<T>::zeros((c, src_h, src_w));
    for ch in 0..c {
        out.index_axis_mut(ndarray::Axis(0), ch).assign(&resize_plane_adjoint(
            cotangent.index_axis(ndarray::Axis(0), ch),
            src_h,
            src_w,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn factor_two_downsample_is_block_average() {
        let src = Array2::from_shape_fn((4, 4), |(i, j)| (i * 4 + j) as f64);
        let out = resize_plane(src.view(), 2, 2);
        for i in 0..2 {
            for j in 0..2 {
                let avg = (src[[2 * i, 2 * j]]
                    + src[[2 * i, 2 * j + 1]]
                    + src[[2 * i + 1, 2 * j]]
                    + src[[2 * i + 1, 2 * j + 1]])
                    / 4.0;
                assert!((out[[i, j]] - avg).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_when_sizes_match() {
        let src = Array2::from_shape_fn((3, 5), |(i, j)| (i + 10 * j) as f64);
        let out = resize_plane(src.view(), 3, 5);
        assert_eq!(src, out);
    }

    #[test]
    fn upsample_preserves_constant() {
        let src = Array2::from_elem((4, 4), 3.5f64);
        let out = resize_plane(src.view(), 8, 8);
        for &v in out.iter() {
            assert!((v - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_identity_holds() {
        // <R x, y> == <x, R^T y> for random x, y
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(h, w, oh, ow) in &[(6, 5, 11, 9), (8, 8, 4, 4), (4, 4, 8, 8), (7, 3, 7, 3)] {
            let x = Array2::from_shape_fn((h, w), |_| rng.random::<f64>() - 0.5);
            let y = Array2::from_shape_fn((oh, ow), |_| rng.random::<f64>() - 0.5);
            let rx = resize_plane(x.view(), oh, ow);
            let rty = resize_plane_adjoint(y.view(), h, w);
            let lhs: f64 = rx.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(rty.iter()).map(|(a, b)| a * b).sum();
            assert!(
                (lhs - rhs).abs() < 1e-10,
                "adjoint mismatch at {h}x{w}->{oh}x{ow}: {lhs} vs {rhs}"
            );
        }
    }
}
