//! Analytic toy compositor with known ground-truth masks.
//!
//! Images are a soft rotated ellipse composited over a spatially graded
//! background: `x = alpha * fg + (1 - alpha) * bg`. Every piece is smooth in
//! the latent code, so exact Jacobian-vector and vector-Jacobian products
//! are available for gradient verification.
//!
//! The 16-dimensional latent code is split into blocks:
//!   * `z[0..5]`  ellipse center, radii and rotation (shape)
//!   * `z[5..8]`  foreground appearance
//!   * `z[8..11]` background appearance
//!   * `z[11..16]` entanglement, feeding both appearances
//!
//! The mixing matrices are dense and seeded, with structured luminance
//! statistics: background-appearance columns are hue-only (zero channel
//! sum), while entanglement columns push foreground and background
//! luminance in opposite directions. This mirrors how trained generators
//! encode relighting — there is no latent axis that uniformly brightens the
//! whole frame, so a brightness-seeking probe is forced to separate the
//! object from its background.

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{check_latent, Generator, GeneratorError, GeneratorSpec, GradientMode, Image, LatentCode};
use crate::element::sigmoid;
use crate::masksynth::BinaryMask;

/// Latent dimensionality of the toy compositor (fixed by the block layout).
pub const TOY_LATENT_DIM: usize = 16;

const SHAPE_LEN: usize = 5;
const FG_START: usize = 5;
const BG_START: usize = 8;
const ENT_START: usize = 11;
const MIX_IN: usize = 8; // 3 appearance + 5 entanglement coordinates

const HUE_STD: f64 = 0.25;
const LUM_LO: f64 = 0.25;
const LUM_HI: f64 = 0.45;
const BG_LUM_RATIO: f64 = 0.5;
const GRAD_STD: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyCompositorParams {
    /// Slope of the soft ellipse boundary.
    pub sharpness: f64,
    /// Magnitude of the latent-driven center offset.
    pub shape_scale: f64,
    pub radius_base: f64,
    pub radius_span: f64,
    /// Seeds the fixed dense mixing matrices.
    pub mixing_seed: u64,
    pub height: usize,
    pub width: usize,
}

impl Default for ToyCompositorParams {
    fn default() -> Self {
        Self {
            sharpness: 25.0,
            shape_scale: 0.15,
            radius_base: 0.2,
            radius_span: 0.1,
            mixing_seed: 0,
            height: 64,
            width: 64,
        }
    }
}

impl ToyCompositorParams {
    fn validate(&self) -> Result<(), GeneratorError> {
        if self.sharpness <= 0.0 || self.shape_scale <= 0.0 || self.radius_base <= 0.0 || self.radius_span <= 0.0 {
            return Err(GeneratorError::InvalidParams(
                "sharpness, shape_scale, radius_base and radius_span must be positive".into(),
            ));
        }
        if self.radius_base + self.radius_span >= 0.5 {
            return Err(GeneratorError::InvalidParams(
                "radius_base + radius_span must stay below 0.5 so the ellipse fits".into(),
            ));
        }
        Ok(())
    }
}

/// Shape parameters derived from the first latent block.
struct EllipseShape {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    cos_t: f64,
    sin_t: f64,
    // cached activations for derivative chains
    t0: f64,
    t1: f64,
    s2: f64,
    s3: f64,
    t4: f64,
}

pub struct ToyCompositor {
    params: ToyCompositorParams,
    spec: GeneratorSpec,
    fingerprint: String,
    /// 3 x 8 foreground mix over [fg appearance, entanglement].
    mix_fg: [[f64; MIX_IN]; 3],
    /// 3 x 8 background mix over [bg appearance, entanglement].
    mix_bg: [[f64; MIX_IN]; 3],
    /// Per-channel background gradient coefficients (x, y).
    grad: [(f64, f64); 3],
    /// Normalized pixel-center coordinates.
    ux: Vec<f64>,
    uy: Vec<f64>,
}

impl ToyCompositor {
    pub fn new(params: ToyCompositorParams) -> Result<Self, GeneratorError> {
        params.validate()?;
        let spec = GeneratorSpec {
            latent_dim: TOY_LATENT_DIM,
            height: params.height,
            width: params.width,
            channels: 3,
            value_range: (-1.0, 1.0),
            conditional: false,
            num_classes: 0,
            gradient_mode: GradientMode::Analytic,
        };
        spec.validate()?;

        let mut rng = ChaCha8Rng::seed_from_u64(params.mixing_seed);
        let mut hue_column = |rng: &mut ChaCha8Rng| -> [f64; 3] {
            let mut h = [0.0; 3];
            for v in h.iter_mut() {
                *v = HUE_STD * rng.sample::<f64, _>(StandardNormal);
            }
            let mean = (h[0] + h[1] + h[2]) / 3.0;
            [h[0] - mean, h[1] - mean, h[2] - mean]
        };

        let mut mix_fg = [[0.0; MIX_IN]; 3];
        let mut fg_lum = [0.0; MIX_IN];
        for k in 0..MIX_IN {
            let hue = hue_column(&mut rng);
            let magnitude = LUM_LO + (LUM_HI - LUM_LO) * rng.random::<f64>();
            let lum = if rng.random::<bool>() { magnitude } else { -magnitude };
            fg_lum[k] = lum;
            for c in 0..3 {
                mix_fg[c][k] = hue[c] + lum;
            }
        }

        let mut mix_bg = [[0.0; MIX_IN]; 3];
        for k in 0..MIX_IN {
            let hue = hue_column(&mut rng);
            // Appearance columns are hue-only; entanglement columns carry
            // the opposite of the foreground luminance.
            let lum = if k < 3 { 0.0 } else { -BG_LUM_RATIO * fg_lum[k] };
            for c in 0..3 {
                mix_bg[c][k] = hue[c] + lum;
            }
        }

        let mut grad = [(0.0, 0.0); 3];
        for g in grad.iter_mut() {
            g.0 = GRAD_STD * rng.sample::<f64, _>(StandardNormal);
            g.1 = GRAD_STD * rng.sample::<f64, _>(StandardNormal);
        }

        let ux = (0..params.width).map(|j| (j as f64 + 0.5) / params.width as f64).collect();
        let uy = (0..params.height).map(|i| (i as f64 + 0.5) / params.height as f64).collect();

        let digest = Sha256::digest(
            serde_json::to_string(&params)
                .expect("params serialize")
                .as_bytes(),
        );
        let fingerprint = format!("{}:{:.12}", super::TOY_GENERATOR_ID, hex_lower(&digest));

        Ok(Self {
            params,
            spec,
            fingerprint,
            mix_fg,
            mix_bg,
            grad,
            ux,
            uy,
        })
    }

    pub fn params(&self) -> &ToyCompositorParams {
        &self.params
    }

    fn shape(&self, z: &[f64]) -> EllipseShape {
        let t0 = z[0].tanh();
        let t1 = z[1].tanh();
        let s2 = sigmoid(z[2]);
        let s3 = sigmoid(z[3]);
        let t4 = z[4].tanh();
        let theta = std::f64::consts::FRAC_PI_4 * t4;
        EllipseShape {
            cx: 0.5 + self.params.shape_scale * t0,
            cy: 0.5 + self.params.shape_scale * t1,
            rx: self.params.radius_base + self.params.radius_span * s2,
            ry: self.params.radius_base + self.params.radius_span * s3,
            cos_t: theta.cos(),
            sin_t: theta.sin(),
            t0,
            t1,
            s2,
            s3,
            t4,
        }
    }

    fn mix_inputs(z: &[f64]) -> ([f64; MIX_IN], [f64; MIX_IN]) {
        let mut s_fg = [0.0; MIX_IN];
        let mut s_bg = [0.0; MIX_IN];
        for k in 0..3 {
            s_fg[k] = z[FG_START + k];
            s_bg[k] = z[BG_START + k];
        }
        for k in 0..5 {
            s_fg[3 + k] = z[ENT_START + k];
            s_bg[3 + k] = z[ENT_START + k];
        }
        (s_fg, s_bg)
    }

    /// Soft compositing coefficient over the pixel grid.
    fn alpha_map(&self, shape: &EllipseShape) -> Array2<f64> {
        let (h, w) = (self.params.height, self.params.width);
        let k = self.params.sharpness;
        let mut alpha = Array2::zeros((h, w));
        for i in 0..h {
            let dy = self.uy[i] - shape.cy;
            for j in 0..w {
                let dx = self.ux[j] - shape.cx;
                let a = shape.cos_t * dx + shape.sin_t * dy;
                let b = -shape.sin_t * dx + shape.cos_t * dy;
                let q = (a / shape.rx).powi(2) + (b / shape.ry).powi(2);
                alpha[[i, j]] = sigmoid(k * (1.0 - q));
            }
        }
        alpha
    }

    fn fg_colors(&self, s_fg: &[f64; MIX_IN]) -> ([f64; 3], [f64; 3]) {
        let mut pre = [0.0; 3];
        let mut col = [0.0; 3];
        for c in 0..3 {
            pre[c] = (0..MIX_IN).map(|k| self.mix_fg[c][k] * s_fg[k]).sum();
            col[c] = pre[c].tanh();
        }
        (col, pre)
    }

    fn bg_pre(&self, s_bg: &[f64; MIX_IN], c: usize, i: usize, j: usize) -> f64 {
        let base: f64 = (0..MIX_IN).map(|k| self.mix_bg[c][k] * s_bg[k]).sum();
        base + self.grad[c].0 * (self.ux[j] - 0.5) + self.grad[c].1 * (self.uy[i] - 0.5)
    }

    /// The compositing coefficient for a latent code; exposed so tests can
    /// verify the `alpha * fg + (1 - alpha) * bg` decomposition directly.
    pub fn alpha(&self, z: &LatentCode) -> Result<Array2<f64>, GeneratorError> {
        check_latent(&self.spec, z)?;
        Ok(self.alpha_map(&self.shape(&z.values)))
    }

    /// Full decomposition `(alpha, foreground color, background image)`.
    pub fn decompose(
        &self,
        z: &LatentCode,
    ) -> Result<(Array2<f64>, [f64; 3], Array3<f64>), GeneratorError> {
        check_latent(&self.spec, z)?;
        let (h, w) = (self.params.height, self.params.width);
        let shape = self.shape(&z.values);
        let alpha = self.alpha_map(&shape);
        let (s_fg, s_bg) = Self::mix_inputs(&z.values);
        let (fg, _) = self.fg_colors(&s_fg);
        let mut bg = Array3::zeros((3, h, w));
        for c in 0..3 {
            for i in 0..h {
                for j in 0..w {
                    bg[[c, i, j]] = self.bg_pre(&s_bg, c, i, j).tanh();
                }
            }
        }
        Ok((alpha, fg, bg))
    }
}

fn hex_lower(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Generator for ToyCompositor {
    fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    fn generate(&self, z: &LatentCode) -> Result<Image, GeneratorError> {
        let (alpha, fg, bg) = self.decompose(z)?;
        let (h, w) = (self.params.height, self.params.width);
        let mut data = Array3::zeros((3, h, w));
        for c in 0..3 {
            for i in 0..h {
                for j in 0..w {
                    let a = alpha[[i, j]];
                    data[[c, i, j]] = a * fg[c] + (1.0 - a) * bg[[c, i, j]];
                }
            }
        }
        Ok(Image::new(data))
    }

    fn jvp(&self, z: &LatentCode, tangent: &[f64]) -> Result<Array3<f64>, GeneratorError> {
        check_latent(&self.spec, z)?;
        if tangent.len() != TOY_LATENT_DIM {
            return Err(GeneratorError::DimensionMismatch {
                expected: TOY_LATENT_DIM,
                got: tangent.len(),
            });
        }
        let (h, w) = (self.params.height, self.params.width);
        let k = self.params.sharpness;
        let zv = &z.values;
        let shape = self.shape(zv);
        let (s_fg, s_bg) = Self::mix_inputs(zv);
        let (fg, _) = self.fg_colors(&s_fg);

        // tangents of the shape parameters
        let d_cx = self.params.shape_scale * (1.0 - shape.t0 * shape.t0) * tangent[0];
        let d_cy = self.params.shape_scale * (1.0 - shape.t1 * shape.t1) * tangent[1];
        let d_rx = self.params.radius_span * shape.s2 * (1.0 - shape.s2) * tangent[2];
        let d_ry = self.params.radius_span * shape.s3 * (1.0 - shape.s3) * tangent[3];
        let d_theta = std::f64::consts::FRAC_PI_4 * (1.0 - shape.t4 * shape.t4) * tangent[4];

        // tangents of the mixed appearance pre-activations
        let mut ds_fg = [0.0; MIX_IN];
        let mut ds_bg = [0.0; MIX_IN];
        for m in 0..3 {
            ds_fg[m] = tangent[FG_START + m];
            ds_bg[m] = tangent[BG_START + m];
        }
        for m in 0..5 {
            ds_fg[3 + m] = tangent[ENT_START + m];
            ds_bg[3 + m] = tangent[ENT_START + m];
        }
        let mut d_fg = [0.0; 3];
        let mut d_pb = [0.0; 3];
        for c in 0..3 {
            let d_pre: f64 = (0..MIX_IN).map(|m| self.mix_fg[c][m] * ds_fg[m]).sum();
            d_fg[c] = (1.0 - fg[c] * fg[c]) * d_pre;
            d_pb[c] = (0..MIX_IN).map(|m| self.mix_bg[c][m] * ds_bg[m]).sum();
        }

        let mut out = Array3::zeros((3, h, w));
        for i in 0..h {
            let dy = self.uy[i] - shape.cy;
            for j in 0..w {
                let dx = self.ux[j] - shape.cx;
                let a = shape.cos_t * dx + shape.sin_t * dy;
                let b = -shape.sin_t * dx + shape.cos_t * dy;
                let q = (a / shape.rx).powi(2) + (b / shape.ry).powi(2);
                let alpha = sigmoid(k * (1.0 - q));

                let d_a = -shape.cos_t * d_cx - shape.sin_t * d_cy + d_theta * b;
                let d_b = shape.sin_t * d_cx - shape.cos_t * d_cy - d_theta * a;
                let d_q = 2.0 * a / (shape.rx * shape.rx) * d_a + 2.0 * b / (shape.ry * shape.ry) * d_b
                    - 2.0 * a * a / shape.rx.powi(3) * d_rx
                    - 2.0 * b * b / shape.ry.powi(3) * d_ry;
                let d_alpha = -alpha * (1.0 - alpha) * k * d_q;

                for c in 0..3 {
                    let pb = self.bg_pre(&s_bg, c, i, j);
                    let bg = pb.tanh();
                    let d_bg = (1.0 - bg * bg) * d_pb[c];
                    out[[c, i, j]] =
                        d_alpha * (fg[c] - bg) + alpha * d_fg[c] + (1.0 - alpha) * d_bg;
                }
            }
        }
        Ok(out)
    }

    fn vjp(&self, z: &LatentCode, cotangent: &Array3<f64>) -> Result<Vec<f64>, GeneratorError> {
        check_latent(&self.spec, z)?;
        let (h, w) = (self.params.height, self.params.width);
        if cotangent.dim() != (3, h, w) {
            return Err(GeneratorError::InvalidParams(format!(
                "cotangent shape {:?} does not match (3, {h}, {w})",
                cotangent.dim()
            )));
        }
        let k = self.params.sharpness;
        let zv = &z.values;
        let shape = self.shape(zv);
        let (s_fg, s_bg) = Self::mix_inputs(zv);
        let (fg, _) = self.fg_colors(&s_fg);

        let mut acc_fg = [0.0; 3]; // sum of xi_c * alpha
        let mut acc_pb = [0.0; 3]; // sum of xi_c * (1 - alpha) * tanh'(pb)
        let mut g_cx = 0.0;
        let mut g_cy = 0.0;
        let mut g_rx = 0.0;
        let mut g_ry = 0.0;
        let mut g_theta = 0.0;

        for i in 0..h {
            let dy = self.uy[i] - shape.cy;
            for j in 0..w {
                let dx = self.ux[j] - shape.cx;
                let a = shape.cos_t * dx + shape.sin_t * dy;
                let b = -shape.sin_t * dx + shape.cos_t * dy;
                let q = (a / shape.rx).powi(2) + (b / shape.ry).powi(2);
                let alpha = sigmoid(k * (1.0 - q));

                let mut xi_alpha = 0.0;
                for c in 0..3 {
                    let xi = cotangent[[c, i, j]];
                    let pb = self.bg_pre(&s_bg, c, i, j);
                    let bg = pb.tanh();
                    acc_fg[c] += xi * alpha;
                    acc_pb[c] += xi * (1.0 - alpha) * (1.0 - bg * bg);
                    xi_alpha += xi * (fg[c] - bg);
                }

                let g_q = -xi_alpha * alpha * (1.0 - alpha) * k;
                let g_a = g_q * 2.0 * a / (shape.rx * shape.rx);
                let g_b = g_q * 2.0 * b / (shape.ry * shape.ry);
                g_rx += g_q * (-2.0 * a * a / shape.rx.powi(3));
                g_ry += g_q * (-2.0 * b * b / shape.ry.powi(3));
                g_cx += -g_a * shape.cos_t + g_b * shape.sin_t;
                g_cy += -g_a * shape.sin_t - g_b * shape.cos_t;
                g_theta += g_a * b - g_b * a;
            }
        }

        let mut grad = vec![0.0; TOY_LATENT_DIM];
        grad[0] = g_cx * self.params.shape_scale * (1.0 - shape.t0 * shape.t0);
        grad[1] = g_cy * self.params.shape_scale * (1.0 - shape.t1 * shape.t1);
        grad[2] = g_rx * self.params.radius_span * shape.s2 * (1.0 - shape.s2);
        grad[3] = g_ry * self.params.radius_span * shape.s3 * (1.0 - shape.s3);
        grad[4] = g_theta * std::f64::consts::FRAC_PI_4 * (1.0 - shape.t4 * shape.t4);

        for c in 0..3 {
            let g_pf = acc_fg[c] * (1.0 - fg[c] * fg[c]);
            for m in 0..MIX_IN {
                let target = if m < 3 { FG_START + m } else { ENT_START + (m - 3) };
                grad[target] += g_pf * self.mix_fg[c][m];
            }
            for m in 0..MIX_IN {
                let target = if m < 3 { BG_START + m } else { ENT_START + (m - 3) };
                grad[target] += acc_pb[c] * self.mix_bg[c][m];
            }
        }
        Ok(grad)
    }

    fn oracle_mask(&self, z: &LatentCode) -> Option<BinaryMask> {
        check_latent(&self.spec, z).ok()?;
        let shape = self.shape(&z.values);
        let (h, w) = (self.params.height, self.params.width);
        let mut mask = Array2::<u8>::zeros((h, w));
        for i in 0..h {
            let dy = self.uy[i] - shape.cy;
            for j in 0..w {
                let dx = self.ux[j] - shape.cx;
                let a = shape.cos_t * dx + shape.sin_t * dy;
                let b = -shape.sin_t * dx + shape.cos_t * dy;
                let q = (a / shape.rx).powi(2) + (b / shape.ry).powi(2);
                // alpha >= 0.5 is exactly the inside of the ellipse
                if q <= 1.0 {
                    mask[[i, j]] = 1;
                }
            }
        }
        Some(BinaryMask::new(mask))
    }
}
