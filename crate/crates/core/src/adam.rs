//! Adam optimizer over a flat parameter vector.
//!
//! Used both by the latent-direction probe (16-dimensional, `f64`) and by
//! the segmentation-network trainer (millions of parameters, generic).

use crate::element::Element;

/// First/second-moment state for Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T: Element> {
    beta1: T,
    beta2: T,
    eps: T,
    m: Vec<T>,
    v: Vec<T>,
    step: u32,
}

impl<T: Element> Adam<T> {
    pub fn new(len: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1: T::from_f64(beta1),
            beta2: T::from_f64(beta2),
            eps: T::from_f64(eps),
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step: 0,
        }
    }

    /// One Adam update of `params` in place. `grad` must have the same length.
    pub fn update(&mut self, params: &mut [T], grad: &[T], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.step += 1;
        let one = T::one();
        let b1 = self.beta1;
        let b2 = self.beta2;
        // bias correction terms
        let corr1 = one - b1.powi(self.step as i32);
        let corr2 = one - b2.powi(self.step as i32);
        let lr_t = T::from_f64(lr);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let m_hat = self.m[i] / corr1;
            let v_hat = self.v[i] / corr2;
            params[i] -= lr_t * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With bias correction, the very first update is lr * g / (|g| + eps).
        let mut adam = Adam::<f64>::new(2, 0.9, 0.999, 1e-8);
        let mut p = vec![1.0, -2.0];
        adam.update(&mut p, &[0.5, -3.0], 0.1);
        assert!((p[0] - (1.0 - 0.1)).abs() < 1e-6);
        assert!((p[1] - (-2.0 + 0.1)).abs() < 1e-6);
    }

    #[test]
    fn converges_on_quadratic() {
        // minimize (x - 3)^2 + (y + 1)^2
        let mut adam = Adam::<f64>::new(2, 0.9, 0.999, 1e-8);
        let mut p = vec![0.0, 0.0];
        for _ in 0..2000 {
            let g = vec![2.0 * (p[0] - 3.0), 2.0 * (p[1] + 1.0)];
            adam.update(&mut p, &g, 0.05);
        }
        assert!((p[0] - 3.0).abs() < 1e-3, "x = {}", p[0]);
        assert!((p[1] + 1.0).abs() < 1e-3, "y = {}", p[1]);
    }
}
