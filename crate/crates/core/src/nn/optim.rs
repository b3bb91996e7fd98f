use serde::{Deserialize, Serialize};

use super::{LayerParams, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers are allocated on the first
/// step to match the parameter list they are used with.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            m: Vec::new(),
            v: Vec::new(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    fn ensure_buffers(&mut self, params: &[LayerParams<T>]) {
        let shapes: Vec<usize> = params
            .iter()
            .flat_map(|p| [p.weights.len(), p.bias.len()])
            .collect();
        let matches = self.m.len() == shapes.len()
            && self.m.iter().zip(&shapes).all(|(b, &n)| b.len() == n);
        if !matches {
            self.m = shapes.iter().map(|&n| vec![T::zero(); n]).collect();
            self.v = self.m.clone();
        }
    }

    /// Applies one update from the accumulated gradients, then zeroes them.
    pub fn step(&mut self, params: &mut [LayerParams<T>]) {
        self.ensure_buffers(params);
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let (b1, b2) = (T::from_f64_lossy(c.beta1), T::from_f64_lossy(c.beta2));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        let corr1 = T::from_f64_lossy(1.0 - c.beta1.powi(t));
        let corr2 = T::from_f64_lossy(1.0 - c.beta2.powi(t));
        let lr = T::from_f64_lossy(c.lr);
        let eps = T::from_f64_lossy(c.eps);

        let mut slot = 0;
        for p in params.iter_mut() {
            for (values, grads) in [(&mut p.weights, &mut p.grad_w), (&mut p.bias, &mut p.grad_b)] {
                let (m, v) = (&mut self.m[slot], &mut self.v[slot]);
                for (((x, g), mi), vi) in values
                    .iter_mut()
                    .zip(grads.iter_mut())
                    .zip(m.iter_mut())
                    .zip(v.iter_mut())
                {
                    *mi = b1 * *mi + one_b1 * *g;
                    *vi = b2 * *vi + one_b2 * *g * *g;
                    let m_hat = *mi / corr1;
                    let v_hat = *vi / corr2;
                    *x -= lr * m_hat / (v_hat.sqrt() + eps);
                    *g = T::zero();
                }
                slot += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerKind;

    fn scalar_param(w: f64, g: f64) -> Vec<LayerParams<f64>> {
        let k = LayerKind::Dense { in_dim: 1, out_dim: 1 };
        let mut p = LayerParams::zeros(&k);
        p.weights[0] = w;
        p.grad_w[0] = g;
        vec![p]
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut params = scalar_param(0.3, 0.0);
        let mut adam = Adam::new(AdamConfig::default());
        for _ in 0..5 {
            adam.step(&mut params);
        }
        assert_eq!(params[0].weights[0], 0.3);
        assert_eq!(params[0].bias[0], 0.0);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        for g in [2.5, -0.01] {
            let mut params = scalar_param(1.0, g);
            let mut adam = Adam::new(AdamConfig::default());
            adam.step(&mut params);
            // m_hat = g, v_hat = g^2  =>  delta = lr * g / (|g| + eps)
            let expected = 1.0 - 1e-3 * g / (g.abs() + 1e-8);
            assert!((params[0].weights[0] - expected).abs() < 1e-15);
            assert_eq!(params[0].grad_w[0], 0.0);
        }
    }

    #[test]
    fn constant_gradient_keeps_unit_steps() {
        let mut params = scalar_param(0.0, 1.0);
        let mut adam = Adam::new(AdamConfig::default());
        for _ in 0..10 {
            params[0].grad_w[0] = 1.0;
            adam.step(&mut params);
        }
        assert!((params[0].weights[0] + 10.0 * 1e-3).abs() < 1e-9);
        assert_eq!(adam.steps(), 10);
    }
}
