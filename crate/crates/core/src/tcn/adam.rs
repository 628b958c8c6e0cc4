use alloc::vec;
use alloc::vec::Vec;

use super::model::TcnParams;

/// Adaptive-moment optimizer with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64, num_params: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    pub fn step(&mut self, params: &mut TcnParams, grads: &TcnParams) {
        self.step += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, self.step as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.step as f64);
        let (b1, b2) = (self.beta1, self.beta2);
        let mut k = 0;
        for (p, g) in params.slices_mut().into_iter().zip(grads.slices()) {
            for (w, &gw) in p.iter_mut().zip(g) {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = b1 * *m + (1.0 - b1) * gw;
                *v = b2 * *v + (1.0 - b2) * gw * gw;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *w -= self.learning_rate * mhat / (libm::sqrt(vhat) + self.epsilon);
                k += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tcn::model::{TcnConfig, TcnParams};

    #[test]
    fn first_step_moves_by_learning_rate() {
        // after bias correction the first update is lr * g / (|g| + eps)
        let cfg = TcnConfig {
            filters: 2,
            dilations: alloc::vec![1],
            input_channels: 1,
            output_units: 1,
            ..TcnConfig::default()
        };
        let mut p = TcnParams::init(&cfg);
        let before = p.flatten();
        let mut g = p.zeros_like();
        for s in g.slices_mut() {
            s.iter_mut().for_each(|v| *v = 0.5);
        }
        let mut opt = Adam::new(0.01, p.num_params());
        opt.step(&mut p, &g);
        for (a, b) in before.iter().zip(p.flatten()) {
            assert!((a - b - 0.01).abs() < 1e-9);
        }
    }
}
