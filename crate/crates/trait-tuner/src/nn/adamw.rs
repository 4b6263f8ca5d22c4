//! Adam with decoupled weight decay. Moments are keyed by parameter name and
//! kept in f64 regardless of compute precision; decay applies only to
//! parameters flagged for it (weights, not biases or norms).

use std::collections::HashMap;

use ndarray::Zip;

use super::{Mat, Param};

pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    moments: HashMap<String, (Mat, Mat)>,
}

impl AdamW {
    pub fn new(weight_decay: f64) -> Self {
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            moments: HashMap::new(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Param], lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for param in params.iter_mut() {
            let (m, v) = self
                .moments
                .entry(param.name.clone())
                .or_insert_with(|| {
                    (
                        Mat::zeros(param.value.raw_dim()),
                        Mat::zeros(param.value.raw_dim()),
                    )
                });
            let b1 = self.beta1;
            let b2 = self.beta2;
            m.zip_mut_with(&param.grad, |m, g| *m = b1 * *m + (1.0 - b1) * g);
            v.zip_mut_with(&param.grad, |v, g| *v = b2 * *v + (1.0 - b2) * g * g);
            if param.decay && self.weight_decay > 0.0 {
                let shrink = 1.0 - lr * self.weight_decay;
                param.value.mapv_inplace(|w| w * shrink);
            }
            let eps = self.eps;
            Zip::from(&mut param.value)
                .and(&*m)
                .and(&*v)
                .for_each(|w, m, v| {
                    *w -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
                });
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }
}

pub fn zero_grads(params: &mut [&mut Param]) {
    for p in params.iter_mut() {
        p.zero_grad();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_against_gradient_sign() {
        let mut p = Param::new("w", Mat::from_elem((1, 2), 1.0), false);
        p.grad = Mat::from_shape_vec((1, 2), vec![0.5, -0.25]).unwrap();
        let mut opt = AdamW::new(0.0);
        opt.step(&mut [&mut p], 0.1);
        // With bias correction the first update is lr * g / (|g| + eps).
        assert!((p.value[[0, 0]] - (1.0 - 0.1)).abs() < 1e-6);
        assert!((p.value[[0, 1]] - (1.0 + 0.1)).abs() < 1e-6);
    }

    #[test]
    fn decay_shrinks_flagged_parameters_only() {
        let mut w = Param::new("w", Mat::from_elem((1, 1), 2.0), true);
        let mut b = Param::new("b", Mat::from_elem((1, 1), 2.0), false);
        // Zero gradients isolate the decay term.
        let mut opt = AdamW::new(0.5);
        opt.step(&mut [&mut w, &mut b], 0.1);
        assert!((w.value[[0, 0]] - 2.0 * (1.0 - 0.1 * 0.5)).abs() < 1e-12);
        assert_eq!(b.value[[0, 0]], 2.0);
    }

    #[test]
    fn moments_persist_across_steps() {
        let mut p = Param::new("w", Mat::zeros((1, 1)), false);
        let mut opt = AdamW::new(0.0);
        p.grad = Mat::from_elem((1, 1), 1.0);
        opt.step(&mut [&mut p], 0.01);
        let after_one = p.value[[0, 0]];
        p.grad = Mat::from_elem((1, 1), 1.0);
        opt.step(&mut [&mut p], 0.01);
        assert!(p.value[[0, 0]] < after_one);
        assert_eq!(opt.steps_taken(), 2);
    }
}
