use std::collections::BTreeMap;

use super::{AutodiffError, Tensor};

/// Per-coordinate adaptive learning rates: `acc += g^2`, `theta -= lr * g / (sqrt(acc) + eps)`.
#[derive(Clone, Debug)]
pub struct Adagrad {
    learning_rate: f64,
    epsilon: f64,
    initial_accumulator: f64,
    accumulators: BTreeMap<String, Vec<f64>>,
}

impl Adagrad {
    pub fn new(learning_rate: f64, epsilon: f64, initial_accumulator: f64) -> Result<Self, AutodiffError> {
        if !(learning_rate > 0.0 && epsilon > 0.0 && initial_accumulator >= 0.0) {
            return Err(AutodiffError::InvalidArgument {
                op: "adagrad",
                detail: format!(
                    "need lr > 0, eps > 0, initial accumulator >= 0 (got {learning_rate}, {epsilon}, {initial_accumulator})"
                ),
            });
        }
        Ok(Self {
            learning_rate,
            epsilon,
            initial_accumulator,
            accumulators: BTreeMap::new(),
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn initial_accumulator(&self) -> f64 {
        self.initial_accumulator
    }

    pub fn accumulator(&self, name: &str) -> Option<&[f64]> {
        self.accumulators.get(name).map(Vec::as_slice)
    }

    /// Drops all accumulated state.
    pub fn reset(&mut self) {
        self.accumulators.clear();
    }

    /// Updates `param` in place from `grad`, keyed by `name`.
    pub fn step(&mut self, name: &str, param: &mut Tensor, grad: &Tensor) -> Result<(), AutodiffError> {
        if param.shape() != grad.shape() {
            return Err(AutodiffError::ShapeMismatch {
                op: "adagrad_step",
                lhs: param.shape().to_vec(),
                rhs: grad.shape().to_vec(),
            });
        }
        let acc = self
            .accumulators
            .entry(name.to_string())
            .or_insert_with(|| vec![self.initial_accumulator; param.numel()]);
        if acc.len() != param.numel() {
            return Err(AutodiffError::ShapeMismatch {
                op: "adagrad_step",
                lhs: param.shape().to_vec(),
                rhs: vec![acc.len()],
            });
        }
        for ((theta, &g), a) in param.data_mut().iter_mut().zip(grad.data()).zip(acc.iter_mut()) {
            *a += g * g;
            *theta -= self.learning_rate * g / (a.sqrt() + self.epsilon);
        }
        if !param.is_finite() {
            return Err(AutodiffError::NonFinite { op: "adagrad_step" });
        }
        Ok(())
    }
}

/// Rescales `grads` so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads.iter().map(Tensor::l2_norm_sq).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let k = max_norm / norm;
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= k);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_from_zero_accumulator() {
        let mut opt = Adagrad::new(0.15, 1e-10, 0.0).unwrap();
        let mut theta = Tensor::scalar(1.0);
        opt.step("w", &mut theta, &Tensor::scalar(4.0)).unwrap();
        assert_eq!(opt.accumulator("w").unwrap(), &[16.0]);
        assert!((theta.item() - 0.85).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let mut opt = Adagrad::new(0.15, 1e-10, 0.1).unwrap();
        let mut theta = Tensor::scalar(0.3);
        opt.step("w", &mut theta, &Tensor::scalar(0.0)).unwrap();
        assert_eq!(theta.item(), 0.3);
    }

    #[test]
    fn two_unit_steps() {
        let mut opt = Adagrad::new(0.15, 1e-10, 0.0).unwrap();
        let mut theta = Tensor::scalar(0.0);
        opt.step("w", &mut theta, &Tensor::scalar(1.0)).unwrap();
        assert!((theta.item() + 0.15).abs() < 1e-9);
        opt.step("w", &mut theta, &Tensor::scalar(1.0)).unwrap();
        let expected = -0.15 - 0.15 / 2f64.sqrt();
        assert!((theta.item() - expected).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch() {
        let mut opt = Adagrad::new(0.15, 1e-10, 0.1).unwrap();
        let mut theta = Tensor::zeros(&[2]);
        assert!(opt.step("w", &mut theta, &Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn clipping_bounds_the_joint_norm() {
        let mut g = vec![Tensor::scalar(3.0), Tensor::scalar(4.0)];
        let before = clip_global_norm(&mut g, 2.0);
        assert_eq!(before, 5.0);
        let after: f64 = g.iter().map(Tensor::l2_norm_sq).sum::<f64>().sqrt();
        assert!((after - 2.0).abs() < 1e-12);
    }
}
