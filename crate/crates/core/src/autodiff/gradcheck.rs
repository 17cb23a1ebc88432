use super::{AutodiffError, Graph, Tensor, Var};

/// Compares reverse-mode gradients of `f` at `point` with central differences.
///
/// `f` receives a fresh graph and one `requires_grad` leaf per tensor in
/// `point`, and must return a one-element loss. The result is the maximum
/// over every coordinate of `|analytic - numeric| / max(1, |numeric|)`.
pub fn grad_check<F>(f: F, point: &[Tensor], step: f64) -> Result<f64, AutodiffError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, AutodiffError>,
{
    if !(step > 0.0) {
        return Err(AutodiffError::InvalidArgument {
            op: "grad_check",
            detail: format!("step must be positive, got {step}"),
        });
    }
    let mut graph = Graph::new();
    let vars: Vec<Var> = point.iter().map(|t| graph.param(t.clone())).collect();
    let loss = f(&mut graph, &vars)?;
    graph.backward(loss)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(point)
        .map(|(&v, t)| graph.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();

    let eval = |tensors: &[Tensor]| -> Result<f64, AutodiffError> {
        let mut g = Graph::new();
        let vs: Vec<Var> = tensors.iter().map(|t| g.constant(t.clone())).collect();
        let l = f(&mut g, &vs)?;
        Ok(g.value(l).item())
    };

    let mut worst = 0.0_f64;
    let mut probe = point.to_vec();
    for (ti, grad) in analytic.iter().enumerate() {
        for j in 0..point[ti].numel() {
            let orig = point[ti].data()[j];
            probe[ti].data_mut()[j] = orig + step;
            let up = eval(&probe)?;
            probe[ti].data_mut()[j] = orig - step;
            let down = eval(&probe)?;
            probe[ti].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * step);
            let err = (grad.data()[j] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_zero_error() {
        let p = Tensor::scalar(0.7);
        let err = grad_check(|_, v| Ok(v[0]), &[p], 1e-4).unwrap();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn rejects_nonpositive_step() {
        assert!(grad_check(|_, v| Ok(v[0]), &[Tensor::scalar(1.0)], 0.0).is_err());
    }

    #[test]
    fn sign_flipped_backward_is_detected() {
        let p = Tensor::row(vec![0.3, -0.8, 1.1]).unwrap();
        let err = grad_check(
            |g, v| {
                let y = g.elementwise(v[0], f64::sin, |x| -x.cos())?;
                g.sum(y)
            },
            &[p],
            1e-4,
        )
        .unwrap();
        assert!(err > 1e-2, "{err}");
    }
}
