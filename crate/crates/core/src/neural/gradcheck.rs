//! Central finite-difference verification of analytic gradients.

use super::params::ParamSet;

pub const FD_STEP: f64 = 1e-5;

/// Safety factor on the round-off bound of a central difference.
pub const ROUNDOFF_FACTOR: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct TensorCheck {
    pub name: String,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
    /// `max(0, ‖a − n‖ − r) / max(‖a‖, ‖n‖, r)`, where `r` bounds the
    /// round-off in the differences (`ROUNDOFF_FACTOR·√len·ε·|L|/h`).
    /// Without the allowance, a tensor the loss is invariant to (a bias
    /// feeding a translation-invariant loss) compares two noise vectors.
    pub relative_error: f64,
}

/// Compares `analytic` against central differences of `loss` at `params`,
/// tensor by tensor.
pub fn check<P: ParamSet>(params: &P, analytic: &P, mut loss: impl FnMut(&P) -> f64) -> Vec<TensorCheck> {
    let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
    let grads: Vec<Vec<f64>> = analytic.named().into_iter().map(|(_, m)| m.as_slice().to_vec()).collect();
    let mut probe = params.clone();
    let scale = loss(params).abs().max(1.0);
    let mut out = Vec::with_capacity(names.len());
    for (ti, name) in names.into_iter().enumerate() {
        let len = grads[ti].len();
        let mut numeric = vec![0.0; len];
        for (i, num) in numeric.iter_mut().enumerate() {
            let orig = probe.tensors_mut()[ti].as_slice()[i];
            probe.tensors_mut()[ti].as_mut_slice()[i] = orig + FD_STEP;
            let up = loss(&probe);
            probe.tensors_mut()[ti].as_mut_slice()[i] = orig - FD_STEP;
            let down = loss(&probe);
            probe.tensors_mut()[ti].as_mut_slice()[i] = orig;
            *num = (up - down) / (2.0 * FD_STEP);
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let a = norm(&grads[ti]);
        let n = norm(&numeric);
        let diff: Vec<f64> = grads[ti].iter().zip(&numeric).map(|(x, y)| x - y).collect();
        let roundoff = ROUNDOFF_FACTOR * (len as f64).sqrt() * f64::EPSILON * scale / FD_STEP;
        let denom = a.max(n).max(roundoff);
        out.push(TensorCheck {
            name,
            analytic_norm: a,
            numeric_norm: n,
            relative_error: (norm(&diff) - roundoff).max(0.0) / denom,
        });
    }
    out
}

pub fn max_relative_error(checks: &[TensorCheck]) -> f64 {
    checks.iter().map(|c| c.relative_error).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Free, Matrix};

    fn x() -> Free {
        Free(Matrix::from_rows(&[vec![0.3, -1.2, 2.0], vec![0.7, 0.1, -0.4]]))
    }

    fn sum_sq(f: &Free) -> f64 {
        f.0.as_slice().iter().map(|v| v * v).sum()
    }

    #[test]
    fn exact_gradient_passes() {
        let g = Free(Matrix::from_fn(2, 3, |r, c| 2.0 * x().0[(r, c)]));
        assert!(max_relative_error(&check(&x(), &g, sum_sq)) < 1e-8);
    }

    #[test]
    fn scaled_gradient_is_caught() {
        let g = Free(Matrix::from_fn(2, 3, |r, c| 2.2 * x().0[(r, c)]));
        let err = max_relative_error(&check(&x(), &g, sum_sq));
        assert!((err - 0.2 / 2.2).abs() < 1e-6, "{err}");
    }

    #[test]
    fn invariant_tensor_with_large_loss_passes() {
        // Analytic rounding noise on a tensor the loss ignores.
        let g = Free(Matrix::from_fn(2, 3, |_, _| 3e-15));
        let c = check(&x(), &g, |_| 50.0);
        assert_eq!(max_relative_error(&c), 0.0);
    }

    #[test]
    fn wrong_small_gradient_on_invariant_loss_is_caught() {
        let g = Free(Matrix::from_fn(2, 3, |_, _| 1e-3));
        assert!(max_relative_error(&check(&x(), &g, |_| 50.0)) > 0.99);
    }
}
