//! Dense, layer-normalization and ReLU layers with explicit backward passes.

use rand::Rng;

use super::matrix::{gemm, Matrix};

pub const LAYER_NORM_EPS: f64 = 1e-3;

pub(crate) fn uniform_fan_in<R: Rng>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Matrix {
    let limit = (3.0 / fan_in as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..limit))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `in x out`
    pub w: Matrix,
    /// `1 x out`
    pub b: Matrix,
}

impl Dense {
    pub fn new<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Dense {
            w: uniform_fan_in(inputs, outputs, inputs, rng),
            b: Matrix::zeros(1, outputs),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        let mut y = x.matmul(&self.w);
        y.add_row(self.b.as_slice());
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &Matrix, dy: &Matrix, grad: &mut Dense) -> Matrix {
        gemm(1.0, x, true, dy, false, 1.0, &mut grad.w);
        dy.add_col_sums_to(grad.b.as_mut_slice());
        let mut dx = Matrix::zeros(x.rows(), x.cols());
        gemm(1.0, dy, false, &self.w, true, 0.0, &mut dx);
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Matrix,
    pub bias: Matrix,
}

pub struct LayerNormCache {
    xhat: Matrix,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(width: usize) -> Self {
        LayerNorm {
            gain: Matrix::from_fn(1, width, |_, _| 1.0),
            bias: Matrix::zeros(1, width),
        }
    }

    /// Normalizes each row to zero mean and unit variance, then applies gain and bias.
    pub fn forward(&self, x: &Matrix) -> (Matrix, LayerNormCache) {
        let (n, d) = x.shape();
        let mut xhat = Matrix::zeros(n, d);
        let mut y = Matrix::zeros(n, d);
        let mut inv_std = Vec::with_capacity(n);
        let gain = self.gain.as_slice();
        let bias = self.bias.as_slice();
        for r in 0..n {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(is);
            let xh = xhat.row_mut(r);
            for (o, v) in xh.iter_mut().zip(row) {
                *o = (v - mean) * is;
            }
            for (((o, h), g), b) in y.row_mut(r).iter_mut().zip(xhat.row(r)).zip(gain).zip(bias) {
                *o = g * h + b;
            }
        }
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&self, cache: &LayerNormCache, dy: &Matrix, grad: &mut LayerNorm) -> Matrix {
        let (n, d) = dy.shape();
        let mut dx = Matrix::zeros(n, d);
        let gain = self.gain.as_slice();
        let mut dxhat = vec![0.0; d];
        for r in 0..n {
            let xh = cache.xhat.row(r);
            let dyr = dy.row(r);
            for j in 0..d {
                grad.gain.as_mut_slice()[j] += dyr[j] * xh[j];
                grad.bias.as_mut_slice()[j] += dyr[j];
                dxhat[j] = dyr[j] * gain[j];
            }
            let mean_d = dxhat.iter().sum::<f64>() / d as f64;
            let mean_dx = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
            let is = cache.inv_std[r];
            for ((o, g), h) in dx.row_mut(r).iter_mut().zip(&dxhat).zip(xh) {
                *o = is * (g - mean_d - h * mean_dx);
            }
        }
        dx
    }
}

pub fn relu(x: &Matrix) -> Matrix {
    let mut y = x.clone();
    y.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
    y
}

/// Gradient through ReLU given its input `x`.
pub fn relu_backward(x: &Matrix, dy: &Matrix) -> Matrix {
    let mut dx = dy.clone();
    for (g, v) in dx.as_mut_slice().iter_mut().zip(x.as_slice()) {
        if *v <= 0.0 {
            *g = 0.0;
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_norm_of_constant_row_is_zero() {
        let ln = LayerNorm::new(5);
        let x = Matrix::from_fn(2, 5, |r, _| 3.0 + r as f64);
        let (y, _) = ln.forward(&x);
        assert!(y.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn layer_norm_rows_are_standardized() {
        let ln = LayerNorm::new(4);
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0, 4.0]]);
        let (y, _) = ln.forward(&x);
        let mean: f64 = y.as_slice().iter().sum::<f64>() / 4.0;
        let var: f64 = y.as_slice().iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.25 / (1.25 + LAYER_NORM_EPS)).abs() < 1e-12);
    }

    #[test]
    fn dense_hand_computation() {
        let d = Dense {
            w: Matrix::from_rows(&[vec![1.0, -1.0], vec![0.5, 2.0]]),
            b: Matrix::from_rows(&[vec![0.1, 0.2]]),
        };
        let y = d.forward(&Matrix::from_rows(&[vec![2.0, 4.0]]));
        assert_eq!(y.as_slice(), &[2.0 + 2.0 + 0.1, -2.0 + 8.0 + 0.2]);
    }

    #[test]
    fn relu_masks_gradient() {
        let x = Matrix::from_rows(&[vec![-1.0, 0.0, 2.0]]);
        assert_eq!(relu(&x).as_slice(), &[0.0, 0.0, 2.0]);
        let g = relu_backward(&x, &Matrix::from_rows(&[vec![5.0, 5.0, 5.0]]));
        assert_eq!(g.as_slice(), &[0.0, 0.0, 5.0]);
    }
}
