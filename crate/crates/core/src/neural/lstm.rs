//! Single LSTM layer over time-major batches with backpropagation through time.
//!
//! Inputs are `(T·N) x F` matrices whose row `t·N + n` is time step `t` of
//! sequence `n`. Gate columns are laid out `[input | forget | cell | output]`.

use rand::Rng;
use rand_distr::StandardNormal;

use super::layers::uniform_fan_in;
use super::matrix::{add_col_sums, gemm, gemm_slices, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    /// `F x 4H`
    pub w_x: Matrix,
    /// `H x 4H`
    pub w_h: Matrix,
    /// `1 x 4H`
    pub b: Matrix,
}

pub struct LstmCache {
    steps: usize,
    batch: usize,
    /// Activated gates, `(T·N) x 4H`.
    gates: Matrix,
    /// Cell states, `(T·N) x H`.
    c: Matrix,
    tanh_c: Matrix,
    /// Hidden states, `(T·N) x H`.
    h: Matrix,
}

impl LstmCache {
    pub fn final_hidden(&self) -> Matrix {
        let hidden = self.h.cols();
        Matrix::from_vec(
            self.batch,
            hidden,
            self.h.row_block((self.steps - 1) * self.batch, self.batch).to_vec(),
        )
    }

    /// Cell state at the last step.
    pub fn final_cell(&self) -> Matrix {
        Matrix::from_vec(
            self.batch,
            self.c.cols(),
            self.c.row_block((self.steps - 1) * self.batch, self.batch).to_vec(),
        )
    }

    pub fn hidden_sequence(&self) -> &Matrix {
        &self.h
    }

    pub fn cell_sequence(&self) -> &Matrix {
        &self.c
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Matrix with orthonormal rows (`rows <= cols`) via modified Gram-Schmidt on
/// Gaussian draws.
fn orthogonal_rows<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    assert!(rows <= cols);
    let mut m = Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal));
    for i in 0..rows {
        for j in 0..i {
            let dot: f64 = m.row(i).iter().zip(m.row(j)).map(|(a, b)| a * b).sum();
            let prev = m.row(j).to_vec();
            for (a, b) in m.row_mut(i).iter_mut().zip(prev) {
                *a -= dot * b;
            }
        }
        let norm = m.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        m.row_mut(i).iter_mut().for_each(|v| *v /= norm);
    }
    m
}

impl Lstm {
    /// Fan-in uniform input weights, orthogonal recurrent weights and a
    /// forget-gate bias of one.
    pub fn new<R: Rng>(inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let mut b = Matrix::zeros(1, 4 * hidden);
        b.as_mut_slice()[hidden..2 * hidden].fill(1.0);
        Lstm {
            w_x: uniform_fan_in(inputs, 4 * hidden, inputs, rng),
            w_h: orthogonal_rows(hidden, 4 * hidden, rng),
            b,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.rows()
    }

    pub fn forward(&self, x: &Matrix, steps: usize) -> LstmCache {
        let hid = self.hidden();
        let g4 = 4 * hid;
        assert_eq!(x.rows() % steps, 0, "rows must be steps x batch");
        assert_eq!(x.cols(), self.w_x.rows(), "LSTM input width");
        let batch = x.rows() / steps;

        // Input projections for all steps at once.
        let mut gates = x.matmul(&self.w_x);
        gates.add_row(self.b.as_slice());
        let mut c = Matrix::zeros(steps * batch, hid);
        let mut tanh_c = Matrix::zeros(steps * batch, hid);
        let mut h = Matrix::zeros(steps * batch, hid);

        for t in 0..steps {
            let rows = t * batch;
            if t > 0 {
                let h_prev = h.row_block(rows - batch, batch).to_vec();
                gemm_slices(
                    batch,
                    hid,
                    g4,
                    1.0,
                    &h_prev,
                    false,
                    self.w_h.as_slice(),
                    false,
                    1.0,
                    gates.row_block_mut(rows, batch),
                );
            }
            for n in 0..batch {
                let r = rows + n;
                let z = gates.row_mut(r);
                for v in &mut z[..2 * hid] {
                    *v = sigmoid(*v);
                }
                for v in &mut z[2 * hid..3 * hid] {
                    *v = v.tanh();
                }
                for v in &mut z[3 * hid..] {
                    *v = sigmoid(*v);
                }
                for j in 0..hid {
                    let (i_g, f_g, g_g, o_g) = {
                        let z = gates.row(r);
                        (z[j], z[hid + j], z[2 * hid + j], z[3 * hid + j])
                    };
                    let c_prev = if t > 0 { c[(r - batch, j)] } else { 0.0 };
                    let cv = f_g * c_prev + i_g * g_g;
                    let tc = cv.tanh();
                    c[(r, j)] = cv;
                    tanh_c[(r, j)] = tc;
                    h[(r, j)] = o_g * tc;
                }
            }
        }
        LstmCache {
            steps,
            batch,
            gates,
            c,
            tanh_c,
            h,
        }
    }

    /// Backpropagates `dh_final` (gradient w.r.t. the last hidden state)
    /// through all steps. Parameter gradients accumulate into `grad`; the
    /// input gradient is returned when `want_dx`.
    pub fn backward(&self, x: &Matrix, cache: &LstmCache, dh_final: &Matrix, grad: &mut Lstm, want_dx: bool) -> Option<Matrix> {
        let hid = self.hidden();
        let g4 = 4 * hid;
        let (steps, batch) = (cache.steps, cache.batch);
        assert_eq!(dh_final.shape(), (batch, hid));

        let mut dz = Matrix::zeros(steps * batch, g4);
        let mut dh = dh_final.clone();
        let mut dc = Matrix::zeros(batch, hid);
        for t in (0..steps).rev() {
            let rows = t * batch;
            for n in 0..batch {
                let r = rows + n;
                let gate = cache.gates.row(r);
                let dzr = dz.row_mut(r);
                for j in 0..hid {
                    let (i_g, f_g, g_g, o_g) = (gate[j], gate[hid + j], gate[2 * hid + j], gate[3 * hid + j]);
                    let tc = cache.tanh_c[(r, j)];
                    let dhv = dh[(n, j)];
                    let dct = dc[(n, j)] + dhv * o_g * (1.0 - tc * tc);
                    let c_prev = if t > 0 { cache.c[(r - batch, j)] } else { 0.0 };
                    dzr[j] = dct * g_g * i_g * (1.0 - i_g);
                    dzr[hid + j] = dct * c_prev * f_g * (1.0 - f_g);
                    dzr[2 * hid + j] = dct * i_g * (1.0 - g_g * g_g);
                    dzr[3 * hid + j] = dhv * tc * o_g * (1.0 - o_g);
                    dc[(n, j)] = dct * f_g;
                }
            }
            if t > 0 {
                gemm_slices(
                    batch,
                    g4,
                    hid,
                    1.0,
                    dz.row_block(rows, batch),
                    false,
                    self.w_h.as_slice(),
                    true,
                    0.0,
                    dh.as_mut_slice(),
                );
                // dW_h += h_{t-1}^T dz_t
                gemm_slices(
                    hid,
                    batch,
                    g4,
                    1.0,
                    cache.h.row_block(rows - batch, batch),
                    true,
                    dz.row_block(rows, batch),
                    false,
                    1.0,
                    grad.w_h.as_mut_slice(),
                );
            }
        }
        gemm(1.0, x, true, &dz, false, 1.0, &mut grad.w_x);
        add_col_sums(dz.as_slice(), g4, grad.b.as_mut_slice());
        want_dx.then(|| {
            let mut dx = Matrix::zeros(x.rows(), x.cols());
            gemm(1.0, &dz, false, &self.w_x, true, 0.0, &mut dx);
            dx
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn zero_parameters_give_zero_state() {
        let mut l = Lstm::new(3, 4, &mut rng::stream(1, &[]));
        l.w_x.fill(0.0);
        l.w_h.fill(0.0);
        l.b.fill(0.0);
        let x = Matrix::from_fn(5 * 2, 3, |r, c| (r * 3 + c) as f64);
        let cache = l.forward(&x, 5);
        assert!(cache.final_hidden().as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_step_hand_computed() {
        // 1 input, 2 units; gates i,f,g,o for unit j use w_x column k*2+j.
        let l = Lstm {
            w_x: Matrix::from_rows(&[vec![0.5, -0.5, 1.0, 0.0, 2.0, -1.0, 0.3, 0.7]]),
            w_h: Matrix::zeros(2, 8),
            b: Matrix::from_rows(&[vec![0.0, 0.1, 1.0, 1.0, 0.0, 0.2, -0.1, 0.0]]),
        };
        let x = Matrix::from_rows(&[vec![1.0]]);
        let h = l.forward(&x, 1).final_hidden();
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        // c = i * g since c_prev = 0; h = o * tanh(c).
        let unit = |zi: f64, zg: f64, zo: f64| s(zo) * (s(zi) * zg.tanh()).tanh();
        let h0 = unit(0.5, 2.0, 0.3 - 0.1);
        let h1 = unit(-0.5 + 0.1, -1.0 + 0.2, 0.7);
        assert!((h[(0, 0)] - h0).abs() < 1e-15);
        assert!((h[(0, 1)] - h1).abs() < 1e-15);
    }

    #[test]
    fn cell_decays_without_input() {
        // After the first step the input is zero and the input gate is shut,
        // so |c_t| = f |c_{t-1}| with f < 1.
        let mut l = Lstm::new(1, 3, &mut rng::stream(2, &[]));
        l.w_h.fill(0.0);
        l.b.fill(0.0);
        l.b.as_mut_slice()[..3].fill(-30.0);
        l.b.as_mut_slice()[3..6].fill(0.5);
        // Open the input gate only through a large first input.
        for j in 0..3 {
            l.w_x[(0, j)] = 60.0;
        }
        let steps = 8;
        let x = Matrix::from_fn(steps, 1, |r, _| if r == 0 { 1.0 } else { 0.0 });
        let cache = l.forward(&x, steps);
        let c = cache.cell_sequence();
        for j in 0..3 {
            assert!(c[(0, j)].abs() > 0.0);
            for t in 1..steps {
                assert!(c[(t, j)].abs() < c[(t - 1, j)].abs());
            }
        }
    }

    #[test]
    fn recurrent_init_is_orthogonal() {
        let l = Lstm::new(4, 6, &mut rng::stream(3, &[]));
        let w = &l.w_h;
        for i in 0..6 {
            for j in 0..6 {
                let dot: f64 = w.row(i).iter().zip(w.row(j)).map(|(a, b)| a * b).sum();
                assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!(l.b.as_slice()[6..12].iter().all(|v| *v == 1.0));
    }
}
