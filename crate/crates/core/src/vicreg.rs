//! Variance-invariance-covariance regularized loss over paired embeddings,
//! with closed-form gradients and a self-supervised training objective.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{make_views, AugmentConfig};
use crate::error::{Error, Result};
use crate::neural::model::Backbone;
use crate::neural::sequence::{pack_time_major, SequenceSet};
use crate::neural::train::Objective;
use crate::neural::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VicregConfig {
    /// Invariance weight.
    pub lambda: f64,
    /// Variance weight.
    pub mu: f64,
    /// Covariance weight.
    pub nu: f64,
    /// Target standard deviation per dimension.
    pub gamma: f64,
    pub epsilon: f64,
}

impl Default for VicregConfig {
    fn default() -> Self {
        VicregConfig {
            lambda: 8.0,
            mu: 32.0,
            nu: 1.0,
            gamma: 1.0,
            epsilon: 1e-4,
        }
    }
}

impl VicregConfig {
    pub fn validate(&self) -> Result<()> {
        let v = [self.lambda, self.mu, self.nu, self.gamma, self.epsilon];
        if v.iter().all(|x| *x >= 0.0) {
            Ok(())
        } else {
            Err(Error::Config("VICReg coefficients must be >= 0".into()))
        }
    }
}

fn need_batch(z: &Matrix) -> Result<()> {
    if z.rows() < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            actual: z.rows(),
        });
    }
    Ok(())
}

fn column_means(z: &Matrix) -> Vec<f64> {
    let mut m = vec![0.0; z.cols()];
    z.add_col_sums_to(&mut m);
    let n = z.rows() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

fn centered(z: &Matrix) -> Matrix {
    let m = column_means(z);
    Matrix::from_fn(z.rows(), z.cols(), |r, c| z[(r, c)] - m[c])
}

/// Unbiased `D x D` covariance of the columns of `z`.
pub fn covariance(z: &Matrix) -> Matrix {
    let zc = centered(z);
    let mut c = zc.transpose().matmul(&zc);
    let scale = 1.0 / (z.rows() as f64 - 1.0);
    c.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
    c
}

/// Mean squared distance between paired rows.
pub fn invariance_term(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let ss: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(ss / a.rows() as f64)
}

fn regularized_std(z: &Matrix, epsilon: f64) -> Vec<f64> {
    let c = covariance(z);
    (0..z.cols()).map(|j| (c[(j, j)] + epsilon).sqrt()).collect()
}

pub fn variance_term(z: &Matrix, gamma: f64, epsilon: f64) -> Result<f64> {
    need_batch(z)?;
    let s = regularized_std(z, epsilon);
    Ok(s.iter().map(|s| (gamma - s).max(0.0)).sum::<f64>() / z.cols() as f64)
}

pub fn covariance_term(z: &Matrix) -> Result<f64> {
    need_batch(z)?;
    let c = covariance(z);
    let d = z.cols();
    let mut sum = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                sum += c[(i, j)] * c[(i, j)];
            }
        }
    }
    Ok(sum / d as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VicregTerms {
    pub invariance: f64,
    pub variance: [f64; 2],
    pub covariance: [f64; 2],
    pub total: f64,
}

pub fn vicreg_loss(a: &Matrix, b: &Matrix, cfg: &VicregConfig) -> Result<VicregTerms> {
    let invariance = invariance_term(a, b)?;
    let variance = [variance_term(a, cfg.gamma, cfg.epsilon)?, variance_term(b, cfg.gamma, cfg.epsilon)?];
    let covariance = [covariance_term(a)?, covariance_term(b)?];
    Ok(VicregTerms {
        invariance,
        variance,
        covariance,
        total: cfg.lambda * invariance
            + cfg.mu * (variance[0] + variance[1])
            + cfg.nu * (covariance[0] + covariance[1]),
    })
}

/// Gradient of `mu·v(z) + nu·c(z)` with respect to `z`.
fn branch_gradient(z: &Matrix, cfg: &VicregConfig) -> Matrix {
    let (n, d) = z.shape();
    let zc = centered(z);
    let mut c = zc.transpose().matmul(&zc);
    let nm1 = n as f64 - 1.0;
    c.as_mut_slice().iter_mut().for_each(|v| *v /= nm1);
    let s: Vec<f64> = (0..d).map(|j| (c[(j, j)] + cfg.epsilon).sqrt()).collect();
    for j in 0..d {
        c[(j, j)] = 0.0;
    }
    let mut g = zc.matmul(&c);
    let cov_scale = cfg.nu * 4.0 / (d as f64 * nm1);
    for r in 0..n {
        for j in 0..d {
            let var = if cfg.gamma - s[j] > 0.0 {
                -cfg.mu * zc[(r, j)] / (d as f64 * s[j] * nm1)
            } else {
                0.0
            };
            g[(r, j)] = cov_scale * g[(r, j)] + var;
        }
    }
    g
}

/// Loss terms plus `dL/da` and `dL/db`.
pub fn vicreg_loss_and_grad(a: &Matrix, b: &Matrix, cfg: &VicregConfig) -> Result<(VicregTerms, Matrix, Matrix)> {
    let terms = vicreg_loss(a, b, cfg)?;
    let scale = 2.0 * cfg.lambda / a.rows() as f64;
    let mut ga = branch_gradient(a, cfg);
    let mut gb = branch_gradient(b, cfg);
    for ((x, y), (da, db)) in a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .zip(ga.as_mut_slice().iter_mut().zip(gb.as_mut_slice().iter_mut()))
    {
        let d = scale * (x - y);
        *da += d;
        *db -= d;
    }
    Ok((terms, ga, gb))
}

/// Label-free pre-training of a backbone on pairs of augmented views. Both
/// views pass through the same weights; their gradients accumulate.
pub struct VicregObjective<'a> {
    pub train: &'a SequenceSet,
    pub validation: &'a SequenceSet,
    pub vicreg: VicregConfig,
    pub augment: AugmentConfig,
    /// Batch size used to chunk the validation set.
    pub batch_size: usize,
    pub seed: u64,
    train_rng: ChaCha8Rng,
}

impl<'a> VicregObjective<'a> {
    pub fn new(
        train: &'a SequenceSet,
        validation: &'a SequenceSet,
        vicreg: VicregConfig,
        augment: AugmentConfig,
        batch_size: usize,
        seed: u64,
    ) -> Self {
        VicregObjective {
            train,
            validation,
            vicreg,
            augment,
            batch_size,
            seed,
            train_rng: rng::stream(seed, &[0]),
        }
    }

    fn views(set: &SequenceSet, idx: &[usize], cfg: &AugmentConfig, r: &mut ChaCha8Rng) -> (Matrix, Matrix) {
        let mut a = Vec::with_capacity(idx.len());
        let mut b = Vec::with_capacity(idx.len());
        for &i in idx {
            let w = set.window_refs()[i];
            let (x, y) = make_views(set.padded_trial(w.trial), w.end, set.steps(), cfg, r);
            a.push(x);
            b.push(y);
        }
        (pack_time_major(&a), pack_time_major(&b))
    }

    fn loss_on(&self, params: &Backbone, xa: &Matrix, xb: &Matrix, steps: usize, grad: Option<&mut Backbone>) -> Result<f64> {
        let (za, ca) = params.forward_cached(xa, steps)?;
        let (zb, cb) = params.forward_cached(xb, steps)?;
        let (terms, ga, gb) = vicreg_loss_and_grad(&za, &zb, &self.vicreg)?;
        if let Some(g) = grad {
            params.backward(&ca, &ga, g, false);
            params.backward(&cb, &gb, g, false);
        }
        Ok(terms.total)
    }
}

impl Objective for VicregObjective<'_> {
    type Params = Backbone;

    fn train_len(&self) -> usize {
        self.train.len()
    }

    fn batch_loss(&mut self, params: &Backbone, batch: &[usize], grad: &mut Backbone) -> Result<f64> {
        // A trailing batch of one has no batch statistics; skip it.
        if batch.len() < 2 {
            return Ok(0.0);
        }
        let (xa, xb) = Self::views(self.train, batch, &self.augment, &mut self.train_rng);
        self.loss_on(params, &xa, &xb, self.train.steps(), Some(grad))
    }

    fn validation_loss(&mut self, params: &Backbone) -> Result<f64> {
        let mut r = rng::stream(self.seed, &[1]);
        // Fixed shuffle so each chunk mixes classes like a training batch.
        let mut idx: Vec<usize> = (0..self.validation.len()).collect();
        idx.shuffle(&mut rng::stream(self.seed, &[2]));
        let mut total = 0.0;
        let mut count = 0usize;
        for chunk in idx.chunks(self.batch_size).filter(|c| c.len() >= 2) {
            let (xa, xb) = Self::views(self.validation, chunk, &self.augment, &mut r);
            total += self.loss_on(params, &xa, &xb, self.validation.steps(), None)? * chunk.len() as f64;
            count += chunk.len();
        }
        if count == 0 {
            return Err(Error::InsufficientSamples { required: 2, actual: idx.len() });
        }
        Ok(total / count as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eye2() -> Matrix {
        Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]])
    }

    #[test]
    fn worked_examples() {
        let cfg = VicregConfig::default();
        let z = eye2();
        assert!((variance_term(&z, 1.0, 1e-4).unwrap() - (1.0 - 0.5001f64.sqrt())).abs() < 1e-15);
        assert!((variance_term(&z, 1.0, 1e-4).unwrap() - 0.29282).abs() < 1e-5);
        assert!((covariance_term(&z).unwrap() - 0.25).abs() < 1e-15);
        let t = vicreg_loss(&z, &z, &cfg).unwrap();
        assert_eq!(t.invariance, 0.0);
        // 64·(1 − √0.5001) + 0.5 = 19.24065; the four-decimal figure rounds the variance term first.
        assert!((t.total - 19.2405).abs() < 5e-4);
        assert!((t.total - (64.0 * (1.0 - 0.5001f64.sqrt()) + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn invariance_examples() {
        let a = Matrix::from_rows(&[vec![0.0, 0.0]]);
        let b = Matrix::from_rows(&[vec![3.0, 4.0]]);
        assert_eq!(invariance_term(&a, &b).unwrap(), 25.0);
        assert!(invariance_term(&a, &eye2()).is_err());
    }

    #[test]
    fn collapse_penalty() {
        let z = Matrix::from_fn(5, 3, |_, c| c as f64);
        assert!((variance_term(&z, 1.0, 1e-4).unwrap() - 0.99).abs() < 1e-15);
        let cfg = VicregConfig::default();
        let t = vicreg_loss(&z, &z, &cfg).unwrap();
        assert!((t.total - 2.0 * cfg.mu * 0.99).abs() < 1e-12);
    }

    #[test]
    fn wide_columns_have_no_variance_penalty() {
        let z = Matrix::from_rows(&[vec![-3.0, 5.0], vec![3.0, -5.0]]);
        assert_eq!(variance_term(&z, 1.0, 1e-4).unwrap(), 0.0);
    }

    #[test]
    fn single_row_rejected() {
        let z = Matrix::zeros(1, 3);
        assert!(matches!(variance_term(&z, 1.0, 1e-4), Err(Error::InsufficientSamples { .. })));
        assert!(covariance_term(&z).is_err());
    }

    fn matrix(n: usize, d: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(-2.0f64..2.0, n * d).prop_map(move |v| Matrix::from_vec(n, d, v))
    }

    proptest! {
        #[test]
        fn joint_row_permutation_invariance(
            (a, b, perm) in (2usize..8, 1usize..5).prop_flat_map(|(n, d)| {
                (matrix(n, d), matrix(n, d), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
            })
        ) {
            let cfg = VicregConfig::default();
            let pa = Matrix::from_fn(a.rows(), a.cols(), |r, c| a[(perm[r], c)]);
            let pb = Matrix::from_fn(b.rows(), b.cols(), |r, c| b[(perm[r], c)]);
            let x = vicreg_loss(&a, &b, &cfg).unwrap().total;
            let y = vicreg_loss(&pa, &pb, &cfg).unwrap().total;
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }

        #[test]
        fn analytic_gradient_matches_differences((a, b) in (2usize..6, 1usize..4).prop_flat_map(|(n, d)| (matrix(n, d), matrix(n, d)))) {
            let cfg = VicregConfig::default();
            let (_, ga, gb) = vicreg_loss_and_grad(&a, &b, &cfg).unwrap();
            let h = 1e-6;
            for (which, g) in [(0, &ga), (1, &gb)] {
                for i in 0..a.as_slice().len() {
                    let mut p = [a.clone(), b.clone()];
                    p[which].as_mut_slice()[i] += h;
                    let up = vicreg_loss(&p[0], &p[1], &cfg).unwrap().total;
                    p[which].as_mut_slice()[i] -= 2.0 * h;
                    let down = vicreg_loss(&p[0], &p[1], &cfg).unwrap().total;
                    let num = (up - down) / (2.0 * h);
                    prop_assert!((num - g.as_slice()[i]).abs() < 1e-5 * (1.0 + num.abs()), "{num} vs {}", g.as_slice()[i]);
                }
            }
        }
    }
}
