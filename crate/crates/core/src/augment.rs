//! Random lag, per-feature random scaling and additive white Gaussian noise,
//! applied in that order to produce the two views used for VICReg.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureFrame, NUM_FEATURES};
use crate::neural::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub lag_a: i64,
    pub lag_b: i64,
    pub scale_mean: f64,
    pub scale_std: f64,
    pub noise_mean: f64,
    pub noise_std: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            lag_a: -4,
            lag_b: 4,
            scale_mean: 1.0,
            scale_std: 0.05,
            noise_mean: 0.0,
            noise_std: 0.05,
        }
    }
}

impl AugmentConfig {
    /// All randomness switched off: every augmentation is the identity.
    pub fn identity() -> Self {
        AugmentConfig {
            lag_a: 0,
            lag_b: 0,
            scale_mean: 1.0,
            scale_std: 0.0,
            noise_mean: 0.0,
            noise_std: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lag_b < self.lag_a {
            return Err(Error::Config("lag_b must be >= lag_a".into()));
        }
        if !(self.scale_std >= 0.0 && self.noise_std >= 0.0) {
            return Err(Error::Config("augmentation standard deviations must be >= 0".into()));
        }
        Ok(())
    }
}

/// `len` consecutive frames of `buffer` starting at `start`, as a `len x 24` matrix.
pub fn window(buffer: &[FeatureFrame], start: usize, len: usize) -> Matrix {
    let mut m = Matrix::zeros(len, NUM_FEATURES);
    for (t, f) in buffer[start..start + len].iter().enumerate() {
        m.row_mut(t).copy_from_slice(&f.0);
    }
    m
}

/// Shifts the window by `phi ~ U{a..b}`, clamped so the window stays inside
/// the trial. Returns the new start and the window.
pub fn random_lag<R: Rng>(
    buffer: &[FeatureFrame],
    start: usize,
    len: usize,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> (usize, Matrix) {
    assert!(len <= buffer.len() && start + len <= buffer.len(), "window outside trial");
    let phi = rng.random_range(cfg.lag_a..=cfg.lag_b);
    let max_start = (buffer.len() - len) as i64;
    let shifted = (start as i64 + phi).clamp(0, max_start) as usize;
    (shifted, window(buffer, shifted, len))
}

/// Multiplies column `f` by `alpha_f ~ N(scale_mean, scale_std^2)` for all time steps.
pub fn random_scale<R: Rng>(x: &mut Matrix, cfg: &AugmentConfig, rng: &mut R) {
    let dist = Normal::new(cfg.scale_mean, cfg.scale_std).expect("validated scale_std");
    let alpha: Vec<f64> = (0..x.cols()).map(|_| dist.sample(rng)).collect();
    for t in 0..x.rows() {
        for (v, a) in x.row_mut(t).iter_mut().zip(&alpha) {
            *v *= a;
        }
    }
}

/// Adds independent `N(noise_mean, noise_std^2)` noise to every element.
pub fn add_awgn<R: Rng>(x: &mut Matrix, cfg: &AugmentConfig, rng: &mut R) {
    let dist = Normal::new(cfg.noise_mean, cfg.noise_std).expect("validated noise_std");
    for v in x.as_mut_slice() {
        *v += dist.sample(rng);
    }
}

/// One pass of the lag -> scale -> noise pipeline.
pub fn augment<R: Rng>(buffer: &[FeatureFrame], start: usize, len: usize, cfg: &AugmentConfig, rng: &mut R) -> Matrix {
    let (_, mut x) = random_lag(buffer, start, len, cfg, rng);
    random_scale(&mut x, cfg, rng);
    add_awgn(&mut x, cfg, rng);
    x
}

/// Two independent draws of the pipeline on the same source window.
pub fn make_views<R: Rng>(
    buffer: &[FeatureFrame],
    start: usize,
    len: usize,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> (Matrix, Matrix) {
    let a = augment(buffer, start, len, cfg, rng);
    let b = augment(buffer, start, len, cfg, rng);
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn ramp_buffer(n: usize) -> Vec<FeatureFrame> {
        (0..n).map(|i| FeatureFrame([i as f64; NUM_FEATURES])).collect()
    }

    #[test]
    fn zero_lag_is_identity() {
        let buf = ramp_buffer(40);
        let cfg = AugmentConfig::identity();
        let (s, x) = random_lag(&buf, 10, 8, &cfg, &mut rng::stream(1, &[]));
        assert_eq!(s, 10);
        assert_eq!(x, window(&buf, 10, 8));
    }

    #[test]
    fn lag_by_two() {
        let buf = ramp_buffer(40);
        let cfg = AugmentConfig { lag_a: 2, lag_b: 2, ..AugmentConfig::identity() };
        let (s, x) = random_lag(&buf, 0, 8, &cfg, &mut rng::stream(1, &[]));
        assert_eq!(s, 2);
        assert_eq!(x[(0, 0)], 2.0);
        // Rows stay consecutive frames of the source trial.
        for t in 0..8 {
            assert_eq!(x[(t, 5)], (2 + t) as f64);
        }
    }

    #[test]
    fn lag_clamped_at_trial_edges() {
        let buf = ramp_buffer(20);
        let cfg = AugmentConfig { lag_a: -4, lag_b: -4, ..AugmentConfig::identity() };
        let (s, _) = random_lag(&buf, 0, 8, &cfg, &mut rng::stream(1, &[]));
        assert_eq!(s, 0);
        let cfg = AugmentConfig { lag_a: 4, lag_b: 4, ..AugmentConfig::identity() };
        let (s, _) = random_lag(&buf, 10, 8, &cfg, &mut rng::stream(1, &[]));
        assert_eq!(s, 12);
        let mut r = rng::stream(9, &[]);
        for _ in 0..200 {
            let (s, x) = random_lag(&buf, 1, 8, &AugmentConfig::default(), &mut r);
            assert!(s <= 12);
            assert_eq!((x.rows(), x.cols()), (8, NUM_FEATURES));
        }
    }

    #[test]
    fn scale_is_column_constant() {
        let mut x = Matrix::from_fn(5, NUM_FEATURES, |_, _| 1.0);
        let cfg = AugmentConfig { scale_std: 0.3, ..AugmentConfig::identity() };
        let mut r = rng::stream(4, &[]);
        random_scale(&mut x, &cfg, &mut r);
        // Replay the same draws to get the factors.
        let mut r2 = rng::stream(4, &[]);
        let dist = Normal::new(1.0, 0.3).unwrap();
        let alpha: Vec<f64> = (0..NUM_FEATURES).map(|_| dist.sample(&mut r2)).collect();
        for t in 0..5 {
            assert_eq!(x.row(t), &alpha[..]);
        }

        let mut zeros = Matrix::zeros(3, NUM_FEATURES);
        random_scale(&mut zeros, &cfg, &mut r);
        assert!(zeros.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_config_leaves_input_untouched() {
        let buf: Vec<FeatureFrame> = (0..30).map(|i| FeatureFrame([(i as f64).sin(); NUM_FEATURES])).collect();
        let (a, b) = make_views(&buf, 5, 10, &AugmentConfig::identity(), &mut rng::stream(2, &[]));
        assert_eq!(a, window(&buf, 5, 10));
        assert_eq!(b, a);
    }

    #[test]
    fn views_differ_and_keep_shape() {
        let buf = ramp_buffer(50);
        let (a, b) = make_views(&buf, 20, 16, &AugmentConfig::default(), &mut rng::stream(2, &[]));
        assert_ne!(a, b);
        assert_eq!((a.rows(), a.cols()), (16, NUM_FEATURES));
    }

    #[test]
    fn awgn_moments() {
        let cfg = AugmentConfig::default();
        let mut x = Matrix::zeros(100_000 / NUM_FEATURES + 1, NUM_FEATURES);
        let n = x.as_slice().len() as f64;
        add_awgn(&mut x, &cfg, &mut rng::stream(11, &[]));
        let mean = x.as_slice().iter().sum::<f64>() / n;
        let var = x.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 3.0 * 0.05 / n.sqrt(), "mean {mean}");
        assert!((var / 0.0025 - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn awgn_is_reproducible() {
        let cfg = AugmentConfig::default();
        let mut a = Matrix::zeros(4, NUM_FEATURES);
        let mut b = Matrix::zeros(4, NUM_FEATURES);
        add_awgn(&mut a, &cfg, &mut rng::stream(5, &[1]));
        add_awgn(&mut b, &cfg, &mut rng::stream(5, &[1]));
        assert_eq!(a, b);
    }

    #[test]
    fn pipeline_scales_before_adding_noise() {
        // On a zero input, scale-then-noise leaves variance sigma_n^2 while
        // noise-then-scale would give sigma_n^2 (mu_s^2 + sigma_s^2) = 2 sigma_n^2.
        let cfg = AugmentConfig { lag_a: 0, lag_b: 0, scale_mean: 1.0, scale_std: 1.0, noise_mean: 0.0, noise_std: 1.0 };
        let buf = vec![FeatureFrame([0.0; NUM_FEATURES]); 4];
        let mut r = rng::stream(17, &[]);
        let mut sum_sq = 0.0;
        let mut n = 0.0;
        for _ in 0..4000 {
            let x = augment(&buf, 0, 4, &cfg, &mut r);
            sum_sq += x.as_slice().iter().map(|v| v * v).sum::<f64>();
            n += x.as_slice().len() as f64;
        }
        let var = sum_sq / n;
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }
}
