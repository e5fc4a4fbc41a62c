//! Linear discriminant analysis with a pooled, ridge-regularized covariance
//! and softmax posteriors over the linear discriminant scores.

use serde::{Deserialize, Serialize};

use crate::class::Class;
use crate::error::{Error, Result};
use crate::neural::Matrix;

/// Ridge added to the covariance diagonal, relative to its mean variance.
pub const RIDGE_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub dim: usize,
    /// `K x dim`.
    pub class_means: Vec<Vec<f64>>,
    /// Regularized pooled covariance, row-major `dim x dim`.
    pub covariance: Vec<f64>,
    pub priors: Vec<f64>,
    /// Per-class `Σ⁻¹ μ_k`.
    weights: Vec<Vec<f64>>,
    /// Per-class `-½ μ_kᵀ Σ⁻¹ μ_k + ln π_k`.
    offsets: Vec<f64>,
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s.is_nan() || s <= 0.0 {
                    return Err(Error::NonFinite {
                        location: "LDA covariance".into(),
                        detail: format!("not positive definite at pivot {i} ({s})"),
                    });
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b`.
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    y
}

impl LdaModel {
    /// Fits on rows of `x` with integer labels in `0..num_classes`.
    pub fn fit(x: &[&[f64]], labels: &[usize], num_classes: usize) -> Result<Self> {
        if x.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!("{} rows vs {} labels", x.len(), labels.len())));
        }
        let dim = x.first().map(|r| r.len()).unwrap_or(0);
        if dim == 0 || num_classes < 2 {
            return Err(Error::InvalidInput("LDA needs non-empty features and >= 2 classes".into()));
        }
        if x.len() < dim + 1 {
            return Err(Error::InsufficientSamples {
                required: dim + 1,
                actual: x.len(),
            });
        }
        let mut counts = vec![0usize; num_classes];
        let mut means = vec![vec![0.0; dim]; num_classes];
        for (row, &y) in x.iter().zip(labels) {
            if row.len() != dim || y >= num_classes {
                return Err(Error::InvalidInput(format!("bad row width {} or label {y}", row.len())));
            }
            counts[y] += 1;
            for (m, v) in means[y].iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(match Class::from_index(k) {
                Some(c) if num_classes == crate::NUM_CLASSES => Error::EmptyClass(c),
                _ => Error::InvalidInput(format!("class {k} has no training samples")),
            });
        }
        for (m, &c) in means.iter_mut().zip(&counts) {
            m.iter_mut().for_each(|v| *v /= c as f64);
        }
        let mut cov = vec![0.0; dim * dim];
        let mut d = vec![0.0; dim];
        for (row, &y) in x.iter().zip(labels) {
            for ((di, v), m) in d.iter_mut().zip(row.iter()).zip(&means[y]) {
                *di = v - m;
            }
            for i in 0..dim {
                for j in 0..=i {
                    cov[i * dim + j] += d[i] * d[j];
                }
            }
        }
        let denom = (x.len() - num_classes).max(1) as f64;
        for i in 0..dim {
            for j in 0..=i {
                let v = cov[i * dim + j] / denom;
                cov[i * dim + j] = v;
                cov[j * dim + i] = v;
            }
        }
        let trace: f64 = (0..dim).map(|i| cov[i * dim + i]).sum();
        let ridge = RIDGE_SCALE * trace / dim as f64;
        for i in 0..dim {
            cov[i * dim + i] += ridge;
        }
        let priors: Vec<f64> = counts.iter().map(|&c| c as f64 / x.len() as f64).collect();
        let mut model = LdaModel {
            dim,
            class_means: means,
            covariance: cov,
            priors,
            weights: Vec::new(),
            offsets: Vec::new(),
        };
        model.refresh()?;
        Ok(model)
    }

    /// Fits on a feature matrix with [`Class`] labels over all seven classes.
    pub fn fit_classes(x: &Matrix, labels: &[Class]) -> Result<Self> {
        let rows: Vec<&[f64]> = (0..x.rows()).map(|r| x.row(r)).collect();
        let y: Vec<usize> = labels.iter().map(|c| c.index()).collect();
        Self::fit(&rows, &y, crate::NUM_CLASSES)
    }

    /// Recomputes the discriminant coefficients from means, covariance and priors.
    fn refresh(&mut self) -> Result<()> {
        let l = cholesky(&self.covariance, self.dim)?;
        self.weights = self.class_means.iter().map(|m| cholesky_solve(&l, self.dim, m)).collect();
        self.offsets = self
            .class_means
            .iter()
            .zip(&self.weights)
            .zip(&self.priors)
            .map(|((m, w), p)| -0.5 * dot(m, w) + p.ln())
            .collect();
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.priors.len()
    }

    /// Linear discriminant scores `xᵀΣ⁻¹μ_k − ½μ_kᵀΣ⁻¹μ_k + ln π_k`.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights.iter().zip(&self.offsets).map(|(w, b)| dot(w, x) + b).collect()
    }

    pub fn predict_posterior(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.scores(x);
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in &mut s {
            *v = (*v - m).exp();
            total += *v;
        }
        s.iter_mut().for_each(|v| *v /= total);
        s
    }

    /// Arg-max class index and its posterior.
    pub fn predict(&self, x: &[f64]) -> (usize, f64) {
        argmax(&self.predict_posterior(x))
    }
}

pub(crate) fn argmax(p: &[f64]) -> (usize, f64) {
    let mut best = (0, p[0]);
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Serialized form: the fitted statistics; coefficients are rebuilt on load.
#[derive(Serialize, Deserialize)]
struct LdaDoc {
    dim: usize,
    class_means: Vec<Vec<f64>>,
    covariance: Vec<f64>,
    priors: Vec<f64>,
}

impl LdaModel {
    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(LdaDoc {
            dim: self.dim,
            class_means: self.class_means.clone(),
            covariance: self.covariance.clone(),
            priors: self.priors.clone(),
        })
        .expect("plain numeric document")
    }

    pub fn from_value(v: serde_json::Value) -> Result<Self> {
        let d: LdaDoc = serde_json::from_value(v)?;
        if d.covariance.len() != d.dim * d.dim || d.class_means.iter().any(|m| m.len() != d.dim) || d.priors.len() != d.class_means.len() {
            return Err(Error::ShapeMismatch("LDA document dimensions disagree".into()));
        }
        let mut m = LdaModel {
            dim: d.dim,
            class_means: d.class_means,
            covariance: d.covariance,
            priors: d.priors,
            weights: Vec::new(),
            offsets: Vec::new(),
        };
        m.refresh()?;
        Ok(m)
    }
}
