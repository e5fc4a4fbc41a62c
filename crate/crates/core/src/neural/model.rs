//! Backbone (LSTM -> hidden blocks of dense/layer-norm/ReLU -> linear
//! projection) and softmax classification head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{relu, relu_backward, Dense, LayerNorm, LayerNormCache};
use super::lstm::{Lstm, LstmCache};
use super::loss::softmax_rows;
use super::params::ParamSet;
use super::Matrix;
use crate::class::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::features::NUM_FEATURES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub lstm_units: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    /// Width of the backbone's linear output (the embedding dimension).
    pub embedding_dim: usize,
    pub num_classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dim: NUM_FEATURES,
            lstm_units: 128,
            hidden_layers: 2,
            hidden_units: 128,
            embedding_dim: 128,
            num_classes: NUM_CLASSES,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.input_dim, self.lstm_units, self.hidden_units, self.embedding_dim].contains(&0) || self.num_classes < 2 {
            return Err(Error::Config("model widths must be positive and num_classes >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenBlock {
    pub dense: Dense,
    pub norm: LayerNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    pub lstm: Lstm,
    pub hidden: Vec<HiddenBlock>,
    pub projection: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub dense: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub backbone: Backbone,
    pub head: Head,
}

struct BlockCache {
    input: Matrix,
    norm: LayerNormCache,
    normed: Matrix,
}

pub struct BackboneCache {
    x: Matrix,
    lstm: LstmCache,
    blocks: Vec<BlockCache>,
    proj_input: Matrix,
}

fn check_finite(m: &Matrix, location: &str) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        let bad = m.as_slice().iter().filter(|v| !v.is_finite()).count();
        Err(Error::NonFinite {
            location: location.into(),
            detail: format!("{bad} of {} values", m.as_slice().len()),
        })
    }
}

impl Backbone {
    pub fn new<R: Rng>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let lstm = Lstm::new(cfg.input_dim, cfg.lstm_units, rng);
        let mut width = cfg.lstm_units;
        let hidden = (0..cfg.hidden_layers)
            .map(|_| {
                let b = HiddenBlock {
                    dense: Dense::new(width, cfg.hidden_units, rng),
                    norm: LayerNorm::new(cfg.hidden_units),
                };
                width = cfg.hidden_units;
                b
            })
            .collect();
        Backbone {
            lstm,
            hidden,
            projection: Dense::new(width, cfg.embedding_dim, rng),
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.projection.w.cols()
    }

    /// Embeds a time-major batch `(steps·N) x F` into `N x D`.
    pub fn forward_cached(&self, x: &Matrix, steps: usize) -> Result<(Matrix, BackboneCache)> {
        check_finite(x, "backbone input")?;
        let lstm = self.lstm.forward(x, steps);
        let mut h = lstm.final_hidden();
        check_finite(&h, "LSTM state")?;
        let mut blocks = Vec::with_capacity(self.hidden.len());
        for b in &self.hidden {
            let pre = b.dense.forward(&h);
            let (normed, norm) = b.norm.forward(&pre);
            let out = relu(&normed);
            blocks.push(BlockCache { input: h, norm, normed });
            h = out;
        }
        let z = self.projection.forward(&h);
        check_finite(&z, "embedding")?;
        Ok((
            z,
            BackboneCache {
                x: x.clone(),
                lstm,
                blocks,
                proj_input: h,
            },
        ))
    }

    pub fn forward(&self, x: &Matrix, steps: usize) -> Result<Matrix> {
        self.forward_cached(x, steps).map(|(z, _)| z)
    }

    /// Accumulates gradients for `dz = dL/dZ` into `grad`; returns `dL/dx`
    /// when requested.
    pub fn backward(&self, cache: &BackboneCache, dz: &Matrix, grad: &mut Backbone, want_dx: bool) -> Option<Matrix> {
        let mut dh = self.projection.backward(&cache.proj_input, dz, &mut grad.projection);
        for ((b, c), g) in self.hidden.iter().zip(&cache.blocks).zip(grad.hidden.iter_mut()).rev() {
            let dn = relu_backward(&c.normed, &dh);
            let dpre = b.norm.backward(&c.norm, &dn, &mut g.norm);
            dh = b.dense.backward(&c.input, &dpre, &mut g.dense);
        }
        self.lstm.backward(&cache.x, &cache.lstm, &dh, &mut grad.lstm, want_dx)
    }
}

impl Head {
    pub fn new<R: Rng>(embedding_dim: usize, num_classes: usize, rng: &mut R) -> Self {
        Head {
            dense: Dense::new(embedding_dim, num_classes, rng),
        }
    }

    pub fn logits(&self, z: &Matrix) -> Matrix {
        self.dense.forward(z)
    }

    pub fn posteriors(&self, z: &Matrix) -> Matrix {
        softmax_rows(&self.logits(z))
    }
}

impl Model {
    pub fn new<R: Rng>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let backbone = Backbone::new(cfg, rng);
        let head = Head::new(cfg.embedding_dim, cfg.num_classes, rng);
        Model { backbone, head }
    }

    pub fn posteriors(&self, x: &Matrix, steps: usize) -> Result<Matrix> {
        Ok(self.head.posteriors(&self.backbone.forward(x, steps)?))
    }
}

impl ParamSet for Backbone {
    fn named(&self) -> Vec<(String, &Matrix)> {
        let mut v = vec![
            ("lstm.w_x".to_string(), &self.lstm.w_x),
            ("lstm.w_h".to_string(), &self.lstm.w_h),
            ("lstm.b".to_string(), &self.lstm.b),
        ];
        for (i, b) in self.hidden.iter().enumerate() {
            v.push((format!("hidden{i}.w"), &b.dense.w));
            v.push((format!("hidden{i}.b"), &b.dense.b));
            v.push((format!("hidden{i}.ln_gain"), &b.norm.gain));
            v.push((format!("hidden{i}.ln_bias"), &b.norm.bias));
        }
        v.push(("projection.w".to_string(), &self.projection.w));
        v.push(("projection.b".to_string(), &self.projection.b));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = vec![&mut self.lstm.w_x, &mut self.lstm.w_h, &mut self.lstm.b];
        for b in &mut self.hidden {
            v.push(&mut b.dense.w);
            v.push(&mut b.dense.b);
            v.push(&mut b.norm.gain);
            v.push(&mut b.norm.bias);
        }
        v.push(&mut self.projection.w);
        v.push(&mut self.projection.b);
        v
    }
}

impl ParamSet for Head {
    fn named(&self) -> Vec<(String, &Matrix)> {
        vec![("w".to_string(), &self.dense.w), ("b".to_string(), &self.dense.b)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.dense.w, &mut self.dense.b]
    }
}

impl ParamSet for Model {
    fn named(&self) -> Vec<(String, &Matrix)> {
        let mut v: Vec<(String, &Matrix)> = self
            .backbone
            .named()
            .into_iter()
            .map(|(n, m)| (format!("backbone.{n}"), m))
            .collect();
        v.extend(self.head.named().into_iter().map(|(n, m)| (format!("head.{n}"), m)));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = self.backbone.tensors_mut();
        v.extend(self.head.tensors_mut());
        v
    }
}
