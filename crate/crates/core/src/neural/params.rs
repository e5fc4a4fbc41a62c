use serde::{Deserialize, Serialize};

use super::layers::{Dense, LayerNorm};
use super::lstm::Lstm;
use super::Matrix;
use crate::error::{Error, Result};

/// A collection of named trainable tensors. Gradients use the same type.
pub trait ParamSet: Clone {
    /// Tensors with their dotted names, in a fixed order.
    fn named(&self) -> Vec<(String, &Matrix)>;

    /// Mutable tensors in the same order as [`ParamSet::named`].
    fn tensors_mut(&mut self) -> Vec<&mut Matrix>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn add_assign(&mut self, other: &Self) {
        let src: Vec<&Matrix> = other.named().into_iter().map(|(_, m)| m).collect();
        for (dst, s) in self.tensors_mut().into_iter().zip(src) {
            for (d, v) in dst.as_mut_slice().iter_mut().zip(s.as_slice()) {
                *d += v;
            }
        }
    }

    fn num_params(&self) -> usize {
        self.named().iter().map(|(_, m)| m.as_slice().len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, m)| m.is_finite())
    }

    fn to_tensors(&self) -> Vec<Tensor> {
        self.named()
            .into_iter()
            .map(|(name, m)| Tensor {
                name,
                shape: vec![m.rows(), m.cols()],
                values: m.as_slice().to_vec(),
            })
            .collect()
    }

    /// Overwrites every tensor from `tensors`, matched by name and shape.
    fn load_tensors(&mut self, tensors: &[Tensor]) -> Result<()> {
        let names: Vec<(String, (usize, usize))> =
            self.named().into_iter().map(|(n, m)| (n, m.shape())).collect();
        for ((name, shape), dst) in names.into_iter().zip(self.tensors_mut()) {
            let t = tensors
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| Error::InvalidInput(format!("checkpoint lacks tensor {name}")))?;
            if t.shape != [shape.0, shape.1] {
                return Err(Error::ShapeMismatch(format!("{name}: checkpoint {:?} vs model {shape:?}", t.shape)));
            }
            dst.as_mut_slice().copy_from_slice(&t.values);
        }
        Ok(())
    }
}

/// Serialized tensor: name, shape and row-major values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl ParamSet for Dense {
    fn named(&self) -> Vec<(String, &Matrix)> {
        vec![("w".into(), &self.w), ("b".into(), &self.b)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.w, &mut self.b]
    }
}

impl ParamSet for LayerNorm {
    fn named(&self) -> Vec<(String, &Matrix)> {
        vec![("gain".into(), &self.gain), ("bias".into(), &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.gain, &mut self.bias]
    }
}

impl ParamSet for Lstm {
    fn named(&self) -> Vec<(String, &Matrix)> {
        vec![("w_x".into(), &self.w_x), ("w_h".into(), &self.w_h), ("b".into(), &self.b)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.w_x, &mut self.w_h, &mut self.b]
    }
}

/// A single free tensor, e.g. an input whose gradient is being checked.
#[derive(Debug, Clone, PartialEq)]
pub struct Free(pub Matrix);

impl ParamSet for Free {
    fn named(&self) -> Vec<(String, &Matrix)> {
        vec![("x".into(), &self.0)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.0]
    }
}
