//! Supervised cross-entropy objectives: end-to-end over sequences and
//! head-only over cached embeddings.

use super::loss::cross_entropy;
use super::model::{Head, Model};
use super::sequence::SequenceSet;
use super::train::Objective;
use super::Matrix;
use crate::error::Result;

/// Rows per forward pass when scoring whole sets.
pub const EVAL_CHUNK: usize = 1024;

/// End-to-end backbone + head training with cross-entropy.
pub struct Supervised<'a> {
    pub train: &'a SequenceSet,
    pub validation: &'a SequenceSet,
}

impl Supervised<'_> {
    fn loss_on(model: &Model, set: &SequenceSet, idx: &[usize], grad: Option<&mut Model>) -> Result<f64> {
        let x = set.gather(idx);
        let (z, cache) = model.backbone.forward_cached(&x, set.steps())?;
        let (loss, dlogits) = cross_entropy(&model.head.logits(&z), &set.gather_labels(idx));
        if let Some(g) = grad {
            let dz = model.head.dense.backward(&z, &dlogits, &mut g.head.dense);
            model.backbone.backward(&cache, &dz, &mut g.backbone, false);
        }
        Ok(loss)
    }
}

impl Objective for Supervised<'_> {
    type Params = Model;

    fn train_len(&self) -> usize {
        self.train.len()
    }

    fn batch_loss(&mut self, params: &Model, batch: &[usize], grad: &mut Model) -> Result<f64> {
        Self::loss_on(params, self.train, batch, Some(grad))
    }

    fn validation_loss(&mut self, params: &Model) -> Result<f64> {
        let idx: Vec<usize> = (0..self.validation.len()).collect();
        let mut total = 0.0;
        for chunk in idx.chunks(EVAL_CHUNK) {
            total += Self::loss_on(params, self.validation, chunk, None)? * chunk.len() as f64;
        }
        Ok(total / idx.len().max(1) as f64)
    }
}

/// Head-only training over fixed embeddings; the backbone is never touched.
pub struct HeadOnly<'a> {
    pub train: (&'a Matrix, &'a [usize]),
    pub validation: (&'a Matrix, &'a [usize]),
}

fn select_rows(m: &Matrix, idx: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(idx.len(), m.cols());
    for (i, &r) in idx.iter().enumerate() {
        out.row_mut(i).copy_from_slice(m.row(r));
    }
    out
}

impl Objective for HeadOnly<'_> {
    type Params = Head;

    fn train_len(&self) -> usize {
        self.train.1.len()
    }

    fn batch_loss(&mut self, params: &Head, batch: &[usize], grad: &mut Head) -> Result<f64> {
        let z = select_rows(self.train.0, batch);
        let labels: Vec<usize> = batch.iter().map(|&i| self.train.1[i]).collect();
        let (loss, dl) = cross_entropy(&params.logits(&z), &labels);
        params.dense.backward(&z, &dl, &mut grad.dense);
        Ok(loss)
    }

    fn validation_loss(&mut self, params: &Head) -> Result<f64> {
        Ok(cross_entropy(&params.logits(self.validation.0), self.validation.1).0)
    }
}

/// Embeds every window of `set` in chunks.
pub fn embed_all(backbone: &super::model::Backbone, set: &SequenceSet) -> Result<Matrix> {
    let d = backbone.embedding_dim();
    let mut out = Matrix::zeros(set.len(), d);
    let idx: Vec<usize> = (0..set.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let z = backbone.forward(&set.gather(chunk), set.steps())?;
        out.row_block_mut(chunk[0], chunk.len()).copy_from_slice(z.as_slice());
    }
    Ok(out)
}
