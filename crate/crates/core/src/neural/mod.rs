//! A small differentiable stack: LSTM, dense, layer norm, ReLU, softmax
//! cross-entropy, AdamW and early-stopped training.

pub mod adamw;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod lstm;
pub mod matrix;
pub mod model;
pub mod objectives;
pub mod params;
pub mod sequence;
pub mod train;

pub use adamw::{AdamW, AdamWConfig};
pub use layers::{Dense, LayerNorm};
pub use lstm::Lstm;
pub use matrix::{gemm, Matrix};
pub use model::{Backbone, Head, Model, ModelConfig};
pub use params::{Free, ParamSet, Tensor};
pub use sequence::SequenceSet;
pub use train::{train, EarlyStopping, History, Objective, TrainConfig};
