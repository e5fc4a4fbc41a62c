//! Surface-EMG pattern recognition with transition-aware evaluation.
//!
//! The crate covers the whole offline pipeline:
//!
//! ```text
//! RawTrial ──bandpass──framing──► LSF4 features ──standardize──► sequences
//!     │                                  │                          │
//!     └─ ground-truth bounds ─► labels   └─► LDA             LSTM backbone ─► head
//!                                                              ▲
//!                                             VICReg on augmented views
//! ```
//!
//! Decisions are scored with seven continuous-transition metrics, optionally
//! after confidence-based rejection to the no-movement class.

pub mod augment;
pub mod class;
pub mod error;
pub mod experiments;
pub mod features;
pub mod labeling;
pub mod lda;
pub mod metrics;
pub mod neural;
pub mod rng;
pub mod signal;
pub mod synthgen;
pub mod vicreg;

pub use class::{Class, NUM_CLASSES};
pub use error::{Error, Result};
