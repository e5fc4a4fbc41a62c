//! Causal T-frame windows over per-trial feature streams.
//!
//! A window ending at frame `k` covers frames `k-T+1..=k`; frames before the
//! start of the trial repeat frame 0. Batches are time-major: row `t·N + n`
//! holds step `t` of window `n`.

use crate::features::{FeatureFrame, NUM_FEATURES};
use crate::neural::Matrix;

/// A trial's frames with `steps - 1` copies of frame 0 prepended.
pub fn left_pad(frames: &[FeatureFrame], steps: usize) -> Vec<FeatureFrame> {
    assert!(!frames.is_empty() && steps > 0);
    let mut out = Vec::with_capacity(frames.len() + steps - 1);
    out.extend(std::iter::repeat_n(frames[0], steps - 1));
    out.extend_from_slice(frames);
    out
}

/// Packs `T x F` windows into a time-major `(T·N) x F` batch.
pub fn pack_time_major(windows: &[Matrix]) -> Matrix {
    let n = windows.len();
    let (steps, f) = windows[0].shape();
    let mut out = Matrix::zeros(steps * n, f);
    for (i, w) in windows.iter().enumerate() {
        debug_assert_eq!(w.shape(), (steps, f));
        for t in 0..steps {
            out.row_mut(t * n + i).copy_from_slice(w.row(t));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowRef {
    pub trial: usize,
    /// Index of the decision frame within the (unpadded) trial.
    pub end: usize,
}

/// Windows over a set of trials, each labelled by its last frame.
#[derive(Debug, Clone)]
pub struct SequenceSet {
    steps: usize,
    padded: Vec<Vec<FeatureFrame>>,
    windows: Vec<WindowRef>,
    labels: Vec<usize>,
}

impl SequenceSet {
    /// Every `stride`-th window of every trial (ends at `0, stride, 2·stride, ..`).
    pub fn new(trials: &[(&[FeatureFrame], &[usize])], steps: usize, stride: usize) -> Self {
        assert!(steps > 0 && stride > 0);
        let mut set = SequenceSet {
            steps,
            padded: Vec::with_capacity(trials.len()),
            windows: Vec::new(),
            labels: Vec::new(),
        };
        for (i, (frames, labels)) in trials.iter().enumerate() {
            assert_eq!(frames.len(), labels.len());
            set.padded.push(left_pad(frames, steps));
            for end in (0..frames.len()).step_by(stride) {
                set.windows.push(WindowRef { trial: i, end });
                set.labels.push(labels[end]);
            }
        }
        set
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn window_refs(&self) -> &[WindowRef] {
        &self.windows
    }

    /// Padded frame buffer of trial `i`; window `w` starts at `w.end` in it.
    pub fn padded_trial(&self, i: usize) -> &[FeatureFrame] {
        &self.padded[i]
    }

    /// The `T x F` window `idx`.
    pub fn window(&self, idx: usize) -> Matrix {
        let w = self.windows[idx];
        crate::augment::window(&self.padded[w.trial], w.end, self.steps)
    }

    /// Time-major batch of the given windows.
    pub fn gather(&self, indices: &[usize]) -> Matrix {
        let n = indices.len();
        let mut out = Matrix::zeros(self.steps * n, NUM_FEATURES);
        for (i, &idx) in indices.iter().enumerate() {
            let w = self.windows[idx];
            let buf = &self.padded[w.trial];
            for t in 0..self.steps {
                out.row_mut(t * n + i).copy_from_slice(&buf[w.end + t].0);
            }
        }
        out
    }

    pub fn gather_labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }
}
