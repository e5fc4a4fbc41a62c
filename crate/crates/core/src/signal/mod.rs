//! Raw sEMG conditioning: zero-phase bandpass filtering and overlapped framing.

mod butterworth;
pub mod io;

pub use butterworth::{Bandpass, Biquad};

use serde::{Deserialize, Serialize};

use crate::class::Class;
use crate::error::{Error, Result};

pub const NUM_CHANNELS: usize = 6;
pub const SAMPLE_RATE: f64 = 2000.0;
/// 162 ms at 2 kHz.
pub const FRAME_LEN: usize = 324;
/// 13.5 ms at 2 kHz.
pub const FRAME_STEP: usize = 27;

pub const FILTER_ORDER: usize = 4;
pub const BAND_LOW_HZ: f64 = 20.0;
pub const BAND_HIGH_HZ: f64 = 450.0;

pub type Sample = [f64; NUM_CHANNELS];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialKind {
    Ramp,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub class_id: Class,
    pub prompt_onset_sample: usize,
}

/// Ground-truth bounds of the movement answering prompt change
/// `transition_index` (the change from prompt `i` to prompt `i + 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionBound {
    pub transition_index: usize,
    pub onset_sample: usize,
    pub end_sample: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTrial {
    pub samples: Vec<Sample>,
    pub sample_rate: f64,
    pub kind: TrialKind,
    pub prompts: Vec<Prompt>,
    pub movement_onsets: Vec<TransitionBound>,
}

impl RawTrial {
    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn channel(&self, ch: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[ch]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_samples();
        if self.sample_rate != SAMPLE_RATE {
            return Err(Error::InvalidInput(format!(
                "sample rate {} Hz, expected {SAMPLE_RATE}",
                self.sample_rate
            )));
        }
        if self.prompts.is_empty() {
            return Err(Error::InvalidInput("trial has no prompts".into()));
        }
        for w in self.prompts.windows(2) {
            if w[1].prompt_onset_sample <= w[0].prompt_onset_sample {
                return Err(Error::InvalidInput("prompt onsets must strictly increase".into()));
            }
        }
        if self.prompts.last().is_some_and(|p| p.prompt_onset_sample >= n) {
            return Err(Error::InvalidInput("prompt onset beyond trial end".into()));
        }
        for b in &self.movement_onsets {
            if b.end_sample <= b.onset_sample || b.end_sample > n {
                return Err(Error::InvalidInput(format!(
                    "transition {} bounds [{}, {}) invalid for {n} samples",
                    b.transition_index, b.onset_sample, b.end_sample
                )));
            }
        }
        if self.kind == TrialKind::Ramp && !self.movement_onsets.is_empty() {
            return Err(Error::InvalidInput("ramp trials carry no transition bounds".into()));
        }
        if self.samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample".into()));
        }
        Ok(())
    }
}

/// A window of [`FRAME_LEN`] samples borrowed from its trial.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub start_sample: usize,
    pub window: &'a [Sample],
}

impl Frame<'_> {
    pub fn channel(&self, ch: usize) -> impl Iterator<Item = f64> + '_ {
        self.window.iter().map(move |s| s[ch])
    }
}

pub fn default_bandpass() -> Bandpass {
    Bandpass::design(FILTER_ORDER, BAND_LOW_HZ, BAND_HIGH_HZ, SAMPLE_RATE)
        .expect("constant band edges are valid")
}

/// 20-450 Hz zero-phase bandpass applied to every channel.
pub fn bandpass_filter(trial: &RawTrial) -> Result<RawTrial> {
    bandpass_with(&default_bandpass(), trial)
}

pub fn bandpass_with(filter: &Bandpass, trial: &RawTrial) -> Result<RawTrial> {
    let mut out = trial.clone();
    for ch in 0..NUM_CHANNELS {
        let y = filter.filtfilt(&trial.channel(ch))?;
        for (s, v) in out.samples.iter_mut().zip(y) {
            s[ch] = v;
        }
    }
    Ok(out)
}

pub fn frame_count(num_samples: usize) -> usize {
    if num_samples < FRAME_LEN {
        0
    } else {
        (num_samples - FRAME_LEN) / FRAME_STEP + 1
    }
}

pub fn frame_starts(num_samples: usize) -> Vec<usize> {
    (0..frame_count(num_samples)).map(|i| i * FRAME_STEP).collect()
}

/// Overlapped frames at starts `0, 27, 54, ...`; the trailing remainder is dropped.
pub fn frame_trial(trial: &RawTrial) -> Result<Vec<Frame<'_>>> {
    frame_samples(&trial.samples)
}

pub fn frame_samples(samples: &[Sample]) -> Result<Vec<Frame<'_>>> {
    if samples.len() < FRAME_LEN {
        return Err(Error::InsufficientSamples {
            required: FRAME_LEN - 1,
            actual: samples.len(),
        });
    }
    Ok(frame_starts(samples.len())
        .into_iter()
        .map(|start| Frame {
            start_sample: start,
            window: &samples[start..start + FRAME_LEN],
        })
        .collect())
}

pub fn mean_absolute_value(frame: &Frame<'_>) -> Sample {
    mav_of(frame.window)
}

pub(crate) fn mav_of(window: &[Sample]) -> Sample {
    let mut acc = [0.0; NUM_CHANNELS];
    for s in window {
        for (a, v) in acc.iter_mut().zip(s) {
            *a += v.abs();
        }
    }
    let n = window.len().max(1) as f64;
    acc.map(|a| a / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_of(samples: Vec<Sample>) -> RawTrial {
        RawTrial {
            samples,
            sample_rate: SAMPLE_RATE,
            kind: TrialKind::Ramp,
            prompts: vec![Prompt {
                class_id: Class::NM,
                prompt_onset_sample: 0,
            }],
            movement_onsets: vec![],
        }
    }

    #[test]
    fn frame_counts() {
        let t = trial_of(vec![[0.0; 6]; 6000]);
        assert_eq!(frame_trial(&t).unwrap().len(), 211);
        let t = trial_of(vec![[0.0; 6]; 324]);
        assert_eq!(frame_trial(&t).unwrap().len(), 1);
        let t = trial_of(vec![[0.0; 6]; 323]);
        assert!(frame_trial(&t).is_err());
    }

    #[test]
    fn frames_reference_trial_samples() {
        let samples: Vec<Sample> = (0..1000).map(|i| [i as f64; 6]).collect();
        let t = trial_of(samples);
        let frames = frame_trial(&t).unwrap();
        for (k, f) in frames.iter().enumerate() {
            assert_eq!(f.start_sample, k * FRAME_STEP);
            assert_eq!(f.window, &t.samples[f.start_sample..f.start_sample + FRAME_LEN]);
        }
    }

    #[test]
    fn mav_examples() {
        let w = vec![[0.5; 6]; 10];
        assert_eq!(mav_of(&w), [0.5; 6]);
        let w: Vec<Sample> = (0..10).map(|i| [if i % 2 == 0 { 1.0 } else { -1.0 }; 6]).collect();
        assert_eq!(mav_of(&w), [1.0; 6]);
        let w = vec![[-3.0; 6], [1.0; 6]];
        assert_eq!(mav_of(&w), [2.0; 6]);
    }

    #[test]
    fn zero_in_zero_out_and_short_trials_rejected() {
        let t = trial_of(vec![[0.0; 6]; 400]);
        let y = bandpass_filter(&t).unwrap();
        assert!(y.samples.iter().flatten().all(|&v| v == 0.0));
        let t = trial_of(vec![[0.0; 6]; 36]);
        assert!(matches!(
            bandpass_filter(&t),
            Err(Error::InsufficientSamples { .. })
        ));
        assert!(bandpass_filter(&trial_of(vec![[0.0; 6]; 37])).is_ok());
    }

    #[test]
    fn validate_flags_bad_bounds() {
        let mut t = trial_of(vec![[0.0; 6]; 400]);
        t.kind = TrialKind::Dynamic;
        t.movement_onsets.push(TransitionBound {
            transition_index: 0,
            onset_sample: 100,
            end_sample: 90,
        });
        assert!(t.validate().is_err());
    }
}
