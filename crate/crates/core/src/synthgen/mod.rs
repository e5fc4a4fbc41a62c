//! Deterministic synthetic sEMG: ramp trials and continuous dynamic trials with
//! exact ground-truth transition bounds.
//!
//! Each channel is a unit-RMS 20-450 Hz Gaussian carrier, amplitude-modulated
//! by a per-class gain row, plus wideband Gaussian baseline noise whose level
//! is set by `snr_db` relative to the mean active gain. Dynamic trials walk an
//! Eulerian circuit of the complete directed graph on the seven classes, so
//! every ordered class pair appears exactly once; the gain vector cross-fades
//! between rows with a raised cosine over each ground-truth transition.

pub mod dataset;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::class::{Class, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::rng;
use crate::signal::{
    Bandpass, Prompt, RawTrial, Sample, TransitionBound, TrialKind, BAND_HIGH_HZ, BAND_LOW_HZ, FILTER_ORDER,
    NUM_CHANNELS, SAMPLE_RATE,
};

pub type GainMatrix = [[f64; NUM_CHANNELS]; NUM_CLASSES];

pub const DEFAULT_GAINS: GainMatrix = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 0.8, 0.2, 0.1, 0.1, 0.3],
    [0.1, 0.2, 0.3, 1.0, 0.8, 0.2],
    [0.8, 0.1, 0.1, 0.2, 0.4, 1.0],
    [0.2, 1.0, 0.9, 0.1, 0.2, 0.1],
    [0.7, 0.6, 0.6, 0.5, 0.1, 0.1],
    [0.1, 0.1, 0.5, 0.6, 0.7, 0.6],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_subjects: usize,
    pub seed: u64,
    pub ramp_trials: usize,
    pub dynamic_trials: usize,
    /// Seconds each prompt is shown.
    pub prompt_duration: f64,
    /// Seconds, drawn uniformly per transition.
    pub transition_duration_range: [f64; 2],
    /// Seconds from a prompt change to the ground-truth movement onset.
    pub reaction_delay_range: [f64; 2],
    pub snr_db: f64,
    pub class_gain_matrix: GainMatrix,
    /// Per-subject multiplicative spread of each gain, `1 ± jitter`.
    pub subject_gain_jitter: f64,
    /// Per-contraction intensity spread, `1 ± jitter`.
    pub intensity_jitter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_subjects: 3,
            seed: 42,
            ramp_trials: 5,
            dynamic_trials: 6,
            prompt_duration: 3.0,
            transition_duration_range: [0.3, 0.7],
            reaction_delay_range: [0.1, 0.4],
            snr_db: 20.0,
            class_gain_matrix: DEFAULT_GAINS,
            subject_gain_jitter: 0.2,
            intensity_jitter: 0.1,
        }
    }
}

fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - dot / (na * nb)
}

impl SynthConfig {
    pub fn prompt_samples(&self) -> usize {
        (self.prompt_duration * SAMPLE_RATE).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let [t_lo, t_hi] = self.transition_duration_range;
        let [d_lo, d_hi] = self.reaction_delay_range;
        if self.num_subjects == 0 {
            return bad("num_subjects must be positive");
        }
        if self.ramp_trials == 0 || self.dynamic_trials == 0 {
            return bad("need at least one ramp and one dynamic trial");
        }
        if !(0.0 < t_lo && t_lo <= t_hi) || !(0.0 <= d_lo && d_lo <= d_hi) {
            return bad("duration ranges must be ordered and positive");
        }
        if d_hi + t_hi >= self.prompt_duration {
            return bad("reaction delay plus transition must fit inside one prompt");
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db must be finite");
        }
        if !(0.0..1.0).contains(&self.subject_gain_jitter) || !(0.0..1.0).contains(&self.intensity_jitter) {
            return bad("jitters must lie in [0, 1)");
        }
        let g = &self.class_gain_matrix;
        if g.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("gains must be finite and non-negative");
        }
        if g[Class::NM.index()].iter().any(|v| *v != 0.0) {
            return bad("the NM gain row must be zero");
        }
        for a in 1..NUM_CLASSES {
            if g[a].iter().all(|v| *v == 0.0) {
                return bad("active classes need a non-zero gain row");
            }
            for b in a + 1..NUM_CLASSES {
                if cosine_distance(&g[a], &g[b]) <= 0.1 {
                    return Err(Error::Config(format!(
                        "gain rows {} and {} are too similar",
                        Class::ALL[a],
                        Class::ALL[b]
                    )));
                }
            }
        }
        Ok(())
    }

    fn noise_std(&self, gains: &GainMatrix) -> f64 {
        let active = &gains[1..];
        let ms = active.iter().flatten().map(|g| g * g).sum::<f64>() / (active.len() * NUM_CHANNELS) as f64;
        ms.sqrt() / 10f64.powf(self.snr_db / 20.0)
    }
}

/// Eulerian circuit over the complete directed graph on `num_classes`
/// vertices, starting at class 0 (rest). Neighbours are taken in ascending
/// order.
pub fn transition_schedule(num_classes: usize) -> Vec<usize> {
    euler_circuit(num_classes, |_| {})
}

/// As [`transition_schedule`] with neighbour order shuffled by `rng`.
pub fn shuffled_transition_schedule<R: Rng>(num_classes: usize, rng: &mut R) -> Vec<usize> {
    euler_circuit(num_classes, |adj| adj.shuffle(rng))
}

fn euler_circuit(n: usize, mut order: impl FnMut(&mut Vec<usize>)) -> Vec<usize> {
    // Hierholzer; `adj[v]` is consumed from the back.
    let mut adj: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            let mut out: Vec<usize> = (0..n).filter(|&u| u != v).rev().collect();
            order(&mut out);
            out
        })
        .collect();
    let mut stack = vec![0];
    let mut path = Vec::with_capacity(n * (n - 1) + 1);
    while let Some(&v) = stack.last() {
        match adj[v].pop() {
            Some(u) => stack.push(u),
            None => path.push(stack.pop().unwrap_or_default()),
        }
    }
    path.reverse();
    path
}

/// All trials of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectTrials {
    pub ramp: Vec<RawTrial>,
    pub dynamic: Vec<RawTrial>,
}

const STREAM_GAINS: u64 = 0;
const STREAM_RAMP: u64 = 1;
const STREAM_DYNAMIC: u64 = 2;

pub fn generate_subject(cfg: &SynthConfig, subject: usize) -> Result<SubjectTrials> {
    cfg.validate()?;
    let subject = subject as u64;
    let mut grng = rng::stream(cfg.seed, &[subject, STREAM_GAINS]);
    let mut gains = cfg.class_gain_matrix;
    for g in gains.iter_mut().flatten() {
        *g *= 1.0 + cfg.subject_gain_jitter * grng.random_range(-1.0..=1.0);
    }
    let noise_std = cfg.noise_std(&gains);
    let carrier_band = Bandpass::design(FILTER_ORDER, BAND_LOW_HZ, BAND_HIGH_HZ, SAMPLE_RATE)?;
    let synth = Synthesizer {
        cfg,
        gains,
        noise_std,
        band: carrier_band,
    };

    let ramp = (0..cfg.ramp_trials)
        .map(|k| synth.ramp_trial(&[subject, STREAM_RAMP, k as u64]))
        .collect();
    let dynamic = (0..cfg.dynamic_trials)
        .map(|k| synth.dynamic_trial(&[subject, STREAM_DYNAMIC, k as u64]))
        .collect();
    Ok(SubjectTrials { ramp, dynamic })
}

struct Synthesizer<'a> {
    cfg: &'a SynthConfig,
    gains: GainMatrix,
    noise_std: f64,
    band: Bandpass,
}

impl Synthesizer<'_> {
    fn intensity<R: Rng>(&self, rng: &mut R) -> f64 {
        1.0 + self.cfg.intensity_jitter * rng.random_range(-1.0..=1.0)
    }

    fn ramp_trial(&self, path: &[u64]) -> RawTrial {
        let mut rng = rng::stream(self.cfg.seed, path);
        let seg = self.cfg.prompt_samples();
        let mut order: Vec<usize> = (1..NUM_CLASSES).collect();
        order.shuffle(&mut rng);
        order.insert(0, Class::NM.index());

        let mut envelope = Vec::with_capacity(seg * order.len());
        let mut prompts = Vec::with_capacity(order.len());
        for (k, &c) in order.iter().enumerate() {
            prompts.push(Prompt {
                class_id: Class::ALL[c],
                prompt_onset_sample: k * seg,
            });
            let level = self.intensity(&mut rng);
            for i in 0..seg {
                let ramp = (i + 1) as f64 / seg as f64;
                envelope.push(self.gains[c].map(|g| g * level * ramp));
            }
        }
        RawTrial {
            samples: self.modulate(&envelope, path),
            sample_rate: SAMPLE_RATE,
            kind: TrialKind::Ramp,
            prompts,
            movement_onsets: Vec::new(),
        }
    }

    fn dynamic_trial(&self, path: &[u64]) -> RawTrial {
        let mut rng = rng::stream(self.cfg.seed, path);
        let seg = self.cfg.prompt_samples();
        let visits = shuffled_transition_schedule(NUM_CLASSES, &mut rng);
        let levels: Vec<Sample> = visits
            .iter()
            .map(|&c| {
                let l = self.intensity(&mut rng);
                self.gains[c].map(|g| g * l)
            })
            .collect();

        let secs = |r: [f64; 2], rng: &mut rng::Stream| -> usize {
            (rng.random_range(r[0]..=r[1]) * SAMPLE_RATE).round() as usize
        };
        let mut prompts = Vec::with_capacity(visits.len());
        let mut bounds = Vec::with_capacity(visits.len() - 1);
        for (k, &c) in visits.iter().enumerate() {
            let onset = k * seg;
            prompts.push(Prompt {
                class_id: Class::ALL[c],
                prompt_onset_sample: onset,
            });
            if k > 0 {
                let start = onset + secs(self.cfg.reaction_delay_range, &mut rng).max(1);
                let end = start + secs(self.cfg.transition_duration_range, &mut rng).max(1);
                bounds.push(TransitionBound {
                    transition_index: k - 1,
                    onset_sample: start,
                    end_sample: end,
                });
            }
        }

        let n = seg * visits.len();
        let mut envelope = Vec::with_capacity(n);
        let mut current = levels[0];
        let mut next_bound = bounds.iter().zip(&levels[1..]).peekable();
        for t in 0..n {
            while let Some((b, _)) = next_bound.peek() {
                if t >= b.end_sample {
                    if let Some((_, l)) = next_bound.next() {
                        current = *l;
                    }
                } else {
                    break;
                }
            }
            let g = match next_bound.peek() {
                Some((b, target)) if t >= b.onset_sample => {
                    let w = (t - b.onset_sample) as f64 / (b.end_sample - b.onset_sample) as f64;
                    let w = 0.5 * (1.0 - (std::f64::consts::PI * w).cos());
                    std::array::from_fn(|ch| (1.0 - w) * current[ch] + w * target[ch])
                }
                _ => current,
            };
            envelope.push(g);
        }

        RawTrial {
            samples: self.modulate(&envelope, path),
            sample_rate: SAMPLE_RATE,
            kind: TrialKind::Dynamic,
            prompts,
            movement_onsets: bounds,
        }
    }

    /// Carrier times envelope plus baseline noise, per channel from its own
    /// stream. Values are rounded to single precision as an ADC stand-in.
    fn modulate(&self, envelope: &[Sample], path: &[u64]) -> Vec<Sample> {
        const WARMUP: usize = 2000;
        let n = envelope.len();
        let mut out = vec![[0.0; NUM_CHANNELS]; n];
        for ch in 0..NUM_CHANNELS {
            let mut p = path.to_vec();
            p.push(16 + ch as u64);
            let mut rng = rng::stream(self.cfg.seed, &p);
            let white: Vec<f64> = (0..n + WARMUP).map(|_| rng.sample(StandardNormal)).collect();
            let carrier = self.band.filter(&white);
            let carrier = &carrier[WARMUP..];
            let rms = (carrier.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt().max(f64::MIN_POSITIVE);
            for ((o, e), c) in out.iter_mut().zip(envelope).zip(carrier) {
                let noise: f64 = rng.sample(StandardNormal);
                o[ch] = ((e[ch] * c / rms + self.noise_std * noise) as f32) as f64;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn small_cfg() -> SynthConfig {
        SynthConfig {
            num_subjects: 1,
            ramp_trials: 1,
            dynamic_trials: 1,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn schedule_covers_every_ordered_pair_once() {
        for sched in [transition_schedule(7), shuffled_transition_schedule(7, &mut rng::stream(3, &[]))] {
            assert_eq!(sched.len(), 43);
            assert_eq!(sched[0], 0);
            let mut seen = HashSet::new();
            for w in sched.windows(2) {
                assert_ne!(w[0], w[1]);
                assert!(seen.insert((w[0], w[1])), "repeated pair {w:?}");
            }
            let mut expected = HashSet::new();
            for a in 0..7 {
                for b in 0..7 {
                    if a != b {
                        expected.insert((a, b));
                    }
                }
            }
            assert_eq!(seen, expected);
        }
    }

    #[test]
    fn default_config_is_valid() {
        SynthConfig::default().validate().unwrap();
    }

    #[test]
    fn similar_gain_rows_rejected() {
        let mut cfg = SynthConfig::default();
        cfg.class_gain_matrix[2] = cfg.class_gain_matrix[1].map(|g| g * 1.5);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn generation_is_deterministic_and_shaped() {
        let cfg = small_cfg();
        let a = generate_subject(&cfg, 1).unwrap();
        let b = generate_subject(&cfg, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_subject(&cfg, 2).unwrap());

        let ramp = &a.ramp[0];
        ramp.validate().unwrap();
        assert_eq!(ramp.num_samples(), 42000);
        assert_eq!(ramp.prompts.len(), 7);
        assert!(ramp.movement_onsets.is_empty());

        let dynamic = &a.dynamic[0];
        dynamic.validate().unwrap();
        assert_eq!(dynamic.prompts.len(), 43);
        assert_eq!(dynamic.movement_onsets.len(), 42);
        assert_eq!(dynamic.prompts[0].class_id, Class::NM);
        for (i, b) in dynamic.movement_onsets.iter().enumerate() {
            assert_eq!(b.transition_index, i);
            assert!(b.onset_sample > dynamic.prompts[i + 1].prompt_onset_sample);
            let next = dynamic.prompts.get(i + 2).map_or(dynamic.num_samples(), |p| p.prompt_onset_sample);
            assert!(b.end_sample < next);
        }
    }

    #[test]
    fn rest_is_quieter_than_contraction() {
        let a = generate_subject(&small_cfg(), 1).unwrap();
        let t = &a.ramp[0];
        let energy = |r: std::ops::Range<usize>| -> f64 {
            t.samples[r.clone()].iter().flatten().map(|v| v * v).sum::<f64>() / r.len() as f64
        };
        // NM segment vs the last second of the first active ramp.
        assert!(energy(4000..6000) * 20.0 < energy(10000..12000));
    }
}
