//! Frame labels for ramp trials (prompt labels with an NM amplitude floor) and
//! dynamic trials (onset-aligned naive labels), plus the steady-state /
//! transition region of every frame.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::class::Class;
use crate::error::{Error, Result};
use crate::signal::{Prompt, TransitionBound};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    SteadyState(Class),
    Transition { prev: Class, next: Class },
}

impl Region {
    pub fn is_steady(&self) -> bool {
        matches!(self, Region::SteadyState(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFrames {
    pub frame_starts: Vec<usize>,
    pub labels: Vec<Class>,
    pub regions: Vec<Region>,
}

impl LabeledFrames {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of maximal runs of transition frames.
    pub fn transition_count(&self) -> usize {
        let mut count = 0;
        let mut prev: Option<Region> = None;
        for r in &self.regions {
            if !r.is_steady() && prev != Some(*r) {
                count += 1;
            }
            prev = Some(*r);
        }
        count
    }
}

/// Prompt active at `sample`: the last prompt whose onset is at or before it.
fn prompt_at(prompts: &[Prompt], sample: usize) -> Class {
    let idx = prompts.partition_point(|p| p.prompt_onset_sample <= sample);
    prompts[idx.saturating_sub(1)].class_id
}

/// `mu + 3 sigma` of the per-frame amplitude over NM-labeled frames
/// (population standard deviation).
pub fn rest_threshold(labels: &[Class], amplitude: &[f64]) -> Result<f64> {
    let rest: Vec<f64> = labels
        .iter()
        .zip(amplitude)
        .filter(|(l, _)| l.is_rest())
        .map(|(_, a)| *a)
        .collect();
    if rest.is_empty() {
        return Err(Error::NoRestFrames);
    }
    let n = rest.len() as f64;
    let mu = rest.iter().sum::<f64>() / n;
    let sigma = (rest.iter().map(|a| (a - mu).powi(2)).sum::<f64>() / n).sqrt();
    Ok(mu + 3.0 * sigma)
}

/// Active labels whose amplitude falls below `threshold` become NM.
pub fn relabel_below(labels: &mut [Class], amplitude: &[f64], threshold: f64) {
    for (l, a) in labels.iter_mut().zip(amplitude) {
        if !l.is_rest() && *a < threshold {
            *l = Class::NM;
        }
    }
}

/// Ramp labeling. `amplitude` is the channel-mean MAV of each frame.
/// Returns the labels and the NM threshold that was applied.
pub fn label_ramp(frame_starts: &[usize], amplitude: &[f64], prompts: &[Prompt]) -> Result<(LabeledFrames, f64)> {
    if frame_starts.len() != amplitude.len() {
        return Err(Error::ShapeMismatch("frame starts vs amplitudes".into()));
    }
    if prompts.is_empty() {
        return Err(Error::InvalidInput("no prompts".into()));
    }
    let mut labels: Vec<Class> = frame_starts.iter().map(|&s| prompt_at(prompts, s)).collect();
    let tau = rest_threshold(&labels, amplitude)?;
    relabel_below(&mut labels, amplitude, tau);
    let regions = labels.iter().map(|&l| Region::SteadyState(l)).collect();
    Ok((
        LabeledFrames {
            frame_starts: frame_starts.to_vec(),
            labels,
            regions,
        },
        tau,
    ))
}

/// Naive labeling of a continuous dynamic trial: from the first frame whose
/// start is at or after a transition's movement onset, frames carry the newly
/// prompted class. Frames starting inside `[onset, end)` are marked as
/// transition frames.
pub fn label_dynamic(frame_starts: &[usize], prompts: &[Prompt], onsets: &[TransitionBound]) -> Result<LabeledFrames> {
    let Some(first) = prompts.first() else {
        return Err(Error::InvalidInput("no prompts".into()));
    };
    let mut changes = Vec::with_capacity(prompts.len().saturating_sub(1));
    for (i, w) in prompts.windows(2).enumerate() {
        let b = onsets
            .iter()
            .find(|b| b.transition_index == i)
            .ok_or(Error::MissingOnset(i))?;
        changes.push((b.onset_sample, b.end_sample, w[0].class_id, w[1].class_id));
    }
    changes.sort_by_key(|c| c.0);

    let mut labels = Vec::with_capacity(frame_starts.len());
    let mut regions = Vec::with_capacity(frame_starts.len());
    let mut current = first.class_id;
    let mut k = 0;
    for &s in frame_starts {
        while k < changes.len() && s >= changes[k].0 {
            current = changes[k].3;
            k += 1;
        }
        labels.push(current);
        let region = match k.checked_sub(1).map(|i| changes[i]) {
            Some((onset, end, prev, next)) if s >= onset && s < end => Region::Transition { prev, next },
            _ => Region::SteadyState(current),
        };
        regions.push(region);
    }
    Ok(LabeledFrames {
        frame_starts: frame_starts.to_vec(),
        labels,
        regions,
    })
}

/// Label file: `frame_start,label,region_kind,region_prev,region_next`.
/// Steady-state rows repeat the held class in both region columns.
pub fn write_labels(path: &Path, frames: &LabeledFrames) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["frame_start", "label", "region_kind", "region_prev", "region_next"])?;
    for ((s, l), r) in frames.frame_starts.iter().zip(&frames.labels).zip(&frames.regions) {
        let (kind, prev, next) = match *r {
            Region::SteadyState(c) => ("steady", c, c),
            Region::Transition { prev, next } => ("transition", prev, next),
        };
        w.write_record([
            s.to_string(),
            l.index().to_string(),
            kind.to_string(),
            prev.index().to_string(),
            next.index().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(class: Class, at: usize) -> Prompt {
        Prompt { class_id: class, prompt_onset_sample: at }
    }

    #[test]
    fn all_rest_prompts_stay_rest() {
        let starts: Vec<usize> = (0..10).map(|i| i * 27).collect();
        let amp: Vec<f64> = (0..10).map(|i| i as f64 * 10.0).collect();
        let (lf, _) = label_ramp(&starts, &amp, &[p(Class::NM, 0)]).unwrap();
        assert!(lf.labels.iter().all(|l| l.is_rest()));
    }

    #[test]
    fn threshold_arithmetic() {
        // NM amplitudes with mean 1 and population std 0.1.
        let starts = vec![0, 27, 54, 81, 108];
        let amp = vec![0.9, 1.1, 1.31, 1.0, 1.29];
        let prompts = [p(Class::NM, 0), p(Class::HandClose, 50)];
        let (lf, tau) = label_ramp(&starts, &amp, &prompts).unwrap();
        assert!((tau - 1.3).abs() < 1e-12);
        assert_eq!(lf.labels, vec![Class::NM, Class::NM, Class::HandClose, Class::NM, Class::NM]);
    }

    #[test]
    fn active_frame_at_rest_mean_is_relabeled() {
        let starts = vec![0, 27, 54];
        let amp = vec![0.9, 1.1, 1.0];
        let prompts = [p(Class::NM, 0), p(Class::WristFlexion, 50)];
        let (lf, _) = label_ramp(&starts, &amp, &prompts).unwrap();
        assert_eq!(lf.labels[2], Class::NM);
    }

    #[test]
    fn ramp_without_rest_is_an_error() {
        let r = label_ramp(&[0, 27], &[1.0, 2.0], &[p(Class::HandOpen, 0)]);
        assert!(matches!(r, Err(Error::NoRestFrames)));
    }

    #[test]
    fn relabel_is_idempotent() {
        let mut l = vec![Class::HandOpen, Class::NM, Class::WristFlexion, Class::HandOpen];
        let a = [0.5, 3.0, 2.0, 0.1];
        relabel_below(&mut l, &a, 1.0);
        let once = l.clone();
        relabel_below(&mut l, &a, 1.0);
        assert_eq!(l, once);
    }

    #[test]
    fn dynamic_label_switches_at_first_start_after_onset() {
        let starts = vec![945, 972, 999, 1026, 1053];
        let prompts = [p(Class::NM, 0), p(Class::HandOpen, 900)];
        let onsets = [TransitionBound { transition_index: 0, onset_sample: 1000, end_sample: 1050 }];
        let lf = label_dynamic(&starts, &prompts, &onsets).unwrap();
        use Class::*;
        assert_eq!(lf.labels, vec![NoMovement, NoMovement, NoMovement, HandOpen, HandOpen]);
        assert_eq!(lf.regions[3], Region::Transition { prev: NoMovement, next: HandOpen });
        assert_eq!(lf.regions[4], Region::SteadyState(HandOpen));
        assert_eq!(lf.regions[2], Region::SteadyState(NoMovement));
    }

    #[test]
    fn frame_starting_at_onset_is_first_new_label() {
        let starts = vec![0, 27, 54];
        let prompts = [p(Class::NM, 0), p(Class::HandClose, 10)];
        let onsets = [TransitionBound { transition_index: 0, onset_sample: 27, end_sample: 60 }];
        let lf = label_dynamic(&starts, &prompts, &onsets).unwrap();
        assert_eq!(lf.labels, vec![Class::NM, Class::HandClose, Class::HandClose]);
    }

    #[test]
    fn no_prompt_changes() {
        let starts = vec![0, 27, 54];
        let lf = label_dynamic(&starts, &[p(Class::WristExtension, 0)], &[]).unwrap();
        assert!(lf.labels.iter().all(|&l| l == Class::WristExtension));
        assert!(lf.regions.iter().all(Region::is_steady));
        assert_eq!(lf.transition_count(), 0);
    }

    #[test]
    fn missing_onset() {
        let r = label_dynamic(&[0], &[p(Class::NM, 0), p(Class::HandOpen, 5)], &[]);
        assert!(matches!(r, Err(Error::MissingOnset(0))));
    }

    #[test]
    fn synthetic_dynamic_trial_has_42_transition_regions() {
        let cfg = crate::synthgen::SynthConfig { ramp_trials: 1, dynamic_trials: 1, ..Default::default() };
        let t = &crate::synthgen::generate_subject(&cfg, 1).unwrap().dynamic[0];
        let starts = crate::signal::frame_starts(t.num_samples());
        let lf = label_dynamic(&starts, &t.prompts, &t.movement_onsets).unwrap();
        assert_eq!(lf.transition_count(), 42);
        let steady = lf.regions.iter().filter(|r| r.is_steady()).count();
        let trans = lf.regions.iter().filter(|r| !r.is_steady()).count();
        assert_eq!(steady + trans, lf.len());
        // Exactly one label switch per prompt change, at or after its onset.
        let switches: Vec<usize> = (1..lf.len()).filter(|&i| lf.labels[i] != lf.labels[i - 1]).collect();
        assert_eq!(switches.len(), 42);
        for (i, b) in switches.iter().zip(&t.movement_onsets) {
            assert!(lf.frame_starts[*i] >= b.onset_sample);
            assert!(lf.frame_starts[*i - 1] < b.onset_sample);
        }
    }

    #[test]
    fn label_file_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        let lf = LabeledFrames {
            frame_starts: vec![0, 27],
            labels: vec![Class::NM, Class::HandOpen],
            regions: vec![Region::SteadyState(Class::NM), Region::Transition { prev: Class::NM, next: Class::HandOpen }],
        };
        write_labels(&path, &lf).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text, "frame_start,label,region_kind,region_prev,region_next\n0,0,steady,0,0\n27,6,transition,0,6\n");
    }
}
