//! Decision streams, the seven continuous-transition metrics and
//! confidence-based rejection.
//!
//! Steady-state metrics are percentages over frames whose ground truth is a
//! steady state. Transition metrics are frame counts averaged over the
//! transitions of a stream. A transition is a maximal run of frames sharing
//! the same `Transition { prev, next }` region; its search window runs from
//! the run's first frame to the first frame of the next transition (or the
//! end of the stream).

use serde::{Deserialize, Serialize};

use crate::class::Class;
use crate::error::{Error, Result};
use crate::features::FeatureFrame;
use crate::labeling::Region;
use crate::lda::{argmax, LdaModel};
use crate::neural::model::Model;
use crate::neural::objectives::EVAL_CHUNK;
use crate::neural::SequenceSet;

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionStream {
    pub decisions: Vec<Class>,
    pub confidences: Vec<f64>,
    pub truth: Vec<Region>,
}

impl DecisionStream {
    pub fn new(decisions: Vec<Class>, confidences: Vec<f64>, truth: Vec<Region>) -> Result<Self> {
        if decisions.len() != confidences.len() || decisions.len() != truth.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} decisions, {} confidences, {} truth frames",
                decisions.len(),
                confidences.len(),
                truth.len()
            )));
        }
        if let Some(c) = confidences.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::InvalidInput(format!("confidence {c} outside [0, 1]")));
        }
        Ok(DecisionStream {
            decisions,
            confidences,
            truth,
        })
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    SsAer,
    SsTer,
    SsIns,
    Toff,
    Ttd,
    Ins,
    Tce,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::SsAer,
        Metric::SsTer,
        Metric::SsIns,
        Metric::Toff,
        Metric::Ttd,
        Metric::Ins,
        Metric::Tce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::SsAer => "ss_aer",
            Metric::SsTer => "ss_ter",
            Metric::SsIns => "ss_ins",
            Metric::Toff => "toff",
            Metric::Ttd => "ttd",
            Metric::Ins => "ins",
            Metric::Tce => "tce",
        }
    }

    pub fn from_name(s: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateMetrics {
    pub ss_aer: f64,
    pub ss_ter: f64,
    pub ss_ins: f64,
    pub frames: usize,
    pub regions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionMetrics {
    pub toff: f64,
    pub ttd: f64,
    pub ins: f64,
    pub tce: f64,
    pub transitions: usize,
    /// Transitions where the decisions never left the previous class or
    /// never reached the next one inside the search window.
    pub flag_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub steady: SteadyStateMetrics,
    pub transition: TransitionMetrics,
}

impl MetricsReport {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::SsAer => self.steady.ss_aer,
            Metric::SsTer => self.steady.ss_ter,
            Metric::SsIns => self.steady.ss_ins,
            Metric::Toff => self.transition.toff,
            Metric::Ttd => self.transition.ttd,
            Metric::Ins => self.transition.ins,
            Metric::Tce => self.transition.tce,
        }
    }
}

/// Replaces decisions with confidence strictly below `threshold` by NM.
pub fn apply_rejection(stream: &DecisionStream, threshold: f64) -> DecisionStream {
    let mut out = stream.clone();
    for (d, c) in out.decisions.iter_mut().zip(&stream.confidences) {
        if *c < threshold {
            *d = Class::NM;
        }
    }
    out
}

/// Removes maximal NM runs whose neighbours on both sides are the same class.
pub fn delete_nm_blips(decisions: &[Class]) -> Vec<Class> {
    let mut out = Vec::with_capacity(decisions.len());
    let mut i = 0;
    while i < decisions.len() {
        if decisions[i] != Class::NM {
            out.push(decisions[i]);
            i += 1;
            continue;
        }
        let mut j = i;
        while j < decisions.len() && decisions[j] == Class::NM {
            j += 1;
        }
        let bounded = i > 0 && j < decisions.len() && decisions[i - 1] == decisions[j];
        if !bounded {
            out.extend_from_slice(&decisions[i..j]);
        }
        i = j;
    }
    out
}

/// Number of adjacent pairs that differ, after NM-blip deletion.
pub fn instability(decisions: &[Class]) -> usize {
    delete_nm_blips(decisions).windows(2).filter(|w| w[0] != w[1]).count()
}

/// Maximal runs `[start, end)` of identical regions satisfying `keep`.
fn runs(truth: &[Region], keep: impl Fn(&Region) -> bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < truth.len() {
        let mut j = i + 1;
        while j < truth.len() && truth[j] == truth[i] {
            j += 1;
        }
        if keep(&truth[i]) {
            out.push((i, j));
        }
        i = j;
    }
    out
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub fn steady_state_metrics(stream: &DecisionStream) -> Result<SteadyStateMetrics> {
    let regions = runs(&stream.truth, Region::is_steady);
    let frames: usize = regions.iter().map(|(a, b)| b - a).sum();
    if frames == 0 {
        return Err(Error::InvalidInput("stream has no steady-state frames".into()));
    }
    let (mut wrong, mut wrong_active, mut active, mut changes) = (0, 0, 0, 0);
    for &(a, b) in &regions {
        let Region::SteadyState(truth) = stream.truth[a] else { unreachable!() };
        let d = &stream.decisions[a..b];
        for &c in d {
            if c != truth {
                wrong += 1;
            }
            if c != Class::NM {
                active += 1;
                if c != truth {
                    wrong_active += 1;
                }
            }
        }
        changes += instability(d);
    }
    Ok(SteadyStateMetrics {
        ss_aer: percent(wrong_active, active),
        ss_ter: percent(wrong, frames),
        ss_ins: percent(changes, frames - regions.len()),
        frames,
        regions: regions.len(),
    })
}

pub fn transition_metrics(stream: &DecisionStream) -> Result<TransitionMetrics> {
    let transitions = runs(&stream.truth, |r| !r.is_steady());
    if transitions.is_empty() {
        return Err(Error::InvalidInput("stream has no annotated transitions".into()));
    }
    let (mut toff, mut ttd, mut ins, mut tce, mut flags) = (0usize, 0usize, 0usize, 0usize, 0usize);
    for (k, &(onset, end)) in transitions.iter().enumerate() {
        let Region::Transition { prev, next } = stream.truth[onset] else { unreachable!() };
        let window_end = transitions.get(k + 1).map_or(stream.len(), |t| t.0);
        let d = &stream.decisions;
        let departure = (onset..window_end).find(|&i| d[i] != prev);
        let arrival = departure.and_then(|dep| (dep..window_end).find(|&i| d[i] == next));
        let dep = departure.unwrap_or(window_end);
        toff += dep - onset;
        ttd += match arrival {
            Some(a) => a - dep + 1,
            None => window_end - dep,
        };
        if arrival.is_none() {
            flags += 1;
        }
        let region = &d[onset..end];
        ins += instability(region);
        tce += region.iter().filter(|&&c| c != prev && c != next && c != Class::NM).count();
    }
    let n = transitions.len() as f64;
    Ok(TransitionMetrics {
        toff: toff as f64 / n,
        ttd: ttd as f64 / n,
        ins: ins as f64 / n,
        tce: tce as f64 / n,
        transitions: transitions.len(),
        flag_count: flags,
    })
}

pub fn evaluate(stream: &DecisionStream) -> Result<MetricsReport> {
    Ok(MetricsReport {
        steady: steady_state_metrics(stream)?,
        transition: transition_metrics(stream)?,
    })
}

/// Full metric set at each threshold; thresholds must be sorted and in `[0, 1]`.
pub fn rejection_sweep(stream: &DecisionStream, thresholds: &[f64]) -> Result<Vec<(f64, MetricsReport)>> {
    validate_thresholds(thresholds)?;
    thresholds
        .iter()
        .map(|&t| Ok((t, evaluate(&apply_rejection(stream, t))?)))
        .collect()
}

pub fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Config("rejection thresholds must lie in [0, 1]".into()));
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("rejection thresholds must be sorted".into()));
    }
    Ok(())
}

/// Anything that maps a trial's standardized feature frames to per-frame
/// class posteriors.
pub trait FrameClassifier {
    fn posteriors(&self, frames: &[FeatureFrame]) -> Result<Vec<Vec<f64>>>;
}

impl FrameClassifier for LdaModel {
    fn posteriors(&self, frames: &[FeatureFrame]) -> Result<Vec<Vec<f64>>> {
        Ok(frames.iter().map(|f| self.predict_posterior(&f.0)).collect())
    }
}

/// A sequence model applied to the causal `steps`-frame history of every frame.
pub struct Temporal<'a> {
    pub model: &'a Model,
    pub steps: usize,
}

impl FrameClassifier for Temporal<'_> {
    fn posteriors(&self, frames: &[FeatureFrame]) -> Result<Vec<Vec<f64>>> {
        let labels = vec![0; frames.len()];
        let set = SequenceSet::new(&[(frames, &labels)], self.steps, 1);
        let idx: Vec<usize> = (0..set.len()).collect();
        let mut out = Vec::with_capacity(frames.len());
        for chunk in idx.chunks(EVAL_CHUNK) {
            let p = self.model.posteriors(&set.gather(chunk), self.steps)?;
            out.extend((0..p.rows()).map(|r| p.row(r).to_vec()));
        }
        Ok(out)
    }
}

/// One arg-max decision and its confidence per frame.
pub fn classify_stream(clf: &dyn FrameClassifier, frames: &[FeatureFrame], truth: &[Region]) -> Result<DecisionStream> {
    let post = clf.posteriors(frames)?;
    let mut decisions = Vec::with_capacity(post.len());
    let mut confidences = Vec::with_capacity(post.len());
    for p in &post {
        let (k, c) = argmax(p);
        decisions.push(Class::from_index(k).ok_or_else(|| Error::InvalidInput(format!("class index {k}")))?);
        confidences.push(c.clamp(0.0, 1.0));
    }
    DecisionStream::new(decisions, confidences, truth.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Class::*;

    const A: Class = WristFlexion;
    const B: Class = WristExtension;
    const C: Class = WristPronation;

    fn steady(c: Class, n: usize) -> Vec<Region> {
        vec![Region::SteadyState(c); n]
    }

    fn stream(decisions: Vec<Class>, truth: Vec<Region>) -> DecisionStream {
        let n = decisions.len();
        DecisionStream::new(decisions, vec![1.0; n], truth).unwrap()
    }

    #[test]
    fn steady_state_hand_example() {
        let truth = [steady(A, 4), steady(B, 3)].concat();
        let s = stream(vec![A, A, C, A, B, NoMovement, B], truth);
        let m = steady_state_metrics(&s).unwrap();
        assert!((m.ss_ter - 100.0 * 2.0 / 7.0).abs() < 1e-12);
        assert!((m.ss_aer - 100.0 / 6.0).abs() < 1e-12);
        assert!((m.ss_ins - 100.0 * 2.0 / 5.0).abs() < 1e-12);
    }

    fn transition_truth() -> Vec<Region> {
        [steady(A, 4), vec![Region::Transition { prev: A, next: B }; 3], steady(B, 3)].concat()
    }

    #[test]
    fn transition_hand_example() {
        let s = stream(vec![A, A, C, A, A, B, B, B, NoMovement, B], transition_truth());
        let m = transition_metrics(&s).unwrap();
        assert_eq!((m.toff, m.ttd, m.ins, m.tce), (1.0, 1.0, 1.0, 0.0));
        assert_eq!(m.flag_count, 0);
    }

    #[test]
    fn immediate_departure() {
        let s = stream(vec![A, A, A, A, B, B, B, B, B, B], transition_truth());
        let m = transition_metrics(&s).unwrap();
        assert_eq!((m.toff, m.ttd), (0.0, 1.0));
    }

    #[test]
    fn tertiary_class_errors() {
        let s = stream(vec![A, A, A, A, A, C, B, B, B, B], transition_truth());
        let m = transition_metrics(&s).unwrap();
        assert_eq!(m.tce, 1.0);
        assert_eq!(m.ttd, 2.0);
    }

    #[test]
    fn never_departing_is_capped_and_flagged() {
        let s = stream(vec![A; 10], transition_truth());
        let m = transition_metrics(&s).unwrap();
        assert_eq!((m.toff, m.ttd, m.flag_count), (6.0, 0.0, 1));
    }

    #[test]
    fn blip_deletion() {
        let nm = NoMovement;
        assert_eq!(delete_nm_blips(&[A, nm, nm, A]), vec![A, A]);
        assert_eq!(delete_nm_blips(&[A, nm, B]), vec![A, nm, B]);
        assert_eq!(delete_nm_blips(&[nm, A, nm]), vec![nm, A, nm]);
        assert_eq!(instability(&[A, nm, B]), 2);
    }

    #[test]
    fn rejection() {
        let truth = steady(A, 3);
        let s = DecisionStream::new(vec![A, B, A], vec![0.9, 0.45, 0.5], truth).unwrap();
        assert_eq!(apply_rejection(&s, 0.0), s);
        let r = apply_rejection(&s, 0.5);
        assert_eq!(r.decisions, vec![A, NoMovement, A]);
        assert_eq!(r.confidences, s.confidences);
        assert_eq!(apply_rejection(&r, 0.5), r);
        assert!(apply_rejection(&s, 1.0).decisions.iter().all(|d| *d == NoMovement));
    }

    #[test]
    fn rejecting_everything() {
        let truth = [steady(NoMovement, 2), steady(A, 3), vec![Region::Transition { prev: A, next: B }; 2], steady(B, 3)].concat();
        let s = DecisionStream::new(vec![A; 10], vec![0.3; 10], truth).unwrap();
        let m = evaluate(&apply_rejection(&s, 1.0)).unwrap();
        assert_eq!(m.steady.ss_aer, 0.0);
        assert!((m.steady.ss_ter - 100.0 * 6.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_rejects_unsorted_thresholds() {
        let s = stream(vec![A; 10], transition_truth());
        assert!(rejection_sweep(&s, &[0.5, 0.1]).is_err());
        assert!(rejection_sweep(&s, &[0.0, 1.5]).is_err());
        let rows = rejection_sweep(&s, &[0.0]).unwrap();
        assert_eq!(rows[0].1, evaluate(&s).unwrap());
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(Metric::from_name(m.name()), Some(m));
        }
    }
}
