//! Per-subject preprocessing shared by every fold: filtering, framing,
//! fold-independent features and labels. Fold-dependent steps (WAMP
//! thresholds, standardization) are applied on demand.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::features::{complete_features, partial_features, FeatureFrame, PartialFeatures, Standardizer, WampThresholds};
use crate::labeling::{label_dynamic, label_ramp, LabeledFrames};
use crate::signal::{bandpass_filter, frame_trial, mean_absolute_value, RawTrial, TrialKind, NUM_CHANNELS};
use crate::synthgen::dataset::{Dataset, TrialId};

#[derive(Debug, Clone)]
pub struct PreparedTrial {
    pub filtered: RawTrial,
    pub partial: Vec<PartialFeatures>,
    pub labels: LabeledFrames,
    /// Ramp trials only: the NM amplitude threshold used for labeling.
    pub rest_threshold: Option<f64>,
}

pub fn prepare_trial(raw: &RawTrial) -> Result<PreparedTrial> {
    let filtered = bandpass_filter(raw)?;
    let frames = frame_trial(&filtered)?;
    let starts: Vec<usize> = frames.iter().map(|f| f.start_sample).collect();
    let partial = frames.iter().map(partial_features).collect::<Result<Vec<_>>>()?;
    let (labels, rest_threshold) = match raw.kind {
        TrialKind::Ramp => {
            let amp: Vec<f64> = frames
                .iter()
                .map(|f| mean_absolute_value(f).iter().sum::<f64>() / NUM_CHANNELS as f64)
                .collect();
            let (l, tau) = label_ramp(&starts, &amp, &raw.prompts)?;
            (l, Some(tau))
        }
        TrialKind::Dynamic => (label_dynamic(&starts, &raw.prompts, &raw.movement_onsets)?, None),
    };
    drop(frames);
    Ok(PreparedTrial {
        filtered,
        partial,
        labels,
        rest_threshold,
    })
}

impl PreparedTrial {
    pub fn features(&self, wamp: &WampThresholds) -> Result<Vec<FeatureFrame>> {
        let frames = frame_trial(&self.filtered)?;
        Ok(frames
            .iter()
            .zip(&self.partial)
            .map(|(f, p)| complete_features(p, f, wamp))
            .collect())
    }

    pub fn label_indices(&self) -> Vec<usize> {
        self.labels.labels.iter().map(|c| c.index()).collect()
    }
}

/// Every trial of one subject, prepared once.
#[derive(Debug, Clone)]
pub struct SubjectData {
    pub subject: usize,
    pub trials: BTreeMap<TrialId, PreparedTrial>,
}

impl SubjectData {
    pub fn load(dataset: &Dataset, subject: usize) -> Result<Self> {
        let mut trials = BTreeMap::new();
        for kind in [TrialKind::Ramp, TrialKind::Dynamic] {
            for id in dataset.trial_ids(subject, kind) {
                trials.insert(id, prepare_trial(&dataset.load(id)?)?);
            }
        }
        Ok(SubjectData { subject, trials })
    }

    pub fn ids(&self, kind: TrialKind) -> Vec<TrialId> {
        self.trials.keys().filter(|id| id.kind == kind).copied().collect()
    }

    pub fn get(&self, id: TrialId) -> Result<&PreparedTrial> {
        self.trials
            .get(&id)
            .ok_or_else(|| crate::Error::InvalidInput(format!("trial {id} not loaded")))
    }
}

/// Fold-specific feature transforms fit on training trials.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeaturePipeline {
    pub wamp: WampThresholds,
    pub standardizer: Standardizer,
}

impl FeaturePipeline {
    pub fn fit(train: &[&PreparedTrial], wamp_scale: f64) -> Result<Self> {
        let wamp = WampThresholds::fit(train.iter().map(|t| &t.filtered), wamp_scale)?;
        let mut all = Vec::new();
        for t in train {
            all.extend(t.features(&wamp)?);
        }
        let standardizer = Standardizer::fit(&all)?;
        Ok(FeaturePipeline { wamp, standardizer })
    }

    pub fn transform(&self, trial: &PreparedTrial) -> Result<Vec<FeatureFrame>> {
        Ok(self.standardizer.apply_all(&trial.features(&self.wamp)?))
    }
}
