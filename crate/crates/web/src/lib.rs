//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each exported function has a plain Rust counterpart so the logic is
//! testable natively. Results cross the boundary as flat arrays or JSON.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use dynamyo_core::class::Class;
use dynamyo_core::experiments::prep::{prepare_trial, FeaturePipeline, PreparedTrial};
use dynamyo_core::features::{feature_names, NUM_FEATURES};
use dynamyo_core::lda::LdaModel;
use dynamyo_core::metrics::{classify_stream, rejection_sweep, Metric};
use dynamyo_core::neural::Matrix;
use dynamyo_core::signal::{Bandpass, SAMPLE_RATE};
use dynamyo_core::synthgen::{generate_subject, SynthConfig};
use dynamyo_core::Result;

const WAMP_SCALE: f64 = 0.02;

/// Log-spaced frequencies from 1 Hz to just below Nyquist.
pub fn response_frequencies(points: usize) -> Vec<f64> {
    let (lo, hi) = (1.0f64.ln(), (0.499 * SAMPLE_RATE).ln());
    (0..points)
        .map(|i| (lo + (hi - lo) * i as f64 / (points.max(2) - 1) as f64).exp())
        .collect()
}

/// Zero-phase magnitude response in dB: the forward-backward pass squares
/// the single-pass magnitude.
pub fn zero_phase_gain_db(order: usize, low_hz: f64, high_hz: f64, freqs: &[f64]) -> Result<Vec<f64>> {
    let f = Bandpass::design(order, low_hz, high_hz, SAMPLE_RATE)?;
    Ok(freqs.iter().map(|&hz| 20.0 * f.response(hz).norm_sqr().max(1e-30).log10()).collect())
}

#[derive(Debug, Serialize)]
pub struct TrialView {
    pub sample_rate: f64,
    pub frame_starts: Vec<usize>,
    pub labels: Vec<&'static str>,
    pub transition: Vec<bool>,
    pub feature_names: Vec<String>,
    /// Frame-major, `NUM_FEATURES` values per frame, before standardization.
    pub features: Vec<f64>,
}

fn small_subject(seed: u64, snr_db: f64, ramp_trials: usize) -> Result<Vec<PreparedTrial>> {
    let cfg = SynthConfig {
        num_subjects: 1,
        seed,
        snr_db,
        ramp_trials,
        dynamic_trials: 1,
        ..SynthConfig::default()
    };
    let s = generate_subject(&cfg, 1)?;
    s.ramp.iter().chain(&s.dynamic).map(prepare_trial).collect()
}

/// Features and labels of a freshly generated dynamic trial, with WAMP
/// thresholds taken from one ramp trial.
pub fn synthetic_trial(seed: u64, snr_db: f64) -> Result<TrialView> {
    let trials = small_subject(seed, snr_db, 1)?;
    let (ramp, dynamic) = (&trials[0], &trials[1]);
    let wamp = dynamyo_core::features::WampThresholds::fit([&ramp.filtered], WAMP_SCALE)?;
    let feats = dynamic.features(&wamp)?;
    Ok(TrialView {
        sample_rate: SAMPLE_RATE,
        frame_starts: dynamic.labels.frame_starts.clone(),
        labels: dynamic.labels.labels.iter().map(|c| c.abbrev()).collect(),
        transition: dynamic.labels.regions.iter().map(|r| !r.is_steady()).collect(),
        feature_names: feature_names(),
        features: feats.iter().flat_map(|f| f.0).collect(),
    })
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub metrics: Vec<(&'static str, f64)>,
}

/// Trains LDA on ramp trials and sweeps the rejection threshold over one
/// dynamic trial of the same synthetic subject.
pub fn lda_sweep(seed: u64, snr_db: f64, thresholds: &[f64]) -> Result<Vec<SweepPoint>> {
    let trials = small_subject(seed, snr_db, 2)?;
    let (train, test) = trials.split_at(trials.len() - 1);
    let train: Vec<&PreparedTrial> = train.iter().collect();
    let pipeline = FeaturePipeline::fit(&train, WAMP_SCALE)?;
    let mut x = Vec::new();
    let mut y: Vec<Class> = Vec::new();
    for t in &train {
        x.extend(pipeline.transform(t)?);
        y.extend(&t.labels.labels);
    }
    let m = Matrix::from_fn(x.len(), NUM_FEATURES, |r, c| x[r][c]);
    let lda = LdaModel::fit_classes(&m, &y)?;
    let test = &test[0];
    let stream = classify_stream(&lda, &pipeline.transform(test)?, &test.labels.regions)?;
    Ok(rejection_sweep(&stream, thresholds)?
        .into_iter()
        .map(|(threshold, r)| SweepPoint {
            threshold,
            metrics: Metric::ALL.iter().map(|&k| (k.name(), r.get(k))).collect(),
        })
        .collect())
}

fn js<T>(r: Result<T>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

fn json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = responseFrequencies)]
pub fn response_frequencies_js(points: usize) -> Vec<f64> {
    response_frequencies(points)
}

#[wasm_bindgen(js_name = filterResponse)]
pub fn filter_response_js(order: usize, low_hz: f64, high_hz: f64, points: usize) -> Result<Vec<f64>, JsError> {
    js(zero_phase_gain_db(order, low_hz, high_hz, &response_frequencies(points)))
}

#[wasm_bindgen(js_name = syntheticTrial)]
pub fn synthetic_trial_js(seed: u32, snr_db: f64) -> Result<String, JsError> {
    json(&js(synthetic_trial(seed.into(), snr_db))?)
}

#[wasm_bindgen(js_name = ldaSweep)]
pub fn lda_sweep_js(seed: u32, snr_db: f64, thresholds: Vec<f64>) -> Result<String, JsError> {
    json(&js(lda_sweep(seed.into(), snr_db, &thresholds))?)
}
