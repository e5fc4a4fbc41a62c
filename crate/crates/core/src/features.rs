//! LSF4 features (L-scale, maximum fractal length, mean square root, Willison
//! amplitude) per channel, and per-dimension standardization.

use std::ops::{Deref, DerefMut};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Frame, RawTrial, NUM_CHANNELS};

pub const FEATURES_PER_CHANNEL: usize = 4;
pub const NUM_FEATURES: usize = NUM_CHANNELS * FEATURES_PER_CHANNEL;

/// Floor applied to the summed squared differences before the MFL logarithm.
pub const MFL_EPS: f64 = 1e-12;
pub const STD_FLOOR: f64 = 1e-8;
/// WAMP threshold as a fraction of the per-channel training RMS.
pub const DEFAULT_WAMP_SCALE: f64 = 0.02;

const FEATURE_NAMES: [&str; FEATURES_PER_CHANNEL] = ["lscale", "mfl", "msr", "wamp"];

/// 24 features in channel-major order: `[ch1 lscale, ch1 mfl, ch1 msr, ch1 wamp, ch2 lscale, ...]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrame(pub [f64; NUM_FEATURES]);

impl Deref for FeatureFrame {
    type Target = [f64; NUM_FEATURES];
    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl DerefMut for FeatureFrame {
    fn deref_mut(&mut self) -> &mut Self::Target {
        &mut self.0
    }
}

pub fn feature_names() -> Vec<String> {
    (1..=NUM_CHANNELS)
        .flat_map(|c| FEATURE_NAMES.iter().map(move |f| format!("ch{c}_{f}")))
        .collect()
}

/// Sample L-scale (second L-moment) from the order statistics:
/// `0.5 / C(n, 2) * sum_i (2i - n - 1) x_(i)`.
pub fn l_scale(x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("L-scale needs at least 2 samples, got {n}")));
    }
    let mut sorted = x.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let nf = n as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, v)| (2.0 * (i + 1) as f64 - nf - 1.0) * v)
        .sum();
    let pairs = nf * (nf - 1.0) / 2.0;
    Ok(0.5 * weighted / pairs)
}

pub fn max_fractal_length(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InvalidInput("MFL needs at least 2 samples".into()));
    }
    let ss: f64 = x.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(ss.max(MFL_EPS).sqrt().log10())
}

pub fn mean_square_root(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidInput("MSR of an empty window".into()));
    }
    Ok(x.iter().map(|v| v.abs().sqrt()).sum::<f64>() / x.len() as f64)
}

/// Number of successive differences with magnitude at or above `threshold`.
pub fn willison_amplitude(x: &[f64], threshold: f64) -> f64 {
    x.windows(2).filter(|w| (w[1] - w[0]).abs() >= threshold).count() as f64
}

/// Per-channel WAMP thresholds, fit on training trials only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WampThresholds {
    pub per_channel: [f64; NUM_CHANNELS],
}

impl WampThresholds {
    /// `scale * RMS` of each channel pooled over `trials` (already filtered).
    pub fn fit<'a>(trials: impl IntoIterator<Item = &'a RawTrial>, scale: f64) -> Result<Self> {
        let mut sq = [0.0; NUM_CHANNELS];
        let mut n = 0usize;
        for t in trials {
            for s in &t.samples {
                for (a, v) in sq.iter_mut().zip(s) {
                    *a += v * v;
                }
            }
            n += t.samples.len();
        }
        if n == 0 {
            return Err(Error::InvalidInput("no samples to fit WAMP thresholds".into()));
        }
        Ok(WampThresholds {
            per_channel: sq.map(|s| scale * (s / n as f64).sqrt()),
        })
    }

    pub fn uniform(threshold: f64) -> Self {
        WampThresholds {
            per_channel: [threshold; NUM_CHANNELS],
        }
    }
}

/// The threshold-independent part of a frame's features (L-scale, MFL, MSR
/// per channel). Lets a trial be summarized once and completed per fold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialFeatures([[f64; 3]; NUM_CHANNELS]);

pub fn partial_features(frame: &Frame<'_>) -> Result<PartialFeatures> {
    let mut out = [[0.0; 3]; NUM_CHANNELS];
    let mut buf = Vec::with_capacity(frame.window.len());
    for (ch, o) in out.iter_mut().enumerate() {
        buf.clear();
        buf.extend(frame.channel(ch));
        *o = [l_scale(&buf)?, max_fractal_length(&buf)?, mean_square_root(&buf)?];
    }
    Ok(PartialFeatures(out))
}

pub fn complete_features(partial: &PartialFeatures, frame: &Frame<'_>, wamp: &WampThresholds) -> FeatureFrame {
    let mut f = [0.0; NUM_FEATURES];
    for ch in 0..NUM_CHANNELS {
        let base = ch * FEATURES_PER_CHANNEL;
        f[base..base + 3].copy_from_slice(&partial.0[ch]);
        let thr = wamp.per_channel[ch];
        let mut count = 0usize;
        let mut prev = frame.window[0][ch];
        for s in &frame.window[1..] {
            if (s[ch] - prev).abs() >= thr {
                count += 1;
            }
            prev = s[ch];
        }
        f[base + 3] = count as f64;
    }
    FeatureFrame(f)
}

pub fn extract_frame(frame: &Frame<'_>, wamp: &WampThresholds) -> Result<FeatureFrame> {
    Ok(complete_features(&partial_features(frame)?, frame, wamp))
}

pub fn extract_features(frames: &[Frame<'_>], wamp: &WampThresholds) -> Result<Vec<FeatureFrame>> {
    if frames.is_empty() {
        return Err(Error::InvalidInput("no frames to extract features from".into()));
    }
    frames.iter().map(|f| extract_frame(f, wamp)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Per-dimension mean and population standard deviation (floored at
    /// [`STD_FLOOR`]).
    pub fn fit(train: &[FeatureFrame]) -> Result<Self> {
        if train.len() < 2 {
            return Err(Error::InvalidInput("standardizer needs at least 2 frames".into()));
        }
        let n = train.len() as f64;
        let mut mean = vec![0.0; NUM_FEATURES];
        for f in train {
            for (m, v) in mean.iter_mut().zip(f.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; NUM_FEATURES];
        for f in train {
            for ((s, v), m) in var.iter_mut().zip(f.iter()).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, f: &FeatureFrame) -> FeatureFrame {
        let mut out = *f;
        for ((v, m), s) in out.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
        out
    }

    pub fn inverse(&self, f: &FeatureFrame) -> FeatureFrame {
        let mut out = *f;
        for ((v, m), s) in out.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = *v * s + m;
        }
        out
    }

    pub fn apply_all(&self, frames: &[FeatureFrame]) -> Vec<FeatureFrame> {
        frames.iter().map(|f| self.apply(f)).collect()
    }
}

/// Writes a feature cache: `frame_start_sample` followed by the 24 named
/// feature columns.
pub fn write_feature_cache(path: &Path, starts: &[usize], features: &[FeatureFrame]) -> Result<()> {
    if starts.len() != features.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} frame starts vs {} feature rows",
            starts.len(),
            features.len()
        )));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["frame_start_sample".to_string()];
    header.extend(feature_names());
    w.write_record(&header)?;
    for (s, f) in starts.iter().zip(features) {
        let mut row = vec![s.to_string()];
        row.extend(f.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_cache(path: &Path) -> Result<(Vec<usize>, Vec<FeatureFrame>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::data(path, e))?;
    let mut starts = Vec::new();
    let mut feats = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::data(path, e))?;
        if rec.len() != NUM_FEATURES + 1 {
            return Err(Error::data(path, format!("expected {} columns, got {}", NUM_FEATURES + 1, rec.len())));
        }
        starts.push(rec[0].parse().map_err(|e| Error::data(path, e))?);
        let mut f = [0.0; NUM_FEATURES];
        for (v, field) in f.iter_mut().zip(rec.iter().skip(1)) {
            *v = field.parse().map_err(|e| Error::data(path, e))?;
        }
        feats.push(FeatureFrame(f));
    }
    Ok((starts, feats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{Sample, FRAME_LEN};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Half the mean absolute difference over all unordered pairs.
    fn l_scale_pairs(x: &[f64]) -> f64 {
        let n = x.len();
        let mut sum = 0.0;
        let mut pairs = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                sum += (x[i] - x[j]).abs();
                pairs += 1.0;
            }
        }
        0.5 * sum / pairs
    }

    #[test]
    fn l_scale_examples() {
        assert_eq!(l_scale(&[4.0; 10]).unwrap(), 0.0);
        assert!(close(l_scale(&[0.0, 1.0]).unwrap(), 0.5, 1e-15));
        assert!(close(l_scale(&[1.0, 2.0, 3.0]).unwrap(), 2.0 / 3.0, 1e-15));
        assert!(l_scale(&[1.0]).is_err());
    }

    #[test]
    fn mfl_examples() {
        assert!(close(max_fractal_length(&[0.0, 1.0, 0.0, 1.0]).unwrap(), 3f64.sqrt().log10(), 1e-15));
        assert!(close(max_fractal_length(&[0.0, 1.0, 0.0, 1.0]).unwrap(), 0.23856, 1e-5));
        assert_eq!(max_fractal_length(&[0.0, 1.0]).unwrap(), 0.0);
        assert!(close(max_fractal_length(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap(), 2f64.log10(), 1e-15));
        assert_eq!(max_fractal_length(&[5.0; 8]).unwrap(), MFL_EPS.sqrt().log10());
    }

    #[test]
    fn msr_and_wamp_examples() {
        assert_eq!(mean_square_root(&[0.0; 4]).unwrap(), 0.0);
        assert_eq!(mean_square_root(&[4.0, 9.0]).unwrap(), 2.5);
        assert_eq!(mean_square_root(&[-4.0]).unwrap(), 2.0);
        assert_eq!(willison_amplitude(&[0.0, 0.01, 0.02, 0.03], 0.5), 0.0);
        assert_eq!(willison_amplitude(&[0.0, 0.1, 0.3], 0.15), 1.0);
        assert_eq!(willison_amplitude(&[0.0, 1.0, 0.0], 0.0), 2.0);
    }

    fn frame_from(samples: &[Sample]) -> Frame<'_> {
        Frame { start_sample: 0, window: samples }
    }

    #[test]
    fn zero_frame_features() {
        let samples = vec![[0.0; 6]; FRAME_LEN];
        let f = extract_frame(&frame_from(&samples), &WampThresholds::uniform(0.1)).unwrap();
        for ch in 0..6 {
            let b = ch * 4;
            assert_eq!(f[b], 0.0);
            assert_eq!(f[b + 1], MFL_EPS.sqrt().log10());
            assert_eq!(f[b + 2], 0.0);
            assert_eq!(f[b + 3], 0.0);
        }
    }

    #[test]
    fn scaling_a_frame() {
        let samples: Vec<Sample> = (0..FRAME_LEN)
            .map(|i| {
                let t = i as f64;
                [(t * 0.3).sin(), (t * 0.7).cos(), (t * 1.1).sin() * 2.0, t.sin().powi(3), (t * 0.05).sin(), (t * 2.3).cos()]
            })
            .collect();
        let doubled: Vec<Sample> = samples.iter().map(|s| s.map(|v| 2.0 * v)).collect();
        let w = WampThresholds::uniform(0.0);
        let a = extract_frame(&frame_from(&samples), &w).unwrap();
        let b = extract_frame(&frame_from(&doubled), &w).unwrap();
        let a2 = extract_frame(&frame_from(&samples), &w).unwrap();
        assert_eq!(a, a2);
        for ch in 0..6 {
            let i = ch * 4;
            assert!(close(b[i], 2.0 * a[i], 1e-12));
            assert!(close(b[i + 1], a[i + 1] + 2f64.log10(), 1e-12));
            assert!(close(b[i + 2], 2f64.sqrt() * a[i + 2], 1e-12));
            assert_eq!(b[i + 3], a[i + 3]);
        }
    }

    #[test]
    fn names_are_channel_major() {
        let n = feature_names();
        assert_eq!(n.len(), 24);
        assert_eq!(&n[..5], ["ch1_lscale", "ch1_mfl", "ch1_msr", "ch1_wamp", "ch2_lscale"]);
    }

    #[test]
    fn standardizer_examples() {
        let train: Vec<FeatureFrame> = (0..50)
            .map(|i| {
                let mut f = [7.0; NUM_FEATURES];
                for (d, v) in f.iter_mut().enumerate().skip(1) {
                    *v = ((i * (d + 3)) % 29) as f64 * 0.3 + d as f64;
                }
                FeatureFrame(f)
            })
            .collect();
        let s = Standardizer::fit(&train).unwrap();
        let z = s.apply_all(&train);
        for d in 0..NUM_FEATURES {
            let mean = z.iter().map(|f| f[d]).sum::<f64>() / z.len() as f64;
            let var = z.iter().map(|f| (f[d] - mean).powi(2)).sum::<f64>() / z.len() as f64;
            assert!(mean.abs() < 1e-9);
            if d == 0 {
                assert_eq!(s.std[0], STD_FLOOR);
                assert!(z.iter().all(|f| f[0] == 0.0));
            } else {
                assert!((var.sqrt() - 1.0).abs() < 1e-9);
            }
        }
        let one = Standardizer { mean: vec![2.0; NUM_FEATURES], std: vec![2.0; NUM_FEATURES] };
        assert_eq!(one.apply(&FeatureFrame([4.0; NUM_FEATURES]))[0], 1.0);
        assert!(Standardizer::fit(&train[..1]).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let feats = vec![FeatureFrame([0.1; NUM_FEATURES]), FeatureFrame([-1.0 / 3.0; NUM_FEATURES])];
        write_feature_cache(&p, &[0, 27], &feats).unwrap();
        let (s, f) = read_feature_cache(&p).unwrap();
        assert_eq!(s, vec![0, 27]);
        assert_eq!(f, feats);
    }

    proptest! {
        #[test]
        fn l_scale_matches_pairwise_definition(x in prop::collection::vec(-100.0f64..100.0, 2..64)) {
            let fast = l_scale(&x).unwrap();
            let slow = l_scale_pairs(&x);
            prop_assert!((fast - slow).abs() <= 1e-10 * slow.abs().max(1.0));
        }

        #[test]
        fn l_scale_is_absolutely_homogeneous(x in prop::collection::vec(-10.0f64..10.0, 2..40), a in -5.0f64..5.0) {
            let scaled: Vec<f64> = x.iter().map(|v| a * v).collect();
            prop_assert!((l_scale(&scaled).unwrap() - a.abs() * l_scale(&x).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn order_sensitivity(x in prop::collection::vec(-10.0f64..10.0, 3..40), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut y = x.clone();
            y.shuffle(&mut crate::rng::stream(seed, &[]));
            prop_assert!((l_scale(&x).unwrap() - l_scale(&y).unwrap()).abs() < 1e-9);
            prop_assert!((mean_square_root(&x).unwrap() - mean_square_root(&y).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn wamp_at_zero_counts_every_step(x in prop::collection::vec(-10.0f64..10.0, 2..40)) {
            let distinct = x.windows(2).all(|w| w[0] != w[1]);
            prop_assume!(distinct);
            prop_assert_eq!(willison_amplitude(&x, 0.0), (x.len() - 1) as f64);
        }

        #[test]
        fn standardize_inverse(vals in prop::collection::vec(-50.0f64..50.0, NUM_FEATURES * 3)) {
            let frames: Vec<FeatureFrame> = vals.chunks(NUM_FEATURES).map(|c| FeatureFrame(c.try_into().unwrap())).collect();
            let s = Standardizer::fit(&frames).unwrap();
            for f in &frames {
                let back = s.inverse(&s.apply(f));
                for d in 0..NUM_FEATURES {
                    if s.std[d] > STD_FLOOR {
                        prop_assert!((back[d] - f[d]).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn mfl_and_wamp_depend_on_order() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 2.0, 1.0, 3.0];
        assert_ne!(max_fractal_length(&x).unwrap(), max_fractal_length(&y).unwrap());
        assert_ne!(willison_amplitude(&x, 1.5), willison_amplitude(&y, 1.5));
    }
}
