//! Trial files: `<name>.csv` with header `t,ch1,...,ch6` and a JSON sidecar
//! `<name>.meta` holding the sample rate, trial kind, prompt schedule and
//! ground-truth transition bounds.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Prompt, RawTrial, Sample, TransitionBound, TrialKind, NUM_CHANNELS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub sample_rate: f64,
    pub trial_kind: TrialKind,
    pub num_samples: usize,
    pub prompts: Vec<Prompt>,
    pub movement_onsets: Vec<TransitionBound>,
}

pub fn csv_path(base: &Path) -> PathBuf {
    base.with_extension("csv")
}

pub fn meta_path(base: &Path) -> PathBuf {
    base.with_extension("meta")
}

fn header() -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((1..=NUM_CHANNELS).map(|c| format!("ch{c}")))
        .collect()
}

/// Writes `base.csv` and `base.meta`. Values are printed in shortest
/// round-trip form, so reading back is exact.
pub fn write_trial(base: &Path, trial: &RawTrial) -> Result<()> {
    let mut w = BufWriter::new(File::create(csv_path(base))?);
    writeln!(w, "{}", header().join(","))?;
    let mut line = String::with_capacity(160);
    for (i, s) in trial.samples.iter().enumerate() {
        use std::fmt::Write as _;
        line.clear();
        let _ = write!(line, "{}", i as f64 / trial.sample_rate);
        for v in s {
            let _ = write!(line, ",{v}");
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;

    let meta = TrialMeta {
        sample_rate: trial.sample_rate,
        trial_kind: trial.kind,
        num_samples: trial.num_samples(),
        prompts: trial.prompts.clone(),
        movement_onsets: trial.movement_onsets.clone(),
    };
    serde_json::to_writer_pretty(BufWriter::new(File::create(meta_path(base))?), &meta)?;
    Ok(())
}

pub fn read_meta(base: &Path) -> Result<TrialMeta> {
    let path = meta_path(base);
    let f = File::open(&path).map_err(|e| Error::data(&path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::data(&path, e))
}

pub fn read_trial(base: &Path) -> Result<RawTrial> {
    let meta = read_meta(base)?;
    let path = csv_path(base);
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| Error::data(&path, e))?;
    let hdr = rdr.headers().map_err(|e| Error::data(&path, e))?.clone();
    if hdr.iter().collect::<Vec<_>>() != header() {
        return Err(Error::data(&path, format!("unexpected header {hdr:?}")));
    }
    let mut samples: Vec<Sample> = Vec::with_capacity(meta.num_samples);
    let mut rec = csv::StringRecord::new();
    while rdr.read_record(&mut rec).map_err(|e| Error::data(&path, e))? {
        let mut s = [0.0; NUM_CHANNELS];
        for (ch, v) in s.iter_mut().enumerate() {
            let field = rec.get(ch + 1).unwrap_or("");
            *v = field
                .parse()
                .map_err(|_| Error::data(&path, format!("row {}: bad value {field:?}", samples.len() + 1)))?;
        }
        samples.push(s);
    }
    if samples.len() != meta.num_samples {
        return Err(Error::data(
            &path,
            format!("{} rows but meta declares {}", samples.len(), meta.num_samples),
        ));
    }
    let trial = RawTrial {
        samples,
        sample_rate: meta.sample_rate,
        kind: meta.trial_kind,
        prompts: meta.prompts,
        movement_onsets: meta.movement_onsets,
    };
    trial.validate().map_err(|e| Error::data(&path, e))?;
    Ok(trial)
}
