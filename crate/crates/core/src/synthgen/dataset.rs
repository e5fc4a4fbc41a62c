//! Dataset directory layout:
//!
//! ```text
//! <root>/manifest.json
//! <root>/subject_<id>/ramp_<k>.csv|.meta
//! <root>/subject_<id>/dyn_<k>.csv|.meta
//! ```
//!
//! Subject and trial numbers start at 1.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{generate_subject, SynthConfig};
use crate::error::{Error, Result};
use crate::signal::{io, RawTrial, TrialKind};

pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT: &str = "dynamyo-dataset";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrialId {
    pub subject: usize,
    pub kind: TrialKind,
    pub index: usize,
}

impl TrialId {
    pub fn ramp(subject: usize, index: usize) -> Self {
        TrialId { subject, kind: TrialKind::Ramp, index }
    }

    pub fn dynamic(subject: usize, index: usize) -> Self {
        TrialId { subject, kind: TrialKind::Dynamic, index }
    }

    /// File stem within the subject directory, e.g. `dyn_3`.
    pub fn stem(&self) -> String {
        match self.kind {
            TrialKind::Ramp => format!("ramp_{}", self.index),
            TrialKind::Dynamic => format!("dyn_{}", self.index),
        }
    }

    pub fn relative_base(&self) -> PathBuf {
        PathBuf::from(format!("subject_{}", self.subject)).join(self.stem())
    }
}

impl fmt::Display for TrialId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "subject_{}/{}", self.subject, self.stem())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(flatten)]
    pub id: TrialId,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config: SynthConfig,
    pub trials: Vec<ManifestEntry>,
}

/// Generates every subject of `cfg` and writes the trial files plus manifest.
pub fn write_dataset(root: &Path, cfg: &SynthConfig) -> Result<Manifest> {
    cfg.validate()?;
    let mut trials = Vec::new();
    for subject in 1..=cfg.num_subjects {
        fs::create_dir_all(root.join(format!("subject_{subject}")))?;
        let data = generate_subject(cfg, subject)?;
        let kinds = [(TrialKind::Ramp, &data.ramp), (TrialKind::Dynamic, &data.dynamic)];
        for (kind, list) in kinds {
            for (k, trial) in list.iter().enumerate() {
                let id = TrialId { subject, kind, index: k + 1 };
                let rel = id.relative_base();
                io::write_trial(&root.join(&rel), trial)?;
                trials.push(ManifestEntry { id, path: rel });
            }
        }
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        config: cfg.clone(),
        trials,
    };
    serde_json::to_writer_pretty(BufWriter::new(File::create(root.join(MANIFEST_FILE))?), &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    manifest: Manifest,
}

impl Dataset {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let path = root.join(MANIFEST_FILE);
        let f = File::open(&path).map_err(|e| Error::data(&path, e))?;
        let manifest: Manifest = serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::data(&path, e))?;
        if manifest.format != FORMAT || manifest.version != VERSION {
            return Err(Error::data(
                &path,
                format!("unsupported manifest {} v{}", manifest.format, manifest.version),
            ));
        }
        Ok(Dataset { root, manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn subjects(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.manifest.trials.iter().map(|e| e.id.subject).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn trial_ids(&self, subject: usize, kind: TrialKind) -> Vec<TrialId> {
        let mut ids: Vec<TrialId> = self
            .manifest
            .trials
            .iter()
            .map(|e| e.id)
            .filter(|id| id.subject == subject && id.kind == kind)
            .collect();
        ids.sort();
        ids
    }

    pub fn load(&self, id: TrialId) -> Result<RawTrial> {
        let entry = self
            .manifest
            .trials
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| Error::data(self.root.join(MANIFEST_FILE), format!("no trial {id}")))?;
        let trial = io::read_trial(&self.root.join(&entry.path))?;
        if trial.kind != id.kind {
            return Err(Error::data(&entry.path, format!("meta says {:?}, manifest says {:?}", trial.kind, id.kind)));
        }
        Ok(trial)
    }
}
