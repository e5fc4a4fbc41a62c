//! Records which trials every fitted object saw, and checks that no object
//! saw its fold's test trials.

use serde::{Deserialize, Serialize};

use super::Scheme;
use crate::error::{Error, Result};
use crate::synthgen::dataset::TrialId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub scheme: Scheme,
    pub subject: usize,
    pub fold: usize,
    /// e.g. `wamp_thresholds`, `standardizer`, `lda`, `backbone`, `head`.
    pub object: String,
    pub fitted_on: Vec<TrialId>,
    pub test_trials: Vec<TrialId>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditLog {
    pub entries: Vec<AuditEntry>,
}

impl AuditLog {
    pub fn extend(&mut self, other: AuditLog) {
        self.entries.extend(other.entries);
    }

    /// Fails on the first entry whose training trials include a test trial.
    pub fn check_leakage(&self) -> Result<()> {
        for e in &self.entries {
            if let Some(t) = e.fitted_on.iter().find(|t| e.test_trials.contains(t)) {
                return Err(Error::Leakage(format!(
                    "{} of {} subject {} fold {} was fit on test trial {t}",
                    e.object, e.scheme, e.subject, e.fold
                )));
            }
        }
        Ok(())
    }
}
