//! Results tables and the summary report.
//!
//! A results file has one row per (subject, trial, scheme, threshold, metric):
//! `subject,trial,scheme,rejection_threshold,metric,value,flag_count`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Scheme;
use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricsReport};

pub const RESULTS_HEADER: [&str; 7] = ["subject", "trial", "scheme", "rejection_threshold", "metric", "value", "flag_count"];
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CURVES_FILE: &str = "rejection_curves.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub subject: usize,
    pub trial: String,
    pub scheme: Scheme,
    pub rejection_threshold: f64,
    pub metric: Metric,
    pub value: f64,
    pub flag_count: usize,
}

pub fn rows_for(subject: usize, trial: &str, scheme: Scheme, sweep: &[(f64, MetricsReport)]) -> Vec<ResultRow> {
    let mut rows = Vec::with_capacity(sweep.len() * Metric::ALL.len());
    for (t, report) in sweep {
        for m in Metric::ALL {
            rows.push(ResultRow {
                subject,
                trial: trial.to_string(),
                scheme,
                rejection_threshold: *t,
                metric: m,
                value: report.get(m),
                flag_count: report.transition.flag_count,
            });
        }
    }
    rows
}

/// Writes `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    write(&tmp)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_atomic(path, |tmp| {
        let mut w = csv::Writer::from_path(tmp)?;
        w.write_record(RESULTS_HEADER)?;
        for r in rows {
            w.write_record([
                r.subject.to_string(),
                r.trial.clone(),
                r.scheme.name().to_string(),
                r.rejection_threshold.to_string(),
                r.metric.name().to_string(),
                r.value.to_string(),
                r.flag_count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(RESULTS_HEADER) {
        return Err(Error::data(path, "not a results table"));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::data(path, format!("row {}: bad {what}", i + 1));
        rows.push(ResultRow {
            subject: rec[0].parse().map_err(|_| bad("subject"))?,
            trial: rec[1].to_string(),
            scheme: rec[2].parse().map_err(|_| bad("scheme"))?,
            rejection_threshold: rec[3].parse().map_err(|_| bad("rejection_threshold"))?,
            metric: Metric::from_name(&rec[4]).ok_or_else(|| bad("metric"))?,
            value: rec[5].parse().map_err(|_| bad("value"))?,
            flag_count: rec[6].parse().map_err(|_| bad("flag_count"))?,
        });
    }
    Ok(rows)
}

/// Reads every results table in `dir` (files whose header matches).
pub fn read_results_dir(dir: &Path) -> Result<Vec<ResultRow>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::data(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut rows = Vec::new();
    for p in paths {
        match read_results(&p) {
            Ok(r) => rows.extend(r),
            Err(Error::Data { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub metric: Metric,
    pub rejection_threshold: f64,
    pub subjects: usize,
    pub trials: usize,
    /// Mean over subjects of the per-subject trial means.
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub flagged_transitions: usize,
}

/// Per (scheme, metric, threshold): trial values are averaged per subject;
/// the distribution over subjects gives median and quartiles.
pub fn summarize(rows: &[ResultRow]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no result rows to summarize".into()));
    }
    let mut groups: BTreeMap<(Scheme, u64, Metric), BTreeMap<usize, Vec<&ResultRow>>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.scheme, r.rejection_threshold.to_bits(), r.metric))
            .or_default()
            .entry(r.subject)
            .or_default()
            .push(r);
    }
    let mut out: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((scheme, t, metric), by_subject)| {
            let mut means: Vec<f64> = by_subject
                .values()
                .map(|v| v.iter().map(|r| r.value).sum::<f64>() / v.len() as f64)
                .collect();
            let trials = by_subject.values().map(|v| v.len()).sum();
            let flagged = by_subject.values().flatten().map(|r| r.flag_count).sum();
            let mean = means.iter().sum::<f64>() / means.len() as f64;
            means.sort_by(f64::total_cmp);
            SummaryRow {
                scheme,
                metric,
                rejection_threshold: f64::from_bits(t),
                subjects: means.len(),
                trials,
                mean,
                median: quantile(&means, 0.5),
                q1: quantile(&means, 0.25),
                q3: quantile(&means, 0.75),
                flagged_transitions: flagged,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (a.scheme, a.metric)
            .cmp(&(b.scheme, b.metric))
            .then(a.rejection_threshold.total_cmp(&b.rejection_threshold))
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub summary: Vec<SummaryRow>,
    pub summary_path: PathBuf,
    pub curves_path: PathBuf,
}

impl Report {
    pub fn mean(&self, scheme: Scheme, metric: Metric, threshold: f64) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.scheme == scheme && r.metric == metric && r.rejection_threshold == threshold)
            .map(|r| r.mean)
    }
}

/// Summary table plus rejection curves (one row per scheme and threshold,
/// one column per metric mean), written into `results_dir`.
pub fn emit_report(results_dir: &Path) -> Result<Report> {
    let rows = read_results_dir(results_dir)?;
    if rows.is_empty() {
        return Err(Error::data(results_dir, "no results tables found"));
    }
    let summary = summarize(&rows)?;
    let summary_path = results_dir.join(SUMMARY_FILE);
    write_atomic(&summary_path, |tmp| {
        let mut w = csv::Writer::from_path(tmp)?;
        w.write_record([
            "scheme",
            "metric",
            "rejection_threshold",
            "subjects",
            "trials",
            "mean",
            "median",
            "q1",
            "q3",
            "flagged_transitions",
        ])?;
        for s in &summary {
            w.write_record([
                s.scheme.name().to_string(),
                s.metric.name().to_string(),
                s.rejection_threshold.to_string(),
                s.subjects.to_string(),
                s.trials.to_string(),
                s.mean.to_string(),
                s.median.to_string(),
                s.q1.to_string(),
                s.q3.to_string(),
                s.flagged_transitions.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    let curves_path = results_dir.join(CURVES_FILE);
    write_atomic(&curves_path, |tmp| {
        let mut w = csv::Writer::from_path(tmp)?;
        let mut header = vec!["scheme".to_string(), "rejection_threshold".to_string()];
        header.extend(Metric::ALL.iter().map(|m| m.name().to_string()));
        w.write_record(&header)?;
        let mut curves: BTreeMap<(Scheme, u64), BTreeMap<Metric, f64>> = BTreeMap::new();
        for s in &summary {
            curves
                .entry((s.scheme, s.rejection_threshold.to_bits()))
                .or_default()
                .insert(s.metric, s.mean);
        }
        let mut keys: Vec<_> = curves.keys().copied().collect();
        keys.sort_by(|a, b| a.0.cmp(&b.0).then(f64::from_bits(a.1).total_cmp(&f64::from_bits(b.1))));
        for k in keys {
            let vals = &curves[&k];
            let mut rec = vec![k.0.name().to_string(), f64::from_bits(k.1).to_string()];
            rec.extend(Metric::ALL.iter().map(|m| vals.get(m).map_or(String::new(), |v| v.to_string())));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(Report {
        summary,
        summary_path,
        curves_path,
    })
}
