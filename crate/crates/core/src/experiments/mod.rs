//! The five classifier schemes, their trial splits, and the end-to-end runner.
//!
//! | scheme | training data | validation | test |
//! |--------|---------------|------------|------|
//! | `lda-r` | 5 ramp trials | none | 6 dynamic trials |
//! | `lstm-r` | 4 ramp trials | 1 seeded-random ramp trial | 6 dynamic trials |
//! | `lda-d` | 5 dynamic trials | none | held-out dynamic trial (6 folds) |
//! | `lstm-d` | 4 dynamic trials | lowest-index remaining trial | held-out dynamic trial (6 folds) |
//! | `lstm-v` | as `lstm-d`; backbone pre-trained with VICReg, frozen, then a head is fit | | |

pub mod audit;
pub mod checkpoint;
pub mod prep;
pub mod results;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::class::Class;
use crate::error::{Error, Result};
use crate::features::{write_feature_cache, FeatureFrame, WampThresholds, DEFAULT_WAMP_SCALE};
use crate::labeling::{write_labels, Region};
use crate::lda::LdaModel;
use crate::metrics::{classify_stream, rejection_sweep, validate_thresholds, DecisionStream, Temporal};
use crate::neural::model::{Backbone, Head, Model, ModelConfig};
use crate::neural::objectives::{embed_all, HeadOnly, Supervised};
use crate::neural::{train, Matrix, SequenceSet, TrainConfig};
use crate::rng;
use crate::signal::TrialKind;
use crate::synthgen::dataset::{Dataset, TrialId};
use crate::vicreg::{VicregConfig, VicregObjective};

use audit::{AuditEntry, AuditLog};
use checkpoint::{lstm_model, Checkpoint, LoadedModel, NamedHistory, StoredModel};
use prep::{FeaturePipeline, PreparedTrial, SubjectData};
use results::{rows_for, write_atomic, write_results, Report, ResultRow};

/// Overrides `output_dir` of the experiment configuration when set.
pub const OUTPUT_ENV: &str = "DYNAMYO_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "lda-r")]
    LdaR,
    #[serde(rename = "lstm-r")]
    LstmR,
    #[serde(rename = "lda-d")]
    LdaD,
    #[serde(rename = "lstm-d")]
    LstmD,
    #[serde(rename = "lstm-v")]
    LstmV,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::LdaR, Scheme::LstmR, Scheme::LdaD, Scheme::LstmD, Scheme::LstmV];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::LdaR => "lda-r",
            Scheme::LstmR => "lstm-r",
            Scheme::LdaD => "lda-d",
            Scheme::LstmD => "lstm-d",
            Scheme::LstmV => "lstm-v",
        }
    }

    pub fn is_temporal(self) -> bool {
        matches!(self, Scheme::LstmR | Scheme::LstmD | Scheme::LstmV)
    }

    fn trains_on_ramp(self) -> bool {
        matches!(self, Scheme::LdaR | Scheme::LstmR)
    }

    fn tag(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?} (expected lda-r, lstm-r, lda-d, lstm-d or lstm-v)")))
    }
}

pub fn default_thresholds() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    /// Empty means every subject in the dataset.
    pub subjects: Vec<usize>,
    /// Frames of history per temporal decision (T).
    pub sequence_length: usize,
    /// Spacing between the decision frames of consecutive training windows.
    pub train_stride: usize,
    pub wamp_scale: f64,
    pub rejection_thresholds: Vec<f64>,
    /// Write test-trial embeddings of `lstm-v` folds.
    pub export_embeddings: bool,
    pub train: TrainConfig,
    pub model: ModelConfig,
    /// Only meaningful for `lstm-v`; defaults apply when absent.
    pub vicreg: Option<VicregConfig>,
    pub augment: AugmentConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            seed: 42,
            schemes: Scheme::ALL.to_vec(),
            subjects: Vec::new(),
            sequence_length: 32,
            train_stride: 1,
            wamp_scale: DEFAULT_WAMP_SCALE,
            rejection_thresholds: default_thresholds(),
            export_embeddings: false,
            train: TrainConfig::default(),
            model: ModelConfig::default(),
            vicreg: None,
            augment: AugmentConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // Relative paths are taken relative to the configuration file.
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.dataset, &mut cfg.output_dir] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("configuration is plain data")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::Config("no schemes selected".into()));
        }
        if self.vicreg.is_some() && !self.schemes.contains(&Scheme::LstmV) {
            return Err(Error::Config("[vicreg] applies only to lstm-v, which is not selected".into()));
        }
        if self.sequence_length == 0 || self.train_stride == 0 {
            return Err(Error::Config("sequence_length and train_stride must be >= 1".into()));
        }
        if self.wamp_scale.is_nan() || self.wamp_scale < 0.0 {
            return Err(Error::Config("wamp_scale must be >= 0".into()));
        }
        validate_thresholds(&self.rejection_thresholds)?;
        self.train.validate()?;
        self.model.validate()?;
        if self.model.num_classes != crate::NUM_CLASSES {
            return Err(Error::Config(format!("model.num_classes must be {}", crate::NUM_CLASSES)));
        }
        if self.model.input_dim != crate::features::NUM_FEATURES {
            return Err(Error::Config(format!("model.input_dim must be {}", crate::features::NUM_FEATURES)));
        }
        self.vicreg_config().validate()?;
        self.augment.validate()
    }

    pub fn vicreg_config(&self) -> VicregConfig {
        self.vicreg.unwrap_or_default()
    }

    /// `output_dir`, unless [`OUTPUT_ENV`] is set.
    pub fn output_root(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output_dir.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    /// 1-based.
    pub index: usize,
    pub train: Vec<TrialId>,
    pub validation: Vec<TrialId>,
    pub test: Vec<TrialId>,
}

/// Trial splits of `scheme` for one subject.
pub fn plan_folds(scheme: Scheme, ramp: &[TrialId], dynamic: &[TrialId], seed: u64, subject: usize) -> Result<Vec<FoldPlan>> {
    let need = |ids: &[TrialId], n: usize, what: &str| {
        if ids.len() < n {
            Err(Error::InvalidInput(format!("subject {subject} has {} {what} trials, need {n}", ids.len())))
        } else {
            Ok(())
        }
    };
    need(dynamic, if scheme.trains_on_ramp() { 1 } else { 3 }, "dynamic")?;
    match scheme {
        Scheme::LdaR => {
            need(ramp, 1, "ramp")?;
            Ok(vec![FoldPlan {
                index: 1,
                train: ramp.to_vec(),
                validation: vec![],
                test: dynamic.to_vec(),
            }])
        }
        Scheme::LstmR => {
            need(ramp, 2, "ramp")?;
            let v = rng::stream(seed, &[scheme.tag(), subject as u64, 0]).random_range(0..ramp.len());
            let train = ramp.iter().enumerate().filter(|(i, _)| *i != v).map(|(_, t)| *t).collect();
            Ok(vec![FoldPlan {
                index: 1,
                train,
                validation: vec![ramp[v]],
                test: dynamic.to_vec(),
            }])
        }
        Scheme::LdaD | Scheme::LstmD | Scheme::LstmV => Ok(dynamic
            .iter()
            .enumerate()
            .map(|(k, test)| {
                let mut rest: Vec<TrialId> = dynamic.iter().filter(|t| *t != test).copied().collect();
                let validation = if scheme == Scheme::LdaD { vec![] } else { vec![rest.remove(0)] };
                FoldPlan {
                    index: k + 1,
                    train: rest,
                    validation,
                    test: vec![*test],
                }
            })
            .collect()),
    }
}

/// Derived seed for one fold and purpose.
fn fold_seed(cfg: &ExperimentConfig, scheme: Scheme, subject: usize, fold: usize, purpose: u64) -> u64 {
    rng::derive_seed(cfg.seed, &[scheme.tag(), subject as u64, fold as u64, purpose])
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub rows: Vec<ResultRow>,
    pub checkpoint: Checkpoint,
    /// Test-trial embeddings of every frame with their labels and regions.
    pub embeddings: Option<(Matrix, Vec<Class>, Vec<Region>)>,
}

struct FoldData<'a> {
    train: Vec<(TrialId, &'a PreparedTrial, Vec<FeatureFrame>)>,
    validation: Vec<(TrialId, &'a PreparedTrial, Vec<FeatureFrame>)>,
}

impl FoldData<'_> {
    fn sequences(set: &[(TrialId, &PreparedTrial, Vec<FeatureFrame>)], steps: usize, stride: usize) -> SequenceSet {
        let labels: Vec<Vec<usize>> = set.iter().map(|(_, t, _)| t.label_indices()).collect();
        let pairs: Vec<(&[FeatureFrame], &[usize])> = set.iter().zip(&labels).map(|((_, _, f), l)| (f.as_slice(), l.as_slice())).collect();
        SequenceSet::new(&pairs, steps, stride)
    }
}

fn per_dim_std(z: &Matrix) -> Vec<f64> {
    let n = z.rows() as f64;
    (0..z.cols())
        .map(|j| {
            let m = (0..z.rows()).map(|r| z[(r, j)]).sum::<f64>() / n;
            ((0..z.rows()).map(|r| (z[(r, j)] - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
        })
        .collect()
}

pub fn run_fold(cfg: &ExperimentConfig, data: &SubjectData, scheme: Scheme, plan: &FoldPlan) -> Result<FoldOutcome> {
    let subject = data.subject;
    let train_trials: Vec<&PreparedTrial> = plan.train.iter().map(|id| data.get(*id)).collect::<Result<_>>()?;
    let pipeline = FeaturePipeline::fit(&train_trials, cfg.wamp_scale)?;
    let transform = |ids: &[TrialId]| -> Result<Vec<(TrialId, &PreparedTrial, Vec<FeatureFrame>)>> {
        ids.iter()
            .map(|id| {
                let t = data.get(*id)?;
                Ok((*id, t, pipeline.transform(t)?))
            })
            .collect()
    };
    let fold = FoldData {
        train: transform(&plan.train)?,
        validation: transform(&plan.validation)?,
    };

    let mut audit = Vec::new();
    let mut record = |object: &str, fitted_on: Vec<TrialId>| {
        audit.push(AuditEntry {
            scheme,
            subject,
            fold: plan.index,
            object: object.into(),
            fitted_on,
            test_trials: plan.test.clone(),
        })
    };
    let train_and_val: Vec<TrialId> = plan.train.iter().chain(&plan.validation).copied().collect();
    record("wamp_thresholds", plan.train.clone());
    record("standardizer", plan.train.clone());
    if scheme.trains_on_ramp() {
        record("rest_thresholds", train_and_val.clone());
    }

    let steps = cfg.sequence_length;
    let seed = |purpose| fold_seed(cfg, scheme, subject, plan.index, purpose);
    let mut histories = Vec::new();
    let mut embedding_std = None;

    let (model, stored) = match scheme {
        Scheme::LdaR | Scheme::LdaD => {
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for (_, t, f) in &fold.train {
                rows.extend(f.iter().map(|x| x.0.to_vec()));
                labels.extend(t.label_indices());
            }
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let lda = LdaModel::fit(&refs, &labels, crate::NUM_CLASSES)?;
            record("lda", plan.train.clone());
            let stored = StoredModel::Lda { lda: lda.to_value() };
            (LoadedModel::Lda(lda), stored)
        }
        Scheme::LstmR | Scheme::LstmD => {
            let train_set = FoldData::sequences(&fold.train, steps, cfg.train_stride);
            let val_set = FoldData::sequences(&fold.validation, steps, cfg.train_stride);
            let init = Model::new(&cfg.model, &mut rng::stream(seed(0), &[]));
            let mut obj = Supervised {
                train: &train_set,
                validation: &val_set,
            };
            let (model, history) = train(init, &mut obj, &cfg.train, cfg.train.lr_end_to_end, seed(1))?;
            histories.push(NamedHistory {
                stage: "supervised".into(),
                history,
            });
            record("model", train_and_val.clone());
            let stored = lstm_model(&model, &cfg.model);
            (LoadedModel::Lstm(model), stored)
        }
        Scheme::LstmV => {
            let train_set = FoldData::sequences(&fold.train, steps, cfg.train_stride);
            let val_set = FoldData::sequences(&fold.validation, steps, cfg.train_stride);
            let init = Backbone::new(&cfg.model, &mut rng::stream(seed(0), &[]));
            let mut obj = VicregObjective::new(
                &train_set,
                &val_set,
                cfg.vicreg_config(),
                cfg.augment.clone(),
                cfg.train.batch_size,
                seed(2),
            );
            let (backbone, history) = train(init, &mut obj, &cfg.train, cfg.train.lr_backbone, seed(3))?;
            histories.push(NamedHistory {
                stage: "vicreg".into(),
                history,
            });
            record("backbone", train_and_val.clone());
            let z_train = embed_all(&backbone, &train_set)?;
            let z_val = embed_all(&backbone, &val_set)?;
            embedding_std = Some(per_dim_std(&z_val));
            let head = Head::new(cfg.model.embedding_dim, cfg.model.num_classes, &mut rng::stream(seed(4), &[]));
            let mut head_obj = HeadOnly {
                train: (&z_train, train_set.labels()),
                validation: (&z_val, val_set.labels()),
            };
            let (head, history) = train(head, &mut head_obj, &cfg.train, cfg.train.lr_head, seed(5))?;
            histories.push(NamedHistory {
                stage: "head".into(),
                history,
            });
            record("head", train_and_val.clone());
            let model = Model { backbone, head };
            let stored = lstm_model(&model, &cfg.model);
            (LoadedModel::Lstm(model), stored)
        }
    };

    let mut rows = Vec::new();
    let mut embeddings = None;
    for &id in &plan.test {
        let t = data.get(id)?;
        let frames = pipeline.transform(t)?;
        let stream = classify(&model, steps, &frames, &t.labels.regions)?;
        let sweep = rejection_sweep(&stream, &cfg.rejection_thresholds)?;
        rows.extend(rows_for(subject, &id.stem(), scheme, &sweep));
        if scheme == Scheme::LstmV && cfg.export_embeddings && embeddings.is_none() {
            if let LoadedModel::Lstm(m) = &model {
                let labels = t.label_indices();
                let set = SequenceSet::new(&[(&frames, &labels)], steps, 1);
                embeddings = Some((embed_all(&m.backbone, &set)?, t.labels.labels.clone(), t.labels.regions.clone()));
            }
        }
    }

    let checkpoint = Checkpoint {
        format: checkpoint::FORMAT.into(),
        version: checkpoint::VERSION,
        scheme,
        subject,
        fold: plan.index,
        dataset: cfg.dataset.clone(),
        seed: cfg.seed,
        train_trials: plan.train.clone(),
        validation_trials: plan.validation.clone(),
        test_trials: plan.test.clone(),
        sequence_length: steps,
        pipeline,
        model: stored,
        train_config: scheme.is_temporal().then(|| cfg.train.clone()),
        vicreg: (scheme == Scheme::LstmV).then(|| cfg.vicreg_config()),
        augment: (scheme == Scheme::LstmV).then(|| cfg.augment.clone()),
        histories,
        validation_embedding_std: embedding_std,
        audit,
    };
    Ok(FoldOutcome {
        rows,
        checkpoint,
        embeddings,
    })
}

fn classify(model: &LoadedModel, steps: usize, frames: &[FeatureFrame], truth: &[Region]) -> Result<DecisionStream> {
    match model {
        LoadedModel::Lda(m) => classify_stream(m, frames, truth),
        LoadedModel::Lstm(m) => classify_stream(&Temporal { model: m, steps }, frames, truth),
    }
}

#[derive(Debug, Clone)]
pub struct FoldSummary {
    pub subject: usize,
    pub fold: usize,
    pub seconds: f64,
    pub epochs: Vec<(String, usize)>,
    pub validation_embedding_std: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub scheme: Scheme,
    pub rows: Vec<ResultRow>,
    pub audit: AuditLog,
    pub folds: Vec<FoldSummary>,
    pub results_path: PathBuf,
    pub seconds: f64,
}

pub fn checkpoint_path(out: &Path, scheme: Scheme, subject: usize, fold: usize) -> PathBuf {
    out.join("checkpoints")
        .join(scheme.name())
        .join(format!("subject_{subject}_fold_{fold}.json"))
}

fn write_embeddings(path: &Path, z: &Matrix, labels: &[Class], regions: &[Region]) -> Result<()> {
    write_atomic(path, |tmp| {
        let mut w = csv::Writer::from_path(tmp)?;
        let mut header = vec!["frame".to_string(), "label".to_string(), "region_kind".to_string()];
        header.extend((0..z.cols()).map(|j| format!("z{j}")));
        w.write_record(&header)?;
        for r in 0..z.rows() {
            let mut rec = vec![
                r.to_string(),
                labels[r].index().to_string(),
                if regions[r].is_steady() { "steady" } else { "transition" }.to_string(),
            ];
            rec.extend(z.row(r).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    })
}

/// Runs `scheme` over the given subjects (optionally one fold), writing
/// checkpoints and a results table under the output root.
pub fn run_scheme(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    subjects: &[SubjectData],
    only_fold: Option<usize>,
    progress: &mut dyn FnMut(&str),
) -> Result<SchemeOutcome> {
    let started = Instant::now();
    let out = cfg.output_root();
    let mut rows = Vec::new();
    let mut audit = AuditLog::default();
    let mut folds = Vec::new();
    for data in subjects {
        let plans = plan_folds(
            scheme,
            &data.ids(TrialKind::Ramp),
            &data.ids(TrialKind::Dynamic),
            cfg.seed,
            data.subject,
        )?;
        if let Some(k) = only_fold {
            if !plans.iter().any(|p| p.index == k) {
                return Err(Error::Config(format!("{scheme} has {} fold(s); --fold {k} is out of range", plans.len())));
            }
        }
        for plan in plans.iter().filter(|p| only_fold.is_none_or(|k| k == p.index)) {
            let t0 = Instant::now();
            let outcome = run_fold(cfg, data, scheme, plan)?;
            let seconds = t0.elapsed().as_secs_f64();
            outcome
                .checkpoint
                .save(&checkpoint_path(&out, scheme, data.subject, plan.index))?;
            if let Some((z, l, r)) = &outcome.embeddings {
                let p = out
                    .join("embeddings")
                    .join(format!("{}_subject_{}_fold_{}.csv", scheme, data.subject, plan.index));
                write_embeddings(&p, z, l, r)?;
            }
            let epochs = outcome
                .checkpoint
                .histories
                .iter()
                .map(|h| (h.stage.clone(), h.history.epochs.len()))
                .collect::<Vec<_>>();
            progress(&format!(
                "{scheme} subject {} fold {}: {:.1}s {}",
                data.subject,
                plan.index,
                seconds,
                epochs.iter().map(|(s, e)| format!("{s}={e} epochs")).collect::<Vec<_>>().join(" ")
            ));
            folds.push(FoldSummary {
                subject: data.subject,
                fold: plan.index,
                seconds,
                epochs,
                validation_embedding_std: outcome.checkpoint.validation_embedding_std.clone(),
            });
            audit.entries.extend(outcome.checkpoint.audit);
            rows.extend(outcome.rows);
        }
    }
    let name = match only_fold {
        None if subjects.len() == 1 && !cfg.subjects.is_empty() => format!("{scheme}_subject_{}.csv", subjects[0].subject),
        None => format!("{scheme}.csv"),
        Some(k) => format!("{scheme}_subject_{}_fold_{k}.csv", subjects.first().map_or(0, |s| s.subject)),
    };
    let results_path = out.join("results").join(name);
    write_results(&results_path, &rows)?;
    Ok(SchemeOutcome {
        scheme,
        rows,
        audit,
        folds,
        results_path,
        seconds: started.elapsed().as_secs_f64(),
    })
}

pub fn load_subjects(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<Vec<SubjectData>> {
    let available = dataset.subjects();
    let wanted = if cfg.subjects.is_empty() { available.clone() } else { cfg.subjects.clone() };
    wanted
        .into_iter()
        .map(|s| {
            if !available.contains(&s) {
                return Err(Error::data(dataset.root(), format!("subject {s} not in dataset")));
            }
            SubjectData::load(dataset, s)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub schemes: Vec<SchemeOutcome>,
    pub audit: AuditLog,
    pub report: Report,
    pub seconds: f64,
}

impl ExperimentOutcome {
    pub fn scheme(&self, s: Scheme) -> Option<&SchemeOutcome> {
        self.schemes.iter().find(|o| o.scheme == s)
    }
}

/// Every selected scheme over every selected subject, then the audit check
/// and the summary report.
pub fn run_experiment(cfg: &ExperimentConfig, progress: &mut dyn FnMut(&str)) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let dataset = Dataset::open(&cfg.dataset)?;
    let subjects = load_subjects(cfg, &dataset)?;
    progress(&format!("prepared {} subject(s) in {:.1}s", subjects.len(), started.elapsed().as_secs_f64()));
    let mut schemes = Vec::new();
    let mut audit = AuditLog::default();
    for &scheme in &cfg.schemes {
        let o = run_scheme(cfg, scheme, &subjects, None, progress)?;
        audit.extend(o.audit.clone());
        schemes.push(o);
    }
    let out = cfg.output_root();
    write_atomic(&out.join("audit.json"), |tmp| {
        serde_json::to_writer_pretty(std::fs::File::create(tmp)?, &audit)?;
        Ok(())
    })?;
    audit.check_leakage()?;
    let report = results::emit_report(&out.join("results"))?;
    Ok(ExperimentOutcome {
        schemes,
        audit,
        report,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Re-scores a checkpoint's test trials at the given thresholds.
pub fn evaluate_checkpoint(path: &Path, thresholds: &[f64], dataset_override: Option<&Path>) -> Result<Vec<ResultRow>> {
    validate_thresholds(thresholds)?;
    let ckpt = Checkpoint::load(path)?;
    let dataset = Dataset::open(dataset_override.unwrap_or(&ckpt.dataset))?;
    let model = ckpt.model()?;
    let mut rows = Vec::new();
    for &id in &ckpt.test_trials {
        let t = prep::prepare_trial(&dataset.load(id)?)?;
        let frames = ckpt.pipeline.transform(&t)?;
        let stream = classify(&model, ckpt.sequence_length, &frames, &t.labels.regions)?;
        rows.extend(rows_for(ckpt.subject, &id.stem(), ckpt.scheme, &rejection_sweep(&stream, thresholds)?));
    }
    Ok(rows)
}

/// Writes per-trial feature caches (`<stem>.features.csv`) and label files
/// (`<stem>.labels.csv`) for every trial. WAMP thresholds come from each
/// subject's ramp trials; experiment folds refit them on their own
/// training trials.
pub fn write_feature_caches(dataset: &Dataset, out: &Path, wamp_scale: f64) -> Result<usize> {
    let mut written = 0;
    for subject in dataset.subjects() {
        let data = SubjectData::load(dataset, subject)?;
        let ramp: Vec<&PreparedTrial> = data.ids(TrialKind::Ramp).into_iter().map(|id| data.get(id)).collect::<Result<_>>()?;
        let wamp = if ramp.is_empty() {
            WampThresholds::fit(data.trials.values().map(|t| &t.filtered), wamp_scale)?
        } else {
            WampThresholds::fit(ramp.iter().map(|t| &t.filtered), wamp_scale)?
        };
        let dir = out.join(format!("subject_{subject}"));
        std::fs::create_dir_all(&dir)?;
        for (id, t) in &data.trials {
            let feats = t.features(&wamp)?;
            write_feature_cache(&dir.join(format!("{}.features.csv", id.stem())), &t.labels.frame_starts, &feats)?;
            write_labels(&dir.join(format!("{}.labels.csv", id.stem())), &t.labels)?;
            written += 1;
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(kind: TrialKind, n: usize) -> Vec<TrialId> {
        (1..=n).map(|k| TrialId { subject: 1, kind, index: k }).collect()
    }

    #[test]
    fn fold_counts_and_disjointness() {
        let ramp = ids(TrialKind::Ramp, 5);
        let dynamic = ids(TrialKind::Dynamic, 6);
        for scheme in Scheme::ALL {
            let plans = plan_folds(scheme, &ramp, &dynamic, 42, 1).unwrap();
            let expect = if scheme.trains_on_ramp() { 1 } else { 6 };
            assert_eq!(plans.len(), expect, "{scheme}");
            for p in &plans {
                for t in &p.test {
                    assert!(!p.train.contains(t) && !p.validation.contains(t));
                }
                let n_train = match scheme {
                    Scheme::LdaR | Scheme::LdaD => 5,
                    _ => 4,
                };
                assert_eq!(p.train.len(), n_train, "{scheme}");
            }
        }
        let d = plan_folds(Scheme::LstmD, &ramp, &dynamic, 42, 1).unwrap();
        let v = plan_folds(Scheme::LstmV, &ramp, &dynamic, 42, 1).unwrap();
        assert_eq!(d, v);
        assert_eq!(d[0].validation, vec![dynamic[1]]);
        assert_eq!(d[3].validation, vec![dynamic[0]]);
    }

    #[test]
    fn config_round_trips_and_validates() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
        let bad = "schemes = [\"lda-d\"]\n[vicreg]\nlambda = 8.0\n";
        assert!(matches!(ExperimentConfig::from_toml_str(bad), Err(Error::Config(_))));
        assert!(ExperimentConfig::from_toml_str("schemes = [\"lstm-q\"]").is_err());
        assert!(ExperimentConfig::from_toml_str("rejection_thresholds = [0.5, 0.1]").is_err());
        let ok = ExperimentConfig::from_toml_str("seed = 7\nschemes = [\"lstm-v\"]\n[vicreg]\nmu = 16.0\n").unwrap();
        assert_eq!(ok.vicreg_config().mu, 16.0);
        assert_eq!(ok.vicreg_config().lambda, 8.0);
    }

    #[test]
    fn scheme_names() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
    }
}
