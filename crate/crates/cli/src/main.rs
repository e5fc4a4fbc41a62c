use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dynamyo_core::experiments::results::{emit_report, write_results, RESULTS_HEADER};
use dynamyo_core::experiments::{
    default_thresholds, evaluate_checkpoint, load_subjects, run_experiment, run_scheme, write_feature_caches,
    ExperimentConfig, Scheme,
};
use dynamyo_core::synthgen::dataset::{write_dataset, Dataset};
use dynamyo_core::synthgen::SynthConfig;
use dynamyo_core::Result;

/// Continuous-transition sEMG pattern recognition experiments.
#[derive(Debug, Parser)]
#[command(name = "dynamyo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset (ramp and dynamic trials per subject).
    Synth {
        #[arg(long, default_value_t = 3)]
        subjects: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        snr_db: f64,
    },
    /// Precompute per-trial feature and label caches.
    Features {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.02)]
        wamp_scale: f64,
    },
    /// Train and evaluate. Without --scheme, runs every scheme in the config
    /// and emits the summary report.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long, requires = "scheme")]
        subject: Option<usize>,
        #[arg(long, requires = "subject")]
        fold: Option<usize>,
    },
    /// Re-score a checkpoint's test trials over rejection thresholds.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated thresholds in [0, 1).
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
        /// Dataset root, if it moved since training.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Results CSV to write; prints to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize every results table in a directory.
    Report {
        #[arg(long)]
        results_dir: PathBuf,
    },
}

fn progress(msg: &str) {
    eprintln!("{msg}");
}

fn synth(subjects: usize, seed: u64, out: &Path, snr_db: f64) -> Result<()> {
    let cfg = SynthConfig {
        num_subjects: subjects,
        seed,
        snr_db,
        ..SynthConfig::default()
    };
    let manifest = write_dataset(out, &cfg)?;
    println!("wrote {} trials to {}", manifest.trials.len(), out.display());
    Ok(())
}

fn train(config: &Path, scheme: Option<Scheme>, subject: Option<usize>, fold: Option<usize>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    let Some(scheme) = scheme else {
        let o = run_experiment(&cfg, &mut progress)?;
        println!("{} result rows; summary at {}", o.schemes.iter().map(|s| s.rows.len()).sum::<usize>(), o.report.summary_path.display());
        return Ok(());
    };
    if let Some(s) = subject {
        cfg.subjects = vec![s];
    }
    cfg.schemes = vec![scheme];
    cfg.validate()?;
    let dataset = Dataset::open(&cfg.dataset)?;
    let subjects = load_subjects(&cfg, &dataset)?;
    let o = run_scheme(&cfg, scheme, &subjects, fold, &mut progress)?;
    o.audit.check_leakage()?;
    println!("{} result rows written to {}", o.rows.len(), o.results_path.display());
    Ok(())
}

fn eval(checkpoint: &Path, thresholds: Option<Vec<f64>>, dataset: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let thresholds = thresholds.unwrap_or_else(default_thresholds);
    let rows = evaluate_checkpoint(checkpoint, &thresholds, dataset)?;
    match out {
        Some(p) => {
            write_results(p, &rows)?;
            println!("{} result rows written to {}", rows.len(), p.display());
        }
        None => {
            println!("{}", RESULTS_HEADER.join(","));
            for r in &rows {
                println!(
                    "{},{},{},{},{},{},{}",
                    r.subject,
                    r.trial,
                    r.scheme,
                    r.rejection_threshold,
                    r.metric.name(),
                    r.value,
                    r.flag_count
                );
            }
        }
    }
    Ok(())
}

fn report(dir: &Path) -> Result<()> {
    let r = emit_report(dir)?;
    println!("scheme,metric,rejection_threshold,median,q1,q3");
    for s in &r.summary {
        println!("{},{},{},{:.4},{:.4},{:.4}", s.scheme, s.metric.name(), s.rejection_threshold, s.median, s.q1, s.q3);
    }
    eprintln!("wrote {} and {}", r.summary_path.display(), r.curves_path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { subjects, seed, out, snr_db } => synth(subjects, seed, &out, snr_db),
        Command::Features { dataset, out, wamp_scale } => {
            let n = write_feature_caches(&Dataset::open(&dataset)?, &out, wamp_scale)?;
            println!("wrote feature and label caches for {n} trials to {}", out.display());
            Ok(())
        }
        Command::Train { config, scheme, subject, fold } => train(&config, scheme, subject, fold),
        Command::Eval { checkpoint, thresholds, dataset, out } => eval(&checkpoint, thresholds, dataset.as_deref(), out.as_deref()),
        Command::Report { results_dir } => report(&results_dir),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

