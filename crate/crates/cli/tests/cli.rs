use std::path::Path;
use std::process::{Command, Output};

fn dynamyo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynamyo"))
        .args(args)
        .env_remove("DYNAMYO_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn synth(dir: &Path, subjects: &str) {
    let o = dynamyo(&["synth", "--subjects", subjects, "--seed", "7", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn write_config(path: &Path, dataset: &Path, out: &Path, schemes: &str) {
    let text = format!(
        "dataset = {:?}\noutput_dir = {:?}\nseed = 3\nschemes = [{schemes}]\nrejection_thresholds = [0.0, 0.5]\n",
        dataset, out
    );
    std::fs::write(path, text).unwrap();
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(code(&dynamyo(&[])), 1);
    assert_eq!(code(&dynamyo(&["frobnicate"])), 1);
    assert_eq!(code(&dynamyo(&["train", "--scheme", "lda-x", "--config", "c.toml"])), 1);
    assert_eq!(code(&dynamyo(&["train", "--config", "c.toml", "--fold", "1"])), 1);
    assert_eq!(code(&dynamyo(&["--help"])), 0);
}

#[test]
fn missing_dataset_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dynamyo(&["features", "--dataset", tmp.path().join("absent").to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_config_field_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "sequence_lenght = 4\n").unwrap();
    assert_eq!(code(&dynamyo(&["train", "--config", cfg.to_str().unwrap()])), 1);
}

#[test]
fn synth_features_train_eval_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    synth(&data, "1");

    let feats = tmp.path().join("features");
    let o = dynamyo(&["features", "--dataset", data.to_str().unwrap(), "--out", feats.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cached = std::fs::read_dir(feats.join("subject_1")).unwrap().count();
    assert_eq!(cached, 2 * (5 + 6), "feature and label file per trial");

    let cfg = tmp.path().join("exp.toml");
    write_config(&cfg, &data, &out, "\"lda-d\"");
    let o = dynamyo(&["train", "--config", cfg.to_str().unwrap(), "--scheme", "lda-d", "--subject", "1", "--fold", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let results = out.join("results").join("lda-d_subject_1_fold_2.csv");
    let table = std::fs::read_to_string(&results).unwrap();
    assert_eq!(table.lines().count(), 1 + 2 * 7, "one held-out trial, two thresholds, seven metrics");

    let ckpt = out.join("checkpoints").join("lda-d").join("subject_1_fold_2.json");
    let o = dynamyo(&["eval", "--checkpoint", ckpt.to_str().unwrap(), "--thresholds", "0,0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), table, "re-scoring the checkpoint reproduces the table");

    let o = dynamyo(&["eval", "--checkpoint", ckpt.to_str().unwrap(), "--thresholds", "1.5"]);
    assert_ne!(code(&o), 0);

    let o = dynamyo(&["report", "--results-dir", out.join("results").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("results").join("summary.csv").exists());
    assert!(out.join("results").join("rejection_curves.csv").exists());
}

#[test]
fn output_root_follows_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "1");
    let cfg = tmp.path().join("exp.toml");
    write_config(&cfg, &data, &tmp.path().join("ignored"), "\"lda-r\"");
    let redirected = tmp.path().join("redirected");
    let o = Command::new(env!("CARGO_BIN_EXE_dynamyo"))
        .args(["train", "--config", cfg.to_str().unwrap()])
        .env("DYNAMYO_OUT", &redirected)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(redirected.join("results").join("lda-r.csv").exists());
    assert!(redirected.join("audit.json").exists());
    assert!(!tmp.path().join("ignored").exists());
}

#[test]
fn empty_results_dir_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&dynamyo(&["report", "--results-dir", tmp.path().to_str().unwrap()])), 2);
}
