use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use textspike::bank::{load_bank, MANIFEST_FILE};
use textspike::corpus::PreparedCorpus;
use textspike::eval::FeatureMatrix;

fn textspike(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_textspike"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run textspike")
}

fn ok(args: &[&str]) -> String {
    let out = textspike(args);
    assert!(
        out.status.success(),
        "textspike {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small synthetic corpus plus a config file describing a toy run:
/// 40 training documents split into two subsets, 10 neurons each.
struct Toy {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

impl Toy {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        ok(&[
            "synth",
            "--out",
            s(&root.join("corpus")),
            "--train-per-class",
            "10",
            "--test-per-class",
            "5",
        ]);
        let config = root.join("toy.toml");
        let text = format!(
            r#"theta = 0.5
parallelism = 1

[paths]
corpus = "{corpus}"
prepared = "{root}/prepared"
bank = "{root}/bank"
results = "{root}/results"

[plan]
subset_size = 25
overlap = 5

[encoder]
neurons = 10
epochs = 1
"#,
            corpus = s(&root.join("corpus")),
            root = s(&root),
        );
        fs::write(&config, text).unwrap();
        Toy { _dir: dir, root, config }
    }

    fn run(&self, args: &[&str]) -> String {
        let mut all = vec!["--config", s(&self.config)];
        all.extend_from_slice(args);
        ok(&all)
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

#[test]
fn missing_corpus_is_an_input_error() {
    let out = textspike(&["prepare", "--corpus", "/definitely/not/here", "--prepared", "/tmp/unused-prepared"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/definitely/not/here"), "{err}");
}

#[test]
fn bad_overrides_are_input_errors() {
    for set in ["encoder.neuronz=3", "theta=1.5", "nonsense"] {
        let out = textspike(&["--set", set, "config"]);
        assert_eq!(out.status.code(), Some(2), "--set {set}");
    }
    assert_eq!(textspike(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let first = ok(&["--set", "encoder.neurons=30", "--set", "sweep.thetas=[0.5, 0.9]", "config"]);
    let path = dir.path().join("c.toml");
    fs::write(&path, &first).unwrap();
    let second = ok(&["--config", s(&path), "config"]);
    assert_eq!(first, second);
    assert!(first.contains("neurons = 30"));
}

#[test]
fn prepare_reports_counts_and_round_trips() {
    let toy = Toy::new();
    let stdout = toy.run(&["prepare"]);
    assert!(stdout.contains("60 documents, 4 classes"), "{stdout}");

    let dir = toy.path("prepared");
    let loaded = PreparedCorpus::load(&dir).unwrap();
    assert_eq!(loaded.train.n_rows(), 40);
    assert_eq!(loaded.test.n_rows(), 20);
    let again = toy.path("prepared_again");
    loaded.save(&again).unwrap();
    for f in [
        PreparedCorpus::DICTIONARY_FILE,
        PreparedCorpus::TRAIN_FILE,
        PreparedCorpus::TEST_FILE,
        PreparedCorpus::TERMS_FILE,
    ] {
        assert_eq!(fs::read(dir.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
    assert!(dir.join("run.json").exists());
}

#[test]
fn toy_pipeline_end_to_end() {
    let toy = Toy::new();
    toy.run(&["prepare"]);
    toy.run(&["train"]);

    let bank = toy.path("bank");
    let mut models: Vec<String> = fs::read_dir(&bank)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".setm"))
        .collect();
    models.sort();
    assert_eq!(models, ["encoder_00.setm", "encoder_01.setm"]);
    let (manifest, loaded) = load_bank(&bank).unwrap();
    assert_eq!(manifest.members.len(), 2);
    assert_eq!(manifest.theta, Some(0.5));
    assert!(loaded.iter().all(|m| m.neuron_count() == 10 && m.prune_mask.is_some()));

    // Same config, same seeds: identical model files.
    let bank2 = toy.path("bank2");
    toy.run(&["--bank", s(&bank2), "train"]);
    for f in [models[0].as_str(), models[1].as_str(), MANIFEST_FILE] {
        assert_eq!(fs::read(bank.join(f)).unwrap(), fs::read(bank2.join(f)).unwrap(), "{f}");
    }

    let stdout = toy.run(&["eval"]);
    assert!(stdout.contains("accuracy"), "{stdout}");
    let csv = fs::read_to_string(toy.path("results/eval.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("setting,accuracy_percent,n_train,n_test,seed"));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(toy.path("results/eval.json")).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap();
    assert!(lines[1].ends_with(hash));
    assert_eq!(manifest["config"]["encoder"]["neurons"], 10);

    toy.run(&["encode", "--parallelism", "2"]);
    let train = FeatureMatrix::load(&toy.path("results/features_train.setc")).unwrap();
    let test = FeatureMatrix::load(&toy.path("results/features_test.setc")).unwrap();
    assert_eq!((train.n_rows, train.n_cols), (40, 20));
    assert_eq!((test.n_rows, test.n_cols), (20, 20));
    let first = fs::read(toy.path("results/features_test.setc")).unwrap();
    toy.run(&["encode", "--split", "test"]);
    assert_eq!(first, fs::read(toy.path("results/features_test.setc")).unwrap());

    toy.run(&["sweep", "--axis", "inhibition", "--levels", "0,0.5,1.0,1.5,2.0"]);
    let csv = fs::read_to_string(toy.path("results/sweep_inhibition.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.lines().nth(5).unwrap().starts_with("inhibition=2,"));

    let model = bank.join("encoder_00.setm");
    let export = toy.path("weights.csv");
    let stdout = toy.run(&[
        "inspect",
        "--model",
        s(&model),
        "--neuron",
        "3",
        "--top-k",
        "5",
        "--export",
        s(&export),
    ]);
    let ranked: Vec<f64> = stdout
        .lines()
        .filter(|l| l.trim_start().starts_with(char::is_numeric))
        .map(|l| l.split_whitespace().last().unwrap().parse().unwrap())
        .collect();
    assert_eq!(ranked.len(), 5);
    assert!(ranked.windows(2).all(|w| w[0] >= w[1]));
    let weights = fs::read_to_string(&export).unwrap();
    let model = textspike::bank::EncoderModel::load(&model).unwrap();
    assert_eq!(weights.lines().count(), 1 + model.prune_mask.unwrap().kept_count(3));

    let out = textspike(&["--config", s(&toy.config), "inspect", "--model", s(&bank.join("encoder_00.setm")), "--neuron", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn size_pruning_sweep_grid() {
    let toy = Toy::new();
    toy.run(&["prepare"]);
    toy.run(&["sweep", "--axis", "size-pruning", "--sizes", "3,5", "--thetas", "0,0.5,0.9"]);
    let csv = fs::read_to_string(toy.path("results/sweep_size_pruning.csv")).unwrap();
    let settings: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(
        settings,
        [
            "neurons=6;theta=0",
            "neurons=6;theta=0.5",
            "neurons=6;theta=0.9",
            "neurons=10;theta=0",
            "neurons=10;theta=0.5",
            "neurons=10;theta=0.9"
        ]
    );
}

#[test]
fn commands_need_their_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let prepared = dir.path().join("nothing");
    for cmd in ["train", "eval"] {
        let out = textspike(&["--prepared", s(&prepared), "--bank", s(&prepared), cmd]);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
    }
}
