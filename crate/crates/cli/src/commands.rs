use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use log::info;
use serde::Serialize;

use textspike::bank::{load_bank, plan_subsets, save_bank, train_bank, EncoderModel, SubsetPlan};
use textspike::corpus::{build_tfidf, load_corpus, Dictionary, PreparedCorpus};
use textspike::eval::{encode_documents, evaluate_bank, EvalPipeline, SweepAxis, SweepResult};
use textspike::plasticity::PruneConfig;
use textspike::synthetic::{write_bydate, SyntheticCorpusSpec};

use crate::config::RunConfig;

pub const RUN_MANIFEST: &str = "run.json";

#[derive(Serialize)]
struct RunManifest<'a, T: Serialize> {
    command: &'a str,
    config_hash: String,
    config: &'a RunConfig,
    outputs: Vec<String>,
    summary: T,
}

fn write_manifest<T: Serialize>(dir: &Path, file: &str, command: &str, config: &RunConfig, outputs: Vec<String>, summary: T) -> Result<()> {
    let manifest = RunManifest {
        command,
        config_hash: config.hash(),
        config,
        outputs,
        summary,
    };
    let path = dir.join(file);
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn pipeline(config: &RunConfig) -> EvalPipeline {
    let mut p = config.eval;
    p.encode.parallelism = config.parallelism.max(1);
    p
}

fn plan(config: &RunConfig, train_size: usize) -> Result<SubsetPlan> {
    Ok(plan_subsets(
        train_size,
        config.plan.subset_size,
        config.plan.overlap,
        config.plan.shuffle_seed,
    )?)
}

fn load_prepared(config: &RunConfig) -> Result<PreparedCorpus> {
    let prepared = PreparedCorpus::load(&config.paths.prepared)?;
    info!(
        "prepared corpus: {} train and {} test documents, {} terms",
        prepared.train.n_rows(),
        prepared.test.n_rows(),
        prepared.dictionary.len()
    );
    Ok(prepared)
}

fn load_models(config: &RunConfig) -> Result<Vec<EncoderModel>> {
    let (manifest, models) = load_bank(&config.paths.bank)?;
    info!(
        "bank: {} encoders, {} neurons",
        models.len(),
        manifest.members.iter().map(|m| m.neurons).sum::<usize>()
    );
    Ok(models)
}

#[derive(Serialize)]
struct PrepareSummary {
    documents: usize,
    classes: usize,
    train_documents: usize,
    test_documents: usize,
    terms: usize,
    dropped_empty: usize,
    unreadable: usize,
}

pub fn prepare(config: &RunConfig) -> Result<()> {
    let sel = &config.corpus;
    let mut corpus = load_corpus(&config.paths.corpus, &sel.layout)?;
    if !sel.labels.is_empty() {
        corpus.restrict_labels(&sel.labels)?;
    }
    if sel.train_per_label.is_some() || sel.test_per_label.is_some() {
        corpus.limit_per_label(
            sel.train_per_label.unwrap_or(usize::MAX),
            sel.test_per_label.unwrap_or(usize::MAX),
        );
    }
    let prepared = build_tfidf(&corpus)?;
    let out = &config.paths.prepared;
    prepared.save(out)?;

    let summary = PrepareSummary {
        documents: corpus.documents.len(),
        classes: corpus.labels.len(),
        train_documents: prepared.train.n_rows(),
        test_documents: prepared.test.n_rows(),
        terms: prepared.dictionary.len(),
        dropped_empty: corpus.dropped_empty,
        unreadable: corpus.unreadable,
    };
    println!("{} documents, {} classes", summary.documents, summary.classes);
    println!(
        "train {}, test {}, dictionary {} terms",
        summary.train_documents, summary.test_documents, summary.terms
    );
    let outputs = [
        PreparedCorpus::DICTIONARY_FILE,
        PreparedCorpus::TRAIN_FILE,
        PreparedCorpus::TEST_FILE,
        PreparedCorpus::TERMS_FILE,
    ]
    .map(String::from)
    .to_vec();
    write_manifest(out, RUN_MANIFEST, "prepare", config, outputs, summary)
}

pub fn train(config: &RunConfig) -> Result<()> {
    let prepared = load_prepared(config)?;
    let plan = plan(config, prepared.train.n_rows())?;
    let prune = PruneConfig::new(config.theta)?;
    info!(
        "training {} encoders x {} neurons, {} epochs, {} threads",
        plan.len(),
        config.encoder.neurons,
        config.encoder.epochs,
        config.parallelism
    );
    let started = Instant::now();
    let bank = train_bank(&prepared.train, &plan, &config.encoder, config.parallelism)?;
    let bank: Vec<EncoderModel> = bank.iter().map(|m| m.pruned(prune)).collect();
    info!("training took {:.1?}", started.elapsed());

    let manifest = save_bank(&config.paths.bank, &bank, &plan, Some(config.hash()))?;
    println!(
        "{} encoders, {} neurons, theta {} -> {}",
        bank.len(),
        bank.iter().map(EncoderModel::neuron_count).sum::<usize>(),
        config.theta,
        manifest.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EncodeSummary {
    split: &'static str,
    rows: usize,
    cols: usize,
    file: String,
}

pub fn encode(config: &RunConfig, train: bool, test: bool) -> Result<()> {
    let prepared = load_prepared(config)?;
    let bank = load_models(config)?;
    let options = pipeline(config).encode;
    let out = &config.paths.results;
    create_dir(out)?;
    let mut summaries = Vec::new();
    for (split, wanted, docs) in [("train", train, &prepared.train), ("test", test, &prepared.test)] {
        if !wanted {
            continue;
        }
        let started = Instant::now();
        let features = encode_documents(&bank, docs, &options)?;
        let file = format!("features_{split}.setc");
        features.save(&out.join(&file))?;
        info!("encoded {split} split in {:.1?}", started.elapsed());
        println!("{split}: {} x {} -> {}", features.n_rows, features.n_cols, out.join(&file).display());
        summaries.push(EncodeSummary {
            split,
            rows: features.n_rows,
            cols: features.n_cols,
            file,
        });
    }
    let outputs = summaries.iter().map(|s| s.file.clone()).collect();
    write_manifest(out, "encode.json", "encode", config, outputs, summaries)
}

fn write_result(config: &RunConfig, command: &str, stem: &str, result: &SweepResult) -> Result<()> {
    let out = &config.paths.results;
    create_dir(out)?;
    let csv = format!("{stem}.csv");
    let path = out.join(&csv);
    let mut buf = Vec::new();
    result.write_csv(&mut buf, config.encoder.seed, &config.hash())?;
    fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
    write_manifest(out, &format!("{stem}.json"), command, config, vec![csv], result)?;
    for p in &result.points {
        println!("{}\t{:.2}%", p.setting(result.axis), p.accuracy_percent);
    }
    println!("results -> {}", path.display());
    Ok(())
}

pub fn eval(config: &RunConfig) -> Result<()> {
    let prepared = load_prepared(config)?;
    let bank = load_models(config)?;
    let started = Instant::now();
    let point = evaluate_bank(&bank, &prepared.train, &prepared.test, &pipeline(config))?;
    info!("evaluation took {:.1?}", started.elapsed());
    println!(
        "accuracy {:.2}% ({} neurons, {} train, {} test documents)",
        point.accuracy_percent, point.total_neurons, point.n_train, point.n_test
    );
    let result = SweepResult {
        axis: SweepAxis::Inhibition,
        points: vec![point],
    };
    write_result(config, "eval", "eval", &result)
}

pub fn sweep_inhibition(config: &RunConfig, levels: &[f64]) -> Result<()> {
    let prepared = load_prepared(config)?;
    let bank = load_models(config)?;
    let result = textspike::eval::sweep_inhibition(&bank, &prepared.train, &prepared.test, levels, &pipeline(config))?;
    write_result(config, "sweep", "sweep_inhibition", &result)
}

pub fn sweep_size_pruning(config: &RunConfig, sizes: &[usize], thetas: &[f64]) -> Result<()> {
    let prepared = load_prepared(config)?;
    let plan = plan(config, prepared.train.n_rows())?;
    let result = textspike::eval::sweep_size_pruning(
        &prepared.train,
        &prepared.test,
        &plan,
        &config.encoder,
        sizes,
        thetas,
        &pipeline(config),
        config.parallelism,
    )?;
    write_result(config, "sweep", "sweep_size_pruning", &result)
}

pub fn inspect(config: &RunConfig, model: &Path, neuron: usize, top_k: usize, export: Option<&Path>) -> Result<()> {
    let model = EncoderModel::load(model)?;
    let dictionary: Option<Dictionary> = match PreparedCorpus::load_dictionary(&config.paths.prepared) {
        Ok((_, d)) if d.len() == model.meta.dictionary_size => Some(d),
        Ok(_) => {
            log::warn!("prepared dictionary does not match the model; showing term ids");
            None
        }
        Err(e) => {
            log::warn!("no dictionary ({e}); showing term ids");
            None
        }
    };
    let term = |id: u32| dictionary.as_ref().map_or_else(|| format!("#{id}"), |d| d.term(id).to_string());

    let ranked = model.top_terms(neuron, usize::MAX)?;
    println!(
        "encoder {}, neuron {neuron} of {}, {} connections",
        model.meta.subset_id,
        model.neuron_count(),
        ranked.len()
    );
    for (rank, &(id, w)) in ranked.iter().take(top_k).enumerate() {
        println!("{:>3}  {:<24} {:.6}", rank + 1, term(id), w);
    }
    if let Some(path) = export {
        let mut out = Vec::new();
        writeln!(out, "rank,term_id,term,weight")?;
        for (rank, &(id, w)) in ranked.iter().enumerate() {
            writeln!(out, "{},{},{},{}", rank + 1, id, term(id), w)?;
        }
        fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
        println!("sorted weights -> {}", path.display());
    }
    Ok(())
}

pub fn synth(out: &Path, train_per_class: usize, test_per_class: usize, seed: u64) -> Result<()> {
    let spec = SyntheticCorpusSpec {
        train_per_class,
        test_per_class,
        seed,
        ..SyntheticCorpusSpec::default()
    };
    let n = write_bydate(out, &spec)?;
    println!("{n} documents, {} classes -> {}", spec.labels.len(), out.display());
    Ok(())
}
