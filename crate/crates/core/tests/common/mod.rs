#![allow(dead_code)]

use std::path::Path;

use textspike::corpus::{build_tfidf, load_corpus, CorpusLayout, PreparedCorpus};
use textspike::synthetic::{write_bydate, SyntheticCorpusSpec};

/// Writes the synthetic corpus to `dir` and runs it through ingestion and
/// TF-IDF exactly like a real bydate tree.
pub fn prepare_synthetic(dir: &Path, spec: &SyntheticCorpusSpec) -> PreparedCorpus {
    write_bydate(dir, spec).expect("write synthetic corpus");
    let corpus = load_corpus(dir, &CorpusLayout::default()).expect("load synthetic corpus");
    build_tfidf(&corpus).expect("tf-idf")
}

pub fn small_spec(train_per_class: usize, test_per_class: usize) -> SyntheticCorpusSpec {
    SyntheticCorpusSpec {
        train_per_class,
        test_per_class,
        topic_vocab: 120,
        shared_vocab: 800,
        min_tokens: 30,
        max_tokens: 120,
        ..SyntheticCorpusSpec::default()
    }
}
