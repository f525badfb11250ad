use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use textspike::corpus::{build_tfidf, Corpus, Document, Split};

fn corpus_from(train: &[Vec<String>], test: &[Vec<String>]) -> Corpus {
    let doc = |split: Split, i: usize, tokens: &Vec<String>| Document {
        id: format!("{split:?}/{i}"),
        label: i % 2,
        split,
        tokens: tokens.clone(),
    };
    let documents = train
        .iter()
        .enumerate()
        .map(|(i, t)| doc(Split::Train, i, t))
        .chain(test.iter().enumerate().map(|(i, t)| doc(Split::Test, i, t)))
        .collect();
    Corpus {
        labels: vec!["a".into(), "b".into()],
        documents,
        dropped_empty: 0,
        unreadable: 0,
    }
}

/// Straightforward map-based TF-IDF over the train dictionary.
fn oracle(train: &[Vec<String>], doc: &[String]) -> BTreeMap<String, f64> {
    let n = train.len() as f64;
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for d in train {
        for t in d.iter().map(String::as_str).collect::<BTreeSet<_>>() {
            *df.entry(t).or_default() += 1;
        }
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in doc {
        *counts.entry(t).or_default() += 1;
    }
    counts
        .into_iter()
        .filter_map(|(t, c)| {
            let df = *df.get(t)?;
            let w = c as f64 / doc.len() as f64 * (n / df as f64).ln();
            (w != 0.0).then(|| (t.to_string(), w))
        })
        .collect()
}

fn docs(max_docs: usize) -> impl Strategy<Value = Vec<Vec<String>>> {
    let word = prop::sample::select(vec!["alpha", "beta", "gamma", "delta", "omega", "sigma", "kappa", "theta"])
        .prop_map(String::from);
    prop::collection::vec(prop::collection::vec(word, 1..25), 1..max_docs)
}

proptest! {
    #[test]
    fn weights_match_oracle(train in docs(12), test in docs(6)) {
        let prepared = build_tfidf(&corpus_from(&train, &test)).unwrap();
        for (matrix, split) in [(&prepared.train, &train), (&prepared.test, &test)] {
            prop_assert_eq!(matrix.n_rows(), split.len());
            for (i, d) in split.iter().enumerate() {
                let expected = oracle(&train, d);
                let row = matrix.row(i);
                let got: BTreeMap<String, f64> = row
                    .iter()
                    .map(|(j, w)| (prepared.dictionary.term(j).to_string(), w))
                    .collect();
                prop_assert_eq!(got.keys().collect::<Vec<_>>(), expected.keys().collect::<Vec<_>>());
                for (t, w) in &expected {
                    prop_assert!((got[t] - w).abs() <= 1e-12 * w.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn rows_are_no_denser_than_their_vocabulary(train in docs(12), test in docs(6)) {
        let prepared = build_tfidf(&corpus_from(&train, &test)).unwrap();
        for (matrix, split) in [(&prepared.train, &train), (&prepared.test, &test)] {
            for (i, d) in split.iter().enumerate() {
                let unique = d.iter().collect::<BTreeSet<_>>().len();
                prop_assert!(matrix.row(i).nnz() <= unique);
            }
        }
    }

    #[test]
    fn weight_falls_as_document_frequency_rises(train in docs(12)) {
        let prepared = build_tfidf(&corpus_from(&train, &[])).unwrap();
        let dict = &prepared.dictionary;
        for a in 0..dict.len() as u32 {
            for b in 0..dict.len() as u32 {
                if dict.document_frequency(a) < dict.document_frequency(b) {
                    prop_assert!(dict.idf(a) > dict.idf(b));
                }
            }
        }
    }

    #[test]
    fn rebuild_is_bit_identical(train in docs(12), test in docs(6)) {
        let corpus = corpus_from(&train, &test);
        let a = build_tfidf(&corpus).unwrap();
        let b = build_tfidf(&corpus).unwrap();
        prop_assert_eq!(a.dictionary.terms(), b.dictionary.terms());
        for (x, y) in [(&a.train, &b.train), (&a.test, &b.test)] {
            for i in 0..x.n_rows() {
                prop_assert_eq!(x.row(i).indices, y.row(i).indices);
                let bits = |r: &[f64]| r.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
                prop_assert_eq!(bits(x.row(i).values), bits(y.row(i).values));
            }
        }
    }
}

#[test]
fn unseen_test_tokens_dilute_term_frequency() {
    let train = vec![vec!["alpha".to_string(), "beta".into()], vec!["beta".into()]];
    let test = vec![vec!["alpha".to_string(), "zzz".into(), "yyy".into(), "xxx".into()]];
    let prepared = build_tfidf(&corpus_from(&train, &test)).unwrap();
    let row = prepared.test.row(0);
    assert_eq!(row.nnz(), 1);
    assert!((row.values[0] - 0.25 * 2f64.ln()).abs() < 1e-15);
}
