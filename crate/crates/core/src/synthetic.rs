//! Seeded synthetic topic corpus in the 20news-bydate directory layout.
//!
//! Each class owns a private vocabulary of pseudo-words; documents mix
//! Zipf-distributed draws from their class vocabulary, a large shared
//! vocabulary, and a little noise from the other classes. Used for
//! fixtures, demos and desk-scale checks when the real corpus is absent.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{is_stop_word, Split, BYDATE_TEST_DIR, BYDATE_TRAIN_DIR};
use crate::error::{Error, Result};
use crate::spikegen::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticCorpusSpec {
    pub labels: Vec<String>,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub topic_vocab: usize,
    pub shared_vocab: usize,
    /// Probability that a token comes from the document's own topic.
    pub topic_share: f64,
    /// Probability that a token comes from another (random) topic.
    pub cross_topic_share: f64,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        SyntheticCorpusSpec {
            labels: ["comp.synth", "rec.synth", "sci.synth", "talk.synth"]
                .map(String::from)
                .to_vec(),
            train_per_class: 200,
            test_per_class: 100,
            topic_vocab: 400,
            shared_vocab: 4000,
            topic_share: 0.2,
            cross_topic_share: 0.05,
            min_tokens: 40,
            max_tokens: 300,
            zipf_exponent: 1.05,
            seed: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDocument {
    pub split: Split,
    pub label: usize,
    pub name: String,
    pub text: String,
}

const ONSETS: &[&str] = &[
    "b", "br", "c", "ch", "d", "dr", "f", "fl", "g", "gr", "h", "j", "k", "kl", "l", "m", "n", "p", "pl", "qu",
    "r", "s", "sh", "sk", "st", "t", "tr", "v", "w", "z",
];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ai", "ea", "io", "ou", "y"];

/// Injective map from an integer to a pronounceable lowercase word of at
/// least two syllables: `k + base` written in base `ONSETS x NUCLEI`.
fn pseudo_word(k: usize) -> String {
    let base = ONSETS.len() * NUCLEI.len();
    let mut m = k + base;
    let mut syllables = Vec::new();
    while m > 0 {
        let s = m % base;
        syllables.push(format!("{}{}", ONSETS[s / NUCLEI.len()], NUCLEI[s % NUCLEI.len()]));
        m /= base;
    }
    syllables.reverse();
    syllables.concat()
}

/// `count` distinct non-stop-word pseudo-words starting at code `start`.
fn vocabulary(start: usize, count: usize) -> Vec<String> {
    (start..)
        .map(pseudo_word)
        .filter(|w| !is_stop_word(w))
        .take(count)
        .collect()
}

struct Zipf {
    cdf: Vec<f64>,
}

impl Zipf {
    fn new(n: usize, s: f64) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = (1..=n)
            .map(|r| {
                acc += 1.0 / (r as f64).powf(s);
                acc
            })
            .collect();
        for c in &mut cdf {
            *c /= acc;
        }
        Zipf { cdf }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1)
    }
}

pub fn generate(spec: &SyntheticCorpusSpec) -> Result<Vec<SyntheticDocument>> {
    let k = spec.labels.len();
    if k == 0 || spec.topic_vocab == 0 || spec.shared_vocab == 0 || spec.min_tokens == 0 || spec.min_tokens > spec.max_tokens {
        return Err(Error::InvalidConfig(format!("synthetic corpus spec {spec:?}")));
    }
    if !(spec.topic_share >= 0.0 && spec.cross_topic_share >= 0.0 && spec.topic_share + spec.cross_topic_share <= 1.0) {
        return Err(Error::InvalidConfig("token source shares must sum to <= 1".into()));
    }
    // Disjoint code ranges, spaced far enough apart that filtered stop-words
    // cannot make them overlap.
    let stride = 2 * spec.topic_vocab.max(spec.shared_vocab) + 64;
    let shared = vocabulary(0, spec.shared_vocab);
    let topics: Vec<Vec<String>> = (0..k).map(|c| vocabulary((c + 1) * stride, spec.topic_vocab)).collect();
    let shared_zipf = Zipf::new(shared.len(), spec.zipf_exponent);
    let topic_zipf = Zipf::new(spec.topic_vocab, spec.zipf_exponent);

    let mut rng = stream_rng(spec.seed, 0);
    let mut docs = Vec::new();
    for (split, per_class) in [(Split::Train, spec.train_per_class), (Split::Test, spec.test_per_class)] {
        for label in 0..k {
            for n in 0..per_class {
                let len = rng.random_range(spec.min_tokens..=spec.max_tokens);
                let mut text = String::with_capacity(len * 8);
                for t in 0..len {
                    let u: f64 = rng.random();
                    let word = if u < spec.topic_share {
                        &topics[label][topic_zipf.sample(&mut rng)]
                    } else if u < spec.topic_share + spec.cross_topic_share && k > 1 {
                        let other = (label + rng.random_range(1..k)) % k;
                        &topics[other][topic_zipf.sample(&mut rng)]
                    } else {
                        &shared[shared_zipf.sample(&mut rng)]
                    };
                    text.push_str(word);
                    text.push(if t % 12 == 11 { '\n' } else { ' ' });
                }
                docs.push(SyntheticDocument {
                    split,
                    label,
                    name: format!("{}", 10_000 + n),
                    text,
                });
            }
        }
    }
    Ok(docs)
}

/// Writes the corpus as `<root>/20news-bydate-{train,test}/<label>/<name>`.
pub fn write_bydate(root: &Path, spec: &SyntheticCorpusSpec) -> Result<usize> {
    let docs = generate(spec)?;
    for d in &docs {
        let split_dir = match d.split {
            Split::Train => BYDATE_TRAIN_DIR,
            Split::Test => BYDATE_TEST_DIR,
        };
        let dir = root.join(split_dir).join(&spec.labels[d.label]);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join(&d.name);
        fs::write(&path, &d.text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(docs.len())
}

/// Class vocabulary of `label` (for checking what neurons learned).
pub fn topic_vocabulary(spec: &SyntheticCorpusSpec, label: usize) -> Vec<String> {
    let stride = 2 * spec.topic_vocab.max(spec.shared_vocab) + 64;
    vocabulary((label + 1) * stride, spec.topic_vocab)
}
