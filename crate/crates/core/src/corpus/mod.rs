//! Corpus ingestion and TF-IDF vectorization.

mod stopwords;
mod tfidf;
mod tokenize;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use stopwords::is_stop_word;
pub use tfidf::{build_tfidf, Dictionary, DocumentTermMatrix, PreparedCorpus, SparseRow};
pub use tokenize::tokenize;

pub const BYDATE_TRAIN_DIR: &str = "20news-bydate-train";
pub const BYDATE_TEST_DIR: &str = "20news-bydate-test";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// How a directory tree maps onto labels and splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CorpusLayout {
    /// `<root>/<train_dir>/<label>/<doc>` and `<root>/<test_dir>/<label>/<doc>`.
    Bydate { train_dir: String, test_dir: String },
    /// `<root>/<label>/<doc>`, every document tagged with one split.
    Flat { split: Split },
}

impl Default for CorpusLayout {
    fn default() -> Self {
        CorpusLayout::Bydate {
            train_dir: BYDATE_TRAIN_DIR.to_string(),
            test_dir: BYDATE_TEST_DIR.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    /// Path relative to the corpus root, `/`-separated.
    pub id: String,
    pub label: usize,
    pub split: Split,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub labels: Vec<String>,
    pub documents: Vec<Document>,
    /// Documents with no tokens left after preprocessing.
    pub dropped_empty: usize,
    /// Files that could not be read.
    pub unreadable: usize,
}

impl Corpus {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Document> {
        self.documents.iter().filter(move |d| d.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    /// Keeps only the named labels (in the given order) and re-indexes them.
    pub fn restrict_labels(&mut self, keep: &[String]) -> Result<()> {
        let mut remap = vec![None; self.labels.len()];
        for (new, name) in keep.iter().enumerate() {
            let old = self
                .labels
                .iter()
                .position(|l| l == name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown category {name:?}")))?;
            remap[old] = Some(new);
        }
        self.documents.retain_mut(|d| match remap[d.label] {
            Some(new) => {
                d.label = new;
                true
            }
            None => false,
        });
        self.labels = keep.to_vec();
        Ok(())
    }

    /// Keeps the first `train` / `test` documents of every label (corpus
    /// order, i.e. lexicographic by path).
    pub fn limit_per_label(&mut self, train: usize, test: usize) {
        let mut seen = vec![(0usize, 0usize); self.labels.len()];
        self.documents.retain(|d| {
            let (tr, te) = &mut seen[d.label];
            let (n, cap) = match d.split {
                Split::Train => (tr, train),
                Split::Test => (te, test),
            };
            *n += 1;
            *n <= cap
        });
    }
}

/// Reads a labeled corpus. Documents are ordered lexicographically by path;
/// unreadable files and documents that tokenize to nothing are skipped with
/// a warning.
pub fn load_corpus(root: &Path, layout: &CorpusLayout) -> Result<Corpus> {
    if !root.exists() {
        return Err(Error::MissingPath(root.to_path_buf()));
    }
    let splits: Vec<(PathBuf, Split)> = match layout {
        CorpusLayout::Bydate {
            train_dir,
            test_dir,
        } => {
            let dirs = vec![
                (root.join(train_dir), Split::Train),
                (root.join(test_dir), Split::Test),
            ];
            for (dir, _) in &dirs {
                if !dir.is_dir() {
                    return Err(Error::MissingPath(dir.clone()));
                }
            }
            dirs
        }
        CorpusLayout::Flat { split } => vec![(root.to_path_buf(), *split)],
    };

    let mut files = Vec::new();
    let mut label_set = BTreeSet::new();
    for (dir, split) in &splits {
        for label_dir in sorted_entries(dir)? {
            if !label_dir.is_dir() {
                continue;
            }
            let label = file_name(&label_dir);
            let mut any = false;
            for file in sorted_entries(&label_dir)? {
                if file.is_file() {
                    files.push((file, label.clone(), *split));
                    any = true;
                }
            }
            if any {
                label_set.insert(label);
            }
        }
    }
    let labels: Vec<String> = label_set.into_iter().collect();

    let mut documents = Vec::with_capacity(files.len());
    let mut unreadable = 0;
    let mut dropped_empty = 0;
    for (path, label, split) in files {
        let raw = match fs::read(&path) {
            Ok(raw) => raw,
            Err(e) => {
                log::warn!("skipping unreadable file {}: {e}", path.display());
                unreadable += 1;
                continue;
            }
        };
        let tokens = tokenize(&raw);
        let id = relative_id(root, &path);
        if tokens.is_empty() {
            log::warn!("dropping empty document {id}");
            dropped_empty += 1;
            continue;
        }
        documents.push(Document {
            id,
            label: labels.binary_search(&label).expect("label collected above"),
            split,
            tokens,
        });
    }

    if documents.is_empty() {
        return Err(Error::EmptyCorpus(root.to_path_buf()));
    }
    if let CorpusLayout::Bydate { .. } = layout {
        for (i, name) in labels.iter().enumerate() {
            for split in [Split::Train, Split::Test] {
                if !documents.iter().any(|d| d.label == i && d.split == split) {
                    log::warn!("label {name} has no {split:?} documents");
                }
            }
        }
    }
    log::info!(
        "loaded {} documents ({} train, {} test), {} labels; {} empty dropped, {} unreadable",
        documents.len(),
        documents.iter().filter(|d| d.split == Split::Train).count(),
        documents.iter().filter(|d| d.split == Split::Test).count(),
        labels.len(),
        dropped_empty,
        unreadable
    );
    Ok(Corpus {
        labels,
        documents,
        dropped_empty,
        unreadable,
    })
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    Ok(out)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn relative_id(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}
