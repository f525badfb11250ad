use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use super::{Corpus, Document, Split};
use crate::container::{ByteReader, ByteWriter, Container, CORPUS_MAGIC};
use crate::error::{Error, Result};

/// Train-split vocabulary with dense, lexicographically ordered term ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
    document_frequency: Vec<u32>,
    /// Number of training documents the frequencies were counted over.
    pub n_documents: usize,
}

impl Dictionary {
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = &'a Document>) -> Self {
        let mut df: HashMap<&str, u32> = HashMap::new();
        let mut n_documents = 0;
        for doc in docs {
            n_documents += 1;
            let mut unique: Vec<&str> = doc.tokens.iter().map(String::as_str).collect();
            unique.sort_unstable();
            unique.dedup();
            for t in unique {
                *df.entry(t).or_default() += 1;
            }
        }
        let mut terms: Vec<(&str, u32)> = df.into_iter().collect();
        terms.sort_unstable();
        let document_frequency = terms.iter().map(|&(_, f)| f).collect();
        let terms: Vec<String> = terms.into_iter().map(|(t, _)| t.to_string()).collect();
        Self::from_parts(terms, document_frequency, n_documents)
    }

    fn from_parts(terms: Vec<String>, document_frequency: Vec<u32>, n_documents: usize) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Dictionary {
            terms,
            index,
            document_frequency,
            n_documents,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn document_frequency(&self, id: u32) -> u32 {
        self.document_frequency[id as usize]
    }

    /// `ln(|D_train| / df)`, unsmoothed.
    pub fn idf(&self, id: u32) -> f64 {
        (self.n_documents as f64 / self.document_frequency(id) as f64).ln()
    }

    /// One `term<TAB>df` line per term, in id order.
    pub fn write_term_list(&self, mut out: impl Write) -> std::io::Result<()> {
        for (t, df) in self.terms.iter().zip(&self.document_frequency) {
            writeln!(out, "{t}\t{df}")?;
        }
        Ok(())
    }

    fn encode(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.u64(self.n_documents as u64)
            .strings(&self.terms)
            .u32_slice(&self.document_frequency);
        w.finish()
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let n_documents = r.u64()? as usize;
        let terms = r.strings()?;
        let df = r.u32_vec()?;
        if df.len() != terms.len() {
            return Err(Error::Format("dictionary term/df length mismatch".into()));
        }
        Ok(Self::from_parts(terms, df, n_documents))
    }
}

/// Borrowed sparse row: ascending column ids with their weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseRow<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f64],
}

impl<'a> SparseRow<'a> {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + 'a {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }
}

/// CSR document-term matrix with per-row label and document id.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentTermMatrix {
    pub n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    pub labels: Vec<u32>,
    pub doc_ids: Vec<String>,
}

impl DocumentTermMatrix {
    pub fn new(n_cols: usize) -> Self {
        DocumentTermMatrix {
            n_cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
            labels: Vec::new(),
            doc_ids: Vec::new(),
        }
    }

    /// Appends a row; entries must have ascending, in-range column ids and
    /// finite non-negative weights. Zero weights are not stored.
    pub fn push_row(&mut self, entries: &[(u32, f64)], label: u32, doc_id: String) -> Result<()> {
        let mut prev = None;
        for &(j, w) in entries {
            if (j as usize) >= self.n_cols || prev.is_some_and(|p| p >= j) {
                return Err(Error::DimensionMismatch(format!(
                    "column {j} out of order or beyond {} columns",
                    self.n_cols
                )));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidConfig(format!("weight {w} for column {j}")));
            }
            prev = Some(j);
        }
        for &(j, w) in entries.iter().filter(|e| e.1 > 0.0) {
            self.indices.push(j);
            self.values.push(w);
        }
        self.indptr.push(self.indices.len());
        self.labels.push(label);
        self.doc_ids.push(doc_id);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> SparseRow<'_> {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        SparseRow {
            indices: &self.indices[a..b],
            values: &self.values[a..b],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = SparseRow<'_>> {
        (0..self.n_rows()).map(|i| self.row(i))
    }

    /// New matrix holding the given rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut out = DocumentTermMatrix::new(self.n_cols);
        for &i in rows {
            let r = self.row(i);
            out.indices.extend_from_slice(r.indices);
            out.values.extend_from_slice(r.values);
            out.indptr.push(out.indices.len());
            out.labels.push(self.labels[i]);
            out.doc_ids.push(self.doc_ids[i].clone());
        }
        out
    }

    fn encode(&self) -> Vec<u8> {
        let indptr: Vec<u64> = self.indptr.iter().map(|&p| p as u64).collect();
        let mut w = ByteWriter::new();
        w.u64(self.n_cols as u64)
            .u64_slice(&indptr)
            .u32_slice(&self.indices)
            .f64_slice(&self.values)
            .u32_slice(&self.labels)
            .strings(&self.doc_ids);
        w.finish()
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let n_cols = r.u64()? as usize;
        let indptr: Vec<usize> = r.u64_vec()?.into_iter().map(|p| p as usize).collect();
        let indices = r.u32_vec()?;
        let values = r.f64_vec()?;
        let labels = r.u32_vec()?;
        let doc_ids = r.strings()?;
        let n_rows = indptr.len().saturating_sub(1);
        let consistent = !indptr.is_empty()
            && indptr[0] == 0
            && indptr.windows(2).all(|w| w[0] <= w[1])
            && *indptr.last().unwrap() == indices.len()
            && indices.len() == values.len()
            && labels.len() == n_rows
            && doc_ids.len() == n_rows
            && indices.iter().all(|&j| (j as usize) < n_cols);
        if !consistent {
            return Err(Error::Format("inconsistent document-term matrix".into()));
        }
        Ok(DocumentTermMatrix {
            n_cols,
            indptr,
            indices,
            values,
            labels,
            doc_ids,
        })
    }
}

/// Output of [`build_tfidf`]: train-derived dictionary plus both matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedCorpus {
    pub labels: Vec<String>,
    pub dictionary: Dictionary,
    pub train: DocumentTermMatrix,
    pub test: DocumentTermMatrix,
}

/// `w_ij = (count_ij / |d_i|) * ln(|D_train| / df_j)`.
///
/// The dictionary and document frequencies come from the train split only.
/// `|d_i|` is the full token count of the document, so tokens of a test
/// document that are missing from the dictionary still dilute its TF.
pub fn build_tfidf(corpus: &Corpus) -> Result<PreparedCorpus> {
    let dictionary = Dictionary::from_documents(corpus.split(Split::Train));
    if dictionary.n_documents == 0 {
        return Err(Error::InvalidConfig("corpus has no training documents".into()));
    }
    let idf: Vec<f64> = (0..dictionary.len() as u32).map(|j| dictionary.idf(j)).collect();

    let mut train = DocumentTermMatrix::new(dictionary.len());
    let mut test = DocumentTermMatrix::new(dictionary.len());
    let mut counts: HashMap<u32, u32> = HashMap::new();
    let mut entries = Vec::new();
    for doc in &corpus.documents {
        counts.clear();
        for t in &doc.tokens {
            if let Some(j) = dictionary.id(t) {
                *counts.entry(j).or_default() += 1;
            }
        }
        let len = doc.tokens.len() as f64;
        entries.clear();
        entries.extend(
            counts
                .iter()
                .map(|(&j, &c)| (j, c as f64 / len * idf[j as usize])),
        );
        entries.sort_unstable_by_key(|&(j, _)| j);
        let target = match doc.split {
            Split::Train => &mut train,
            Split::Test => &mut test,
        };
        target.push_row(&entries, doc.label as u32, doc.id.clone())?;
    }
    Ok(PreparedCorpus {
        labels: corpus.labels.clone(),
        dictionary,
        train,
        test,
    })
}

impl PreparedCorpus {
    pub const DICTIONARY_FILE: &'static str = "dictionary.setc";
    pub const TRAIN_FILE: &'static str = "train.setc";
    pub const TEST_FILE: &'static str = "test.setc";
    pub const TERMS_FILE: &'static str = "terms.txt";

    fn labels_section(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.strings(&self.labels);
        w.finish()
    }

    /// Writes the three `SETC` artifacts and the plain-text term list.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut dict = Container::new(CORPUS_MAGIC);
        dict.push(b"DICT", self.dictionary.encode());
        dict.push(b"LABL", self.labels_section());
        dict.write_file(&dir.join(Self::DICTIONARY_FILE))?;
        for (name, m) in [(Self::TRAIN_FILE, &self.train), (Self::TEST_FILE, &self.test)] {
            let mut c = Container::new(CORPUS_MAGIC);
            c.push(b"DTMX", m.encode());
            c.write_file(&dir.join(name))?;
        }
        let terms = dir.join(Self::TERMS_FILE);
        let f = std::fs::File::create(&terms).map_err(|e| Error::io(&terms, e))?;
        self.dictionary
            .write_term_list(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(&terms, e))
    }

    /// Labels and dictionary only, without the matrices.
    pub fn load_dictionary(dir: &Path) -> Result<(Vec<String>, Dictionary)> {
        let dict = Container::read_file(&dir.join(Self::DICTIONARY_FILE), CORPUS_MAGIC)?;
        let dictionary = Dictionary::decode(dict.require(b"DICT")?)?;
        let labels = ByteReader::new(dict.require(b"LABL")?).strings()?;
        Ok((labels, dictionary))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (labels, dictionary) = Self::load_dictionary(dir)?;
        let load = |name: &str| -> Result<DocumentTermMatrix> {
            let c = Container::read_file(&dir.join(name), CORPUS_MAGIC)?;
            let m = DocumentTermMatrix::decode(c.require(b"DTMX")?)?;
            if m.n_cols != dictionary.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has {} columns, dictionary has {} terms",
                    m.n_cols,
                    dictionary.len()
                )));
            }
            Ok(m)
        };
        Ok(PreparedCorpus {
            train: load(Self::TRAIN_FILE)?,
            test: load(Self::TEST_FILE)?,
            labels,
            dictionary,
        })
    }
}
