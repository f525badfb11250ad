//! Frozen-weight encoding into spike-count features, classification and
//! parameter sweeps.

mod classifier;
mod sweep;

use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bank::{mix_seed, EncoderModel};
use crate::container::{ByteReader, ByteWriter, Container, CORPUS_MAGIC};
use crate::corpus::{DocumentTermMatrix, SparseRow};
use crate::error::{Error, Result};
use crate::snn::{SimulationState, Synapses};
use crate::spikegen::{generate_spikes, streams, SpikeGenConfig};

pub use classifier::{evaluate_accuracy, ClassifierConfig, LogisticRegression};
pub use sweep::{
    evaluate_bank, sweep_inhibition, sweep_size_pruning, EvalPipeline, SweepAxis, SweepPoint, SweepResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncodeOptions {
    pub inhibition_level: f64,
    /// Seed of the evaluation spike streams (independent of training).
    pub eval_seed: u64,
    /// Stochastic presentations per document; counts are summed.
    pub repeats: usize,
    pub parallelism: usize,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            inhibition_level: 0.0,
            eval_seed: 0x5E7_E7A1,
            repeats: 1,
            parallelism: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureBlock {
    pub subset_id: usize,
    pub offset: usize,
    pub width: usize,
}

/// Documents x (total bank neurons) spike counts; column blocks follow bank
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub counts: Vec<u32>,
    pub labels: Vec<u32>,
    pub blocks: Vec<FeatureBlock>,
}

impl FeatureMatrix {
    pub fn row(&self, i: usize) -> &[u32] {
        &self.counts[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn block(&self, b: usize) -> FeatureMatrix {
        let blk = self.blocks[b];
        let counts = (0..self.n_rows)
            .flat_map(|i| self.row(i)[blk.offset..blk.offset + blk.width].iter().copied())
            .collect();
        FeatureMatrix {
            n_rows: self.n_rows,
            n_cols: blk.width,
            counts,
            labels: self.labels.clone(),
            blocks: vec![FeatureBlock { offset: 0, ..blk }],
        }
    }

    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.n_rows, self.n_cols), |(i, j)| self.counts[i * self.n_cols + j] as f64)
    }

    /// Number of distinct feature columns with a non-zero count in row `i`.
    pub fn active_in_row(&self, i: usize) -> usize {
        self.row(i).iter().filter(|&&c| c > 0).count()
    }

    pub fn to_container(&self) -> Container {
        let mut w = ByteWriter::new();
        w.u64(self.n_rows as u64)
            .u64(self.n_cols as u64)
            .u32_slice(&self.counts)
            .u32_slice(&self.labels);
        w.u64(self.blocks.len() as u64);
        for b in &self.blocks {
            w.u64(b.subset_id as u64).u64(b.offset as u64).u64(b.width as u64);
        }
        let mut c = Container::new(CORPUS_MAGIC);
        c.push(b"FEAT", w.finish());
        c
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().write_file(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c = Container::read_file(path, CORPUS_MAGIC)?;
        let mut r = ByteReader::new(c.require(b"FEAT")?);
        let n_rows = r.u64()? as usize;
        let n_cols = r.u64()? as usize;
        let counts = r.u32_vec()?;
        let labels = r.u32_vec()?;
        let nb = r.u64()? as usize;
        let blocks = (0..nb)
            .map(|_| {
                Ok(FeatureBlock {
                    subset_id: r.u64()? as usize,
                    offset: r.u64()? as usize,
                    width: r.u64()? as usize,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if counts.len() != n_rows * n_cols || labels.len() != n_rows {
            return Err(Error::Format("feature matrix shape".into()));
        }
        Ok(FeatureMatrix {
            n_rows,
            n_cols,
            counts,
            labels,
            blocks,
        })
    }
}

/// Spike counts of every neuron of `model` for one document, with fresh
/// network state and frozen weights.
pub fn encode_row(model: &EncoderModel, row: SparseRow<'_>, doc: usize, options: &EncodeOptions) -> Result<Vec<u32>> {
    let cfg = &model.meta.config;
    let sim = cfg.simulator()?;
    let spikes = SpikeGenConfig {
        rng_seed: mix_seed(options.eval_seed, model.meta.subset_id as u64),
        ..cfg.spikes
    };
    let (mut idx, mut val) = (Vec::new(), Vec::new());
    model.sub_dictionary.localize(row, &mut idx, &mut val);
    let local = SparseRow {
        indices: &idx,
        values: &val,
    };
    let mut total = vec![0u32; model.neuron_count()];
    for rep in 0..options.repeats.max(1) {
        let schedule = generate_spikes(local, &spikes, streams::evaluation(rep, doc));
        let mut state = SimulationState::new(model.neuron_count(), model.n_inputs(), &cfg.neuron, &cfg.plasticity);
        let mut synapses = Synapses::Frozen {
            weights: &model.weights,
            mask: model.prune_mask.as_ref(),
        };
        let counts = sim.run_window(&mut state, &mut synapses, &schedule, spikes.gap_ms, options.inhibition_level)?;
        for (t, c) in total.iter_mut().zip(counts) {
            *t += c;
        }
    }
    Ok(total)
}

/// Encodes every row of `docs` with every encoder of the bank and joins the
/// per-encoder counts column-wise. Documents are independent, so the result
/// does not depend on `options.parallelism`.
pub fn encode_documents(bank: &[EncoderModel], docs: &DocumentTermMatrix, options: &EncodeOptions) -> Result<FeatureMatrix> {
    let mut blocks = Vec::with_capacity(bank.len());
    let mut offset = 0;
    for m in bank {
        if m.meta.dictionary_size != docs.n_cols {
            return Err(Error::DimensionMismatch(format!(
                "encoder {} was trained on a {}-term dictionary, documents have {} columns",
                m.meta.subset_id, m.meta.dictionary_size, docs.n_cols
            )));
        }
        blocks.push(FeatureBlock {
            subset_id: m.meta.subset_id,
            offset,
            width: m.neuron_count(),
        });
        offset += m.neuron_count();
    }
    let n_cols = offset;
    let encode = |i: usize| -> Result<Vec<u32>> {
        let mut out = Vec::with_capacity(n_cols);
        for m in bank {
            out.extend(encode_row(m, docs.row(i), i, options)?);
        }
        Ok(out)
    };
    let rows: Vec<Vec<u32>> = if options.parallelism <= 1 {
        (0..docs.n_rows()).map(encode).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.parallelism)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| (0..docs.n_rows()).into_par_iter().map(encode).collect::<Result<_>>())?
    };
    Ok(FeatureMatrix {
        n_rows: docs.n_rows(),
        n_cols,
        counts: rows.concat(),
        labels: docs.labels.clone(),
        blocks,
    })
}
