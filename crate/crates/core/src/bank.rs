//! Encoder-bank training: the shuffled training set is cut into overlapping
//! subsets, one encoder is trained per subset on that subset's vocabulary
//! only, and the trained encoders are pruned and persisted together.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::{ByteReader, ByteWriter, Container, MODEL_MAGIC};
use crate::corpus::{Dictionary, DocumentTermMatrix, SparseRow};
use crate::error::{Error, Result};
use crate::plasticity::{prune_mask, PlasticityParams, PruneConfig, PruneMask};
use crate::snn::{InhibitionConfig, NeuronParams, SimulationState, Simulator, Synapses, WeightMatrix};
use crate::spikegen::{generate_spikes, stream_rng, streams, SpikeGenConfig};

/// Half-open `[first, last)` ranges over the shuffled training order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetPlan {
    pub subsets: Vec<(usize, usize)>,
    pub shuffle_seed: u64,
    pub train_size: usize,
}

impl SubsetPlan {
    /// Training-document indices in shuffled order.
    pub fn shuffled_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.train_size).collect();
        order.shuffle(&mut stream_rng(self.shuffle_seed, streams::SHUFFLE));
        order
    }

    /// Training-document indices of every subset.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let order = self.shuffled_order();
        self.subsets.iter().map(|&(a, b)| order[a..b].to_vec()).collect()
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }
}

/// Subsets start every `subset_size - overlap` documents; the last one is
/// truncated at `train_size`.
pub fn plan_subsets(train_size: usize, subset_size: usize, overlap: usize, shuffle_seed: u64) -> Result<SubsetPlan> {
    if train_size == 0 || subset_size == 0 || overlap >= subset_size {
        return Err(Error::InvalidConfig(format!(
            "cannot plan subsets for train_size={train_size}, subset_size={subset_size}, overlap={overlap}"
        )));
    }
    if subset_size > train_size {
        log::warn!("subset size {subset_size} exceeds training set ({train_size}); using one subset");
    }
    let stride = subset_size - overlap;
    let mut subsets = Vec::new();
    let mut first = 0;
    loop {
        let last = (first + subset_size).min(train_size);
        subsets.push((first, last));
        if last == train_size {
            break;
        }
        first += stride;
    }
    Ok(SubsetPlan {
        subsets,
        shuffle_seed,
        train_size,
    })
}

/// Sorted global term ids seen by one encoder; position = local input id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubDictionary {
    global: Vec<u32>,
}

impl SubDictionary {
    pub fn from_sorted(global: Vec<u32>) -> Result<Self> {
        if !global.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Format("sub-dictionary ids not strictly ascending".into()));
        }
        Ok(SubDictionary { global })
    }

    pub fn len(&self) -> usize {
        self.global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty()
    }

    pub fn global_ids(&self) -> &[u32] {
        &self.global
    }

    pub fn global(&self, local: usize) -> u32 {
        self.global[local]
    }

    pub fn local(&self, global: u32) -> Option<u32> {
        self.global.binary_search(&global).ok().map(|i| i as u32)
    }

    /// Restricts a global-id row to this vocabulary, re-indexed locally.
    pub fn localize(&self, row: SparseRow<'_>, indices: &mut Vec<u32>, values: &mut Vec<f64>) {
        indices.clear();
        values.clear();
        for (j, w) in row.iter() {
            if let Some(l) = self.local(j) {
                indices.push(l);
                values.push(w);
            }
        }
    }
}

/// Terms occurring (with non-zero weight) in at least one of the rows.
pub fn build_sub_dictionary<'a>(rows: impl IntoIterator<Item = SparseRow<'a>>) -> SubDictionary {
    let mut ids: Vec<u32> = rows.into_iter().flat_map(|r| r.indices.iter().copied()).collect();
    ids.sort_unstable();
    ids.dedup();
    SubDictionary { global: ids }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub neurons: usize,
    pub epochs: usize,
    pub dt_ms: f64,
    pub init_weight_low: f64,
    pub init_weight_high: f64,
    pub seed: u64,
    pub neuron: NeuronParams,
    pub plasticity: PlasticityParams,
    pub spikes: SpikeGenConfig,
    pub inhibition: InhibitionConfig,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            neurons: 200,
            epochs: 4,
            dt_ms: 0.1,
            init_weight_low: 0.2,
            init_weight_high: 0.8,
            seed: 1,
            neuron: NeuronParams::default(),
            plasticity: PlasticityParams::default(),
            spikes: SpikeGenConfig::default(),
            inhibition: InhibitionConfig::default(),
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neurons == 0 {
            return Err(Error::InvalidConfig("neuron count must be >= 1".into()));
        }
        if !(0.0 <= self.init_weight_low && self.init_weight_low <= self.init_weight_high) {
            return Err(Error::InvalidConfig("initial weight range".into()));
        }
        self.neuron.validate()?;
        self.plasticity.validate()?;
        self.spikes.validate()?;
        self.inhibition.validate()
    }

    pub fn simulator(&self) -> Result<Simulator> {
        Simulator::new(self.neuron, &self.plasticity, self.dt_ms, &self.inhibition)
    }

    /// Seed of the encoder trained on `subset`.
    pub fn encoder_seed(&self, subset: usize) -> u64 {
        mix_seed(self.seed, subset as u64)
    }
}

/// SplitMix64 finalizer over `seed ^ f(salt)`.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub input_events: u64,
    pub output_spikes: u64,
    pub clamp_events: u64,
    /// Gini coefficient of each neuron's weight row after the epoch.
    pub gini: Vec<f64>,
}

/// Everything needed to interpret and reproduce a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub subset_id: usize,
    pub subset_range: (usize, usize),
    pub n_documents: usize,
    pub dictionary_size: usize,
    pub encoder_seed: u64,
    pub config: EncoderConfig,
    pub epochs: Vec<EpochStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    pub sub_dictionary: SubDictionary,
    pub weights: WeightMatrix,
    pub prune_mask: Option<PruneMask>,
    pub meta: ModelMetadata,
}

impl EncoderModel {
    pub fn neuron_count(&self) -> usize {
        self.weights.n_neurons()
    }

    pub fn n_inputs(&self) -> usize {
        self.sub_dictionary.len()
    }

    /// Copy carrying a fresh mask of the `theta` weakest connections per
    /// neuron; weights themselves are untouched.
    pub fn pruned(&self, config: PruneConfig) -> EncoderModel {
        let mut m = self.clone();
        m.prune_mask = (config.theta > 0.0).then(|| prune_mask(&self.weights, config));
        m
    }

    /// Copy with masked weights set to zero and no mask.
    pub fn with_masked_weights_zeroed(&self) -> EncoderModel {
        let mut m = self.clone();
        if let Some(mask) = m.prune_mask.take() {
            for j in 0..m.weights.n_neurons() {
                for (w, &k) in m.weights.row_mut(j).iter_mut().zip(mask.row(j)) {
                    if !k {
                        *w = 0.0;
                    }
                }
            }
        }
        m
    }

    /// The `k` strongest kept connections of `neuron` as (global term id,
    /// weight), descending; ties by term id.
    pub fn top_terms(&self, neuron: usize, k: usize) -> Result<Vec<(u32, f64)>> {
        if neuron >= self.neuron_count() {
            return Err(Error::InvalidConfig(format!(
                "neuron {neuron} out of range (model has {})",
                self.neuron_count()
            )));
        }
        let row = self.weights.row(neuron);
        let mut ranked: Vec<(u32, f64)> = (0..row.len())
            .filter(|&i| self.prune_mask.as_ref().is_none_or(|m| m.is_kept(neuron, i)))
            .map(|i| (self.sub_dictionary.global(i), row[i]))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        Ok(ranked)
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new(MODEL_MAGIC);
        c.push(b"META", serde_json::to_vec(&self.meta).expect("metadata serializes"));
        let mut w = ByteWriter::new();
        w.u32_slice(self.sub_dictionary.global_ids());
        c.push(b"SDIC", w.finish());
        let mut w = ByteWriter::new();
        w.u64(self.weights.n_neurons() as u64)
            .u64(self.weights.n_inputs() as u64)
            .f64_slice(self.weights.as_slice());
        c.push(b"WGHT", w.finish());
        if let Some(mask) = &self.prune_mask {
            let mut w = ByteWriter::new();
            w.f64(mask.theta).u64(mask.n_neurons as u64).u64(mask.n_inputs as u64);
            let mut bytes = w.finish();
            bytes.extend(mask.as_slice().chunks(8).map(|c| {
                c.iter().enumerate().fold(0u8, |acc, (b, &k)| acc | (u8::from(k) << b))
            }));
            c.push(b"MASK", bytes);
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let meta: ModelMetadata = serde_json::from_slice(c.require(b"META")?)
            .map_err(|e| Error::Format(format!("model metadata: {e}")))?;
        let sub_dictionary = SubDictionary::from_sorted(ByteReader::new(c.require(b"SDIC")?).u32_vec()?)?;
        let mut r = ByteReader::new(c.require(b"WGHT")?);
        let (n, m) = (r.u64()? as usize, r.u64()? as usize);
        let weights = WeightMatrix::from_vec(n, m, r.f64_vec()?)?;
        if m != sub_dictionary.len() {
            return Err(Error::Format("weight columns differ from sub-dictionary size".into()));
        }
        let prune_mask = match c.section(b"MASK") {
            None => None,
            Some(bytes) => {
                let mut r = ByteReader::new(bytes);
                let theta = r.f64()?;
                let (mn, mi) = (r.u64()? as usize, r.u64()? as usize);
                let total = mn * mi;
                let packed = r.bytes(total.div_ceil(8))?;
                let kept = (0..total).map(|k| packed[k / 8] >> (k % 8) & 1 == 1).collect();
                if (mn, mi) != (n, m) {
                    return Err(Error::Format("mask shape differs from weights".into()));
                }
                Some(PruneMask::from_kept(theta, mn, mi, kept)?)
            }
        };
        Ok(EncoderModel {
            sub_dictionary,
            weights,
            prune_mask,
            meta,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_container().to_bytes()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().write_file(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::read_file(path, MODEL_MAGIC)?)
    }
}

/// Gini coefficient of non-negative values (0 = uniform, ->1 = concentrated).
pub fn gini(values: &[f64]) -> f64 {
    let n = values.len();
    let total: f64 = values.iter().sum();
    if n == 0 || total <= 0.0 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (2.0 * (i as f64 + 1.0) - n as f64 - 1.0) * x)
        .sum();
    weighted / (n as f64 * total)
}

fn initial_weights(n_neurons: usize, n_inputs: usize, config: &EncoderConfig, seed: u64) -> WeightMatrix {
    let mut rng = stream_rng(seed, streams::INITIAL_WEIGHTS);
    let (lo, hi) = (config.init_weight_low, config.init_weight_high);
    let data = (0..n_neurons * n_inputs)
        .map(|_| if hi > lo { rng.random_range(lo..hi) } else { lo })
        .collect();
    WeightMatrix::from_vec(n_neurons, n_inputs, data).expect("shape matches")
}

/// Training set of one encoder: `(training-document index, row)` pairs in
/// presentation order.
pub type SubsetRows<'a> = [(usize, SparseRow<'a>)];

/// Trains one encoder. Every epoch presents every subset document in order,
/// each as a fresh spike sample; the network state carries over between
/// documents (separated by the input-free gap) and is reset between epochs.
pub fn train_encoder(
    subset: &SubsetRows<'_>,
    sub_dictionary: SubDictionary,
    dictionary_size: usize,
    config: &EncoderConfig,
    subset_id: usize,
    subset_range: (usize, usize),
) -> Result<EncoderModel> {
    config.validate()?;
    if subset.is_empty() {
        return Err(Error::InvalidConfig("empty training subset".into()));
    }
    if sub_dictionary.len() >= dictionary_size {
        log::warn!(
            "encoder {subset_id}: sub-dictionary covers the whole dictionary ({} terms)",
            dictionary_size
        );
    }
    let sim = config.simulator()?;
    let seed = config.encoder_seed(subset_id);
    let n_inputs = sub_dictionary.len();
    let mut weights = initial_weights(config.neurons, n_inputs, config, seed);
    let spikes = SpikeGenConfig {
        rng_seed: seed,
        ..config.spikes
    };
    let learning = config.plasticity.eta > 0.0;

    let (mut idx, mut val) = (Vec::new(), Vec::new());
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let started = Instant::now();
        let mut state = SimulationState::new(config.neurons, n_inputs, &config.neuron, &config.plasticity);
        let (mut input_events, mut output_spikes) = (0u64, 0u64);
        for &(doc, row) in subset {
            sub_dictionary.localize(row, &mut idx, &mut val);
            let local = SparseRow {
                indices: &idx,
                values: &val,
            };
            let schedule = generate_spikes(local, &spikes, streams::training(epoch, doc));
            input_events += schedule.len() as u64;
            let mut synapses = if learning {
                Synapses::Plastic {
                    weights: &mut weights,
                    mask: None,
                    params: &config.plasticity,
                }
            } else {
                Synapses::Frozen {
                    weights: &weights,
                    mask: None,
                }
            };
            let counts = sim.run_window(
                &mut state,
                &mut synapses,
                &schedule,
                spikes.gap_ms,
                config.inhibition.training_level,
            )?;
            output_spikes += counts.iter().map(|&c| c as u64).sum::<u64>();
        }
        let stats = EpochStats {
            epoch,
            input_events,
            output_spikes,
            clamp_events: state.clamp_events,
            gini: (0..config.neurons).map(|j| gini(weights.row(j))).collect(),
        };
        log::info!(
            "encoder {subset_id} epoch {}/{}: {} input events, {} output spikes, {} clamps, mean gini {:.4}, {:.1?}",
            epoch + 1,
            config.epochs,
            stats.input_events,
            stats.output_spikes,
            stats.clamp_events,
            stats.gini.iter().sum::<f64>() / config.neurons as f64,
            started.elapsed()
        );
        epochs.push(stats);
    }

    Ok(EncoderModel {
        sub_dictionary,
        weights,
        prune_mask: None,
        meta: ModelMetadata {
            subset_id,
            subset_range,
            n_documents: subset.len(),
            dictionary_size,
            encoder_seed: seed,
            config: config.clone(),
            epochs,
        },
    })
}

/// Trains one encoder per planned subset, up to `parallelism` at a time.
/// Results are independent of `parallelism`.
pub fn train_bank(
    train: &DocumentTermMatrix,
    plan: &SubsetPlan,
    config: &EncoderConfig,
    parallelism: usize,
) -> Result<Vec<EncoderModel>> {
    if plan.train_size != train.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "plan covers {} documents, matrix has {}",
            plan.train_size,
            train.n_rows()
        )));
    }
    config.validate()?;
    let members = plan.members();
    let train_one = |(s, docs): (usize, &Vec<usize>)| -> Result<EncoderModel> {
        let rows: Vec<(usize, SparseRow<'_>)> = docs.iter().map(|&d| (d, train.row(d))).collect();
        let sub = build_sub_dictionary(rows.iter().map(|&(_, r)| r));
        train_encoder(&rows, sub, train.n_cols, config, s, plan.subsets[s])
            .map_err(|e| Error::Encoder {
                subset: s,
                source: Box::new(e),
            })
    };
    if parallelism <= 1 {
        return members.iter().enumerate().map(train_one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| members.par_iter().enumerate().map(train_one).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub subset_id: usize,
    pub neurons: usize,
    pub inputs: usize,
}

/// `bank.json`: member model files and the plan they were trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankManifest {
    pub members: Vec<ManifestEntry>,
    pub plan: SubsetPlan,
    pub theta: Option<f64>,
    pub config_hash: Option<String>,
}

pub const MANIFEST_FILE: &str = "bank.json";

pub fn model_file_name(subset_id: usize) -> String {
    format!("encoder_{subset_id:02}.setm")
}

pub fn save_bank(dir: &Path, models: &[EncoderModel], plan: &SubsetPlan, config_hash: Option<String>) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut members = Vec::with_capacity(models.len());
    for m in models {
        let file = model_file_name(m.meta.subset_id);
        m.save(&dir.join(&file))?;
        members.push(ManifestEntry {
            file,
            subset_id: m.meta.subset_id,
            neurons: m.neuron_count(),
            inputs: m.n_inputs(),
        });
    }
    let manifest = BankManifest {
        members,
        plan: plan.clone(),
        theta: models.first().and_then(|m| m.prune_mask.as_ref()).map(|p| p.theta),
        config_hash,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn load_bank(dir: &Path) -> Result<(BankManifest, Vec<EncoderModel>)> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(Error::MissingPath(path));
    }
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: BankManifest =
        serde_json::from_slice(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let models = manifest
        .members
        .iter()
        .map(|m| EncoderModel::load(&dir.join(&m.file)))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, models))
}

/// Human-readable top terms of one neuron.
pub fn describe_neuron(model: &EncoderModel, dictionary: &Dictionary, neuron: usize, k: usize) -> Result<Vec<(String, f64)>> {
    Ok(model
        .top_terms(neuron, k)?
        .into_iter()
        .map(|(id, w)| (dictionary.term(id).to_string(), w))
        .collect())
}
