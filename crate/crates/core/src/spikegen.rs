//! Rate coding of TF-IDF rows into Bernoulli spike schedules.
//!
//! Every millisecond of the presentation window, every input with weight `w`
//! emits a spike with probability `min(1, alpha * w)`. The inter-document gap
//! carries no events; the simulator models it as input-free decay.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::SparseRow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpikeGenConfig {
    pub presentation_ms: u32,
    pub gap_ms: u32,
    pub alpha: f64,
    pub rng_seed: u64,
}

impl Default for SpikeGenConfig {
    fn default() -> Self {
        SpikeGenConfig {
            presentation_ms: 600,
            gap_ms: 300,
            alpha: 1.5,
            rng_seed: 0,
        }
    }
}

impl SpikeGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.presentation_ms == 0 {
            return Err(Error::InvalidConfig("presentation_ms must be > 0".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidConfig(format!("alpha must be > 0, got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn spike_probability(&self, w: f64) -> f64 {
        (self.alpha * w).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpikeEvent {
    pub time_ms: u32,
    pub input: u32,
}

/// Time-ordered input events of one presentation (ties by input index).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SpikeSchedule {
    pub window_ms: u32,
    pub events: Vec<SpikeEvent>,
}

impl SpikeSchedule {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events grouped per millisecond: `buckets[t]` is the slice at `t` ms.
    pub fn by_millisecond(&self) -> impl Iterator<Item = (u32, &[SpikeEvent])> {
        self.events
            .chunk_by(|a, b| a.time_ms == b.time_ms)
            .map(|c| (c[0].time_ms, c))
    }

    pub fn count_for(&self, input: u32) -> usize {
        self.events.iter().filter(|e| e.input == input).count()
    }

    /// `input_index,time_ms` rows for raster plots.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "input_index,time_ms")?;
        for e in &self.events {
            writeln!(out, "{},{}", e.input, e.time_ms)?;
        }
        Ok(())
    }
}

/// Reproducible random stream for a (seed, stream id) pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream-id layout: top byte tags the purpose so streams never collide.
pub mod streams {
    const DOC_BITS: u32 = 40;
    const DOC_MASK: u64 = (1 << DOC_BITS) - 1;

    pub fn training(epoch: usize, doc: usize) -> u64 {
        (1 << 56) | ((epoch as u64 & 0xffff) << DOC_BITS) | (doc as u64 & DOC_MASK)
    }

    pub fn evaluation(repeat: usize, doc: usize) -> u64 {
        (2 << 56) | ((repeat as u64 & 0xffff) << DOC_BITS) | (doc as u64 & DOC_MASK)
    }

    pub const INITIAL_WEIGHTS: u64 = 3 << 56;
    pub const SHUFFLE: u64 = 4 << 56;
}

/// Bernoulli spike schedule for one document row whose indices are input
/// neuron ids.
pub fn generate_spikes(row: SparseRow<'_>, config: &SpikeGenConfig, stream_id: u64) -> SpikeSchedule {
    let mut rng = stream_rng(config.rng_seed, stream_id);
    let active: Vec<(u32, f64)> = row
        .iter()
        .map(|(i, w)| (i, config.spike_probability(w)))
        .filter(|&(_, p)| p > 0.0)
        .collect();
    let expected: f64 = active.iter().map(|&(_, p)| p).sum::<f64>() * config.presentation_ms as f64;
    let mut events = Vec::with_capacity(expected as usize + 16);
    for t in 0..config.presentation_ms {
        for &(input, p) in &active {
            if rng.random::<f64>() < p {
                events.push(SpikeEvent { time_ms: t, input });
            }
        }
    }
    SpikeSchedule {
        window_ms: config.presentation_ms,
        events,
    }
}

pub fn expected_spike_count(w: f64, config: &SpikeGenConfig) -> f64 {
    config.presentation_ms as f64 * config.spike_probability(w)
}
