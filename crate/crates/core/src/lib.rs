//! Spiking-neural-network text encoder.
//!
//! Documents are turned into TF-IDF vectors, the vectors into stochastic
//! spike trains, and the spike trains drive small two-layer networks of
//! conductance-based LIF neurons trained with a modified STDP rule. After
//! training (and pruning of weak connections) the per-neuron spike counts of
//! a bank of such encoders form a low-dimensional document representation
//! that is scored with multinomial logistic regression.
//!
//! Pipeline, bottom-up:
//!
//! * [`corpus`]: ingestion, tokenization, dictionary and TF-IDF matrix
//! * [`spikegen`]: TF-IDF row to Bernoulli spike schedule
//! * [`snn`]: clock-driven LIF simulation with winner-take-all inhibition
//! * [`plasticity`]: presynaptic / postsynaptic traces, the STDP update, pruning
//! * [`bank`]: subset planning, encoder training, persistence
//! * [`eval`]: spike-count features, logistic regression, parameter sweeps

pub mod bank;
pub mod container;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod plasticity;
pub mod snn;
pub mod spikegen;
pub mod synthetic;

pub use error::{Error, Result};
