use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use textspike::bank::EncoderConfig;
use textspike::corpus::CorpusLayout;
use textspike::eval::EvalPipeline;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub paths: Paths,
    pub corpus: CorpusSelection,
    pub plan: PlanConfig,
    pub encoder: EncoderConfig,
    /// Pruning level applied after training (0 keeps every connection).
    pub theta: f64,
    pub eval: EvalPipeline,
    pub sweep: SweepGrid,
    /// Worker threads for training and encoding.
    pub parallelism: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: Paths::default(),
            corpus: CorpusSelection::default(),
            plan: PlanConfig::default(),
            encoder: EncoderConfig::default(),
            theta: 0.9,
            eval: EvalPipeline::default(),
            sweep: SweepGrid::default(),
            parallelism: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Raw corpus root.
    pub corpus: PathBuf,
    /// Output of `prepare`.
    pub prepared: PathBuf,
    /// Output of `train`.
    pub bank: PathBuf,
    /// Features, result tables and run manifests.
    pub results: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            corpus: "data/20news".into(),
            prepared: "out/prepared".into(),
            bank: "out/bank".into(),
            results: "out/results".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSelection {
    pub layout: CorpusLayout,
    /// Categories to keep; empty keeps all.
    pub labels: Vec<String>,
    pub train_per_label: Option<usize>,
    pub test_per_label: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanConfig {
    pub subset_size: usize,
    pub overlap: usize,
    pub shuffle_seed: u64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            subset_size: 1500,
            overlap: 500,
            shuffle_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub inhibition_levels: Vec<f64>,
    /// Neurons per encoder.
    pub sizes: Vec<usize>,
    pub thetas: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            inhibition_levels: vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            sizes: vec![10, 30, 50, 70, 100, 200, 300],
            thetas: vec![0.5, 0.8, 0.9, 0.99],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.encoder.validate()?;
        textspike::plasticity::PruneConfig::new(self.theta)?;
        if self.plan.subset_size == 0 || self.plan.overlap >= self.plan.subset_size {
            bail!("plan.overlap must be smaller than plan.subset_size");
        }
        Ok(())
    }

    /// Applies `key.path=value` overrides. Values are parsed as TOML and
    /// fall back to plain strings.
    pub fn with_overrides(&self, overrides: &[String]) -> anyhow::Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut root = toml::Table::try_from(self)?;
        for item in overrides {
            let Some((key, raw)) = item.split_once('=') else {
                bail!("override {item:?} is not of the form key=value");
            };
            set_dotted(&mut root, key.trim(), parse_value(raw.trim()))?;
        }
        let config: RunConfig = toml::Value::Table(root)
            .try_into()
            .context("applying --set overrides")?;
        config.validate()?;
        Ok(config)
    }

    /// SHA-256 of the canonical TOML form, leaving out paths and
    /// parallelism since neither changes any result.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            paths: Paths::default(),
            parallelism: 1,
            ..self.clone()
        };
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_dotted(root: &mut toml::Table, key: &str, value: toml::Value) -> anyhow::Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().filter(|l| !l.is_empty()).context("empty override key")?;
    let mut table = root;
    for part in parts {
        table = table
            .entry(part)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .with_context(|| format!("{key}: {part} is not a section"))?;
    }
    table.insert(leaf.to_string(), value);
    Ok(())
}
