use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{encode_documents, ClassifierConfig, EncodeOptions, LogisticRegression};
use crate::bank::{train_bank, EncoderConfig, EncoderModel, SubsetPlan};
use crate::corpus::DocumentTermMatrix;
use crate::error::Result;
use crate::plasticity::PruneConfig;

/// Encoding and classification settings shared by every evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalPipeline {
    pub encode: EncodeOptions,
    pub classifier: ClassifierConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Inhibition,
    SizePruning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub inhibition_level: f64,
    pub total_neurons: usize,
    pub theta: f64,
    pub accuracy_percent: f64,
    pub n_train: usize,
    pub n_test: usize,
}

impl SweepPoint {
    pub fn setting(&self, axis: SweepAxis) -> String {
        match axis {
            SweepAxis::Inhibition => format!("inhibition={}", self.inhibition_level),
            SweepAxis::SizePruning => format!("neurons={};theta={}", self.total_neurons, self.theta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Accuracy with no inhibition is at least the accuracy at every level
    /// of 1.5 or more. Vacuously true without such points.
    pub fn degrades_with_inhibition(&self) -> bool {
        let Some(base) = self.points.iter().find(|p| p.inhibition_level == 0.0) else {
            return true;
        };
        self.points
            .iter()
            .filter(|p| p.inhibition_level >= 1.5)
            .all(|p| base.accuracy_percent >= p.accuracy_percent)
    }

    /// `setting,accuracy_percent,n_train,n_test,seed,...` rows.
    pub fn write_csv(&self, mut out: impl Write, seed: u64, config_hash: &str) -> std::io::Result<()> {
        writeln!(
            out,
            "setting,accuracy_percent,n_train,n_test,seed,inhibition_level,total_neurons,theta,config_hash"
        )?;
        for p in &self.points {
            writeln!(
                out,
                "{},{:.4},{},{},{},{},{},{},{}",
                p.setting(self.axis),
                p.accuracy_percent,
                p.n_train,
                p.n_test,
                seed,
                p.inhibition_level,
                p.total_neurons,
                p.theta,
                config_hash
            )?;
        }
        Ok(())
    }
}

/// Encodes both splits with the bank, fits the classifier on the training
/// features and scores it on the test features.
pub fn evaluate_bank(
    bank: &[EncoderModel],
    train: &DocumentTermMatrix,
    test: &DocumentTermMatrix,
    pipeline: &EvalPipeline,
) -> Result<SweepPoint> {
    let ftrain = encode_documents(bank, train, &pipeline.encode)?;
    let ftest = encode_documents(bank, test, &pipeline.encode)?;
    let clf = LogisticRegression::fit(ftrain.to_array().view(), &ftrain.labels, &pipeline.classifier)?;
    let accuracy = super::evaluate_accuracy(&clf, ftest.to_array().view(), &ftest.labels)?;
    Ok(SweepPoint {
        inhibition_level: pipeline.encode.inhibition_level,
        total_neurons: ftrain.n_cols,
        theta: bank
            .first()
            .and_then(|m| m.prune_mask.as_ref())
            .map_or(0.0, |m| m.theta),
        accuracy_percent: accuracy,
        n_train: ftrain.n_rows,
        n_test: ftest.n_rows,
    })
}

pub fn sweep_inhibition(
    bank: &[EncoderModel],
    train: &DocumentTermMatrix,
    test: &DocumentTermMatrix,
    levels: &[f64],
    pipeline: &EvalPipeline,
) -> Result<SweepResult> {
    let mut points = Vec::with_capacity(levels.len());
    for &level in levels {
        let mut p = *pipeline;
        p.encode.inhibition_level = level;
        let point = evaluate_bank(bank, train, test, &p)?;
        log::info!("inhibition {level}: accuracy {:.2}%", point.accuracy_percent);
        points.push(point);
    }
    let result = SweepResult {
        axis: SweepAxis::Inhibition,
        points,
    };
    if !result.degrades_with_inhibition() {
        log::warn!("accuracy without inhibition is not the best among levels >= 1.5");
    }
    Ok(result)
}

/// Trains one bank per per-encoder neuron count in `sizes`, then evaluates
/// each bank under every pruning level in `thetas` (0 = unpruned).
pub fn sweep_size_pruning(
    train: &DocumentTermMatrix,
    test: &DocumentTermMatrix,
    plan: &SubsetPlan,
    encoder: &EncoderConfig,
    sizes: &[usize],
    thetas: &[f64],
    pipeline: &EvalPipeline,
    parallelism: usize,
) -> Result<SweepResult> {
    let prunes = thetas.iter().map(|&t| PruneConfig::new(t)).collect::<Result<Vec<_>>>()?;
    let mut points = Vec::with_capacity(sizes.len() * thetas.len());
    for &size in sizes {
        let config = EncoderConfig {
            neurons: size,
            ..encoder.clone()
        };
        let bank = train_bank(train, plan, &config, parallelism)?;
        for &prune in &prunes {
            let pruned: Vec<EncoderModel> = bank.iter().map(|m| m.pruned(prune)).collect();
            let mut point = evaluate_bank(&pruned, train, test, pipeline)?;
            point.theta = prune.theta;
            log::info!(
                "{} neurons, theta {}: accuracy {:.2}%",
                point.total_neurons,
                prune.theta,
                point.accuracy_percent
            );
            points.push(point);
        }
    }
    Ok(SweepResult {
        axis: SweepAxis::SizePruning,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(level: f64, acc: f64) -> SweepPoint {
        SweepPoint {
            inhibition_level: level,
            total_neurons: 10,
            theta: 0.0,
            accuracy_percent: acc,
            n_train: 1,
            n_test: 1,
        }
    }

    #[test]
    fn degradation_check() {
        let ok = SweepResult {
            axis: SweepAxis::Inhibition,
            points: vec![point(0.0, 70.0), point(1.0, 75.0), point(1.5, 60.0), point(3.0, 70.0)],
        };
        assert!(ok.degrades_with_inhibition());
        let bad = SweepResult {
            points: vec![point(0.0, 70.0), point(2.0, 71.0)],
            ..ok
        };
        assert!(!bad.degrades_with_inhibition());
    }

    #[test]
    fn csv_rows() {
        let r = SweepResult {
            axis: SweepAxis::SizePruning,
            points: vec![SweepPoint {
                theta: 0.9,
                ..point(0.0, 80.19)
            }],
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf, 7, "abc").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("setting,accuracy_percent,n_train,n_test,seed"));
        assert_eq!(lines[1], "neurons=10;theta=0.9,80.1900,1,1,7,0,10,0.9,abc");
    }
}
