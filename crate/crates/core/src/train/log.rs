use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::nn::ModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean perturbed training loss over the epoch.
    pub loss: f64,
    /// Training accuracy (%) on the perturbed forward passes.
    pub accuracy: f64,
    pub lr: f64,
    /// L2 norm of every Σ tensor at the end of the epoch.
    pub sigma_norms: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub steps: usize,
    pub final_loss: f64,
    pub final_accuracy: f64,
    pub model: ModelSpec,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub epochs: Vec<EpochRecord>,
    summary: RunSummary,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Line<'a> {
    Epoch(&'a EpochRecord),
    Summary(&'a RunSummary),
}

impl RunLog {
    pub(crate) fn new(seed: u64, model: ModelSpec, train: TrainConfig) -> Self {
        Self {
            epochs: Vec::new(),
            summary: RunSummary {
                seed,
                steps: 0,
                final_loss: f64::NAN,
                final_accuracy: f64::NAN,
                model,
                train,
            },
        }
    }

    pub(crate) fn finish(&mut self, steps: usize) {
        self.summary.steps = steps;
        if let Some(last) = self.epochs.last() {
            self.summary.final_loss = last.loss;
            self.summary.final_accuracy = last.accuracy;
        }
    }

    pub fn summary(&self) -> &RunSummary {
        &self.summary
    }

    /// One JSON object per epoch, then the summary, each on its own line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            out += &serde_json::to_string(&Line::Epoch(e)).expect("epoch record serializes");
            out.push('\n');
        }
        out += &serde_json::to_string(&Line::Summary(&self.summary)).expect("summary serializes");
        out.push('\n');
        out
    }

    /// Σ norms over time: one `(epoch, name, norm)` per record.
    pub fn sigma_trace(&self) -> impl Iterator<Item = (usize, &str, f64)> {
        self.epochs
            .iter()
            .flat_map(|e| e.sigma_norms.iter().map(move |(n, &v)| (e.epoch, n.as_str(), v)))
    }
}
