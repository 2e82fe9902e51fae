use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{aggregate, Aggregate};
use crate::{Error, Result};

/// First 16 hex digits of the SHA-256 of a canonical config document.
pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest[..8].iter().fold(String::with_capacity(16), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainAccuracy {
    pub domain: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub source: String,
    pub target: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub accuracies: Vec<DomainAccuracy>,
    pub mean: f64,
    pub std: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub a_distance: Vec<PairDistance>,
}

impl SeedResult {
    pub fn new(seed: u64, accuracies: Vec<DomainAccuracy>, a_distance: Vec<PairDistance>) -> Result<Self> {
        for a in &accuracies {
            if !(0.0..=100.0).contains(&a.accuracy) {
                return Err(Error::invalid("report", format!("{} accuracy {} outside [0, 100]", a.domain, a.accuracy)));
            }
        }
        for d in &a_distance {
            if !(0.0..=2.0).contains(&d.distance) {
                return Err(Error::invalid("report", format!("distance {} outside [0, 2]", d.distance)));
            }
        }
        let values: Vec<f64> = accuracies.iter().map(|a| a.accuracy).collect();
        let Aggregate { mean, std } = aggregate(&values)?;
        Ok(Self { seed, accuracies, mean, std, a_distance })
    }
}

/// Accuracy over target domains, pooled across seeds.
///
/// `accuracies` holds the per-domain mean over seeds; `mean` and `std` are
/// taken across those domain means. Per-seed figures live in `seeds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub label: String,
    pub config_hash: String,
    pub accuracies: Vec<DomainAccuracy>,
    pub mean: f64,
    pub std: f64,
    pub seeds: Vec<SeedResult>,
    pub a_distance: Vec<PairDistance>,
}

/// Frozen CSV columns. Per-domain values are packed as `name=value` pairs
/// joined by `;` so every run shares one header.
pub const CSV_COLUMNS: [&str; 8] = [
    "label",
    "config_hash",
    "seeds",
    "mean",
    "std",
    "accuracies",
    "seed_means",
    "a_distance",
];

impl MetricsReport {
    /// Pools per-seed results. Every seed must cover the same domains and
    /// distance pairs in the same order.
    pub fn new(label: impl Into<String>, config_hash: String, seeds: Vec<SeedResult>) -> Result<Self> {
        let first = seeds.first().ok_or_else(|| Error::invalid("report", "no seeds"))?;
        let names: Vec<&str> = first.accuracies.iter().map(|a| a.domain.as_str()).collect();
        let pairs: Vec<(&str, &str)> =
            first.a_distance.iter().map(|d| (d.source.as_str(), d.target.as_str())).collect();
        for s in &seeds {
            let n: Vec<&str> = s.accuracies.iter().map(|a| a.domain.as_str()).collect();
            let p: Vec<(&str, &str)> = s.a_distance.iter().map(|d| (d.source.as_str(), d.target.as_str())).collect();
            if n != names || p != pairs {
                return Err(Error::invalid("report", format!("seed {} covers different domains", s.seed)));
            }
        }
        let k = seeds.len() as f64;
        let accuracies: Vec<DomainAccuracy> = names
            .iter()
            .enumerate()
            .map(|(i, n)| DomainAccuracy {
                domain: n.to_string(),
                accuracy: seeds.iter().map(|s| s.accuracies[i].accuracy).sum::<f64>() / k,
            })
            .collect();
        let a_distance = pairs
            .iter()
            .enumerate()
            .map(|(i, (s, t))| PairDistance {
                source: s.to_string(),
                target: t.to_string(),
                distance: seeds.iter().map(|r| r.a_distance[i].distance).sum::<f64>() / k,
            })
            .collect();
        let values: Vec<f64> = accuracies.iter().map(|a| a.accuracy).collect();
        let Aggregate { mean, std } = aggregate(&values)?;
        Ok(Self {
            label: label.into(),
            config_hash,
            accuracies,
            mean,
            std,
            seeds,
            a_distance,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid("report", e.to_string()))
    }

    pub fn csv_row(&self) -> [String; 8] {
        let join = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>().join(";");
        [
            self.label.clone(),
            self.config_hash.clone(),
            join(&mut self.seeds.iter().map(|s| s.seed.to_string())),
            format!("{:.4}", self.mean),
            format!("{:.4}", self.std),
            join(&mut self.accuracies.iter().map(|a| format!("{}={:.4}", a.domain, a.accuracy))),
            join(&mut self.seeds.iter().map(|s| format!("{}={:.4}", s.seed, s.mean))),
            join(&mut self.a_distance.iter().map(|d| format!("{}->{}={:.4}", d.source, d.target, d.distance))),
        ]
    }

    /// Header plus one row per report.
    pub fn to_csv<'a>(reports: impl IntoIterator<Item = &'a MetricsReport>) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::invalid("csv", e.to_string());
        w.write_record(CSV_COLUMNS).map_err(io)?;
        for r in reports {
            w.write_record(r.csv_row()).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid("csv", e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
