//! Cross-domain evaluation: accuracy, mean and spread over target domains,
//! 𝒜-distance between feature sets and a PCA projection for plotting.

mod adistance;
mod pca;
mod report;

pub use adistance::{a_distance, ADistanceConfig};
pub use pca::{pca_project, Pca};
pub use report::{config_hash, DomainAccuracy, MetricsReport, PairDistance, SeedResult, CSV_COLUMNS};

use crate::data::Split;
use crate::nn::MiniNet;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Top-1 accuracy in percent of B×K logits against labels.
pub fn accuracy(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::invalid("evaluation", "empty split"));
    }
    let k = *logits.shape().last().unwrap_or(&0);
    if logits.ndim() != 2 || logits.shape()[0] != labels.len() {
        return Err(Error::invalid(
            "evaluation",
            format!("{} labels for logits of shape {:?}", labels.len(), logits.shape()),
        ));
    }
    let hits = logits
        .data()
        .chunks(k)
        .zip(labels)
        .filter(|(row, &l)| argmax(row) == l)
        .count();
    Ok(100.0 * hits as f64 / labels.len() as f64)
}

/// Eval-mode top-1 accuracy (%) of `model` on `split`.
pub fn evaluate(model: &MiniNet, split: &Split, batch: usize) -> Result<f64> {
    if split.is_empty() {
        return Err(Error::invalid("evaluation", format!("split {:?} is empty", split.name)));
    }
    let (logits, _) = model.infer(&split.images, batch)?;
    accuracy(&logits, &split.labels)
}

/// Mean and sample (N − 1) standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.len() < 2 {
        return Err(Error::invalid(
            "aggregate",
            format!("need at least two domains, got {}", values.len()),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Ok(Aggregate {
        mean,
        std: (ss / (n - 1.0)).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ties_go_to_the_first_class() {
        assert_eq!(argmax(&[1.0, 1.0, 0.5]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn constant_logits_score_chance_on_a_balanced_split() {
        let labels: Vec<usize> = (0..70).map(|i| i % 7).collect();
        let logits = Tensor::zeros(&[70, 7]);
        assert_abs_diff_eq!(accuracy(&logits, &labels).unwrap(), 100.0 / 7.0, epsilon = 1e-12);
    }

    #[test]
    fn perfect_logits_score_100() {
        let labels = [2, 0, 1];
        let mut logits = Tensor::zeros(&[3, 3]);
        for (i, &l) in labels.iter().enumerate() {
            logits.data_mut()[i * 3 + l] = 1.0;
        }
        assert_eq!(accuracy(&logits, &labels).unwrap(), 100.0);
    }

    #[test]
    fn empty_labels_are_rejected() {
        assert!(accuracy(&Tensor::zeros(&[1, 2]), &[]).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let a = aggregate(&[50.0, 50.0, 50.0]).unwrap();
        assert_eq!((a.mean, a.std), (50.0, 0.0));
        let a = aggregate(&[0.0, 100.0]).unwrap();
        assert_eq!(a.mean, 50.0);
        assert_abs_diff_eq!(a.std, 50.0 * 2f64.sqrt(), epsilon = 1e-12);
        assert!(aggregate(&[1.0]).is_err());
    }
}
