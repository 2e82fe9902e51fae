//! Train-and-score building blocks shared by the commands, the sweep and the
//! acceptance harness.

use asa_core::data::{Benchmark, Split};
use asa_core::metrics::{a_distance, accuracy, DomainAccuracy, MetricsReport, PairDistance, SeedResult};
use asa_core::nn::MiniNet;
use asa_core::train::{self, Hooks, RunLog};
use asa_core::Tensor;

use crate::config::{EvalConfig, RunConfig};
use crate::error::{invalid, Result};

/// Builds the model from the config seed and trains it on the source split.
pub fn train_model(cfg: &RunConfig, data: &Split, hooks: Hooks<'_>) -> Result<(MiniNet, RunLog)> {
    let mut model = MiniNet::build(cfg.model_spec(), cfg.train.seed)?;
    let log = train::train(&mut model, data, &cfg.train, hooks)?;
    Ok((model, log))
}

/// Target splits by name, in the order asked. `None` means every target.
pub fn select_targets<'b>(bench: &'b Benchmark, names: Option<&[String]>) -> Result<Vec<&'b Split>> {
    let Some(names) = names else {
        return Ok(bench.targets.iter().collect());
    };
    if names.len() < 2 {
        return Err(invalid("--domains", "need at least two target domains for mean and std"));
    }
    names
        .iter()
        .map(|n| {
            bench.split(n).ok_or_else(|| {
                let known: Vec<&str> = bench.splits().map(|s| s.name.as_str()).collect();
                invalid("--domains", format!("no split {n:?} (have {})", known.join(", ")))
            })
        })
        .collect()
}

/// Eval-mode features of a split.
pub fn features(model: &MiniNet, split: &Split, eval: &EvalConfig) -> Result<Tensor> {
    Ok(model.infer(&split.images, eval.batch_size)?.1)
}

/// Accuracy on each target plus, if enabled, 𝒜-distance from the source.
pub fn score(model: &MiniNet, source: &Split, targets: &[&Split], seed: u64, eval: &EvalConfig) -> Result<SeedResult> {
    let source_feats = if eval.a_distance {
        Some(features(model, source, eval)?)
    } else {
        None
    };
    let mut accs = Vec::with_capacity(targets.len());
    let mut dists = Vec::new();
    for t in targets {
        if t.is_empty() {
            return Err(invalid("--domains", format!("split {:?} is empty", t.name)));
        }
        let (logits, feats) = model.infer(&t.images, eval.batch_size)?;
        accs.push(DomainAccuracy {
            domain: t.name.clone(),
            accuracy: accuracy(&logits, &t.labels)?,
        });
        if let Some(src) = &source_feats {
            dists.push(PairDistance {
                source: source.name.clone(),
                target: t.name.clone(),
                distance: a_distance(src, &feats, seed, eval.a_distance_config())?,
            });
        }
    }
    Ok(SeedResult::new(seed, accs, dists)?)
}

/// One finished run: trained model, its log and its single-seed report.
pub struct RunOutcome {
    pub model: MiniNet,
    pub log: RunLog,
    pub report: MetricsReport,
}

/// Trains on `bench.train` and scores on every target.
pub fn run(cfg: &RunConfig, bench: &Benchmark, label: &str) -> Result<RunOutcome> {
    let (model, log) = train_model(cfg, &bench.train, Hooks::default())?;
    let targets = select_targets(bench, None)?;
    let result = score(&model, &bench.train, &targets, cfg.train.seed, &cfg.eval)?;
    let report = MetricsReport::new(label, cfg.hash(), vec![result])?;
    Ok(RunOutcome { model, log, report })
}
