//! Optimizers and the two adversarial training procedures.
//!
//! [`train_grl`] takes one descent step on every parameter; the reversal layer
//! in front of Σ turns that step into ascent for the perturbation scales.
//! [`train_iterative`] alternates an explicit ascent on Σ (θ frozen) with a
//! descent on θ (Σ frozen).

mod log;
mod optim;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

pub use log::{EpochRecord, RunLog, RunSummary};
pub use optim::{Direction, Optimizer, OptimizerConfig, OptimizerKind};

use crate::data::Split;
use crate::nn::{GradScope, Method, MiniNet, ParamTag, Pass};
use crate::style::{Mode, Reversal, StyleRng};
use crate::tensor::{Tape, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AsaMode {
    #[default]
    Grl,
    Iterative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    /// θ learning rate at epoch 0.
    pub lr: f64,
    /// Σ learning rate of the iterative ascent. Zero freezes the adversary.
    pub sigma_lr: f64,
    /// Cosine decay of both rates to zero over the run.
    pub cosine: bool,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub asa_mode: AsaMode,
    /// Ascent steps on Σ per descent step on θ.
    pub inner_steps: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 64,
            optimizer: OptimizerKind::SgdMomentum,
            lr: 0.01,
            sigma_lr: 0.05,
            cosine: true,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 5e-4,
            asa_mode: AsaMode::Grl,
            inner_steps: 1,
            seed: 0,
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::invalid("train config", msg)
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(bad("epochs must be ≥ 1"));
        }
        if self.batch_size == 0 {
            return Err(bad("batch_size must be ≥ 1"));
        }
        if self.inner_steps == 0 {
            return Err(bad("inner_steps must be ≥ 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(bad(format!("lr = {} (need > 0)", self.lr)));
        }
        if !(self.sigma_lr >= 0.0 && self.sigma_lr.is_finite()) {
            return Err(bad(format!("sigma_lr = {} (need ≥ 0)", self.sigma_lr)));
        }
        for (name, v) in [("momentum", self.momentum), ("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(bad(format!("{name} = {v} (need 0 ≤ v < 1)")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(bad("adam_eps must be > 0"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(bad(format!("weight_decay = {} (need ≥ 0)", self.weight_decay)));
        }
        Ok(())
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            kind: self.optimizer,
            momentum: self.momentum,
            beta1: self.beta1,
            beta2: self.beta2,
            adam_eps: self.adam_eps,
            weight_decay: self.weight_decay,
        }
    }

    /// Rate for `epoch` (0-based) starting from `base`.
    pub fn schedule(&self, base: f64, epoch: usize) -> f64 {
        if self.cosine {
            let t = epoch as f64 / self.epochs as f64;
            base * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
        } else {
            base
        }
    }
}

/// Independent random streams of one run, all derived from the config seed.
pub struct RunStreams {
    /// Mini-batch order.
    pub data: StyleRng,
    /// Perturbation noise of the descent step.
    pub noise: StyleRng,
    /// Perturbation noise of the iterative ascent steps.
    pub adversary: StyleRng,
}

impl RunStreams {
    pub fn new(seed: u64) -> Self {
        let stream = |i| {
            let mut rng = StyleRng::seed_from_u64(seed);
            rng.set_stream(i);
            rng
        };
        Self {
            data: stream(1),
            noise: stream(2),
            adversary: stream(3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub correct: usize,
}

fn count_correct(logits: &Tensor, labels: &[usize]) -> usize {
    let k = logits.shape()[1];
    logits
        .data()
        .chunks(k)
        .zip(labels)
        .filter(|(row, &l)| crate::metrics::argmax(row) == l)
        .count()
}

/// Perturbed forward pass, cross-entropy and backward with `scope` receiving
/// gradients. Returns the loss and per-parameter gradients.
pub fn loss_and_grads(
    model: &MiniNet,
    images: &Tensor,
    labels: &[usize],
    scope: GradScope,
    reversal: Reversal,
    rng: &mut StyleRng,
) -> Result<(StepStats, Vec<Option<Tensor>>)> {
    let mut tape = Tape::new();
    let params = model.bind(&mut tape, scope);
    let x = tape.constant(images.clone());
    let mut pass = Pass {
        mode: Mode::Train,
        reversal,
        rng,
    };
    let out = model.forward(&mut tape, &params, x, &mut pass)?;
    let loss = tape.softmax_cross_entropy(out.logits, labels)?;
    let value = tape.value(loss).data()[0];
    let correct = count_correct(tape.value(out.logits), labels);
    if value.is_finite() {
        tape.backward(loss)?;
    }
    let grads = params.vars().iter().map(|&v| tape.grad(v)).collect();
    Ok((StepStats { loss: value, correct }, grads))
}

fn finite(stats: StepStats, step: usize, epoch: usize) -> Result<StepStats> {
    if stats.loss.is_finite() {
        Ok(stats)
    } else {
        Err(Error::NonFiniteLoss {
            step,
            epoch,
            loss: stats.loss,
        })
    }
}

/// One joint step: descent on θ and Σ, with Σ's gradient reversed.
pub fn grl_step(
    model: &mut MiniNet,
    opt: &mut Optimizer,
    images: &Tensor,
    labels: &[usize],
    lr: f64,
    rng: &mut StyleRng,
) -> Result<StepStats> {
    let (stats, grads) = loss_and_grads(model, images, labels, GradScope::All, Reversal::Reverse, rng)?;
    if stats.loss.is_finite() {
        let all: Vec<usize> = (0..model.registry().len()).collect();
        opt.step(model.registry_mut(), &all, &grads, lr, Direction::Descent)?;
    }
    Ok(stats)
}

/// Max phase: `k` ascent steps on Σ with θ frozen, fresh noise each time.
pub fn ascent_phase(
    model: &mut MiniNet,
    opt: &mut Optimizer,
    images: &Tensor,
    labels: &[usize],
    sigma_lr: f64,
    k: usize,
    rng: &mut StyleRng,
) -> Result<StepStats> {
    let sigma = model.registry().indices(ParamTag::Sigma);
    let mut last = StepStats { loss: 0.0, correct: 0 };
    for _ in 0..k {
        let scope = GradScope::Only(ParamTag::Sigma);
        let (stats, grads) = loss_and_grads(model, images, labels, scope, Reversal::Identity, rng)?;
        last = stats;
        if !stats.loss.is_finite() {
            break;
        }
        opt.step(model.registry_mut(), &sigma, &grads, sigma_lr, Direction::Ascent)?;
    }
    Ok(last)
}

/// Min phase: one descent step on θ with Σ frozen.
pub fn descent_phase(
    model: &mut MiniNet,
    opt: &mut Optimizer,
    images: &Tensor,
    labels: &[usize],
    lr: f64,
    rng: &mut StyleRng,
) -> Result<StepStats> {
    let theta = model.registry().indices(ParamTag::Theta);
    let scope = GradScope::Only(ParamTag::Theta);
    let (stats, grads) = loss_and_grads(model, images, labels, scope, Reversal::Identity, rng)?;
    if stats.loss.is_finite() {
        opt.step(model.registry_mut(), &theta, &grads, lr, Direction::Descent)?;
    }
    Ok(stats)
}

/// Per-run extras that do not affect the trajectory.
#[derive(Default)]
pub struct Hooks<'a> {
    /// Record wall-clock seconds per epoch. Off by default so logs of repeated
    /// runs are byte-identical.
    pub wall_clock: bool,
    pub on_epoch: Option<&'a mut dyn FnMut(&EpochRecord, &MiniNet) -> Result<()>>,
}

fn check_data(model: &MiniNet, data: &Split) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid("training data", format!("split {:?} is empty", data.name)));
    }
    let k = model.spec().backbone.classes;
    if let Some(l) = data.labels.iter().find(|&&l| l >= k) {
        return Err(Error::invalid("training data", format!("label {l} out of range for {k} classes")));
    }
    Ok(())
}

fn run(model: &mut MiniNet, data: &Split, cfg: &TrainConfig, mode: AsaMode, hooks: Hooks<'_>) -> Result<RunLog> {
    cfg.validate()?;
    check_data(model, data)?;
    let Hooks { wall_clock, mut on_epoch } = hooks;
    let mut streams = RunStreams::new(cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer_config(), model.registry().len());
    let mut log = RunLog::new(cfg.seed, model.spec().clone(), cfg.clone());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let lr = cfg.schedule(cfg.lr, epoch);
        let sigma_lr = cfg.schedule(cfg.sigma_lr, epoch);
        order.shuffle(&mut streams.data);
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0, 0);
        for batch in order.chunks(cfg.batch_size) {
            let (images, labels) = data.gather(batch);
            let stats = match mode {
                AsaMode::Grl => grl_step(model, &mut opt, &images, &labels, lr, &mut streams.noise)?,
                AsaMode::Iterative => {
                    let k = cfg.inner_steps;
                    let adv = ascent_phase(model, &mut opt, &images, &labels, sigma_lr, k, &mut streams.adversary)?;
                    finite(adv, step, epoch)?;
                    descent_phase(model, &mut opt, &images, &labels, lr, &mut streams.noise)?
                }
            };
            let stats = finite(stats, step, epoch)?;
            loss_sum += stats.loss * labels.len() as f64;
            correct += stats.correct;
            seen += labels.len();
            step += 1;
        }
        let record = EpochRecord {
            epoch,
            loss: loss_sum / seen as f64,
            accuracy: 100.0 * correct as f64 / seen as f64,
            lr,
            sigma_norms: model.registry().sigma_norms().into_iter().collect(),
            wall_clock_s: wall_clock.then(|| started.elapsed().as_secs_f64()),
        };
        if let Some(f) = on_epoch.as_mut() {
            f(&record, model)?;
        }
        log.epochs.push(record);
    }
    log.finish(step);
    Ok(log)
}

/// End-to-end training with the reversal layer. Works for every method; for
/// the baselines and ERM there are no Σ parameters.
pub fn train_grl(model: &mut MiniNet, data: &Split, cfg: &TrainConfig) -> Result<RunLog> {
    train_grl_with(model, data, cfg, Hooks::default())
}

pub fn train_grl_with(model: &mut MiniNet, data: &Split, cfg: &TrainConfig, hooks: Hooks<'_>) -> Result<RunLog> {
    if cfg.asa_mode != AsaMode::Grl {
        return Err(bad("train_grl needs asa_mode = \"grl\""));
    }
    run(model, data, cfg, AsaMode::Grl, hooks)
}

/// Alternating minimax: ascent on Σ, then descent on θ, every mini-batch.
pub fn train_iterative(model: &mut MiniNet, data: &Split, cfg: &TrainConfig) -> Result<RunLog> {
    train_iterative_with(model, data, cfg, Hooks::default())
}

pub fn train_iterative_with(
    model: &mut MiniNet,
    data: &Split,
    cfg: &TrainConfig,
    hooks: Hooks<'_>,
) -> Result<RunLog> {
    if cfg.asa_mode != AsaMode::Iterative {
        return Err(bad("train_iterative needs asa_mode = \"iterative\""));
    }
    if model.spec().method.kind != Method::AdvStyle {
        return Err(Error::invalid(
            "model spec",
            "iterative training needs method.kind = \"advstyle\"",
        ));
    }
    run(model, data, cfg, AsaMode::Iterative, hooks)
}

/// Dispatches on `cfg.asa_mode`.
pub fn train(model: &mut MiniNet, data: &Split, cfg: &TrainConfig, hooks: Hooks<'_>) -> Result<RunLog> {
    match cfg.asa_mode {
        AsaMode::Grl => train_grl_with(model, data, cfg, hooks),
        AsaMode::Iterative => train_iterative_with(model, data, cfg, hooks),
    }
}
