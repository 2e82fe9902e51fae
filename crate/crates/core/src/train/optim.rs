use serde::{Deserialize, Serialize};

use crate::nn::{ParamTag, ParameterRegistry};
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    SgdMomentum,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// L2 coefficient; never applied to Σ.
    pub weight_decay: f64,
}

#[derive(Debug, Clone)]
enum Slot {
    Sgd { velocity: Vec<f64> },
    Adam { m: Vec<f64>, v: Vec<f64>, t: i32 },
}

/// Per-parameter optimizer state, indexed like the registry.
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    slots: Vec<Option<Slot>>,
}

/// Whether an update lowers or raises the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Descent,
    Ascent,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig, params: usize) -> Self {
        Self {
            cfg,
            slots: vec![None; params],
        }
    }

    /// Updates `registry[i]` for every `i` in `indices` using `grads[i]`.
    ///
    /// SGD: `v ← m·v + g; p ← p − lr·(v + wd·p)`. Adam adds `wd·p` to `g` and
    /// follows the bias-corrected recurrences. Ascent negates `g`; decay is
    /// skipped for Σ.
    pub fn step(
        &mut self,
        registry: &mut ParameterRegistry,
        indices: &[usize],
        grads: &[Option<Tensor>],
        lr: f64,
        direction: Direction,
    ) -> Result<()> {
        let sign = match direction {
            Direction::Descent => 1.0,
            Direction::Ascent => -1.0,
        };
        for &i in indices {
            let param = registry.get(i);
            let g = grads.get(i).and_then(Option::as_ref).ok_or_else(|| {
                Error::invalid("optimizer step", format!("no gradient for trainable parameter {}", param.name))
            })?;
            if g.shape() != param.value.shape() {
                return Err(Error::invalid(
                    "optimizer step",
                    format!("{}: gradient shape {:?} vs {:?}", param.name, g.shape(), param.value.shape()),
                ));
            }
            let wd = if param.tag == ParamTag::Sigma { 0.0 } else { self.cfg.weight_decay };
            let n = g.numel();
            let cfg = self.cfg;
            let slot = self.slots[i].get_or_insert_with(|| match cfg.kind {
                OptimizerKind::SgdMomentum => Slot::Sgd { velocity: vec![0.0; n] },
                OptimizerKind::Adam => Slot::Adam {
                    m: vec![0.0; n],
                    v: vec![0.0; n],
                    t: 0,
                },
            });
            let p = registry.value_mut(i).data_mut();
            match slot {
                Slot::Sgd { velocity } => {
                    for ((p, v), &g) in p.iter_mut().zip(velocity.iter_mut()).zip(g.data()) {
                        *v = cfg.momentum * *v + sign * g;
                        *p -= lr * (*v + wd * *p);
                    }
                }
                Slot::Adam { m, v, t } => {
                    *t += 1;
                    let c1 = 1.0 - cfg.beta1.powi(*t);
                    let c2 = 1.0 - cfg.beta2.powi(*t);
                    for (((p, m), v), &g) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g.data()) {
                        let g = sign * g + wd * *p;
                        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + cfg.adam_eps);
                    }
                }
            }
        }
        Ok(())
    }
}
