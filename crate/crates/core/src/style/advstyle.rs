use serde::{Deserialize, Serialize};

use super::baselines::batch_sigma;
use super::stats::{adain_with_stats, floored_stats};
use super::{standard_normal, Mode, StyleRng, EPS_FLOOR};
use crate::tensor::{Result, Tape, Tensor, TensorError, Var};

/// Which part of the perturbation scale is learned adversarially.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Σ is learned outright: direction and intensity.
    #[default]
    Full,
    /// Learned direction, norm taken from the batch estimate.
    DirectionOnly,
    /// Direction from the batch estimate, learned non-negative norm.
    IntensityOnly,
}

/// Whether the learnable scales pass through a gradient reversal layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reversal {
    /// Backward multiplies the scale gradients by −λ.
    Reverse,
    /// Plain identity; used when the ascent on Σ is done explicitly.
    Identity,
}

/// One AdvStyle module bound to a tape.
///
/// For [`Variant::Full`] and [`Variant::DirectionOnly`] the scale vars are
/// length-C vectors; for [`Variant::IntensityOnly`] they are scalars.
#[derive(Debug, Clone, Copy)]
pub struct AdvStyleState {
    pub sigma_mu: Var,
    pub sigma_sigma: Var,
    pub lambda: f64,
    pub variant: Variant,
}

/// Training: resamples each instance's channel statistics as
/// `μ + ε_μ·GRL(Σ_μ)`, `σ + ε_σ·GRL(Σ_σ)` with fresh `ε ~ N(0, 1)` of shape
/// B×C and re-styles `x` with them. Evaluation: returns `x` itself.
pub fn advstyle_forward(
    tape: &mut Tape,
    x: Var,
    state: &AdvStyleState,
    mode: Mode,
    reversal: Reversal,
    rng: &mut StyleRng,
) -> Result<Var> {
    if mode == Mode::Eval {
        return Ok(x);
    }
    let bc = &tape.shape(x)[..2];
    let shape = [bc[0], bc[1]];
    let eps_mu = standard_normal(rng, &shape);
    let eps_sigma = standard_normal(rng, &shape);
    advstyle_with_noise(tape, x, state, reversal, &eps_mu, &eps_sigma)
}

/// [`advstyle_forward`] in training mode with the noise supplied.
pub fn advstyle_with_noise(
    tape: &mut Tape,
    x: Var,
    state: &AdvStyleState,
    reversal: Reversal,
    eps_mu: &Tensor,
    eps_sigma: &Tensor,
) -> Result<Var> {
    let stats = floored_stats(tape, x, EPS_FLOOR)?;
    let bc = tape.shape(stats.mu).to_vec();
    for eps in [eps_mu, eps_sigma] {
        if eps.shape() != bc.as_slice() {
            return Err(TensorError::ShapeMismatch {
                op: "advstyle noise",
                lhs: eps.shape().to_vec(),
                rhs: bc.clone(),
            });
        }
    }
    let reversed = |tape: &mut Tape, v: Var| match reversal {
        Reversal::Reverse => tape.grl(v, state.lambda),
        Reversal::Identity => Ok(v),
    };
    let learned_mu = reversed(tape, state.sigma_mu)?;
    let learned_sigma = reversed(tape, state.sigma_sigma)?;
    let (scale_mu, scale_sigma) = match state.variant {
        Variant::Full => (learned_mu, learned_sigma),
        variant => {
            let (batch_mu, batch_sig) = batch_sigma(tape, stats)?;
            (
                variant_project(tape, variant, learned_mu, batch_mu)?,
                variant_project(tape, variant, learned_sigma, batch_sig)?,
            )
        }
    };
    let mu_adv = perturb(tape, stats.mu, eps_mu, scale_mu, &bc)?;
    let sigma_adv = perturb(tape, stats.sigma, eps_sigma, scale_sigma, &bc)?;
    adain_with_stats(tape, x, stats, mu_adv, sigma_adv, EPS_FLOOR)
}

/// `base + eps · scale`, with a length-C scale broadcast over the batch.
pub(crate) fn perturb(tape: &mut Tape, base: Var, eps: &Tensor, scale: Var, bc: &[usize]) -> Result<Var> {
    let eps = tape.constant(eps.clone());
    let scale = tape.broadcast_to(scale, bc)?;
    let offset = tape.mul(eps, scale)?;
    tape.add(base, offset)
}

fn l2_norm(tape: &mut Tape, v: Var) -> Result<Var> {
    let sq = tape.mul(v, v)?;
    let total = tape.sum_all(sq);
    tape.sqrt(total)
}

/// Effective scale of a Σ variant.
///
/// * `DirectionOnly`: `learned / ‖learned‖ · ‖batch‖`; a zero learned vector
///   yields `batch`.
/// * `IntensityOnly`: `batch / ‖batch‖ · |learned|` with scalar `learned`; a
///   zero batch vector yields `batch`.
/// * `Full`: `learned`.
pub fn variant_project(tape: &mut Tape, variant: Variant, learned: Var, batch: Var) -> Result<Var> {
    let channels = tape.shape(batch).to_vec();
    match variant {
        Variant::Full => Ok(learned),
        Variant::DirectionOnly => {
            if tape.shape(learned) != channels.as_slice() {
                return Err(TensorError::ShapeMismatch {
                    op: "variant_project",
                    lhs: tape.shape(learned).to_vec(),
                    rhs: channels,
                });
            }
            let learned_norm = l2_norm(tape, learned)?;
            if tape.value(learned_norm).data()[0] == 0.0 {
                return Ok(batch);
            }
            let batch_norm = l2_norm(tape, batch)?;
            let ratio = tape.div(batch_norm, learned_norm)?;
            let ratio = tape.broadcast_to(ratio, &channels)?;
            tape.mul(learned, ratio)
        }
        Variant::IntensityOnly => {
            if !tape.shape(learned).is_empty() {
                return Err(TensorError::ShapeMismatch {
                    op: "variant_project",
                    lhs: tape.shape(learned).to_vec(),
                    rhs: vec![],
                });
            }
            let batch_norm = l2_norm(tape, batch)?;
            if tape.value(batch_norm).data()[0] == 0.0 {
                return Ok(batch);
            }
            let intensity = tape.abs(learned);
            let ratio = tape.div(intensity, batch_norm)?;
            let ratio = tape.broadcast_to(ratio, &channels)?;
            tape.mul(batch, ratio)
        }
    }
}
