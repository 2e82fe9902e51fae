use crate::tensor::{Result, Tape, Tensor, TensorError, Var};

/// Per-instance, per-channel mean and standard deviation (each B×C).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub mu: Tensor,
    pub sigma: Tensor,
}

/// Tape handles of [`ChannelStats`].
#[derive(Debug, Clone, Copy)]
pub struct StatVars {
    pub mu: Var,
    pub sigma: Var,
}

impl StatVars {
    pub fn values(&self, tape: &Tape) -> ChannelStats {
        ChannelStats {
            mu: tape.value(self.mu).clone(),
            sigma: tape.value(self.sigma).clone(),
        }
    }
}

fn feature_dims(tape: &Tape, x: Var, op: &'static str) -> Result<[usize; 4]> {
    match *tape.shape(x) {
        [b, c, h, w] => Ok([b, c, h, w]),
        ref other => Err(TensorError::Invalid {
            op,
            msg: format!("expected a B×C×H×W feature map, got {other:?}"),
        }),
    }
}

/// Spatial mean and population standard deviation of every channel.
pub fn channel_stats(tape: &mut Tape, x: Var) -> Result<StatVars> {
    let [b, c, h, w] = feature_dims(tape, x, "channel_stats")?;
    let flat = tape.reshape(x, &[b, c, h * w])?;
    let mu = tape.mean_axis(flat, 2)?;
    let var = tape.var_axis(flat, 2)?;
    let sigma = tape.sqrt(var)?;
    Ok(StatVars { mu, sigma })
}

/// [`channel_stats`] with σ raised to at least `eps_floor`. Perturbations
/// built on these statistics reduce to the identity when they add nothing,
/// even on near-constant channels.
pub fn floored_stats(tape: &mut Tape, x: Var, eps_floor: f64) -> Result<StatVars> {
    let stats = channel_stats(tape, x)?;
    let sigma = tape.clamp_min(stats.sigma, eps_floor);
    Ok(StatVars { mu: stats.mu, sigma })
}

/// `(x − μ(x)) / max(σ(x), eps_floor)`, the inner normalization of AdaIN.
pub fn normalize(tape: &mut Tape, x: Var, eps_floor: f64) -> Result<Var> {
    let [b, c, h, w] = feature_dims(tape, x, "normalize")?;
    let stats = channel_stats(tape, x)?;
    let shape = [b, c, h, w];
    let mu = tape.broadcast_to(stats.mu, &shape)?;
    let centered = tape.sub(x, mu)?;
    let floored = tape.clamp_min(stats.sigma, eps_floor);
    let denom = tape.broadcast_to(floored, &shape)?;
    tape.div(centered, denom)
}

/// Re-styles `x` so each channel takes the target statistics:
/// `target_sigma · (x − μ(x)) / max(σ(x), eps_floor) + target_mu`.
pub fn adain_replace(
    tape: &mut Tape,
    x: Var,
    target_mu: Var,
    target_sigma: Var,
    eps_floor: f64,
) -> Result<Var> {
    let stats = channel_stats(tape, x)?;
    adain_with_stats(tape, x, stats, target_mu, target_sigma, eps_floor)
}

/// [`adain_replace`] with the statistics of `x` already on the tape.
pub fn adain_with_stats(
    tape: &mut Tape,
    x: Var,
    stats: StatVars,
    target_mu: Var,
    target_sigma: Var,
    eps_floor: f64,
) -> Result<Var> {
    let [b, c, h, w] = feature_dims(tape, x, "adain_replace")?;
    for v in [target_mu, target_sigma] {
        if tape.shape(v) != [b, c] {
            return Err(TensorError::ShapeMismatch {
                op: "adain_replace",
                lhs: tape.shape(v).to_vec(),
                rhs: vec![b, c],
            });
        }
    }
    let shape = [b, c, h, w];
    let floored = tape.clamp_min(stats.sigma, eps_floor);
    let gain = tape.div(target_sigma, floored)?;
    let mu = tape.broadcast_to(stats.mu, &shape)?;
    let centered = tape.sub(x, mu)?;
    let gain = tape.broadcast_to(gain, &shape)?;
    let scaled = tape.mul(centered, gain)?;
    let shift = tape.broadcast_to(target_mu, &shape)?;
    tape.add(scaled, shift)
}
