//! Feature-statistics perturbation.
//!
//! Every scheme here rewrites the per-instance, per-channel mean and standard
//! deviation of a B×C×H×W feature map through [`adain_replace`], and differs
//! only in how the target statistics are produced:
//!
//! * [`advstyle_forward`]: Gaussian resampling around the instance's own
//!   statistics with learnable per-channel scales Σ_μ, Σ_σ, whose gradient is
//!   reversed so one descent step trains the model and the adversary at once.
//! * [`dsu_forward`]: the same resampling with scales estimated as the batch
//!   standard deviation of the statistics.
//! * [`mixstyle_forward`]: interpolation with a permuted partner's statistics.
//! * [`padain_forward`]: outright swap with a permuted partner's statistics.

mod advstyle;
mod baselines;
mod stats;

pub use advstyle::{
    advstyle_forward, advstyle_with_noise, variant_project, AdvStyleState, Reversal, Variant,
};
pub use baselines::{
    batch_sigma, dsu_forward, dsu_with_noise, mixstyle_forward, mixstyle_with, padain_forward,
    padain_with,
};
pub use stats::{adain_replace, adain_with_stats, channel_stats, floored_stats, normalize, ChannelStats, StatVars};

/// Floor applied to σ(x) before dividing by it.
pub const EPS_FLOOR: f64 = 1e-3;

/// Whether a forward pass trains (perturbations active) or evaluates
/// (perturbations are exact passthroughs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// Random stream used by all stochastic perturbations.
pub type StyleRng = rand_chacha::ChaCha8Rng;

pub(crate) fn standard_normal(rng: &mut StyleRng, shape: &[usize]) -> crate::tensor::Tensor {
    use rand::Rng;
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    crate::tensor::Tensor::new(shape.to_vec(), data).expect("shape matches sample count")
}
