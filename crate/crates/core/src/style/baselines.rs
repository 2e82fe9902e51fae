//! Batch-statistics perturbations: DSU, MixStyle and pAdaIN.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::advstyle::perturb;
use super::stats::{adain_with_stats, floored_stats, StatVars};
use super::{standard_normal, Mode, StyleRng, EPS_FLOOR};
use crate::tensor::{Result, Tape, Tensor, TensorError, Var};

/// Population standard deviation over the batch of μ(x) and σ(x), per channel.
pub fn batch_sigma(tape: &mut Tape, stats: StatVars) -> Result<(Var, Var)> {
    let var_mu = tape.var_axis(stats.mu, 0)?;
    let var_sigma = tape.var_axis(stats.sigma, 0)?;
    Ok((tape.sqrt(var_mu)?, tape.sqrt(var_sigma)?))
}

fn batch_and_channels(tape: &Tape, x: Var) -> Result<(usize, usize)> {
    match *tape.shape(x) {
        [b, c, _, _] => Ok((b, c)),
        ref other => Err(TensorError::Invalid {
            op: "style perturbation",
            msg: format!("expected a B×C×H×W feature map, got {other:?}"),
        }),
    }
}

/// Fires with probability `p`; batches smaller than two never fire.
fn fires(tape: &Tape, x: Var, mode: Mode, p: f64, rng: &mut StyleRng) -> Result<bool> {
    let (b, _) = batch_and_channels(tape, x)?;
    if mode == Mode::Eval || b < 2 {
        return Ok(false);
    }
    Ok(rng.random::<f64>() < p)
}

/// DSU: Gaussian resampling of the statistics with batch-estimated scales.
pub fn dsu_forward(tape: &mut Tape, x: Var, p: f64, mode: Mode, rng: &mut StyleRng) -> Result<Var> {
    if !fires(tape, x, mode, p, rng)? {
        return Ok(x);
    }
    let (b, c) = batch_and_channels(tape, x)?;
    let eps_mu = standard_normal(rng, &[b, c]);
    let eps_sigma = standard_normal(rng, &[b, c]);
    dsu_with_noise(tape, x, &eps_mu, &eps_sigma)
}

pub fn dsu_with_noise(tape: &mut Tape, x: Var, eps_mu: &Tensor, eps_sigma: &Tensor) -> Result<Var> {
    let stats = floored_stats(tape, x, EPS_FLOOR)?;
    let bc = tape.shape(stats.mu).to_vec();
    let (scale_mu, scale_sigma) = batch_sigma(tape, stats)?;
    let mu_t = perturb(tape, stats.mu, eps_mu, scale_mu, &bc)?;
    let sigma_t = perturb(tape, stats.sigma, eps_sigma, scale_sigma, &bc)?;
    adain_with_stats(tape, x, stats, mu_t, sigma_t, EPS_FLOOR)
}

fn permutation(rng: &mut StyleRng, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// MixStyle: interpolates each instance's statistics with those of a random
/// partner, with per-instance weights drawn from Beta(alpha, alpha).
pub fn mixstyle_forward(
    tape: &mut Tape,
    x: Var,
    alpha: f64,
    p: f64,
    mode: Mode,
    rng: &mut StyleRng,
) -> Result<Var> {
    if !fires(tape, x, mode, p, rng)? {
        return Ok(x);
    }
    let (b, _) = batch_and_channels(tape, x)?;
    let beta = Beta::new(alpha, alpha).map_err(|e| TensorError::Invalid {
        op: "mixstyle",
        msg: format!("alpha {alpha}: {e}"),
    })?;
    let weights: Vec<f64> = (0..b).map(|_| beta.sample(rng)).collect();
    let perm = permutation(rng, b);
    mixstyle_with(tape, x, &weights, &perm)
}

/// Target statistics `w_b · stats(x_b) + (1 − w_b) · stats(x_perm[b])`.
pub fn mixstyle_with(tape: &mut Tape, x: Var, weights: &[f64], perm: &[usize]) -> Result<Var> {
    let (b, c) = batch_and_channels(tape, x)?;
    if weights.len() != b || perm.len() != b {
        return Err(TensorError::Invalid {
            op: "mixstyle",
            msg: format!("need {b} weights and permutation entries, got {} and {}", weights.len(), perm.len()),
        });
    }
    let stats = floored_stats(tape, x, EPS_FLOOR)?;
    let own: Vec<f64> = weights.iter().flat_map(|&w| std::iter::repeat_n(w, c)).collect();
    let other: Vec<f64> = own.iter().map(|w| 1.0 - w).collect();
    let own = tape.constant(Tensor::new(vec![b, c], own)?);
    let other = tape.constant(Tensor::new(vec![b, c], other)?);
    let mix = |tape: &mut Tape, v: Var| -> Result<Var> {
        let partner = tape.gather_rows(v, perm)?;
        let a = tape.mul(own, v)?;
        let b = tape.mul(other, partner)?;
        tape.add(a, b)
    };
    let mu_t = mix(tape, stats.mu)?;
    let sigma_t = mix(tape, stats.sigma)?;
    adain_with_stats(tape, x, stats, mu_t, sigma_t, EPS_FLOOR)
}

/// pAdaIN: swaps each instance's statistics with those of a random partner.
pub fn padain_forward(tape: &mut Tape, x: Var, p: f64, mode: Mode, rng: &mut StyleRng) -> Result<Var> {
    if !fires(tape, x, mode, p, rng)? {
        return Ok(x);
    }
    let (b, _) = batch_and_channels(tape, x)?;
    let perm = permutation(rng, b);
    padain_with(tape, x, &perm)
}

pub fn padain_with(tape: &mut Tape, x: Var, perm: &[usize]) -> Result<Var> {
    let stats = floored_stats(tape, x, EPS_FLOOR)?;
    let mu_t = tape.gather_rows(stats.mu, perm)?;
    let sigma_t = tape.gather_rows(stats.sigma, perm)?;
    adain_with_stats(tape, x, stats, mu_t, sigma_t, EPS_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::style::channel_stats;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn image(values: &[f64], shape: &[usize]) -> Tensor {
        Tensor::new(shape.to_vec(), values.to_vec()).unwrap()
    }

    fn varied(seed: u64, shape: &[usize]) -> Tensor {
        let mut rng = StyleRng::seed_from_u64(seed);
        let mut t = standard_normal(&mut rng, shape);
        t.data_mut().iter_mut().enumerate().for_each(|(i, v)| *v = *v * (1.0 + (i / 4 % 3) as f64) + (i / 8) as f64);
        t
    }

    #[test]
    fn batch_sigma_uses_population_std() {
        // Two instances whose single channel has means 2 and 6.
        let mut tape = Tape::new();
        let x = tape.constant(image(&[1.0, 3.0, 5.0, 7.0], &[2, 1, 1, 2]));
        let stats = channel_stats(&mut tape, x).unwrap();
        assert_eq!(tape.value(stats.mu).data(), &[2.0, 6.0]);
        let (sm, _) = batch_sigma(&mut tape, stats).unwrap();
        assert_eq!(tape.value(sm).data(), &[2.0]);
    }

    #[test]
    fn dsu_on_identical_instances_is_identity() {
        let one = [0.5, -1.0, 2.0, 0.25, 3.0, 1.0, -0.5, 0.0];
        let both: Vec<f64> = one.iter().chain(&one).copied().collect();
        let x0 = image(&both, &[2, 2, 2, 2]);
        let mut rng = StyleRng::seed_from_u64(4);
        let mut tape = Tape::new();
        let x = tape.constant(x0.clone());
        let y = dsu_forward(&mut tape, x, 1.0, Mode::Train, &mut rng).unwrap();
        assert!(tape.value(y).max_abs_diff(&x0).unwrap() < 1e-12);
    }

    #[test]
    fn zero_probability_never_fires() {
        let mut rng = StyleRng::seed_from_u64(4);
        let mut tape = Tape::new();
        let x = tape.constant(varied(1, &[4, 2, 2, 2]));
        for _ in 0..50 {
            assert_eq!(dsu_forward(&mut tape, x, 0.0, Mode::Train, &mut rng).unwrap(), x);
            assert_eq!(mixstyle_forward(&mut tape, x, 0.1, 0.0, Mode::Train, &mut rng).unwrap(), x);
            assert_eq!(padain_forward(&mut tape, x, 0.0, Mode::Train, &mut rng).unwrap(), x);
        }
    }

    #[test]
    fn single_instance_batch_passes_through() {
        let mut rng = StyleRng::seed_from_u64(4);
        let mut tape = Tape::new();
        let x = tape.constant(varied(1, &[1, 2, 2, 2]));
        assert_eq!(dsu_forward(&mut tape, x, 1.0, Mode::Train, &mut rng).unwrap(), x);
    }

    #[test]
    fn mixstyle_full_own_weight_is_identity() {
        let x0 = varied(2, &[3, 2, 2, 2]);
        let mut tape = Tape::new();
        let x = tape.constant(x0.clone());
        let y = mixstyle_with(&mut tape, x, &[1.0; 3], &[2, 0, 1]).unwrap();
        assert!(tape.value(y).max_abs_diff(&x0).unwrap() < 1e-12);
    }

    #[test]
    fn mixstyle_zero_weight_equals_padain() {
        let x0 = varied(3, &[3, 2, 2, 2]);
        let mut tape = Tape::new();
        let x = tape.constant(x0);
        let a = mixstyle_with(&mut tape, x, &[0.0; 3], &[2, 0, 1]).unwrap();
        let b = padain_with(&mut tape, x, &[2, 0, 1]).unwrap();
        assert!(tape.value(a).max_abs_diff(tape.value(b)).unwrap() < 1e-12);
    }

    #[test]
    fn mixstyle_half_weight_interpolates_statistics() {
        // Instance 0 has (μ, σ) = (4, √5); instance 1 has (0, 1).
        let x0 = image(&[1.0, 3.0, 5.0, 7.0, -1.0, 1.0, -1.0, 1.0], &[2, 1, 1, 4]);
        let mut tape = Tape::new();
        let x = tape.constant(x0);
        let y = mixstyle_with(&mut tape, x, &[0.5, 0.5], &[1, 0]).unwrap();
        let s = channel_stats(&mut tape, y).unwrap().values(&tape);
        assert_abs_diff_eq!(s.mu.data()[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.sigma.data()[0], (1.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn padain_identity_permutation_is_identity() {
        let x0 = varied(5, &[3, 2, 2, 2]);
        let mut tape = Tape::new();
        let x = tape.constant(x0.clone());
        let y = padain_with(&mut tape, x, &[0, 1, 2]).unwrap();
        assert!(tape.value(y).max_abs_diff(&x0).unwrap() < 1e-12);
    }

    #[test]
    fn padain_swap_exchanges_measured_statistics() {
        let x0 = varied(6, &[2, 3, 3, 3]);
        let mut tape = Tape::new();
        let x = tape.constant(x0);
        let before = channel_stats(&mut tape, x).unwrap().values(&tape);
        let y = padain_with(&mut tape, x, &[1, 0]).unwrap();
        let after = channel_stats(&mut tape, y).unwrap().values(&tape);
        let c = 3;
        for ch in 0..c {
            assert_abs_diff_eq!(after.mu.data()[ch], before.mu.data()[c + ch], epsilon = 1e-5);
            assert_abs_diff_eq!(after.mu.data()[c + ch], before.mu.data()[ch], epsilon = 1e-5);
            assert_abs_diff_eq!(after.sigma.data()[ch], before.sigma.data()[c + ch], epsilon = 1e-5);
            assert_abs_diff_eq!(after.sigma.data()[c + ch], before.sigma.data()[ch], epsilon = 1e-5);
        }
    }

    #[test]
    fn same_seed_same_perturbation() {
        let x0 = varied(7, &[4, 2, 3, 3]);
        let run = |seed: u64| {
            let mut rng = StyleRng::seed_from_u64(seed);
            let mut tape = Tape::new();
            let x = tape.constant(x0.clone());
            let a = mixstyle_forward(&mut tape, x, 0.1, 1.0, Mode::Train, &mut rng).unwrap();
            let b = dsu_forward(&mut tape, a, 1.0, Mode::Train, &mut rng).unwrap();
            let c = padain_forward(&mut tape, b, 1.0, Mode::Train, &mut rng).unwrap();
            tape.value(c).clone()
        };
        assert_eq!(run(8), run(8));
        assert_ne!(run(8), run(9));
    }
}
