use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::style::StyleRng;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Proxy classifier: logistic regression by full-batch gradient descent on
/// standardized features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ADistanceConfig {
    pub epochs: usize,
    pub lr: f64,
}

impl Default for ADistanceConfig {
    fn default() -> Self {
        Self { epochs: 200, lr: 0.5 }
    }
}

fn rows(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match *t.shape() {
        [n, d] if n >= 2 => Ok((n, d)),
        ref s => Err(Error::invalid(
            "a-distance",
            format!("{what} features must be N×D with N ≥ 2, got {s:?}"),
        )),
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `2(1 − 2ε)` clipped to [0, 2], where ε is the held-out error of a linear
/// classifier telling `source` rows from `target` rows. Each set is split in
/// half by a `seed`-shuffled order; the first halves train, the rest test.
pub fn a_distance(source: &Tensor, target: &Tensor, seed: u64, cfg: ADistanceConfig) -> Result<f64> {
    let (ns, d) = rows(source, "source")?;
    let (nt, dt) = rows(target, "target")?;
    if d != dt {
        return Err(Error::invalid("a-distance", format!("feature widths differ: {d} vs {dt}")));
    }
    let n = ns + nt;
    let mut mean = vec![0.0; d];
    for row in source.data().chunks(d).chain(target.data().chunks(d)) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n as f64;
        }
    }
    let mut scale = vec![0.0; d];
    for row in source.data().chunks(d).chain(target.data().chunks(d)) {
        for ((s, v), m) in scale.iter_mut().zip(row).zip(&mean) {
            *s += (v - m).powi(2) / n as f64;
        }
    }
    // Constant features carry nothing; they are zeroed rather than divided.
    let scale: Vec<f64> = scale.iter().map(|v| if *v > 0.0 { 1.0 / v.sqrt() } else { 0.0 }).collect();
    let standardize = |row: &[f64]| -> Vec<f64> { row.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) * s).collect() };

    let mut rng = StyleRng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (set, label) in [(source, 0.0), (target, 1.0)] {
        let mut order: Vec<usize> = (0..set.shape()[0]).collect();
        order.shuffle(&mut rng);
        let half = order.len() / 2;
        for (j, &i) in order.iter().enumerate() {
            let x = standardize(&set.data()[i * d..(i + 1) * d]);
            if j < half { &mut train } else { &mut test }.push((x, label));
        }
    }

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let m = train.len() as f64;
    for _ in 0..cfg.epochs {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (x, y) in &train {
            let z = b + x.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let r = sigmoid(z) - y;
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += r * xi / m;
            }
            gb += r / m;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= cfg.lr * g;
        }
        b -= cfg.lr * gb;
    }
    let errors = test
        .iter()
        .filter(|(x, y)| {
            let z = b + x.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            (z > 0.0) != (*y == 1.0)
        })
        .count();
    let eps = errors as f64 / test.len() as f64;
    Ok((2.0 * (1.0 - 2.0 * eps)).clamp(0.0, 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cloud(seed: u64, n: usize, d: usize, shift: f64) -> Tensor {
        let mut rng = StyleRng::seed_from_u64(seed);
        let data = (0..n * d).map(|_| rng.random_range(-1.0..1.0) + shift).collect();
        Tensor::new(vec![n, d], data).unwrap()
    }

    #[test]
    fn identical_sets_are_indistinguishable() {
        let a = cloud(1, 200, 4, 0.0);
        let dist = a_distance(&a, &a, 0, ADistanceConfig::default()).unwrap();
        assert!(dist < 0.5, "{dist}");
    }

    #[test]
    fn separated_clusters_are_at_distance_two() {
        let a = cloud(1, 100, 3, 0.0);
        let b = cloud(2, 100, 3, 5.0);
        assert_eq!(a_distance(&a, &b, 0, ADistanceConfig::default()).unwrap(), 2.0);
    }

    #[test]
    fn single_points_are_rejected() {
        let a = cloud(1, 1, 3, 0.0);
        let b = cloud(2, 10, 3, 0.0);
        assert!(a_distance(&a, &b, 0, ADistanceConfig::default()).is_err());
        assert!(a_distance(&b, &cloud(3, 10, 2, 0.0), 0, ADistanceConfig::default()).is_err());
    }
}
