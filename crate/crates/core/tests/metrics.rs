use asa_core::data::make_benchmark_sized;
use asa_core::metrics::{a_distance, aggregate, evaluate, pca_project, ADistanceConfig};
use asa_core::nn::{MiniNet, ModelSpec};
use asa_core::style::StyleRng;
use asa_core::Tensor;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(seed: u64, n: usize, d: usize, shift: f64) -> Tensor {
    let mut rng = StyleRng::seed_from_u64(seed);
    let data = (0..n * d).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); shift + z }).collect::<Vec<f64>>();
    Tensor::new(vec![n, d], data).unwrap()
}

proptest! {
    #[test]
    fn aggregate_mean_is_the_arithmetic_mean(values in prop::collection::vec(0.0f64..100.0, 2..8)) {
        let a = aggregate(&values).unwrap();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        prop_assert!((a.mean - mean).abs() < 1e-9);
        prop_assert!(a.std >= 0.0);
        // Shifting every value moves the mean and leaves the spread alone.
        let shifted: Vec<f64> = values.iter().map(|v| v + 7.0).collect();
        let b = aggregate(&shifted).unwrap();
        prop_assert!((b.mean - a.mean - 7.0).abs() < 1e-9);
        prop_assert!((b.std - a.std).abs() < 1e-9);
    }

    #[test]
    fn a_distance_stays_in_range(seed in 0u64..1000, shift in 0.0f64..3.0) {
        let d = a_distance(&gaussian(seed, 40, 3, 0.0), &gaussian(seed + 1, 40, 3, shift), seed, ADistanceConfig::default()).unwrap();
        prop_assert!((0.0..=2.0).contains(&d));
    }
}

#[test]
fn aggregate_hand_examples() {
    let a = aggregate(&[0.0, 100.0]).unwrap();
    assert_eq!(a.mean, 50.0);
    assert!((a.std - 70.710678).abs() < 1e-5);
    let a = aggregate(&[50.0, 50.0, 50.0]).unwrap();
    assert_eq!((a.mean, a.std), (50.0, 0.0));
    assert!(aggregate(&[1.0]).is_err());
}

#[test]
fn a_distance_is_symmetric_within_split_noise() {
    // Each seed reshuffles which rows train the classifier, so single runs
    // move by a few held-out errors; averaged over seeds the order of the
    // arguments must not matter.
    let (x, y) = (gaussian(1, 200, 4, 0.0), gaussian(2, 200, 4, 0.6));
    let cfg = ADistanceConfig::default();
    let mean = |f: &dyn Fn(u64) -> f64| (0..5).map(f).sum::<f64>() / 5.0;
    let xy = mean(&|s| a_distance(&x, &y, s, cfg).unwrap());
    let yx = mean(&|s| a_distance(&y, &x, s, cfg).unwrap());
    assert!((xy - yx).abs() < 0.1, "{xy} vs {yx}");
}

#[test]
fn a_distance_grows_with_separation() {
    let x = gaussian(3, 300, 4, 0.0);
    let cfg = ADistanceConfig::default();
    let near = a_distance(&x, &gaussian(4, 300, 4, 0.2), 0, cfg).unwrap();
    let far = a_distance(&x, &gaussian(4, 300, 4, 1.5), 0, cfg).unwrap();
    assert!(near < far, "{near} vs {far}");
}

#[test]
fn isotropic_cloud_splits_variance_evenly() {
    let p = pca_project(&gaussian(5, 4000, 2, 0.0), 2).unwrap();
    let (a, b) = (p.explained[0], p.explained[1]);
    assert!((a + b - 1.0).abs() < 1e-9);
    // Sampling noise on 4000 points: ratio within a few percent of 1/2.
    assert!((a - 0.5).abs() < 0.03, "{:?}", p.explained);
}

#[test]
fn duplicated_data_projects_to_duplicated_coordinates() {
    let x = gaussian(6, 50, 5, 0.0);
    let mut doubled = x.data().to_vec();
    doubled.extend_from_slice(x.data());
    let once = pca_project(&x, 2).unwrap();
    let twice = pca_project(&Tensor::new(vec![100, 5], doubled).unwrap(), 2).unwrap();
    let (a, b) = (once.coords.data(), twice.coords.data());
    for i in 0..100 {
        for k in 0..2 {
            assert!((b[i * 2 + k] - a[(i % 50) * 2 + k]).abs() < 1e-9);
        }
    }
}

#[test]
fn accuracy_ignores_evaluation_batch_size() {
    let split = make_benchmark_sized(0, 8, 30).targets.remove(0);
    let model = MiniNet::build(ModelSpec::default(), 3).unwrap();
    let base = evaluate(&model, &split, 30).unwrap();
    for batch in [1, 7, 64] {
        assert_eq!(evaluate(&model, &split, batch).unwrap(), base);
    }
}
