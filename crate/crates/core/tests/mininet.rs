use asa_core::nn::{
    Backbone, GradScope, InsertionPoint, Method, MethodConfig, MiniNet, ModelSpec, ParamTag, Pass,
};
use asa_core::style::{Reversal, StyleRng, Variant};
use asa_core::{Tape, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn spec(kind: Method, points: &[InsertionPoint]) -> ModelSpec {
    ModelSpec {
        backbone: Backbone {
            widths: [4, 6, 8, 8, 8],
            ..Backbone::default()
        },
        method: MethodConfig {
            kind,
            points: points.to_vec(),
            ..MethodConfig::default()
        },
    }
}

fn images(seed: u64, n: usize) -> Tensor {
    let mut rng = StyleRng::seed_from_u64(seed);
    let data = (0..n * 3 * 32 * 32).map(|_| rng.random_range(0.0..1.0)).collect();
    Tensor::new(vec![n, 3, 32, 32], data).unwrap()
}

/// Same θ as `model`, without any perturbation module.
fn plain_twin(model: &MiniNet) -> MiniNet {
    let mut s = model.spec().clone();
    s.method.kind = Method::None;
    let mut twin = MiniNet::build(s, 0).unwrap();
    for i in 0..twin.registry().len() {
        let name = twin.registry().get(i).name.clone();
        *twin.registry_mut().value_mut(i) = model.registry().by_name(&name).unwrap().value.clone();
    }
    twin
}

fn set_sigma(model: &mut MiniNet, value: f64) {
    for i in model.registry().indices(ParamTag::Sigma) {
        let shape = model.registry().get(i).value.shape().to_vec();
        *model.registry_mut().value_mut(i) = Tensor::full(&shape, value);
    }
}

/// Logits and θ gradients of a training-mode pass.
fn train_pass(model: &MiniNet, x: &Tensor, labels: &[usize], seed: u64) -> (Tensor, Vec<Tensor>) {
    let mut tape = Tape::new();
    let params = model.bind(&mut tape, GradScope::Only(ParamTag::Theta));
    let xv = tape.constant(x.clone());
    let mut rng = StyleRng::seed_from_u64(seed);
    let out = model.forward(&mut tape, &params, xv, &mut Pass::train(&mut rng)).unwrap();
    let loss = tape.softmax_cross_entropy(out.logits, labels).unwrap();
    tape.backward(loss).unwrap();
    let grads = model
        .registry()
        .indices(ParamTag::Theta)
        .into_iter()
        .map(|i| tape.grad(params.var(i)).unwrap())
        .collect();
    (tape.value(out.logits).clone(), grads)
}

#[test]
fn sigma_entries_follow_the_insertion_points() {
    let all = MiniNet::build(spec(Method::AdvStyle, &InsertionPoint::ALL), 0).unwrap();
    let names: Vec<&str> = all
        .registry()
        .iter()
        .filter(|p| p.tag == ParamTag::Sigma)
        .map(|p| p.name.as_str())
        .collect();
    assert_eq!(names.len(), 12);
    assert_eq!(names.iter().filter(|n| n.ends_with(".sigma_mu")).count(), 6);
    assert_eq!(names.iter().filter(|n| n.ends_with(".sigma_sigma")).count(), 6);
    let none = MiniNet::build(spec(Method::None, &InsertionPoint::ALL), 0).unwrap();
    assert_eq!(none.registry().count(ParamTag::Sigma), 0);
    let dsu = MiniNet::build(spec(Method::Dsu, &InsertionPoint::ALL), 0).unwrap();
    assert_eq!(dsu.registry().count(ParamTag::Sigma), 0);
}

#[test]
fn sigma_initialization_per_variant() {
    for (variant, value, shape) in [
        (Variant::Full, 0.0, vec![8]),
        (Variant::DirectionOnly, 1.0, vec![8]),
        (Variant::IntensityOnly, 0.0, vec![]),
    ] {
        let mut s = spec(Method::AdvStyle, &[InsertionPoint::Block4]);
        s.method.variant = variant;
        let m = MiniNet::build(s, 0).unwrap();
        let p = m.registry().by_name("advstyle.block4.sigma_sigma").unwrap();
        assert_eq!(p.value.shape(), shape.as_slice());
        assert!(p.value.data().iter().all(|&v| v == value));
    }
}

#[test]
fn parameter_count_by_hand() {
    // 3→16→32→64→64→64 convs with biases, then a 64×7 head.
    let theta = (9 * 3 * 16 + 16) + (9 * 16 * 32 + 32) + (9 * 32 * 64 + 64) + 2 * (9 * 64 * 64 + 64) + (64 * 7 + 7);
    assert_eq!(theta, 97_895);
    let mut s = ModelSpec::default();
    s.backbone.widths = [16, 32, 64, 64, 64];
    assert_eq!(s.parameter_count(), theta);
    s.method.kind = Method::AdvStyle;
    s.method.points = InsertionPoint::ALL.to_vec();
    // Two scales per point over channels 16, 16, 32, 64, 64, 64.
    assert_eq!(s.parameter_count(), theta + 2 * 256);
}

#[test]
fn output_is_batch_by_classes() {
    let m = MiniNet::build(spec(Method::AdvStyle, &InsertionPoint::ALL), 1).unwrap();
    let (logits, feats) = m.infer(&images(0, 5), 2).unwrap();
    assert_eq!(logits.shape(), &[5, 7]);
    assert_eq!(feats.shape(), &[5, 8]);
}

#[test]
fn wrong_input_shape_is_rejected() {
    let m = MiniNet::build(spec(Method::None, &[]), 1).unwrap();
    let bad = Tensor::zeros(&[2, 1, 32, 32]);
    assert!(m.infer(&bad, 4).is_err());
}

#[test]
fn inference_does_not_depend_on_batch_size() {
    let m = MiniNet::build(spec(Method::AdvStyle, &InsertionPoint::ALL), 2).unwrap();
    let x = images(1, 7);
    let (a, _) = m.infer(&x, 7).unwrap();
    let (b, _) = m.infer(&x, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn eval_mode_is_an_exact_passthrough() {
    for kind in [Method::AdvStyle, Method::Dsu, Method::MixStyle, Method::PAdaIN] {
        let mut m = MiniNet::build(spec(kind, &InsertionPoint::ALL), 3).unwrap();
        set_sigma(&mut m, 0.7);
        let x = images(2, 4);
        let (a, fa) = m.infer(&x, 4).unwrap();
        let (b, fb) = plain_twin(&m).infer(&x, 4).unwrap();
        assert_eq!(a, b, "{kind:?}");
        assert_eq!(fa, fb, "{kind:?}");
    }
}

#[test]
fn zero_sigma_training_pass_matches_the_plain_network() {
    let x = images(3, 6);
    let labels = [0, 1, 2, 3, 4, 5];
    let mut subsets: Vec<Vec<InsertionPoint>> = InsertionPoint::ALL.iter().map(|&p| vec![p]).collect();
    subsets.push(InsertionPoint::ALL.to_vec());
    subsets.push(vec![InsertionPoint::Conv1, InsertionPoint::Pool1, InsertionPoint::Block1]);
    for points in subsets {
        let m = MiniNet::build(spec(Method::AdvStyle, &points), 4).unwrap();
        let (logits, grads) = train_pass(&m, &x, &labels, 9);
        let (plain_logits, plain_grads) = train_pass(&plain_twin(&m), &x, &labels, 9);
        let gap = logits.max_abs_diff(&plain_logits).unwrap();
        assert!(gap < 1e-6, "{points:?}: logits differ by {gap}");
        for (g, p) in grads.iter().zip(&plain_grads) {
            let gap = g.max_abs_diff(p).unwrap();
            assert!(gap < 1e-5, "{points:?}: θ gradient differs by {gap}");
        }
    }
}

#[test]
fn training_pass_is_deterministic() {
    let mut m = MiniNet::build(spec(Method::AdvStyle, &InsertionPoint::ALL), 5).unwrap();
    set_sigma(&mut m, 0.3);
    let x = images(4, 4);
    let a = train_pass(&m, &x, &[0, 1, 2, 3], 11);
    let b = train_pass(&m, &x, &[0, 1, 2, 3], 11);
    assert_eq!(a, b);
    let c = train_pass(&m, &x, &[0, 1, 2, 3], 12);
    assert_ne!(a.0, c.0);
}

#[test]
fn same_seed_same_initialization() {
    let s = spec(Method::AdvStyle, &InsertionPoint::ALL);
    let a = MiniNet::build(s.clone(), 6).unwrap();
    let b = MiniNet::build(s.clone(), 6).unwrap();
    let c = MiniNet::build(s, 7).unwrap();
    let values = |m: &MiniNet| m.registry().iter().map(|p| p.value.clone()).collect::<Vec<_>>();
    assert_eq!(values(&a), values(&b));
    assert_ne!(values(&a), values(&c));
}

#[test]
fn checkpoint_round_trip() {
    let mut s = spec(Method::AdvStyle, &[InsertionPoint::Pool1, InsertionPoint::Block2]);
    s.method.lambda = 2.5;
    let mut m = MiniNet::build(s, 8).unwrap();
    set_sigma(&mut m, 0.25);
    let mut bytes = Vec::new();
    m.save(&mut bytes).unwrap();
    let back = MiniNet::load(&mut bytes.as_slice()).unwrap();
    assert_eq!(back.spec(), m.spec());
    for (p, q) in m.registry().iter().zip(back.registry().iter()) {
        assert_eq!(p, q);
    }
    let mut again = Vec::new();
    back.save(&mut again).unwrap();
    assert_eq!(bytes, again);
}

#[test]
fn truncated_checkpoint_is_rejected() {
    let m = MiniNet::build(spec(Method::None, &[]), 8).unwrap();
    let mut bytes = Vec::new();
    m.save(&mut bytes).unwrap();
    bytes.truncate(bytes.len() - 5);
    assert!(MiniNet::load(&mut bytes.as_slice()).is_err());
}

#[test]
fn reversal_only_changes_sigma_gradients() {
    let mut m = MiniNet::build(spec(Method::AdvStyle, &InsertionPoint::ALL), 9).unwrap();
    set_sigma(&mut m, 0.2);
    let x = images(5, 3);
    let grads = |reversal| {
        let mut tape = Tape::new();
        let params = m.bind(&mut tape, GradScope::All);
        let xv = tape.constant(x.clone());
        let mut rng = StyleRng::seed_from_u64(1);
        let mut pass = Pass { reversal, ..Pass::train(&mut rng) };
        let out = m.forward(&mut tape, &params, xv, &mut pass).unwrap();
        let loss = tape.softmax_cross_entropy(out.logits, &[0, 1, 2]).unwrap();
        tape.backward(loss).unwrap();
        params.vars().iter().map(|&v| tape.grad(v).unwrap()).collect::<Vec<_>>()
    };
    let (rev, plain) = (grads(Reversal::Reverse), grads(Reversal::Identity));
    for (i, p) in m.registry().iter().enumerate() {
        match p.tag {
            ParamTag::Theta => assert_eq!(rev[i], plain[i], "{}", p.name),
            ParamTag::Sigma => {
                for (a, b) in rev[i].data().iter().zip(plain[i].data()) {
                    assert!((a + 5.0 * b).abs() <= 1e-12 * b.abs().max(1e-300), "{}", p.name);
                }
            }
        }
    }
}

fn arb_points() -> impl Strategy<Value = Vec<InsertionPoint>> {
    proptest::sample::subsequence(InsertionPoint::ALL.to_vec(), 0..=6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parameter_count_matches_the_registry(
        widths in proptest::array::uniform5(1usize..12),
        in_channels in 1usize..4,
        classes in 2usize..9,
        points in arb_points(),
        variant in prop_oneof![Just(Variant::Full), Just(Variant::DirectionOnly), Just(Variant::IntensityOnly)],
        kind in prop_oneof![Just(Method::None), Just(Method::AdvStyle), Just(Method::Dsu)],
    ) {
        let s = ModelSpec {
            backbone: Backbone { in_channels, height: 8, width: 8, classes, widths },
            method: MethodConfig { kind, points, variant, ..MethodConfig::default() },
        };
        let m = MiniNet::build(s.clone(), 0).unwrap();
        prop_assert_eq!(m.registry().numel(), s.parameter_count());
    }
}
