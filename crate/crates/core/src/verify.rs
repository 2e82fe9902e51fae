//! Seeded finite-difference suites over the autodiff ops, the style
//! perturbations and a whole AdvStyle-equipped network.
//!
//! Each case draws `instances` random problems and runs
//! [`check_gradients`] on every one. A case passes when every instance does.

use std::fmt;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::nn::{Backbone, GradScope, InsertionPoint, Method, MethodConfig, MiniNet, ModelSpec, Pass};
use crate::style::{
    adain_replace, advstyle_with_noise, channel_stats, dsu_with_noise, mixstyle_with, normalize,
    padain_with, AdvStyleState, Mode, Reversal, StyleRng, Variant, EPS_FLOOR,
};
use crate::tensor::{check_gradients, GradCheckConfig, GradCheckReport};
use crate::tensor::{Tape, Tensor, Var};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Ops,
    AdvStyle,
    Backbone,
}

impl Scope {
    pub const ALL: [Scope; 3] = [Scope::Ops, Scope::AdvStyle, Scope::Backbone];

    pub fn name(self) -> &'static str {
        match self {
            Scope::Ops => "ops",
            Scope::AdvStyle => "advstyle",
            Scope::Backbone => "backbone",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid("gradcheck scope", format!("{s:?} is not one of ops, advstyle, backbone")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub name: String,
    pub instances: usize,
    pub passed: usize,
    pub max_rel_error: f64,
    /// Coordinates compared, summed over instances.
    pub checked: usize,
    /// Coordinates skipped because the probe straddled a kink.
    pub excluded: usize,
}

impl CaseResult {
    pub fn ok(&self) -> bool {
        self.passed == self.instances && self.instances > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub scope: Scope,
    pub seed: u64,
    pub rtol: f64,
    pub cases: Vec<CaseResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(CaseResult::ok)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.cases.iter().map(|c| c.max_rel_error).fold(0.0, f64::max)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.cases {
            writeln!(
                f,
                "{} {:<28} {:>3}/{:<3} max rel {:.2e}  ({} checked, {} at kinks)",
                if c.ok() { "ok  " } else { "FAIL" },
                c.name,
                c.passed,
                c.instances,
                c.max_rel_error,
                c.checked,
                c.excluded
            )?;
        }
        write!(
            f,
            "{}: {} ({} cases, max rel {:.2e}, rtol {:.0e})",
            self.scope.name(),
            if self.passed() { "PASS" } else { "FAIL" },
            self.cases.len(),
            self.max_rel_error(),
            self.rtol
        )
    }
}

/// Scalar function of one tensor, as consumed by [`check_gradients`].
type Objective = Box<dyn Fn(&mut Tape, Var) -> crate::tensor::Result<Var>>;

/// One random problem: the point to differentiate at and the objective.
type Instance = (Tensor, Objective);

struct Case {
    name: String,
    draw: Box<dyn Fn(&mut StyleRng) -> Instance>,
}

fn case(name: impl Into<String>, draw: impl Fn(&mut StyleRng) -> Instance + 'static) -> Case {
    Case {
        name: name.into(),
        draw: Box::new(draw),
    }
}

fn uniform(rng: &mut StyleRng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).expect("sized")
}

fn normal(rng: &mut StyleRng, shape: &[usize]) -> Tensor {
    crate::style::standard_normal(rng, shape)
}

/// `Σ w ⊙ y` with fixed random weights, so no output coordinate is ignored.
fn weighted(tape: &mut Tape, y: Var, w: &Tensor) -> crate::tensor::Result<Var> {
    let w = tape.constant(w.clone());
    let p = tape.mul(y, w)?;
    Ok(tape.sum_all(p))
}

/// Reduces an op with a random weighting; draws the weights to match `out`.
fn reduced(
    rng: &mut StyleRng,
    x: Tensor,
    out: &[usize],
    op: impl Fn(&mut Tape, Var) -> crate::tensor::Result<Var> + 'static,
) -> Instance {
    let w = normal(rng, out);
    (x, Box::new(move |t, v| {
        let y = op(t, v)?;
        weighted(t, y, &w)
    }))
}

type Binary = fn(&mut Tape, Var, Var) -> crate::tensor::Result<Var>;

/// Both argument positions of an elementwise binary op.
fn binary(name: &str, op: Binary, positive_rhs: bool) -> [Case; 2] {
    let draw = move |rng: &mut StyleRng| {
        let a = uniform(rng, &[3, 4], -2.0, 2.0);
        let b = if positive_rhs { uniform(rng, &[3, 4], 0.5, 2.0) } else { uniform(rng, &[3, 4], -2.0, 2.0) };
        (a, b)
    };
    [
        case(format!("{name}/lhs"), move |rng| {
            let (a, b) = draw(rng);
            reduced(rng, a, &[3, 4], move |t, v| {
                let c = t.constant(b.clone());
                op(t, v, c)
            })
        }),
        case(format!("{name}/rhs"), move |rng| {
            let (a, b) = draw(rng);
            reduced(rng, b, &[3, 4], move |t, v| {
                let c = t.constant(a.clone());
                op(t, c, v)
            })
        }),
    ]
}

fn unary(name: &str, lo: f64, hi: f64, op: fn(&mut Tape, Var) -> crate::tensor::Result<Var>) -> Case {
    case(name, move |rng| {
        let x = uniform(rng, &[3, 5], lo, hi);
        reduced(rng, x, &[3, 5], op)
    })
}

fn op_cases() -> Vec<Case> {
    let mut cases = Vec::new();
    cases.extend(binary("add", |t, a, b| t.add(a, b), false));
    cases.extend(binary("sub", |t, a, b| t.sub(a, b), false));
    cases.extend(binary("mul", |t, a, b| t.mul(a, b), false));
    cases.extend(binary("div", |t, a, b| t.div(a, b), true));
    cases.push(unary("scale", -2.0, 2.0, |t, v| Ok(t.scale(v, -1.7))));
    cases.push(unary("neg", -2.0, 2.0, |t, v| Ok(t.neg(v))));
    cases.push(unary("add_scalar", -2.0, 2.0, |t, v| Ok(t.add_scalar(v, 0.3))));
    cases.push(unary("relu", -2.0, 2.0, |t, v| Ok(t.relu(v))));
    cases.push(unary("abs", -2.0, 2.0, |t, v| Ok(t.abs(v))));
    cases.push(unary("clamp_min", -2.0, 2.0, |t, v| Ok(t.clamp_min(v, 0.1))));
    cases.push(unary("sqrt", 0.1, 3.0, |t, v| t.sqrt(v)));
    cases.push(case("reshape", |rng| {
        let x = normal(rng, &[2, 6]);
        reduced(rng, x, &[3, 4], |t, v| t.reshape(v, &[3, 4]))
    }));
    cases.push(case("broadcast/leading", |rng| {
        let x = normal(rng, &[3]);
        reduced(rng, x, &[4, 3], |t, v| t.broadcast_to(v, &[4, 3]))
    }));
    cases.push(case("broadcast/trailing", |rng| {
        let x = normal(rng, &[2, 3]);
        reduced(rng, x, &[2, 3, 4, 4], |t, v| t.broadcast_to(v, &[2, 3, 4, 4]))
    }));
    for axis in 0..3 {
        let mut out = vec![2, 3, 4];
        out.remove(axis);
        let o = out.clone();
        cases.push(case(format!("sum_axis/{axis}"), move |rng| {
            let x = normal(rng, &[2, 3, 4]);
            reduced(rng, x, &o, move |t, v| t.sum_axis(v, axis))
        }));
        let o = out.clone();
        cases.push(case(format!("mean_axis/{axis}"), move |rng| {
            let x = normal(rng, &[2, 3, 4]);
            reduced(rng, x, &o, move |t, v| t.mean_axis(v, axis))
        }));
        cases.push(case(format!("var_axis/{axis}"), move |rng| {
            let x = normal(rng, &[2, 3, 4]);
            reduced(rng, x, &out, move |t, v| t.var_axis(v, axis))
        }));
    }
    cases.push(case("sum_all", |rng| {
        let x = normal(rng, &[3, 4]);
        (x, Box::new(|t, v| Ok(t.sum_all(v))))
    }));
    cases.push(case("mean_all", |rng| {
        let x = normal(rng, &[3, 4]);
        (x, Box::new(|t, v| Ok(t.mean_all(v))))
    }));
    cases.push(case("gather_rows", |rng| {
        let x = normal(rng, &[4, 3]);
        let index: Vec<usize> = (0..6).map(|_| rng.random_range(0..4)).collect();
        reduced(rng, x, &[6, 3], move |t, v| t.gather_rows(v, &index))
    }));
    cases.push(case("matmul/lhs", |rng| {
        let (a, b) = (normal(rng, &[3, 4]), normal(rng, &[4, 2]));
        reduced(rng, a, &[3, 2], move |t, v| {
            let c = t.constant(b.clone());
            t.matmul(v, c)
        })
    }));
    cases.push(case("matmul/rhs", |rng| {
        let (a, b) = (normal(rng, &[3, 4]), normal(rng, &[4, 2]));
        reduced(rng, b, &[3, 2], move |t, v| {
            let c = t.constant(a.clone());
            t.matmul(c, v)
        })
    }));
    for padding in [0, 1] {
        let side = 5 + 2 * padding - 2;
        let out = [2, 3, side, side];
        cases.push(case(format!("conv2d/input/pad{padding}"), move |rng| {
            let (x, w, b) = (normal(rng, &[2, 2, 5, 5]), normal(rng, &[3, 2, 3, 3]), normal(rng, &[3]));
            reduced(rng, x, &out, move |t, v| {
                let (w, b) = (t.constant(w.clone()), t.constant(b.clone()));
                t.conv2d(v, w, Some(b), padding)
            })
        }));
        cases.push(case(format!("conv2d/weight/pad{padding}"), move |rng| {
            let (x, w) = (normal(rng, &[2, 2, 5, 5]), normal(rng, &[3, 2, 3, 3]));
            reduced(rng, w, &out, move |t, v| {
                let x = t.constant(x.clone());
                t.conv2d(x, v, None, padding)
            })
        }));
        cases.push(case(format!("conv2d/bias/pad{padding}"), move |rng| {
            let (x, w, b) = (normal(rng, &[2, 2, 5, 5]), normal(rng, &[3, 2, 3, 3]), normal(rng, &[3]));
            reduced(rng, b, &out, move |t, v| {
                let (x, w) = (t.constant(x.clone()), t.constant(w.clone()));
                t.conv2d(x, w, Some(v), padding)
            })
        }));
    }
    cases.push(case("maxpool2d", |rng| {
        let x = normal(rng, &[2, 2, 4, 4]);
        reduced(rng, x, &[2, 2, 2, 2], |t, v| t.maxpool2d(v, 2))
    }));
    cases.push(case("avgpool_global", |rng| {
        let x = normal(rng, &[2, 3, 3, 3]);
        reduced(rng, x, &[2, 3], |t, v| t.avgpool_global(v))
    }));
    cases.push(case("softmax_cross_entropy", |rng| {
        let x = normal(rng, &[4, 5]);
        let labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..5)).collect();
        (x, Box::new(move |t, v| t.softmax_cross_entropy(v, &labels)))
    }));
    cases
}

/// Feature map with per-channel offsets and spreads, far from the σ floor.
fn feature_map(rng: &mut StyleRng, shape: [usize; 4]) -> Tensor {
    let [b, c, h, w] = shape;
    let shift = uniform(rng, &[b, c], -1.0, 1.0);
    let spread = uniform(rng, &[b, c], 0.5, 2.0);
    let z = normal(rng, &shape);
    let plane = h * w;
    let data = z
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| shift.data()[i / plane] + spread.data()[i / plane] * v)
        .collect();
    Tensor::new(shape.to_vec(), data).expect("sized")
}

const MAP: [usize; 4] = [3, 4, 3, 3];

#[derive(Clone, Copy)]
enum Wrt {
    Input,
    SigmaMu,
    SigmaSigma,
}

fn advstyle_case(variant: Variant, wrt: Wrt) -> Case {
    let label = match variant {
        Variant::Full => "full",
        Variant::DirectionOnly => "direction_only",
        Variant::IntensityOnly => "intensity_only",
    };
    let part = match wrt {
        Wrt::Input => "x",
        Wrt::SigmaMu => "sigma_mu",
        Wrt::SigmaSigma => "sigma_sigma",
    };
    case(format!("advstyle/{label}/{part}"), move |rng| {
        let x = feature_map(rng, MAP);
        let scale_shape: &[usize] = if variant == Variant::IntensityOnly { &[] } else { &[MAP[1]] };
        let s_mu = uniform(rng, scale_shape, 0.2, 1.0);
        let s_sg = uniform(rng, scale_shape, 0.2, 1.0);
        let eps_mu = normal(rng, &MAP[..2]);
        // Keeps σ_adv = σ + ε·Σ positive so the rescale stays smooth.
        let eps_sg = uniform(rng, &MAP[..2], -0.3, 0.3);
        let w = normal(rng, &MAP);
        let at = match wrt {
            Wrt::Input => x.clone(),
            Wrt::SigmaMu => s_mu.clone(),
            Wrt::SigmaSigma => s_sg.clone(),
        };
        (at, Box::new(move |t: &mut Tape, v: Var| {
            let pick = |t: &mut Tape, which: Wrt, value: &Tensor| {
                if std::mem::discriminant(&which) == std::mem::discriminant(&wrt) { v } else { t.constant(value.clone()) }
            };
            let xv = pick(t, Wrt::Input, &x);
            let state = AdvStyleState {
                sigma_mu: pick(t, Wrt::SigmaMu, &s_mu),
                sigma_sigma: pick(t, Wrt::SigmaSigma, &s_sg),
                lambda: 5.0,
                variant,
            };
            let y = advstyle_with_noise(t, xv, &state, Reversal::Identity, &eps_mu, &eps_sg)?;
            weighted(t, y, &w)
        }))
    })
}

fn advstyle_cases() -> Vec<Case> {
    let mut cases = vec![
        case("channel_stats", |rng| {
            let x = feature_map(rng, MAP);
            let (wm, ws) = (normal(rng, &MAP[..2]), normal(rng, &MAP[..2]));
            (x, Box::new(move |t, v| {
                let s = channel_stats(t, v)?;
                let a = weighted(t, s.mu, &wm)?;
                let b = weighted(t, s.sigma, &ws)?;
                t.add(a, b)
            }))
        }),
        case("normalize", |rng| {
            let x = feature_map(rng, MAP);
            reduced(rng, x, &MAP, |t, v| normalize(t, v, EPS_FLOOR))
        }),
        case("adain/x", |rng| {
            let x = feature_map(rng, MAP);
            let (m, s) = (normal(rng, &MAP[..2]), uniform(rng, &MAP[..2], 0.5, 2.0));
            reduced(rng, x, &MAP, move |t, v| {
                let (m, s) = (t.constant(m.clone()), t.constant(s.clone()));
                adain_replace(t, v, m, s, EPS_FLOOR)
            })
        }),
        case("adain/target_mu", |rng| {
            let x = feature_map(rng, MAP);
            let (m, s) = (normal(rng, &MAP[..2]), uniform(rng, &MAP[..2], 0.5, 2.0));
            reduced(rng, m, &MAP, move |t, v| {
                let (x, s) = (t.constant(x.clone()), t.constant(s.clone()));
                adain_replace(t, x, v, s, EPS_FLOOR)
            })
        }),
        case("adain/target_sigma", |rng| {
            let x = feature_map(rng, MAP);
            let (m, s) = (normal(rng, &MAP[..2]), uniform(rng, &MAP[..2], 0.5, 2.0));
            reduced(rng, s, &MAP, move |t, v| {
                let (x, m) = (t.constant(x.clone()), t.constant(m.clone()));
                adain_replace(t, x, m, v, EPS_FLOOR)
            })
        }),
    ];
    for variant in [Variant::Full, Variant::DirectionOnly, Variant::IntensityOnly] {
        for wrt in [Wrt::Input, Wrt::SigmaMu, Wrt::SigmaSigma] {
            cases.push(advstyle_case(variant, wrt));
        }
    }
    cases.push(case("dsu/x", |rng| {
        let x = feature_map(rng, MAP);
        let (em, es) = (normal(rng, &MAP[..2]), uniform(rng, &MAP[..2], -0.3, 0.3));
        reduced(rng, x, &MAP, move |t, v| dsu_with_noise(t, v, &em, &es))
    }));
    cases.push(case("mixstyle/x", |rng| {
        let x = feature_map(rng, MAP);
        let weights: Vec<f64> = (0..MAP[0]).map(|_| rng.random_range(0.0..1.0)).collect();
        let perm = vec![2, 0, 1];
        reduced(rng, x, &MAP, move |t, v| mixstyle_with(t, v, &weights, &perm))
    }));
    cases.push(case("padain/x", |rng| {
        let x = feature_map(rng, MAP);
        reduced(rng, x, &MAP, |t, v| padain_with(t, v, &[1, 2, 0]))
    }));
    cases
}

/// Small network with AdvStyle at every point; maps stay at least 2×2 so
/// every insertion sees spatial spread.
pub fn probe_spec() -> ModelSpec {
    ModelSpec {
        backbone: Backbone {
            in_channels: 3,
            height: 16,
            width: 16,
            classes: 3,
            widths: [3, 4, 4, 4, 4],
        },
        method: MethodConfig {
            kind: Method::AdvStyle,
            points: InsertionPoint::ALL.to_vec(),
            ..MethodConfig::default()
        },
    }
}

/// Draws a probe model with nonzero Σ and a batch to go with it.
pub fn probe_instance(seed: u64) -> Result<(MiniNet, Tensor, Vec<usize>)> {
    let spec = probe_spec();
    let mut model = MiniNet::build(spec.clone(), seed)?;
    let mut rng = StyleRng::seed_from_u64(seed);
    rng.set_stream(7);
    for i in model.registry().indices(crate::nn::ParamTag::Sigma) {
        let shape = model.registry().get(i).value.shape().to_vec();
        *model.registry_mut().value_mut(i) = uniform(&mut rng, &shape, 0.05, 0.3);
    }
    let b = spec.backbone;
    let images = uniform(&mut rng, &[2, b.in_channels, b.height, b.width], 0.0, 1.0);
    let labels = (0..2).map(|_| rng.random_range(0..b.classes)).collect();
    Ok((model, images, labels))
}

/// Training-mode loss of `model` with every Σ passed through as identity and
/// the AdvStyle noise drawn from a fixed seed, as a function of parameter
/// `param` (or of the input batch when `None`).
fn backbone_objective(model: MiniNet, images: Tensor, labels: Vec<usize>, param: Option<usize>, noise: u64) -> Objective {
    Box::new(move |t, v| {
        let frozen = model.registry().bind(t, GradScope::Frozen);
        let (params, x) = match param {
            Some(i) => (frozen.with(i, v), t.constant(images.clone())),
            None => (frozen, v),
        };
        let mut rng = StyleRng::seed_from_u64(noise);
        let mut pass = Pass {
            mode: Mode::Train,
            reversal: Reversal::Identity,
            rng: &mut rng,
        };
        let out = model.forward(t, &params, x, &mut pass).map_err(|e| match e {
            Error::Tensor(e) => e,
            other => crate::tensor::TensorError::Invalid {
                op: "forward",
                msg: other.to_string(),
            },
        })?;
        t.softmax_cross_entropy(out.logits, &labels)
    })
}

fn backbone_cases() -> Vec<Case> {
    let spec = probe_spec();
    let names: Vec<String> = MiniNet::build(spec, 0)
        .expect("probe spec is valid")
        .registry()
        .iter()
        .map(|p| p.name.clone())
        .collect();
    let mut cases = vec![case("backbone/input", |rng| {
        let seed = rng.random();
        let (model, images, labels) = probe_instance(seed).expect("probe spec is valid");
        (images.clone(), backbone_objective(model, images, labels, None, seed))
    })];
    for (i, name) in names.into_iter().enumerate() {
        cases.push(case(format!("backbone/{name}"), move |rng| {
            let seed = rng.random();
            let (model, images, labels) = probe_instance(seed).expect("probe spec is valid");
            let at = model.registry().get(i).value.clone();
            (at, backbone_objective(model, images, labels, Some(i), seed))
        }));
    }
    cases
}

fn run_case(c: &Case, instances: usize, seed: u64, cfg: GradCheckConfig) -> Result<CaseResult> {
    let mut rng = StyleRng::seed_from_u64(seed);
    let mut result = CaseResult {
        name: c.name.clone(),
        instances,
        passed: 0,
        max_rel_error: 0.0,
        checked: 0,
        excluded: 0,
    };
    for _ in 0..instances {
        let (x, f) = (c.draw)(&mut rng);
        let report: GradCheckReport = check_gradients(f, &x, cfg)?;
        result.passed += usize::from(report.passed());
        result.max_rel_error = result.max_rel_error.max(report.max_rel_error);
        result.excluded += report.excluded();
        result.checked += report.coordinates.len() - report.excluded();
    }
    Ok(result)
}

/// Runs every case of `scope` on `instances` seeded draws.
pub fn run_suite(scope: Scope, instances: usize, seed: u64, cfg: GradCheckConfig) -> Result<SuiteReport> {
    if instances == 0 {
        return Err(Error::invalid("gradcheck", "instances must be positive"));
    }
    let cases = match scope {
        Scope::Ops => op_cases(),
        Scope::AdvStyle => advstyle_cases(),
        Scope::Backbone => backbone_cases(),
    };
    let mut results = Vec::with_capacity(cases.len());
    for (k, c) in cases.iter().enumerate() {
        results.push(run_case(c, instances, seed.wrapping_add(k as u64), cfg)?);
    }
    Ok(SuiteReport {
        scope,
        seed,
        rtol: cfg.rtol,
        cases: results,
    })
}

/// Largest relative gap between the gradient reaching Σ through the
/// reversal layer and −λ times the plain gradient, over `instances` probe
/// models, every insertion point and each λ.
pub fn reversal_gap(instances: usize, seed: u64, lambdas: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..instances as u64 {
        let (mut model, images, labels) = probe_instance(seed.wrapping_add(k))?;
        for &lambda in lambdas {
            let mut spec = model.spec().clone();
            spec.method.lambda = lambda;
            let mut next = MiniNet::build(spec, 0)?;
            for (i, p) in model.registry().iter().enumerate() {
                *next.registry_mut().value_mut(i) = p.value.clone();
            }
            model = next;
            let grads = |reversal: Reversal| -> Result<Vec<Tensor>> {
                let mut tape = Tape::new();
                let params = model.registry().bind(&mut tape, GradScope::All);
                let x = tape.constant(images.clone());
                let mut rng = StyleRng::seed_from_u64(k);
                let mut pass = Pass { mode: Mode::Train, reversal, rng: &mut rng };
                let out = model.forward(&mut tape, &params, x, &mut pass)?;
                let loss = tape.softmax_cross_entropy(out.logits, &labels)?;
                tape.backward(loss)?;
                Ok(model
                    .registry()
                    .indices(crate::nn::ParamTag::Sigma)
                    .into_iter()
                    .map(|i| tape.grad(params.var(i)).expect("Σ is trainable"))
                    .collect())
            };
            let reversed = grads(Reversal::Reverse)?;
            let plain = grads(Reversal::Identity)?;
            for (r, p) in reversed.iter().zip(&plain) {
                for (a, b) in r.data().iter().zip(p.data()) {
                    let expect = -lambda * b;
                    let gap = (a - expect).abs() / expect.abs().max(1e-12);
                    worst = worst.max(gap);
                }
            }
        }
    }
    Ok(worst)
}
