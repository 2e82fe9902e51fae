use std::io::{Read, Write};

use rand::{Rng, SeedableRng};

use super::registry::{Bound, GradScope, ParameterRegistry, SIGMA_PREFIX};
use super::spec::{InsertionPoint, Method, ModelSpec};
use crate::style::{
    advstyle_forward, dsu_forward, mixstyle_forward, padain_forward, AdvStyleState, Mode, Reversal,
    StyleRng, Variant,
};
use crate::tensor::{read_archive, write_archive, Archive, ArchiveRecord, DType, Tape, Tensor, Var};
use crate::{Error, Result};

const STAGES: [&str; 5] = ["conv1", "block1", "block2", "block3", "block4"];

/// Settings of one forward pass. There is no default mode: callers always
/// say whether perturbations are live.
pub struct Pass<'r> {
    pub mode: Mode,
    pub reversal: Reversal,
    pub rng: &'r mut StyleRng,
}

impl<'r> Pass<'r> {
    pub fn train(rng: &'r mut StyleRng) -> Self {
        Self {
            mode: Mode::Train,
            reversal: Reversal::Reverse,
            rng,
        }
    }

    pub fn eval(rng: &'r mut StyleRng) -> Self {
        Self {
            mode: Mode::Eval,
            reversal: Reversal::Reverse,
            rng,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Output {
    /// B×K class scores.
    pub logits: Var,
    /// B×w5 globally pooled penultimate activations.
    pub features: Var,
}

#[derive(Debug, Clone)]
struct Layout {
    conv: [(usize, usize); 5],
    fc: (usize, usize),
    sigma: Vec<(InsertionPoint, usize, usize)>,
}

/// Small plain CNN:
///
/// ```text
/// conv1+ReLU ·conv1· → pool ·pool1· → block1+ReLU ·block1· → pool
///   → block2+ReLU ·block2· → pool → block3+ReLU ·block3· → block4+ReLU ·block4·
///   → global average pool → linear
/// ```
///
/// Every conv is 3×3 with padding 1; `·name·` marks an insertion point.
#[derive(Debug, Clone)]
pub struct MiniNet {
    spec: ModelSpec,
    registry: ParameterRegistry,
    layout: Layout,
}

fn kaiming_uniform(rng: &mut StyleRng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches sample count")
}

fn sigma_init(variant: Variant, channels: usize) -> Tensor {
    match variant {
        Variant::Full => Tensor::zeros(&[channels]),
        // A zero direction has no gradient through the normalization, so the
        // learned direction starts uniform across channels.
        Variant::DirectionOnly => Tensor::full(&[channels], 1.0),
        Variant::IntensityOnly => Tensor::scalar(0.0),
    }
}

impl MiniNet {
    pub fn build(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let b = &spec.backbone;
        let mut rng = StyleRng::seed_from_u64(seed);
        let mut registry = ParameterRegistry::new();
        let mut conv = [(0, 0); 5];
        let mut c_in = b.in_channels;
        for (i, name) in STAGES.iter().enumerate() {
            let c_out = b.widths[i];
            let w = kaiming_uniform(&mut rng, &[c_out, c_in, 3, 3], 9 * c_in);
            conv[i] = (
                registry.register(format!("{name}.weight"), w)?,
                registry.register(format!("{name}.bias"), Tensor::zeros(&[c_out]))?,
            );
            c_in = c_out;
        }
        let w = kaiming_uniform(&mut rng, &[c_in, b.classes], c_in);
        let fc = (
            registry.register("fc.weight", w)?,
            registry.register("fc.bias", Tensor::zeros(&[b.classes]))?,
        );
        let mut sigma = Vec::new();
        if spec.method.kind == Method::AdvStyle {
            let mut points = spec.method.points.clone();
            points.sort();
            for p in points {
                let c = b.widths[p.stage()];
                let init = sigma_init(spec.method.variant, c);
                let mu = registry.register(format!("{SIGMA_PREFIX}{p}.sigma_mu"), init.clone())?;
                let sg = registry.register(format!("{SIGMA_PREFIX}{p}.sigma_sigma"), init)?;
                sigma.push((p, mu, sg));
            }
        }
        Ok(Self {
            spec,
            registry,
            layout: Layout { conv, fc, sigma },
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn registry(&self) -> &ParameterRegistry {
        &self.registry
    }

    pub fn registry_mut(&mut self) -> &mut ParameterRegistry {
        &mut self.registry
    }

    pub fn bind(&self, tape: &mut Tape, scope: GradScope) -> Bound {
        self.registry.bind(tape, scope)
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let b = &self.spec.backbone;
        match *shape {
            [n, c, h, w] if n > 0 && c == b.in_channels && h == b.height && w == b.width => Ok(()),
            _ => Err(Error::invalid(
                "input batch",
                format!(
                    "expected B×{}×{}×{}, got {shape:?}",
                    b.in_channels, b.height, b.width
                ),
            )),
        }
    }

    fn perturb(
        &self,
        tape: &mut Tape,
        params: &Bound,
        point: InsertionPoint,
        x: Var,
        pass: &mut Pass<'_>,
    ) -> Result<Var> {
        let m = &self.spec.method;
        if !m.is_active(point) {
            return Ok(x);
        }
        let y = match m.kind {
            Method::None => x,
            Method::AdvStyle => {
                let &(_, mu, sg) = self
                    .layout
                    .sigma
                    .iter()
                    .find(|(p, _, _)| *p == point)
                    .expect("every active point has registered scales");
                let state = AdvStyleState {
                    sigma_mu: params.var(mu),
                    sigma_sigma: params.var(sg),
                    lambda: m.lambda,
                    variant: m.variant,
                };
                advstyle_forward(tape, x, &state, pass.mode, pass.reversal, pass.rng)?
            }
            Method::Dsu => dsu_forward(tape, x, m.prob, pass.mode, pass.rng)?,
            Method::MixStyle => mixstyle_forward(tape, x, m.mix_alpha, m.prob, pass.mode, pass.rng)?,
            Method::PAdaIN => padain_forward(tape, x, m.prob, pass.mode, pass.rng)?,
        };
        Ok(y)
    }

    fn stage(&self, tape: &mut Tape, params: &Bound, i: usize, x: Var) -> Result<Var> {
        let (w, b) = self.layout.conv[i];
        let y = tape.conv2d(x, params.var(w), Some(params.var(b)), 1)?;
        Ok(tape.relu(y))
    }

    pub fn forward(&self, tape: &mut Tape, params: &Bound, x: Var, pass: &mut Pass<'_>) -> Result<Output> {
        use InsertionPoint as P;
        self.check_input(tape.shape(x))?;
        let mut h = self.stage(tape, params, 0, x)?;
        h = self.perturb(tape, params, P::Conv1, h, pass)?;
        h = tape.maxpool2d(h, 2)?;
        h = self.perturb(tape, params, P::Pool1, h, pass)?;
        h = self.stage(tape, params, 1, h)?;
        h = self.perturb(tape, params, P::Block1, h, pass)?;
        h = tape.maxpool2d(h, 2)?;
        h = self.stage(tape, params, 2, h)?;
        h = self.perturb(tape, params, P::Block2, h, pass)?;
        h = tape.maxpool2d(h, 2)?;
        h = self.stage(tape, params, 3, h)?;
        h = self.perturb(tape, params, P::Block3, h, pass)?;
        h = self.stage(tape, params, 4, h)?;
        h = self.perturb(tape, params, P::Block4, h, pass)?;
        let features = tape.avgpool_global(h)?;
        let (w, b) = self.layout.fc;
        let z = tape.matmul(features, params.var(w))?;
        let bias = tape.broadcast_to(params.var(b), &[tape.shape(z)[0], self.spec.backbone.classes])?;
        let logits = tape.add(z, bias)?;
        Ok(Output { logits, features })
    }

    /// Eval-mode logits and features for a whole image tensor, in chunks of
    /// `batch` rows. Results do not depend on `batch`.
    pub fn infer(&self, images: &Tensor, batch: usize) -> Result<(Tensor, Tensor)> {
        self.check_input(images.shape())?;
        let n = images.shape()[0];
        let per = images.numel() / n;
        let batch = batch.max(1);
        let k = self.spec.backbone.classes;
        let f = self.spec.backbone.widths[4];
        let mut logits = Vec::with_capacity(n * k);
        let mut feats = Vec::with_capacity(n * f);
        // Eval mode never draws from the stream.
        let mut rng = StyleRng::seed_from_u64(0);
        for start in (0..n).step_by(batch) {
            let end = (start + batch).min(n);
            let mut shape = images.shape().to_vec();
            shape[0] = end - start;
            let chunk = Tensor::new(shape, images.data()[start * per..end * per].to_vec())?;
            let mut tape = Tape::new();
            let params = self.bind(&mut tape, GradScope::Frozen);
            let x = tape.constant(chunk);
            let out = self.forward(&mut tape, &params, x, &mut Pass::eval(&mut rng))?;
            logits.extend_from_slice(tape.value(out.logits).data());
            feats.extend_from_slice(tape.value(out.features).data());
        }
        Ok((Tensor::new(vec![n, k], logits)?, Tensor::new(vec![n, f], feats)?))
    }

    pub fn to_archive(&self) -> Archive {
        let mut a = Archive::new();
        a.push("spec", ArchiveRecord::Text(self.spec.to_toml()))
            .expect("fresh archive");
        for p in self.registry.iter() {
            a.push(p.name.clone(), ArchiveRecord::Tensor(p.value.clone(), DType::F64))
                .expect("registry names are unique");
        }
        a
    }

    /// Rebuilds a model from a checkpoint. Every registry tensor must be
    /// present with the shape the spec implies, and nothing else may be.
    pub fn from_archive(archive: &Archive) -> Result<Self> {
        let spec = ModelSpec::from_toml(archive.text("spec")?)?;
        let mut model = Self::build(spec, 0)?;
        let expected = model.registry.len() + 1;
        if archive.records().len() != expected {
            return Err(Error::invalid(
                "checkpoint",
                format!("{} records, expected {expected}", archive.records().len()),
            ));
        }
        for i in 0..model.registry.len() {
            let name = model.registry.get(i).name.clone();
            let t = archive.tensor(&name)?;
            if t.shape() != model.registry.get(i).value.shape() {
                return Err(Error::invalid(
                    "checkpoint",
                    format!("{name}: shape {:?}, expected {:?}", t.shape(), model.registry.get(i).value.shape()),
                ));
            }
            *model.registry.value_mut(i) = t.clone();
        }
        Ok(model)
    }

    pub fn save(&self, w: &mut impl Write) -> Result<()> {
        write_archive(w, &self.to_archive())?;
        Ok(())
    }

    pub fn load(r: &mut impl Read) -> Result<Self> {
        Self::from_archive(&read_archive(r)?)
    }
}
