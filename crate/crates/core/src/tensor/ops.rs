//! Forward definitions and backward rules of every recorded op.

use super::tape::{Tape, Var};
use super::{Result, Tensor, TensorError};

/// How a broadcast expanded its input.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Expand {
    /// Input is a leading block of the target shape; each value repeats
    /// `inner` times contiguously (e.g. B×C → B×C×H×W).
    Trailing { inner: usize },
    /// Input is a trailing block of the target shape and is tiled `outer`
    /// times (e.g. C → B×C).
    Leading { outer: usize },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AxisLayout {
    outer: usize,
    n: usize,
    inner: usize,
}

impl AxisLayout {
    fn of(shape: &[usize], axis: usize) -> Self {
        Self {
            outer: shape[..axis].iter().product(),
            n: shape[axis],
            inner: shape[axis + 1..].iter().product(),
        }
    }
}

pub(crate) enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Matmul(Var, Var),
    Conv2d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        padding: usize,
        /// im2col buffers, one block per batch item; empty when the weight is
        /// constant.
        cols: Vec<f64>,
    },
    MaxPool2d {
        input: Var,
        argmax: Vec<usize>,
    },
    AvgPoolGlobal(Var),
    Relu(Var),
    Reshape(Var),
    Broadcast(Var, Expand),
    SumAxis(Var, AxisLayout),
    MeanAxis(Var, AxisLayout),
    VarAxis(Var, AxisLayout),
    SumAll(Var),
    Sqrt(Var),
    SoftmaxCrossEntropy {
        logits: Var,
        probs: Vec<f64>,
        labels: Vec<usize>,
    },
    Grl(Var, f64),
    ClampMin(Var, f64),
    Abs(Var),
    GatherRows(Var, Vec<usize>),
}

impl Op {
    pub(crate) fn inputs(&self) -> Vec<Var> {
        use Op::*;
        match self {
            Leaf => vec![],
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Matmul(a, b) => vec![*a, *b],
            Conv2d {
                input,
                weight,
                bias,
                ..
            } => {
                let mut v = vec![*input, *weight];
                v.extend(bias);
                v
            }
            MaxPool2d { input, .. } => vec![*input],
            SoftmaxCrossEntropy { logits, .. } => vec![*logits],
            Scale(a, _)
            | AddScalar(a)
            | AvgPoolGlobal(a)
            | Relu(a)
            | Reshape(a)
            | Broadcast(a, _)
            | SumAxis(a, _)
            | MeanAxis(a, _)
            | VarAxis(a, _)
            | SumAll(a)
            | Sqrt(a)
            | Grl(a, _)
            | ClampMin(a, _)
            | Abs(a)
            | GatherRows(a, _) => vec![*a],
        }
    }
}

fn mismatch(op: &'static str, lhs: &[usize], rhs: &[usize]) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}

fn invalid(op: &'static str, msg: impl Into<String>) -> TensorError {
    TensorError::Invalid {
        op,
        msg: msg.into(),
    }
}

fn raw(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
    Tensor { shape, data }
}

/// C (m×n) = A (m×k) · B (k×n), optionally reading A or B transposed from
/// their row-major storage, and optionally accumulating into C.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_transposed: bool,
    b: &[f64],
    b_transposed: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_transposed { (1, m) } else { (k, 1) };
    let (rsb, csb) = if b_transposed { (1, k) } else { (n, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: slice lengths are asserted above and the strides address only
    // elements inside each slice.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

struct ConvGeometry {
    batch: usize,
    in_ch: usize,
    height: usize,
    width: usize,
    out_ch: usize,
    kh: usize,
    kw: usize,
    out_h: usize,
    out_w: usize,
    padding: usize,
}

impl ConvGeometry {
    fn patch(&self) -> usize {
        self.in_ch * self.kh * self.kw
    }

    fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    fn im2col(&self, image: &[f64], cols: &mut [f64]) {
        let plane = self.out_plane();
        let p = self.padding as isize;
        for ci in 0..self.in_ch {
            let channel = &image[ci * self.height * self.width..(ci + 1) * self.height * self.width];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (ci * self.kh + ki) * self.kw + kj;
                    let dst = &mut cols[row * plane..(row + 1) * plane];
                    for oh in 0..self.out_h {
                        let ih = oh as isize + ki as isize - p;
                        let line = &mut dst[oh * self.out_w..(oh + 1) * self.out_w];
                        if ih < 0 || ih >= self.height as isize {
                            line.fill(0.0);
                            continue;
                        }
                        let src = &channel[ih as usize * self.width..(ih as usize + 1) * self.width];
                        // Output columns whose input column iw = ow + kj − p is in range.
                        let shift = kj as isize - p;
                        let lo = (-shift).clamp(0, self.out_w as isize) as usize;
                        let hi = (self.width as isize - shift).clamp(lo as isize, self.out_w as isize) as usize;
                        line[..lo].fill(0.0);
                        line[hi..].fill(0.0);
                        let start = (lo as isize + shift) as usize;
                        line[lo..hi].copy_from_slice(&src[start..start + hi - lo]);
                    }
                }
            }
        }
    }

    fn col2im_add(&self, cols: &[f64], image: &mut [f64]) {
        let plane = self.out_plane();
        let p = self.padding as isize;
        for ci in 0..self.in_ch {
            let channel =
                &mut image[ci * self.height * self.width..(ci + 1) * self.height * self.width];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (ci * self.kh + ki) * self.kw + kj;
                    let src = &cols[row * plane..(row + 1) * plane];
                    for oh in 0..self.out_h {
                        let ih = oh as isize + ki as isize - p;
                        if ih < 0 || ih >= self.height as isize {
                            continue;
                        }
                        let dst =
                            &mut channel[ih as usize * self.width..(ih as usize + 1) * self.width];
                        let shift = kj as isize - p;
                        let lo = (-shift).clamp(0, self.out_w as isize) as usize;
                        let hi = (self.width as isize - shift).clamp(lo as isize, self.out_w as isize) as usize;
                        let start = (lo as isize + shift) as usize;
                        dst[start..start + hi - lo]
                            .iter_mut()
                            .zip(&src[oh * self.out_w + lo..oh * self.out_w + hi])
                            .for_each(|(d, v)| *d += v);
                    }
                }
            }
        }
    }
}

impl Tape {
    fn binary_shapes(&self, op: &'static str, a: Var, b: Var) -> Result<Vec<usize>> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(mismatch(op, sa, sb));
        }
        Ok(sa.to_vec())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let shape = self.shape(a).to_vec();
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.push(raw(shape, data), op)
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let shape = self.shape(a).to_vec();
        let data = self.value(a).data().iter().map(|&x| f(x)).collect();
        self.push(raw(shape, data), op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_shapes("add", a, b)?;
        Ok(self.zip_with(a, b, Op::Add(a, b), |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_shapes("sub", a, b)?;
        Ok(self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_shapes("mul", a, b)?;
        Ok(self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_shapes("div", a, b)?;
        if let Some(i) = self.value(b).data().iter().position(|&v| v == 0.0) {
            return Err(TensorError::Domain {
                op: "div",
                msg: format!("divisor is exactly zero at flat index {i}"),
            });
        }
        Ok(self.zip_with(a, b, Op::Div(a, b), |x, y| x / y))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        self.map(a, Op::Scale(a, factor), |x| x * factor)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.map(a, Op::AddScalar(a), |x| x + c)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.map(a, Op::Abs(a), f64::abs)
    }

    /// `max(x, floor)` elementwise.
    pub fn clamp_min(&mut self, a: Var, floor: f64) -> Var {
        self.map(a, Op::ClampMin(a, floor), |x| x.max(floor))
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        if let Some(v) = self.value(a).data().iter().find(|&&v| v < 0.0) {
            return Err(TensorError::Domain {
                op: "sqrt",
                msg: format!("negative input {v}"),
            });
        }
        Ok(self.map(a, Op::Sqrt(a), f64::sqrt))
    }

    /// Gradient reversal: identity forward, backward multiplies by `-lambda`.
    pub fn grl(&mut self, a: Var, lambda: f64) -> Result<Var> {
        if !(lambda >= 0.0) {
            return Err(TensorError::Domain {
                op: "grl",
                msg: format!("lambda must be non-negative, got {lambda}"),
            });
        }
        Ok(self.map(a, Op::Grl(a, lambda), |x| x))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let n: usize = shape.iter().product();
        if n != self.value(a).numel() || shape.contains(&0) {
            return Err(mismatch("reshape", self.shape(a), shape));
        }
        let data = self.value(a).data().to_vec();
        Ok(self.push(raw(shape.to_vec(), data), Op::Reshape(a)))
    }

    /// Expands `a` to `shape` when `a`'s shape is a leading or trailing block
    /// of it. Any other pattern is rejected.
    pub fn broadcast_to(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let src = self.shape(a).to_vec();
        if src == shape {
            return Ok(a);
        }
        let total: usize = shape.iter().product();
        let expand = if src.len() <= shape.len() && shape[..src.len()] == src[..] {
            Expand::Trailing {
                inner: shape[src.len()..].iter().product(),
            }
        } else if src.len() <= shape.len() && shape[shape.len() - src.len()..] == src[..] {
            Expand::Leading {
                outer: shape[..shape.len() - src.len()].iter().product(),
            }
        } else {
            return Err(mismatch("broadcast", &src, shape));
        };
        let x = self.value(a).data();
        let mut data = Vec::with_capacity(total);
        match expand {
            Expand::Trailing { inner } => {
                for &v in x {
                    data.extend(std::iter::repeat_n(v, inner));
                }
            }
            Expand::Leading { outer } => {
                for _ in 0..outer {
                    data.extend_from_slice(x);
                }
            }
        }
        Ok(self.push(raw(shape.to_vec(), data), Op::Broadcast(a, expand)))
    }

    fn reduce_axis(&mut self, a: Var, axis: usize, name: &'static str) -> Result<(AxisLayout, Vec<usize>)> {
        let shape = self.shape(a);
        if axis >= shape.len() {
            return Err(invalid(name, format!("axis {axis} out of range for shape {shape:?}")));
        }
        let layout = AxisLayout::of(shape, axis);
        let mut out_shape = shape.to_vec();
        out_shape.remove(axis);
        Ok((layout, out_shape))
    }

    fn axis_sums(x: &[f64], l: AxisLayout) -> Vec<f64> {
        if l.inner == 1 {
            return x.chunks(l.n).map(|c| c.iter().sum()).collect();
        }
        let mut out = vec![0.0; l.outer * l.inner];
        for o in 0..l.outer {
            let dst = &mut out[o * l.inner..(o + 1) * l.inner];
            for j in 0..l.n {
                let src = &x[(o * l.n + j) * l.inner..(o * l.n + j + 1) * l.inner];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
            }
        }
        out
    }

    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let (l, shape) = self.reduce_axis(a, axis, "sum")?;
        let data = Self::axis_sums(self.value(a).data(), l);
        Ok(self.push(raw(shape, data), Op::SumAxis(a, l)))
    }

    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let (l, shape) = self.reduce_axis(a, axis, "mean")?;
        let n = l.n as f64;
        let data = Self::axis_sums(self.value(a).data(), l)
            .into_iter()
            .map(|s| s / n)
            .collect();
        Ok(self.push(raw(shape, data), Op::MeanAxis(a, l)))
    }

    /// Population variance (divide by N) along `axis`.
    pub fn var_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let (l, shape) = self.reduce_axis(a, axis, "var")?;
        let x = self.value(a).data();
        let n = l.n as f64;
        let means: Vec<f64> = Self::axis_sums(x, l).into_iter().map(|s| s / n).collect();
        let mut out = vec![0.0; l.outer * l.inner];
        if l.inner == 1 {
            for ((o, c), m) in out.iter_mut().zip(x.chunks(l.n)).zip(&means) {
                *o = c.iter().fold(0.0, |acc, v| acc + (v - m) * (v - m));
            }
        } else {
            for o in 0..l.outer {
                for j in 0..l.n {
                    for i in 0..l.inner {
                        let d = x[(o * l.n + j) * l.inner + i] - means[o * l.inner + i];
                        out[o * l.inner + i] += d * d;
                    }
                }
            }
        }
        out.iter_mut().for_each(|v| *v /= n);
        Ok(self.push(raw(shape, out), Op::VarAxis(a, l)))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).numel() as f64;
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n)
    }

    /// Rows `index` of a tensor along its first axis.
    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if shape.is_empty() || index.is_empty() {
            return Err(invalid("gather_rows", "needs a non-scalar input and a non-empty index"));
        }
        let rows = shape[0];
        if let Some(&bad) = index.iter().find(|&&i| i >= rows) {
            return Err(invalid("gather_rows", format!("row {bad} out of range for {rows} rows")));
        }
        let width: usize = shape[1..].iter().product();
        let x = self.value(a).data();
        let mut data = Vec::with_capacity(index.len() * width);
        for &i in index {
            data.extend_from_slice(&x[i * width..(i + 1) * width]);
        }
        let mut out_shape = shape;
        out_shape[0] = index.len();
        Ok(self.push(raw(out_shape, data), Op::GatherRows(a, index.to_vec())))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(mismatch("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a).data(), false, self.value(b).data(), false, &mut out, false);
        Ok(self.push(raw(vec![m, n], out), Op::Matmul(a, b)))
    }

    fn conv_geometry(&self, input: Var, weight: Var, padding: usize) -> Result<ConvGeometry> {
        let (si, sw) = (self.shape(input), self.shape(weight));
        if si.len() != 4 || sw.len() != 4 || si[1] != sw[1] {
            return Err(mismatch("conv2d", si, sw));
        }
        let (kh, kw) = (sw[2], sw[3]);
        let out_h = (si[2] + 2 * padding).checked_sub(kh).map(|v| v + 1);
        let out_w = (si[3] + 2 * padding).checked_sub(kw).map(|v| v + 1);
        let (Some(out_h), Some(out_w)) = (out_h, out_w) else {
            return Err(invalid(
                "conv2d",
                format!("kernel {kh}x{kw} larger than padded input {si:?} (padding {padding})"),
            ));
        };
        Ok(ConvGeometry {
            batch: si[0],
            in_ch: si[1],
            height: si[2],
            width: si[3],
            out_ch: sw[0],
            kh,
            kw,
            out_h,
            out_w,
            padding,
        })
    }

    /// Stride-1 2-D convolution. `input` is B×Ci×H×W, `weight` Co×Ci×kh×kw,
    /// `bias` Co.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Option<Var>, padding: usize) -> Result<Var> {
        let g = self.conv_geometry(input, weight, padding)?;
        if let Some(b) = bias {
            if self.shape(b) != [g.out_ch] {
                return Err(mismatch("conv2d bias", self.shape(b), &[g.out_ch]));
            }
        }
        let (patch, plane) = (g.patch(), g.out_plane());
        let keep_cols = self.requires_grad(weight);
        let mut cols = vec![0.0; if keep_cols { g.batch * patch * plane } else { patch * plane }];
        let mut out = vec![0.0; g.batch * g.out_ch * plane];
        let x = self.value(input).data();
        let w = self.value(weight).data();
        let image_len = g.in_ch * g.height * g.width;
        for b in 0..g.batch {
            let block = if keep_cols {
                &mut cols[b * patch * plane..(b + 1) * patch * plane]
            } else {
                &mut cols[..]
            };
            g.im2col(&x[b * image_len..(b + 1) * image_len], block);
            let dst = &mut out[b * g.out_ch * plane..(b + 1) * g.out_ch * plane];
            gemm(g.out_ch, patch, plane, w, false, block, false, dst, false);
        }
        if let Some(bv) = bias {
            let bias_values = self.value(bv).data();
            for chunk in out.chunks_mut(plane).enumerate() {
                let (row, values) = chunk;
                let shift = bias_values[row % g.out_ch];
                values.iter_mut().for_each(|v| *v += shift);
            }
        }
        if !keep_cols {
            cols = Vec::new();
        }
        let shape = vec![g.batch, g.out_ch, g.out_h, g.out_w];
        Ok(self.push(
            raw(shape, out),
            Op::Conv2d {
                input,
                weight,
                bias,
                padding,
                cols,
            },
        ))
    }

    /// Non-overlapping `k`×`k` max pooling; trailing rows/columns that do not
    /// fill a window are dropped.
    pub fn maxpool2d(&mut self, a: Var, k: usize) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if s.len() != 4 || k == 0 {
            return Err(invalid("maxpool2d", format!("needs a 4-D input and k>0, got {s:?}, k={k}")));
        }
        let (oh, ow) = (s[2] / k, s[3] / k);
        if oh == 0 || ow == 0 {
            return Err(invalid(
                "maxpool2d",
                format!("spatial size {}x{} underflows a {k}x{k} window", s[2], s[3]),
            ));
        }
        let x = self.value(a).data();
        let planes = s[0] * s[1];
        let mut out = Vec::with_capacity(planes * oh * ow);
        let mut argmax = Vec::with_capacity(planes * oh * ow);
        for p in 0..planes {
            let base = p * s[2] * s[3];
            for i in 0..oh {
                for j in 0..ow {
                    let mut best = base + i * k * s[3] + j * k;
                    for di in 0..k {
                        for dj in 0..k {
                            let idx = base + (i * k + di) * s[3] + j * k + dj;
                            if x[idx] > x[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(x[best]);
                    argmax.push(best);
                }
            }
        }
        Ok(self.push(raw(vec![s[0], s[1], oh, ow], out), Op::MaxPool2d { input: a, argmax }))
    }

    /// B×C×H×W → B×C spatial mean.
    pub fn avgpool_global(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if s.len() != 4 {
            return Err(invalid("avgpool_global", format!("needs a 4-D input, got {s:?}")));
        }
        let plane = s[2] * s[3];
        let data = self
            .value(a)
            .data()
            .chunks(plane)
            .map(|c| c.iter().sum::<f64>() / plane as f64)
            .collect();
        Ok(self.push(raw(vec![s[0], s[1]], data), Op::AvgPoolGlobal(a)))
    }

    /// Mean softmax cross-entropy of B×K logits against integer labels.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let s = self.shape(logits).to_vec();
        if s.len() != 2 || s[0] != labels.len() {
            return Err(mismatch("softmax_cross_entropy", &s, &[labels.len()]));
        }
        let (b, k) = (s[0], s[1]);
        if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
            return Err(invalid("softmax_cross_entropy", format!("label {bad} not below {k} classes")));
        }
        let z = self.value(logits).data();
        let mut probs = vec![0.0; b * k];
        let mut loss = 0.0;
        for (row, &y) in labels.iter().enumerate() {
            let zr = &z[row * k..(row + 1) * k];
            let max = zr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = zr.iter().map(|v| (v - max).exp()).sum();
            for (p, v) in probs[row * k..(row + 1) * k].iter_mut().zip(zr) {
                *p = (v - max).exp() / denom;
            }
            loss += max + denom.ln() - zr[y];
        }
        Ok(self.push(
            Tensor::scalar(loss / b as f64),
            Op::SoftmaxCrossEntropy {
                logits,
                probs,
                labels: labels.to_vec(),
            },
        ))
    }

    /// Gradients of node `idx`'s inputs given its upstream gradient.
    pub(crate) fn input_grads(&self, idx: usize, g: &[f64]) -> Vec<(Var, Vec<f64>)> {
        let node = &self.nodes[idx];
        let val = |v: Var| self.value(v).data();
        let needs = |v: Var| self.requires_grad(v);
        match &node.op {
            Op::Leaf => vec![],
            Op::Add(a, b) => vec![(*a, g.to_vec()), (*b, g.to_vec())],
            Op::Sub(a, b) => vec![(*a, g.to_vec()), (*b, g.iter().map(|v| -v).collect())],
            Op::Mul(a, b) => {
                let mut out = Vec::with_capacity(2);
                if needs(*a) {
                    out.push((*a, g.iter().zip(val(*b)).map(|(g, y)| g * y).collect()));
                }
                if needs(*b) {
                    out.push((*b, g.iter().zip(val(*a)).map(|(g, x)| g * x).collect()));
                }
                out
            }
            Op::Div(a, b) => {
                let (x, y) = (val(*a), val(*b));
                let mut out = Vec::with_capacity(2);
                if needs(*a) {
                    out.push((*a, g.iter().zip(y).map(|(g, y)| g / y).collect()));
                }
                if needs(*b) {
                    out.push((
                        *b,
                        g.iter().zip(x).zip(y).map(|((g, x), y)| -g * x / (y * y)).collect(),
                    ));
                }
                out
            }
            Op::Scale(a, c) => vec![(*a, g.iter().map(|v| v * c).collect())],
            Op::AddScalar(a) | Op::Reshape(a) => vec![(*a, g.to_vec())],
            Op::Grl(a, lambda) => vec![(*a, g.iter().map(|v| -lambda * v).collect())],
            Op::Relu(a) => vec![(
                *a,
                g.iter().zip(val(*a)).map(|(g, &x)| if x > 0.0 { *g } else { 0.0 }).collect(),
            )],
            Op::ClampMin(a, floor) => vec![(
                *a,
                g.iter().zip(val(*a)).map(|(g, &x)| if x > *floor { *g } else { 0.0 }).collect(),
            )],
            Op::Abs(a) => vec![(
                *a,
                g.iter().zip(val(*a)).map(|(g, &x)| if x >= 0.0 { *g } else { -g }).collect(),
            )],
            // d√x/dx at x = 0 is taken as 0.
            Op::Sqrt(a) => {
                let y = node.value.data();
                vec![(
                    *a,
                    g.iter().zip(y).map(|(g, &y)| if y > 0.0 { g * 0.5 / y } else { 0.0 }).collect(),
                )]
            }
            Op::Broadcast(a, Expand::Trailing { inner }) => {
                vec![(*a, g.chunks(*inner).map(|c| c.iter().sum()).collect())]
            }
            Op::Broadcast(a, Expand::Leading { .. }) => {
                let width = self.value(*a).numel();
                let mut acc = vec![0.0; width];
                for tile in g.chunks(width) {
                    acc.iter_mut().zip(tile).for_each(|(s, t)| *s += t);
                }
                vec![(*a, acc)]
            }
            Op::SumAxis(a, l) | Op::MeanAxis(a, l) => {
                let scale = if matches!(node.op, Op::MeanAxis(..)) { 1.0 / l.n as f64 } else { 1.0 };
                let mut out = vec![0.0; l.outer * l.n * l.inner];
                for o in 0..l.outer {
                    let src = &g[o * l.inner..(o + 1) * l.inner];
                    for j in 0..l.n {
                        let dst = &mut out[(o * l.n + j) * l.inner..(o * l.n + j + 1) * l.inner];
                        dst.iter_mut().zip(src).for_each(|(d, s)| *d = s * scale);
                    }
                }
                vec![(*a, out)]
            }
            Op::VarAxis(a, l) => {
                let x = val(*a);
                let n = l.n as f64;
                let means: Vec<f64> = Self::axis_sums(x, *l).into_iter().map(|s| s / n).collect();
                let mut out = vec![0.0; x.len()];
                for o in 0..l.outer {
                    for j in 0..l.n {
                        for i in 0..l.inner {
                            let flat = (o * l.n + j) * l.inner + i;
                            let r = o * l.inner + i;
                            out[flat] = g[r] * 2.0 * (x[flat] - means[r]) / n;
                        }
                    }
                }
                vec![(*a, out)]
            }
            Op::SumAll(a) => vec![(*a, vec![g[0]; self.value(*a).numel()])],
            Op::GatherRows(a, index) => {
                let x = self.value(*a);
                let width = x.numel() / x.shape()[0];
                let mut out = vec![0.0; x.numel()];
                for (row, &src) in index.iter().enumerate() {
                    let dst = &mut out[src * width..(src + 1) * width];
                    dst.iter_mut()
                        .zip(&g[row * width..(row + 1) * width])
                        .for_each(|(d, v)| *d += v);
                }
                vec![(*a, out)]
            }
            Op::AvgPoolGlobal(a) => {
                let s = self.shape(*a);
                let plane = s[2] * s[3];
                let mut out = Vec::with_capacity(self.value(*a).numel());
                for &v in g {
                    out.extend(std::iter::repeat_n(v / plane as f64, plane));
                }
                vec![(*a, out)]
            }
            Op::MaxPool2d { input, argmax } => {
                let mut out = vec![0.0; self.value(*input).numel()];
                for (&src, &v) in argmax.iter().zip(g) {
                    out[src] += v;
                }
                vec![(*input, out)]
            }
            Op::SoftmaxCrossEntropy { logits, probs, labels } => {
                let k = probs.len() / labels.len();
                let scale = g[0] / labels.len() as f64;
                let mut out: Vec<f64> = probs.iter().map(|p| p * scale).collect();
                for (row, &y) in labels.iter().enumerate() {
                    out[row * k + y] -= scale;
                }
                vec![(*logits, out)]
            }
            Op::Matmul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let mut out = Vec::with_capacity(2);
                if needs(*a) {
                    let mut da = vec![0.0; m * k];
                    gemm(m, n, k, g, false, val(*b), true, &mut da, false);
                    out.push((*a, da));
                }
                if needs(*b) {
                    let mut db = vec![0.0; k * n];
                    gemm(k, m, n, val(*a), true, g, false, &mut db, false);
                    out.push((*b, db));
                }
                out
            }
            Op::Conv2d {
                input,
                weight,
                bias,
                padding,
                cols,
            } => {
                let geo = self
                    .conv_geometry(*input, *weight, *padding)
                    .expect("geometry validated in forward");
                let (patch, plane) = (geo.patch(), geo.out_plane());
                let per_out = geo.out_ch * plane;
                let mut out = Vec::with_capacity(3);
                if let Some(bv) = bias {
                    if needs(*bv) {
                        let mut db = vec![0.0; geo.out_ch];
                        for (row, chunk) in g.chunks(plane).enumerate() {
                            db[row % geo.out_ch] += chunk.iter().sum::<f64>();
                        }
                        out.push((*bv, db));
                    }
                }
                if needs(*weight) {
                    let mut dw = vec![0.0; geo.out_ch * patch];
                    for b in 0..geo.batch {
                        let gb = &g[b * per_out..(b + 1) * per_out];
                        let cb = &cols[b * patch * plane..(b + 1) * patch * plane];
                        gemm(geo.out_ch, plane, patch, gb, false, cb, true, &mut dw, true);
                    }
                    out.push((*weight, dw));
                }
                if needs(*input) {
                    let w = val(*weight);
                    let image_len = geo.in_ch * geo.height * geo.width;
                    let mut dx = vec![0.0; geo.batch * image_len];
                    let mut dcols = vec![0.0; patch * plane];
                    for b in 0..geo.batch {
                        let gb = &g[b * per_out..(b + 1) * per_out];
                        gemm(patch, geo.out_ch, plane, w, true, gb, false, &mut dcols, false);
                        geo.col2im_add(&dcols, &mut dx[b * image_len..(b + 1) * image_len]);
                    }
                    out.push((*input, dx));
                }
                out
            }
        }
    }
}
