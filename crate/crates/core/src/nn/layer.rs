use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{NnError, Scalar, Shape, Tensor4};

/// Spatial kernel size of every non-pointwise convolution.
pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

/// One layer of a feed-forward stack.
///
/// The compact text form (used inside model files) is:
/// `c<in>><out>s<stride>p<pad>` (3x3 conv), `d<ch>s<stride>p<pad>`
/// (depthwise 3x3), `p<in>><out>` (pointwise 1x1), `r<factor>` (replicator),
/// `f<in>><out>` (dense), `relu` / `sigmoid` / `linear`, `flat`, and
/// `sh<c>x<h>x<w>` (reshape).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum LayerKind {
    Conv2d {
        in_ch: usize,
        out_ch: usize,
        stride: usize,
        pad: usize,
    },
    DepthwiseConv2d {
        ch: usize,
        stride: usize,
        pad: usize,
    },
    PointwiseConv2d {
        in_ch: usize,
        out_ch: usize,
    },
    /// Nearest-neighbour upsampling: each pixel becomes a `factor x factor`
    /// block.
    Replicator {
        factor: usize,
    },
    Dense {
        in_dim: usize,
        out_dim: usize,
    },
    Activation(Activation),
    Flatten,
    Reshape(Shape),
}

fn shape_err(expected: impl Into<String>, actual: impl Into<String>) -> NnError {
    NnError::Shape {
        layer: None,
        expected: expected.into(),
        actual: actual.into(),
    }
}

fn conv_out(len: usize, pad: usize, stride: usize) -> Option<usize> {
    let padded = len + 2 * pad;
    (padded >= KERNEL && stride > 0).then(|| (padded - KERNEL) / stride + 1)
}

impl LayerKind {
    pub fn weight_len(&self) -> usize {
        match *self {
            LayerKind::Conv2d { in_ch, out_ch, .. } => TAPS * in_ch * out_ch,
            LayerKind::DepthwiseConv2d { ch, .. } => TAPS * ch,
            LayerKind::PointwiseConv2d { in_ch, out_ch } => in_ch * out_ch,
            LayerKind::Dense { in_dim, out_dim } => in_dim * out_dim,
            _ => 0,
        }
    }

    pub fn bias_len(&self) -> usize {
        match *self {
            LayerKind::Conv2d { out_ch, .. } | LayerKind::PointwiseConv2d { out_ch, .. } => out_ch,
            LayerKind::DepthwiseConv2d { ch, .. } => ch,
            LayerKind::Dense { out_dim, .. } => out_dim,
            _ => 0,
        }
    }

    /// Inputs feeding each weight, used for He initialisation.
    pub fn fan_in(&self) -> usize {
        match *self {
            LayerKind::Conv2d { in_ch, .. } => TAPS * in_ch,
            LayerKind::DepthwiseConv2d { .. } => TAPS,
            LayerKind::PointwiseConv2d { in_ch, .. } => in_ch,
            LayerKind::Dense { in_dim, .. } => in_dim,
            _ => 0,
        }
    }

    pub fn has_params(&self) -> bool {
        self.weight_len() > 0
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape, NnError> {
        match *self {
            LayerKind::Conv2d {
                in_ch,
                out_ch,
                stride,
                pad,
            } => {
                if input.c != in_ch {
                    return Err(shape_err(format!("{in_ch} input channels"), input.to_string()));
                }
                match (conv_out(input.h, pad, stride), conv_out(input.w, pad, stride)) {
                    (Some(h), Some(w)) => Ok(Shape::new(out_ch, h, w)),
                    _ => Err(shape_err("spatial size >= 3 after padding", input.to_string())),
                }
            }
            LayerKind::DepthwiseConv2d { ch, stride, pad } => {
                if input.c != ch {
                    return Err(shape_err(format!("{ch} channels"), input.to_string()));
                }
                match (conv_out(input.h, pad, stride), conv_out(input.w, pad, stride)) {
                    (Some(h), Some(w)) => Ok(Shape::new(ch, h, w)),
                    _ => Err(shape_err("spatial size >= 3 after padding", input.to_string())),
                }
            }
            LayerKind::PointwiseConv2d { in_ch, out_ch } => {
                if input.c != in_ch {
                    return Err(shape_err(format!("{in_ch} input channels"), input.to_string()));
                }
                Ok(Shape::new(out_ch, input.h, input.w))
            }
            LayerKind::Replicator { factor } => {
                if factor == 0 {
                    return Err(NnError::InvalidLayer("replicator factor 0".into()));
                }
                Ok(Shape::new(input.c, input.h * factor, input.w * factor))
            }
            LayerKind::Dense { in_dim, out_dim } => {
                if input.len() != in_dim {
                    return Err(shape_err(
                        format!("{in_dim} input features"),
                        format!("{} in {input}", input.len()),
                    ));
                }
                Ok(Shape::new(out_dim, 1, 1))
            }
            LayerKind::Activation(_) => Ok(input),
            LayerKind::Flatten => Ok(Shape::new(input.len(), 1, 1)),
            LayerKind::Reshape(target) => {
                if target.len() != input.len() {
                    return Err(shape_err(
                        format!("{} elements for {target}", target.len()),
                        format!("{} in {input}", input.len()),
                    ));
                }
                Ok(target)
            }
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerKind::Conv2d {
                in_ch,
                out_ch,
                stride,
                pad,
            } => write!(f, "c{in_ch}>{out_ch}s{stride}p{pad}"),
            LayerKind::DepthwiseConv2d { ch, stride, pad } => write!(f, "d{ch}s{stride}p{pad}"),
            LayerKind::PointwiseConv2d { in_ch, out_ch } => write!(f, "p{in_ch}>{out_ch}"),
            LayerKind::Replicator { factor } => write!(f, "r{factor}"),
            LayerKind::Dense { in_dim, out_dim } => write!(f, "f{in_dim}>{out_dim}"),
            LayerKind::Activation(Activation::Relu) => f.write_str("relu"),
            LayerKind::Activation(Activation::Sigmoid) => f.write_str("sigmoid"),
            LayerKind::Activation(Activation::Linear) => f.write_str("linear"),
            LayerKind::Flatten => f.write_str("flat"),
            LayerKind::Reshape(s) => write!(f, "sh{}x{}x{}", s.c, s.h, s.w),
        }
    }
}

impl FromStr for LayerKind {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || NnError::InvalidLayer(s.to_string());
        let int = |t: &str| t.parse::<usize>().map_err(|_| bad());
        // "<a>><b>" and "<a>s<b>p<c>" helpers.
        let pair = |t: &str| -> Result<(usize, usize), NnError> {
            let (a, b) = t.split_once('>').ok_or_else(bad)?;
            Ok((int(a)?, int(b)?))
        };
        let stride_pad = |t: &str| -> Result<(usize, usize), NnError> {
            let (s, p) = t.split_once('p').ok_or_else(bad)?;
            Ok((int(s)?, int(p)?))
        };
        let kind = match s {
            "relu" => LayerKind::Activation(Activation::Relu),
            "sigmoid" => LayerKind::Activation(Activation::Sigmoid),
            "linear" => LayerKind::Activation(Activation::Linear),
            "flat" => LayerKind::Flatten,
            _ if s.starts_with("sh") => {
                let dims: Vec<usize> = s[2..].split('x').map(int).collect::<Result<_, _>>()?;
                match dims.as_slice() {
                    &[c, h, w] => LayerKind::Reshape(Shape::new(c, h, w)),
                    _ => return Err(bad()),
                }
            }
            _ if s.len() > 1 => {
                let (head, rest) = s.split_at(1);
                match head {
                    "c" => {
                        let (io, sp) = rest.split_once('s').ok_or_else(bad)?;
                        let (in_ch, out_ch) = pair(io)?;
                        let (stride, pad) = stride_pad(sp)?;
                        LayerKind::Conv2d {
                            in_ch,
                            out_ch,
                            stride,
                            pad,
                        }
                    }
                    "d" => {
                        let (ch, sp) = rest.split_once('s').ok_or_else(bad)?;
                        let (stride, pad) = stride_pad(sp)?;
                        LayerKind::DepthwiseConv2d {
                            ch: int(ch)?,
                            stride,
                            pad,
                        }
                    }
                    "p" => {
                        let (in_ch, out_ch) = pair(rest)?;
                        LayerKind::PointwiseConv2d { in_ch, out_ch }
                    }
                    "r" => LayerKind::Replicator { factor: int(rest)? },
                    "f" => {
                        let (in_dim, out_dim) = pair(rest)?;
                        LayerKind::Dense { in_dim, out_dim }
                    }
                    _ => return Err(bad()),
                }
            }
            _ => return Err(bad()),
        };
        Ok(kind)
    }
}

impl From<LayerKind> for String {
    fn from(k: LayerKind) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for LayerKind {
    type Error = NnError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Weights, biases and their accumulated gradients for one layer.
///
/// Layouts: conv `[out][in][3][3]`, depthwise `[ch][3][3]`, pointwise and
/// dense `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub grad_w: Vec<T>,
    pub grad_b: Vec<T>,
}

impl<T: Scalar> LayerParams<T> {
    pub fn zeros(kind: &LayerKind) -> Self {
        let (nw, nb) = (kind.weight_len(), kind.bias_len());
        Self {
            weights: vec![T::zero(); nw],
            bias: vec![T::zero(); nb],
            grad_w: vec![T::zero(); nw],
            grad_b: vec![T::zero(); nb],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zero_grad(&mut self) {
        self.grad_w.iter_mut().for_each(|g| *g = T::zero());
        self.grad_b.iter_mut().for_each(|g| *g = T::zero());
    }
}

/// Geometry of one 3x3 correlation plane.
#[derive(Clone, Copy)]
struct Geom {
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
    stride: usize,
    pad: usize,
}

impl Geom {
    /// Output positions `[lo, hi)` whose tap `k` lands inside an input axis
    /// of length `n_in`.
    fn valid(&self, k: usize, n_in: usize, n_out: usize) -> (usize, usize) {
        let (s, p) = (self.stride, self.pad);
        let lo = if k >= p { 0 } else { (p - k).div_ceil(s) };
        let hi = if n_in + p > k {
            ((n_in - 1 + p - k) / s + 1).min(n_out)
        } else {
            0
        };
        (lo, hi.max(lo))
    }

    fn rows(&self, ky: usize) -> (usize, usize) {
        self.valid(ky, self.h, self.ho)
    }

    fn cols(&self, kx: usize) -> (usize, usize) {
        self.valid(kx, self.w, self.wo)
    }
}

/// `out += correlate(input, kernel)` over one plane.
fn corr_forward<T: Scalar>(out: &mut [T], input: &[T], kernel: &[T], g: Geom) {
    for ky in 0..KERNEL {
        let (y0, y1) = g.rows(ky);
        for kx in 0..KERNEL {
            let (x0, x1) = g.cols(kx);
            if x0 >= x1 {
                continue;
            }
            let wv = kernel[ky * KERNEL + kx];
            for oy in y0..y1 {
                let iy = oy * g.stride + ky - g.pad;
                let in_row = &input[iy * g.w..(iy + 1) * g.w];
                let out_row = &mut out[oy * g.wo + x0..oy * g.wo + x1];
                let ix0 = x0 * g.stride + kx - g.pad;
                if g.stride == 1 {
                    for (o, &i) in out_row.iter_mut().zip(&in_row[ix0..ix0 + (x1 - x0)]) {
                        *o += wv * i;
                    }
                } else {
                    for (j, o) in out_row.iter_mut().enumerate() {
                        *o += wv * in_row[ix0 + j * g.stride];
                    }
                }
            }
        }
    }
}

/// Dot product with eight independent accumulators so the loop vectorises.
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

fn total<T: Scalar>(a: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let mut c = a.chunks_exact(8);
    for x in &mut c {
        for l in 0..8 {
            acc[l] += x[l];
        }
    }
    let tail: T = c.remainder().iter().copied().sum();
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `grad_kernel += d(out)/d(kernel) . grad_out` over one plane.
fn corr_grad_kernel<T: Scalar>(grad_kernel: &mut [T], input: &[T], grad_out: &[T], g: Geom) {
    for ky in 0..KERNEL {
        let (y0, y1) = g.rows(ky);
        for kx in 0..KERNEL {
            let (x0, x1) = g.cols(kx);
            if x0 >= x1 {
                continue;
            }
            let mut acc = T::zero();
            for oy in y0..y1 {
                let iy = oy * g.stride + ky - g.pad;
                let in_row = &input[iy * g.w..(iy + 1) * g.w];
                let g_row = &grad_out[oy * g.wo + x0..oy * g.wo + x1];
                let ix0 = x0 * g.stride + kx - g.pad;
                if g.stride == 1 {
                    acc += dot(g_row, &in_row[ix0..ix0 + (x1 - x0)]);
                } else {
                    for (j, &go) in g_row.iter().enumerate() {
                        acc += go * in_row[ix0 + j * g.stride];
                    }
                }
            }
            grad_kernel[ky * KERNEL + kx] += acc;
        }
    }
}

/// `grad_in += d(out)/d(input) . grad_out` over one plane.
fn corr_grad_input<T: Scalar>(grad_in: &mut [T], kernel: &[T], grad_out: &[T], g: Geom) {
    for ky in 0..KERNEL {
        let (y0, y1) = g.rows(ky);
        for kx in 0..KERNEL {
            let (x0, x1) = g.cols(kx);
            if x0 >= x1 {
                continue;
            }
            let wv = kernel[ky * KERNEL + kx];
            for oy in y0..y1 {
                let iy = oy * g.stride + ky - g.pad;
                let gi_row = &mut grad_in[iy * g.w..(iy + 1) * g.w];
                let g_row = &grad_out[oy * g.wo + x0..oy * g.wo + x1];
                let ix0 = x0 * g.stride + kx - g.pad;
                if g.stride == 1 {
                    for (gi, &go) in gi_row[ix0..ix0 + (x1 - x0)].iter_mut().zip(g_row) {
                        *gi += wv * go;
                    }
                } else {
                    for (j, &go) in g_row.iter().enumerate() {
                        gi_row[ix0 + j * g.stride] += wv * go;
                    }
                }
            }
        }
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn check_params<T: Scalar>(kind: &LayerKind, p: &LayerParams<T>) -> Result<(), NnError> {
    let expected = kind.weight_len() + kind.bias_len();
    if p.weights.len() != kind.weight_len() || p.bias.len() != kind.bias_len() {
        return Err(NnError::ParamCount {
            expected,
            actual: p.len(),
        });
    }
    Ok(())
}

fn geom(input: Shape, out: Shape, stride: usize, pad: usize) -> Geom {
    Geom {
        h: input.h,
        w: input.w,
        ho: out.h,
        wo: out.w,
        stride,
        pad,
    }
}

/// Applies one layer to a batch.
pub fn forward<T: Scalar>(
    kind: &LayerKind,
    params: &LayerParams<T>,
    x: &Tensor4<T>,
) -> Result<Tensor4<T>, NnError> {
    let mut out = Tensor4::zeros(0, Shape::new(0, 0, 0));
    forward_into(kind, params, x, &mut out)?;
    Ok(out)
}

/// [`forward`] into a caller-owned tensor, reusing its allocation. Every
/// output element is overwritten.
pub fn forward_into<T: Scalar>(
    kind: &LayerKind,
    params: &LayerParams<T>,
    x: &Tensor4<T>,
    out: &mut Tensor4<T>,
) -> Result<(), NnError> {
    check_params(kind, params)?;
    let in_shape = x.shape();
    let out_shape = kind.output_shape(in_shape)?;
    let batch = x.batch();
    out.reset(batch, out_shape);
    let (ip, op) = (in_shape.plane(), out_shape.plane());

    match *kind {
        LayerKind::Conv2d {
            in_ch,
            out_ch,
            stride,
            pad,
        } => {
            let g = geom(in_shape, out_shape, stride, pad);
            let xd = x.data();
            let od = out.data_mut();
            for b in 0..batch {
                for co in 0..out_ch {
                    let o = &mut od[(b * out_ch + co) * op..(b * out_ch + co + 1) * op];
                    o.iter_mut().for_each(|v| *v = params.bias[co]);
                    for ci in 0..in_ch {
                        let k = &params.weights[(co * in_ch + ci) * TAPS..(co * in_ch + ci + 1) * TAPS];
                        let i = &xd[(b * in_ch + ci) * ip..(b * in_ch + ci + 1) * ip];
                        corr_forward(o, i, k, g);
                    }
                }
            }
        }
        LayerKind::DepthwiseConv2d { ch, stride, pad } => {
            let g = geom(in_shape, out_shape, stride, pad);
            let xd = x.data();
            let od = out.data_mut();
            for b in 0..batch {
                for c in 0..ch {
                    let o = &mut od[(b * ch + c) * op..(b * ch + c + 1) * op];
                    o.iter_mut().for_each(|v| *v = params.bias[c]);
                    let k = &params.weights[c * TAPS..(c + 1) * TAPS];
                    let i = &xd[(b * ch + c) * ip..(b * ch + c + 1) * ip];
                    corr_forward(o, i, k, g);
                }
            }
        }
        LayerKind::PointwiseConv2d { in_ch, out_ch } => {
            let xd = x.data();
            let od = out.data_mut();
            for b in 0..batch {
                for co in 0..out_ch {
                    let o = &mut od[(b * out_ch + co) * op..(b * out_ch + co + 1) * op];
                    o.iter_mut().for_each(|v| *v = params.bias[co]);
                    for ci in 0..in_ch {
                        let wv = params.weights[co * in_ch + ci];
                        let i = &xd[(b * in_ch + ci) * ip..(b * in_ch + ci + 1) * ip];
                        for (ov, &iv) in o.iter_mut().zip(i) {
                            *ov += wv * iv;
                        }
                    }
                }
            }
        }
        LayerKind::Replicator { factor } => {
            let (h, w) = (in_shape.h, in_shape.w);
            let wo = out_shape.w;
            let xd = x.data();
            let od = out.data_mut();
            for plane in 0..batch * in_shape.c {
                let i = &xd[plane * ip..(plane + 1) * ip];
                let o = &mut od[plane * op..(plane + 1) * op];
                for y in 0..h {
                    let row = &mut o[y * factor * wo..(y * factor + 1) * wo];
                    for (xx, &v) in i[y * w..(y + 1) * w].iter().enumerate() {
                        row[xx * factor..(xx + 1) * factor].fill(v);
                    }
                    for r in 1..factor {
                        o.copy_within(y * factor * wo..(y * factor + 1) * wo, (y * factor + r) * wo);
                    }
                }
            }
        }
        LayerKind::Dense { in_dim, out_dim } => {
            let od = out.data_mut();
            for b in 0..batch {
                let xi = x.sample(b);
                for o in 0..out_dim {
                    let wr = &params.weights[o * in_dim..(o + 1) * in_dim];
                    od[b * out_dim + o] = dot(wr, xi) + params.bias[o];
                }
            }
        }
        LayerKind::Activation(act) => {
            let od = out.data_mut();
            for (o, &v) in od.iter_mut().zip(x.data()) {
                *o = match act {
                    Activation::Relu => v.max(T::zero()),
                    Activation::Sigmoid => sigmoid(v),
                    Activation::Linear => v,
                };
            }
        }
        LayerKind::Flatten | LayerKind::Reshape(_) => {
            out.data_mut().copy_from_slice(x.data());
        }
    }
    Ok(())
}

/// Back-propagates `grad_out` through one layer.
///
/// Returns the gradient with respect to `x` and adds the weight and bias
/// gradients into `params.grad_w` / `params.grad_b`.
pub fn backward<T: Scalar>(
    kind: &LayerKind,
    params: &mut LayerParams<T>,
    x: &Tensor4<T>,
    grad_out: &Tensor4<T>,
) -> Result<Tensor4<T>, NnError> {
    check_params(kind, params)?;
    let in_shape = x.shape();
    let out_shape = kind.output_shape(in_shape)?;
    grad_out.expect_shape(out_shape)?;
    if grad_out.batch() != x.batch() {
        return Err(shape_err(
            format!("batch {}", x.batch()),
            format!("batch {}", grad_out.batch()),
        ));
    }
    let batch = x.batch();
    let mut grad_in = Tensor4::zeros(batch, in_shape);
    let (ip, op) = (in_shape.plane(), out_shape.plane());
    let gd = grad_out.data();

    match *kind {
        LayerKind::Conv2d {
            in_ch,
            out_ch,
            stride,
            pad,
        } => {
            let g = geom(in_shape, out_shape, stride, pad);
            let xd = x.data();
            let gi = grad_in.data_mut();
            for b in 0..batch {
                for co in 0..out_ch {
                    let go = &gd[(b * out_ch + co) * op..(b * out_ch + co + 1) * op];
                    params.grad_b[co] += total(go);
                    for ci in 0..in_ch {
                        let kr = (co * in_ch + ci) * TAPS..(co * in_ch + ci + 1) * TAPS;
                        let pr = (b * in_ch + ci) * ip..(b * in_ch + ci + 1) * ip;
                        corr_grad_kernel(&mut params.grad_w[kr.clone()], &xd[pr.clone()], go, g);
                        corr_grad_input(&mut gi[pr], &params.weights[kr], go, g);
                    }
                }
            }
        }
        LayerKind::DepthwiseConv2d { ch, stride, pad } => {
            let g = geom(in_shape, out_shape, stride, pad);
            let xd = x.data();
            let gi = grad_in.data_mut();
            for b in 0..batch {
                for c in 0..ch {
                    let go = &gd[(b * ch + c) * op..(b * ch + c + 1) * op];
                    params.grad_b[c] += total(go);
                    let kr = c * TAPS..(c + 1) * TAPS;
                    let pr = (b * ch + c) * ip..(b * ch + c + 1) * ip;
                    corr_grad_kernel(&mut params.grad_w[kr.clone()], &xd[pr.clone()], go, g);
                    corr_grad_input(&mut gi[pr], &params.weights[kr], go, g);
                }
            }
        }
        LayerKind::PointwiseConv2d { in_ch, out_ch } => {
            let xd = x.data();
            let gi = grad_in.data_mut();
            for b in 0..batch {
                for co in 0..out_ch {
                    let go = &gd[(b * out_ch + co) * op..(b * out_ch + co + 1) * op];
                    params.grad_b[co] += total(go);
                    for ci in 0..in_ch {
                        let pr = (b * in_ch + ci) * ip..(b * in_ch + ci + 1) * ip;
                        params.grad_w[co * in_ch + ci] += dot(go, &xd[pr.clone()]);
                        let wv = params.weights[co * in_ch + ci];
                        for (gv, &a) in gi[pr].iter_mut().zip(go) {
                            *gv += wv * a;
                        }
                    }
                }
            }
        }
        LayerKind::Replicator { factor } => {
            let (h, w) = (in_shape.h, in_shape.w);
            let wo = out_shape.w;
            let gi = grad_in.data_mut();
            for plane in 0..batch * in_shape.c {
                let go = &gd[plane * op..(plane + 1) * op];
                let g_in = &mut gi[plane * ip..(plane + 1) * ip];
                for y in 0..h {
                    for r in 0..factor {
                        let row = &go[(y * factor + r) * wo..(y * factor + r + 1) * wo];
                        for (xx, gv) in g_in[y * w..(y + 1) * w].iter_mut().enumerate() {
                            *gv += row[xx * factor..(xx + 1) * factor].iter().copied().sum();
                        }
                    }
                }
            }
        }
        LayerKind::Dense { in_dim, out_dim } => {
            let gi = grad_in.data_mut();
            for b in 0..batch {
                let xi = x.sample(b);
                let gin = &mut gi[b * in_dim..(b + 1) * in_dim];
                for o in 0..out_dim {
                    let go = gd[b * out_dim + o];
                    params.grad_b[o] += go;
                    let wr = &params.weights[o * in_dim..(o + 1) * in_dim];
                    let gw = &mut params.grad_w[o * in_dim..(o + 1) * in_dim];
                    for ((gwv, &xv), (giv, &wv)) in gw.iter_mut().zip(xi).zip(gin.iter_mut().zip(wr)) {
                        *gwv += go * xv;
                        *giv += go * wv;
                    }
                }
            }
        }
        LayerKind::Activation(act) => {
            let gi = grad_in.data_mut();
            for ((g, &go), &v) in gi.iter_mut().zip(gd).zip(x.data()) {
                *g = match act {
                    Activation::Relu => {
                        if v > T::zero() {
                            go
                        } else {
                            T::zero()
                        }
                    }
                    Activation::Sigmoid => {
                        let s = sigmoid(v);
                        go * s * (T::one() - s)
                    }
                    Activation::Linear => go,
                };
            }
        }
        LayerKind::Flatten | LayerKind::Reshape(_) => {
            grad_in.data_mut().copy_from_slice(gd);
        }
    }
    Ok(grad_in)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(data: Vec<f64>, c: usize, h: usize, w: usize) -> Tensor4<f64> {
        Tensor4::from_vec(data, 1, Shape::new(c, h, w)).unwrap()
    }

    #[test]
    fn replicator_forward_and_backward() {
        let k = LayerKind::Replicator { factor: 2 };
        let mut p = LayerParams::zeros(&k);
        let x = t(vec![1.0, 2.0, 3.0, 4.0], 1, 2, 2);
        let y = forward(&k, &p, &x).unwrap();
        assert_eq!(
            y.data(),
            &[
                1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0, 3.0, 3.0, 4.0, 4.0
            ]
        );
        let g = Tensor4::filled(1, Shape::new(1, 4, 4), 1.0);
        let gi = backward(&k, &mut p, &x, &g).unwrap();
        assert_eq!(gi.data(), &[4.0; 4]);
    }

    #[test]
    fn depthwise_identity_kernel() {
        let k = LayerKind::DepthwiseConv2d {
            ch: 2,
            stride: 1,
            pad: 1,
        };
        let mut p = LayerParams::<f64>::zeros(&k);
        p.weights[4] = 1.0;
        p.weights[9 + 4] = 1.0;
        let x = t((0..32).map(|v| v as f64 * 0.5 - 3.0).collect(), 2, 4, 4);
        assert_eq!(forward(&k, &p, &x).unwrap(), x);
    }

    #[test]
    fn conv_all_ones() {
        let k = LayerKind::Conv2d {
            in_ch: 1,
            out_ch: 1,
            stride: 1,
            pad: 1,
        };
        let mut p = LayerParams::<f64>::zeros(&k);
        p.weights.fill(1.0);
        let y = forward(&k, &p, &t(vec![1.0; 16], 1, 4, 4)).unwrap();
        #[rustfmt::skip]
        let expected = [
            4.0, 6.0, 6.0, 4.0,
            6.0, 9.0, 9.0, 6.0,
            6.0, 9.0, 9.0, 6.0,
            4.0, 6.0, 6.0, 4.0,
        ];
        assert_eq!(y.data(), &expected);
    }

    #[test]
    fn strided_conv_shape() {
        let k = LayerKind::Conv2d {
            in_ch: 1,
            out_ch: 3,
            stride: 2,
            pad: 1,
        };
        assert_eq!(k.output_shape(Shape::new(1, 32, 128)).unwrap(), Shape::new(3, 16, 64));
        assert_eq!(k.output_shape(Shape::new(1, 7, 5)).unwrap(), Shape::new(3, 4, 3));
        assert!(k.output_shape(Shape::new(2, 8, 8)).is_err());
    }

    #[test]
    fn dense_with_zero_weights_blocks_gradient() {
        let k = LayerKind::Dense { in_dim: 4, out_dim: 3 };
        let mut p = LayerParams::<f64>::zeros(&k);
        let x = t(vec![1.0, -2.0, 3.0, 0.5], 4, 1, 1);
        let g = t(vec![5.0, -1.0, 2.0], 3, 1, 1);
        let gi = backward(&k, &mut p, &x, &g).unwrap();
        assert!(gi.data().iter().all(|&v| v == 0.0));
        assert_eq!(p.grad_b, vec![5.0, -1.0, 2.0]);
    }

    #[test]
    fn mismatched_input_is_a_shape_error() {
        let k = LayerKind::PointwiseConv2d { in_ch: 3, out_ch: 2 };
        let p = LayerParams::<f64>::zeros(&k);
        let x = t(vec![0.0; 8], 2, 2, 2);
        assert!(matches!(forward(&k, &p, &x), Err(NnError::Shape { .. })));
    }

    #[test]
    fn text_form_roundtrip() {
        let kinds = [
            LayerKind::Conv2d { in_ch: 8, out_ch: 16, stride: 2, pad: 1 },
            LayerKind::DepthwiseConv2d { ch: 4, stride: 1, pad: 1 },
            LayerKind::PointwiseConv2d { in_ch: 1, out_ch: 5 },
            LayerKind::Replicator { factor: 2 },
            LayerKind::Dense { in_dim: 512, out_dim: 64 },
            LayerKind::Activation(Activation::Relu),
            LayerKind::Activation(Activation::Sigmoid),
            LayerKind::Activation(Activation::Linear),
            LayerKind::Flatten,
            LayerKind::Reshape(Shape::new(8, 4, 16)),
        ];
        for k in kinds {
            assert_eq!(k.to_string().parse::<LayerKind>().unwrap(), k);
        }
        for junk in ["", "x", "c1>2", "d4s2", "p4", "shx1", "f1>", "r"] {
            assert!(junk.parse::<LayerKind>().is_err(), "{junk}");
        }
    }
}
