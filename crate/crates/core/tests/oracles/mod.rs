//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use outliernet::arch::ArchSpec;
use outliernet::audio_io::Label;
use outliernet::nn::{backward, forward, Activation, LayerKind, LayerParams, Shape, Tensor4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Periodic Hann window, `0.5 - 0.5 cos(2 pi n / N)`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// `|X_k|^2` for `k = 0..=n/2` by the O(n^2) definition.
pub fn dft_power(frame: &[f64], window: &[f64]) -> Vec<f64> {
    let n = frame.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (t, (&x, &w)) in frame.iter().zip(window).enumerate() {
                // Reduce the phase index first to keep the angle small.
                let ang = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                re += x * w * ang.cos();
                im += x * w * ang.sin();
            }
            re * re + im * im
        })
        .collect()
}

/// Fraction of (anomalous, normal) pairs ranked correctly, ties counting half.
pub fn brute_auc(scores: &[(f64, Label)]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for &(a, la) in scores {
        if la != Label::Anomalous {
            continue;
        }
        for &(n, ln) in scores {
            if ln != Label::Normal {
                continue;
            }
            pairs += 1.0;
            if a > n {
                num += 1.0;
            } else if a == n {
                num += 0.5;
            }
        }
    }
    num / pairs
}

fn out_len(n: usize, pad: usize, stride: usize) -> usize {
    (n + 2 * pad - 3) / stride + 1
}

/// Counts multiply-accumulates and FLOPs by walking every loop an inference
/// would execute. Padded taps count as MACs. FLOPs are two per MAC plus one
/// per output element for each bias add and each non-identity activation.
pub fn loop_count(arch: &ArchSpec) -> (u64, u64) {
    let (mut c, mut h, mut w) = (1usize, 32usize, 128usize);
    let (mut macs, mut flops) = (0u64, 0u64);
    for layer in arch.layers() {
        let mut layer_macs = 0u64;
        let mut elementwise = 0u64;
        match *layer {
            LayerKind::Conv2d { in_ch, out_ch, stride, pad } => {
                let (ho, wo) = (out_len(h, pad, stride), out_len(w, pad, stride));
                for _co in 0..out_ch {
                    for _y in 0..ho {
                        for _x in 0..wo {
                            for _ci in 0..in_ch {
                                for _k in 0..9 {
                                    layer_macs += 1;
                                }
                            }
                            elementwise += 1;
                        }
                    }
                }
                (c, h, w) = (out_ch, ho, wo);
            }
            LayerKind::DepthwiseConv2d { ch, stride, pad } => {
                let (ho, wo) = (out_len(h, pad, stride), out_len(w, pad, stride));
                for _c in 0..ch {
                    for _y in 0..ho {
                        for _x in 0..wo {
                            for _k in 0..9 {
                                layer_macs += 1;
                            }
                            elementwise += 1;
                        }
                    }
                }
                (h, w) = (ho, wo);
            }
            LayerKind::PointwiseConv2d { in_ch, out_ch } => {
                for _co in 0..out_ch {
                    for _p in 0..h * w {
                        for _ci in 0..in_ch {
                            layer_macs += 1;
                        }
                        elementwise += 1;
                    }
                }
                c = out_ch;
            }
            LayerKind::Replicator { factor } => {
                h *= factor;
                w *= factor;
            }
            LayerKind::Dense { in_dim, out_dim } => {
                for _o in 0..out_dim {
                    for _i in 0..in_dim {
                        layer_macs += 1;
                    }
                    elementwise += 1;
                }
                (c, h, w) = (out_dim, 1, 1);
            }
            LayerKind::Activation(Activation::Linear) => {}
            LayerKind::Activation(_) => elementwise += (c * h * w) as u64,
            LayerKind::Flatten => (c, h, w) = (c * h * w, 1, 1),
            LayerKind::Reshape(s) => (c, h, w) = (s.c, s.h, s.w),
        }
        macs += layer_macs;
        flops += 2 * layer_macs + elementwise;
    }
    (macs, flops)
}

/// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)` over
/// every input and parameter element, for the loss `sum(layer(x) * r)`.
pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
}

pub const FD_STEP: f64 = 1e-5;
pub const REL_FLOOR: f64 = 1e-6;

fn weighted_sum(kind: &LayerKind, p: &LayerParams<f64>, x: &Tensor4<f64>, r: &Tensor4<f64>) -> f64 {
    let y = forward(kind, p, x).expect("forward");
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn rel(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Input values bounded away from zero so ReLU never sits on its kink.
pub fn random_input(rng: &mut ChaCha8Rng, batch: usize, shape: Shape) -> Tensor4<f64> {
    let data = (0..batch * shape.len())
        .map(|_| {
            let m: f64 = rng.random_range(0.05..1.0);
            if rng.random::<bool>() { m } else { -m }
        })
        .collect();
    Tensor4::from_vec(data, batch, shape).unwrap()
}

pub fn grad_check(kind: &LayerKind, input: Shape, batch: usize, rng: &mut ChaCha8Rng) -> GradCheck {
    let mut p = LayerParams::<f64>::zeros(kind);
    p.weights.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    p.bias.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    let x = random_input(rng, batch, input);
    let out = kind.output_shape(input).unwrap();
    let r = Tensor4::from_vec(
        (0..batch * out.len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        batch,
        out,
    )
    .unwrap();

    let mut analytic = p.clone();
    let gx = backward(kind, &mut analytic, &x, &r).unwrap();

    let mut worst = 0.0f64;
    let mut checked = 0;
    for i in 0..x.len() {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp.data_mut()[i] += FD_STEP;
        xm.data_mut()[i] -= FD_STEP;
        let num = (weighted_sum(kind, &p, &xp, &r) - weighted_sum(kind, &p, &xm, &r)) / (2.0 * FD_STEP);
        worst = worst.max(rel(gx.data()[i], num));
        checked += 1;
    }
    for i in 0..p.weights.len() {
        let (mut pp, mut pm) = (p.clone(), p.clone());
        pp.weights[i] += FD_STEP;
        pm.weights[i] -= FD_STEP;
        let num = (weighted_sum(kind, &pp, &x, &r) - weighted_sum(kind, &pm, &x, &r)) / (2.0 * FD_STEP);
        worst = worst.max(rel(analytic.grad_w[i], num));
        checked += 1;
    }
    for i in 0..p.bias.len() {
        let (mut pp, mut pm) = (p.clone(), p.clone());
        pp.bias[i] += FD_STEP;
        pm.bias[i] -= FD_STEP;
        let num = (weighted_sum(kind, &pp, &x, &r) - weighted_sum(kind, &pm, &x, &r)) / (2.0 * FD_STEP);
        worst = worst.max(rel(analytic.grad_b[i], num));
        checked += 1;
    }
    GradCheck {
        max_rel_err: worst,
        checked,
    }
}

/// One representative of every layer kind with an input shape it accepts.
pub fn gradient_cases() -> Vec<(LayerKind, Shape)> {
    let s = Shape::new(3, 6, 7);
    vec![
        (LayerKind::Conv2d { in_ch: 3, out_ch: 2, stride: 1, pad: 1 }, s),
        (LayerKind::Conv2d { in_ch: 3, out_ch: 4, stride: 2, pad: 1 }, s),
        (LayerKind::Conv2d { in_ch: 3, out_ch: 2, stride: 1, pad: 0 }, s),
        (LayerKind::DepthwiseConv2d { ch: 3, stride: 1, pad: 1 }, s),
        (LayerKind::DepthwiseConv2d { ch: 3, stride: 2, pad: 1 }, s),
        (LayerKind::PointwiseConv2d { in_ch: 3, out_ch: 5 }, s),
        (LayerKind::Replicator { factor: 2 }, s),
        (LayerKind::Dense { in_dim: 12, out_dim: 7 }, Shape::new(12, 1, 1)),
        (LayerKind::Activation(Activation::Relu), s),
        (LayerKind::Activation(Activation::Sigmoid), s),
        (LayerKind::Activation(Activation::Linear), s),
        (LayerKind::Flatten, s),
        (LayerKind::Reshape(Shape::new(6, 7, 3)), s),
    ]
}
