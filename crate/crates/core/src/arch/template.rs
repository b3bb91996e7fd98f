//! Prototype autoencoders for the two macro-architecture families.
//!
//! Encoder block `i`: depthwise 3x3 (stride 2) -> pointwise to `w_i` -> ReLU.
//! Decoder block: replicator x2 -> depthwise 3x3 (stride 1) -> pointwise ->
//! ReLU, mirroring the encoder widths back down to `w_0`. A final pointwise
//! layer maps to one channel with a linear output.
//!
//! The slider family adds a standard 3x3 convolution on each side of the
//! latent space and a `Flatten -> Dense(bottleneck) -> Dense -> Reshape`
//! bottleneck between them.

use super::{ArchError, ArchSpec, Family, INPUT_SHAPE};
use crate::nn::{Activation, LayerKind, Network, Shape};

/// Per-block channel widths at multiplier 1.
pub const BASE_WIDTHS: [usize; 5] = [8, 16, 32, 64, 128];
/// Every encoder block halves both spatial axes; 32 frames allow five.
pub const MAX_DEPTH: usize = 5;

const RELU: LayerKind = LayerKind::Activation(Activation::Relu);

/// Encoder widths `max(1, round(BASE_WIDTHS[i] * multiplier))`.
pub fn template_widths(width_multiplier: f64, depth: usize) -> Result<Vec<usize>, ArchError> {
    if !(width_multiplier > 0.0) || !width_multiplier.is_finite() {
        return Err(ArchError::Invalid(format!(
            "width multiplier must be positive, got {width_multiplier}"
        )));
    }
    if depth == 0 || depth > MAX_DEPTH {
        return Err(ArchError::Invalid(format!("depth must lie in 1..={MAX_DEPTH}, got {depth}")));
    }
    Ok(BASE_WIDTHS[..depth]
        .iter()
        .map(|&b| ((b as f64 * width_multiplier).round() as usize).max(1))
        .collect())
}

/// Builds a template from explicit encoder widths.
pub fn make_template_with_widths(
    family: Family,
    widths: &[usize],
    bottleneck_dim: Option<usize>,
    name: impl Into<String>,
) -> Result<ArchSpec, ArchError> {
    let depth = widths.len();
    if depth == 0 || depth > MAX_DEPTH {
        return Err(ArchError::Invalid(format!("depth must lie in 1..={MAX_DEPTH}, got {depth}")));
    }
    if widths.contains(&0) {
        return Err(ArchError::Invalid("channel widths must be positive".into()));
    }
    match (family, bottleneck_dim) {
        (Family::SliderDenseBottleneck, None) | (Family::SliderDenseBottleneck, Some(0)) => {
            return Err(ArchError::Invalid("slider family needs a positive bottleneck_dim".into()))
        }
        (Family::FanConv, Some(_)) => {
            return Err(ArchError::Invalid("fan_conv family takes no bottleneck_dim".into()))
        }
        _ => {}
    }

    let mut layers = Vec::new();
    let mut ch = INPUT_SHAPE.c;
    for &w in widths {
        layers.push(LayerKind::DepthwiseConv2d { ch, stride: 2, pad: 1 });
        layers.push(LayerKind::PointwiseConv2d { in_ch: ch, out_ch: w });
        layers.push(RELU);
        ch = w;
    }

    if let (Family::SliderDenseBottleneck, Some(latent)) = (family, bottleneck_dim) {
        let scale = 1usize << depth;
        let grid = Shape::new(ch, INPUT_SHAPE.h / scale, INPUT_SHAPE.w / scale);
        let conv = LayerKind::Conv2d { in_ch: ch, out_ch: ch, stride: 1, pad: 1 };
        layers.extend([
            conv,
            RELU,
            LayerKind::Flatten,
            LayerKind::Dense { in_dim: grid.len(), out_dim: latent },
            RELU,
            LayerKind::Dense { in_dim: latent, out_dim: grid.len() },
            RELU,
            LayerKind::Reshape(grid),
            conv,
            RELU,
        ]);
    }

    for j in 0..depth {
        let out = if j + 1 < depth { widths[depth - 2 - j] } else { widths[0] };
        layers.push(LayerKind::Replicator { factor: 2 });
        layers.push(LayerKind::DepthwiseConv2d { ch, stride: 1, pad: 1 });
        layers.push(LayerKind::PointwiseConv2d { in_ch: ch, out_ch: out });
        layers.push(RELU);
        ch = out;
    }
    layers.push(LayerKind::PointwiseConv2d { in_ch: ch, out_ch: INPUT_SHAPE.c });
    layers.push(LayerKind::Activation(Activation::Linear));

    // Shape-check before the spec (and any weights) exist.
    Network::<f32>::infer_shapes(&layers, INPUT_SHAPE)?;
    ArchSpec::new(name, family, layers)
}

/// Instantiates the family prototype at one point of the design space.
pub fn make_template(
    family: Family,
    width_multiplier: f64,
    depth: usize,
    bottleneck_dim: Option<usize>,
) -> Result<ArchSpec, ArchError> {
    let widths = template_widths(width_multiplier, depth)?;
    let name = match bottleneck_dim {
        Some(b) => format!("{family}-w{width_multiplier}-d{depth}-b{b}"),
        None => format!("{family}-w{width_multiplier}-d{depth}"),
    };
    make_template_with_widths(family, &widths, bottleneck_dim, name)
}
