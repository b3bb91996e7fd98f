//! Declarative autoencoder descriptions, efficiency accounting and the
//! `.olnt` model file.

mod bundle;
mod cost;
mod template;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{LayerKind, Network, NnError, Scalar, Shape};

pub use bundle::{load_bundle, save_bundle, ModelBundle, NormStats, BUNDLE_MAGIC, BUNDLE_VERSION, FIXED_HEADER_BYTES};
pub use cost::{count_flops, count_macs, count_params, layer_flops, layer_macs, EfficiencyReport, LayerCost};
pub use template::{make_template, make_template_with_widths, template_widths, BASE_WIDTHS, MAX_DEPTH};

/// Model input: one channel, 32 frames by 128 Mel bins.
pub const INPUT_SHAPE: Shape = Shape::new(1, 32, 128);

#[derive(Debug, Error)]
pub enum ArchError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invalid architecture: {0}")]
    Invalid(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: expected `OLNT`, found {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported model format version {found} (this build reads {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("weight count mismatch: expected {expected}, found {found}")]
    WeightCountMismatch { expected: usize, found: usize },
    #[error("truncated model file: {0}")]
    Truncated(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Purely convolutional encoder/decoder.
    FanConv,
    /// Adds standard convolutions and a dense latent bottleneck.
    SliderDenseBottleneck,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::FanConv => "fan_conv",
            Family::SliderDenseBottleneck => "slider_dense_bottleneck",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = ArchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fan_conv" | "fan" => Ok(Family::FanConv),
            "slider_dense_bottleneck" | "slider" => Ok(Family::SliderDenseBottleneck),
            other => Err(ArchError::Invalid(format!("unknown family `{other}`"))),
        }
    }
}

/// A validated autoencoder: its layers map a `1 x 32 x 128` crop back onto
/// the same shape.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArchSpec {
    name: String,
    family: Family,
    layers: Vec<LayerKind>,
}

impl ArchSpec {
    pub fn new(name: impl Into<String>, family: Family, layers: Vec<LayerKind>) -> Result<Self, ArchError> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(ArchError::Invalid(format!(
                "name `{name}` must be non-empty without whitespace"
            )));
        }
        let shapes = Network::<f32>::infer_shapes(&layers, INPUT_SHAPE)?;
        let out = shapes.last().copied().unwrap_or(INPUT_SHAPE);
        if out != INPUT_SHAPE {
            return Err(ArchError::Invalid(format!(
                "output shape {out} does not reconstruct the input {INPUT_SHAPE}"
            )));
        }
        let dense = layers
            .iter()
            .filter(|k| matches!(k, LayerKind::Dense { .. }))
            .count();
        match family {
            Family::FanConv if dense > 0 => {
                return Err(ArchError::Invalid("fan_conv architectures have no dense layers".into()))
            }
            Family::SliderDenseBottleneck if dense == 0 => {
                return Err(ArchError::Invalid(
                    "slider_dense_bottleneck architectures need a dense bottleneck".into(),
                ))
            }
            _ => {}
        }
        Ok(Self { name, family, layers })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn layers(&self) -> &[LayerKind] {
        &self.layers
    }

    pub fn input_shape(&self) -> Shape {
        INPUT_SHAPE
    }

    /// Output shape after each layer.
    pub fn shapes(&self) -> Vec<Shape> {
        Network::<f32>::infer_shapes(&self.layers, INPUT_SHAPE).expect("validated at construction")
    }

    pub fn param_count(&self) -> usize {
        count_params(self)
    }

    /// A freshly initialised network for this architecture.
    pub fn instantiate<T: Scalar>(&self, seed: u64) -> Network<T> {
        Network::seeded(self.layers.clone(), INPUT_SHAPE, seed).expect("validated at construction")
    }

    /// Single-line text form: `<family> <name> <layer> <layer> ...`.
    pub fn describe(&self) -> String {
        let mut s = format!("{} {}", self.family, self.name);
        for k in &self.layers {
            s.push(' ');
            s.push_str(&k.to_string());
        }
        s
    }

    pub fn parse_description(text: &str) -> Result<Self, ArchError> {
        let mut tokens = text.split_whitespace();
        let family: Family = tokens
            .next()
            .ok_or_else(|| ArchError::Invalid("empty description".into()))?
            .parse()?;
        let name = tokens
            .next()
            .ok_or_else(|| ArchError::Invalid("description has no name".into()))?;
        let layers = tokens
            .map(|t| t.parse::<LayerKind>().map_err(ArchError::from))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(name, family, layers)
    }
}

impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}
