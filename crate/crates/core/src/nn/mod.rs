//! Tensors, layers with hand-written backward passes, MSE loss and Adam.
//!
//! Everything is generic over [`Scalar`] so the same code runs in `f32` for
//! training/inference and in `f64` for finite-difference gradient checks.
//! Convolutions use the cross-correlation convention (no kernel flip).

mod init;
mod layer;
mod loss;
mod network;
mod optim;
mod tensor;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use thiserror::Error;

pub use init::{he_bound, seeded_init};
pub use layer::{backward, forward, forward_into, Activation, LayerKind, LayerParams, KERNEL};
pub use loss::mse_loss;
pub use network::{Network, Trace, Workspace};
pub use optim::{Adam, AdamConfig};
pub use tensor::{Shape, Tensor4};

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Send
    + Sync
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("float conversion")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("float conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch{}: expected {expected}, got {actual}", layer.map(|i| format!(" at layer {i}")).unwrap_or_default())]
    Shape {
        layer: Option<usize>,
        expected: String,
        actual: String,
    },
    #[error("invalid layer `{0}`")]
    InvalidLayer(String),
    #[error("parameter buffer has {actual} values, expected {expected}")]
    ParamCount { expected: usize, actual: usize },
}

impl NnError {
    pub(crate) fn at_layer(self, index: usize) -> Self {
        match self {
            NnError::Shape {
                expected, actual, ..
            } => NnError::Shape {
                layer: Some(index),
                expected,
                actual,
            },
            other => other,
        }
    }
}
