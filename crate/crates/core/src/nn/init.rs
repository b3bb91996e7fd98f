use rand::Rng;

use super::{LayerKind, LayerParams, Scalar};
use crate::seed;

/// He-uniform bound `sqrt(6 / fan_in)`.
pub fn he_bound(kind: &LayerKind) -> f64 {
    (6.0 / kind.fan_in().max(1) as f64).sqrt()
}

/// He-uniform weights and zero biases, drawn in layer order from one seeded
/// stream. Values are generated in `f64` and rounded to `T`, so the `f32` and
/// `f64` initialisations of an architecture agree up to rounding.
pub fn seeded_init<T: Scalar>(layers: &[LayerKind], seed: u64) -> Vec<LayerParams<T>> {
    let mut rng = seed::rng(seed, "weight-init");
    layers
        .iter()
        .map(|kind| {
            let mut p = LayerParams::zeros(kind);
            let bound = he_bound(kind);
            for w in p.weights.iter_mut() {
                *w = T::from_f64_lossy(rng.random_range(-bound..bound));
            }
            p
        })
        .collect()
}
