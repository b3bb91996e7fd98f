//! Parameter, MAC and FLOP accounting.
//!
//! FLOPs count 2 per multiply-accumulate, plus one per output element for
//! each bias add and each non-identity activation. Replicators, flatten and
//! reshape are free.

use serde::{Deserialize, Serialize};

use super::{ArchSpec, ModelBundle, FIXED_HEADER_BYTES};
use crate::nn::{Activation, LayerKind, Shape, KERNEL};

const TAPS: usize = KERNEL * KERNEL;

pub fn layer_macs(kind: &LayerKind, out: Shape) -> u64 {
    let px = out.plane() as u64;
    match *kind {
        LayerKind::Conv2d { in_ch, out_ch, .. } => (TAPS * in_ch * out_ch) as u64 * px,
        LayerKind::DepthwiseConv2d { ch, .. } => (TAPS * ch) as u64 * px,
        LayerKind::PointwiseConv2d { in_ch, out_ch } => (in_ch * out_ch) as u64 * px,
        LayerKind::Dense { in_dim, out_dim } => (in_dim * out_dim) as u64,
        _ => 0,
    }
}

pub fn layer_flops(kind: &LayerKind, out: Shape) -> u64 {
    let elems = out.len() as u64;
    let elementwise = match kind {
        LayerKind::Activation(Activation::Linear) => 0,
        LayerKind::Activation(_) => elems,
        k if k.bias_len() > 0 => elems,
        _ => 0,
    };
    2 * layer_macs(kind, out) + elementwise
}

pub fn count_params(arch: &ArchSpec) -> usize {
    arch.layers()
        .iter()
        .map(|k| k.weight_len() + k.bias_len())
        .sum()
}

pub fn count_macs(arch: &ArchSpec) -> u64 {
    arch.layers()
        .iter()
        .zip(arch.shapes())
        .map(|(k, s)| layer_macs(k, s))
        .sum()
}

pub fn count_flops(arch: &ArchSpec) -> u64 {
    arch.layers()
        .iter()
        .zip(arch.shapes())
        .map(|(k, s)| layer_flops(k, s))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCost {
    pub index: usize,
    pub layer: String,
    pub output: Shape,
    pub params: usize,
    pub macs: u64,
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub name: String,
    pub param_count: usize,
    /// Size of the `.olnt` file: 4 bytes per parameter plus the header.
    pub model_bytes: usize,
    pub macs: u64,
    pub flops: u64,
    pub per_layer: Vec<LayerCost>,
}

impl EfficiencyReport {
    /// Report for an architecture stored without an anomaly threshold.
    pub fn for_arch(arch: &ArchSpec) -> Self {
        let header = FIXED_HEADER_BYTES + arch.describe().len();
        Self::build(arch, header)
    }

    pub fn for_bundle(bundle: &ModelBundle) -> Self {
        Self::build(&bundle.arch, bundle.header_bytes())
    }

    fn build(arch: &ArchSpec, header_bytes: usize) -> Self {
        let per_layer: Vec<LayerCost> = arch
            .layers()
            .iter()
            .zip(arch.shapes())
            .enumerate()
            .map(|(index, (k, output))| LayerCost {
                index,
                layer: k.to_string(),
                output,
                params: k.weight_len() + k.bias_len(),
                macs: layer_macs(k, output),
                flops: layer_flops(k, output),
            })
            .collect();
        let param_count = per_layer.iter().map(|c| c.params).sum();
        Self {
            name: arch.name().to_string(),
            param_count,
            model_bytes: 4 * param_count + header_bytes,
            macs: per_layer.iter().map(|c| c.macs).sum(),
            flops: per_layer.iter().map(|c| c.flops).sum(),
            per_layer,
        }
    }

    /// Model size in KiB, the unit used for on-device footprints.
    pub fn model_kib(&self) -> f64 {
        self.model_bytes as f64 / 1024.0
    }

    pub const CSV_HEADER: &'static str = "name,params,bytes,flops";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.name, self.param_count, self.model_bytes, self.flops)
    }
}
