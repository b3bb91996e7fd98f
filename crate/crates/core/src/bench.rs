//! Single-inference latency microbenchmark.
//!
//! Runs a batch-1 forward pass on one fixed seeded input, timing each
//! iteration with a monotonic clock. The timed loop reuses its activation
//! buffers, as a deployed inference kernel would. Figures are for the native forward
//! pass on the host CPU.

use std::hint::black_box;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::ModelBundle;
use crate::nn::{NnError, Tensor4, Workspace};
use crate::seed;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("measure_iters must be positive")]
    NoIterations,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("forward pass produced a non-finite checksum")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub warmup_iters: usize,
    pub measure_iters: usize,
    /// Seeds the fixed input tensor.
    pub seed: u64,
    /// Pin the measuring thread to one CPU where the OS allows it.
    pub pin_single_thread: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            warmup_iters: 200,
            measure_iters: 2000,
            seed: 0,
            pin_single_thread: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub median_us: f64,
    pub mean_us: f64,
    pub p95_us: f64,
    pub min_us: f64,
    pub iters: usize,
    /// Sum of the final output tensor.
    pub checksum: f64,
    /// Set when the clock cannot resolve a tenth of the median.
    pub low_confidence: bool,
    pub pinned: bool,
}

impl BenchResult {
    pub const CSV_HEADER: &'static str = "model,params,flops,median_us,p95_us,checksum";
}

/// Smallest observable step of the monotonic clock.
fn clock_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..50 {
        let t0 = Instant::now();
        let mut t1 = Instant::now();
        while t1 == t0 {
            t1 = Instant::now();
        }
        best = best.min(t1 - t0);
    }
    best
}

#[cfg(target_os = "linux")]
fn pin_current_thread() -> bool {
    // SAFETY: `set` is a plain bitmask owned by this frame; the call only
    // reads it and affects the calling thread.
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        if libc::sched_getaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &mut set) != 0 {
            return false;
        }
        let Some(cpu) = (0..libc::CPU_SETSIZE as usize).find(|&c| libc::CPU_ISSET(c, &set)) else {
            return false;
        };
        let mut one: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(cpu, &mut one);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &one) == 0
    }
}

#[cfg(not(target_os = "linux"))]
fn pin_current_thread() -> bool {
    false
}

/// Percentile by nearest rank on sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Benchmarks one bundle on the calling thread.
///
/// With pinning enabled the thread's CPU affinity is narrowed for the rest
/// of its life, so callers that care should run this on a dedicated thread.
pub fn run_bench(bundle: &ModelBundle, cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    if cfg.measure_iters == 0 {
        return Err(BenchError::NoIterations);
    }
    let net = bundle.network()?;
    let shape = net.input_shape();
    let mut rng = seed::rng(cfg.seed, "bench-input");
    let data: Vec<f32> = (0..shape.len()).map(|_| rng.random::<f32>()).collect();
    let x = Tensor4::from_vec(data, 1, shape)?;
    let pinned = cfg.pin_single_thread && pin_current_thread();

    // Activation buffers are reused, so after the first pass the timed loop
    // does not touch the allocator and timings do not depend on heap state.
    let mut ws = Workspace::default();
    net.forward_with(&x, &mut ws)?;
    for _ in 0..cfg.warmup_iters {
        black_box(net.forward_with(black_box(&x), &mut ws)?);
    }
    let mut samples = Vec::with_capacity(cfg.measure_iters);
    for _ in 0..cfg.measure_iters {
        let t0 = Instant::now();
        black_box(net.forward_with(black_box(&x), &mut ws)?);
        samples.push(t0.elapsed().as_secs_f64() * 1e6);
    }
    let checksum: f64 = net
        .forward_with(&x, &mut ws)?
        .data()
        .iter()
        .map(|&v| f64::from(v))
        .sum();
    if !checksum.is_finite() {
        return Err(BenchError::NonFinite);
    }

    let mean_us = samples.iter().sum::<f64>() / samples.len() as f64;
    samples.sort_by(f64::total_cmp);
    let median_us = percentile(&samples, 0.5);
    let resolution_us = clock_resolution().as_secs_f64() * 1e6;
    Ok(BenchResult {
        median_us,
        mean_us,
        p95_us: percentile(&samples, 0.95),
        min_us: samples[0],
        iters: samples.len(),
        checksum,
        low_confidence: resolution_us > 0.1 * median_us,
        pinned,
    })
}
