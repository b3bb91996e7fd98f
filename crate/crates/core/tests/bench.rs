use outliernet::arch::{count_flops, make_template, ArchSpec, Family, ModelBundle, NormStats};
use outliernet::bench::{run_bench, BenchConfig, BenchError};

fn bundle(arch: ArchSpec) -> ModelBundle {
    let weights = arch.instantiate::<f32>(3).flat();
    ModelBundle::new(arch, weights, NormStats { min: -10.0, max: 2.0 }).unwrap()
}

fn cfg(warmup: usize, iters: usize) -> BenchConfig {
    BenchConfig {
        warmup_iters: warmup,
        measure_iters: iters,
        seed: 9,
        // Leave the test thread's affinity alone.
        pin_single_thread: false,
    }
}

#[test]
fn single_iteration_statistics_collapse() {
    let b = bundle(make_template(Family::FanConv, 0.25, 1, None).unwrap());
    let r = run_bench(&b, &cfg(0, 1)).unwrap();
    assert_eq!(r.iters, 1);
    assert_eq!(r.min_us, r.median_us);
    assert_eq!(r.median_us, r.p95_us);
    assert_eq!(r.mean_us, r.median_us);
}

#[test]
fn statistics_are_ordered_and_checksum_is_stable() {
    let b = bundle(make_template(Family::FanConv, 0.5, 2, None).unwrap());
    let first = run_bench(&b, &cfg(5, 50)).unwrap();
    let second = run_bench(&b, &cfg(5, 50)).unwrap();
    for r in [&first, &second] {
        assert!(r.min_us <= r.median_us && r.median_us <= r.p95_us);
        assert!(r.checksum.is_finite());
    }
    assert_eq!(first.checksum.to_bits(), second.checksum.to_bits());
}

#[test]
fn zero_iterations_rejected() {
    let b = bundle(make_template(Family::FanConv, 0.25, 1, None).unwrap());
    assert!(matches!(run_bench(&b, &cfg(0, 0)), Err(BenchError::NoIterations)));
}

#[test]
fn heavier_model_is_slower() {
    let small = make_template(Family::FanConv, 0.25, 1, None).unwrap();
    let large = make_template(Family::FanConv, 1.0, 3, None).unwrap();
    let ratio = count_flops(&large) as f64 / count_flops(&small) as f64;
    assert!(ratio >= 10.0, "flop ratio {ratio}");
    let (small, large) = (bundle(small), bundle(large));
    for _ in 0..3 {
        let s = run_bench(&small, &cfg(10, 100)).unwrap();
        let l = run_bench(&large, &cfg(10, 100)).unwrap();
        assert!(l.median_us > s.median_us, "{} vs {}", l.median_us, s.median_us);
    }
}
