//! End-to-end acceptance checks. Prints one PASS / FAIL / SKIP line per
//! criterion and exits nonzero if any criterion fails.
//!
//! Pass criterion numbers after `--` to run a subset. The MIMII
//! reproduction runs only when `OUTLIERNET_MIMII_ROOT` names a
//! dataset root (for example the unpacked `6_dB_fan` directory).

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{self, Command};
use std::time::{Duration, Instant};

use outliernet::anomaly::{compute_auc, evaluate, train, Aggregation, TrainConfig};
use outliernet::arch::{
    count_flops, count_macs, count_params, make_template, make_template_with_widths, save_bundle, ArchSpec,
    EfficiencyReport, Family, ModelBundle, NormStats,
};
use outliernet::audio_io::{synthesize_corpus, AudioClip, Label, SynthSpec};
use outliernet::bench::{run_bench, BenchConfig};
use outliernet::explore::{
    evaluate_candidate, indicator, search, Candidate, Constraints, PerfFnConfig, SearchData, SearchOptions, SearchSpace,
    Strategy, DEFAULT_MAX_PARAMS,
};
use outliernet::features::{clip_crops, crop_windows, log_mel, stft_power, FeatureConfig, MelFilterbank};
use outliernet::seed;
use rand::Rng;

const STFT_REL_TOL: f64 = 1e-6;
const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_TRIALS: usize = 20;
const SYNTH_AUC_MIN: f64 = 0.95;
const MIMII_AUC_MIN: f64 = 0.95;
const BENCH_SPREAD_MAX: f64 = 0.20;
const BENCH_FLOP_RATIO_MIN: f64 = 10.0;

/// (architecture, params, FLOPs), counted by hand and by the loop oracle.
fn pinned_archs() -> Vec<(ArchSpec, usize, u64)> {
    vec![
        (make_template_with_widths(Family::FanConv, &[5, 25], None, "fan-686").unwrap(), 686, 1_573_632),
        (make_template(Family::FanConv, 0.5, 2, None).unwrap(), 279, 817_152),
        (make_template(Family::SliderDenseBottleneck, 0.25, 2, Some(8)).unwrap(), 17_837, 553_488),
    ]
}

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(cond: bool, detail: String) -> Verdict {
    let detail = detail.trim_end().to_string();
    if cond {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn sine(seconds: f64, hz: f32) -> AudioClip {
    let n = (16_000.0 * seconds) as usize;
    let s = (0..n)
        .map(|i| 0.4 * (2.0 * std::f32::consts::PI * hz * i as f32 / 16_000.0).sin())
        .collect();
    AudioClip::new(s, 16_000, "sine").unwrap()
}

fn feature_shapes() -> Verdict {
    let cfg = FeatureConfig::default();
    let clip = sine(10.0, 440.0);
    let spec = log_mel(&clip, &cfg).unwrap();
    let crops = crop_windows(&spec, "sine").unwrap();
    let ok = spec.frames() == 313
        && spec.n_mels() == 128
        && crops.len() == 9
        && crops.iter().all(|c| c.frames() == 32 && c.n_mels == 128 && c.values.len() == 32 * 128);
    let starts_distinct = crops.iter().enumerate().all(|(i, c)| c.values[..] == spec.values()[i * 4096..(i + 1) * 4096]);
    check(
        ok && starts_distinct,
        format!("{}x{} spectrogram, {} crops of 32x128", spec.frames(), spec.n_mels(), crops.len()),
    )
}

fn dsp_oracle() -> Verdict {
    let cfg = FeatureConfig {
        center_pad: false,
        ..FeatureConfig::default()
    };
    let window = oracles::hann(cfg.n_fft);
    let mut rng = seed::rng(21, "acceptance-dft");
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let samples: Vec<f32> = (0..cfg.n_fft).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let frame: Vec<f64> = samples.iter().map(|&s| f64::from(s)).collect();
        let got = stft_power(&AudioClip::new(samples, 16_000, "f").unwrap(), &cfg).unwrap();
        let want = oracles::dft_power(&frame, &window);
        let scale = want.iter().cloned().fold(0.0, f64::max);
        let err = got.frame(0).iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    check(worst < STFT_REL_TOL, format!("20 frames, worst relative error {worst:.2e} < {STFT_REL_TOL:e}"))
}

fn gradients() -> Verdict {
    let mut rng = seed::rng(22, "acceptance-grad");
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let cases = oracles::gradient_cases();
    for (kind, shape) in &cases {
        let mut case_worst = 0.0f64;
        for _ in 0..GRAD_TRIALS {
            case_worst = case_worst.max(oracles::grad_check(kind, *shape, 2, &mut rng).max_rel_err);
        }
        if case_worst >= GRAD_REL_TOL {
            failures.push(format!("{kind}: {case_worst:.2e}"));
        }
        worst = worst.max(case_worst);
    }
    check(
        failures.is_empty(),
        format!(
            "{} layer cases x {GRAD_TRIALS} trials, worst {worst:.2e} < {GRAD_REL_TOL:e} {}",
            cases.len(),
            failures.join("; ")
        ),
    )
}

fn auc_oracle() -> Verdict {
    let mut rng = seed::rng(23, "acceptance-auc");
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..120);
        let levels = rng.random_range(1..10);
        let mut scores: Vec<(f64, Label)> = (0..n)
            .map(|_| {
                let l = if rng.random() { Label::Anomalous } else { Label::Normal };
                (rng.random_range(0..levels) as f64 / 3.0, l)
            })
            .collect();
        scores[0].1 = Label::Normal;
        scores[1].1 = Label::Anomalous;
        if compute_auc(&scores).unwrap() != oracles::brute_auc(&scores) {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("100 tie-heavy sets, {mismatches} mismatches"))
}

fn efficiency() -> Verdict {
    let mut problems = Vec::new();
    for (arch, params, flops) in pinned_archs() {
        let (loop_macs, loop_flops) = oracles::loop_count(&arch);
        if count_params(&arch) != params || count_flops(&arch) != flops || loop_flops != flops || count_macs(&arch) != loop_macs {
            problems.push(format!("{} counts", arch.name()));
        }
        let bundle = ModelBundle::new(arch.clone(), vec![0.5; params], NormStats { min: -10.0, max: 1.0 }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.olnt");
        save_bundle(&bundle, &path).unwrap();
        let size = fs::metadata(&path).unwrap().len() as usize;
        if size != 4 * params + bundle.header_bytes() || size != EfficiencyReport::for_arch(&arch).model_bytes {
            problems.push(format!("{} file size {size}", arch.name()));
        }
    }
    let weights_kib = format!("{:.1}", (4 * 686) as f64 / 1024.0);
    if weights_kib != "2.7" {
        problems.push(format!("686 params = {weights_kib} KiB"));
    }
    check(
        problems.is_empty(),
        format!("3 pinned archs exact, 686 params = {weights_kib} KiB of weights {}", problems.join("; ")),
    )
}

fn crops_of(clips: &[AudioClip], cfg: &FeatureConfig) -> Vec<outliernet::features::CropWindow> {
    let bank = MelFilterbank::new(cfg, cfg.sample_rate).unwrap();
    clips.iter().flat_map(|c| clip_crops(c, cfg, &bank).unwrap()).collect()
}

fn synthetic_aad() -> Verdict {
    let corpus = synthesize_corpus(&SynthSpec::default()).unwrap();
    let cfg = FeatureConfig::default();
    let arch = make_template(Family::FanConv, 1.0, 2, None).unwrap();
    let bundle = train(&arch, &crops_of(&corpus.train, &cfg), &TrainConfig::default()).unwrap();
    let report = evaluate(&bundle, &corpus.test, &cfg, Aggregation::Max).unwrap();
    check(
        report.auc >= SYNTH_AUC_MIN,
        format!(
            "{} ({} params), clip AUC {:.4} >= {SYNTH_AUC_MIN} on {}+{} clips",
            arch.name(),
            count_params(&arch),
            report.auc,
            report.n_normal,
            report.n_anomalous
        ),
    )
}

fn mimii() -> Verdict {
    let Some(root) = std::env::var_os("OUTLIERNET_MIMII_ROOT") else {
        return Verdict::Skip("OUTLIERNET_MIMII_ROOT not set".into());
    };
    let out = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_outliernet"))
        .args(["search", "--data"])
        .arg(&root)
        .args(["--machine-type", "fan", "--machine-id", "id_06", "--baseline-auc", "1.0", "--out"])
        .arg(out.path())
        .status()
        .unwrap();
    if !status.success() {
        return Verdict::Fail(format!("search exited with {status}"));
    }
    let summary = fs::read_to_string(out.path().join("summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap_or_default().split(',').collect();
    let auc: f64 = row.get(1).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN);
    let params: usize = row.get(4).and_then(|v| v.parse().ok()).unwrap_or(usize::MAX);
    check(
        auc >= MIMII_AUC_MIN && params < DEFAULT_MAX_PARAMS,
        format!("searched model: {params} params, test AUC {auc:.4}"),
    )
}

fn search_data() -> SearchData {
    let spec = SynthSpec {
        n_normal_train: 40,
        n_normal_test: 0,
        n_anomalous_test: 8,
        duration_s: 2.1,
        ..SynthSpec::default()
    };
    let corpus = synthesize_corpus(&spec).unwrap();
    let anomalous: Vec<AudioClip> = corpus.test.into_iter().map(|(c, _)| c).collect();
    SearchData::from_clips(&corpus.train, &anomalous, 0.2, &FeatureConfig::default(), 5).unwrap()
}

fn budget() -> TrainConfig {
    TrainConfig {
        epochs_max: 6,
        lr: 1e-2,
        patience: None,
        seed: 8,
        ..TrainConfig::default()
    }
}

/// Exhaustive search must return the brute-force feasible argmax.
fn exhaustive_matches(space: &SearchSpace, data: &SearchData, c: &Constraints) -> Result<String, String> {
    let perf = PerfFnConfig::default();
    let all: Vec<Candidate> = space
        .points()
        .map(|p| evaluate_candidate(&p, data, &budget(), c, &perf).unwrap())
        .collect();
    let brute = all
        .iter()
        .filter(|x| indicator(x, c))
        .max_by(|a, b| a.u_score.unwrap().total_cmp(&b.u_score.unwrap()))
        .ok_or("no feasible point")?;
    let opts = SearchOptions {
        strategy: Strategy::Random { n: space.len() },
        seed: 13,
        workers: 2,
        budget: budget(),
    };
    let (best, log) = search(space, c, &perf, data, &opts).map_err(|e| e.to_string())?;
    let skipped = log.candidates().filter(|x| x.params >= c.max_params).count();
    if best != *brute {
        return Err(format!("search chose {} but brute force {}", best.arch.name(), brute.arch.name()));
    }
    if !(best.params < c.max_params && best.auc.unwrap() >= c.auc_floor) {
        return Err(format!("{} violates the constraints", best.arch.name()));
    }
    Ok(format!("{} points ({skipped} over budget) -> {}", space.len(), best.arch.name()))
}

fn constraints() -> Verdict {
    let data = search_data();
    let c = Constraints::with_floor(DEFAULT_MAX_PARAMS, 0.6, 0.5).unwrap();
    let fan = SearchSpace::new(Family::FanConv, vec![0.25, 0.5, 0.75, 1.0], vec![1, 2, 3], vec![]).unwrap();
    let slider = SearchSpace::new(Family::SliderDenseBottleneck, vec![0.25, 0.5], vec![2, 3], vec![8, 16, 32]).unwrap();
    let mut details = Vec::new();
    for space in [&fan, &slider] {
        match exhaustive_matches(space, &data, &c) {
            Ok(d) => details.push(d),
            Err(e) => return Verdict::Fail(e),
        }
    }
    let opts = SearchOptions {
        strategy: Strategy::Evolutionary {
            population: 4,
            generations: 3,
        },
        seed: 14,
        workers: 2,
        budget: budget(),
    };
    match search(&slider, &c, &PerfFnConfig::default(), &data, &opts) {
        Ok((best, _)) if best.params < c.max_params && best.auc.unwrap() >= c.auc_floor => {
            details.push(format!("evolutionary -> {}", best.arch.name()))
        }
        Ok((best, _)) => return Verdict::Fail(format!("evolutionary returned infeasible {}", best.arch.name())),
        Err(e) => return Verdict::Fail(e.to_string()),
    }
    Verdict::Pass(details.join("; "))
}

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_outliernet"))
        .current_dir(dir)
        .env_remove("OUTLIERNET_WORKERS")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn same_bytes(a: &Path, b: &Path) -> Result<(), String> {
    let read = |p: &Path| fs::read(p).map_err(|e| format!("{}: {e}", p.display()));
    if read(a)? == read(b)? {
        Ok(())
    } else {
        Err(format!("{} and {} differ", a.display(), b.display()))
    }
}

fn determinism_steps(d: &Path) -> Result<String, String> {
    cli(
        d,
        &[
            "synth", "--out", "syn", "--n-train", "20", "--n-test-normal", "6", "--n-test-anomalous", "6",
            "--duration", "2.1", "--config-only", "--seed", "3",
        ],
    )?;
    let quick = ["--epochs", "10", "--lr", "1e-2", "--batch-size", "16", "--seed", "3"];
    let train: Vec<&str> = ["train", "--synth", "syn/synth.cfg", "--out", "m.olnt"].iter().chain(&quick).copied().collect();
    cli(d, &train)?;
    cli(d, &["replay", "--manifest", "m.olnt.manifest.json", "--out", "m2.olnt"])?;
    same_bytes(&d.join("m.olnt"), &d.join("m2.olnt"))?;
    same_bytes(&d.join("m.olnt.history.json"), &d.join("m2.olnt.history.json"))?;

    let search: Vec<&str> = [
        "search", "--synth", "syn/synth.cfg", "--strategy", "evolutionary", "--population", "3", "--generations", "3",
        "--auc-floor", "0.0", "--proxy-epochs", "3", "--proxy-lr", "1e-2", "--search-val-fraction", "0.2", "--out", "s1",
    ]
    .iter()
    .chain(&quick)
    .copied()
    .collect();
    cli(d, &search)?;
    cli(d, &["replay", "--manifest", "s1/manifest.json", "--out", "s2", "--workers", "1"])?;
    for f in ["search_log.jsonl", "best.olnt", "best.csv", "scores.csv", "summary.csv"] {
        same_bytes(&d.join("s1").join(f), &d.join("s2").join(f))?;
    }
    Ok("train and search replays byte-identical".into())
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    match determinism_steps(dir.path()) {
        Ok(d) => Verdict::Pass(d),
        Err(e) => Verdict::Fail(e),
    }
}

fn bench_median(bundle: &ModelBundle) -> f64 {
    let cfg = BenchConfig::default();
    std::thread::scope(|s| s.spawn(|| run_bench(bundle, &cfg).unwrap()).join().unwrap()).median_us
}

fn bench_sanity() -> Verdict {
    let bundle_of = |arch: ArchSpec| {
        let w = arch.instantiate::<f32>(1).flat();
        ModelBundle::new(arch, w, NormStats { min: -10.0, max: 1.0 }).unwrap()
    };
    let small = make_template(Family::FanConv, 0.25, 1, None).unwrap();
    let large = make_template(Family::FanConv, 1.0, 3, None).unwrap();
    let ratio = count_flops(&large) as f64 / count_flops(&small) as f64;
    if ratio < BENCH_FLOP_RATIO_MIN {
        return Verdict::Fail(format!("flop ratio {ratio:.1} below {BENCH_FLOP_RATIO_MIN}"));
    }
    let (small, large) = (bundle_of(small), bundle_of(large));
    let mut large_medians = Vec::new();
    let mut ordered = true;
    for _ in 0..3 {
        let s = bench_median(&small);
        let l = bench_median(&large);
        ordered &= l > s;
        large_medians.push(l);
    }
    let lo = large_medians.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = large_medians.iter().cloned().fold(0.0, f64::max);
    let spread = (hi - lo) / lo;
    check(
        ordered && spread < BENCH_SPREAD_MAX,
        format!(
            "medians {:.1}/{:.1}/{:.1} us, spread {:.1}% < {:.0}%, {ratio:.0}x flops slower in 3/3: {ordered}",
            large_medians[0],
            large_medians[1],
            large_medians[2],
            100.0 * spread,
            100.0 * BENCH_SPREAD_MAX
        ),
    )
}

fn main() {
    type Check = fn() -> Verdict;
    let criteria: [(&str, Duration, Check); 10] = [
        ("feature pipeline shapes", Duration::from_secs(1), feature_shapes),
        ("STFT vs direct DFT", Duration::from_secs(10), dsp_oracle),
        ("layer gradients vs finite differences", Duration::from_secs(60), gradients),
        ("AUC vs all-pairs oracle", Duration::from_secs(5), auc_oracle),
        ("parameter, FLOP and file-size accounting", Duration::from_secs(5), efficiency),
        ("synthetic end-to-end detection", Duration::from_secs(300), synthetic_aad),
        ("MIMII fan 6 dB id_06 reproduction", Duration::from_secs(3600), mimii),
        ("search constraint satisfaction", Duration::from_secs(600), constraints),
        ("manifest replay determinism", Duration::from_secs(300), determinism),
        ("benchmark stability and ordering", Duration::from_secs(120), bench_sanity),
    ];
    // Optional criterion numbers select a subset; flags from the test
    // runner are ignored.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (mut passed, mut failed, mut skipped) = (0, 0, 0);
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let t0 = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::Fail(format!("panicked: {msg}"))
        });
        let elapsed = t0.elapsed();
        let timing = format!("{:.2} s, limit {} s", elapsed.as_secs_f64(), limit.as_secs());
        let verdict = match verdict {
            Verdict::Pass(d) if elapsed > limit => Verdict::Fail(format!("{d}; too slow")),
            v => v,
        };
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => {
                passed += 1;
                ("PASS", d)
            }
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => {
                skipped += 1;
                ("SKIP", d)
            }
        };
        println!("criterion {:>2} {tag} {name}: {detail} ({timing})", i + 1);
    }
    println!("acceptance: {passed} passed, {failed} failed, {skipped} skipped");
    if failed > 0 {
        process::exit(1);
    }
}
