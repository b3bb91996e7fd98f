mod search;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use outliernet::anomaly::{evaluate, train_with_history, write_scores_csv, write_scores_jsonl, write_summary_csv, EvalReport, Scorer};
use outliernet::arch::{load_bundle, make_template, save_bundle, ArchSpec, EfficiencyReport};
use outliernet::audio_io::{read_wav, synthesize_corpus, write_wav_f32, AudioClip, SynthSpec};
use outliernet::bench::{run_bench, BenchConfig, BenchResult};
use outliernet::features::{clip_crops, crop_windows, log_mel_with, write_tensor_file, CropWindow, FeatureConfig, MelFilterbank};
use rayon::prelude::*;

pub use search::search;

use crate::args::{ArchArgs, BenchArgs, EvalArgs, ExportArgs, FeaturesArgs, ScoreArgs, SynthArgs, TrainArgs};
use crate::data::{artifact_stem, collect_wavs, load_data};
use crate::manifest::{write_atomic, Run};

/// Appends `suffix` to the full file name: `m.olnt` -> `m.olnt.history.json`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(suffix);
    PathBuf::from(p)
}

fn write_output(run: &mut Run, path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes)?;
    run.output(path);
    Ok(())
}

fn template(a: &ArchArgs) -> Result<ArchSpec> {
    Ok(make_template(a.family, a.width, a.depth, a.bottleneck)?)
}

fn feature_config(run: &mut Run) -> FeatureConfig {
    let cfg = FeatureConfig::default();
    run.resolve("features", &cfg);
    cfg
}

/// Crops of many clips, in clip order.
pub(crate) fn crops_of(clips: &[AudioClip], cfg: &FeatureConfig) -> Result<Vec<CropWindow>> {
    let bank = MelFilterbank::new(cfg, cfg.sample_rate)?;
    let per_clip = clips
        .par_iter()
        .map(|c| clip_crops(c, cfg, &bank))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(per_clip.into_iter().flatten().collect())
}

/// Scores CSV, summary CSV and optionally JSON lines for one report.
pub(crate) fn write_report(run: &mut Run, dir: &Path, report: &EvalReport, jsonl: bool) -> Result<()> {
    let mut buf = Vec::new();
    let path = dir.join("scores.csv");
    write_scores_csv(report, &mut buf, &path.display().to_string())?;
    write_output(run, &path, &buf)?;

    buf.clear();
    let path = dir.join("summary.csv");
    write_summary_csv(report, &mut buf, &path.display().to_string())?;
    write_output(run, &path, &buf)?;
    print!("{}", String::from_utf8_lossy(&buf));

    if jsonl {
        buf.clear();
        let path = dir.join("scores.jsonl");
        write_scores_jsonl(report, &mut buf, &path.display().to_string())?;
        write_output(run, &path, &buf)?;
    }
    Ok(())
}

pub fn synth(a: &SynthArgs, run: &mut Run) -> Result<()> {
    let spec = SynthSpec {
        n_normal_train: a.n_train,
        n_normal_test: a.n_test_normal,
        n_anomalous_test: a.n_test_anomalous,
        duration_s: a.duration,
        anomaly_kind: a.kind,
        shift_factor: a.shift_factor,
        noise_level: a.noise,
        rng_seed: run.seed_for("synth"),
        ..SynthSpec::default()
    };
    spec.validate()?;
    run.resolve("synth", &spec);
    write_output(run, &a.out.join("synth.cfg"), spec.to_config_string().as_bytes())?;
    if a.config_only {
        return Ok(());
    }

    // A MIMII-style tree; the test normals land beside the training ones,
    // so dataset-based commands re-split them with --test-fraction.
    let corpus = synthesize_corpus(&spec)?;
    let machine = a.out.join("synthetic").join("id_00");
    let mut files: Vec<(PathBuf, &AudioClip)> = Vec::new();
    for (i, clip) in corpus.train.iter().enumerate() {
        files.push((machine.join("normal").join(format!("train_{i:04}.wav")), clip));
    }
    let (mut n, mut k) = (0, 0);
    for (clip, label) in &corpus.test {
        let path = match label {
            outliernet::audio_io::Label::Normal => {
                n += 1;
                machine.join("normal").join(format!("test_{:04}.wav", n - 1))
            }
            outliernet::audio_io::Label::Anomalous => {
                k += 1;
                machine.join("abnormal").join(format!("anomalous_{:04}.wav", k - 1))
            }
        };
        files.push((path, clip));
    }
    for dir in ["normal", "abnormal"] {
        fs::create_dir_all(machine.join(dir)).with_context(|| format!("creating {}", machine.display()))?;
    }
    files
        .par_iter()
        .map(|(p, c)| write_wav_f32(p, c))
        .collect::<Result<Vec<_>, _>>()?;
    for (p, _) in files {
        run.output(p);
    }
    Ok(())
}

pub fn features(a: &FeaturesArgs, run: &mut Run) -> Result<()> {
    let cfg = feature_config(run);
    let bank = MelFilterbank::new(&cfg, cfg.sample_rate)?;
    let wavs = collect_wavs(&a.input)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let written = wavs
        .par_iter()
        .map(|wav| -> Result<Vec<PathBuf>> {
            let stem = artifact_stem(&a.input, wav);
            let clip = read_wav(wav)?;
            let spec = log_mel_with(&clip, &cfg, &bank)?;
            let crops = crop_windows(&spec, &stem)?;
            let to_f32 = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
            let mut out = vec![a.out.join(format!("{stem}.mels"))];
            write_tensor_file(&out[0], spec.frames(), spec.n_mels(), &to_f32(spec.values()))?;
            for c in &crops {
                let path = a.out.join(format!("{stem}.crop{}.mels", c.crop_index));
                write_tensor_file(&path, c.frames(), c.n_mels, &to_f32(&c.values))?;
                out.push(path);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    for wav in wavs {
        run.input(wav);
    }
    for p in written.into_iter().flatten() {
        run.output(p);
    }
    Ok(())
}

pub fn train(a: &TrainArgs, run: &mut Run) -> Result<()> {
    let arch = template(&a.arch)?;
    let cfg = a.train.config(run.seed_for("train"));
    cfg.validate()?;
    run.resolve("arch", &arch.describe());
    run.resolve("train", &cfg);
    let features = feature_config(run);

    let data = load_data(&a.data, run, features.sample_rate)?;
    let crops = crops_of(&data.train, &features)?;
    let (bundle, history) = train_with_history(&arch, &crops, &cfg)?;
    save_bundle(&bundle, &a.out)?;
    run.output(&a.out);
    let mut json = serde_json::to_string_pretty(&history)?;
    json.push('\n');
    write_output(run, &sibling(&a.out, ".history.json"), json.as_bytes())?;
    log::info!(
        "trained {} for {} epochs, best validation mse {:.5}",
        arch.name(),
        history.epochs_run(),
        history.best_val_mse()
    );
    Ok(())
}

pub fn score(a: &ScoreArgs, run: &mut Run) -> Result<()> {
    let cfg = feature_config(run);
    let bundle = load_bundle(&a.model)?;
    run.input(&a.model);
    let wavs = collect_wavs(&a.input)?;
    let scorer = Scorer::new(&bundle, &cfg)?.with_aggregation(a.aggregation);
    let scores = wavs
        .par_iter()
        .map(|w| -> Result<_> { Ok(scorer.score(&read_wav(w)?, None)?) })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("clip_id,clip_score,label\n");
    for s in &scores {
        csv.push_str(&format!("{},{:?},\n", s.clip_id, s.clip_score));
    }
    for w in wavs {
        run.input(w);
    }
    write_output(run, &a.out, csv.as_bytes())
}

pub fn eval(a: &EvalArgs, run: &mut Run) -> Result<()> {
    let features = feature_config(run);
    let bundle = load_bundle(&a.model)?;
    run.input(&a.model);
    let data = load_data(&a.data, run, features.sample_rate)?;
    let mut report = evaluate(&bundle, &data.test, &features, a.aggregation)?;
    report.machine_tag = data.tag;
    write_report(run, &a.out, &report, a.jsonl)
}

pub fn bench(a: &BenchArgs, run: &mut Run) -> Result<()> {
    let bundle = load_bundle(&a.model)?;
    run.input(&a.model);
    let cfg = BenchConfig {
        warmup_iters: a.warmup,
        measure_iters: a.iters,
        seed: run.seed_for("bench"),
        pin_single_thread: !a.no_pin,
    };
    run.resolve("bench", &cfg);
    // Pinning narrows the affinity of the calling thread, so measure on a
    // thread of our own.
    let result = std::thread::scope(|s| s.spawn(|| run_bench(&bundle, &cfg)).join())
        .map_err(|_| anyhow::anyhow!("benchmark thread panicked"))??;
    if result.low_confidence {
        log::warn!("clock resolution is coarse relative to the median; timings are low confidence");
    }
    run.resolve("bench_result", &result);
    let eff = EfficiencyReport::for_bundle(&bundle);
    let csv = format!(
        "{}\n{},{},{},{:.3},{:.3},{:?}\n",
        BenchResult::CSV_HEADER,
        eff.name,
        eff.param_count,
        eff.flops,
        result.median_us,
        result.p95_us,
        result.checksum
    );
    print!("{csv}");
    write_output(run, &a.out, csv.as_bytes())
}

pub fn export(a: &ExportArgs, run: &mut Run) -> Result<()> {
    let eff = match &a.model {
        Some(path) => {
            run.input(path);
            EfficiencyReport::for_bundle(&load_bundle(path)?)
        }
        None => EfficiencyReport::for_arch(&template(&a.arch)?),
    };
    let csv = format!("{}\n{}\n", EfficiencyReport::CSV_HEADER, eff.csv_row());
    print!("{csv}");
    write_output(run, &a.out, csv.as_bytes())?;
    if let Some(path) = &a.per_layer {
        let mut rows = String::from("index,layer,output,params,macs,flops\n");
        for l in &eff.per_layer {
            let o = l.output;
            rows.push_str(&format!(
                "{},{},{}x{}x{},{},{},{}\n",
                l.index, l.layer, o.c, o.h, o.w, l.params, l.macs, l.flops
            ));
        }
        write_output(run, path, rows.as_bytes())?;
    }
    Ok(())
}
