//! Input discovery and loading shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use outliernet::anomaly::MachineTag;
use outliernet::audio_io::{index_dataset, read_wav, synthesize_corpus, AudioClip, IndexOptions, Label, Split, SynthSpec};
use rayon::prelude::*;
use walkdir::WalkDir;

use crate::args::DataArgs;
use crate::manifest::Run;

/// Normal training clips plus a labelled test set.
#[derive(Debug)]
pub struct LoadedData {
    pub train: Vec<AudioClip>,
    pub test: Vec<(AudioClip, Label)>,
    pub tag: Option<MachineTag>,
}

pub fn load_data(args: &DataArgs, run: &mut Run, sample_rate: u32) -> Result<LoadedData> {
    if !(0.0..1.0).contains(&args.test_fraction) {
        bail!("--test-fraction must lie in [0, 1), got {}", args.test_fraction);
    }
    let data = match (&args.source.data, &args.source.synth) {
        (Some(root), None) => load_dataset(root, args, run)?,
        (None, Some(cfg)) => load_synth(cfg, run)?,
        _ => bail!("give exactly one of --data or --synth"),
    };
    for clip in data.train.iter().chain(data.test.iter().map(|(c, _)| c)) {
        clip.require_rate(sample_rate)?;
    }
    Ok(data)
}

fn load_synth(path: &Path, run: &mut Run) -> Result<LoadedData> {
    let text = fs::read_to_string(path).with_context(|| format!("reading synth config {}", path.display()))?;
    let spec = SynthSpec::from_config_str(&text)?;
    run.input(path);
    run.resolve("synth", &spec);
    let corpus = synthesize_corpus(&spec)?;
    Ok(LoadedData {
        train: corpus.train,
        test: corpus.test,
        tag: None,
    })
}

fn load_dataset(root: &Path, args: &DataArgs, run: &mut Run) -> Result<LoadedData> {
    let opts = IndexOptions {
        test_fraction: args.test_fraction,
        seed: run.seed_for("dataset-split"),
        machine_type: args.machine_type.clone(),
        machine_id: args.machine_id.clone(),
    };
    run.resolve("index", &opts);
    let index = index_dataset(root, &opts)?;
    run.input(root);
    let read = |paths: Vec<(&Path, Label)>| -> Result<Vec<(AudioClip, Label)>> {
        paths
            .into_par_iter()
            .map(|(p, l)| Ok((read_wav(p)?, l)))
            .collect()
    };
    let train = read(index.split(Split::Train).map(|e| (e.path.as_path(), e.label)).collect())?;
    let test = read(index.split(Split::Test).map(|e| (e.path.as_path(), e.label)).collect())?;
    Ok(LoadedData {
        train: train.into_iter().map(|(c, _)| c).collect(),
        test,
        tag: Some(MachineTag {
            machine_type: index.machine_type,
            machine_id: index.machine_id,
            snr: index.snr_tag,
        }),
    })
}

/// A single WAV file, or every `.wav` below a directory in path order.
pub fn collect_wavs(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    if !input.is_dir() {
        bail!("{} does not exist", input.display());
    }
    let mut out = Vec::new();
    for entry in WalkDir::new(input).sort_by_file_name() {
        let entry = entry.with_context(|| format!("walking {}", input.display()))?;
        let is_wav = entry
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if is_wav && entry.file_type().is_file() {
            out.push(entry.into_path());
        }
    }
    if out.is_empty() {
        bail!("no wav files found in {}", input.display());
    }
    Ok(out)
}

/// A filesystem-safe name for a WAV relative to the input root:
/// `fan/id_00/normal/a.wav` becomes `fan__id_00__normal__a`.
pub fn artifact_stem(input: &Path, wav: &Path) -> String {
    let rel = wav.strip_prefix(input).ok().filter(|r| !r.as_os_str().is_empty());
    let rel = rel.unwrap_or_else(|| Path::new(wav.file_name().unwrap_or(wav.as_os_str())));
    let rel = rel.with_extension("");
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("__")
}
