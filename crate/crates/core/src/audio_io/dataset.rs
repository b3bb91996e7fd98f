//! Indexing of MIMII-style directory trees:
//! `<root>/<machine_type>/<id>/{normal,abnormal}/*.wav`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AudioError, Label};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub path: PathBuf,
    pub label: Label,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub entries: Vec<DatasetEntry>,
    pub machine_type: String,
    pub machine_id: String,
    pub snr_tag: String,
    /// Set when the `abnormal` directory is missing; the index can then only
    /// be used for training.
    pub train_only: bool,
}

impl DatasetIndex {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn count(&self, split: Split, label: Label) -> usize {
        self.split(split).filter(|e| e.label == label).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexOptions {
    /// Fraction of normal clips held out for the test split.
    pub test_fraction: f64,
    pub seed: u64,
    pub machine_type: Option<String>,
    pub machine_id: Option<String>,
}

impl Default for IndexOptions {
    fn default() -> Self {
        Self {
            test_fraction: 0.5,
            seed: 0,
            machine_type: None,
            machine_id: None,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AudioError + '_ {
    move |source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn subdirs(dir: &Path) -> Result<Vec<PathBuf>, AudioError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        if entry.file_type().map_err(io_err(dir))?.is_dir() {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>, AudioError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let is_wav = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if is_wav && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Lists the `(machine_type, machine_id)` pairs found under `root`.
pub fn list_machines(root: &Path) -> Result<Vec<(String, String)>, AudioError> {
    let mut out = Vec::new();
    for type_dir in subdirs(root)? {
        for id_dir in subdirs(&type_dir)? {
            if id_dir.join("normal").is_dir() {
                out.push((file_name(&type_dir), file_name(&id_dir)));
            }
        }
    }
    Ok(out)
}

/// Extracts an SNR tag such as `6dB` or `-6dB` from a MIMII root name like
/// `-6_dB_fan`.
fn snr_tag(root: &Path) -> String {
    let name = file_name(root);
    let compact: String = name.chars().filter(|c| *c != '_').collect();
    if let Some(pos) = compact.find("dB") {
        let head = &compact[..pos];
        let start = head
            .rfind(|c: char| !(c.is_ascii_digit() || c == '-'))
            .map_or(0, |i| i + 1);
        let digits = &head[start..];
        if !digits.is_empty() && digits != "-" {
            return format!("{digits}dB");
        }
    }
    "unknown".to_string()
}

/// Builds a train/test index for one machine under a MIMII-style root.
///
/// Normal files are shuffled with a seeded generator; `floor(n * test_fraction)`
/// of them go to the test split and the rest to training. Every abnormal file
/// goes to the test split. When `root` holds more than one machine, select
/// one with `machine_type` / `machine_id`.
pub fn index_dataset(root: &Path, opts: &IndexOptions) -> Result<DatasetIndex, AudioError> {
    if !(0.0..1.0).contains(&opts.test_fraction) {
        return Err(AudioError::Dataset(format!(
            "test fraction {} must lie in [0, 1)",
            opts.test_fraction
        )));
    }
    let machines: Vec<(String, String)> = list_machines(root)?
        .into_iter()
        .filter(|(t, id)| {
            opts.machine_type.as_ref().is_none_or(|want| want == t)
                && opts.machine_id.as_ref().is_none_or(|want| want == id)
        })
        .collect();
    let (machine_type, machine_id) = match machines.as_slice() {
        [] => {
            return Err(AudioError::Dataset(format!(
                "no <machine_type>/<id>/normal directory under {}",
                root.display()
            )))
        }
        [one] => one.clone(),
        many => {
            let names: Vec<String> = many.iter().map(|(t, i)| format!("{t}/{i}")).collect();
            return Err(AudioError::Dataset(format!(
                "{} machines found ({}); select one by type and id",
                many.len(),
                names.join(", ")
            )));
        }
    };

    let machine_dir = root.join(&machine_type).join(&machine_id);
    let mut normals = wav_files(&machine_dir.join("normal"))?;
    if normals.is_empty() {
        return Err(AudioError::Dataset(format!(
            "no normal clips in {}",
            machine_dir.join("normal").display()
        )));
    }
    let abnormal_dir = machine_dir.join("abnormal");
    let train_only = !abnormal_dir.is_dir();
    let abnormals = if train_only {
        log::warn!(
            "{} has no abnormal directory; index is train-only",
            machine_dir.display()
        );
        Vec::new()
    } else {
        wav_files(&abnormal_dir)?
    };

    let mut rng = seed::rng(opts.seed, "dataset-split");
    normals.shuffle(&mut rng);
    let n_test = (normals.len() as f64 * opts.test_fraction).floor() as usize;
    if n_test == normals.len() {
        return Err(AudioError::Dataset(
            "test fraction leaves no normal clips for training".into(),
        ));
    }

    let mut entries: Vec<DatasetEntry> = normals
        .into_iter()
        .enumerate()
        .map(|(i, path)| DatasetEntry {
            path,
            label: Label::Normal,
            split: if i < n_test { Split::Test } else { Split::Train },
        })
        .collect();
    entries.extend(abnormals.into_iter().map(|path| DatasetEntry {
        path,
        label: Label::Anomalous,
        split: Split::Test,
    }));
    entries.sort_by(|a, b| a.path.cmp(&b.path));

    Ok(DatasetIndex {
        entries,
        machine_type,
        machine_id,
        snr_tag: snr_tag(root),
        train_only,
    })
}
