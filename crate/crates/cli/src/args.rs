//! Command-line surface. Every argument struct also serialises, so a run
//! manifest records the fully resolved invocation.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use outliernet::anomaly::{Aggregation, TrainConfig};
use outliernet::arch::Family;
use outliernet::audio_io::AnomalyKind;
use outliernet::explore::{AucFloorMode, DEFAULT_MAX_PARAMS};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Parser)]
#[command(name = "outliernet", version, about = "Compact autoencoders for acoustic anomaly detection")]
pub struct Cli {
    /// Worker threads for clip-parallel scoring and candidate-parallel search.
    #[arg(long, global = true, env = "OUTLIERNET_WORKERS")]
    pub workers: Option<usize>,
    /// Root seed; every random choice derives from it by purpose.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Generate a seeded synthetic machine-sound corpus.
    Synth(SynthArgs),
    /// Write log-Mel spectrograms and crops as MELS tensor files.
    Features(FeaturesArgs),
    /// Train an autoencoder on normal clips.
    Train(TrainArgs),
    /// Score unlabelled clips with a trained model.
    Score(ScoreArgs),
    /// Score a labelled test set and report AUC and efficiency.
    Eval(EvalArgs),
    /// Constrained architecture search, then retrain and evaluate the winner.
    Search(SearchArgs),
    /// Time batch-1 inference of a model.
    Bench(BenchArgs),
    /// Write the efficiency report of a model or template.
    Export(ExportArgs),
    /// Re-run the command recorded in a run manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Features(_) => "features",
            Command::Train(_) => "train",
            Command::Score(_) => "score",
            Command::Eval(_) => "eval",
            Command::Search(_) => "search",
            Command::Bench(_) => "bench",
            Command::Export(_) => "export",
            Command::Replay(_) => "replay",
        }
    }

    /// Primary output: a directory for multi-file commands, else a file.
    pub fn out(&self) -> Option<&Path> {
        match self {
            Command::Synth(a) => Some(&a.out),
            Command::Features(a) => Some(&a.out),
            Command::Train(a) => Some(&a.out),
            Command::Score(a) => Some(&a.out),
            Command::Eval(a) => Some(&a.out),
            Command::Search(a) => Some(&a.out),
            Command::Bench(a) => Some(&a.out),
            Command::Export(a) => Some(&a.out),
            Command::Replay(_) => None,
        }
    }

    pub fn set_out(&mut self, path: PathBuf) {
        match self {
            Command::Synth(a) => a.out = path,
            Command::Features(a) => a.out = path,
            Command::Train(a) => a.out = path,
            Command::Score(a) => a.out = path,
            Command::Eval(a) => a.out = path,
            Command::Search(a) => a.out = path,
            Command::Bench(a) => a.out = path,
            Command::Export(a) => a.out = path,
            Command::Replay(_) => {}
        }
    }

    fn out_is_dir(&self) -> bool {
        matches!(
            self,
            Command::Synth(_) | Command::Features(_) | Command::Eval(_) | Command::Search(_)
        )
    }

    /// Where the run manifest goes: `manifest.json` inside an output
    /// directory, or `<file>.manifest.json` beside an output file.
    pub fn manifest_path(&self) -> Option<PathBuf> {
        let out = self.out()?;
        if self.out_is_dir() {
            Some(out.join("manifest.json"))
        } else {
            let mut p = out.as_os_str().to_owned();
            p.push(".manifest.json");
            Some(PathBuf::from(p))
        }
    }
}

/// Exactly one data source: a MIMII-style root or a synth config.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// Dataset root laid out as `<root>/<machine_type>/<id>/{normal,abnormal}/*.wav`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Synth config written by `outliernet synth`; the corpus is regenerated in memory.
    #[arg(long)]
    pub synth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DataArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Machine type to select when the root holds several.
    #[arg(long)]
    pub machine_type: Option<String>,
    /// Machine id to select when the root holds several.
    #[arg(long)]
    pub machine_id: Option<String>,
    /// Fraction of normal dataset clips held out for testing.
    #[arg(long, default_value_t = 0.5)]
    pub test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ArchArgs {
    /// Template family: fan_conv or slider_dense_bottleneck.
    #[arg(long, default_value = "fan_conv")]
    pub family: Family,
    #[arg(long, default_value_t = 1.0)]
    pub width: f64,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    /// Dense bottleneck size (slider family only).
    #[arg(long)]
    pub bottleneck: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainOpts {
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Epochs without validation improvement before stopping; 0 disables.
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    /// Fraction of training crops used for early-stopping validation.
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
}

impl TrainOpts {
    pub fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs_max: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            patience: (self.patience > 0).then_some(self.patience),
            val_fraction: self.val_fraction,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 40)]
    pub n_train: usize,
    #[arg(long, default_value_t = 20)]
    pub n_test_normal: usize,
    #[arg(long, default_value_t = 20)]
    pub n_test_anomalous: usize,
    /// Clip length in seconds.
    #[arg(long, default_value_t = 10.0)]
    pub duration: f64,
    /// freq_shift, impulse_train or broadband_burst.
    #[arg(long, default_value = "freq_shift")]
    pub kind: AnomalyKind,
    #[arg(long, default_value_t = 1.5)]
    pub shift_factor: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Write only the config, not the WAV tree.
    #[arg(long)]
    pub config_only: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FeaturesArgs {
    /// A WAV file or a directory searched recursively for WAV files.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[command(flatten)]
    pub train: TrainOpts,
    /// Model file (.olnt).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// A WAV file or a directory searched recursively for WAV files.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "max")]
    pub aggregation: Aggregation,
    /// Scores CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "max")]
    pub aggregation: Aggregation,
    /// Also write per-clip scores as JSON lines.
    #[arg(long)]
    pub jsonl: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyArg {
    Random,
    Evolutionary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorModeArg {
    Absolute,
    Relative,
}

impl From<FloorModeArg> for AucFloorMode {
    fn from(m: FloorModeArg) -> Self {
        match m {
            FloorModeArg::Absolute => AucFloorMode::Absolute,
            FloorModeArg::Relative => AucFloorMode::Relative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SearchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "fan_conv")]
    pub family: Family,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,1.0")]
    pub widths: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub depths: Vec<usize>,
    /// Bottleneck sizes (slider family only).
    #[arg(long, value_delimiter = ',')]
    pub bottlenecks: Vec<usize>,
    #[arg(long, value_enum, default_value = "evolutionary")]
    pub strategy: StrategyArg,
    /// Draws for the random strategy.
    #[arg(long, default_value_t = 12)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub population: usize,
    #[arg(long, default_value_t = 10)]
    pub generations: usize,
    /// Candidates need strictly fewer parameters than this.
    #[arg(long, default_value_t = DEFAULT_MAX_PARAMS)]
    pub max_params: usize,
    /// Reference AUC the floor is derived from.
    #[arg(long)]
    pub baseline_auc: Option<f64>,
    /// Explicit AUC floor, overriding the one derived from the baseline.
    #[arg(long)]
    pub auc_floor: Option<f64>,
    #[arg(long, value_enum, default_value = "absolute")]
    pub floor_mode: FloorModeArg,
    /// Training epochs per candidate.
    #[arg(long, default_value_t = 30)]
    pub proxy_epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub proxy_lr: f64,
    /// Fraction of training normals held out for search validation.
    #[arg(long, default_value_t = 0.1)]
    pub search_val_fraction: f64,
    /// Fraction of test anomalies moved to search validation.
    #[arg(long, default_value_t = 0.5)]
    pub val_anomalous_fraction: f64,
    /// Training of the winner on all training normals; the batch size also
    /// applies to proxy training.
    #[command(flatten)]
    pub train: TrainOpts,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub warmup: usize,
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    /// Do not pin the measuring thread to one CPU.
    #[arg(long)]
    pub no_pin: bool,
    /// Results CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ExportArgs {
    /// Model file; without it the template given by the arch flags is reported.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub arch: ArchArgs,
    /// Optional per-layer cost CSV.
    #[arg(long)]
    pub per_layer: Option<PathBuf>,
    /// Efficiency CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Redirect the primary output; defaults to the recorded location.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
