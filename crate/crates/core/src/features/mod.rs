//! Log-Mel spectrograms and fixed-size crops.
//!
//! Defaults: 1024-point Hann-windowed FFT, hop 512, 128 Mel bands over
//! [0, sr/2], centre reflect-padding, `log10(max(mel_power, 1e-10))`. A 10 s
//! clip at 16 kHz yields 313 frames, cut into nine 32-frame crops (the last
//! 25 frames are dropped).

mod mel;
mod stft;
mod tensor_file;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::{AudioClip, AudioError};

pub use mel::{hz_to_mel, mel_to_hz, MelFilterbank};
pub use stft::{stft_power, PowerSpectrogram};
pub use tensor_file::{read_tensor_file, write_tensor_file, TensorFile, TENSOR_DTYPE_F32, TENSOR_MAGIC};

/// Frames per crop window.
pub const CROP_FRAMES: usize = 32;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("invalid feature config: {0}")]
    Config(String),
    #[error("clip `{0}` is empty")]
    EmptyClip(String),
    #[error("mel filter {index} has no positive weight; too many bands for {n_bins} FFT bins")]
    EmptyMelFilter { index: usize, n_bins: usize },
    #[error("spectrogram has {frames} frames; at least {CROP_FRAMES} are needed for one crop")]
    TooShort { frames: usize },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("tensor file {path}: {reason}")]
    TensorFile { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
    Rectangular,
}

impl WindowKind {
    /// Periodic window of length `n` (the STFT convention).
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; n],
            WindowKind::Hann => (0..n)
                .map(|i| {
                    0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub window: WindowKind,
    pub f_min: f64,
    /// Upper band edge; `None` means the Nyquist frequency.
    pub f_max: Option<f64>,
    pub log_floor: f64,
    pub center_pad: bool,
    /// Expected clip rate. Clips at any other rate are rejected.
    pub sample_rate: u32,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            n_fft: 1024,
            hop: 512,
            n_mels: 128,
            window: WindowKind::Hann,
            f_min: 0.0,
            f_max: None,
            log_floor: 1e-10,
            center_pad: true,
            sample_rate: 16_000,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |m: String| Err(FeatureError::Config(m));
        if !self.n_fft.is_power_of_two() || self.n_fft < 2 {
            return bad(format!("n_fft {} is not a power of two", self.n_fft));
        }
        if self.hop == 0 || self.hop > self.n_fft {
            return bad(format!("hop {} must lie in [1, n_fft]", self.hop));
        }
        if self.n_mels == 0 || self.n_mels > self.n_bins() {
            return bad(format!(
                "n_mels {} must lie in [1, n_fft/2 + 1 = {}]",
                self.n_mels,
                self.n_bins()
            ));
        }
        if !(self.log_floor > 0.0) {
            return bad("log_floor must be positive".into());
        }
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn f_max_for(&self, sample_rate: u32) -> f64 {
        self.f_max.unwrap_or(f64::from(sample_rate) / 2.0)
    }

    /// Frames produced for `n_samples` input samples.
    pub fn frame_count(&self, n_samples: usize) -> usize {
        if self.center_pad {
            n_samples / self.hop + 1
        } else {
            n_samples.saturating_sub(self.n_fft) / self.hop + 1
        }
    }
}

/// Log-power Mel spectrogram laid out `frames x n_mels`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    values: Vec<f64>,
    frames: usize,
    n_mels: usize,
}

impl MelSpectrogram {
    pub fn from_values(values: Vec<f64>, frames: usize, n_mels: usize) -> Result<Self, FeatureError> {
        if values.len() != frames * n_mels {
            return Err(FeatureError::Config(format!(
                "{} values for a {frames} x {n_mels} spectrogram",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::Config("non-finite spectrogram value".into()));
        }
        Ok(Self {
            values,
            frames,
            n_mels,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_mels..(t + 1) * self.n_mels]
    }
}

/// One `32 x n_mels` crop, in time order within its clip.
#[derive(Debug, Clone, PartialEq)]
pub struct CropWindow {
    pub values: Vec<f64>,
    pub n_mels: usize,
    pub clip_ref: String,
    pub crop_index: usize,
}

impl CropWindow {
    pub fn frames(&self) -> usize {
        CROP_FRAMES
    }
}

/// Computes the log-Mel spectrogram of a clip.
pub fn log_mel(clip: &AudioClip, cfg: &FeatureConfig) -> Result<MelSpectrogram, FeatureError> {
    let bank = MelFilterbank::new(cfg, clip.sample_rate())?;
    log_mel_with(clip, cfg, &bank)
}

/// [`log_mel`] with a prebuilt filterbank, for batch processing.
pub fn log_mel_with(
    clip: &AudioClip,
    cfg: &FeatureConfig,
    bank: &MelFilterbank,
) -> Result<MelSpectrogram, FeatureError> {
    clip.require_rate(cfg.sample_rate)?;
    let power = stft_power(clip, cfg)?;
    let mut values = Vec::with_capacity(power.frames() * bank.n_mels());
    let floor = cfg.log_floor;
    for t in 0..power.frames() {
        let frame = power.frame(t);
        values.extend(bank.apply(frame).into_iter().map(|p| p.max(floor).log10()));
    }
    MelSpectrogram::from_values(values, power.frames(), bank.n_mels())
}

/// Cuts a spectrogram into non-overlapping 32-frame windows from frame 0.
/// Trailing frames that do not fill a window are discarded.
pub fn crop_windows(
    spec: &MelSpectrogram,
    clip_ref: &str,
) -> Result<Vec<CropWindow>, FeatureError> {
    if spec.frames < CROP_FRAMES {
        return Err(FeatureError::TooShort { frames: spec.frames });
    }
    let width = CROP_FRAMES * spec.n_mels;
    Ok(spec
        .values
        .chunks_exact(width)
        .enumerate()
        .map(|(crop_index, chunk)| CropWindow {
            values: chunk.to_vec(),
            n_mels: spec.n_mels,
            clip_ref: clip_ref.to_string(),
            crop_index,
        })
        .collect())
}

/// Seconds of audio covered by one crop: `32 * hop / sample_rate`.
pub fn crop_duration_seconds(cfg: &FeatureConfig, sample_rate: u32) -> f64 {
    (CROP_FRAMES * cfg.hop) as f64 / f64::from(sample_rate)
}

/// Full feature path for one clip: log-Mel then crops.
pub fn clip_crops(
    clip: &AudioClip,
    cfg: &FeatureConfig,
    bank: &MelFilterbank,
) -> Result<Vec<CropWindow>, FeatureError> {
    let spec = log_mel_with(clip, cfg, bank)?;
    crop_windows(&spec, clip.source_id())
}
