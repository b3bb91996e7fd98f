//! Audio input: WAV decoding, dataset indexing and synthetic corpora.

mod dataset;
mod synth;
mod wav;

use std::path::PathBuf;

use thiserror::Error;

pub use dataset::{index_dataset, list_machines, DatasetEntry, DatasetIndex, IndexOptions, Split};
pub use synth::{synthesize_corpus, AnomalyKind, Corpus, SynthSpec};
pub use wav::{read_wav, write_wav_f32, write_wav_pcm16};

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed WAV: chunk `{chunk}`: {reason}")]
    Format { chunk: String, reason: String },
    #[error("unsupported WAV encoding: format tag {format_tag:#06x}, {bits} bits per sample")]
    UnsupportedEncoding { format_tag: u16, bits: u16 },
    #[error("invalid clip `{source_id}`: {reason}")]
    InvalidClip { source_id: String, reason: String },
    #[error("sample rate mismatch for `{source_id}`: expected {expected} Hz, got {actual} Hz (resampling is not supported)")]
    SampleRateMismatch {
        source_id: String,
        expected: u32,
        actual: u32,
    },
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("invalid synthesis spec: {0}")]
    Synth(String),
}

/// Whether a recording is a normal or malfunctioning machine sound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Anomalous,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Anomalous => "anomalous",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(Label::Normal),
            "anomalous" | "abnormal" => Ok(Label::Anomalous),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

/// Mono PCM audio normalised to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
    source_id: String,
}

impl AudioClip {
    pub fn new(
        samples: Vec<f32>,
        sample_rate: u32,
        source_id: impl Into<String>,
    ) -> Result<Self, AudioError> {
        let source_id = source_id.into();
        let invalid = |reason: String| AudioError::InvalidClip {
            source_id: source_id.clone(),
            reason,
        };
        if samples.is_empty() {
            return Err(invalid("no samples".into()));
        }
        if sample_rate == 0 {
            return Err(invalid("sample rate must be positive".into()));
        }
        if let Some(i) = samples
            .iter()
            .position(|s| !s.is_finite() || s.abs() > 1.0)
        {
            return Err(invalid(format!(
                "sample {i} = {} is outside [-1, 1]",
                samples[i]
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
            source_id,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Multiplies every sample by `gain`, saturating at the [-1, 1] rails.
    pub fn scaled(&self, gain: f32) -> AudioClip {
        AudioClip {
            samples: self
                .samples
                .iter()
                .map(|s| (s * gain).clamp(-1.0, 1.0))
                .collect(),
            sample_rate: self.sample_rate,
            source_id: self.source_id.clone(),
        }
    }

    /// Rejects clips that would need resampling to match `expected`.
    pub fn require_rate(&self, expected: u32) -> Result<(), AudioError> {
        if self.sample_rate != expected {
            return Err(AudioError::SampleRateMismatch {
                source_id: self.source_id.clone(),
                expected,
                actual: self.sample_rate,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_invariants() {
        assert!(AudioClip::new(vec![], 16000, "x").is_err());
        assert!(AudioClip::new(vec![0.0], 0, "x").is_err());
        assert!(AudioClip::new(vec![1.5], 16000, "x").is_err());
        assert!(AudioClip::new(vec![f32::NAN], 16000, "x").is_err());
        let c = AudioClip::new(vec![-1.0, 1.0], 16000, "x").unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn rate_mismatch_is_rejected() {
        let c = AudioClip::new(vec![0.0; 4], 44100, "x").unwrap();
        assert!(matches!(
            c.require_rate(16000),
            Err(AudioError::SampleRateMismatch { .. })
        ));
        assert!(c.require_rate(44100).is_ok());
    }
}
