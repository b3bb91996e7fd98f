//! Seeded synthetic machine sounds.
//!
//! A normal clip is a sum of harmonic sinusoids plus white Gaussian noise.
//! Anomalous clips apply one of three faults on top of that recipe. Each clip
//! draws its noise from its own sub-seed, so a corpus is a pure function of
//! its [`SynthSpec`].

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AudioClip, AudioError, Label};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// Every harmonic frequency is multiplied by `shift_factor`.
    FreqShift,
    /// Periodic decaying clicks.
    ImpulseTrain,
    /// Band-limited noise bursts.
    BroadbandBurst,
}

impl AnomalyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyKind::FreqShift => "freq_shift",
            AnomalyKind::ImpulseTrain => "impulse_train",
            AnomalyKind::BroadbandBurst => "broadband_burst",
        }
    }
}

impl FromStr for AnomalyKind {
    type Err = AudioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "freq_shift" => Ok(AnomalyKind::FreqShift),
            "impulse_train" => Ok(AnomalyKind::ImpulseTrain),
            "broadband_burst" => Ok(AnomalyKind::BroadbandBurst),
            other => Err(AudioError::Synth(format!("unknown anomaly_kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_normal_train: usize,
    pub n_normal_test: usize,
    pub n_anomalous_test: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    /// `(frequency_hz, amplitude)` pairs.
    pub base_harmonics: Vec<(f64, f64)>,
    /// Standard deviation of the additive Gaussian noise, as a fraction of
    /// full scale.
    pub noise_level: f64,
    pub anomaly_kind: AnomalyKind,
    pub shift_factor: f64,
    pub impulse_rate_hz: f64,
    pub impulse_amplitude: f64,
    /// Standard deviation of the white noise driving the burst band-pass.
    pub burst_level: f64,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_normal_train: 40,
            n_normal_test: 20,
            n_anomalous_test: 20,
            duration_s: 10.0,
            sample_rate: 16_000,
            base_harmonics: vec![(250.0, 0.25), (500.0, 0.15), (1000.0, 0.1), (2000.0, 0.05)],
            noise_level: 0.05,
            anomaly_kind: AnomalyKind::FreqShift,
            shift_factor: 1.5,
            impulse_rate_hz: 8.0,
            impulse_amplitude: 0.5,
            burst_level: 0.3,
            rng_seed: 0,
        }
    }
}

/// Minimum frequency multiplier for the `freq_shift` fault.
pub const MIN_SHIFT_FACTOR: f64 = 1.3;

impl SynthSpec {
    pub fn validate(&self) -> Result<(), AudioError> {
        let bad = |m: String| Err(AudioError::Synth(m));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return bad(format!("duration_s must be positive, got {}", self.duration_s));
        }
        if self.samples_per_clip() == 0 {
            return bad("duration_s yields zero samples".into());
        }
        if !(self.noise_level >= 0.0) {
            return bad(format!("noise_level must be >= 0, got {}", self.noise_level));
        }
        let nyquist = f64::from(self.sample_rate) / 2.0;
        for &(f, a) in &self.base_harmonics {
            if !(f > 0.0 && f < nyquist) {
                return bad(format!("harmonic {f} Hz is not in (0, {nyquist}) Hz"));
            }
            if !a.is_finite() {
                return bad(format!("harmonic amplitude {a} is not finite"));
            }
        }
        if self.anomaly_kind == AnomalyKind::FreqShift {
            if self.shift_factor < MIN_SHIFT_FACTOR {
                return bad(format!(
                    "shift_factor {} is below the minimum {MIN_SHIFT_FACTOR}",
                    self.shift_factor
                ));
            }
            if let Some(&(f, _)) = self
                .base_harmonics
                .iter()
                .find(|(f, _)| f * self.shift_factor >= nyquist)
            {
                return bad(format!(
                    "shifted harmonic {} Hz reaches Nyquist",
                    f * self.shift_factor
                ));
            }
        }
        if self.anomaly_kind == AnomalyKind::ImpulseTrain && !(self.impulse_rate_hz > 0.0) {
            return bad("impulse_rate_hz must be positive".into());
        }
        Ok(())
    }

    pub fn samples_per_clip(&self) -> usize {
        (self.duration_s * f64::from(self.sample_rate)).round() as usize
    }

    /// Serialises as one `key = value` per line.
    pub fn to_config_string(&self) -> String {
        let harmonics: Vec<String> = self
            .base_harmonics
            .iter()
            .map(|(f, a)| format!("{f}:{a}"))
            .collect();
        let mut s = String::new();
        let _ = writeln!(s, "n_normal_train = {}", self.n_normal_train);
        let _ = writeln!(s, "n_normal_test = {}", self.n_normal_test);
        let _ = writeln!(s, "n_anomalous_test = {}", self.n_anomalous_test);
        let _ = writeln!(s, "duration_s = {}", self.duration_s);
        let _ = writeln!(s, "sample_rate = {}", self.sample_rate);
        let _ = writeln!(s, "base_harmonics = {}", harmonics.join(", "));
        let _ = writeln!(s, "noise_level = {}", self.noise_level);
        let _ = writeln!(s, "anomaly_kind = {}", self.anomaly_kind.as_str());
        let _ = writeln!(s, "shift_factor = {}", self.shift_factor);
        let _ = writeln!(s, "impulse_rate_hz = {}", self.impulse_rate_hz);
        let _ = writeln!(s, "impulse_amplitude = {}", self.impulse_amplitude);
        let _ = writeln!(s, "burst_level = {}", self.burst_level);
        let _ = writeln!(s, "rng_seed = {}", self.rng_seed);
        s
    }

    /// Parses the `key = value` format. Missing keys keep their defaults;
    /// unknown keys are rejected. `#` starts a comment.
    pub fn from_config_str(text: &str) -> Result<Self, AudioError> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, AudioError> {
            v.parse()
                .map_err(|_| AudioError::Synth(format!("bad value for `{key}`: `{v}`")))
        }
        let mut spec = SynthSpec::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                AudioError::Synth(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "n_normal_train" => spec.n_normal_train = num(key, value)?,
                "n_normal_test" => spec.n_normal_test = num(key, value)?,
                "n_anomalous_test" => spec.n_anomalous_test = num(key, value)?,
                "duration_s" => spec.duration_s = num(key, value)?,
                "sample_rate" => spec.sample_rate = num(key, value)?,
                "base_harmonics" => {
                    spec.base_harmonics = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|pair| {
                            let (f, a) = pair.split_once(':').ok_or_else(|| {
                                AudioError::Synth(format!("harmonic `{pair}` is not freq:amp"))
                            })?;
                            Ok((num(key, f.trim())?, num(key, a.trim())?))
                        })
                        .collect::<Result<_, AudioError>>()?
                }
                "noise_level" => spec.noise_level = num(key, value)?,
                "anomaly_kind" => spec.anomaly_kind = value.parse()?,
                "shift_factor" => spec.shift_factor = num(key, value)?,
                "impulse_rate_hz" => spec.impulse_rate_hz = num(key, value)?,
                "impulse_amplitude" => spec.impulse_amplitude = num(key, value)?,
                "burst_level" => spec.burst_level = num(key, value)?,
                "rng_seed" => spec.rng_seed = num(key, value)?,
                other => {
                    return Err(AudioError::Synth(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// A generated corpus: normal-only training clips and a labelled test set.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub train: Vec<AudioClip>,
    pub test: Vec<(AudioClip, Label)>,
}

fn harmonic_sum(spec: &SynthSpec, freq_scale: f64, out: &mut [f64]) {
    let sr = f64::from(spec.sample_rate);
    for (n, v) in out.iter_mut().enumerate() {
        let t = n as f64 / sr;
        *v = spec
            .base_harmonics
            .iter()
            .map(|&(f, a)| a * (2.0 * PI * f * freq_scale * t).sin())
            .sum();
    }
}

fn add_noise(buf: &mut [f64], std: f64, rng: &mut impl Rng) {
    if std == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, std).expect("finite non-negative std");
    for v in buf.iter_mut() {
        *v += normal.sample(rng);
    }
}

fn add_impulses(spec: &SynthSpec, buf: &mut [f64]) {
    let period = (f64::from(spec.sample_rate) / spec.impulse_rate_hz).round().max(1.0) as usize;
    const CLICK_LEN: usize = 32;
    for (k, start) in (0..buf.len()).step_by(period).enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for (j, v) in buf[start..].iter_mut().take(CLICK_LEN).enumerate() {
            *v += sign * spec.impulse_amplitude * (-(j as f64) / 6.0).exp();
        }
    }
}

fn add_bursts(spec: &SynthSpec, buf: &mut [f64], rng: &mut impl Rng) {
    let sr = f64::from(spec.sample_rate);
    // RBJ constant-peak band-pass centred at 3/16 of the sample rate, Q = 1.
    let w0 = 2.0 * PI * (3.0 / 16.0);
    let alpha = w0.sin() / 2.0;
    let a0 = 1.0 + alpha;
    let (b0, b2) = (alpha / a0, -alpha / a0);
    let (a1, a2) = (-2.0 * w0.cos() / a0, (1.0 - alpha) / a0);
    let normal = Normal::new(0.0, spec.burst_level.max(0.0)).expect("finite std");

    let burst_len = (0.1 * sr) as usize;
    let period = (0.4 * sr) as usize;
    let offset = (0.15 * sr) as usize;
    let mut start = offset;
    while start < buf.len() {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for v in buf[start..].iter_mut().take(burst_len) {
            let x: f64 = normal.sample(rng);
            let y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            *v += y;
        }
        start += period.max(1);
    }
}

fn render(spec: &SynthSpec, anomalous: bool, clip_seed: u64, source_id: String) -> AudioClip {
    let mut buf = vec![0.0f64; spec.samples_per_clip()];
    let mut rng = seed::rng(clip_seed, "synth-clip");
    let shift = if anomalous && spec.anomaly_kind == AnomalyKind::FreqShift {
        spec.shift_factor
    } else {
        1.0
    };
    harmonic_sum(spec, shift, &mut buf);
    add_noise(&mut buf, spec.noise_level, &mut rng);
    if anomalous {
        match spec.anomaly_kind {
            AnomalyKind::FreqShift => {}
            AnomalyKind::ImpulseTrain => add_impulses(spec, &mut buf),
            AnomalyKind::BroadbandBurst => add_bursts(spec, &mut buf, &mut rng),
        }
    }
    let samples = buf.iter().map(|&v| v.clamp(-1.0, 1.0) as f32).collect();
    AudioClip::new(samples, spec.sample_rate, source_id).expect("clipped finite samples")
}

/// Generates the training and test clips described by `spec`.
pub fn synthesize_corpus(spec: &SynthSpec) -> Result<Corpus, AudioError> {
    use rayon::prelude::*;
    spec.validate()?;
    let seed = spec.rng_seed;
    let train = (0..spec.n_normal_train)
        .into_par_iter()
        .map(|i| {
            render(
                spec,
                false,
                seed::derive_indexed(seed, "synth-train", i as u64),
                format!("synth:train:normal:{i:04}"),
            )
        })
        .collect();
    let normals = (0..spec.n_normal_test).into_par_iter().map(|i| {
        (
            render(
                spec,
                false,
                seed::derive_indexed(seed, "synth-test-normal", i as u64),
                format!("synth:test:normal:{i:04}"),
            ),
            Label::Normal,
        )
    });
    let anomalies = (0..spec.n_anomalous_test).into_par_iter().map(|i| {
        (
            render(
                spec,
                true,
                seed::derive_indexed(seed, "synth-test-anomalous", i as u64),
                format!("synth:test:anomalous:{i:04}"),
            ),
            Label::Anomalous,
        )
    });
    let test = normals.chain(anomalies).collect();
    Ok(Corpus { train, test })
}
