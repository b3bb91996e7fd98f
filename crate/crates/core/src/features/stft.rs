use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{FeatureConfig, FeatureError};
use crate::audio_io::AudioClip;

/// Power spectrogram laid out `frames x (n_fft/2 + 1)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrogram {
    data: Vec<f64>,
    frames: usize,
    bins: usize,
}

impl PowerSpectrogram {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }
}

/// Maps an index of the padded signal onto `0..n` by mirror reflection that
/// excludes the edge sample (numpy's `reflect` mode), folding repeatedly for
/// signals shorter than the pad.
fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Short-time power spectrum `|DFT(w * x)|^2` of a clip.
///
/// With `center_pad` the clip is reflect-padded by `n_fft/2` on both sides so
/// frame `t` is centred on sample `t * hop`, giving `floor(len/hop) + 1`
/// frames. Without it, frames start at sample 0 and a clip shorter than
/// `n_fft` is zero-padded to one frame.
pub fn stft_power(clip: &AudioClip, cfg: &FeatureConfig) -> Result<PowerSpectrogram, FeatureError> {
    cfg.validate()?;
    let x = clip.samples();
    if x.is_empty() {
        return Err(FeatureError::EmptyClip(clip.source_id().to_string()));
    }
    let n_fft = cfg.n_fft;
    let bins = cfg.n_bins();
    let frames = cfg.frame_count(x.len());
    let window = cfg.window.coefficients(n_fft);
    let pad = if cfg.center_pad { (n_fft / 2) as isize } else { 0 };

    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut data = Vec::with_capacity(frames * bins);

    for t in 0..frames {
        let start = (t * cfg.hop) as isize - pad;
        for (j, (slot, w)) in buf.iter_mut().zip(&window).enumerate() {
            let i = start + j as isize;
            let sample = if cfg.center_pad {
                f64::from(x[reflect_index(i, x.len())])
            } else if (i as usize) < x.len() {
                f64::from(x[i as usize])
            } else {
                0.0
            };
            *slot = Complex::new(sample * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        data.extend(buf[..bins].iter().map(|c| c.norm_sqr()));
    }

    Ok(PowerSpectrogram { data, frames, bins })
}
