use super::{FeatureConfig, FeatureError};

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular Mel filterbank, `n_mels x (n_fft/2 + 1)`.
///
/// Band edges are `n_mels + 2` points spaced uniformly in Mel between
/// `f_min` and `f_max`; filter `m` rises linearly from edge `m` to a peak of
/// 1 at edge `m + 1` and falls back to 0 at edge `m + 2`, evaluated at the FFT
/// bin centre frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    weights: Vec<f64>,
    /// Non-zero column span `[start, end)` of each row.
    spans: Vec<(usize, usize)>,
    centers_hz: Vec<f64>,
    n_mels: usize,
    n_bins: usize,
}

impl MelFilterbank {
    pub fn new(cfg: &FeatureConfig, sample_rate: u32) -> Result<Self, FeatureError> {
        cfg.validate()?;
        let n_bins = cfg.n_bins();
        let n_mels = cfg.n_mels;
        let f_max = cfg.f_max_for(sample_rate);
        if !(cfg.f_min >= 0.0 && cfg.f_min < f_max) {
            return Err(FeatureError::Config(format!(
                "band [{}, {f_max}] Hz is empty",
                cfg.f_min
            )));
        }

        let (mel_lo, mel_hi) = (hz_to_mel(cfg.f_min), hz_to_mel(f_max));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = f64::from(sample_rate) / cfg.n_fft as f64;

        let mut weights = vec![0.0; n_mels * n_bins];
        let mut spans = Vec::with_capacity(n_mels);
        for m in 0..n_mels {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let row = &mut weights[m * n_bins..(m + 1) * n_bins];
            let mut span = (n_bins, 0);
            for (k, w) in row.iter_mut().enumerate() {
                let f = k as f64 * bin_hz;
                let rising = (f - lo) / (mid - lo);
                let falling = (hi - f) / (hi - mid);
                let v = rising.min(falling).max(0.0);
                if v > 0.0 {
                    *w = v;
                    span.0 = span.0.min(k);
                    span.1 = k + 1;
                }
            }
            if span.1 == 0 {
                return Err(FeatureError::EmptyMelFilter { index: m, n_bins });
            }
            spans.push(span);
        }

        Ok(Self {
            weights,
            spans,
            centers_hz: edges[1..=n_mels].to_vec(),
            n_mels,
            n_bins,
        })
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    /// Mel-band energies of one power frame.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        debug_assert_eq!(power.len(), self.n_bins);
        self.spans
            .iter()
            .enumerate()
            .map(|(m, &(s, e))| {
                self.row(m)[s..e]
                    .iter()
                    .zip(&power[s..e])
                    .map(|(w, p)| w * p)
                    .sum()
            })
            .collect()
    }
}
