mod oracles;

use outliernet::audio_io::{synthesize_corpus, AnomalyKind, AudioClip, Label, SynthSpec};
use outliernet::features::{hz_to_mel, log_mel, stft_power, FeatureConfig, MelFilterbank};
use outliernet::seed;
use rand::Rng;

/// Worst `max_k |a_k - o_k| / max_k o_k` over 20 random frames.
#[test]
fn stft_matches_direct_dft() {
    let cfg = FeatureConfig {
        center_pad: false,
        ..FeatureConfig::default()
    };
    let window = oracles::hann(cfg.n_fft);
    let mut rng = seed::rng(7, "dft-frames");
    let mut worst = 0.0f64;
    for i in 0..20 {
        let samples: Vec<f32> = (0..cfg.n_fft).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let clip = AudioClip::new(samples.clone(), 16_000, format!("frame{i}")).unwrap();
        let got = stft_power(&clip, &cfg).unwrap();
        assert_eq!((got.frames(), got.bins()), (1, cfg.n_fft / 2 + 1));
        let frame: Vec<f64> = samples.iter().map(|&s| f64::from(s)).collect();
        let want = oracles::dft_power(&frame, &window);
        let scale = want.iter().cloned().fold(0.0, f64::max);
        let err = got
            .frame(0)
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    assert!(worst < 1e-6, "relative error {worst:e}");
}

#[test]
fn centre_padding_frame_count() {
    let cfg = FeatureConfig::default();
    for len in [1usize, 511, 512, 1023, 5000, 160_000] {
        let clip = AudioClip::new(vec![0.1; len], 16_000, "c").unwrap();
        assert_eq!(stft_power(&clip, &cfg).unwrap().frames(), len / 512 + 1, "len {len}");
    }
}

#[test]
fn mel_centres_are_uniform_in_mel() {
    let cfg = FeatureConfig::default();
    let bank = MelFilterbank::new(&cfg, 16_000).unwrap();
    let centres = bank.centers_hz();
    assert_eq!(centres.len(), 128);
    let top = 2595.0 * (1.0f64 + 8000.0 / 700.0).log10();
    for (i, &c) in centres.iter().enumerate() {
        let mel = top * (i + 1) as f64 / 129.0;
        let want = 700.0 * (10f64.powf(mel / 2595.0) - 1.0);
        assert!((c - want).abs() < 1e-9 * want.max(1.0), "centre {i}: {c} vs {want}");
        assert!((hz_to_mel(c) - mel).abs() < 1e-9);
    }
    assert!(centres.windows(2).all(|w| w[0] < w[1]));
    for m in 0..128 {
        let peak = bank.row(m).iter().cloned().fold(0.0, f64::max);
        assert!(peak > 0.0 && peak <= 1.0);
    }
}

#[test]
fn pure_tone_lands_in_its_mel_band() {
    let cfg = FeatureConfig::default();
    let bank = MelFilterbank::new(&cfg, 16_000).unwrap();
    let samples: Vec<f32> = (0..16_000)
        .map(|n| (0.5 * (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / 16_000.0).sin()) as f32)
        .collect();
    let spec = log_mel(&AudioClip::new(samples, 16_000, "tone").unwrap(), &cfg).unwrap();
    let frame = spec.frame(10);
    let loudest = (0..128).max_by(|&a, &b| frame[a].total_cmp(&frame[b])).unwrap();
    let nearest = (0..128)
        .min_by(|&a, &b| {
            (bank.centers_hz()[a] - 1000.0)
                .abs()
                .total_cmp(&(bank.centers_hz()[b] - 1000.0).abs())
        })
        .unwrap();
    assert!(loudest.abs_diff(nearest) <= 1, "{loudest} vs {nearest}");
}

#[test]
fn freq_shift_moves_the_peak_to_600_hz() {
    let spec = SynthSpec {
        n_normal_train: 1,
        n_normal_test: 1,
        n_anomalous_test: 1,
        duration_s: 1.0,
        base_harmonics: vec![(400.0, 0.5)],
        noise_level: 0.0,
        anomaly_kind: AnomalyKind::FreqShift,
        shift_factor: 1.5,
        ..SynthSpec::default()
    };
    let corpus = synthesize_corpus(&spec).unwrap();
    let peak_hz = |clip: &AudioClip| {
        // 4000 samples at 16 kHz: 4 Hz bins, both tones on exact bins.
        let x: Vec<f64> = clip.samples()[..4000].iter().map(|&s| f64::from(s)).collect();
        let p = oracles::dft_power(&x, &vec![1.0; 4000]);
        let k = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        k as f64 * 4.0
    };
    let (anomalous, label) = corpus.test.iter().find(|(_, l)| *l == Label::Anomalous).unwrap();
    assert_eq!(*label, Label::Anomalous);
    assert_eq!(peak_hz(anomalous), 600.0);
    assert_eq!(peak_hz(&corpus.train[0]), 400.0);
}
