use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::auc::compute_auc;
use super::normalize::to_input;
use super::AnomalyError;
use crate::arch::{EfficiencyReport, ModelBundle, NormStats};
use crate::audio_io::{AudioClip, Label};
use crate::features::{clip_crops, CropWindow, FeatureConfig, FeatureError, MelFilterbank};
use crate::nn::{Network, Tensor4};

/// How per-crop errors become one clip score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// An anomaly confined to one crop still dominates the clip score.
    #[default]
    Max,
    Mean,
}

impl std::str::FromStr for Aggregation {
    type Err = AnomalyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(Aggregation::Max),
            "mean" => Ok(Aggregation::Mean),
            other => Err(AnomalyError::Config(format!("unknown aggregation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScore {
    pub clip_id: String,
    pub per_crop_mse: Vec<f64>,
    pub clip_score: f64,
    pub label: Option<Label>,
}

/// Machine type, id and SNR tag of the evaluated data, when known.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineTag {
    pub machine_type: String,
    pub machine_id: String,
    pub snr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    /// AUC over individual crops, each inheriting its clip's label.
    pub crop_auc: f64,
    pub n_normal: usize,
    pub n_anomalous: usize,
    pub scores: Vec<AnomalyScore>,
    pub efficiency: EfficiencyReport,
    pub machine_tag: Option<MachineTag>,
}

/// A frozen bundle ready to score clips. Safe to share across threads.
#[derive(Debug, Clone)]
pub struct Scorer {
    net: Network<f32>,
    norm: NormStats,
    features: FeatureConfig,
    bank: MelFilterbank,
    pub aggregation: Aggregation,
}

impl Scorer {
    pub fn new(bundle: &ModelBundle, features: &FeatureConfig) -> Result<Self, AnomalyError> {
        features.validate()?;
        Ok(Self {
            net: bundle.network()?,
            norm: bundle.norm,
            features: features.clone(),
            bank: MelFilterbank::new(features, features.sample_rate)?,
            aggregation: Aggregation::Max,
        })
    }

    pub fn with_aggregation(mut self, aggregation: Aggregation) -> Self {
        self.aggregation = aggregation;
        self
    }

    pub fn score(&self, clip: &AudioClip, label: Option<Label>) -> Result<AnomalyScore, AnomalyError> {
        let crops = clip_crops(clip, &self.features, &self.bank)?;
        self.score_crops(clip.source_id(), &crops, label)
    }

    /// Scores precomputed (unnormalised) crops of one clip.
    pub fn score_crops(
        &self,
        clip_id: &str,
        crops: &[CropWindow],
        label: Option<Label>,
    ) -> Result<AnomalyScore, AnomalyError> {
        if crops.is_empty() {
            return Err(AnomalyError::Feature(FeatureError::TooShort { frames: 0 }));
        }
        let shape = self.net.input_shape();
        let mut data = Vec::with_capacity(crops.len() * shape.len());
        for c in crops {
            if c.values.len() != shape.len() {
                return Err(AnomalyError::Config(format!(
                    "crop from `{}` has {} values, the model expects {}",
                    c.clip_ref,
                    c.values.len(),
                    shape.len()
                )));
            }
            to_input(&c.values, self.norm, &mut data);
        }
        let x = Tensor4::from_vec(data, crops.len(), shape)?;
        let y = self.net.forward(&x)?;
        let per_crop_mse: Vec<f64> = (0..crops.len())
            .map(|b| {
                let sq: f64 = y
                    .sample(b)
                    .iter()
                    .zip(x.sample(b))
                    .map(|(&p, &t)| {
                        let d = f64::from(p) - f64::from(t);
                        d * d
                    })
                    .sum();
                sq / shape.len() as f64
            })
            .collect();
        let clip_score = match self.aggregation {
            Aggregation::Max => per_crop_mse.iter().copied().fold(0.0, f64::max),
            Aggregation::Mean => per_crop_mse.iter().sum::<f64>() / per_crop_mse.len() as f64,
        };
        Ok(AnomalyScore {
            clip_id: clip_id.to_string(),
            per_crop_mse,
            clip_score,
            label,
        })
    }
}

/// Scores one clip with max aggregation.
pub fn score_clip(bundle: &ModelBundle, clip: &AudioClip, cfg: &FeatureConfig) -> Result<AnomalyScore, AnomalyError> {
    Scorer::new(bundle, cfg)?.score(clip, None)
}

/// Scores a labelled test set in parallel (on the current rayon pool) and
/// computes clip-level AUC.
pub fn evaluate(
    bundle: &ModelBundle,
    test: &[(AudioClip, Label)],
    cfg: &FeatureConfig,
    aggregation: Aggregation,
) -> Result<EvalReport, AnomalyError> {
    let n_anomalous = test.iter().filter(|(_, l)| *l == Label::Anomalous).count();
    let n_normal = test.len() - n_anomalous;
    if n_normal == 0 || n_anomalous == 0 {
        let only = test.first().map(|(_, l)| *l).ok_or(AnomalyError::Empty)?;
        return Err(AnomalyError::SingleClass(only));
    }
    let scorer = Scorer::new(bundle, cfg)?.with_aggregation(aggregation);
    let scores = test
        .par_iter()
        .map(|(clip, label)| scorer.score(clip, Some(*label)))
        .collect::<Result<Vec<_>, _>>()?;

    let clip_level: Vec<(f64, Label)> = test
        .iter()
        .zip(&scores)
        .map(|((_, l), s)| (s.clip_score, *l))
        .collect();
    let crop_level: Vec<(f64, Label)> = test
        .iter()
        .zip(&scores)
        .flat_map(|((_, l), s)| s.per_crop_mse.iter().map(move |&m| (m, *l)))
        .collect();
    Ok(EvalReport {
        auc: compute_auc(&clip_level)?,
        crop_auc: compute_auc(&crop_level)?,
        n_normal,
        n_anomalous,
        scores,
        efficiency: EfficiencyReport::for_bundle(bundle),
        machine_tag: None,
    })
}
