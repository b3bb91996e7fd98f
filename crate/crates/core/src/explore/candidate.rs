use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{indicator, perf_fn, Constraints, ExploreError, PerfFnConfig, SearchPoint};
use crate::anomaly::{compute_auc, train, AnomalyError, Scorer, TrainConfig};
use crate::arch::{count_macs, count_params, ArchSpec};
use crate::audio_io::{AudioClip, Label};
use crate::features::{clip_crops, CropWindow, FeatureConfig, MelFilterbank};
use crate::seed;

/// Why a candidate has, or lacks, an AUC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CandidateStatus {
    Evaluated,
    /// Over the parameter ceiling; never trained.
    SkippedParams,
    Diverged { epoch: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub point: SearchPoint,
    pub arch: ArchSpec,
    pub params: usize,
    pub macs: u64,
    /// Validation AUC.
    pub auc: Option<f64>,
    pub u_score: Option<f64>,
    pub feasible: bool,
    pub seed: u64,
    pub status: CandidateStatus,
}

/// One validation clip with precomputed crops.
#[derive(Debug, Clone, PartialEq)]
pub struct ValClip {
    pub id: String,
    pub crops: Vec<CropWindow>,
    pub label: Label,
}

/// Search-time data: training crops plus a labelled validation partition
/// drawn from outside the test set.
#[derive(Debug, Clone)]
pub struct SearchData {
    pub train_crops: Vec<CropWindow>,
    pub val: Vec<ValClip>,
    pub features: FeatureConfig,
}

impl SearchData {
    pub fn new(train_crops: Vec<CropWindow>, val: Vec<ValClip>, features: FeatureConfig) -> Result<Self, ExploreError> {
        let has = |l: Label| val.iter().any(|v| v.label == l);
        if !has(Label::Normal) || !has(Label::Anomalous) {
            return Err(ExploreError::Data("validation set needs normal and anomalous clips".into()));
        }
        if train_crops.is_empty() {
            return Err(ExploreError::Data("no training crops".into()));
        }
        Ok(Self {
            train_crops,
            val,
            features,
        })
    }

    /// Holds out `val_fraction` of the normal clips (at least one) for
    /// validation, alongside the given anomalous clips.
    pub fn from_clips(
        normals: &[AudioClip],
        val_anomalous: &[AudioClip],
        val_fraction: f64,
        features: &FeatureConfig,
        seed: u64,
    ) -> Result<Self, ExploreError> {
        if normals.len() < 2 {
            return Err(ExploreError::Data("need at least two normal clips".into()));
        }
        if !(val_fraction > 0.0 && val_fraction < 1.0) {
            return Err(ExploreError::Data(format!("val_fraction must lie in (0, 1), got {val_fraction}")));
        }
        let bank = MelFilterbank::new(features, features.sample_rate).map_err(AnomalyError::from)?;
        let crops = |c: &AudioClip| clip_crops(c, features, &bank).map_err(AnomalyError::from);

        let mut order: Vec<usize> = (0..normals.len()).collect();
        order.shuffle(&mut seed::rng(seed, "search-val-split"));
        let n_val = ((normals.len() as f64 * val_fraction).round() as usize).clamp(1, normals.len() - 1);
        let (val_idx, train_idx) = order.split_at(n_val);
        let mut train_idx = train_idx.to_vec();
        train_idx.sort_unstable();
        let mut val_idx = val_idx.to_vec();
        val_idx.sort_unstable();

        let mut train_crops = Vec::new();
        for &i in &train_idx {
            train_crops.extend(crops(&normals[i])?);
        }
        let mut val = Vec::new();
        for &i in &val_idx {
            val.push(ValClip {
                id: normals[i].source_id().to_string(),
                crops: crops(&normals[i])?,
                label: Label::Normal,
            });
        }
        for c in val_anomalous {
            val.push(ValClip {
                id: c.source_id().to_string(),
                crops: crops(c)?,
                label: Label::Anomalous,
            });
        }
        Self::new(train_crops, val, features.clone())
    }
}

/// Reduced training budget for search: 30 epochs without early stopping.
pub fn proxy_budget(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs_max: 30,
        patience: None,
        seed,
        ..TrainConfig::default()
    }
}

/// Trains and scores one grid point. Points over the parameter ceiling are
/// returned unevaluated without training; divergence marks the candidate
/// infeasible rather than failing the search.
pub fn evaluate_candidate(
    point: &SearchPoint,
    data: &SearchData,
    budget: &TrainConfig,
    constraints: &Constraints,
    perf: &PerfFnConfig,
) -> Result<Candidate, ExploreError> {
    let arch = point.arch()?;
    let params = count_params(&arch);
    let macs = count_macs(&arch);
    let mut candidate = Candidate {
        point: *point,
        arch,
        params,
        macs,
        auc: None,
        u_score: None,
        feasible: false,
        seed: budget.seed,
        status: CandidateStatus::SkippedParams,
    };
    if !constraints.params_ok(params) {
        return Ok(candidate);
    }

    let bundle = match train(&candidate.arch, &data.train_crops, budget) {
        Ok(b) => b,
        Err(AnomalyError::Diverged { epoch }) => {
            log::warn!("candidate {} diverged at epoch {epoch}", candidate.arch.name());
            candidate.status = CandidateStatus::Diverged { epoch };
            return Ok(candidate);
        }
        Err(e) => return Err(e.into()),
    };
    let scorer = Scorer::new(&bundle, &data.features)?;
    let scores = data
        .val
        .iter()
        .map(|v| Ok((scorer.score_crops(&v.id, &v.crops, Some(v.label))?.clip_score, v.label)))
        .collect::<Result<Vec<_>, AnomalyError>>()?;
    let auc = compute_auc(&scores)?;

    candidate.status = CandidateStatus::Evaluated;
    candidate.auc = Some(auc);
    candidate.u_score = perf_fn(auc, params as u64, macs, perf).ok();
    candidate.feasible = indicator(&candidate, constraints);
    Ok(candidate)
}
