use serde::{Deserialize, Serialize};

use super::{Candidate, ExploreError};

/// Exponents of the accuracy/size/compute trade-off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfFnConfig {
    pub kappa: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for PerfFnConfig {
    fn default() -> Self {
        Self {
            kappa: 2.0,
            beta: 0.5,
            gamma: 0.5,
        }
    }
}

/// `20 log10((100 auc)^kappa / ((params/1e6)^beta (macs/1e6)^gamma))`.
pub fn perf_fn(auc: f64, params: u64, macs: u64, cfg: &PerfFnConfig) -> Result<f64, ExploreError> {
    if !(auc > 0.0 && auc <= 1.0) {
        return Err(ExploreError::Domain(format!("auc must lie in (0, 1], got {auc}")));
    }
    if params == 0 || macs == 0 {
        return Err(ExploreError::Domain(format!(
            "params and macs must be positive, got {params} and {macs}"
        )));
    }
    if [cfg.kappa, cfg.beta, cfg.gamma].iter().any(|e| !(*e > 0.0)) {
        return Err(ExploreError::Domain("exponents must be positive".into()));
    }
    // Summing logs avoids overflow for large exponents.
    let log = cfg.kappa * (100.0 * auc).log10()
        - cfg.beta * (params as f64 / 1e6).log10()
        - cfg.gamma * (macs as f64 / 1e6).log10();
    Ok(20.0 * log)
}

/// How the AUC floor is derived from the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AucFloorMode {
    /// `baseline - 0.10`.
    #[default]
    Absolute,
    /// `baseline * 0.90`.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    /// Candidates need strictly fewer parameters than this.
    pub max_params: usize,
    pub baseline_auc: f64,
    pub auc_floor: f64,
}

pub const DEFAULT_MAX_PARAMS: usize = 100_000;
const FLOOR_MARGIN: f64 = 0.10;

impl Constraints {
    pub fn from_baseline(max_params: usize, baseline_auc: f64, mode: AucFloorMode) -> Result<Self, ExploreError> {
        let auc_floor = match mode {
            AucFloorMode::Absolute => baseline_auc - FLOOR_MARGIN,
            AucFloorMode::Relative => baseline_auc * (1.0 - FLOOR_MARGIN),
        }
        .max(0.0);
        Self::with_floor(max_params, baseline_auc, auc_floor)
    }

    pub fn with_floor(max_params: usize, baseline_auc: f64, auc_floor: f64) -> Result<Self, ExploreError> {
        if max_params == 0 {
            return Err(ExploreError::InvalidConstraints("max_params must be positive".into()));
        }
        if !(0.0..=1.0).contains(&baseline_auc) {
            return Err(ExploreError::InvalidConstraints(format!(
                "baseline_auc must lie in [0, 1], got {baseline_auc}"
            )));
        }
        if !(0.0..1.0).contains(&auc_floor) {
            return Err(ExploreError::InvalidConstraints(format!(
                "auc_floor must lie in [0, 1), got {auc_floor}"
            )));
        }
        Ok(Self {
            max_params,
            baseline_auc,
            auc_floor,
        })
    }

    pub fn params_ok(&self, params: usize) -> bool {
        params < self.max_params
    }
}

/// True iff the candidate was evaluated, has fewer than `max_params`
/// parameters and reaches the AUC floor.
pub fn indicator(candidate: &Candidate, constraints: &Constraints) -> bool {
    constraints.params_ok(candidate.params) && candidate.auc.is_some_and(|a| a >= constraints.auc_floor)
}
