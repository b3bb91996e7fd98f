use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::normalize::{norm_stats, to_input};
use super::AnomalyError;
use crate::arch::{ArchSpec, ModelBundle};
use crate::features::CropWindow;
use crate::nn::{mse_loss, Adam, AdamConfig, Network, Tensor4};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs_max: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Epochs without a validation improvement before stopping. `None`
    /// always runs `epochs_max` epochs (still restoring the best weights).
    pub patience: Option<usize>,
    /// Share of the normal training crops held out for early stopping.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs_max: 200,
            batch_size: 64,
            lr: 1e-3,
            patience: Some(10),
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AnomalyError> {
        let bad = |m: &str| Err(AnomalyError::Config(m.to_string()));
        if self.epochs_max == 0 {
            return bad("epochs_max must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.patience == Some(0) {
            return bad("patience must be positive");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 0.5) {
            return bad("val_fraction must lie in (0, 0.5)");
        }
        Ok(())
    }
}

/// Per-epoch losses on normalised crops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_mse: Vec<f64>,
    pub val_mse: Vec<f64>,
    /// Zero-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn epochs_run(&self) -> usize {
        self.train_mse.len()
    }

    pub fn best_val_mse(&self) -> f64 {
        self.val_mse[self.best_epoch]
    }
}

/// Trains `arch` on normal crops and freezes the result.
pub fn train(arch: &ArchSpec, crops: &[CropWindow], cfg: &TrainConfig) -> Result<ModelBundle, AnomalyError> {
    train_with_history(arch, crops, cfg).map(|(bundle, _)| bundle)
}

pub fn train_with_history(
    arch: &ArchSpec,
    crops: &[CropWindow],
    cfg: &TrainConfig,
) -> Result<(ModelBundle, TrainHistory), AnomalyError> {
    cfg.validate()?;
    let needed = cfg.batch_size.max(2);
    if crops.len() < needed {
        return Err(AnomalyError::NotEnoughCrops {
            needed,
            got: crops.len(),
        });
    }
    let input_len = arch.input_shape().len();
    if let Some(bad) = crops.iter().find(|c| c.values.len() != input_len) {
        return Err(AnomalyError::Config(format!(
            "crop from `{}` has {} values, the model expects {input_len}",
            bad.clip_ref,
            bad.values.len()
        )));
    }

    let mut order: Vec<usize> = (0..crops.len()).collect();
    order.shuffle(&mut seed::rng(cfg.seed, "train-val-split"));
    let n_val = ((crops.len() as f64 * cfg.val_fraction).round() as usize).clamp(1, crops.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();

    let train_crops: Vec<CropWindow> = train_idx.iter().map(|&i| crops[i].clone()).collect();
    let stats = norm_stats(&train_crops)?;
    let inputs: Vec<Vec<f32>> = crops
        .iter()
        .map(|c| {
            let mut v = Vec::with_capacity(input_len);
            to_input(&c.values, stats, &mut v);
            v
        })
        .collect();

    let mut net: Network<f32> = arch.instantiate(cfg.seed);
    let mut adam = Adam::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let mut shuffle_rng = seed::rng(cfg.seed, "epoch-shuffle");

    let mut history = TrainHistory {
        train_mse: Vec::new(),
        val_mse: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best_weights = net.flat();
    let mut best_val = f64::INFINITY;

    for epoch in 0..cfg.epochs_max {
        train_idx.shuffle(&mut shuffle_rng);
        let mut weighted = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            let x = stack(&inputs, batch, arch)?;
            let trace = net.forward_trace(&x)?;
            let (loss, grad) = mse_loss(trace.output(), &x)?;
            if !loss.is_finite() {
                return Err(AnomalyError::Diverged { epoch });
            }
            net.backward(&trace, &grad)?;
            adam.step(net.params_mut());
            weighted += f64::from(loss) * batch.len() as f64;
        }
        let train_mse = weighted / train_idx.len() as f64;
        let val_mse = mean_mse(&net, &inputs, val_idx, arch)?;
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(AnomalyError::Diverged { epoch });
        }
        history.train_mse.push(train_mse);
        history.val_mse.push(val_mse);
        log::debug!("epoch {epoch}: train {train_mse:.6} val {val_mse:.6}");

        if val_mse < best_val {
            best_val = val_mse;
            history.best_epoch = epoch;
            best_weights = net.flat();
        } else if cfg.patience.is_some_and(|p| epoch - history.best_epoch >= p) {
            history.stopped_early = true;
            break;
        }
    }

    let bundle = ModelBundle::new(arch.clone(), best_weights, stats)?;
    Ok((bundle, history))
}

fn stack(inputs: &[Vec<f32>], idx: &[usize], arch: &ArchSpec) -> Result<Tensor4<f32>, AnomalyError> {
    let mut data = Vec::with_capacity(idx.len() * arch.input_shape().len());
    for &i in idx {
        data.extend_from_slice(&inputs[i]);
    }
    Ok(Tensor4::from_vec(data, idx.len(), arch.input_shape())?)
}

fn mean_mse(net: &Network<f32>, inputs: &[Vec<f32>], idx: &[usize], arch: &ArchSpec) -> Result<f64, AnomalyError> {
    let mut total = 0.0;
    for chunk in idx.chunks(256) {
        let x = stack(inputs, chunk, arch)?;
        let y = net.forward(&x)?;
        total += y
            .data()
            .iter()
            .zip(x.data())
            .map(|(&p, &t)| {
                let d = f64::from(p) - f64::from(t);
                d * d
            })
            .sum::<f64>();
    }
    Ok(total / (idx.len() * arch.input_shape().len()) as f64)
}
