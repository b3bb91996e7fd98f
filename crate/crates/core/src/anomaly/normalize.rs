use super::AnomalyError;
use crate::arch::NormStats;
use crate::features::CropWindow;

/// Global min and max over every value of the given crops.
pub fn norm_stats(crops: &[CropWindow]) -> Result<NormStats, AnomalyError> {
    let (min, max) = crops
        .iter()
        .flat_map(|c| c.values.iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !(min < max) {
        return Err(AnomalyError::DegenerateStats { min, max });
    }
    Ok(NormStats { min, max })
}

fn check(stats: NormStats) -> Result<(), AnomalyError> {
    if !(stats.min < stats.max) {
        return Err(AnomalyError::DegenerateStats {
            min: stats.min,
            max: stats.max,
        });
    }
    Ok(())
}

/// Maps `v` to `(v - min) / (max - min)`, clamped to `[0, 1]`.
pub fn normalize(crops: &[CropWindow], stats: NormStats) -> Result<Vec<CropWindow>, AnomalyError> {
    check(stats)?;
    let span = stats.max - stats.min;
    Ok(crops
        .iter()
        .map(|c| CropWindow {
            values: c
                .values
                .iter()
                .map(|&v| ((v - stats.min) / span).clamp(0.0, 1.0))
                .collect(),
            ..c.clone()
        })
        .collect())
}

/// Inverse of [`normalize`] for values that were inside the training range.
pub fn denormalize(crops: &[CropWindow], stats: NormStats) -> Result<Vec<CropWindow>, AnomalyError> {
    check(stats)?;
    let span = stats.max - stats.min;
    Ok(crops
        .iter()
        .map(|c| CropWindow {
            values: c.values.iter().map(|&v| v * span + stats.min).collect(),
            ..c.clone()
        })
        .collect())
}

/// Normalised crop values as the `f32` network input.
pub(crate) fn to_input(values: &[f64], stats: NormStats, out: &mut Vec<f32>) {
    let span = stats.max - stats.min;
    out.extend(
        values
            .iter()
            .map(|&v| ((v - stats.min) / span).clamp(0.0, 1.0) as f32),
    );
}
