use super::AnomalyError;
use crate::audio_io::Label;

/// Area under the ROC curve with anomalous as the positive class.
///
/// Computed as the Mann-Whitney statistic from average ranks, so a tie
/// between an anomalous and a normal score counts one half. Ties are exact
/// float equality.
pub fn compute_auc(scores: &[(f64, Label)]) -> Result<f64, AnomalyError> {
    let first = scores.first().ok_or(AnomalyError::Empty)?.1;
    if let Some(&(s, _)) = scores.iter().find(|(s, _)| !s.is_finite()) {
        return Err(AnomalyError::NonFiniteScore(s));
    }
    let n_a = scores.iter().filter(|(_, l)| *l == Label::Anomalous).count();
    let n_n = scores.len() - n_a;
    if n_a == 0 || n_n == 0 {
        return Err(AnomalyError::SingleClass(first));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].0.total_cmp(&scores[j].0));

    // Ranks start at 1; a tie group spanning ranks lo..=hi gets (lo+hi)/2.
    // Doubled ranks keep everything integral.
    let mut twice_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]].0 == scores[order[start]].0 {
            end += 1;
        }
        let twice_avg = (start + 1 + end) as u128;
        let anomalous = order[start..end]
            .iter()
            .filter(|&&i| scores[i].1 == Label::Anomalous)
            .count() as u128;
        twice_rank_sum += twice_avg * anomalous;
        start = end;
    }
    let na = n_a as u128;
    let twice_u = twice_rank_sum - na * (na + 1);
    Ok(twice_u as f64 / 2.0 / (n_a as f64 * n_n as f64))
}
