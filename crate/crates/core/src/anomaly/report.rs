//! Flat-file views of an [`EvalReport`].

use std::io::Write;

use super::{AnomalyError, EvalReport};

pub const SUMMARY_CSV_HEADER: &str = "machine,auc,n_normal,n_anomalous,params,bytes,flops";

fn io(path: &str) -> impl Fn(std::io::Error) -> AnomalyError + '_ {
    move |source| AnomalyError::Io {
        path: path.to_string(),
        source,
    }
}

/// `clip_id,clip_score,label`, one row per clip in input order.
pub fn write_scores_csv(report: &EvalReport, mut out: impl Write, path: &str) -> Result<(), AnomalyError> {
    writeln!(out, "clip_id,clip_score,label").map_err(io(path))?;
    for s in &report.scores {
        let label = s.label.map(|l| l.as_str()).unwrap_or("");
        writeln!(out, "{},{:?},{}", s.clip_id, s.clip_score, label).map_err(io(path))?;
    }
    Ok(())
}

pub fn write_summary_csv(report: &EvalReport, mut out: impl Write, path: &str) -> Result<(), AnomalyError> {
    let machine = report
        .machine_tag
        .as_ref()
        .map(|t| format!("{}_{}_{}", t.machine_type, t.machine_id, t.snr))
        .unwrap_or_else(|| "synthetic".to_string());
    let e = &report.efficiency;
    writeln!(out, "{SUMMARY_CSV_HEADER}").map_err(io(path))?;
    writeln!(
        out,
        "{machine},{:?},{},{},{},{},{}",
        report.auc, report.n_normal, report.n_anomalous, e.param_count, e.model_bytes, e.flops
    )
    .map_err(io(path))
}

/// One JSON object per clip, including per-crop errors.
pub fn write_scores_jsonl(report: &EvalReport, mut out: impl Write, path: &str) -> Result<(), AnomalyError> {
    for s in &report.scores {
        let line = serde_json::to_string(s).expect("scores serialise");
        writeln!(out, "{line}").map_err(io(path))?;
    }
    Ok(())
}
