use anyhow::{bail, Result};
use outliernet::anomaly::{evaluate, train, Aggregation, TrainConfig};
use outliernet::arch::{save_bundle, EfficiencyReport};
use outliernet::audio_io::{AudioClip, Label};
use outliernet::explore::{self, Constraints, PerfFnConfig, SearchData, SearchOptions, SearchSpace, Strategy};
use outliernet::seed;
use rand::seq::SliceRandom;

use super::{crops_of, feature_config, write_output, write_report};
use crate::args::{SearchArgs, StrategyArg};
use crate::data::load_data;
use crate::manifest::Run;

/// Anomalous clips for search validation, and the remaining test set.
type HeldOut = (Vec<AudioClip>, Vec<(AudioClip, Label)>);

/// Splits the test anomalies into a search-validation share and the rest.
/// Normal test clips always stay in the final evaluation set.
fn hold_out_anomalies(
    test: Vec<(AudioClip, Label)>,
    fraction: f64,
    seed: u64,
) -> Result<HeldOut> {
    let anomalous: Vec<usize> = (0..test.len()).filter(|&i| test[i].1 == Label::Anomalous).collect();
    if anomalous.len() < 2 {
        bail!(
            "search needs at least two anomalous clips to split between validation and test, found {}",
            anomalous.len()
        );
    }
    let mut order = anomalous.clone();
    order.shuffle(&mut seed::rng(seed, "search-val-anomalous"));
    let n_val = ((anomalous.len() as f64 * fraction).round() as usize).clamp(1, anomalous.len() - 1);
    let mut held = vec![false; test.len()];
    for &i in &order[..n_val] {
        held[i] = true;
    }
    let (mut val, mut rest) = (Vec::new(), Vec::new());
    for (i, item) in test.into_iter().enumerate() {
        if held[i] {
            val.push(item.0);
        } else {
            rest.push(item);
        }
    }
    Ok((val, rest))
}

pub fn search(a: &SearchArgs, run: &mut Run) -> Result<()> {
    let space = SearchSpace::new(a.family, a.widths.clone(), a.depths.clone(), a.bottlenecks.clone())?;
    let constraints = match (a.baseline_auc, a.auc_floor) {
        (baseline, Some(floor)) => Constraints::with_floor(a.max_params, baseline.unwrap_or(floor), floor)?,
        (Some(baseline), None) => Constraints::from_baseline(a.max_params, baseline, a.floor_mode.into())?,
        (None, None) => bail!("give --baseline-auc or --auc-floor"),
    };
    let strategy = match a.strategy {
        StrategyArg::Random => Strategy::Random { n: a.n },
        StrategyArg::Evolutionary => Strategy::Evolutionary {
            population: a.population,
            generations: a.generations,
        },
    };
    let budget = TrainConfig {
        epochs_max: a.proxy_epochs,
        lr: a.proxy_lr,
        batch_size: a.train.batch_size,
        patience: None,
        seed: run.seed_for("search-train"),
        ..TrainConfig::default()
    };
    budget.validate()?;
    let final_cfg = a.train.config(run.seed_for("train"));
    final_cfg.validate()?;
    if !(a.val_anomalous_fraction > 0.0 && a.val_anomalous_fraction < 1.0) {
        bail!("--val-anomalous-fraction must lie in (0, 1), got {}", a.val_anomalous_fraction);
    }
    let perf = PerfFnConfig::default();
    let opts = SearchOptions {
        strategy,
        seed: run.seed_for("search"),
        workers: run.workers,
        budget,
    };
    run.resolve("space", &space);
    run.resolve("constraints", &constraints);
    run.resolve("perf", &perf);
    run.resolve("search", &opts);
    run.resolve("train", &final_cfg);
    let features = feature_config(run);

    let data = load_data(&a.data, run, features.sample_rate)?;
    let (val_anomalous, test) =
        hold_out_anomalies(data.test, a.val_anomalous_fraction, run.seed_for("search-val-anomalous"))?;
    let search_data = SearchData::from_clips(
        &data.train,
        &val_anomalous,
        a.search_val_fraction,
        &features,
        run.seed_for("search-val"),
    )?;

    let (best, log) = explore::search(&space, &constraints, &perf, &search_data, &opts)?;
    write_output(run, &a.out.join("search_log.jsonl"), log.to_jsonl().as_bytes())?;
    log::info!(
        "search picked {} (params {}, val auc {:?}, score {:?}) from {} candidates",
        best.arch.name(),
        best.params,
        best.auc,
        best.u_score,
        log.candidates().count()
    );
    run.resolve("winner", &best);

    // The winner is retrained on every training normal with the full budget.
    let crops = crops_of(&data.train, &features)?;
    let bundle = train(&best.arch, &crops, &final_cfg)?;
    let model = a.out.join("best.olnt");
    save_bundle(&bundle, &model)?;
    run.output(&model);
    let eff = EfficiencyReport::for_bundle(&bundle);
    let csv = format!("{}\n{}\n", EfficiencyReport::CSV_HEADER, eff.csv_row());
    write_output(run, &a.out.join("best.csv"), csv.as_bytes())?;

    let mut report = evaluate(&bundle, &test, &features, Aggregation::Max)?;
    report.machine_tag = data.tag;
    write_report(run, &a.out, &report, false)
}
