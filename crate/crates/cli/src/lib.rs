//! Command-line pipelines over the `outliernet` library.
//!
//! Each subcommand writes its artifacts and a [`RunManifest`] beside them.
//! All randomness derives from the single `--seed` through named purposes
//! (`seed::derive(seed, purpose)`), and the sub-seeds used are recorded.

pub mod args;
mod commands;
pub mod data;
pub mod manifest;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};

pub use args::{Cli, Command};
pub use manifest::{RunManifest, write_atomic};

fn resolve_workers(requested: Option<usize>) -> Result<usize> {
    match requested {
        Some(0) => bail!("--workers must be positive"),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs a parsed invocation. Returns once every artifact and its manifest
/// is on disk.
pub fn run(cli: Cli) -> Result<()> {
    let workers = resolve_workers(cli.workers)?;
    if rayon::ThreadPoolBuilder::new().num_threads(workers).build_global().is_err() {
        log::debug!("global thread pool already initialised");
    }
    match cli.command {
        Command::Replay(r) => {
            let manifest = RunManifest::load(&r.manifest)?;
            let mut command = manifest.command;
            if let Some(out) = r.out {
                command.set_out(out);
            }
            execute(command, manifest.seed, workers).map(|_| ())
        }
        command => execute(command, cli.seed, workers).map(|_| ()),
    }
}

/// Runs one command and writes its manifest; returns the manifest path.
pub fn execute(command: Command, seed: u64, workers: usize) -> Result<PathBuf> {
    let started = manifest::now();
    let mut run = manifest::Run::new(seed, workers);
    let name = command.name();
    match &command {
        Command::Synth(a) => commands::synth(a, &mut run),
        Command::Features(a) => commands::features(a, &mut run),
        Command::Train(a) => commands::train(a, &mut run),
        Command::Score(a) => commands::score(a, &mut run),
        Command::Eval(a) => commands::eval(a, &mut run),
        Command::Search(a) => commands::search(a, &mut run),
        Command::Bench(a) => commands::bench(a, &mut run),
        Command::Export(a) => commands::export(a, &mut run),
        Command::Replay(_) => bail!("a manifest cannot record a replay"),
    }
    .with_context(|| format!("{name} failed"))?;
    let path = command.manifest_path().expect("non-replay commands have an output");
    run.finish(command, started).save(&path)?;
    Ok(path)
}
