use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_candidate, Candidate, Constraints, ExploreError, PerfFnConfig, SearchData, SearchPoint, SearchSpace};
use crate::anomaly::TrainConfig;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Strategy {
    /// `n` distinct uniform draws (all points if the space is smaller).
    Random { n: usize },
    Evolutionary { population: usize, generations: usize },
}

impl Strategy {
    pub fn evolutionary_default() -> Self {
        Strategy::Evolutionary {
            population: 8,
            generations: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub strategy: Strategy,
    /// Drives point sampling, selection and mutation.
    pub seed: u64,
    /// Candidate evaluations run in parallel on this many threads.
    pub workers: usize,
    /// Training budget per candidate.
    pub budget: TrainConfig,
}

/// Candidates first evaluated in one generation, plus the running best.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub candidates: Vec<Candidate>,
    /// Grid index and score of the best feasible candidate seen so far.
    pub best_feasible: Option<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchLog {
    pub rng_seed: u64,
    pub strategy: Strategy,
    pub generations: Vec<GenerationRecord>,
}

#[derive(Serialize)]
struct LogLine<'a> {
    generation: usize,
    candidate: &'a Candidate,
    best_feasible: Option<(usize, f64)>,
}

impl SearchLog {
    pub fn candidates(&self) -> impl Iterator<Item = &Candidate> {
        self.generations.iter().flat_map(|g| g.candidates.iter())
    }

    /// One JSON object per evaluated candidate, in evaluation order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for g in &self.generations {
            for c in &g.candidates {
                let line = LogLine {
                    generation: g.generation,
                    candidate: c,
                    best_feasible: g.best_feasible,
                };
                out.push_str(&serde_json::to_string(&line).expect("log serialises"));
                out.push('\n');
            }
        }
        out
    }
}

/// Descending preference: feasible before infeasible, then higher score,
/// then lower grid index.
fn preference(a: &Candidate, b: &Candidate) -> Ordering {
    let score = |c: &Candidate| c.u_score.unwrap_or(f64::NEG_INFINITY);
    b.feasible
        .cmp(&a.feasible)
        .then_with(|| score(b).total_cmp(&score(a)))
        .then_with(|| a.point.index.cmp(&b.point.index))
}

fn best_feasible<'a>(cands: impl Iterator<Item = &'a Candidate>) -> Option<&'a Candidate> {
    cands.filter(|c| c.feasible).min_by(|a, b| preference(a, b))
}

struct Evaluator<'a> {
    data: &'a SearchData,
    budget: &'a TrainConfig,
    constraints: &'a Constraints,
    perf: &'a PerfFnConfig,
    pool: rayon::ThreadPool,
}

impl Evaluator<'_> {
    fn run(&self, points: &[SearchPoint]) -> Result<Vec<Candidate>, ExploreError> {
        self.pool.install(|| {
            points
                .par_iter()
                .map(|p| evaluate_candidate(p, self.data, self.budget, self.constraints, self.perf))
                .collect()
        })
    }
}

/// Maximises the performance function over feasible candidates.
pub fn search(
    space: &SearchSpace,
    constraints: &Constraints,
    perf: &PerfFnConfig,
    data: &SearchData,
    opts: &SearchOptions,
) -> Result<(Candidate, SearchLog), ExploreError> {
    space.validate()?;
    if opts.workers == 0 {
        return Err(ExploreError::Pool("workers must be positive".into()));
    }
    let eval = Evaluator {
        data,
        budget: &opts.budget,
        constraints,
        perf,
        pool: rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| ExploreError::Pool(e.to_string()))?,
    };
    let mut rng = seed::rng(opts.seed, "search");
    let mut log = SearchLog {
        rng_seed: opts.seed,
        strategy: opts.strategy,
        generations: Vec::new(),
    };

    match opts.strategy {
        Strategy::Random { n } => {
            if n == 0 {
                return Err(ExploreError::InvalidSpace("random search needs n > 0".into()));
            }
            let n = n.min(space.len());
            let points: Vec<SearchPoint> = index::sample(&mut rng, space.len(), n)
                .into_iter()
                .map(|i| space.point(i))
                .collect();
            let candidates = eval.run(&points)?;
            push_generation(&mut log, 0, candidates);
        }
        Strategy::Evolutionary {
            population,
            generations,
        } => {
            if population == 0 || generations == 0 {
                return Err(ExploreError::InvalidSpace(
                    "population and generations must be positive".into(),
                ));
            }
            evolve(space, &eval, population, generations, &mut rng, &mut log)?;
        }
    }

    let evaluated = log.candidates().count();
    match best_feasible(log.candidates()) {
        Some(best) => Ok((best.clone(), log)),
        None => {
            let best_infeasible = log.candidates().min_by(|a, b| preference(a, b)).cloned().map(Box::new);
            Err(ExploreError::NoFeasible {
                evaluated,
                best_infeasible,
            })
        }
    }
}

fn push_generation(log: &mut SearchLog, generation: usize, candidates: Vec<Candidate>) {
    let previous = log.generations.last().and_then(|g| g.best_feasible);
    let here = best_feasible(candidates.iter()).and_then(|c| c.u_score.map(|u| (c.point.index, u)));
    let best_feasible = match (previous, here) {
        (Some(p), Some(h)) if h.1 > p.1 => Some(h),
        (Some(p), _) => Some(p),
        (None, h) => h,
    };
    log.generations.push(GenerationRecord {
        generation,
        candidates,
        best_feasible,
    });
}

fn tournament<'a>(population: &'a [Candidate], rng: &mut ChaCha8Rng) -> &'a Candidate {
    let feasible: Vec<&Candidate> = population.iter().filter(|c| c.feasible).collect();
    if feasible.is_empty() {
        return population.choose(rng).expect("population is non-empty");
    }
    let a = feasible[rng.random_range(0..feasible.len())];
    let b = feasible[rng.random_range(0..feasible.len())];
    if preference(a, b) == Ordering::Greater {
        b
    } else {
        a
    }
}

fn evolve(
    space: &SearchSpace,
    eval: &Evaluator<'_>,
    population: usize,
    generations: usize,
    rng: &mut ChaCha8Rng,
    log: &mut SearchLog,
) -> Result<(), ExploreError> {
    let first = population.min(space.len());
    let initial: Vec<SearchPoint> = index::sample(rng, space.len(), first)
        .into_iter()
        .map(|i| space.point(i))
        .collect();
    let mut seen: BTreeSet<usize> = initial.iter().map(|p| p.index).collect();
    let mut current = eval.run(&initial)?;
    push_generation(log, 0, current.clone());

    for generation in 1..generations {
        let mut children = Vec::new();
        for _ in 0..population {
            let parent = tournament(&current, rng);
            let mut moves = space.neighbours(&parent.point);
            moves.shuffle(rng);
            if let Some(child) = moves.into_iter().find(|p| !seen.contains(&p.index)) {
                seen.insert(child.index);
                children.push(child);
            }
        }
        if children.is_empty() {
            log::info!("search converged after {generation} generations: no unseen neighbours");
            break;
        }
        let evaluated = eval.run(&children)?;
        push_generation(log, generation, evaluated.clone());
        current.extend(evaluated);
        current.sort_by(preference);
        current.truncate(population);
    }
    Ok(())
}
