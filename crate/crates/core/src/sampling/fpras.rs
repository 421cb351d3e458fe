//! Permutation sampler.
//!
//! A run walks `⌈m / n⌉` random permutations, `m = ⌈n(n-1)/(δε²)⌉`, so every
//! agent gets the same number of samples and the last permutation is always
//! finished. An agent with no neighbour among its predecessors contributes
//! its solo value, which is known in advance; the shortcut only skips the
//! path search, the number added is the same bit for bit.
//!
//! Each permutation keeps an optimal allocation of its prefix and extends it
//! agent by agent, so a contribution costs `k` alternating-path searches
//! rather than a fresh matching.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_unit_interval, job_rng, median};
use crate::error::{Error, Result};
use crate::matching::DynamicMatching;
use crate::model::{AgentRecord, AllocationGame, Coalition, Method, ReportMeta, ShapleyReport};
use crate::parallel::{ranges, run_jobs};
use crate::scalar::{Accumulator, Scalar, Summation};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FprasConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub runs: usize,
    pub seed: u64,
    pub workers: usize,
    /// Skip the path search for agents with no neighbour in their prefix.
    pub shortcut: bool,
    /// Permutations per job.
    pub batch: u64,
    pub summation: Summation,
    /// Scale the medians so they add up to `opt(N)`.
    pub scale: bool,
}

impl Default for FprasConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.3,
            delta: 0.01,
            runs: 3,
            seed: 0,
            workers: 1,
            shortcut: true,
            batch: 64,
            summation: Summation::Plain,
            scale: true,
        }
    }
}

/// Marginal contributions per run: `⌈n(n-1)/(δε²)⌉`.
pub fn fpras_sample_size(n: usize, epsilon: f64, delta: f64) -> u64 {
    let n = n as f64;
    (n * (n - 1.0) / (delta * epsilon * epsilon)).ceil() as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct FprasResult<T> {
    pub values: Vec<T>,
    /// Per-run averages before the median and scaling.
    pub runs: Vec<Vec<T>>,
    pub permutations_per_run: u64,
    /// Contributions over all runs.
    pub contributions: u64,
    pub shortcut_hits: u64,
    /// `opt(N) / Σ medians`, when scaling was applied.
    pub scale_factor: Option<T>,
}

impl<T> FprasResult<T> {
    pub fn shortcut_fraction(&self) -> f64 {
        if self.contributions == 0 {
            0.0
        } else {
            self.shortcut_hits as f64 / self.contributions as f64
        }
    }
}

fn validate(cfg: &FprasConfig) -> Result<()> {
    check_unit_interval("epsilon", cfg.epsilon)?;
    check_unit_interval("delta", cfg.delta)?;
    if cfg.runs == 0 {
        return Err(Error::InvalidParameter("at least one run is needed".into()));
    }
    Ok(())
}

pub fn fpras_shapley<T: Scalar>(
    game: &AllocationGame<T>,
    cfg: &FprasConfig,
) -> Result<FprasResult<T>> {
    validate(cfg)?;
    let n = game.n_agents();
    if n <= 1 {
        return Ok(FprasResult {
            values: (0..n).map(|i| game.singleton_value(i)).collect(),
            runs: Vec::new(),
            permutations_per_run: 0,
            contributions: 0,
            shortcut_hits: 0,
            scale_factor: None,
        });
    }
    let m = fpras_sample_size(n, cfg.epsilon, cfg.delta);
    let perms = m.div_ceil(n as u64);
    let batches: Vec<_> = ranges(perms, cfg.batch).collect();
    let jobs: Vec<(usize, usize)> = (0..cfg.runs)
        .flat_map(|r| (0..batches.len()).map(move |b| (r, b)))
        .collect();

    let partials = run_jobs(cfg.workers, jobs.len(), |j| {
        let (run, b) = jobs[j];
        let mut rng = job_rng(cfg.seed, (run as u64) << 32 | b as u64);
        let mut sums = vec![Accumulator::new(cfg.summation); n];
        let mut hits = 0u64;
        let mut order: Vec<usize> = (0..n).collect();
        // the prefix's optimal allocation, extended one agent at a time
        let mut dm = DynamicMatching::new(game.scenario());
        for _ in batches[b].clone() {
            order.shuffle(&mut rng);
            let mut prefix = Coalition::empty(n);
            dm.clear();
            for &a in &order {
                if cfg.shortcut && game.is_disconnected_from(a, &prefix) {
                    hits += 1;
                    dm.add_isolated(a);
                    sums[a].add(game.singleton_value(a));
                } else {
                    sums[a].add(dm.add_agent(a));
                }
                prefix.insert(a);
            }
        }
        (
            sums.iter().map(Accumulator::value).collect::<Vec<T>>(),
            hits,
        )
    });

    let per_run = T::of_usize(perms as usize);
    let mut runs = vec![vec![Accumulator::new(cfg.summation); n]; cfg.runs];
    let mut shortcut_hits = 0;
    for ((run, _), (sums, hits)) in jobs.iter().zip(partials) {
        for (acc, s) in runs[*run].iter_mut().zip(sums) {
            acc.add(s);
        }
        shortcut_hits += hits;
    }
    let runs: Vec<Vec<T>> = runs
        .iter()
        .map(|r| r.iter().map(|a| a.value() / per_run).collect())
        .collect();

    let mut values: Vec<T> = (0..n)
        .map(|i| {
            let mut column: Vec<T> = runs.iter().map(|r| r[i]).collect();
            median(&mut column)
        })
        .collect();
    let mut scale_factor = None;
    if cfg.scale {
        let total = values.iter().fold(T::zero(), |a, &v| a + v);
        if total > T::zero() {
            let factor = game.grand_value() / total;
            for v in &mut values {
                *v *= factor;
            }
            scale_factor = Some(factor);
        }
    }
    Ok(FprasResult {
        values,
        runs,
        permutations_per_run: perms,
        contributions: perms * n as u64 * cfg.runs as u64,
        shortcut_hits,
        scale_factor,
    })
}

pub fn fpras_report<T: Scalar>(
    game: &AllocationGame<T>,
    cfg: &FprasConfig,
) -> Result<ShapleyReport> {
    let start = Instant::now();
    let before = game.matchings();
    let result = fpras_shapley(game, cfg)?;
    let mut meta = ReportMeta::new("fpras");
    meta.seed = Some(cfg.seed);
    meta.epsilon = Some(cfg.epsilon);
    meta.delta = Some(cfg.delta);
    meta.grand_value = Some(game.grand_value().as_f64());
    meta.matchings = game.matchings() - before;
    meta.contributions = Some(result.contributions);
    meta.shortcut_hits = Some(result.shortcut_hits);
    meta.wall_time_secs = start.elapsed().as_secs_f64();
    meta.extra.insert("runs".into(), cfg.runs.into());
    meta.extra.insert(
        "permutations_per_run".into(),
        result.permutations_per_run.into(),
    );
    meta.extra.insert(
        "m".into(),
        fpras_sample_size(game.n_agents(), cfg.epsilon, cfg.delta).into(),
    );
    if let Some(f) = result.scale_factor {
        meta.extra.insert("scale_factor".into(), f.as_f64().into());
    }
    let samples = result.permutations_per_run * cfg.runs as u64;
    let records = result
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            AgentRecord::estimate(
                game.scenario().agent_id(i),
                Method::Fpras,
                v.as_f64(),
                cfg.epsilon,
                cfg.delta,
                samples,
            )
        })
        .collect();
    Ok(ShapleyReport::new(meta, records))
}
