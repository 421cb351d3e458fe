//! Per-agent coalition sampler with Hoeffding sample sizes.
//!
//! Every marginal contribution of agent `i` lies in
//! `[marg({i}, N), opt({i})]`, an interval of width `r_i`. Averaging
//! `m_i = ⌈ln(2/δ_i) r_i² / (2ε_i²)⌉` independent draws of `marg({i}, S)`
//! with `S` drawn from the Shapley law (size uniform in `0..n`, then a
//! uniform subset of that size of `N \ {i}`) is within `ε_i` of `sv_i` with
//! probability at least `1 - δ_i`. The failure budget is split evenly,
//! `δ_i = δ / n`.

use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_unit_interval, job_rng};
use crate::error::{Error, Result};
use crate::matching::DynamicMatching;
use crate::model::{AgentRecord, AllocationGame, Coalition, Method, ReportMeta, ShapleyReport};
use crate::parallel::{ranges, run_jobs};
use crate::scalar::{Accumulator, Scalar, Summation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RangeMode {
    /// `ε_i = ε`.
    #[default]
    #[serde(rename = "abs")]
    Absolute,
    /// `ε_i = ε · ℓ_i` for a lower bound `ℓ_i > 0` on `sv_i`.
    #[serde(rename = "rel")]
    Relative,
}

impl std::str::FromStr for RangeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abs" | "absolute" => Ok(RangeMode::Absolute),
            "rel" | "relative" => Ok(RangeMode::Relative),
            other => Err(Error::InvalidParameter(format!(
                "mode must be abs or rel, not `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RangeSamplerConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub mode: RangeMode,
    /// Lower bounds `ℓ_i` for relative mode, indexed like the game's agents.
    /// Defaults to `marg({i}, N)`.
    pub lower_bounds: Option<Vec<f64>>,
    /// Samples per job.
    pub batch: u64,
    pub seed: u64,
    pub workers: usize,
    pub summation: Summation,
}

impl Default for RangeSamplerConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            delta: 0.01,
            mode: RangeMode::Absolute,
            lower_bounds: None,
            batch: 1000,
            seed: 0,
            workers: 1,
            summation: Summation::Plain,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRange<T> {
    pub agent: usize,
    pub solo: T,
    pub grand_marginal: T,
    /// `max(solo - grand_marginal, 0)`.
    pub range: T,
}

pub fn compute_ranges<T: Scalar>(game: &AllocationGame<T>) -> Vec<AgentRange<T>> {
    (0..game.n_agents())
        .map(|i| {
            let solo = game.singleton_value(i);
            let grand_marginal = game.grand_marginal(i);
            let range = (solo - grand_marginal).max(T::zero());
            AgentRange {
                agent: i,
                solo,
                grand_marginal,
                range,
            }
        })
        .collect()
}

/// `⌈ln(2/δ_i) · r² / (2ε_i²)⌉`, and 0 for `r = 0`.
pub fn sample_bound(range: f64, epsilon_i: f64, delta_i: f64) -> u64 {
    if range <= 0.0 {
        return 0;
    }
    ((2.0 / delta_i).ln() * range * range / (2.0 * epsilon_i * epsilon_i)).ceil() as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeSamplerResult<T> {
    pub values: Vec<T>,
    pub samples: Vec<u64>,
    /// `ε_i` per agent (0 where no sampling was needed).
    pub epsilons: Vec<f64>,
    pub delta_i: f64,
    pub ranges: Vec<AgentRange<T>>,
}

impl<T> RangeSamplerResult<T> {
    pub fn total_samples(&self) -> u64 {
        self.samples.iter().sum()
    }
}

/// Per-agent `(ε_i, m_i)` for a configuration, without sampling.
pub fn plan<T: Scalar>(
    game: &AllocationGame<T>,
    ranges: &[AgentRange<T>],
    cfg: &RangeSamplerConfig,
) -> Result<Vec<(f64, u64)>> {
    let n = game.n_agents();
    check_unit_interval("delta", cfg.delta)?;
    match cfg.mode {
        RangeMode::Absolute if !(cfg.epsilon > 0.0 && cfg.epsilon.is_finite()) => {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                cfg.epsilon
            )))
        }
        RangeMode::Relative => check_unit_interval("epsilon", cfg.epsilon)?,
        _ => {}
    }
    if let Some(lb) = &cfg.lower_bounds {
        if lb.len() != n {
            return Err(Error::InvalidParameter(format!(
                "{} lower bounds for {n} agents",
                lb.len()
            )));
        }
    }
    let delta_i = cfg.delta / n.max(1) as f64;
    ranges
        .iter()
        .map(|r| {
            let range = r.range.as_f64();
            if range <= 0.0 {
                return Ok((0.0, 0));
            }
            let eps = match cfg.mode {
                RangeMode::Absolute => cfg.epsilon,
                RangeMode::Relative => {
                    let lower = match &cfg.lower_bounds {
                        Some(lb) => lb[r.agent],
                        None => r.grand_marginal.as_f64(),
                    };
                    if lower.is_nan() || lower <= 0.0 {
                        return Err(Error::NonPositiveLowerBound {
                            agent: game.scenario().agent_id(r.agent).to_owned(),
                            lower,
                        });
                    }
                    cfg.epsilon * lower
                }
            };
            Ok((eps, sample_bound(range, eps, delta_i)))
        })
        .collect()
}

/// Draws a coalition of `N \ {i}` from the Shapley law.
pub fn draw_coalition<R: Rng>(rng: &mut R, n: usize, i: usize) -> Coalition {
    let size = rng.gen_range(0..n);
    let mut c = Coalition::empty(n);
    for x in index::sample(rng, n - 1, size).iter() {
        c.insert(if x >= i { x + 1 } else { x });
    }
    c
}

pub fn range_sampler_shapley<T: Scalar>(
    game: &AllocationGame<T>,
    cfg: &RangeSamplerConfig,
) -> Result<RangeSamplerResult<T>> {
    let n = game.n_agents();
    let agent_ranges = compute_ranges(game);
    let planned = plan(game, &agent_ranges, cfg)?;
    let jobs: Vec<(usize, std::ops::Range<u64>)> = planned
        .iter()
        .enumerate()
        .flat_map(|(i, &(_, m))| ranges(m, cfg.batch).map(move |r| (i, r)))
        .collect();

    let partials = run_jobs(cfg.workers, jobs.len(), |j| {
        let (i, ref batch) = jobs[j];
        let mut rng = job_rng(cfg.seed, j as u64);
        let mut acc = Accumulator::new(cfg.summation);
        let mut dm = DynamicMatching::new(game.scenario());
        for _ in batch.clone() {
            let c = draw_coalition(&mut rng, n, i);
            acc.add(game.marginal_incremental(i, &c, &mut dm));
        }
        acc.value()
    });

    let mut sums = vec![Accumulator::new(cfg.summation); n];
    for ((i, _), part) in jobs.iter().zip(partials) {
        sums[*i].add(part);
    }
    let values = (0..n)
        .map(|i| {
            let m = planned[i].1;
            if m == 0 {
                agent_ranges[i].solo
            } else {
                sums[i].value() / T::of(m as f64)
            }
        })
        .collect();
    Ok(RangeSamplerResult {
        values,
        samples: planned.iter().map(|p| p.1).collect(),
        epsilons: planned.iter().map(|p| p.0).collect(),
        delta_i: cfg.delta / n.max(1) as f64,
        ranges: agent_ranges,
    })
}

pub fn range_sampler_report<T: Scalar>(
    game: &AllocationGame<T>,
    cfg: &RangeSamplerConfig,
) -> Result<ShapleyReport> {
    let start = Instant::now();
    let before = game.matchings();
    let result = range_sampler_shapley(game, cfg)?;
    let mut meta = ReportMeta::new("range-sample");
    meta.seed = Some(cfg.seed);
    meta.epsilon = Some(cfg.epsilon);
    meta.delta = Some(cfg.delta);
    meta.grand_value = Some(game.grand_value().as_f64());
    meta.matchings = game.matchings() - before;
    meta.contributions = Some(result.total_samples());
    meta.wall_time_secs = start.elapsed().as_secs_f64();
    meta.extra.insert(
        "mode".into(),
        serde_json::to_value(cfg.mode).expect("mode serializes"),
    );
    meta.extra.insert("delta_i".into(), result.delta_i.into());
    let records = result
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            AgentRecord::estimate(
                game.scenario().agent_id(i),
                Method::RangeSampler,
                v.as_f64(),
                result.epsilons[i],
                result.delta_i,
                result.samples[i],
            )
        })
        .collect();
    Ok(ShapleyReport::new(meta, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{exact_shapley, ExactConfig};
    use crate::fixtures::{random_scenario, running_example};
    use crate::model::AllocationScenario;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type S = AllocationScenario<f64>;

    #[test]
    fn sample_bound_examples() {
        // ln(200) / 0.02 = 264.9..
        assert_eq!(sample_bound(1.0, 0.1, 0.01), 265);
        // the same budget split over three agents
        assert_eq!(sample_bound(1.0, 0.1, 0.01 / 3.0), 320);
        assert_eq!(sample_bound(0.0, 0.1, 0.01), 0);
        assert_eq!(sample_bound(2.0, 0.1, 0.01), 1060);
    }

    #[test]
    fn running_example_ranges() {
        let game = AllocationGame::new(running_example());
        let r = compute_ranges(&game);
        assert_eq!(
            (r[0].solo, r[0].grand_marginal, r[0].range),
            (3.0, 2.0, 1.0)
        );
        assert_eq!(
            (r[2].solo, r[2].grand_marginal, r[2].range),
            (1.0, 1.0, 0.0)
        );
    }

    #[test]
    fn disconnected_agent_has_zero_range() {
        let s = S::from_ids(
            1,
            &[("g", 1.0), ("h", 2.0)],
            &[("a", &["g"]), ("b", &["h"])],
        )
        .unwrap();
        let game = AllocationGame::new(s);
        assert!(compute_ranges(&game).iter().all(|r| r.range == 0.0));
    }

    #[test]
    fn running_example_sample_sizes() {
        let game = AllocationGame::new(running_example());
        let res = range_sampler_shapley(
            &game,
            &RangeSamplerConfig {
                epsilon: 0.1,
                ..RangeSamplerConfig::default()
            },
        )
        .unwrap();
        assert_eq!(res.samples, vec![320, 320, 0]);
        assert_eq!(res.values[2], 1.0);
        for (v, e) in res.values.iter().zip([2.5, 2.5, 1.0]) {
            assert!((v - e).abs() < 0.1);
        }
    }

    #[test]
    fn relative_mode_needs_positive_lower_bounds() {
        let game = AllocationGame::new(running_example());
        let cfg = RangeSamplerConfig {
            mode: RangeMode::Relative,
            lower_bounds: Some(vec![0.0, 1.0, 1.0]),
            ..RangeSamplerConfig::default()
        };
        let err = range_sampler_shapley(&game, &cfg).unwrap_err();
        assert!(matches!(err, Error::NonPositiveLowerBound { ref agent, .. } if agent == "a1"));
        assert!(err.to_string().contains("bounds"));
        // marg({i}, N) is the default lower bound and positive here
        let cfg = RangeSamplerConfig {
            mode: RangeMode::Relative,
            ..RangeSamplerConfig::default()
        };
        let res = range_sampler_shapley(&game, &cfg).unwrap();
        assert_eq!(res.epsilons[0], 0.1 * 2.0);
    }

    #[test]
    fn shapley_law_is_unbiased() {
        // Σ_C P(C) marg(i, C) with P(C) = 1/n · 1/C(n-1,|C|) is sv_i
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for t in 0..10 {
            let n = 3 + t % 6;
            let s: S = random_scenario(&mut rng, n, 10, 2, 0.3);
            let game = AllocationGame::new(s);
            let sv = exact_shapley(&game, &ExactConfig::default())
                .unwrap()
                .values;
            let binom = |a: usize, b: usize| {
                (0..b).fold(1.0, |acc, x| acc * (a - x) as f64 / (x + 1) as f64)
            };
            for (i, &value) in sv.iter().enumerate() {
                let mut expect = 0.0;
                for mask in 0..1u64 << n {
                    if mask >> i & 1 == 1 {
                        continue;
                    }
                    let c = Coalition::from_mask(n, mask);
                    let p = 1.0 / n as f64 / binom(n - 1, c.len());
                    expect += p * game.marginal(i, &c);
                }
                assert!((expect - value).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn drawn_coalitions_follow_the_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let n = 5;
        let mut sizes = [0usize; 5];
        let mut with_first = 0;
        let draws = 50_000;
        for _ in 0..draws {
            let c = draw_coalition(&mut rng, n, 2);
            assert!(!c.contains(2));
            sizes[c.len()] += 1;
            with_first += c.contains(0) as usize;
        }
        for s in sizes {
            assert!((s as f64 / draws as f64 - 0.2).abs() < 0.01);
        }
        // E|C| / (n-1) = 2/4
        assert!((with_first as f64 / draws as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn workers_and_batches_of_jobs_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let s: S = random_scenario(&mut rng, 10, 14, 2, 0.2);
        let cfg = RangeSamplerConfig {
            epsilon: 0.2,
            batch: 50,
            seed: 4,
            ..RangeSamplerConfig::default()
        };
        let base = range_sampler_shapley(&AllocationGame::new(s.clone()), &cfg).unwrap();
        for workers in [4, 16] {
            let other = range_sampler_shapley(
                &AllocationGame::new(s.clone()),
                &RangeSamplerConfig {
                    workers,
                    ..cfg.clone()
                },
            )
            .unwrap();
            assert_eq!(base, other);
        }
    }

    #[test]
    fn estimates_stay_within_the_agent_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let s: S = random_scenario(&mut rng, 8, 12, 1, 0.3);
        let game = AllocationGame::new(s);
        let res = range_sampler_shapley(
            &game,
            &RangeSamplerConfig {
                epsilon: 0.2,
                ..RangeSamplerConfig::default()
            },
        )
        .unwrap();
        for (v, r) in res.values.iter().zip(&res.ranges) {
            assert!(*v >= r.grand_marginal - 1e-12 && *v <= r.solo + 1e-12);
        }
    }
}
