//! Brute-force Shapley values over all `2^n` coalitions of a component.
//!
//! Coalitions are the integers `0..2^n` read as bitmasks and are processed in
//! contiguous mask ranges. Each coalition's worth is computed once and
//! credited to every agent at the same time: with `w(s) = s!(n-s-1)!/n!`,
//!
//! ```text
//! sv_i = Σ_{C ∋ i} w(|C|-1)·v(C) − Σ_{C ∌ i} w(|C|)·v(C)
//! ```
//!
//! which regroups the usual sum of weighted marginal contributions by
//! coalition, so no coalition is evaluated twice and no table of worths is
//! kept.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::Matcher;
use crate::model::{AgentRecord, AllocationGame, Coalition, Method, ReportMeta, ShapleyReport};
use crate::parallel::{ranges, run_jobs};
use crate::scalar::{Accumulator, Scalar, Summation};

pub const DEFAULT_EXACT_LIMIT: usize = 26;

/// Masks are 64-bit integers, so this is the hard ceiling whatever the limit.
pub const MAX_EXACT_AGENTS: usize = 40;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactConfig {
    pub workers: usize,
    /// Largest component the solver accepts.
    pub limit: usize,
    pub summation: Summation,
    /// Coalitions per job.
    pub job_size: u64,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            workers: 1,
            limit: DEFAULT_EXACT_LIMIT,
            summation: Summation::Plain,
            job_size: 1 << 12,
        }
    }
}

/// `|C|!(n-|C|-1)!/n!` for `|C| = csize`, by an iterated ratio starting
/// from `1/n`.
pub fn shapley_weight<T: Scalar>(csize: usize, n: usize) -> Result<T> {
    if n == 0 || csize >= n {
        return Err(Error::CoalitionSizeOutOfRange { size: csize, n });
    }
    Ok(shapley_weights::<T>(n)[csize])
}

/// All weights `w(0), ..., w(n-1)` for `n` agents.
pub fn shapley_weights<T: Scalar>(n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let mut w = 1.0 / n as f64;
    for s in 0..n {
        out.push(T::of(w));
        if s + 1 < n {
            w *= (s + 1) as f64 / (n - s - 1) as f64;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactValues<T> {
    pub values: Vec<T>,
    pub grand_value: T,
    pub coalitions: u64,
}

pub fn exact_shapley<T: Scalar>(
    game: &AllocationGame<T>,
    cfg: &ExactConfig,
) -> Result<ExactValues<T>> {
    let n = game.n_agents();
    let limit = cfg.limit.min(MAX_EXACT_AGENTS);
    if n > limit {
        return Err(Error::ComponentTooLarge { n, limit });
    }
    if n == 0 {
        return Ok(ExactValues {
            values: Vec::new(),
            grand_value: T::zero(),
            coalitions: 1,
        });
    }
    let scenario = game.scenario();
    let weights = shapley_weights::<T>(n);
    let total = 1u64 << n;
    let jobs: Vec<_> = ranges(total, cfg.job_size).collect();

    let partials = run_jobs(cfg.workers, jobs.len(), |j| {
        let mut matcher = Matcher::new();
        let mut acc = vec![Accumulator::new(cfg.summation); n];
        let mut grand = None;
        for mask in jobs[j].clone() {
            if mask == 0 {
                continue;
            }
            let c = Coalition::from_mask(n, mask);
            let v = matcher.value(scenario, &c);
            if mask == total - 1 {
                grand = Some(v);
            }
            if v == T::zero() {
                continue;
            }
            let s = mask.count_ones() as usize;
            let gain = weights[s - 1] * v;
            let loss = if s < n { weights[s] * v } else { T::zero() };
            for (i, a) in acc.iter_mut().enumerate() {
                if mask >> i & 1 == 1 {
                    a.add(gain);
                } else {
                    a.add(-loss);
                }
            }
        }
        (
            acc.iter().map(Accumulator::value).collect::<Vec<T>>(),
            grand,
        )
    });

    let mut merged = vec![Accumulator::new(cfg.summation); n];
    let mut grand_value = T::zero();
    for (part, grand) in partials {
        for (m, p) in merged.iter_mut().zip(part) {
            m.add(p);
        }
        if let Some(g) = grand {
            grand_value = g;
        }
    }
    Ok(ExactValues {
        values: merged.iter().map(Accumulator::value).collect(),
        grand_value,
        coalitions: total,
    })
}

/// Runs [`exact_shapley`] and wraps the values in a report.
pub fn exact_report<T: Scalar>(
    game: &AllocationGame<T>,
    cfg: &ExactConfig,
) -> Result<ShapleyReport> {
    let start = Instant::now();
    let result = exact_shapley(game, cfg)?;
    let mut meta = ReportMeta::new("exact");
    meta.grand_value = Some(result.grand_value.as_f64());
    meta.matchings = result.coalitions.saturating_sub(1);
    meta.wall_time_secs = start.elapsed().as_secs_f64();
    let records = result
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| AgentRecord::exact(game.scenario().agent_id(i), Method::Exact, v.as_f64()))
        .collect();
    Ok(ShapleyReport::new(meta, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{
        random_scenario, research_example, research_example_alternative, running_example,
    };
    use crate::model::AllocationScenario;
    use crate::oracle::{
        brute_force_opt, relative_gap, shapley_by_permutations, shapley_by_subsets,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn solve(s: AllocationScenario<f64>) -> Vec<f64> {
        exact_shapley(&AllocationGame::new(s), &ExactConfig::default())
            .unwrap()
            .values
    }

    #[test]
    fn weight_examples() {
        assert!((shapley_weight::<f64>(0, 3).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((shapley_weight::<f64>(1, 3).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!(shapley_weight::<f64>(3, 3).is_err());
        assert!(shapley_weight::<f64>(0, 0).is_err());
    }

    #[test]
    fn weights_over_all_coalitions_sum_to_one() {
        // Σ_s C(n-1, s) w(s, n) = 1
        for n in [1, 2, 10, 30, 64] {
            let w = shapley_weights::<f64>(n);
            let mut binom = 1.0;
            let mut total = 0.0;
            for (s, ws) in w.iter().enumerate() {
                total += binom * ws;
                binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
            }
            assert!((total - 1.0).abs() < 1e-12, "n={n}: {total}");
        }
    }

    #[test]
    fn weights_match_factorials() {
        let fact = |k: usize| (1..=k).map(|x| x as f64).product::<f64>();
        for n in 1..15 {
            for s in 0..n {
                let direct = fact(s) * fact(n - s - 1) / fact(n);
                assert!(relative_gap(shapley_weight::<f64>(s, n).unwrap(), direct) < 1e-13);
            }
        }
    }

    #[test]
    fn running_example_values() {
        // permutation brute force over the six orders of the known worths
        let worths = |c: &Coalition| match c.as_mask().unwrap() {
            0b000 => 0.0,
            0b001 | 0b010 => 3.0,
            0b100 => 1.0,
            0b011 => 5.0,
            0b101 | 0b110 => 4.0,
            _ => 6.0,
        };
        let expected = shapley_by_permutations(3, worths);
        assert_eq!(expected, vec![2.5, 2.5, 1.0]);
        let got = solve(running_example());
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn research_example_values_and_fairness() {
        let expected = [14.5, 14.5, 16.0];
        for s in [research_example(), research_example_alternative()] {
            let game = AllocationGame::new(s);
            assert_eq!(game.grand_value(), 45.0);
            let got = exact_shapley(&game, &ExactConfig::default())
                .unwrap()
                .values;
            for (g, e) in got.iter().zip(expected) {
                assert!((g - e).abs() < 1e-12, "{got:?}");
            }
        }
    }

    #[test]
    fn single_agent_gets_its_solo_value() {
        let s = AllocationScenario::<f64>::from_ids(
            2,
            &[("g", 2.0), ("h", 1.5), ("x", 1.0)],
            &[("a", &["g", "h", "x"])],
        )
        .unwrap();
        assert_eq!(solve(s), vec![3.5]);
    }

    #[test]
    fn symmetric_agents_get_equal_values() {
        let s = AllocationScenario::<f64>::from_ids(
            1,
            &[("g", 2.0), ("h", 1.0), ("x", 0.4)],
            &[("a", &["g", "h"]), ("b", &["g", "h"]), ("c", &["h", "x"])],
        )
        .unwrap();
        let v = solve(s);
        assert_eq!(v[0], v[1]);
    }

    #[test]
    fn oversize_component_is_refused() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s: AllocationScenario<f64> = random_scenario(&mut rng, 9, 5, 1, 0.3);
        let cfg = ExactConfig {
            limit: 8,
            ..ExactConfig::default()
        };
        let err = exact_shapley(&AllocationGame::new(s), &cfg).unwrap_err();
        assert!(matches!(err, Error::ComponentTooLarge { n: 9, limit: 8 }));
        assert!(err.to_string().contains("limited to 8"));
    }

    #[test]
    fn agrees_with_subset_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for t in 0..40 {
            let s: AllocationScenario<f64> =
                random_scenario(&mut rng, 2 + t % 7, 8, 1 + t % 2, 0.3);
            let oracle = shapley_by_subsets(s.n_agents(), |c| brute_force_opt(&s, c));
            let got = solve(s);
            for (g, o) in got.iter().zip(&oracle) {
                assert!(relative_gap(*g, *o) < 1e-9, "{got:?} vs {oracle:?}");
            }
        }
    }

    #[test]
    fn efficiency_and_marginality() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for t in 0..40 {
            let n = 3 + t % 8;
            let s: AllocationScenario<f64> = random_scenario(&mut rng, n, 12, 1 + t % 2, 0.25);
            let game = AllocationGame::new(s);
            let res = exact_shapley(&game, &ExactConfig::default()).unwrap();
            let grand = game.grand_value();
            assert_eq!(res.grand_value, grand);
            let total: f64 = res.values.iter().sum();
            assert!(relative_gap(total, grand) < 1e-9);
            for i in 0..n {
                assert!(res.values[i] >= game.grand_marginal(i) - 1e-9);
            }
            // random groups get at least their joint marginal contribution
            for _ in 0..5 {
                let group: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
                let rest = Coalition::full(n)
                    .difference(&Coalition::from_members(n, group.iter().copied()));
                let share: f64 = group.iter().map(|&i| res.values[i]).sum();
                assert!(share >= grand - game.char_value(&rest) - 1e-9);
            }
        }
    }

    #[test]
    fn worker_count_and_summation_do_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let s: AllocationScenario<f64> = random_scenario(&mut rng, 12, 18, 2, 0.2);
        let game = AllocationGame::new(s);
        let base = ExactConfig {
            job_size: 64,
            ..ExactConfig::default()
        };
        let one = exact_shapley(&game, &base).unwrap();
        let many = exact_shapley(
            &game,
            &ExactConfig {
                workers: 6,
                ..base.clone()
            },
        )
        .unwrap();
        assert_eq!(one, many);
        let kahan = exact_shapley(
            &game,
            &ExactConfig {
                summation: Summation::Compensated,
                ..base
            },
        )
        .unwrap();
        for (a, b) in one.values.iter().zip(&kahan.values) {
            assert!(relative_gap(*a, *b) < 1e-12);
        }
    }

    #[test]
    fn declaration_order_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..10 {
            let s: AllocationScenario<f64> = random_scenario(&mut rng, 8, 10, 2, 0.3);
            let mut order: Vec<usize> = (0..8).collect();
            order.reverse();
            order.swap(2, 5);
            let permuted = s.restrict(&order);
            let base = solve(s);
            let other = solve(permuted);
            for (pos, &orig) in order.iter().enumerate() {
                assert!((base[orig] - other[pos]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn f32_agrees_with_f64() {
        let s = running_example();
        let v32 = exact_shapley(
            &AllocationGame::new(s.cast::<f32>()),
            &ExactConfig::default(),
        )
        .unwrap()
        .values;
        assert_eq!(v32, vec![2.5f32, 2.5, 1.0]);
    }
}
