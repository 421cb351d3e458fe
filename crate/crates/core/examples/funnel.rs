//! Generates an assessment-scale population, runs the preprocessing funnel and
//! reports the shape of what is left.
//!
//! ```text
//! cargo run --release -p alloc-shapley --example funnel -- [seed] [params.json]
//! ```

use std::time::Instant;

use alloc_shapley::bounds::{shapley_bounds, BoundsConfig, Side};
use alloc_shapley::generator::{generate, GeneratorParams};
use alloc_shapley::preprocess::run_pipeline;
use alloc_shapley::sampling::range::plan;
use alloc_shapley::sampling::{
    compute_ranges, fpras_sample_size, range_sampler_shapley, RangeMode, RangeSamplerConfig,
};
use alloc_shapley::{Game, Scenario};

fn main() -> alloc_shapley::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seed = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut params = match args.get(2) {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => GeneratorParams::assessment_scale(),
    };
    params.seed = seed;
    let scenario: Scenario = generate(&params)?;
    let start = Instant::now();
    let out = run_pipeline(&scenario);
    println!("pipeline {:.2}s", start.elapsed().as_secs_f64());
    println!("{}", serde_json::to_string_pretty(&out.counts).unwrap());
    let hist = out.histogram();
    println!("histogram {hist:?}");

    let Some(big) = out.largest_component() else {
        return Ok(());
    };
    let game = Game::new(big.scenario.clone());
    let degrees: Vec<usize> = (0..game.n_agents())
        .map(|i| game.graph().degree(i))
        .collect();
    let over = degrees.iter().filter(|&&d| d > 19).count();
    let mean = degrees.iter().sum::<usize>() as f64 / degrees.len() as f64;
    let shortcut =
        degrees.iter().map(|&d| 1.0 / (d as f64 + 1.0)).sum::<f64>() / degrees.len() as f64;
    println!(
        "largest {} agents, mean degree {mean:.2}, max {}, over 19: {over}, mean 1/(d+1) {shortcut:.3}",
        big.len(),
        degrees.iter().max().unwrap()
    );
    let mut dh = std::collections::BTreeMap::new();
    for d in &degrees {
        *dh.entry(*d).or_insert(0) += 1;
    }
    println!("degree histogram {dh:?}");
    let cost: f64 = degrees
        .iter()
        .filter(|&&d| d <= 19)
        .map(|&d| 2f64.powi(d as i32))
        .sum();
    println!("lower-bound profiles {cost:.0}");
    let stuck = (0..game.n_agents())
        .filter(|&i| degrees[i] > 19 && game.grand_marginal(i) <= 0.0)
        .count();
    println!("fallback agents with zero grand marginal: {stuck}");
    if args.iter().any(|a| a == "--bench") {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = game.n_agents();
        let draws: Vec<(usize, alloc_shapley::Coalition)> = (0..2000)
            .map(|t| {
                (
                    t % n,
                    alloc_shapley::sampling::range::draw_coalition(&mut rng, n, t % n),
                )
            })
            .collect();
        let start = Instant::now();
        let mut total = 0.0;
        for (i, c) in &draws {
            total += game.marginal_uncached(*i, c);
        }
        println!(
            "2000 random marginals {:.3}s (sum {total})",
            start.elapsed().as_secs_f64()
        );
        let start = Instant::now();
        let mut total = 0.0;
        for i in 0..n {
            total += game.marginal_uncached(i, &game.grand().without(i));
        }
        println!(
            "{n} grand marginals {:.3}s (sum {total})",
            start.elapsed().as_secs_f64()
        );
    }
    if args.iter().any(|a| a == "--sample-bench") {
        use rand::SeedableRng;
        let mut heavy: Vec<usize> = (0..game.n_agents()).collect();
        heavy.sort_by_key(|&i| std::cmp::Reverse(degrees[i]));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let draws: Vec<(usize, alloc_shapley::Coalition)> = heavy
            .iter()
            .take(20)
            .flat_map(|&i| std::iter::repeat_n(i, 2000))
            .map(|i| {
                (
                    i,
                    alloc_shapley::sampling::range::draw_coalition(&mut rng, game.n_agents(), i),
                )
            })
            .collect();
        let t = Instant::now();
        let locals: Vec<_> = draws
            .iter()
            .map(|(i, c)| game.graph().reachable_within(*i, c))
            .collect();
        let mean = locals.iter().map(|l| l.len()).sum::<usize>() as f64 / locals.len() as f64;
        println!(
            "  reachable {:.3}s, mean local size {mean:.1}",
            t.elapsed().as_secs_f64()
        );
        let t = Instant::now();
        let mut matcher = alloc_shapley::matching::Matcher::new();
        let mut v = 0.0;
        for l in &locals {
            v += matcher.value(game.scenario(), l);
        }
        println!("  greedy {:.3}s ({v})", t.elapsed().as_secs_f64());
        let mut dm = alloc_shapley::matching::DynamicMatching::new(game.scenario());
        let t = Instant::now();
        let mut total = 0.0;
        for (i, c) in &draws {
            total += game.marginal_incremental(*i, c, &mut dm);
        }
        println!(
            "40000 heavy samples {:.3}s (sum {total})",
            t.elapsed().as_secs_f64()
        );
    }
    if args.iter().any(|a| a == "--bounds") {
        let start = Instant::now();
        let b = shapley_bounds(
            &game,
            &BoundsConfig {
                side: Side::Lower,
                ..BoundsConfig::default()
            },
        )?;
        let zero = b.iter().filter(|x| x.lb.unwrap() <= 0.0).count();
        println!(
            "lower bounds {:.2}s, non-positive {zero}",
            start.elapsed().as_secs_f64()
        );
        let lower: Vec<f64> = b.iter().map(|x| x.lb.unwrap()).collect();
        let cfg = RangeSamplerConfig {
            epsilon: 0.05,
            delta: 0.01,
            mode: RangeMode::Relative,
            lower_bounds: Some(lower),
            ..RangeSamplerConfig::default()
        };
        let ranges = compute_ranges(&game);
        match plan(&game, &ranges, &cfg) {
            Ok(p) => {
                let total: u64 = p.iter().map(|x| x.1).sum();
                let max = p.iter().map(|x| x.1).max().unwrap();
                println!("range sampler plan: {total} samples, max per agent {max}");
                if args.iter().any(|a| a == "--range") {
                    let start = Instant::now();
                    range_sampler_shapley(&game, &cfg)?;
                    println!("range sampler {:.2}s", start.elapsed().as_secs_f64());
                }
            }
            Err(e) => println!("range sampler refused: {e}"),
        }
        println!(
            "fpras m at eps 0.05: {}",
            fpras_sample_size(game.n_agents(), 0.05, 0.01)
        );
    }
    Ok(())
}
