//! Preprocess, then solve every component by the cheapest adequate route.
//!
//! Components up to `exact_limit` agents are solved exactly. Larger ones get
//! neighbourhood bounds for every agent plus one sampler run over the whole
//! component, and each estimate is clamped into its agent's interval.
//! Exact components share the thread budget one worker each; sampled
//! components then run one at a time with every worker.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use alloc_shapley::bounds::{shapley_bounds, BoundsConfig, Side, DEFAULT_MAX_NEIGH};
use alloc_shapley::exact::{exact_shapley, ExactConfig, DEFAULT_EXACT_LIMIT, MAX_EXACT_AGENTS};
use alloc_shapley::matching::optimal_value_only;
use alloc_shapley::parallel::run_jobs;
use alloc_shapley::preprocess::{run_pipeline, Component};
use alloc_shapley::sampling::{
    fpras_shapley, range_sampler_shapley, FprasConfig, RangeMode, RangeSamplerConfig,
};
use alloc_shapley::{
    AgentRecord, Coalition, Error, Game, Method, ReportMeta, Result, Scenario, ShapleyReport,
    Summation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    Fpras,
    #[default]
    Range,
}

impl std::str::FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fpras" => Ok(Sampler::Fpras),
            "range" => Ok(Sampler::Range),
            other => Err(Error::InvalidParameter(format!(
                "sampler must be fpras or range, not `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Policy {
    pub exact_limit: usize,
    pub max_neigh: usize,
    pub sampler: Sampler,
    pub epsilon: f64,
    pub delta: f64,
    /// Error model of the range sampler.
    pub mode: RangeMode,
    /// Independent runs of the permutation sampler.
    pub runs: usize,
    pub seed: u64,
    pub threads: usize,
    pub summation: Summation,
}

impl Default for Policy {
    fn default() -> Self {
        Self {
            exact_limit: DEFAULT_EXACT_LIMIT,
            max_neigh: DEFAULT_MAX_NEIGH,
            sampler: Sampler::Range,
            epsilon: 0.1,
            delta: 0.01,
            mode: RangeMode::Absolute,
            runs: 3,
            seed: 0,
            threads: 1,
            summation: Summation::Plain,
        }
    }
}

impl Policy {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.exact_limit > MAX_EXACT_AGENTS {
            return bad(format!(
                "exact limit {} exceeds the supported maximum {MAX_EXACT_AGENTS}",
                self.exact_limit
            ));
        }
        for (name, value) in [("epsilon", self.epsilon), ("delta", self.delta)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::ParameterOutOfRange { name, value });
            }
        }
        if self.runs == 0 {
            return bad("at least one sampler run is needed".into());
        }
        if self.threads == 0 {
            return bad("at least one thread is needed".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Route {
    Exact,
    Sampled,
}

struct Solved {
    records: Vec<AgentRecord>,
    route: Route,
    stages: BTreeMap<&'static str, f64>,
    matchings: u64,
    contributions: u64,
    shortcut_hits: u64,
}

fn solve_component(
    component: &Component<f64>,
    index: usize,
    policy: &Policy,
    workers: usize,
) -> Result<Solved> {
    let game = Game::new(component.scenario.clone());
    let ids = |i: usize| game.scenario().agent_id(i).to_owned();
    let mut stages = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, clock: &mut Instant| {
        *stages.entry(name).or_insert(0.0) += clock.elapsed().as_secs_f64();
        *clock = Instant::now();
    };
    let n = game.n_agents();

    if n <= policy.exact_limit {
        let cfg = ExactConfig {
            workers,
            limit: policy.exact_limit,
            summation: policy.summation,
            ..ExactConfig::default()
        };
        let values = exact_shapley(&game, &cfg)?.values;
        lap("exact", &mut clock);
        let records = values
            .iter()
            .enumerate()
            .map(|(i, &v)| AgentRecord::exact(ids(i), Method::Exact, v))
            .collect();
        return Ok(Solved {
            records,
            route: Route::Exact,
            stages,
            matchings: game.matchings(),
            contributions: 0,
            shortcut_hits: 0,
        });
    }

    let bounds_cfg = BoundsConfig {
        max_neigh: policy.max_neigh,
        side: Side::Both,
        workers,
        agents: None,
        summation: policy.summation,
    };
    let bounds = shapley_bounds(&game, &bounds_cfg)?;
    lap("bounds", &mut clock);

    let seed = policy.seed.wrapping_add(index as u64);
    let (values, method, samples, contributions, shortcut_hits) = match policy.sampler {
        Sampler::Fpras => {
            let cfg = FprasConfig {
                epsilon: policy.epsilon,
                delta: policy.delta,
                runs: policy.runs,
                seed,
                workers,
                summation: policy.summation,
                ..FprasConfig::default()
            };
            let r = fpras_shapley(&game, &cfg)?;
            let samples = vec![r.permutations_per_run * policy.runs as u64; n];
            (
                r.values,
                Method::Fpras,
                samples,
                r.contributions,
                r.shortcut_hits,
            )
        }
        Sampler::Range => {
            let lower_bounds = match policy.mode {
                RangeMode::Relative => Some(
                    bounds
                        .iter()
                        .map(|b| b.lb.expect("both sides computed"))
                        .collect(),
                ),
                RangeMode::Absolute => None,
            };
            let cfg = RangeSamplerConfig {
                epsilon: policy.epsilon,
                delta: policy.delta,
                mode: policy.mode,
                lower_bounds,
                seed,
                workers,
                summation: policy.summation,
                ..RangeSamplerConfig::default()
            };
            let r = range_sampler_shapley(&game, &cfg)?;
            let total = r.total_samples();
            (r.values, Method::RangeSampler, r.samples, total, 0)
        }
    };
    lap("sampler", &mut clock);

    let records = bounds
        .iter()
        .map(|b| {
            let (lb, ub) = (b.lb.expect("lower side"), b.ub.expect("upper side"));
            let lb = if b.collapsed() { ub } else { lb };
            let i = b.agent;
            AgentRecord::estimate(
                ids(i),
                method,
                values[i],
                policy.epsilon,
                policy.delta,
                samples[i],
            )
            .with_interval(lb, ub, b.fallback)
        })
        .collect();
    Ok(Solved {
        records,
        route: Route::Sampled,
        stages,
        matchings: game.matchings(),
        contributions,
        shortcut_hits,
    })
}

/// Solves `scenario` under `policy` and merges everything into one report in
/// the scenario's agent order.
pub fn solve(scenario: &Scenario, policy: &Policy) -> Result<ShapleyReport> {
    policy.validate()?;
    let start = Instant::now();
    let n = scenario.n_agents();
    let outcome = run_pipeline(scenario);
    let mut stages: BTreeMap<String, f64> = BTreeMap::new();
    stages.insert("preprocess".into(), start.elapsed().as_secs_f64());

    let mut records: Vec<Option<AgentRecord>> = vec![None; n];
    for r in &outcome.resolved {
        records[r.agent] = Some(AgentRecord::exact(
            scenario.agent_id(r.agent),
            r.method,
            r.value,
        ));
    }

    let (small, large): (Vec<usize>, Vec<usize>) = (0..outcome.components.len())
        .partition(|&c| outcome.components[c].len() <= policy.exact_limit);
    let mut solved: Vec<(usize, Solved)> = Vec::with_capacity(outcome.components.len());
    let exact = run_jobs(policy.threads, small.len(), |j| {
        solve_component(&outcome.components[small[j]], small[j], policy, 1)
    });
    for (&c, result) in small.iter().zip(exact) {
        solved.push((c, result?));
    }
    for &c in &large {
        solved.push((
            c,
            solve_component(&outcome.components[c], c, policy, policy.threads)?,
        ));
    }

    let mut meta = ReportMeta::new("solve");
    let mut routes = (0usize, 0usize);
    let mut contributions = 0;
    let mut shortcut_hits = 0;
    for (c, part) in solved {
        for (record, &agent) in part.records.into_iter().zip(&outcome.components[c].agents) {
            records[agent] = Some(record);
        }
        match part.route {
            Route::Exact => routes.0 += 1,
            Route::Sampled => routes.1 += 1,
        }
        for (name, secs) in part.stages {
            *stages.entry(name.to_owned()).or_insert(0.0) += secs;
        }
        meta.matchings += part.matchings;
        contributions += part.contributions;
        shortcut_hits += part.shortcut_hits;
    }

    meta.seed = Some(policy.seed);
    meta.epsilon = Some(policy.epsilon);
    meta.delta = Some(policy.delta);
    meta.grand_value = Some(optimal_value_only(scenario, &Coalition::full(n)));
    if routes.1 > 0 {
        meta.contributions = Some(contributions);
        if policy.sampler == Sampler::Fpras {
            meta.shortcut_hits = Some(shortcut_hits);
        }
    }
    meta.policy = Some(serde_json::to_value(policy).expect("policy serializes"));
    meta.extra
        .insert("components".into(), outcome.components.len().into());
    meta.extra
        .insert("resolved_agents".into(), outcome.resolved.len().into());
    meta.extra
        .insert("exact_components".into(), routes.0.into());
    meta.extra.insert("sampler_calls".into(), routes.1.into());
    meta.extra.insert(
        "preprocess".into(),
        serde_json::to_value(&outcome.counts).expect("counts serialize"),
    );
    meta.stages = stages;
    meta.wall_time_secs = start.elapsed().as_secs_f64();

    let agents = records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.unwrap_or_else(|| panic!("agent {i} was neither resolved nor in a component"))
        })
        .collect();
    Ok(ShapleyReport::new(meta, agents))
}
