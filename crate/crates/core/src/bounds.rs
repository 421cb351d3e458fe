//! Neighbourhood-profile bounds on Shapley values.
//!
//! For an agent `i` with neighbours `neigh(i)` and non-neighbours
//! `C = N \ (neigh(i) ∪ {i})`, every coalition `C' ⊆ N \ {i}` has a profile
//! `P' = C' ∩ neigh(i)`, and `P' ⊆ C' ⊆ C ∪ P'`. Marginal contributions
//! shrink as coalitions grow, so
//!
//! ```text
//! marg(i, C ∪ P')  ≤  marg(i, C')  ≤  marg(i, P')
//! ```
//!
//! and weighting each profile by the total Shapley weight `y(P')` of its
//! coalitions gives `LB_i ≤ sv_i ≤ UB_i` with only `2^|neigh(i)|` terms.
//! With `l = |C|`, `p = |P'|`, `z = |neigh(i)| - p`:
//!
//! ```text
//! y = Σ_{k=0..l} C(l,k) · (l-k+p)! (z+k)! / n!
//! ```

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::shapley_weights;
use crate::matching::{with_matcher, DynamicMatching};
use crate::model::{AgentRecord, AllocationGame, ReportMeta, ShapleyReport};
use crate::parallel::run_jobs;
use crate::scalar::{Accumulator, Scalar, Summation};

pub const DEFAULT_MAX_NEIGH: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Lower,
    Upper,
    #[default]
    Both,
}

impl Side {
    pub fn lower(self) -> bool {
        matches!(self, Side::Lower | Side::Both)
    }

    pub fn upper(self) -> bool {
        matches!(self, Side::Upper | Side::Both)
    }
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lower" => Ok(Side::Lower),
            "upper" => Ok(Side::Upper),
            "both" => Ok(Side::Both),
            other => Err(Error::InvalidParameter(format!(
                "side must be lower, upper or both, not `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsConfig {
    pub max_neigh: usize,
    pub side: Side,
    pub workers: usize,
    /// Agents to bound; `None` means all.
    pub agents: Option<Vec<usize>>,
    pub summation: Summation,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            max_neigh: DEFAULT_MAX_NEIGH,
            side: Side::Both,
            workers: 1,
            agents: None,
            summation: Summation::Plain,
        }
    }
}

/// `y(l, p, z, n)`: the Shapley weight of all coalitions sharing one
/// neighbourhood profile.
pub fn profile_weight<T: Scalar>(l: usize, p: usize, z: usize, n: usize) -> Result<T> {
    if l + p + z + 1 != n {
        return Err(Error::InconsistentProfile { l, p, z, n });
    }
    Ok(profile_weights::<T>(n, p + z)[p])
}

/// `y` for every profile size `p = 0..=d` of an agent with `d` neighbours.
pub fn profile_weights<T: Scalar>(n: usize, d: usize) -> Vec<T> {
    assert!(d < n, "an agent has at most n-1 neighbours");
    let w = shapley_weights::<f64>(n);
    let l = n - 1 - d;
    (0..=d)
        .map(|p| {
            // C(l, j) · w(p + j) summed over the j non-neighbours present
            let mut binom = 1.0;
            let mut y = 0.0;
            for j in 0..=l {
                y += binom * w[p + j];
                binom = binom * (l - j) as f64 / (j + 1) as f64;
            }
            T::of(y)
        })
        .collect()
}

/// `Σ_{P' ⊆ neigh(i)} y(P')`; 1 up to rounding.
pub fn partition_total(n: usize, d: usize) -> f64 {
    let y = profile_weights::<f64>(n, d);
    let mut binom = 1.0;
    let mut total = 0.0;
    for (p, yp) in y.iter().enumerate() {
        total += binom * yp;
        binom = binom * (d - p) as f64 / (p + 1) as f64;
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentBounds<T> {
    pub agent: usize,
    pub lb: Option<T>,
    pub ub: Option<T>,
    /// The neighbourhood was over the cutoff; the interval is
    /// `[marg({i},N), opt({i})]`.
    pub fallback: bool,
    pub neighbors: usize,
    pub profiles: u64,
}

impl<T: Scalar> AgentBounds<T> {
    /// Both bounds are known and agree up to summation rounding.
    pub fn collapsed(&self) -> bool {
        matches!((self.lb, self.ub), (Some(l), Some(u)) if (u - l).abs() <= T::reassociation_slack(u))
    }
}

/// `marg(i, S)` for the coalition held by `dm`, leaving it unchanged.
fn probe<T: Scalar>(dm: &mut DynamicMatching<'_, T>, i: usize) -> T {
    let gain = dm.add_agent(i);
    dm.remove_agent(i);
    gain
}

/// Bounds for one agent.
pub fn agent_bounds<T: Scalar>(
    game: &AllocationGame<T>,
    i: usize,
    cfg: &BoundsConfig,
) -> AgentBounds<T> {
    let n = game.n_agents();
    let neigh: Vec<usize> = game.graph().neighbors(i).iter().collect();
    let d = neigh.len();
    if d > cfg.max_neigh {
        return AgentBounds {
            agent: i,
            lb: cfg.side.lower().then(|| game.grand_marginal(i)),
            ub: cfg.side.upper().then(|| game.singleton_value(i)),
            fallback: true,
            neighbors: d,
            profiles: 0,
        };
    }
    if d == 0 {
        let solo = game.singleton_value(i);
        return AgentBounds {
            agent: i,
            lb: cfg.side.lower().then_some(solo),
            ub: cfg.side.upper().then_some(solo),
            fallback: false,
            neighbors: 0,
            profiles: 1,
        };
    }

    let y = profile_weights::<T>(n, d);
    let scenario = game.scenario();
    let mut outside = game.grand().without(i);
    for &j in &neigh {
        outside.remove(j);
    }
    // Both sweeps keep an optimal allocation and update it as neighbours
    // enter and leave, so a profile costs a few alternating-path searches.
    let mut with_outside = match cfg.side.lower() {
        true => Some(with_matcher(|m| {
            DynamicMatching::from_coalition(scenario, &outside, m)
        })),
        false => None,
    };
    let mut profile = cfg.side.upper().then(|| DynamicMatching::new(scenario));
    let mut lower = Accumulator::new(cfg.summation);
    let mut upper = Accumulator::new(cfg.summation);
    let total = 1u64 << d;
    for t in 0..total {
        if t > 0 {
            // Gray code: exactly one neighbour enters or leaves
            let j = neigh[t.trailing_zeros() as usize];
            for dm in [with_outside.as_mut(), profile.as_mut()]
                .into_iter()
                .flatten()
            {
                if dm.contains(j) {
                    dm.remove_agent(j);
                } else {
                    dm.add_agent(j);
                }
            }
        }
        let gray = t ^ (t >> 1);
        let weight = y[gray.count_ones() as usize];
        if let Some(dm) = with_outside.as_mut() {
            lower.add(weight * probe(dm, i));
        }
        if let Some(dm) = profile.as_mut() {
            upper.add(weight * probe(dm, i));
        }
    }
    let (lb, ub) = (lower.value(), upper.value());
    AgentBounds {
        agent: i,
        lb: cfg.side.lower().then_some(lb),
        ub: cfg.side.upper().then_some(ub),
        fallback: false,
        neighbors: d,
        profiles: total,
    }
}

pub fn shapley_bounds<T: Scalar>(
    game: &AllocationGame<T>,
    cfg: &BoundsConfig,
) -> Result<Vec<AgentBounds<T>>> {
    let n = game.n_agents();
    let agents: Vec<usize> = match &cfg.agents {
        Some(list) => {
            if let Some(&bad) = list.iter().find(|&&a| a >= n) {
                return Err(Error::AgentOutOfRange { index: bad, n });
            }
            list.clone()
        }
        None => (0..n).collect(),
    };
    Ok(run_jobs(cfg.workers, agents.len(), |j| {
        agent_bounds(game, agents[j], cfg)
    }))
}

pub fn bounds_report<T: Scalar>(
    game: &AllocationGame<T>,
    cfg: &BoundsConfig,
) -> Result<ShapleyReport> {
    let start = Instant::now();
    let before = game.matchings();
    let bounds = shapley_bounds(game, cfg)?;
    let mut meta = ReportMeta::new("bounds");
    meta.matchings = game.matchings() - before;
    meta.wall_time_secs = start.elapsed().as_secs_f64();
    meta.extra.insert("max_neigh".into(), cfg.max_neigh.into());
    meta.extra.insert(
        "side".into(),
        serde_json::to_value(cfg.side).expect("side serializes"),
    );
    meta.extra.insert(
        "fallback_agents".into(),
        bounds.iter().filter(|b| b.fallback).count().into(),
    );
    meta.extra.insert(
        "collapsed_agents".into(),
        bounds.iter().filter(|b| b.collapsed()).count().into(),
    );
    let records = bounds
        .iter()
        .map(|b| {
            // a collapsed interval is reported as the single value it pins
            let lb = if b.collapsed() { b.ub } else { b.lb };
            AgentRecord::interval(
                game.scenario().agent_id(b.agent),
                lb.map(Scalar::as_f64),
                b.ub.map(Scalar::as_f64),
                b.fallback,
            )
        })
        .collect();
    Ok(ShapleyReport::new(meta, records))
}
