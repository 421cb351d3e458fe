//! Synthetic author/publication scenarios.
//!
//! Agents are authors on a line. Every author with a non-empty interest set
//! leads at least one publication and the remaining publications go to
//! random leads. A publication is claimed by its lead plus a geometric number
//! of co-authors (each further co-author with probability `coauthorship`, up
//! to `max_authors` in total) drawn from the lead's neighbourhood on the line,
//! or from anyone when `locality` is 0.
//!
//! A share of authors can form a collaborative core: publications led by a
//! core author recruit co-authors from the core at a higher rate, and core
//! authors are more likely to lead the extra publications. The core becomes
//! one large component after preprocessing, while the periphery breaks into
//! small pieces or resolves outright. Values come from a weighted finite set.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AgentsGraph, AllocationScenario, Coalition, Good};
use crate::sampling::job_rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    pub agents: usize,
    /// Mean number of publications led by an author with non-empty interest.
    pub goods_per_agent: f64,
    /// Probability of each additional co-author.
    pub coauthorship: f64,
    pub max_authors: usize,
    /// Co-authors are at most this far from the lead on the author line;
    /// 0 lets anyone co-author.
    pub locality: usize,
    pub empty_fraction: f64,
    /// Share of authors forming a collaborative core. Publications led by a
    /// core author draw co-authors from the core with probability
    /// `hub_coauthorship` each.
    pub hub_fraction: f64,
    pub hub_coauthorship: f64,
    /// Relative weight of a core author when publications beyond the first
    /// per author pick their lead.
    pub hub_productivity: f64,
    pub values: Vec<f64>,
    pub value_weights: Vec<f64>,
    pub k: usize,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            agents: 100,
            goods_per_agent: 1.85,
            coauthorship: 0.45,
            max_authors: 8,
            locality: 12,
            empty_fraction: 0.1,
            hub_fraction: 0.0,
            hub_coauthorship: 0.5,
            hub_productivity: 1.0,
            values: vec![0.0, 0.1, 0.4, 0.7, 1.0],
            value_weights: vec![0.39, 0.06, 0.15, 0.2, 0.2],
            k: 2,
            seed: 0,
        }
    }
}

impl GeneratorParams {
    /// A population resembling a national research assessment: 3562
    /// authors, about 5900 publications, two submissions each, and a
    /// collaborative core that leaves one component of several hundred
    /// authors after preprocessing.
    pub fn assessment_scale() -> Self {
        Self {
            agents: 3562,
            goods_per_agent: 1.85,
            coauthorship: 0.088,
            locality: 0,
            hub_fraction: 0.23,
            hub_coauthorship: 0.476,
            hub_productivity: 2.54,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.agents == 0 {
            return bad("at least one agent is needed".into());
        }
        if !(self.goods_per_agent >= 1.0 && self.goods_per_agent.is_finite()) {
            return bad(format!(
                "goods per agent must be at least 1, got {}",
                self.goods_per_agent
            ));
        }
        if !(0.0..1.0).contains(&self.coauthorship) {
            return bad(format!(
                "co-authorship probability must lie in [0, 1), got {}",
                self.coauthorship
            ));
        }
        if self.max_authors == 0 {
            return bad("max authors must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.hub_coauthorship) || !(0.0..=1.0).contains(&self.hub_fraction)
        {
            return bad("hub fraction must lie in [0, 1] and hub co-authorship in [0, 1)".into());
        }
        if !(self.hub_productivity > 0.0 && self.hub_productivity.is_finite()) {
            return bad(format!(
                "hub productivity must be positive, got {}",
                self.hub_productivity
            ));
        }
        if !(0.0..1.0).contains(&self.empty_fraction) {
            return bad(format!(
                "empty fraction must lie in [0, 1), got {}",
                self.empty_fraction
            ));
        }
        if self.values.is_empty() || self.values.len() != self.value_weights.len() {
            return bad("values and value weights must be non-empty and of equal length".into());
        }
        if self.values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("values must be finite and non-negative".into());
        }
        if self
            .value_weights
            .iter()
            .any(|w| !(*w >= 0.0 && w.is_finite()))
            || self.value_weights.iter().all(|w| *w == 0.0)
        {
            return bad("value weights must be non-negative and not all zero".into());
        }
        if self.k == 0 {
            return bad("capacity must be at least 1".into());
        }
        Ok(())
    }
}

pub fn generate<T: Scalar>(params: &GeneratorParams) -> Result<AllocationScenario<T>> {
    params.validate()?;
    let mut rng = job_rng(params.seed, 0);
    let n = params.agents;
    let n_empty = ((n as f64) * params.empty_fraction).round() as usize;
    let mut empty = vec![false; n];
    for e in index::sample(&mut rng, n, n_empty.min(n - 1)).iter() {
        empty[e] = true;
    }
    let active: Vec<usize> = (0..n).filter(|&i| !empty[i]).collect();
    let n_goods = ((active.len() as f64) * params.goods_per_agent).round() as usize;
    let value_dist = WeightedIndex::new(&params.value_weights).expect("weights validated");

    let n_hubs = ((active.len() as f64) * params.hub_fraction).round() as usize;
    let hubs: Vec<usize> = {
        let mut h: Vec<usize> = index::sample(&mut rng, active.len(), n_hubs)
            .iter()
            .map(|p| active[p])
            .collect();
        h.sort_unstable();
        h
    };
    let mut is_hub = vec![false; n];
    for &h in &hubs {
        is_hub[h] = true;
    }

    let lead_dist = WeightedIndex::new(active.iter().map(|&a| {
        if is_hub[a] {
            params.hub_productivity
        } else {
            1.0
        }
    }))
    .expect("positive lead weights");

    let mut interest = vec![Vec::new(); n];
    let mut goods = Vec::with_capacity(n_goods);
    for g in 0..n_goods {
        let lead_pos = if g < active.len() {
            g
        } else {
            lead_dist.sample(&mut rng)
        };
        let lead = active[lead_pos];
        let mut authors = vec![lead];
        let (pool, lo, hi, p) = if is_hub[lead] {
            (&hubs, 0, hubs.len() - 1, params.hub_coauthorship)
        } else if params.locality == 0 {
            (&active, 0, active.len() - 1, params.coauthorship)
        } else {
            let lo = lead_pos.saturating_sub(params.locality);
            (
                &active,
                lo,
                (lead_pos + params.locality).min(active.len() - 1),
                params.coauthorship,
            )
        };
        let window = hi - lo;
        while authors.len() < params.max_authors.min(window + 1) && rng.gen_bool(p) {
            // the window always holds an author not yet on the publication
            loop {
                let candidate = pool[rng.gen_range(lo..=hi)];
                if !authors.contains(&candidate) {
                    authors.push(candidate);
                    break;
                }
            }
        }
        for a in authors {
            interest[a].push(g);
        }
        let value = params.values[value_dist.sample(&mut rng)];
        goods.push(Good {
            id: format!("p{g}"),
            value: T::of(value),
        });
    }
    let agents = (0..n).map(|i| format!("a{i}")).collect();
    AllocationScenario::new(agents, goods, interest, params.k)
}

/// How [`extract_subgraph`] picks agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    /// Uniformly random distinct agents.
    #[default]
    Uniform,
    /// Grown from a random agent by repeatedly adding a random neighbour of
    /// the sample, restarting elsewhere when the sample's component is
    /// exhausted.
    Connected,
}

impl std::str::FromStr for SampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SampleMode::Uniform),
            "connected" => Ok(SampleMode::Connected),
            other => Err(Error::InvalidParameter(format!(
                "sample mode must be uniform or connected, not `{other}`"
            ))),
        }
    }
}

/// Restriction of `scenario` to `size` sampled agents, kept in their
/// original order.
pub fn extract_subgraph<T: Scalar>(
    scenario: &AllocationScenario<T>,
    size: usize,
    seed: u64,
    mode: SampleMode,
) -> Result<AllocationScenario<T>> {
    let n = scenario.n_agents();
    if size > n {
        return Err(Error::SubgraphTooLarge { size, n });
    }
    if size == n {
        return Ok(scenario.clone());
    }
    let mut rng = job_rng(seed, 1);
    let mut picked: Vec<usize> = match mode {
        SampleMode::Uniform => index::sample(&mut rng, n, size).into_vec(),
        SampleMode::Connected => grow_connected(&AgentsGraph::build(scenario), size, &mut rng),
    };
    picked.sort_unstable();
    Ok(scenario.restrict(&picked))
}

fn grow_connected<R: Rng>(graph: &AgentsGraph, size: usize, rng: &mut R) -> Vec<usize> {
    let n = graph.n_agents();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut starts = order.into_iter();
    let mut inside = Coalition::empty(n);
    let mut picked = Vec::with_capacity(size);
    let mut frontier: Vec<usize> = Vec::new();
    while picked.len() < size {
        let next = if frontier.is_empty() {
            match starts.find(|&a| !inside.contains(a)) {
                Some(a) => a,
                None => break,
            }
        } else {
            frontier.swap_remove(rng.gen_range(0..frontier.len()))
        };
        if inside.contains(next) {
            continue;
        }
        inside.insert(next);
        picked.push(next);
        frontier.extend(
            graph
                .neighbors(next)
                .iter()
                .filter(|&b| !inside.contains(b)),
        );
    }
    picked
}
