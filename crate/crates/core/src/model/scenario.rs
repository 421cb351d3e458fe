use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Good<T> {
    pub id: String,
    pub value: T,
}

/// Agents, indivisible valued goods, the interest map and the per-agent
/// capacity `k`.
///
/// Agent indices follow declaration order and are the bit positions used by
/// [`Coalition`](super::Coalition). Interest lists are kept sorted and
/// duplicate free.
#[derive(Debug, Clone)]
pub struct AllocationScenario<T> {
    agents: Vec<String>,
    goods: Vec<Good<T>>,
    interest: Vec<Vec<usize>>,
    capacity: usize,
    // derived
    interested: Vec<Vec<usize>>,
    by_rank: Vec<usize>,
    rank: Vec<u32>,
}

impl<T: PartialEq> PartialEq for AllocationScenario<T> {
    fn eq(&self, other: &Self) -> bool {
        self.agents == other.agents
            && self.goods == other.goods
            && self.interest == other.interest
            && self.capacity == other.capacity
    }
}

impl<T: Scalar> AllocationScenario<T> {
    pub fn new(
        agents: Vec<String>,
        goods: Vec<Good<T>>,
        mut interest: Vec<Vec<usize>>,
        capacity: usize,
    ) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidScenario(
                "capacity k must be at least 1".into(),
            ));
        }
        if interest.len() != agents.len() {
            return Err(Error::InvalidScenario(format!(
                "{} agents but {} interest sets",
                agents.len(),
                interest.len()
            )));
        }
        check_unique("agent", agents.iter())?;
        check_unique("good", goods.iter().map(|g| &g.id))?;
        for g in &goods {
            if !g.value.is_finite() || g.value < T::zero() {
                return Err(Error::InvalidScenario(format!(
                    "good `{}` has value {}, values must be finite and non-negative",
                    g.id, g.value
                )));
            }
        }
        for (a, set) in interest.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if let Some(&g) = set.last() {
                if g >= goods.len() {
                    return Err(Error::InvalidScenario(format!(
                        "agent `{}` refers to good index {g}, only {} goods declared",
                        agents[a],
                        goods.len()
                    )));
                }
            }
        }

        let mut interested = vec![Vec::new(); goods.len()];
        for (a, set) in interest.iter().enumerate() {
            for &g in set {
                interested[g].push(a);
            }
        }
        let mut by_rank: Vec<usize> = (0..goods.len()).collect();
        by_rank.sort_by(|&x, &y| {
            goods[y]
                .value
                .partial_cmp(&goods[x].value)
                .expect("values are finite")
                .then(x.cmp(&y))
        });
        let mut rank = vec![0u32; goods.len()];
        for (r, &g) in by_rank.iter().enumerate() {
            rank[g] = r as u32;
        }

        Ok(Self {
            agents,
            goods,
            interest,
            capacity,
            interested,
            by_rank,
            rank,
        })
    }

    /// Builds a scenario from string ids, mostly for tests and fixtures.
    pub fn from_ids(
        capacity: usize,
        goods: &[(&str, f64)],
        agents: &[(&str, &[&str])],
    ) -> Result<Self> {
        let file = ScenarioFile {
            k: capacity,
            goods: goods
                .iter()
                .map(|(id, value)| GoodEntry {
                    id: (*id).to_owned(),
                    value: *value,
                })
                .collect(),
            agents: agents
                .iter()
                .map(|(id, interest)| AgentEntry {
                    id: (*id).to_owned(),
                    interest: interest.iter().map(|s| (*s).to_owned()).collect(),
                })
                .collect(),
        };
        Self::from_file_repr(&file)
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_goods(&self) -> usize {
        self.goods.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn agent_id(&self, i: usize) -> &str {
        &self.agents[i]
    }

    pub fn agent_index(&self, id: &str) -> Option<usize> {
        self.agents.iter().position(|a| a == id)
    }

    pub fn goods(&self) -> &[Good<T>] {
        &self.goods
    }

    pub fn value(&self, g: usize) -> T {
        self.goods[g].value
    }

    /// Ω(i), sorted good indices.
    pub fn interest(&self, i: usize) -> &[usize] {
        &self.interest[i]
    }

    pub fn interests(&self) -> &[Vec<usize>] {
        &self.interest
    }

    /// Agents interested in good `g`, in increasing index order.
    pub fn interested(&self, g: usize) -> &[usize] {
        &self.interested[g]
    }

    /// Position of `g` in the canonical order: decreasing value, then
    /// increasing index.
    pub fn rank(&self, g: usize) -> u32 {
        self.rank[g]
    }

    pub fn good_at_rank(&self, r: u32) -> usize {
        self.by_rank[r as usize]
    }

    /// Sum of the `count` most valuable goods in Ω(i), skipping `except`.
    pub fn top_values(&self, i: usize, count: usize, except: Option<usize>) -> T {
        let mut ranks: Vec<u32> = self.interest[i]
            .iter()
            .filter(|&&g| Some(g) != except)
            .map(|&g| self.rank[g])
            .collect();
        ranks.sort_unstable();
        ranks
            .iter()
            .take(count)
            .map(|&r| self.goods[self.by_rank[r as usize]].value)
            .fold(T::zero(), |acc, v| acc + v)
    }

    /// Restricts the scenario to `agents` (in the given order). The goods
    /// kept are exactly those some kept agent is interested in, in their
    /// original order.
    pub fn restrict(&self, agents: &[usize]) -> Self {
        let mut keep = vec![false; self.goods.len()];
        for &a in agents {
            for &g in &self.interest[a] {
                keep[g] = true;
            }
        }
        let mut remap = vec![usize::MAX; self.goods.len()];
        let mut goods = Vec::new();
        for (g, good) in self.goods.iter().enumerate() {
            if keep[g] {
                remap[g] = goods.len();
                goods.push(good.clone());
            }
        }
        let ids = agents.iter().map(|&a| self.agents[a].clone()).collect();
        let interest = agents
            .iter()
            .map(|&a| self.interest[a].iter().map(|&g| remap[g]).collect())
            .collect();
        Self::new(ids, goods, interest, self.capacity)
            .expect("restriction of a valid scenario is valid")
    }

    /// Same agents and goods with a replaced interest map.
    pub fn with_interest(&self, interest: Vec<Vec<usize>>) -> Self {
        Self::new(
            self.agents.clone(),
            self.goods.clone(),
            interest,
            self.capacity,
        )
        .expect("interest map over existing goods is valid")
    }

    /// Drops the goods for which `keep` is false from the goods list and
    /// from every interest set.
    pub fn retain_goods(&self, keep: impl Fn(usize, &Good<T>) -> bool) -> Self {
        let mut remap = vec![usize::MAX; self.goods.len()];
        let mut goods = Vec::new();
        for (g, good) in self.goods.iter().enumerate() {
            if keep(g, good) {
                remap[g] = goods.len();
                goods.push(good.clone());
            }
        }
        let interest = self
            .interest
            .iter()
            .map(|set| {
                set.iter()
                    .filter(|&&g| remap[g] != usize::MAX)
                    .map(|&g| remap[g])
                    .collect()
            })
            .collect();
        Self::new(self.agents.clone(), goods, interest, self.capacity)
            .expect("subset of goods is valid")
    }

    /// Converts the values to another scalar type.
    pub fn cast<U: Scalar>(&self) -> AllocationScenario<U> {
        let goods = self
            .goods
            .iter()
            .map(|g| Good {
                id: g.id.clone(),
                value: U::of(g.value.as_f64()),
            })
            .collect();
        AllocationScenario::new(
            self.agents.clone(),
            goods,
            self.interest.clone(),
            self.capacity,
        )
        .expect("cast preserves validity")
    }

    pub fn from_file_repr(file: &ScenarioFile) -> Result<Self> {
        let mut index = HashMap::with_capacity(file.goods.len());
        for (g, entry) in file.goods.iter().enumerate() {
            if index.insert(entry.id.as_str(), g).is_some() {
                return Err(Error::InvalidScenario(format!(
                    "duplicate good id `{}`",
                    entry.id
                )));
            }
        }
        let goods = file
            .goods
            .iter()
            .map(|e| Good {
                id: e.id.clone(),
                value: T::of(e.value),
            })
            .collect();
        let mut interest = Vec::with_capacity(file.agents.len());
        for agent in &file.agents {
            let mut set = Vec::with_capacity(agent.interest.len());
            for gid in &agent.interest {
                match index.get(gid.as_str()) {
                    Some(&g) => set.push(g),
                    None => {
                        return Err(Error::InvalidScenario(format!(
                            "agent `{}` is interested in undeclared good `{gid}`",
                            agent.id
                        )))
                    }
                }
            }
            interest.push(set);
        }
        let agents = file.agents.iter().map(|a| a.id.clone()).collect();
        Self::new(agents, goods, interest, file.k)
    }

    pub fn to_file_repr(&self) -> ScenarioFile {
        ScenarioFile {
            k: self.capacity,
            goods: self
                .goods
                .iter()
                .map(|g| GoodEntry {
                    id: g.id.clone(),
                    value: g.value.as_f64(),
                })
                .collect(),
            agents: self
                .agents
                .iter()
                .zip(&self.interest)
                .map(|(id, set)| AgentEntry {
                    id: id.clone(),
                    interest: set.iter().map(|&g| self.goods[g].id.clone()).collect(),
                })
                .collect(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(s)?;
        Self::from_file_repr(&file)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file_repr()).expect("scenario serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json_string();
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

fn check_unique<'a>(what: &str, ids: impl Iterator<Item = &'a String>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidScenario(format!(
                "duplicate {what} id `{id}`"
            )));
        }
    }
    Ok(())
}

/// Canonical on-disk scenario: `{"k": .., "goods": [..], "agents": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub k: usize,
    pub goods: Vec<GoodEntry>,
    pub agents: Vec<AgentEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodEntry {
    pub id: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub id: String,
    pub interest: Vec<String>,
}
