//! Game simplifications that preserve every agent's Shapley value.
//!
//! [`run_pipeline`] applies, in order:
//!
//! 1. agents with an empty interest set are resolved to 0;
//! 2. goods of value 0 are removed ([`strip_null_goods`]); they never change
//!    a coalition's worth but can connect otherwise unrelated agents;
//! 3. agents whose solo optimum equals their marginal contribution to the
//!    rest of the game are resolved to their solo optimum, repeatedly until
//!    no more qualify ([`separate_singletons`]);
//! 4. the remaining agents are split into connected components of the agents
//!    graph, each an independent game ([`split_components`]);
//! 5. inside each component, a good `g` is dropped from `Ω(i)` when even the
//!    best bundle containing it, `val(g)` plus the `k-1` best other goods of
//!    `i`, is worth less than `marg({i}, N)`: no optimal allocation of any
//!    coalition can then give `g` to `i` ([`prune_useless_goods`]);
//! 6. components are split again, since pruning may disconnect them.
//!
//! All agents keep their original index throughout: stages narrow an
//! "active" coalition over one scenario, and components are only restricted
//! into standalone scenarios at the end.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::matching::{with_matcher, DynamicMatching};
use crate::model::{AgentsGraph, AllocationGame, AllocationScenario, Coalition, Method};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedAgent<T> {
    pub agent: usize,
    pub method: Method,
    pub value: T,
}

/// An independent sub-game. `agents[j]` is the original index of the
/// component's agent `j`.
#[derive(Debug, Clone)]
pub struct Component<T> {
    pub agents: Vec<usize>,
    pub scenario: AllocationScenario<T>,
}

impl<T> Component<T> {
    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub agents: usize,
    pub goods: usize,
    pub empty_interest_agents: usize,
    pub null_goods: usize,
    pub separable_agents: usize,
    pub separation_rounds: usize,
    pub components_before_pruning: usize,
    pub pruned_pairs: usize,
    pub components: usize,
    pub largest_component: usize,
}

#[derive(Debug, Clone)]
pub struct PreprocessOutcome<T> {
    pub n_agents: usize,
    pub resolved: Vec<ResolvedAgent<T>>,
    pub components: Vec<Component<T>>,
    /// `(agent, good)` pairs removed from interest sets, as original agent
    /// index and good id.
    pub pruned: Vec<(usize, String)>,
    pub counts: StageCounts,
    pub stage_secs: BTreeMap<String, f64>,
}

impl<T: Scalar> PreprocessOutcome<T> {
    /// Component size → number of components.
    pub fn histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for c in &self.components {
            *h.entry(c.len()).or_insert(0) += 1;
        }
        h
    }

    pub fn resolved_fraction(&self) -> f64 {
        if self.n_agents == 0 {
            return 1.0;
        }
        self.resolved.len() as f64 / self.n_agents as f64
    }

    pub fn largest_component(&self) -> Option<&Component<T>> {
        self.components
            .iter()
            .max_by_key(|c| (c.len(), std::cmp::Reverse(c.agents[0])))
    }

    /// Assembles a value for every original agent from the resolved agents
    /// and one value vector per component (in component order).
    pub fn scatter(&self, per_component: &[Vec<T>]) -> Vec<T> {
        assert_eq!(
            per_component.len(),
            self.components.len(),
            "one vector per component"
        );
        let mut out = vec![T::zero(); self.n_agents];
        for r in &self.resolved {
            out[r.agent] = r.value;
        }
        for (comp, values) in self.components.iter().zip(per_component) {
            for (&a, &v) in comp.agents.iter().zip(values) {
                out[a] = v;
            }
        }
        out
    }

    pub fn summary(&self, original: &AllocationScenario<T>) -> PreprocessSummary {
        PreprocessSummary {
            counts: self.counts.clone(),
            histogram: self.histogram(),
            resolved: self
                .resolved
                .iter()
                .map(|r| ResolvedEntry {
                    agent: original.agent_id(r.agent).to_owned(),
                    method: r.method,
                    value: r.value.as_f64(),
                })
                .collect(),
            components: self
                .components
                .iter()
                .map(|c| ComponentEntry {
                    agents: c.scenario.agents().to_vec(),
                    goods: c.scenario.n_goods(),
                })
                .collect(),
            pruned: self
                .pruned
                .iter()
                .map(|(a, g)| PrunedEntry {
                    agent: original.agent_id(*a).to_owned(),
                    good: g.clone(),
                })
                .collect(),
            stage_secs: self.stage_secs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedEntry {
    pub agent: String,
    pub method: Method,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentEntry {
    pub agents: Vec<String>,
    pub goods: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedEntry {
    pub agent: String,
    pub good: String,
}

/// JSON-friendly view of a [`PreprocessOutcome`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub counts: StageCounts,
    pub histogram: BTreeMap<usize, usize>,
    pub resolved: Vec<ResolvedEntry>,
    pub components: Vec<ComponentEntry>,
    pub pruned: Vec<PrunedEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub stage_secs: BTreeMap<String, f64>,
}

pub fn strip_null_goods<T: Scalar>(scenario: &AllocationScenario<T>) -> AllocationScenario<T> {
    scenario.retain_goods(|_, g| g.value > T::zero())
}

/// One scenario per connected component of the agents graph.
pub fn split_components<T: Scalar>(scenario: &AllocationScenario<T>) -> Vec<Component<T>> {
    AgentsGraph::build(scenario)
        .components()
        .into_iter()
        .map(|agents| Component {
            scenario: scenario.restrict(&agents),
            agents,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Separation<T> {
    /// `(agent, opt({agent}))` in the order found.
    pub resolved: Vec<(usize, T)>,
    pub remaining: Coalition,
    pub rounds: usize,
}

/// Resolves agents of `active` with `marg({i}, active \ {i}) = opt({i})`,
/// repeating on the shrinking remainder until none qualifies.
///
/// All agents found in one round are removed together: if `i` and `j` both
/// qualify, `j` still qualifies once `i` is gone, because marginals only grow
/// as the coalition shrinks.
pub fn separate_singletons<T: Scalar>(
    game: &AllocationGame<T>,
    active: &Coalition,
) -> Separation<T> {
    let mut remaining = active.clone();
    let mut resolved = Vec::new();
    let mut rounds = 0;
    loop {
        rounds += 1;
        let found: Vec<usize> = marginals_within(game, &remaining)
            .into_iter()
            .filter(|&(i, marg)| {
                let solo = game.singleton_value(i);
                marg >= solo - T::reassociation_slack(solo)
            })
            .map(|(i, _)| i)
            .collect();
        if found.is_empty() {
            break;
        }
        for &i in &found {
            remaining.remove(i);
            resolved.push((i, game.singleton_value(i)));
        }
    }
    Separation {
        resolved,
        remaining,
        rounds,
    }
}

/// `marg(i, active \ i)` for every member, from one optimal allocation of
/// `active` that each agent leaves and rejoins in turn.
fn marginals_within<T: Scalar>(game: &AllocationGame<T>, active: &Coalition) -> Vec<(usize, T)> {
    let scenario = game.scenario();
    let mut dm = with_matcher(|m| DynamicMatching::from_coalition(scenario, active, m));
    active
        .iter()
        .map(|i| {
            let marg = dm.remove_agent(i);
            dm.add_agent(i);
            (i, marg)
        })
        .collect()
}

/// Interest sets of `active` agents with useless goods removed, and the
/// removed `(agent, good)` pairs. Agents outside `active` keep their sets.
pub fn prune_within<T: Scalar>(
    game: &AllocationGame<T>,
    active: &Coalition,
) -> (Vec<Vec<usize>>, Vec<(usize, usize)>) {
    let scenario = game.scenario();
    let k = scenario.capacity();
    let mut interest = scenario.interests().to_vec();
    let mut pruned = Vec::new();
    for (i, marg) in marginals_within(game, active) {
        if marg <= T::zero() {
            continue;
        }
        let cut = marg - T::reassociation_slack(marg);
        // decisions are all taken against the original Ω(i)
        let useless: Vec<usize> = scenario
            .interest(i)
            .iter()
            .copied()
            .filter(|&g| scenario.value(g) + scenario.top_values(i, k - 1, Some(g)) < cut)
            .collect();
        if !useless.is_empty() {
            interest[i].retain(|g| !useless.contains(g));
            pruned.extend(useless.into_iter().map(|g| (i, g)));
        }
    }
    (interest, pruned)
}

/// Removes useless goods from every agent's interest set, treating the whole
/// scenario as the grand coalition.
pub fn prune_useless_goods<T: Scalar>(scenario: &AllocationScenario<T>) -> AllocationScenario<T> {
    let game = AllocationGame::new(scenario.clone());
    let (interest, _) = prune_within(&game, &game.grand());
    scenario.with_interest(interest)
}

pub fn run_pipeline<T: Scalar>(scenario: &AllocationScenario<T>) -> PreprocessOutcome<T> {
    let n = scenario.n_agents();
    let mut counts = StageCounts {
        agents: n,
        goods: scenario.n_goods(),
        ..StageCounts::default()
    };
    let mut stage_secs = BTreeMap::new();
    let mut resolved = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, clock: &mut Instant| {
        stage_secs.insert(name.to_owned(), clock.elapsed().as_secs_f64());
        *clock = Instant::now();
    };

    let mut active = Coalition::empty(n);
    for i in 0..n {
        if scenario.interest(i).is_empty() {
            resolved.push(ResolvedAgent {
                agent: i,
                method: Method::EmptyInterest,
                value: T::zero(),
            });
        } else {
            active.insert(i);
        }
    }
    counts.empty_interest_agents = resolved.len();
    lap("empty-interest", &mut clock);

    let stripped = strip_null_goods(scenario);
    counts.null_goods = scenario.n_goods() - stripped.n_goods();
    lap("null-goods", &mut clock);

    let game = AllocationGame::new(stripped);
    let sep = separate_singletons(&game, &active);
    counts.separable_agents = sep.resolved.len();
    counts.separation_rounds = sep.rounds;
    resolved.extend(sep.resolved.iter().map(|&(agent, value)| ResolvedAgent {
        agent,
        method: Method::Separable,
        value,
    }));
    let active = sep.remaining;
    lap("separation", &mut clock);

    counts.components_before_pruning = game.graph().components_within(&active).len();
    lap("components", &mut clock);

    let (interest, pruned_pairs) = prune_within(&game, &active);
    let pruned_scenario = game.scenario().with_interest(interest);
    counts.pruned_pairs = pruned_pairs.len();
    let pruned = pruned_pairs
        .iter()
        .map(|&(a, g)| (a, game.scenario().goods()[g].id.clone()))
        .collect();
    drop(game);
    lap("pruning", &mut clock);

    let graph = AgentsGraph::build(&pruned_scenario);
    let components: Vec<Component<T>> = graph
        .components_within(&active)
        .into_iter()
        .map(|agents| Component {
            scenario: pruned_scenario.restrict(&agents),
            agents,
        })
        .collect();
    counts.components = components.len();
    counts.largest_component = components.iter().map(Component::len).max().unwrap_or(0);
    lap("resplit", &mut clock);

    resolved.sort_by_key(|r| r.agent);
    PreprocessOutcome {
        n_agents: n,
        resolved,
        components,
        pruned,
        counts,
        stage_secs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{exact_shapley, ExactConfig};
    use crate::fixtures::{random_disjoint_scenario, random_scenario, running_example};
    use crate::oracle::relative_gap;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type S = AllocationScenario<f64>;

    fn exact(s: &S) -> Vec<f64> {
        exact_shapley(&AllocationGame::new(s.clone()), &ExactConfig::default())
            .unwrap()
            .values
    }

    fn pipeline_values(s: &S) -> Vec<f64> {
        let out = run_pipeline(s);
        let per: Vec<Vec<f64>> = out.components.iter().map(|c| exact(&c.scenario)).collect();
        out.scatter(&per)
    }

    fn assert_close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!(
                relative_gap(*x, *y) < 1e-9 || (x - y).abs() < 1e-12,
                "{a:?} vs {b:?}"
            );
        }
    }

    #[test]
    fn shared_null_good_disconnects_after_stripping() {
        let s = S::from_ids(
            1,
            &[("z", 0.0)],
            &[("a", &["z"]), ("b", &["z"]), ("c", &["z"])],
        )
        .unwrap();
        assert_eq!(AgentsGraph::build(&s).edge_count(), 0);
        let stripped = strip_null_goods(&s);
        assert_eq!(stripped.n_goods(), 0);
        assert_eq!(AgentsGraph::build(&stripped).edge_count(), 0);
        let out = run_pipeline(&s);
        assert!(out.components.is_empty());
        assert_eq!(out.counts.null_goods, 1);
    }

    #[test]
    fn stripping_without_null_goods_is_identity() {
        let s = S::from_ids(
            1,
            &[("g", 1.0), ("h", 2.0)],
            &[("a", &["g", "h"]), ("b", &["h"])],
        )
        .unwrap();
        assert_eq!(strip_null_goods(&s).to_json_string(), s.to_json_string());
    }

    #[test]
    fn stripping_keeps_shapley_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let s: S = random_scenario(&mut rng, 8, 10, 2, 0.3);
            assert_close(&exact(&s), &exact(&strip_null_goods(&s)));
        }
    }

    #[test]
    fn null_good_split_keeps_worths() {
        // replacing a shared zero good by private zero goods changes no worth
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..20 {
            let base: S = random_scenario(&mut rng, 6, 8, 2, 0.3);
            let mut file = base.to_file_repr();
            file.goods.push(crate::model::GoodEntry {
                id: "zero".into(),
                value: 0.0,
            });
            for a in &mut file.agents {
                a.interest.push("zero".into());
            }
            let shared = S::from_file_repr(&file).unwrap();
            let mut file = base.to_file_repr();
            for a in file.agents.iter_mut() {
                let id = format!("zero-{}", a.id);
                file.goods.push(crate::model::GoodEntry {
                    id: id.clone(),
                    value: 0.0,
                });
                a.interest.push(id);
            }
            let split = S::from_file_repr(&file).unwrap();
            let (g1, g2) = (AllocationGame::new(shared), AllocationGame::new(split));
            for mask in 0..64u64 {
                let c = Coalition::from_mask(6, mask);
                assert_eq!(g1.char_value(&c), g2.char_value(&c));
            }
        }
    }

    #[test]
    fn edgeless_graph_splits_into_singletons() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let s: S = random_disjoint_scenario(&mut rng, 5, 2);
        let comps = split_components(&s);
        assert_eq!(comps.len(), 5);
        assert!(comps.iter().all(|c| c.len() == 1));
    }

    #[test]
    fn running_example_is_one_component() {
        let comps = split_components(&strip_null_goods(&running_example()));
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].agents, vec![0, 1, 2]);
    }

    #[test]
    fn component_values_concatenate_to_whole_game_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..20 {
            let s = strip_null_goods(&random_scenario::<f64, _>(&mut rng, 10, 14, 2, 0.12));
            let whole = exact(&s);
            let mut joined = vec![0.0; 10];
            for c in split_components(&s) {
                for (&a, v) in c.agents.iter().zip(exact(&c.scenario)) {
                    joined[a] = v;
                }
            }
            assert_close(&whole, &joined);
        }
    }

    #[test]
    fn isolated_agent_is_separable() {
        let s = S::from_ids(
            1,
            &[("g", 1.0), ("h", 2.0), ("x", 5.0)],
            &[("a", &["g"]), ("b", &["g", "h"]), ("c", &["x"])],
        )
        .unwrap();
        let game = AllocationGame::new(s);
        let sep = separate_singletons(&game, &game.grand());
        assert!(sep.resolved.contains(&(2, 5.0)));
    }

    #[test]
    fn competitors_for_a_shared_good_are_not_separable() {
        let s = S::from_ids(
            2,
            &[("shared", 1.0), ("pa", 1.0), ("pb", 1.0)],
            &[("a", &["shared", "pa"]), ("b", &["shared", "pb"])],
        )
        .unwrap();
        let game = AllocationGame::new(s);
        assert_eq!(game.singleton_value(0), 2.0);
        assert_eq!(game.grand_marginal(0), 1.0);
        let sep = separate_singletons(&game, &game.grand());
        assert!(sep.resolved.is_empty());
        assert_eq!(sep.remaining.len(), 2);
    }

    #[test]
    fn separated_agents_get_their_solo_value_and_constant_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let mut seen = 0;
        for _ in 0..30 {
            let s: S = random_scenario(&mut rng, 8, 12, 2, 0.2);
            let game = AllocationGame::new(s.clone());
            let sep = separate_singletons(&game, &game.grand());
            let sv = exact(&s);
            for &(i, v) in &sep.resolved {
                seen += 1;
                assert!(relative_gap(sv[i], v) < 1e-9 || (sv[i] - v).abs() < 1e-12);
                for mask in 0..256u64 {
                    if mask >> i & 1 == 0 {
                        let c = Coalition::from_mask(8, mask);
                        assert!((game.marginal(i, &c) - v).abs() < 1e-12);
                    }
                }
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn single_slot_prune_uses_an_empty_top_sum() {
        // k = 1, b only wants h: opt(N) = h + g = 4, opt({b}) = 3, so
        // marg(a, {b}) = 1 and only c (0.5 < 1) is useless to a.
        let s = S::from_ids(
            1,
            &[("g", 1.0), ("h", 3.0), ("c", 0.5)],
            &[("a", &["g", "h", "c"]), ("b", &["h"])],
        )
        .unwrap();
        let game = AllocationGame::new(s.clone());
        assert_eq!(game.grand_marginal(0), 1.0);
        let pruned = prune_useless_goods(&s);
        let kept: Vec<&str> = pruned
            .interest(0)
            .iter()
            .map(|&g| pruned.goods()[g].id.as_str())
            .collect();
        assert_eq!(kept, vec!["g", "h"]);
    }

    #[test]
    fn zero_marginal_prunes_nothing() {
        let s = S::from_ids(
            1,
            &[("g", 2.0), ("h", 0.5)],
            &[("a", &["g", "h"]), ("b", &["g"]), ("c", &["g"])],
        )
        .unwrap();
        let game = AllocationGame::new(s.clone());
        assert_eq!(game.grand_marginal(1), 0.0);
        let pruned = prune_useless_goods(&s);
        assert_eq!(pruned.interest(1), s.interest(1));
    }

    #[test]
    fn pruning_keeps_shapley_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let mut total = 0;
        for t in 0..40 {
            let s: S = random_scenario(&mut rng, 8, 12, 1 + t % 3, 0.3);
            let p = prune_useless_goods(&s);
            total += s.interests().iter().map(Vec::len).sum::<usize>()
                - p.interests().iter().map(Vec::len).sum::<usize>();
            assert_close(&exact(&s), &exact(&p));
        }
        assert!(total > 0, "pruning never triggered");
    }

    #[test]
    fn disjoint_agents_are_all_resolved() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let s: S = random_disjoint_scenario(&mut rng, 12, 3);
        let out = run_pipeline(&s);
        assert!(out.components.is_empty());
        assert_eq!(out.resolved.len(), 12);
        assert_close(&pipeline_values(&s), &exact(&s));
    }

    #[test]
    fn every_agent_lands_exactly_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        for _ in 0..20 {
            let s: S = random_scenario(&mut rng, 30, 40, 2, 0.05);
            let out = run_pipeline(&s);
            let mut seen = [0; 30];
            for r in &out.resolved {
                seen[r.agent] += 1;
            }
            for c in &out.components {
                for &a in &c.agents {
                    seen[a] += 1;
                }
            }
            assert!(seen.iter().all(|&x| x == 1));
        }
    }

    #[test]
    fn pipeline_preserves_shapley_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        for t in 0..60 {
            let n = 2 + t % 11;
            let goods = 3 + rng.gen_range(0..12);
            let mut s: S = random_scenario(&mut rng, n, goods, 1 + t % 2, 0.25);
            if t % 4 == 0 {
                let mut interest = s.interests().to_vec();
                interest[0].clear();
                s = s.with_interest(interest);
            }
            assert_close(&pipeline_values(&s), &exact(&s));
        }
    }

    #[test]
    fn summary_serializes() {
        let out = run_pipeline(&running_example());
        let json = serde_json::to_string(&out.summary(&running_example())).unwrap();
        let back: PreprocessSummary = serde_json::from_str(&json).unwrap();
        assert_eq!(back.counts.agents, 3);
        assert_eq!(back.counts.null_goods, 1);
    }
}
