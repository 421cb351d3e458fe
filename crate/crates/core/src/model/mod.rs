//! Scenarios, coalitions, the agents graph and the characteristic function.

mod cache;
mod coalition;
mod graph;
mod report;
mod scenario;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub use cache::{CacheStats, CharacteristicCache};
pub use coalition::{Coalition, Members};
pub use graph::AgentsGraph;
pub use report::{
    AgentError, AgentRecord, Comparison, Method, RecordKind, ReportMeta, ShapleyReport,
};
pub use scenario::{AgentEntry, AllocationScenario, Good, GoodEntry, ScenarioFile};

use crate::error::{Error, Result};
use crate::matching::{self, DynamicMatching, Selection};
use crate::scalar::Scalar;

/// The coalitional game `(N, opt)` of a scenario together with its agents
/// graph, solo selections and a characteristic cache.
///
/// Marginal contributions are computed on the part of the coalition that is
/// connected to the agent through shared goods: agents in other parts of the
/// graph cannot change what the agent adds.
pub struct AllocationGame<T> {
    scenario: AllocationScenario<T>,
    graph: AgentsGraph,
    cache: CharacteristicCache<T>,
    singles: Vec<Arc<Selection<T>>>,
    matchings: AtomicU64,
}

impl<T: Scalar> AllocationGame<T> {
    pub fn new(scenario: AllocationScenario<T>) -> Self {
        Self::with_cache(scenario, CharacteristicCache::new())
    }

    pub fn with_cache(scenario: AllocationScenario<T>, cache: CharacteristicCache<T>) -> Self {
        let graph = AgentsGraph::build(&scenario);
        let n = scenario.n_agents();
        let singles = (0..n)
            .map(|i| {
                Arc::new(matching::optimal_selection(
                    &scenario,
                    &Coalition::singleton(n, i),
                ))
            })
            .collect();
        Self {
            scenario,
            graph,
            cache,
            singles,
            matchings: AtomicU64::new(n as u64),
        }
    }

    pub fn scenario(&self) -> &AllocationScenario<T> {
        &self.scenario
    }

    pub fn graph(&self) -> &AgentsGraph {
        &self.graph
    }

    pub fn cache(&self) -> &CharacteristicCache<T> {
        &self.cache
    }

    pub fn n_agents(&self) -> usize {
        self.scenario.n_agents()
    }

    /// Number of matching computations performed so far.
    pub fn matchings(&self) -> u64 {
        self.matchings.load(Ordering::Relaxed)
    }

    pub fn empty(&self) -> Coalition {
        Coalition::empty(self.n_agents())
    }

    pub fn grand(&self) -> Coalition {
        Coalition::full(self.n_agents())
    }

    fn compute(&self, c: &Coalition) -> Selection<T> {
        self.matchings.fetch_add(1, Ordering::Relaxed);
        matching::optimal_selection(&self.scenario, c)
    }

    /// Optimal selection for `c`, through the cache.
    pub fn selection(&self, c: &Coalition) -> Arc<Selection<T>> {
        match c.len() {
            0 => Arc::new(Selection::empty()),
            1 => self.singles[c.iter().next().expect("one member")].clone(),
            _ => self.cache.get_or_insert_with(c, || self.compute(c)),
        }
    }

    /// Optimal selection for `c`, bypassing the cache.
    pub fn selection_uncached(&self, c: &Coalition) -> Arc<Selection<T>> {
        match c.len() {
            0 => Arc::new(Selection::empty()),
            1 => self.singles[c.iter().next().expect("one member")].clone(),
            _ => Arc::new(self.compute(c)),
        }
    }

    /// `v(c) = opt(c)`; zero for the empty coalition.
    pub fn char_value(&self, c: &Coalition) -> T {
        self.selection(c).value()
    }

    /// `opt({i})`.
    pub fn singleton_value(&self, i: usize) -> T {
        self.singles[i].value()
    }

    pub fn grand_value(&self) -> T {
        self.char_value(&self.grand())
    }

    /// `v(c ∪ {i}) - v(c)`; rejects `i ∈ c`.
    pub fn marginal_contribution(&self, i: usize, c: &Coalition) -> Result<T> {
        if i >= self.n_agents() {
            return Err(Error::AgentOutOfRange {
                index: i,
                n: self.n_agents(),
            });
        }
        if c.contains(i) {
            return Err(Error::AgentInCoalition(i));
        }
        Ok(self.marginal(i, c))
    }

    /// Marginal contribution through the cache. `i` must not be in `c`.
    pub fn marginal(&self, i: usize, c: &Coalition) -> T {
        self.marginal_by(i, c, |k| self.selection(k))
    }

    /// Marginal contribution without touching the cache.
    pub fn marginal_uncached(&self, i: usize, c: &Coalition) -> T {
        self.marginal_by(i, c, |k| self.selection_uncached(k))
    }

    fn marginal_by(
        &self,
        i: usize,
        c: &Coalition,
        select: impl Fn(&Coalition) -> Arc<Selection<T>>,
    ) -> T {
        debug_assert!(!c.contains(i));
        let local = self.graph.reachable_within(i, c);
        if local.is_empty() {
            return self.singles[i].value();
        }
        let with = select(&local.with(i));
        let without = select(&local);
        with.marginal_over(&without, &self.scenario)
    }

    /// `marg(i, c)` from one optimal allocation of the part of `c` that
    /// interacts with `i`, extended by `i` with alternating paths. Agrees
    /// with [`marginal`](Self::marginal) up to summation rounding.
    pub fn marginal_incremental(
        &self,
        i: usize,
        c: &Coalition,
        dm: &mut DynamicMatching<'_, T>,
    ) -> T {
        debug_assert!(!c.contains(i));
        let local = self.graph.reachable_within(i, c);
        if local.is_empty() {
            return self.singles[i].value();
        }
        self.matchings.fetch_add(1, Ordering::Relaxed);
        matching::with_matcher(|m| dm.reset(&local, m));
        dm.add_agent(i)
    }

    /// `marg({i}, N) = opt(N) - opt(N \ {i})`.
    pub fn grand_marginal(&self, i: usize) -> T {
        self.marginal(i, &self.grand().without(i))
    }

    /// True when no neighbour of `j` is in `c`, so `j` adds `opt({j})`.
    pub fn is_disconnected_from(&self, j: usize, c: &Coalition) -> bool {
        !self.graph.neighbors(j).intersects(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{random_scenario, running_example};
    use crate::oracle::brute_force_opt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coalition(members: &[usize]) -> Coalition {
        Coalition::from_members(3, members.iter().copied())
    }

    #[test]
    fn running_example_worths() {
        let game = AllocationGame::new(running_example());
        let expect = [
            (&[0, 1, 2][..], 6.0),
            (&[0, 1], 5.0),
            (&[0, 2], 4.0),
            (&[1, 2], 4.0),
            (&[0], 3.0),
            (&[1], 3.0),
            (&[2], 1.0),
            (&[], 0.0),
        ];
        for (members, v) in expect {
            assert_eq!(game.char_value(&coalition(members)), v, "{members:?}");
        }
    }

    #[test]
    fn running_example_marginals() {
        let game = AllocationGame::new(running_example());
        assert_eq!(
            game.marginal_contribution(0, &coalition(&[1, 2])).unwrap(),
            2.0
        );
        assert_eq!(game.marginal_contribution(2, &coalition(&[])).unwrap(), 1.0);
        assert!(matches!(
            game.marginal_contribution(0, &coalition(&[0])),
            Err(Error::AgentInCoalition(0))
        ));
    }

    #[test]
    fn agent_without_interests_adds_nothing() {
        let s = AllocationScenario::<f64>::from_ids(1, &[("g", 2.0)], &[("a", &["g"]), ("b", &[])])
            .unwrap();
        let game = AllocationGame::new(s);
        for mask in [0u64, 1] {
            assert_eq!(
                game.marginal_contribution(1, &Coalition::from_mask(2, mask))
                    .unwrap(),
                0.0
            );
        }
    }

    fn random_games(seed: u64, count: usize) -> Vec<AllocationGame<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|t| {
                AllocationGame::new(random_scenario(
                    &mut rng,
                    4 + t % 5,
                    6 + t % 5,
                    1 + t % 2,
                    0.3,
                ))
            })
            .collect()
    }

    #[test]
    fn opt_is_monotone() {
        for game in random_games(11, 30) {
            let n = game.n_agents();
            for a in 0..1u64 << n {
                for b in 0..1u64 << n {
                    if a & b == a {
                        let (ca, cb) = (Coalition::from_mask(n, a), Coalition::from_mask(n, b));
                        assert!(game.char_value(&ca) <= game.char_value(&cb) + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn marginals_are_anti_monotone() {
        for game in random_games(12, 30) {
            let n = game.n_agents();
            for i in 0..n {
                let bit = 1u64 << i;
                for a in (0..1u64 << n).filter(|m| m & bit == 0) {
                    for b in (0..1u64 << n).filter(|m| m & bit == 0 && m & a == a) {
                        let small = game.marginal(i, &Coalition::from_mask(n, a));
                        let large = game.marginal(i, &Coalition::from_mask(n, b));
                        assert!(
                            large <= small + 1e-12,
                            "i={i} {a:b} ⊆ {b:b}: {large} > {small}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn opt_is_superadditive_on_disjoint_coalitions() {
        for game in random_games(13, 30) {
            let n = game.n_agents();
            for a in 0..1u64 << n {
                let rest = !a & ((1u64 << n) - 1);
                let mut b = rest;
                loop {
                    let (ca, cb) = (Coalition::from_mask(n, a), Coalition::from_mask(n, b));
                    let joint = game.char_value(&Coalition::from_mask(n, a | b));
                    assert!(game.char_value(&ca) + game.char_value(&cb) >= joint - 1e-12);
                    if b == 0 {
                        break;
                    }
                    b = (b - 1) & rest;
                }
            }
        }
    }

    #[test]
    fn cache_is_transparent() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let s: AllocationScenario<f64> = random_scenario(&mut rng, 7, 9, 2, 0.3);
            let cached = AllocationGame::new(s.clone());
            let plain = AllocationGame::with_cache(s.clone(), CharacteristicCache::disabled());
            for mask in 0..1u64 << 7 {
                let c = Coalition::from_mask(7, mask);
                assert_eq!(
                    cached.char_value(&c).to_bits(),
                    plain.char_value(&c).to_bits()
                );
                // second lookup is served by the cache
                assert_eq!(
                    cached.char_value(&c).to_bits(),
                    plain.char_value(&c).to_bits()
                );
                assert!((cached.char_value(&c) - brute_force_opt(&s, &c)).abs() < 1e-9);
                for i in (0..7).filter(|&i| !c.contains(i)) {
                    assert_eq!(
                        cached.marginal(i, &c).to_bits(),
                        plain.marginal(i, &c).to_bits()
                    );
                }
            }
            assert!(cached.cache().stats().hits > 0);
        }
    }

    #[test]
    fn localized_marginal_matches_plain_difference() {
        for game in random_games(15, 30) {
            let n = game.n_agents();
            for mask in 0..1u64 << n {
                let c = Coalition::from_mask(n, mask);
                for i in (0..n).filter(|&i| !c.contains(i)) {
                    let direct = brute_force_opt(game.scenario(), &c.with(i))
                        - brute_force_opt(game.scenario(), &c);
                    assert!((game.marginal(i, &c) - direct).abs() < 1e-9);
                }
            }
        }
    }
}
