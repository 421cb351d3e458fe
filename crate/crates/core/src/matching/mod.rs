//! Optimal allocations for a coalition.
//!
//! Every agent is expanded into `k` identical slots and goods are matched to
//! slots. Because an edge's weight is the value of its good, the goods that
//! can be allocated together form a transversal matroid, and a maximum value
//! allocation is obtained by scanning goods in decreasing value and keeping
//! each good that can still be matched (an augmenting path exists). Each scan
//! step is a Kuhn augmentation over agent slots, so the kernel is
//! `O(goods * edges)` and never compares sums of floats.
//!
//! The kept set of goods, the [`Selection`], depends only on the coalition and
//! the canonical good order, not on how slots were assigned. Two coalitions
//! whose goods never interact therefore have selections that are disjoint
//! unions of their parts, which keeps marginal contributions computed by set
//! difference bit-exact (see [`Selection::marginal_over`]).

mod dynamic;

use std::cell::RefCell;

use crate::model::{AllocationScenario, Coalition};
use crate::scalar::Scalar;

pub use dynamic::DynamicMatching;

/// Goods allocated by an optimal allocation, as ascending canonical ranks,
/// together with their total value summed in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection<T> {
    value: T,
    ranks: Box<[u32]>,
}

impl<T: Scalar> Selection<T> {
    pub fn empty() -> Self {
        Self {
            value: T::zero(),
            ranks: Box::new([]),
        }
    }

    pub fn value(&self) -> T {
        self.value
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Good indices of the selection, most valuable first.
    pub fn goods<'a>(
        &'a self,
        scenario: &'a AllocationScenario<T>,
    ) -> impl Iterator<Item = usize> + 'a {
        self.ranks.iter().map(move |&r| scenario.good_at_rank(r))
    }

    /// `value(self) - value(base)` computed as the value of the goods gained
    /// minus the value of the goods lost, each summed in canonical order.
    ///
    /// When `self` is `base` plus the selection of an agent that shares no
    /// goods with `base`, the result is bit-identical to that agent's solo
    /// value.
    pub fn marginal_over(&self, base: &Selection<T>, scenario: &AllocationScenario<T>) -> T {
        let (a, b) = (&self.ranks, &base.ranks);
        let (mut x, mut y) = (0, 0);
        let mut gained = T::zero();
        let mut lost = T::zero();
        while x < a.len() || y < b.len() {
            match (a.get(x), b.get(y)) {
                (Some(&ra), Some(&rb)) if ra == rb => {
                    x += 1;
                    y += 1;
                }
                (Some(&ra), Some(&rb)) if ra < rb => {
                    gained += scenario.value(scenario.good_at_rank(ra));
                    x += 1;
                }
                (Some(&ra), None) => {
                    gained += scenario.value(scenario.good_at_rank(ra));
                    x += 1;
                }
                (_, Some(&rb)) => {
                    lost += scenario.value(scenario.good_at_rank(rb));
                    y += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        gained - lost
    }
}

/// An assignment of goods to the agents of a coalition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    /// Goods received by each agent, indexed by agent; agents outside the
    /// coalition receive nothing.
    pub assignment: Vec<Vec<usize>>,
}

impl Allocation {
    pub fn goods_of(&self, agent: usize) -> &[usize] {
        &self.assignment[agent]
    }

    pub fn is_feasible_for<T: Scalar>(
        &self,
        scenario: &AllocationScenario<T>,
        c: &Coalition,
    ) -> bool {
        let mut used = vec![false; scenario.n_goods()];
        for (agent, goods) in self.assignment.iter().enumerate() {
            if goods.is_empty() {
                continue;
            }
            if !c.contains(agent) || goods.len() > scenario.capacity() {
                return false;
            }
            for &g in goods {
                if used[g] || scenario.interest(agent).binary_search(&g).is_err() {
                    return false;
                }
                used[g] = true;
            }
        }
        true
    }

    pub fn value<T: Scalar>(&self, scenario: &AllocationScenario<T>) -> T {
        self.assignment
            .iter()
            .flatten()
            .map(|&g| scenario.value(g))
            .fold(T::zero(), |a, b| a + b)
    }
}

/// Reusable buffers for the matching kernel.
#[derive(Debug, Default)]
pub struct Matcher {
    stamp: Vec<u32>,
    epoch: u32,
    load: Vec<u32>,
    held: Vec<u32>,
    candidates: Vec<u32>,
    picked: Vec<u32>,
    /// `dead[a] == run` marks agents a failed search has proven unable to
    /// free a slot for the rest of the current run.
    dead: Vec<u32>,
    run: u32,
    visited: Vec<u32>,
    rank_bits: Vec<u64>,
}

impl Matcher {
    pub fn new() -> Self {
        Self::default()
    }

    fn prepare(&mut self, n_agents: usize, k: usize) {
        if self.stamp.len() < n_agents {
            self.stamp.resize(n_agents, 0);
            self.load.resize(n_agents, 0);
            self.dead.resize(n_agents, 0);
        }
        self.run = self.run.wrapping_add(1);
        if self.run == 0 {
            self.dead.iter_mut().for_each(|d| *d = 0);
            self.run = 1;
        }
        if self.held.len() < n_agents * k {
            self.held.resize(n_agents * k, 0);
        }
        self.candidates.clear();
        self.picked.clear();
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    /// Runs the greedy scan; afterwards `picked` holds the selected ranks and
    /// `held`/`load` the slot assignment of the coalition's agents.
    fn run<T: Scalar>(&mut self, scenario: &AllocationScenario<T>, c: &Coalition) {
        let k = scenario.capacity();
        self.prepare(scenario.n_agents(), k);
        let mut slots = 0usize;
        // candidate ranks as a bitset, read back in increasing order
        let words = scenario.n_goods().div_ceil(64);
        self.rank_bits.clear();
        self.rank_bits.resize(words, 0);
        for a in c.iter() {
            self.load[a] = 0;
            slots += k;
            for &g in scenario.interest(a) {
                if scenario.value(g) > T::zero() {
                    let r = scenario.rank(g) as usize;
                    self.rank_bits[r / 64] |= 1 << (r % 64);
                }
            }
        }
        for (w, &bits) in self.rank_bits.iter().enumerate() {
            let mut bits = bits;
            while bits != 0 {
                self.candidates
                    .push((w * 64) as u32 + bits.trailing_zeros());
                bits &= bits - 1;
            }
        }

        let candidates = std::mem::take(&mut self.candidates);
        for &r in &candidates {
            if self.picked.len() == slots {
                break;
            }
            self.next_epoch();
            self.visited.clear();
            let g = scenario.good_at_rank(r);
            if self.augment(scenario, c, g) {
                self.picked.push(r);
            } else {
                // The agents reached are all full and every good they hold
                // is wanted only by agents reached, so no later path that
                // enters this set can leave it.
                for &a in &self.visited {
                    self.dead[a as usize] = self.run;
                }
            }
        }
        self.candidates = candidates;
    }

    /// Finds an alternating path that frees a slot for good `g`.
    fn augment<T: Scalar>(
        &mut self,
        scenario: &AllocationScenario<T>,
        c: &Coalition,
        g: usize,
    ) -> bool {
        let k = scenario.capacity();
        let holders = scenario.interested(g);
        // cheap pass: any holder with a free slot
        for &a in holders {
            if c.contains(a) && self.stamp[a] != self.epoch && (self.load[a] as usize) < k {
                self.stamp[a] = self.epoch;
                self.held[a * k + self.load[a] as usize] = g as u32;
                self.load[a] += 1;
                return true;
            }
        }
        for &a in holders {
            if !c.contains(a) || self.stamp[a] == self.epoch || self.dead[a] == self.run {
                continue;
            }
            self.stamp[a] = self.epoch;
            self.visited.push(a as u32);
            for slot in 0..self.load[a] as usize {
                let h = self.held[a * k + slot] as usize;
                if self.augment(scenario, c, h) {
                    self.held[a * k + slot] = g as u32;
                    return true;
                }
            }
        }
        false
    }

    pub fn selection<T: Scalar>(
        &mut self,
        scenario: &AllocationScenario<T>,
        c: &Coalition,
    ) -> Selection<T> {
        self.run(scenario, c);
        let mut value = T::zero();
        for &r in &self.picked {
            value += scenario.value(scenario.good_at_rank(r));
        }
        Selection {
            value,
            ranks: self.picked.as_slice().into(),
        }
    }

    pub fn value<T: Scalar>(&mut self, scenario: &AllocationScenario<T>, c: &Coalition) -> T {
        self.run(scenario, c);
        let mut value = T::zero();
        for &r in &self.picked {
            value += scenario.value(scenario.good_at_rank(r));
        }
        value
    }

    pub fn allocation<T: Scalar>(
        &mut self,
        scenario: &AllocationScenario<T>,
        c: &Coalition,
    ) -> (Allocation, T) {
        let selection = self.selection(scenario, c);
        let k = scenario.capacity();
        let mut assignment = vec![Vec::new(); scenario.n_agents()];
        for a in c.iter() {
            let mut goods: Vec<usize> = self.held[a * k..a * k + self.load[a] as usize]
                .iter()
                .map(|&g| g as usize)
                .collect();
            goods.sort_unstable();
            assignment[a] = goods;
        }
        (Allocation { assignment }, selection.value())
    }
}

thread_local! {
    static MATCHER: RefCell<Matcher> = RefCell::new(Matcher::new());
}

/// Runs `f` with this thread's matcher.
pub fn with_matcher<R>(f: impl FnOnce(&mut Matcher) -> R) -> R {
    MATCHER.with(|m| f(&mut m.borrow_mut()))
}

/// An optimal allocation for `c` and its value. The empty coalition gets the
/// empty allocation.
pub fn optimal_allocation<T: Scalar>(
    scenario: &AllocationScenario<T>,
    c: &Coalition,
) -> (Allocation, T) {
    with_matcher(|m| m.allocation(scenario, c))
}

/// `opt(c)` without building the allocation.
pub fn optimal_value_only<T: Scalar>(scenario: &AllocationScenario<T>, c: &Coalition) -> T {
    with_matcher(|m| m.value(scenario, c))
}

pub fn optimal_selection<T: Scalar>(
    scenario: &AllocationScenario<T>,
    c: &Coalition,
) -> Selection<T> {
    with_matcher(|m| m.selection(scenario, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::random_scenario;
    use crate::oracle::brute_force_opt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type S = AllocationScenario<f64>;

    fn all(s: &S) -> Coalition {
        Coalition::full(s.n_agents())
    }

    #[test]
    fn single_agent_takes_everything_within_capacity() {
        let s = S::from_ids(2, &[("g", 5.0), ("h", 3.0)], &[("a", &["g", "h"])]).unwrap();
        let (alloc, value) = optimal_allocation(&s, &all(&s));
        assert_eq!(value, 8.0);
        assert_eq!(alloc.goods_of(0), &[0, 1]);
        assert_eq!(optimal_value_only(&s, &all(&s)), 8.0);
    }

    #[test]
    fn one_good_goes_to_exactly_one_agent() {
        let s = S::from_ids(1, &[("g", 5.0)], &[("a", &["g"]), ("b", &["g"])]).unwrap();
        let (alloc, value) = optimal_allocation(&s, &all(&s));
        assert_eq!(value, 5.0);
        // lowest-index agent wins the tie
        assert_eq!(alloc.goods_of(0), &[0]);
        assert!(alloc.goods_of(1).is_empty());
        assert!(alloc.is_feasible_for(&s, &all(&s)));
    }

    #[test]
    fn running_example_grand_coalition_is_six() {
        let s = crate::fixtures::running_example();
        let (alloc, value) = optimal_allocation(&s, &all(&s));
        assert_eq!(value, 6.0);
        assert!(alloc.is_feasible_for(&s, &all(&s)));
        assert_eq!(alloc.value(&s), 6.0);
    }

    #[test]
    fn empty_coalition_is_worth_zero() {
        let s = crate::fixtures::running_example();
        assert_eq!(optimal_value_only(&s, &Coalition::empty(3)), 0.0);
    }

    #[test]
    fn augmenting_path_reroutes_earlier_choices() {
        // x first goes to a; fitting y moves x over to b
        let s = S::from_ids(
            1,
            &[("x", 5.0), ("y", 4.0)],
            &[("a", &["x", "y"]), ("b", &["x"])],
        )
        .unwrap();
        let (alloc, value) = optimal_allocation(&s, &all(&s));
        assert_eq!(value, 9.0);
        assert_eq!(alloc.goods_of(0), &[1]);
        assert_eq!(alloc.goods_of(1), &[0]);
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..150 {
            let k = 1 + trial % 3;
            let s: S = random_scenario(&mut rng, 2 + trial % 5, 7, k, 0.45);
            for mask in 0..(1u64 << s.n_agents()) {
                let c = Coalition::from_mask(s.n_agents(), mask);
                let (alloc, value) = optimal_allocation(&s, &c);
                let oracle = brute_force_opt(&s, &c);
                assert!(
                    (value - oracle).abs() < 1e-9,
                    "trial {trial} mask {mask}: {value} vs {oracle}"
                );
                assert!(alloc.is_feasible_for(&s, &c));
                assert!((alloc.value(&s) - value).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn disjoint_agents_get_their_top_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let s: S = crate::fixtures::random_disjoint_scenario(&mut rng, 6, 2);
            let expected: f64 = (0..6).map(|i| s.top_values(i, 2, None)).sum();
            let got = optimal_value_only(&s, &all(&s));
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_over_is_exact_for_disconnected_agents() {
        let s = S::from_ids(
            1,
            &[("a", 0.7), ("b", 0.1), ("c", 0.4)],
            &[("x", &["a"]), ("y", &["b", "c"])],
        )
        .unwrap();
        let base = optimal_selection(&s, &Coalition::from_members(2, [0]));
        let whole = optimal_selection(&s, &Coalition::full(2));
        let solo = optimal_selection(&s, &Coalition::singleton(2, 1));
        assert_eq!(
            whole.marginal_over(&base, &s).to_bits(),
            solo.value().to_bits()
        );
    }
}
