//! An optimal allocation maintained under agent insertions and removals.
//!
//! Adding one slot to an optimal matching needs a single alternating path
//! from the new slot, and since every edge into a good carries that good's
//! value, the gain of such a path is the value of the free good it ends on.
//! Removing an agent frees its goods; the rest of the matching stays optimal
//! for the graph without them, and re-inserting each freed good again takes a
//! single path. Each update is therefore one search over the part of the
//! coalition that interacts with the agent, instead of a full greedy scan.
//!
//! Values returned here are sums of at most `k` good values (or a difference
//! thereof). They agree with [`Selection`](super::Selection) based values up
//! to floating-point reassociation, not bit for bit.

use crate::model::{AllocationScenario, Coalition};
use crate::scalar::Scalar;

use super::Matcher;

const NONE: u32 = u32::MAX;

/// Where a search ended.
#[derive(Clone, Copy)]
enum Endpoint {
    /// `agent` takes its incoming good into an empty slot.
    Slot { agent: u32 },
    /// `agent` drops `good` and takes its incoming good.
    Drop { agent: u32, good: u32 },
}

#[derive(Debug, Clone)]
pub struct DynamicMatching<'a, T> {
    scenario: &'a AllocationScenario<T>,
    k: usize,
    member: Vec<bool>,
    owner: Vec<u32>,
    held: Vec<u32>,
    load: Vec<u32>,
    stamp: Vec<u32>,
    epoch: u32,
    parent: Vec<u32>,
    incoming: Vec<u32>,
    queue: Vec<u32>,
    top_rank: u32,
    /// Agents that may hold goods; lets [`clear`](Self::clear) skip a full
    /// sweep.
    touched: Vec<u32>,
}

impl<'a, T: Scalar> DynamicMatching<'a, T> {
    /// The empty coalition.
    pub fn new(scenario: &'a AllocationScenario<T>) -> Self {
        let n = scenario.n_agents();
        let k = scenario.capacity();
        Self {
            scenario,
            k,
            member: vec![false; n],
            owner: vec![NONE; scenario.n_goods()],
            held: vec![NONE; n * k],
            load: vec![0; n],
            stamp: vec![0; n],
            epoch: 0,
            parent: vec![NONE; n],
            incoming: vec![NONE; n],
            queue: Vec::new(),
            top_rank: 0,
            touched: Vec::new(),
        }
    }

    /// Back to the empty coalition.
    pub fn clear(&mut self) {
        if self.touched.len() > self.member.len() {
            self.member.fill(false);
            self.load.fill(0);
            self.owner.fill(NONE);
        } else {
            for &a in &self.touched {
                let a = a as usize;
                for s in 0..self.load[a] as usize {
                    self.owner[self.held[a * self.k + s] as usize] = NONE;
                }
                self.member[a] = false;
                self.load[a] = 0;
            }
        }
        self.touched.clear();
    }

    /// Replaces the coalition by `c` with an optimal allocation computed by
    /// `matcher`.
    pub fn reset(&mut self, c: &Coalition, matcher: &mut Matcher) {
        self.clear();
        matcher.run(self.scenario, c);
        let k = self.k;
        for a in c.iter() {
            self.member[a] = true;
            self.touched.push(a as u32);
            let load = matcher.load[a] as usize;
            self.load[a] = load as u32;
            for s in 0..load {
                let g = matcher.held[a * k + s];
                self.held[a * k + s] = g;
                self.owner[g as usize] = a as u32;
            }
        }
    }

    /// Starts from an optimal allocation of `c`, computed by `matcher`.
    pub fn from_coalition(
        scenario: &'a AllocationScenario<T>,
        c: &Coalition,
        matcher: &mut Matcher,
    ) -> Self {
        let mut dm = Self::new(scenario);
        dm.reset(c, matcher);
        dm
    }

    pub fn contains(&self, agent: usize) -> bool {
        self.member[agent]
    }

    pub fn members(&self) -> Coalition {
        let mut c = Coalition::empty(self.member.len());
        for (a, &m) in self.member.iter().enumerate() {
            if m {
                c.insert(a);
            }
        }
        c
    }

    /// Goods currently held by `agent`.
    pub fn goods_of(&self, agent: usize) -> impl Iterator<Item = usize> + '_ {
        self.held[agent * self.k..agent * self.k + self.load[agent] as usize]
            .iter()
            .map(|&g| g as usize)
    }

    /// Value of the current allocation, summed in canonical good order.
    pub fn value(&self) -> T {
        let mut ranks: Vec<u32> = (0..self.owner.len())
            .filter(|&g| self.owner[g] != NONE)
            .map(|g| self.scenario.rank(g))
            .collect();
        ranks.sort_unstable();
        ranks.iter().fold(T::zero(), |acc, &r| {
            acc + self.scenario.value(self.scenario.good_at_rank(r))
        })
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    fn visit(&mut self, agent: usize, parent: u32, incoming: u32) {
        self.stamp[agent] = self.epoch;
        self.parent[agent] = parent;
        self.incoming[agent] = incoming;
        self.queue.push(agent as u32);
    }

    fn replace_held(&mut self, agent: usize, old: u32, new: u32) {
        let base = agent * self.k;
        for s in 0..self.load[agent] as usize {
            if self.held[base + s] == old {
                self.held[base + s] = new;
                return;
            }
        }
        unreachable!("agent {agent} does not hold good {old}");
    }

    fn push_held(&mut self, agent: usize, good: u32) {
        let s = self.load[agent] as usize;
        self.held[agent * self.k + s] = good;
        self.load[agent] += 1;
    }

    /// Adds `agent` and returns `opt(S + agent) - opt(S)`.
    pub fn add_agent(&mut self, agent: usize) -> T {
        assert!(!self.member[agent], "agent {agent} is already a member");
        self.member[agent] = true;
        self.load[agent] = 0;
        self.touched.push(agent as u32);
        let mut gain = T::zero();
        for _ in 0..self.k {
            let Some((taker, good)) = self.best_free_reachable(agent) else {
                break;
            };
            // the root's new slot receives whatever reaches it
            let mut a = taker;
            let mut g = good;
            while a as usize != agent {
                let through = self.incoming[a as usize];
                self.owner[g as usize] = a;
                self.replace_held(a as usize, through, g);
                g = through;
                a = self.parent[a as usize];
            }
            self.owner[g as usize] = agent as u32;
            self.push_held(agent, g);
            gain += self.scenario.value(good as usize);
        }
        gain
    }

    /// Adds an agent none of whose goods is wanted by a member: it takes its
    /// `k` best goods and the gain is `opt({agent})`, summed the same way.
    pub fn add_isolated(&mut self, agent: usize) -> T {
        assert!(!self.member[agent], "agent {agent} is already a member");
        let s = self.scenario;
        self.member[agent] = true;
        self.load[agent] = 0;
        self.touched.push(agent as u32);
        let mut gain = T::zero();
        let mut last: Option<u32> = None;
        for _ in 0..self.k {
            // next best good after the one just taken
            let next = s
                .interest(agent)
                .iter()
                .filter(|&&g| s.value(g) > T::zero())
                .map(|&g| s.rank(g))
                .filter(|&r| last.is_none_or(|l| r > l))
                .min();
            let Some(r) = next else { break };
            let g = s.good_at_rank(r);
            debug_assert_eq!(self.owner[g], NONE, "agent {agent} is not isolated");
            self.owner[g] = agent as u32;
            self.push_held(agent, g as u32);
            gain += s.value(g);
            last = Some(r);
        }
        gain
    }

    /// The highest ranked free good reachable from `root` by an alternating
    /// path, and the agent that would take it.
    fn best_free_reachable(&mut self, root: usize) -> Option<(u32, u32)> {
        let s = self.scenario;
        self.next_epoch();
        self.queue.clear();
        self.visit(root, NONE, NONE);
        let mut best: Option<(u32, u32, u32)> = None;
        let mut head = 0;
        while head < self.queue.len() {
            let x = self.queue[head] as usize;
            head += 1;
            for &g in s.interest(x) {
                if s.value(g) <= T::zero() {
                    continue;
                }
                let owner = self.owner[g];
                if owner == NONE {
                    let r = s.rank(g);
                    if best.is_none_or(|(br, _, _)| r < br) {
                        best = Some((r, x as u32, g as u32));
                        if r == self.top_rank {
                            return Some((x as u32, g as u32));
                        }
                    }
                } else if self.stamp[owner as usize] != self.epoch {
                    self.visit(owner as usize, x as u32, g as u32);
                }
            }
        }
        best.map(|(_, a, g)| (a, g))
    }

    /// Removes `agent` and returns `opt(S) - opt(S - agent)`.
    pub fn remove_agent(&mut self, agent: usize) -> T {
        assert!(self.member[agent], "agent {agent} is not a member");
        self.member[agent] = false;
        let base = agent * self.k;
        let load = self.load[agent] as usize;
        let freed: Vec<u32> = self.held[base..base + load].to_vec();
        self.load[agent] = 0;
        let mut lost = T::zero();
        for &g in &freed {
            self.owner[g as usize] = NONE;
            lost += self.scenario.value(g as usize);
        }
        let mut regained = T::zero();
        for &g in &freed {
            regained += self.reinsert(g);
        }
        lost - regained
    }

    /// Re-inserts the free good `good` by the best alternating path and
    /// returns the gain.
    fn reinsert(&mut self, good: u32) -> T {
        let s = self.scenario;
        let v = s.value(good as usize);
        self.next_epoch();
        self.queue.clear();
        for &a in s.interested(good as usize) {
            if self.member[a] && self.stamp[a] != self.epoch {
                self.visit(a, NONE, good);
            }
        }
        let mut end: Option<Endpoint> = None;
        let mut drop_rank = 0u32;
        let mut head = 0;
        while head < self.queue.len() {
            let x = self.queue[head] as usize;
            head += 1;
            if (self.load[x] as usize) < self.k {
                end = Some(Endpoint::Slot { agent: x as u32 });
                break;
            }
            for slot in 0..self.k {
                let h = self.held[x * self.k + slot];
                let r = s.rank(h as usize);
                if s.value(h as usize) < v && (end.is_none() || r > drop_rank) {
                    drop_rank = r;
                    end = Some(Endpoint::Drop {
                        agent: x as u32,
                        good: h,
                    });
                }
                for &y in s.interested(h as usize) {
                    if self.member[y] && self.stamp[y] != self.epoch {
                        self.visit(y, x as u32, h);
                    }
                }
            }
        }
        match end {
            None => T::zero(),
            Some(Endpoint::Slot { agent }) => {
                let through = self.incoming[agent as usize];
                self.push_held(agent as usize, through);
                self.owner[through as usize] = agent;
                self.rotate_up(agent);
                v
            }
            Some(Endpoint::Drop { agent, good: h }) => {
                let through = self.incoming[agent as usize];
                self.owner[h as usize] = NONE;
                self.replace_held(agent as usize, h, through);
                self.owner[through as usize] = agent;
                self.rotate_up(agent);
                v - s.value(h as usize)
            }
        }
    }

    /// After `agent` took its incoming good, every ancestor takes the good it
    /// was reached through in exchange for the one it handed down.
    fn rotate_up(&mut self, agent: u32) {
        let mut child = agent as usize;
        while self.parent[child] != NONE {
            let p = self.parent[child] as usize;
            let given = self.incoming[child];
            let taken = self.incoming[p];
            self.replace_held(p, given, taken);
            self.owner[taken as usize] = p as u32;
            child = p;
        }
    }
}
