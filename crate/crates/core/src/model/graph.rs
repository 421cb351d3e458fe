use super::{AllocationScenario, Coalition};
use crate::scalar::Scalar;

/// Undirected agent adjacency: two agents are neighbours when they share a
/// good of positive value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentsGraph {
    neighbors: Vec<Coalition>,
    /// The same neighbourhoods as ascending lists, for sparse traversal.
    lists: Vec<Vec<u32>>,
}

impl AgentsGraph {
    pub fn build<T: Scalar>(scenario: &AllocationScenario<T>) -> Self {
        let n = scenario.n_agents();
        let mut neighbors = vec![Coalition::empty(n); n];
        for g in 0..scenario.n_goods() {
            if scenario.value(g) <= T::zero() {
                continue;
            }
            let holders = scenario.interested(g);
            for (x, &a) in holders.iter().enumerate() {
                for &b in &holders[x + 1..] {
                    neighbors[a].insert(b);
                    neighbors[b].insert(a);
                }
            }
        }
        let lists = neighbors
            .iter()
            .map(|c| c.iter().map(|j| j as u32).collect())
            .collect();
        Self { neighbors, lists }
    }

    pub fn n_agents(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &Coalition {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].contains(j)
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Coalition::len).sum::<usize>() / 2
    }

    /// Members of `within` reachable from `i` through members of `within`,
    /// excluding `i` itself. `i` need not belong to `within`.
    pub fn reachable_within(&self, i: usize, within: &Coalition) -> Coalition {
        let mut seen = Coalition::empty(self.n_agents());
        let mut frontier = vec![i as u32];
        let inside = within.words();
        let seen_words = seen.words_mut();
        // i counts as seen while searching, and is dropped at the end
        seen_words[i / 64] |= 1 << (i % 64);
        while let Some(a) = frontier.pop() {
            for &b in &self.lists[a as usize] {
                let (w, bit) = (b as usize / 64, 1u64 << (b % 64));
                if inside[w] & bit != 0 && seen_words[w] & bit == 0 {
                    seen_words[w] |= bit;
                    frontier.push(b);
                }
            }
        }
        seen_words[i / 64] &= !(1 << (i % 64));
        seen
    }

    /// Connected components, each sorted, ordered by their smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        self.components_within(&Coalition::full(self.n_agents()))
    }

    /// Connected components of the subgraph induced by `within`.
    pub fn components_within(&self, within: &Coalition) -> Vec<Vec<usize>> {
        let mut unseen = within.clone();
        let mut out = Vec::new();
        for start in within.iter() {
            if !unseen.contains(start) {
                continue;
            }
            let mut comp = self.reachable_within(start, within);
            comp.insert(start);
            unseen.difference_with(&comp);
            out.push(comp.iter().collect());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type S = AllocationScenario<f64>;

    #[test]
    fn shared_positive_good_gives_single_edge() {
        let s = S::from_ids(1, &[("g", 1.0)], &[("a", &["g"]), ("b", &["g"])]).unwrap();
        let g = AgentsGraph::build(&s);
        assert_eq!(g.edge_count(), 1);
        assert!(g.adjacent(0, 1) && g.adjacent(1, 0));
    }

    #[test]
    fn disjoint_interests_give_edgeless_graph() {
        let s = S::from_ids(
            1,
            &[("g", 1.0), ("h", 1.0)],
            &[("a", &["g"]), ("b", &["h"])],
        )
        .unwrap();
        assert_eq!(AgentsGraph::build(&s).edge_count(), 0);
    }

    #[test]
    fn zero_value_goods_do_not_connect() {
        let s = S::from_ids(1, &[("g", 0.0)], &[("a", &["g"]), ("b", &["g"])]).unwrap();
        assert_eq!(AgentsGraph::build(&s).edge_count(), 0);
    }

    #[test]
    fn three_agents_sharing_one_good_form_a_triangle() {
        let s = S::from_ids(
            1,
            &[("g", 2.0)],
            &[("a", &["g"]), ("b", &["g"]), ("c", &["g"])],
        )
        .unwrap();
        let g = AgentsGraph::build(&s);
        // pairwise Ω-intersection check
        for i in 0..3 {
            for j in 0..3 {
                let shared = s.interest(i).iter().any(|x| s.interest(j).contains(x));
                assert_eq!(g.adjacent(i, j), i != j && shared);
            }
        }
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn reachability_is_restricted_to_the_coalition() {
        // path a - b - c - d
        let s = S::from_ids(
            1,
            &[("ab", 1.0), ("bc", 1.0), ("cd", 1.0)],
            &[
                ("a", &["ab"]),
                ("b", &["ab", "bc"]),
                ("c", &["bc", "cd"]),
                ("d", &["cd"]),
            ],
        )
        .unwrap();
        let g = AgentsGraph::build(&s);
        let all = Coalition::full(4);
        assert_eq!(
            g.reachable_within(0, &all).iter().collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        let gap = Coalition::from_members(4, [1, 3]);
        assert_eq!(
            g.reachable_within(0, &gap).iter().collect::<Vec<_>>(),
            vec![1]
        );
        assert_eq!(
            g.components_within(&Coalition::from_members(4, [0, 1, 3])),
            vec![vec![0, 1], vec![3]]
        );
        assert_eq!(g.components(), vec![vec![0, 1, 2, 3]]);
    }
}
