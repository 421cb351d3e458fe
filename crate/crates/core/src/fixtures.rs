//! Small reference scenarios and random instance builders used by tests,
//! benchmarks and documentation.

use rand::Rng;

use crate::model::{AllocationScenario, Good};
use crate::scalar::Scalar;

/// Three agents, four goods, `k = 1`; characteristic values
/// `v({a1,a2,a3}) = 6`, `v({a1,a2}) = 5`, `v({a1,a3}) = v({a2,a3}) = 4`,
/// `v({a1}) = v({a2}) = 3`, `v({a3}) = 1`.
///
/// Only the worths are known for this game; the interest sets below are one
/// edge set that produces exactly those worths (`g4` is worthless).
pub fn running_example() -> AllocationScenario<f64> {
    AllocationScenario::from_ids(
        1,
        &[("g1", 3.0), ("g2", 2.0), ("g3", 1.0), ("g4", 0.0)],
        &[
            ("a1", &["g1", "g3"]),
            ("a2", &["g1", "g2"]),
            ("a3", &["g3", "g4"]),
        ],
    )
    .expect("valid fixture")
}

/// Three researchers with two submissions each. Publication values are a
/// reconstruction satisfying every stated constraint (`p1 + p2 = 17`,
/// `p3 = p5 = 6`, grand-coalition total 45, `p2` is r3's best item); the
/// resulting Shapley values are `(29/2, 29/2, 16)`.
pub fn research_example() -> AllocationScenario<f64> {
    AllocationScenario::from_ids(
        2,
        &[
            ("p1", 7.0),
            ("p2", 10.0),
            ("p3", 6.0),
            ("p4", 7.0),
            ("p6", 8.0),
            ("p7", 7.0),
        ],
        &[
            ("r1", &["p1", "p2", "p3"]),
            ("r2", &["p2", "p3", "p4"]),
            ("r3", &["p2", "p6", "p7"]),
        ],
    )
    .expect("valid fixture")
}

/// The same researchers when the alternative optimal selection (with `p5`
/// instead of `p3`) is submitted. Shapley values are unchanged.
pub fn research_example_alternative() -> AllocationScenario<f64> {
    AllocationScenario::from_ids(
        2,
        &[
            ("p1", 7.0),
            ("p2", 10.0),
            ("p4", 7.0),
            ("p5", 6.0),
            ("p6", 8.0),
            ("p7", 7.0),
        ],
        &[
            ("r1", &["p1", "p2"]),
            ("r2", &["p2", "p4", "p5"]),
            ("r3", &["p2", "p6", "p7"]),
        ],
    )
    .expect("valid fixture")
}

const RANDOM_VALUES: [f64; 8] = [0.0, 0.1, 0.4, 0.7, 1.0, 1.0, 2.0, 3.5];

/// `n` agents over `goods` goods; each agent is interested in each good with
/// probability `density`. Values come from a small set that includes zero.
pub fn random_scenario<T: Scalar, R: Rng>(
    rng: &mut R,
    n: usize,
    goods: usize,
    k: usize,
    density: f64,
) -> AllocationScenario<T> {
    let goods_list = (0..goods)
        .map(|g| Good {
            id: format!("g{g}"),
            value: T::of(RANDOM_VALUES[rng.gen_range(0..RANDOM_VALUES.len())]),
        })
        .collect();
    let interest = (0..n)
        .map(|_| (0..goods).filter(|_| rng.gen_bool(density)).collect())
        .collect();
    let agents = (0..n).map(|a| format!("a{a}")).collect();
    AllocationScenario::new(agents, goods_list, interest, k).expect("random scenario is valid")
}

/// Agents with pairwise disjoint interests, `per_agent` goods each.
pub fn random_disjoint_scenario<T: Scalar, R: Rng>(
    rng: &mut R,
    n: usize,
    per_agent: usize,
) -> AllocationScenario<T> {
    let total = n * per_agent;
    let goods = (0..total)
        .map(|g| Good {
            id: format!("g{g}"),
            value: T::of(RANDOM_VALUES[rng.gen_range(0..RANDOM_VALUES.len())]),
        })
        .collect();
    let interest = (0..n)
        .map(|a| (a * per_agent..(a + 1) * per_agent).collect())
        .collect();
    let agents = (0..n).map(|a| format!("a{a}")).collect();
    AllocationScenario::new(agents, goods, interest, 2).expect("disjoint scenario is valid")
}
