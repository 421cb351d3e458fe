//! Brute-force reference computations.
//!
//! These enumerate allocations, coalitions or permutations directly from the
//! definitions and share no code with the solvers, so they can serve as
//! independent checks. All of them are exponential (or factorial) and meant
//! for tiny instances.

use crate::model::{AllocationScenario, Coalition};
use crate::scalar::Scalar;

/// `opt(c)` by enumerating every way of giving each good to an interested
/// member of `c` (or to nobody) within the capacity.
pub fn brute_force_opt<T: Scalar>(scenario: &AllocationScenario<T>, c: &Coalition) -> T {
    let mut goods: Vec<usize> = c
        .iter()
        .flat_map(|a| scenario.interest(a).iter().copied())
        .collect();
    goods.sort_unstable();
    goods.dedup();
    let mut load = vec![0usize; scenario.n_agents()];
    let mut best = T::zero();
    assign(scenario, c, &goods, 0, &mut load, T::zero(), &mut best);
    best
}

fn assign<T: Scalar>(
    scenario: &AllocationScenario<T>,
    c: &Coalition,
    goods: &[usize],
    at: usize,
    load: &mut [usize],
    acc: T,
    best: &mut T,
) {
    if at == goods.len() {
        if acc > *best {
            *best = acc;
        }
        return;
    }
    let g = goods[at];
    assign(scenario, c, goods, at + 1, load, acc, best);
    for &a in scenario.interested(g) {
        if c.contains(a) && load[a] < scenario.capacity() {
            load[a] += 1;
            assign(
                scenario,
                c,
                goods,
                at + 1,
                load,
                acc + scenario.value(g),
                best,
            );
            load[a] -= 1;
        }
    }
}

/// Shapley values as the average of marginal contributions over all `n!`
/// orderings of the agents.
pub fn shapley_by_permutations(n: usize, mut worth: impl FnMut(&Coalition) -> f64) -> Vec<f64> {
    assert!(n <= 9, "permutation oracle is limited to 9 agents");
    let mut perm: Vec<usize> = (0..n).collect();
    let mut totals = vec![0.0; n];
    let mut count = 0u64;
    loop {
        let mut prefix = Coalition::empty(n);
        let mut before = 0.0;
        for &j in &perm {
            prefix.insert(j);
            let after = worth(&prefix);
            totals[j] += after - before;
            before = after;
        }
        count += 1;
        if !next_permutation(&mut perm) {
            break;
        }
    }
    totals.iter().map(|t| t / count as f64).collect()
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

/// Shapley values from the subset formula with weights built from plain
/// factorials (fine up to n of about 20).
pub fn shapley_by_subsets(n: usize, mut worth: impl FnMut(&Coalition) -> f64) -> Vec<f64> {
    assert!(n <= 20, "subset oracle is limited to 20 agents");
    let table: Vec<f64> = (0..1u64 << n)
        .map(|m| worth(&Coalition::from_mask(n, m)))
        .collect();
    let nf = factorial(n);
    (0..n)
        .map(|i| {
            let bit = 1u64 << i;
            (0..1u64 << n)
                .filter(|m| m & bit == 0)
                .map(|m| {
                    let s = m.count_ones() as usize;
                    factorial(s) * factorial(n - s - 1) / nf
                        * (table[(m | bit) as usize] - table[m as usize])
                })
                .sum()
        })
        .collect()
}

/// Brute-force Shapley vector of an allocation game, using
/// [`brute_force_opt`] as the worth function.
pub fn brute_force_shapley<T: Scalar>(scenario: &AllocationScenario<T>) -> Vec<f64> {
    shapley_by_subsets(scenario.n_agents(), |c| {
        brute_force_opt(scenario, c).as_f64()
    })
}

/// Relative difference `|a - b| / max(|a|, |b|, 1)`.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
