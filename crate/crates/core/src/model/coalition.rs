use std::fmt;

use smallvec::SmallVec;

const WORD: usize = 64;

/// A subset of a scenario's agents, stored as a bitset over agent indices.
///
/// The number of words is fixed by the agent count the coalition was created
/// for, so equality and hashing are only meaningful between coalitions of
/// the same scenario.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Coalition {
    words: SmallVec<[u64; 2]>,
}

fn words_for(n: usize) -> usize {
    n.div_ceil(WORD)
}

impl Coalition {
    pub fn empty(n: usize) -> Self {
        Self {
            words: SmallVec::from_elem(0, words_for(n)),
        }
    }

    pub fn full(n: usize) -> Self {
        let mut c = Self::empty(n);
        for (w, word) in c.words.iter_mut().enumerate() {
            let lo = w * WORD;
            let bits = (n - lo).min(WORD);
            *word = if bits == WORD {
                u64::MAX
            } else {
                (1u64 << bits) - 1
            };
        }
        c
    }

    pub fn singleton(n: usize, i: usize) -> Self {
        let mut c = Self::empty(n);
        c.insert(i);
        c
    }

    /// Builds a coalition from a single-word mask; `n` must be at most 64.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        assert!(n <= WORD, "from_mask needs n <= 64, got {n}");
        let mut c = Self::empty(n);
        if let Some(w) = c.words.first_mut() {
            *w = mask;
        }
        c
    }

    pub fn from_members(n: usize, members: impl IntoIterator<Item = usize>) -> Self {
        let mut c = Self::empty(n);
        for i in members {
            c.insert(i);
        }
        c
    }

    /// The mask of a coalition over at most 64 agents.
    pub fn as_mask(&self) -> Option<u64> {
        match self.words.len() {
            0 => Some(0),
            1 => Some(self.words[0]),
            _ => None,
        }
    }

    /// Capacity in agents (a multiple of 64).
    pub fn capacity(&self) -> usize {
        self.words.len() * WORD
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.words
            .get(i / WORD)
            .is_some_and(|w| w & (1u64 << (i % WORD)) != 0)
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        self.words[i / WORD] |= 1u64 << (i % WORD);
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        self.words[i / WORD] &= !(1u64 << (i % WORD));
    }

    #[inline]
    pub fn toggle(&mut self, i: usize) {
        self.words[i / WORD] ^= 1u64 << (i % WORD);
    }

    pub fn with(&self, i: usize) -> Self {
        let mut c = self.clone();
        c.insert(i);
        c
    }

    pub fn without(&self, i: usize) -> Self {
        let mut c = self.clone();
        c.remove(i);
        c
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn union_with(&mut self, other: &Self) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn intersect_with(&mut self, other: &Self) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn difference_with(&mut self, other: &Self) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut c = self.clone();
        c.union_with(other);
        c
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let mut c = self.clone();
        c.intersect_with(other);
        c
    }

    pub fn difference(&self, other: &Self) -> Self {
        let mut c = self.clone();
        c.difference_with(other);
        c
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    /// Members in increasing index order.
    pub fn iter(&self) -> Members<'_> {
        Members {
            words: &self.words,
            index: 0,
            current: self.words.first().copied().unwrap_or(0),
        }
    }
}

pub struct Members<'a> {
    words: &'a [u64],
    index: usize,
    current: u64,
}

impl Iterator for Members<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        loop {
            if self.current != 0 {
                let bit = self.current.trailing_zeros() as usize;
                self.current &= self.current - 1;
                return Some(self.index * WORD + bit);
            }
            self.index += 1;
            self.current = *self.words.get(self.index)?;
        }
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_sets_exactly_n_bits() {
        for n in [0, 1, 5, 63, 64, 65, 130] {
            let c = Coalition::full(n);
            assert_eq!(c.len(), n);
            assert_eq!(c.iter().collect::<Vec<_>>(), (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn empty_coalition_has_no_members() {
        let c = Coalition::empty(70);
        assert!(c.is_empty());
        assert_eq!(c.iter().count(), 0);
        assert!(!c.contains(3));
    }

    #[test]
    fn mask_round_trip() {
        let c = Coalition::from_mask(10, 0b1010_0101);
        assert_eq!(c.as_mask(), Some(0b1010_0101));
        assert_eq!(c.iter().collect::<Vec<_>>(), vec![0, 2, 5, 7]);
        assert_eq!(Coalition::full(100).as_mask(), None);
    }

    proptest! {
        #[test]
        fn set_algebra_matches_btreeset(
            a in proptest::collection::btree_set(0usize..150, 0..40),
            b in proptest::collection::btree_set(0usize..150, 0..40),
        ) {
            let n = 150;
            let ca = Coalition::from_members(n, a.iter().copied());
            let cb = Coalition::from_members(n, b.iter().copied());
            let union: Vec<_> = a.union(&b).copied().collect();
            let inter: Vec<_> = a.intersection(&b).copied().collect();
            let diff: Vec<_> = a.difference(&b).copied().collect();
            prop_assert_eq!(ca.union(&cb).iter().collect::<Vec<_>>(), union);
            prop_assert_eq!(ca.intersection(&cb).iter().collect::<Vec<_>>(), inter.clone());
            prop_assert_eq!(ca.difference(&cb).iter().collect::<Vec<_>>(), diff);
            prop_assert_eq!(ca.intersects(&cb), !inter.is_empty());
            prop_assert_eq!(ca.is_subset(&cb), a.is_subset(&b));
            prop_assert_eq!(ca.len(), a.len());
        }
    }
}
