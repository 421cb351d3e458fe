use std::hash::{BuildHasher, Hash};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;
use rustc_hash::{FxBuildHasher, FxHashMap};

use super::Coalition;
use crate::matching::Selection;

const SHARDS: usize = 32;

struct Shard<T> {
    map: FxHashMap<Coalition, (Arc<Selection<T>>, u64)>,
    tick: u64,
}

/// Memo of optimal selections keyed by coalition, safe to share between
/// workers.
///
/// Entries are deterministic functions of the coalition, so a hit returns
/// exactly what a recomputation would. With an entry limit the least
/// recently used quarter of a full shard is evicted.
pub struct CharacteristicCache<T> {
    shards: Box<[Mutex<Shard<T>>]>,
    enabled: bool,
    shard_limit: Option<usize>,
    hits: AtomicU64,
    misses: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
}

impl<T> CharacteristicCache<T> {
    fn build(enabled: bool, limit: Option<usize>) -> Self {
        let shards = (0..SHARDS)
            .map(|_| {
                Mutex::new(Shard {
                    map: FxHashMap::default(),
                    tick: 0,
                })
            })
            .collect();
        Self {
            shards,
            enabled,
            shard_limit: limit.map(|l| l.div_ceil(SHARDS).max(1)),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    /// Unbounded cache.
    pub fn new() -> Self {
        Self::build(true, None)
    }

    /// Cache holding at most about `entries` coalitions.
    pub fn with_limit(entries: usize) -> Self {
        Self::build(true, Some(entries))
    }

    /// A cache that never stores anything; every lookup is a miss.
    pub fn disabled() -> Self {
        Self::build(false, None)
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    fn shard(&self, c: &Coalition) -> &Mutex<Shard<T>> {
        let h = FxBuildHasher.hash_one(c);
        &self.shards[(h >> 7) as usize % SHARDS]
    }

    pub fn get(&self, c: &Coalition) -> Option<Arc<Selection<T>>> {
        if !self.enabled {
            self.misses.fetch_add(1, Ordering::Relaxed);
            return None;
        }
        let mut shard = self.shard(c).lock();
        shard.tick += 1;
        let tick = shard.tick;
        match shard.map.get_mut(c) {
            Some(entry) => {
                entry.1 = tick;
                self.hits.fetch_add(1, Ordering::Relaxed);
                Some(entry.0.clone())
            }
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    pub fn insert(&self, c: Coalition, selection: Arc<Selection<T>>) {
        if !self.enabled {
            return;
        }
        let mut shard = self.shard(&c).lock();
        if let Some(limit) = self.shard_limit {
            if shard.map.len() >= limit {
                evict_oldest_quarter(&mut shard.map);
            }
        }
        shard.tick += 1;
        let tick = shard.tick;
        shard.map.insert(c, (selection, tick));
    }

    /// Returns the cached selection for `c`, computing and storing it on a
    /// miss. The computation runs outside the shard lock.
    pub fn get_or_insert_with(
        &self,
        c: &Coalition,
        compute: impl FnOnce() -> Selection<T>,
    ) -> Arc<Selection<T>> {
        if let Some(hit) = self.get(c) {
            return hit;
        }
        let fresh = Arc::new(compute());
        self.insert(c.clone(), fresh.clone());
        fresh
    }

    pub fn len(&self) -> usize {
        self.shards.iter().map(|s| s.lock().map.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        for s in self.shards.iter() {
            s.lock().map.clear();
        }
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.len(),
        }
    }
}

impl<T> Default for CharacteristicCache<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn evict_oldest_quarter<K: Hash + Eq, V>(map: &mut FxHashMap<K, (V, u64)>) {
    let mut ticks: Vec<u64> = map.values().map(|e| e.1).collect();
    let cut = ticks.len() / 4;
    if cut == 0 {
        map.clear();
        return;
    }
    let (_, &mut threshold, _) = ticks.select_nth_unstable(cut);
    map.retain(|_, e| e.1 > threshold);
}
