use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CloudError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CacheOutcome {
    Hit,
    Miss,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheAccess {
    pub outcome: CacheOutcome,
    pub evictions: Vec<String>,
    pub delivery_cost_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Entry {
    size: u64,
    last_used: u64,
}

/// Byte-capacity LRU cache of therapy assets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LruCache {
    capacity_bytes: u64,
    used_bytes: u64,
    clock: u64,
    entries: BTreeMap<String, Entry>,
    /// last_used → asset, for eviction order.
    order: BTreeMap<u64, String>,
    pub hits: u64,
    pub misses: u64,
}

impl LruCache {
    pub fn new(capacity_bytes: u64) -> Self {
        LruCache {
            capacity_bytes,
            used_bytes: 0,
            clock: 0,
            entries: BTreeMap::new(),
            order: BTreeMap::new(),
            hits: 0,
            misses: 0,
        }
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bytes
    }

    pub fn used_bytes(&self) -> u64 {
        self.used_bytes
    }

    pub fn contains(&self, asset_id: &str) -> bool {
        self.entries.contains_key(asset_id)
    }

    /// Cached assets from least to most recently used.
    pub fn lru_order(&self) -> Vec<&str> {
        self.order.values().map(String::as_str).collect()
    }

    pub fn hit_ratio(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }

    pub fn access(&mut self, asset_id: &str, size: u64) -> Result<CacheAccess, CloudError> {
        if size > self.capacity_bytes {
            return Err(CloudError::AssetTooLarge {
                asset_id: asset_id.to_string(),
                size,
                capacity: self.capacity_bytes,
            });
        }
        self.clock += 1;
        if let Some(e) = self.entries.get_mut(asset_id) {
            self.order.remove(&e.last_used);
            e.last_used = self.clock;
            self.order.insert(self.clock, asset_id.to_string());
            self.hits += 1;
            return Ok(CacheAccess {
                outcome: CacheOutcome::Hit,
                evictions: Vec::new(),
                delivery_cost_bytes: 0,
            });
        }
        self.misses += 1;
        let mut evictions = Vec::new();
        while self.used_bytes + size > self.capacity_bytes {
            let (_, victim) = self.order.pop_first().expect("used bytes imply an entry");
            let e = self.entries.remove(&victim).expect("order mirrors entries");
            self.used_bytes -= e.size;
            evictions.push(victim);
        }
        self.entries.insert(
            asset_id.to_string(),
            Entry {
                size,
                last_used: self.clock,
            },
        );
        self.order.insert(self.clock, asset_id.to_string());
        self.used_bytes += size;
        Ok(CacheAccess {
            outcome: CacheOutcome::Miss,
            evictions,
            delivery_cost_bytes: size,
        })
    }
}
