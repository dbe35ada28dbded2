//! Partitioning of the archived window store across execution units.
//!
//! Assignment is a deterministic hash of the window id, so repartitioning
//! with the same worker count always reproduces the same layout, and the
//! partitions are disjoint and cover the store by construction.

use alloc::vec::Vec;

use crate::engine::WindowStore;

/// Deterministic 64-bit mix (splitmix64 finalizer); not seeded by the
/// process, unlike the standard library hasher.
pub fn mix_wid(wid: u64) -> u64 {
    let mut z = wid.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    pub worker_count: usize,
    /// Window ids per worker, each list sorted.
    pub assignments: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvalidWorkerCount;

impl core::fmt::Display for InvalidWorkerCount {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("worker count must be at least 1")
    }
}

#[cfg(feature = "std")]
impl std::error::Error for InvalidWorkerCount {}

pub fn worker_for(wid: u64, worker_count: usize) -> usize {
    (mix_wid(wid) % worker_count as u64) as usize
}

/// Assigns every archived window of the store to one of `n` workers.
pub fn partition(store: &WindowStore, n: usize) -> Result<PartitionPlan, InvalidWorkerCount> {
    if n < 1 {
        return Err(InvalidWorkerCount);
    }
    let mut assignments: Vec<Vec<u64>> = alloc::vec![Vec::new(); n];
    let mut seen = alloc::collections::BTreeSet::new();
    for r in &store.records {
        if seen.insert(r.wid) {
            assignments[worker_for(r.wid, n)].push(r.wid);
        }
    }
    for a in &mut assignments {
        a.sort_unstable();
    }
    Ok(PartitionPlan { worker_count: n, assignments })
}
