//! Adaptive in-memory join index over the archived blocks.
//!
//! Block lookups scan batches of the store linearly until a batch has been
//! probed more than the threshold; from then on that batch is served from
//! a hash map built over its join keys. Results are identical with the
//! index on or off; only the probe counters differ.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::metrics::Metrics;
use super::store::WindowStore;

pub const DEFAULT_PROBE_THRESHOLD: u64 = 3;
pub const DEFAULT_BATCH_SIZE: usize = 1024;

/// Never build an index.
pub const THRESHOLD_OFF: u64 = u64::MAX;

#[derive(Debug, Clone)]
pub struct AdaptiveIndex {
    threshold: u64,
    batch_size: usize,
    probe_counts: Vec<u64>,
    built: Vec<Option<BTreeMap<(u64, String), usize>>>,
}

impl AdaptiveIndex {
    pub fn new(threshold: u64) -> Self {
        AdaptiveIndex {
            threshold,
            batch_size: DEFAULT_BATCH_SIZE,
            probe_counts: Vec::new(),
            built: Vec::new(),
        }
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn batches_built(&self) -> usize {
        self.built.iter().filter(|b| b.is_some()).count()
    }

    fn ensure_batches(&mut self, store: &WindowStore) {
        let n_batches = store.blocks().len().div_ceil(self.batch_size).max(1);
        if self.probe_counts.len() < n_batches {
            self.probe_counts.resize(n_batches, 0);
            self.built.resize(n_batches, None);
        }
    }

    /// Finds the block position for `(wid, sensor)`. Batches already past
    /// the probe threshold answer from their hash index; the rest are
    /// scanned, and a batch crossing the threshold is indexed before this
    /// probe is served.
    pub fn probe(
        &mut self,
        store: &WindowStore,
        wid: u64,
        sensor: &str,
        metrics: &mut Metrics,
    ) -> Option<usize> {
        self.ensure_batches(store);
        let blocks = store.blocks();
        for batch_idx in 0..self.probe_counts.len() {
            let lo = batch_idx * self.batch_size;
            let hi = (lo + self.batch_size).min(blocks.len());
            if lo >= blocks.len() {
                break;
            }
            self.probe_counts[batch_idx] += 1;
            if self.built[batch_idx].is_none()
                && self.threshold != THRESHOLD_OFF
                && self.probe_counts[batch_idx] > self.threshold
            {
                let mut map = BTreeMap::new();
                for (pos, b) in blocks[lo..hi].iter().enumerate() {
                    map.insert((b.wid, b.sensor.clone()), lo + pos);
                }
                self.built[batch_idx] = Some(map);
                metrics.index_builds += 1;
            }
            match &self.built[batch_idx] {
                Some(map) => {
                    metrics.probes_indexed += 1;
                    if let Some(&pos) = map.get(&(wid, String::from(sensor))) {
                        return Some(pos);
                    }
                }
                None => {
                    metrics.probes_scanned += 1;
                    if let Some(pos) =
                        blocks[lo..hi].iter().position(|b| b.wid == wid && b.sensor == sensor)
                    {
                        return Some(lo + pos);
                    }
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::window::{Measurement, WindowAssigner};

    fn store_with_windows(n: usize) -> WindowStore {
        let data: Vec<Measurement> = (0..n * 10)
            .map(|i| Measurement {
                sensor: "a".into(),
                time_ms: 500 + i as i64 * 1_000,
                value: i as f64,
            })
            .collect();
        let assigner = WindowAssigner::new(10_000, 10_000);
        let mut metrics = Metrics::default();
        WindowStore::archive(&data, &assigner, &mut metrics)
    }

    #[test]
    fn index_builds_before_the_fourth_probe() {
        let store = store_with_windows(20);
        let mut index = AdaptiveIndex::new(3).with_batch_size(64);
        let mut metrics = Metrics::default();
        let wid = store.records[5].wid;
        let mut trace = Vec::new();
        for _ in 0..5 {
            index.probe(&store, wid, "a", &mut metrics);
            trace.push((metrics.index_builds, metrics.probes_scanned, metrics.probes_indexed));
        }
        // Probes 1-3 scan; the index is built when the count exceeds the
        // threshold, so probes 4 and 5 are served from it.
        assert_eq!(trace[2], (0, 3, 0));
        assert_eq!(trace[3], (1, 3, 1));
        assert_eq!(trace[4], (1, 3, 2));
        assert_eq!(index.batches_built(), 1);
    }

    #[test]
    fn threshold_off_never_builds() {
        let store = store_with_windows(20);
        let mut index = AdaptiveIndex::new(THRESHOLD_OFF);
        let mut metrics = Metrics::default();
        for r in store.records.iter() {
            assert!(index.probe(&store, r.wid, "a", &mut metrics).is_some());
        }
        assert_eq!(metrics.index_builds, 0);
        assert_eq!(index.batches_built(), 0);
    }

    #[test]
    fn results_agree_with_and_without_index() {
        let store = store_with_windows(1000);
        let mut with = AdaptiveIndex::new(1).with_batch_size(64);
        let mut without = AdaptiveIndex::new(THRESHOLD_OFF).with_batch_size(64);
        let mut m1 = Metrics::default();
        let mut m2 = Metrics::default();
        for r in store.records.iter() {
            let a = with.probe(&store, r.wid, "a", &mut m1);
            let b = without.probe(&store, r.wid, "a", &mut m2);
            assert_eq!(a, b);
        }
        assert!(m1.index_builds > 0);
        // A missing key is a miss for both.
        assert_eq!(with.probe(&store, 9999, "a", &mut m1), None);
        assert_eq!(without.probe(&store, 9999, "a", &mut m2), None);
    }
}
