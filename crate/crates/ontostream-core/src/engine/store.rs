//! The archived window store: window records with their signatures, plus
//! the raw measurement blocks hybrid operations join against.
//!
//! Fetching a raw block is the metered operation: the whole point of the
//! signature machinery is to make plans that never call `fetch_block`.

use alloc::string::String;
use alloc::vec::Vec;

use super::metrics::Metrics;
use super::signature::{compute_mws, MwsSignature};
use super::window::{assign_windows, Measurement, WindowAssigner};

/// One archived window of one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub wid: u64,
    pub sensor: String,
    pub start_ms: i64,
    pub end_ms: i64,
    pub signature: MwsSignature,
}

/// A window's raw measurements, stored separately from the record.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBlock {
    pub wid: u64,
    pub sensor: String,
    pub samples: Vec<(i64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowStore {
    /// Sorted by (wid, sensor); parallel to `blocks`.
    pub records: Vec<WindowRecord>,
    blocks: Vec<WindowBlock>,
}

impl WindowStore {
    /// Archives a measurement run: assigns windows, computes a signature
    /// per non-empty window, and stores record + raw block. Empty windows
    /// are counted, not archived.
    pub fn archive(
        measurements: &[Measurement],
        assigner: &WindowAssigner,
        metrics: &mut Metrics,
    ) -> WindowStore {
        let mut store = WindowStore::default();
        for w in assign_windows(measurements, assigner, metrics) {
            let values: Vec<f64> = w.samples.iter().map(|s| s.1).collect();
            match compute_mws(&values) {
                Some(signature) => {
                    store.records.push(WindowRecord {
                        wid: w.wid,
                        sensor: w.sensor.clone(),
                        start_ms: w.start_ms,
                        end_ms: w.end_ms,
                        signature,
                    });
                    store.blocks.push(WindowBlock {
                        wid: w.wid,
                        sensor: w.sensor,
                        samples: w.samples,
                    });
                }
                None => metrics.empty_windows += 1,
            }
        }
        store
    }

    /// Rebuilds a store from already-materialized records and blocks (the
    /// on-disk manifest format of the companion crate).
    pub fn from_parts(mut records: Vec<WindowRecord>, mut blocks: Vec<WindowBlock>) -> WindowStore {
        records.sort_by(|a, b| (a.wid, &a.sensor).cmp(&(b.wid, &b.sensor)));
        blocks.sort_by(|a, b| (a.wid, &a.sensor).cmp(&(b.wid, &b.sensor)));
        WindowStore { records, blocks }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn blocks(&self) -> &[WindowBlock] {
        &self.blocks
    }

    /// Records whose window ends exactly at `end_ms`.
    pub fn records_ending_at(&self, end_ms: i64) -> impl Iterator<Item = &WindowRecord> {
        self.records.iter().filter(move |r| r.end_ms == end_ms)
    }

    /// Linear block fetch; every call counts as a measurements scan.
    pub fn fetch_block(&self, wid: u64, sensor: &str, metrics: &mut Metrics) -> Option<&[(i64, f64)]> {
        metrics.measurements_scans += 1;
        self.blocks
            .iter()
            .find(|b| b.wid == wid && b.sensor == sensor)
            .map(|b| b.samples.as_slice())
    }

    /// Block fetch by position, for index-accelerated access. Still a
    /// measurements scan; the index changes how the block is found, not
    /// whether raw data is read.
    pub fn fetch_block_at(&self, position: usize, metrics: &mut Metrics) -> &[(i64, f64)] {
        metrics.measurements_scans += 1;
        self.blocks[position].samples.as_slice()
    }

    /// Position lookup without touching raw data (used by the adaptive
    /// index when scanning for a block's location).
    pub fn position_of(&self, wid: u64, sensor: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.wid == wid && b.sensor == sensor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(sensor: &str, n: usize, step_ms: i64, offset_ms: i64) -> Vec<Measurement> {
        (0..n)
            .map(|i| Measurement {
                sensor: sensor.into(),
                time_ms: offset_ms + i as i64 * step_ms,
                value: (i % 7) as f64,
            })
            .collect()
    }

    #[test]
    fn archive_computes_signatures() {
        let data = grid("a", 120, 1_000, 500);
        let assigner = WindowAssigner::new(60_000, 60_000);
        let mut metrics = Metrics::default();
        let store = WindowStore::archive(&data, &assigner, &mut metrics);
        assert_eq!(store.len(), 2);
        for r in &store.records {
            assert_eq!(r.signature.count, 60);
            assert!(r.signature.is_consistent());
        }
    }

    #[test]
    fn fetch_block_counts_scans() {
        let data = grid("a", 60, 1_000, 500);
        let assigner = WindowAssigner::new(60_000, 60_000);
        let mut metrics = Metrics::default();
        let store = WindowStore::archive(&data, &assigner, &mut metrics);
        assert_eq!(metrics.measurements_scans, 0);
        let wid = store.records[0].wid;
        let block = store.fetch_block(wid, "a", &mut metrics).unwrap();
        assert_eq!(block.len(), 60);
        assert_eq!(metrics.measurements_scans, 1);
    }

    #[test]
    fn signature_matches_recomputation_from_block() {
        let data = grid("a", 180, 1_000, 500);
        let assigner = WindowAssigner::new(60_000, 30_000);
        let mut metrics = Metrics::default();
        let store = WindowStore::archive(&data, &assigner, &mut metrics);
        for (i, r) in store.records.iter().enumerate() {
            let block = store.fetch_block_at(i, &mut metrics);
            let values: Vec<f64> = block.iter().map(|s| s.1).collect();
            let recomputed = compute_mws(&values).unwrap();
            assert_eq!(r.signature.count, recomputed.count);
            assert!((r.signature.mean - recomputed.mean).abs() < 1e-9);
            assert!((r.signature.variance - recomputed.variance).abs() < 1e-9);
            assert!((r.signature.norm - recomputed.norm).abs() < 1e-9);
        }
    }
}
