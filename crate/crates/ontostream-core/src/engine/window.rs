//! Time-sliding window assignment.
//!
//! Windows close at ticks `anchor + k·slide` and cover the closed interval
//! `[tick − range − setback, tick − setback]`; the window id is the tick
//! index `k`. A measurement belongs to every window whose interval covers
//! it, so with `slide < range` it appears in multiple windows.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::metrics::Metrics;

/// One timestamped sensor reading. Values must be finite; times are
/// milliseconds since the epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub sensor: String,
    pub time_ms: i64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowAssigner {
    pub range_ms: i64,
    pub slide_ms: i64,
    pub anchor_ms: i64,
    pub set_back_ms: i64,
    /// Out-of-order tolerance per sensor; 0 rejects anything older than
    /// the latest accepted time.
    pub lateness_ms: i64,
}

impl WindowAssigner {
    pub fn new(range_ms: i64, slide_ms: i64) -> Self {
        debug_assert!(range_ms >= 0 && slide_ms > 0);
        WindowAssigner { range_ms, slide_ms, anchor_ms: 0, set_back_ms: 0, lateness_ms: 0 }
    }

    pub fn with_anchor(mut self, anchor_ms: i64) -> Self {
        self.anchor_ms = anchor_ms;
        self
    }

    pub fn with_set_back(mut self, set_back_ms: i64) -> Self {
        self.set_back_ms = set_back_ms;
        self
    }

    /// Interval covered by window `wid`, both ends included.
    pub fn interval(&self, wid: u64) -> (i64, i64) {
        let tick = self.anchor_ms + wid as i64 * self.slide_ms;
        (tick - self.range_ms - self.set_back_ms, tick - self.set_back_ms)
    }

    /// Window ids whose interval contains `time_ms`.
    pub fn covering_wids(&self, time_ms: i64) -> impl Iterator<Item = u64> {
        // time ∈ [k·sl + a − r − sb, k·sl + a − sb]  ⇔
        // (time + sb − a) / sl ≤ k ≤ (time + sb + r − a) / sl
        let lo_num = time_ms + self.set_back_ms - self.anchor_ms;
        let hi_num = lo_num + self.range_ms;
        let lo = div_ceil(lo_num, self.slide_ms).max(0);
        let hi = div_floor(hi_num, self.slide_ms);
        (lo..=hi).filter_map(|k| u64::try_from(k).ok())
    }
}

fn div_floor(a: i64, b: i64) -> i64 {
    let q = a / b;
    if a % b != 0 && (a < 0) != (b < 0) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i64, b: i64) -> i64 {
    -div_floor(-a, b)
}

/// A window's contents for one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignedWindow {
    pub wid: u64,
    pub sensor: String,
    pub start_ms: i64,
    pub end_ms: i64,
    /// Time-ordered (time, value) samples.
    pub samples: Vec<(i64, f64)>,
}

/// Assigns time-ordered measurements to sliding windows, one assigned
/// window per (wid, sensor) with at least one sample. Measurements that
/// arrive out of order beyond the lateness bound are rejected and counted.
pub fn assign_windows(
    measurements: &[Measurement],
    assigner: &WindowAssigner,
    metrics: &mut Metrics,
) -> Vec<AssignedWindow> {
    let mut last_seen: BTreeMap<&str, i64> = BTreeMap::new();
    let mut buckets: BTreeMap<(u64, &str), Vec<(i64, f64)>> = BTreeMap::new();
    for m in measurements {
        if let Some(&last) = last_seen.get(m.sensor.as_str()) {
            if m.time_ms < last - assigner.lateness_ms {
                metrics.rejected_late += 1;
                continue;
            }
        }
        let entry = last_seen.entry(m.sensor.as_str()).or_insert(m.time_ms);
        if m.time_ms > *entry {
            *entry = m.time_ms;
        }
        for wid in assigner.covering_wids(m.time_ms) {
            buckets.entry((wid, m.sensor.as_str())).or_default().push((m.time_ms, m.value));
        }
    }
    let mut out = Vec::with_capacity(buckets.len());
    for ((wid, sensor), mut samples) in buckets {
        samples.sort_by_key(|a| a.0);
        let (start_ms, end_ms) = assigner.interval(wid);
        metrics.windows_assigned += 1;
        out.push(AssignedWindow {
            wid,
            sensor: String::from(sensor),
            start_ms,
            end_ms,
            samples,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(sensor: &str, t: i64, v: f64) -> Measurement {
        Measurement { sensor: sensor.into(), time_ms: t, value: v }
    }

    #[test]
    fn measurement_lands_in_sixty_one_overlapping_windows() {
        // range 60s, slide 1s: a reading at t=30s is covered by every tick
        // t with t-60 ≤ 30 ≤ t, i.e. ticks 30..=90.
        let assigner = WindowAssigner::new(60_000, 1_000);
        let mut metrics = Metrics::default();
        let windows = assign_windows(&[m("a", 30_000, 1.0)], &assigner, &mut metrics);
        assert_eq!(windows.len(), 61);
        assert_eq!(windows.first().unwrap().wid, 30);
        assert_eq!(windows.last().unwrap().wid, 90);
        let wids: alloc::vec::Vec<u64> = assigner.covering_wids(30_000).collect();
        assert_eq!(wids.len(), 61);
    }

    #[test]
    fn zero_range_keeps_only_exact_tick_times() {
        let assigner = WindowAssigner::new(0, 1_000);
        let mut metrics = Metrics::default();
        let windows =
            assign_windows(&[m("a", 2_000, 1.0), m("a", 2_500, 2.0)], &assigner, &mut metrics);
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].wid, 2);
        assert_eq!(windows[0].samples, [(2_000, 1.0)]);
    }

    #[test]
    fn set_back_shifts_the_interval() {
        let assigner = WindowAssigner::new(10_000, 10_000).with_set_back(100_000);
        // Window k covers [k·10s − 10s − 100s, k·10s − 100s].
        assert_eq!(assigner.interval(11), (0, 10_000));
        let mut metrics = Metrics::default();
        let windows = assign_windows(&[m("a", 5_000, 1.0)], &assigner, &mut metrics);
        assert!(windows.iter().any(|w| w.wid == 11));
    }

    #[test]
    fn out_of_order_beyond_lateness_is_rejected() {
        let assigner = WindowAssigner::new(10_000, 1_000);
        let mut metrics = Metrics::default();
        let windows = assign_windows(
            &[m("a", 5_000, 1.0), m("a", 4_000, 2.0), m("b", 1_000, 3.0)],
            &assigner,
            &mut metrics,
        );
        assert_eq!(metrics.rejected_late, 1);
        // Sensor b is independent of a's clock.
        assert!(windows.iter().any(|w| w.sensor == "b"));
    }

    #[test]
    fn duplicate_timestamps_are_both_retained() {
        let assigner = WindowAssigner::new(10_000, 10_000);
        let mut metrics = Metrics::default();
        let windows =
            assign_windows(&[m("a", 5_000, 1.0), m("a", 5_000, 2.0)], &assigner, &mut metrics);
        assert_eq!(windows[0].samples.len(), 2);
    }

    #[test]
    fn tumbling_grid_is_non_overlapping() {
        // 120 half-second-offset readings, tumbling 60s windows: two
        // windows of 60 samples each and no shared reading.
        let data: alloc::vec::Vec<Measurement> =
            (0..120).map(|i| m("a", 500 + i * 1_000, i as f64)).collect();
        let assigner = WindowAssigner::new(60_000, 60_000);
        let mut metrics = Metrics::default();
        let windows = assign_windows(&data, &assigner, &mut metrics);
        assert_eq!(windows.len(), 2);
        assert!(windows.iter().all(|w| w.samples.len() == 60));
        let all: alloc::collections::BTreeSet<i64> =
            windows.iter().flat_map(|w| w.samples.iter().map(|s| s.0)).collect();
        assert_eq!(all.len(), 120);
    }
}
