//! Benchmark harness: correlates a live stream window against every
//! archived window, per query kind, with the signature optimization on or
//! off and a configurable worker count. Reports the join/compute time
//! split per cycle and the qualifying rows, which are byte-comparable
//! across worker counts.

use std::fmt::Write as _;
use std::time::Instant;

use ontostream_core::engine::{
    avg_similar, compute_mws, min_similar, pearson, AdaptiveIndex, Metrics, StatsMode,
    WindowStore,
};
use ontostream_core::partition::partition;

use crate::synth::{archived_store, live_stream, SynthConfig};

pub const PEARSON_THRESHOLD: f64 = 0.75;
pub const SIMILARITY_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchQuery {
    Pearson,
    Avg,
    Min,
}

impl BenchQuery {
    pub fn name(self) -> &'static str {
        match self {
            BenchQuery::Pearson => "pearson",
            BenchQuery::Avg => "avg",
            BenchQuery::Min => "min",
        }
    }

    pub fn parse(s: &str) -> Option<BenchQuery> {
        Some(match s {
            "pearson" => BenchQuery::Pearson,
            "avg" => BenchQuery::Avg,
            "min" => BenchQuery::Min,
            _ => return None,
        })
    }

    /// Whether the archived side is decidable from signatures alone.
    pub fn signature_only(self) -> bool {
        matches!(self, BenchQuery::Avg | BenchQuery::Min)
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub windows: usize,
    pub tuples: usize,
    pub cycles: usize,
    pub seed: u64,
    pub workers: usize,
    pub mws: bool,
    pub index_threshold: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            windows: 10_000,
            tuples: 60,
            cycles: 15,
            seed: 42,
            workers: 1,
            mws: true,
            index_threshold: ontostream_core::engine::DEFAULT_PROBE_THRESHOLD,
        }
    }
}

/// One qualifying (cycle, window) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchResultRow {
    pub tick_ms: i64,
    pub wid: u64,
    pub coefficient: Option<f64>,
}

/// Per-cycle timing of one cell.
#[derive(Debug, Clone)]
pub struct CycleTiming {
    pub cycle: usize,
    pub join_ms: f64,
    pub compute_ms: f64,
    pub total_ms: f64,
    pub qualifying: usize,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub query: BenchQuery,
    pub mws: bool,
    pub workers: usize,
    pub timings: Vec<CycleTiming>,
    pub rows: Vec<BenchResultRow>,
    pub metrics: Metrics,
}

impl CellOutcome {
    pub fn median_total_ms(&self) -> f64 {
        let mut totals: Vec<f64> = self.timings.iter().map(|t| t.total_ms).collect();
        totals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        totals[totals.len() / 2]
    }

    pub fn median_join_ms(&self) -> f64 {
        let mut joins: Vec<f64> = self.timings.iter().map(|t| t.join_ms).collect();
        joins.sort_by(|a, b| a.partial_cmp(b).unwrap());
        joins[joins.len() / 2]
    }

    /// Canonical byte rendering of the qualifying rows.
    pub fn rows_bytes(&self) -> String {
        let mut out = String::from("tick_ms,wid,coefficient\n");
        for r in &self.rows {
            match r.coefficient {
                Some(c) => {
                    let _ = writeln!(out, "{},{},{c}", r.tick_ms, r.wid);
                }
                None => {
                    let _ = writeln!(out, "{},{},", r.tick_ms, r.wid);
                }
            }
        }
        out
    }
}

/// Runs one (query, mws, workers) cell of the benchmark over a shared
/// store and live stream.
pub fn run_cell(
    query: BenchQuery,
    cfg: &BenchConfig,
    store: &WindowStore,
    live: &[ontostream_core::engine::Measurement],
) -> CellOutcome {
    let plan = partition(store, cfg.workers).expect("workers >= 1");
    let mut indexes: Vec<AdaptiveIndex> =
        (0..cfg.workers).map(|_| AdaptiveIndex::new(cfg.index_threshold)).collect();
    let mut all_metrics = Metrics::default();
    let mut timings = Vec::with_capacity(cfg.cycles);
    let mut rows: Vec<BenchResultRow> = Vec::new();

    for cycle in 0..cfg.cycles {
        let lo = cycle * cfg.tuples;
        let hi = (lo + cfg.tuples).min(live.len());
        let live_values: Vec<f64> = live[lo..hi].iter().map(|m| m.value).collect();
        if live_values.is_empty() {
            break;
        }
        let tick_ms = live[hi - 1].time_ms;
        let live_sig = compute_mws(&live_values).expect("nonempty live window");

        let started = Instant::now();
        let worker_outputs: Vec<(Vec<BenchResultRow>, f64, f64, Metrics)> =
            std::thread::scope(|scope| {
                let mut handles = Vec::with_capacity(cfg.workers);
                for (w, index) in indexes.iter_mut().enumerate() {
                    let wids = &plan.assignments[w];
                    let live_values = &live_values;
                    let live_sig = &live_sig;
                    handles.push(scope.spawn(move || {
                        let mut metrics = Metrics::default();
                        let mut out = Vec::new();
                        let mut join_ns = 0u128;
                        let mut compute_ns = 0u128;
                        let mut block: Vec<f64> = Vec::with_capacity(live_values.len());
                        for &wid in wids {
                            let record_pos = store
                                .records
                                .binary_search_by(|r| r.wid.cmp(&wid))
                                .expect("partitioned wid exists");
                            let record = &store.records[record_pos];

                            // Join phase: locate and read the raw block -
                            // pruned entirely for signature-only cells.
                            let need_raw = !(cfg.mws && query.signature_only());
                            if need_raw {
                                let t0 = Instant::now();
                                let pos = index
                                    .probe(store, wid, &record.sensor, &mut metrics)
                                    .expect("block exists");
                                block.clear();
                                block.extend(
                                    store.fetch_block_at(pos, &mut metrics).iter().map(|s| s.1),
                                );
                                join_ns += t0.elapsed().as_nanos();
                            }

                            // Compute phase.
                            let t0 = Instant::now();
                            let verdict: Option<Option<f64>> = match query {
                                BenchQuery::Pearson => {
                                    let mode = if cfg.mws { StatsMode::Mws } else { StatsMode::Direct };
                                    match pearson(live_values, &block, &record.signature, mode) {
                                        Ok(r) if r > PEARSON_THRESHOLD => Some(Some(r)),
                                        Ok(_) => None,
                                        Err(_) => {
                                            metrics.excluded_pairs += 1;
                                            None
                                        }
                                    }
                                }
                                BenchQuery::Avg | BenchQuery::Min => {
                                    let archived_sig = if cfg.mws {
                                        metrics.signature_reads += 1;
                                        record.signature
                                    } else {
                                        compute_mws(&block).expect("nonempty block")
                                    };
                                    let similar = match query {
                                        BenchQuery::Avg => {
                                            avg_similar(live_sig, &archived_sig, SIMILARITY_THRESHOLD)
                                        }
                                        _ => min_similar(live_sig, &archived_sig, SIMILARITY_THRESHOLD),
                                    };
                                    if similar {
                                        Some(None)
                                    } else {
                                        None
                                    }
                                }
                            };
                            compute_ns += t0.elapsed().as_nanos();
                            if let Some(coefficient) = verdict {
                                out.push(BenchResultRow { tick_ms: 0, wid, coefficient });
                            }
                        }
                        (out, join_ns as f64 / 1e6, compute_ns as f64 / 1e6, metrics)
                    }));
                }
                handles.into_iter().map(|h| h.join().expect("bench worker panicked")).collect()
            });
        let total_ms = started.elapsed().as_nanos() as f64 / 1e6;

        let mut cycle_rows: Vec<BenchResultRow> = Vec::new();
        let mut join_ms = 0.0;
        let mut compute_ms = 0.0;
        for (mut part, j, c, m) in worker_outputs {
            for r in &mut part {
                r.tick_ms = tick_ms;
            }
            cycle_rows.extend(part);
            join_ms += j;
            compute_ms += c;
            all_metrics.merge(&m);
        }
        cycle_rows.sort_by_key(|a| (a.tick_ms, a.wid));
        timings.push(CycleTiming {
            cycle,
            join_ms,
            compute_ms,
            total_ms,
            qualifying: cycle_rows.len(),
        });
        rows.extend(cycle_rows);
        all_metrics.ticks += 1;
    }
    all_metrics.output_rows = rows.len() as u64;
    CellOutcome { query, mws: cfg.mws, workers: cfg.workers, timings, rows, metrics: all_metrics }
}

/// Runs a whole suite and renders the timing table as CSV.
pub struct BenchSuite {
    pub queries: Vec<BenchQuery>,
    pub mws_modes: Vec<bool>,
    pub worker_counts: Vec<usize>,
    pub config: BenchConfig,
}

pub fn run_suite(suite: &BenchSuite) -> (Vec<CellOutcome>, String) {
    let synth = SynthConfig {
        windows: suite.config.windows,
        tuples: suite.config.tuples,
        seed: suite.config.seed,
        ..SynthConfig::default()
    };
    let store = archived_store(&synth);
    let live = live_stream(&synth, suite.config.cycles, 0);

    let mut cells = Vec::new();
    let mut csv = String::from(
        "query,mws,workers,cycle,join_ms,compute_ms,total_ms,qualifying,measurements_scans\n",
    );
    for &query in &suite.queries {
        for &mws in &suite.mws_modes {
            for &workers in &suite.worker_counts {
                let cfg = BenchConfig { mws, workers, ..suite.config.clone() };
                let cell = run_cell(query, &cfg, &store, &live);
                for t in &cell.timings {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{:.3},{:.3},{:.3},{},{}",
                        query.name(),
                        if mws { "on" } else { "off" },
                        workers,
                        t.cycle,
                        t.join_ms,
                        t.compute_ms,
                        t.total_ms,
                        t.qualifying,
                        cell.metrics.measurements_scans,
                    );
                }
                cells.push(cell);
            }
        }
    }
    (cells, csv)
}
