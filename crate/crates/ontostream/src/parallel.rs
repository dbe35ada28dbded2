//! Fork-join execution over partitioned archived windows.
//!
//! Per pulse tick, N in-process workers evaluate disjoint window
//! partitions against shared immutable tick data (worker 0 also takes the
//! archive-free combinations), and the coordinator merges their rows into
//! the canonical (tick, wid, bindings) order. The merged output is
//! identical to a single-worker run; a worker error aborts the tick with
//! no partial emission.

use std::collections::BTreeMap;
use std::time::Instant;

use ontostream_core::engine::{
    AdaptiveIndex, EngineConfig, EngineError, ExecOutcome, Metrics, OutputRow, RunContext,
    SourceBinding, TickPartition,
};
use ontostream_core::ir::Database;
use ontostream_core::starql::ExecutablePlan;

pub struct ParallelOutcome {
    pub rows: Vec<OutputRow>,
    pub metrics: Metrics,
    /// Cumulative busy time per worker, milliseconds.
    pub worker_ms: Vec<(usize, u128)>,
}

/// Runs the plan with `workers` concurrent execution units. `workers == 1`
/// degenerates to the sequential engine loop (same code path as N > 1,
/// minus the threads).
pub fn run_parallel(
    plan: &ExecutablePlan,
    db: &Database,
    bindings: BTreeMap<String, SourceBinding>,
    config: EngineConfig,
    workers: usize,
) -> Result<ParallelOutcome, EngineError> {
    assert!(workers >= 1, "worker count must be at least 1");
    let ctx = RunContext::new(plan, db, bindings, config)?;

    let mut indexes: Vec<AdaptiveIndex> =
        (0..workers).map(|_| AdaptiveIndex::new(config.index_threshold)).collect();
    let mut worker_metrics: Vec<Metrics> = vec![Metrics::default(); workers];
    let mut worker_ms: Vec<u128> = vec![0; workers];
    let mut rows: Vec<OutputRow> = Vec::new();
    let mut merged_metrics = Metrics::default();
    merged_metrics.merge(&ctx.prep_metrics);

    for &t in ctx.ticks() {
        let tick = ctx.prepare_tick(t);
        if workers == 1 {
            let started = Instant::now();
            let part = ctx.evaluate_tick(&tick, None, &mut indexes[0], &mut worker_metrics[0])?;
            worker_ms[0] += started.elapsed().as_millis();
            rows.extend(part);
        } else {
            // Fork: each worker gets its partition, its own index, and its
            // own metrics; everything else is shared immutably.
            let results: Vec<Result<(Vec<OutputRow>, u128), EngineError>> =
                std::thread::scope(|scope| {
                    let mut handles = Vec::with_capacity(workers);
                    for (w, (index, metrics)) in
                        indexes.iter_mut().zip(worker_metrics.iter_mut()).enumerate()
                    {
                        let ctx = &ctx;
                        let tick = &tick;
                        handles.push(scope.spawn(move || {
                            let started = Instant::now();
                            let part = ctx.evaluate_tick(
                                tick,
                                Some(TickPartition { index: w, count: workers }),
                                index,
                                metrics,
                            )?;
                            Ok((part, started.elapsed().as_millis()))
                        }));
                    }
                    handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
                });
            // Join: any worker error aborts the tick before any of its
            // rows are merged.
            let mut tick_rows = Vec::new();
            for (w, result) in results.into_iter().enumerate() {
                let (part, ms) = result?;
                worker_ms[w] += ms;
                tick_rows.extend(part);
            }
            tick_rows.sort_by(|a, b| (a.wid, &a.bindings).cmp(&(b.wid, &b.bindings)));
            rows.extend(tick_rows);
        }
    }

    for m in &worker_metrics {
        merged_metrics.merge(m);
    }
    merged_metrics.ticks = ctx.ticks().len() as u64;
    merged_metrics.output_rows = rows.len() as u64;
    Ok(ParallelOutcome {
        rows,
        metrics: merged_metrics,
        worker_ms: worker_ms.into_iter().enumerate().collect(),
    })
}

/// Convenience wrapper matching the sequential `execute` shape.
pub fn execute_parallel(
    plan: &ExecutablePlan,
    db: &Database,
    bindings: BTreeMap<String, SourceBinding>,
    config: EngineConfig,
    workers: usize,
) -> Result<ExecOutcome, EngineError> {
    let outcome = run_parallel(plan, db, bindings, config, workers)?;
    Ok(ExecOutcome { rows: outcome.rows, metrics: outcome.metrics })
}
