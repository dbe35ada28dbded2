//! The stream engine: window assignment, materialised window signatures,
//! hybrid correlation operators, the archived window store with adaptive
//! indexing, physical plan analysis, and the pulse-driven executor.

mod correlate;
mod exec;
mod index;
mod metrics;
mod plan;
mod signature;
mod store;
mod window;

pub use correlate::{avg_similar, cosine, min_similar, pearson, StatsMode, Undefined};
pub use exec::{
    execute, EngineConfig, EngineError, ExecOutcome, OutputRow, RunContext, SourceBinding,
    TickData, TickPartition,
};
pub use index::{AdaptiveIndex, DEFAULT_BATCH_SIZE, DEFAULT_PROBE_THRESHOLD, THRESHOLD_OFF};
pub use metrics::Metrics;
pub use plan::{
    extract_spec, plan_condition, plan_hybrid, AccessMode, ConditionPlan, CorrelateSpec,
    PlanShapeError, SliceArm, TriplePlan,
};
pub use signature::{compute_mws, MwsSignature};
pub use store::{WindowBlock, WindowRecord, WindowStore};
pub use window::{assign_windows, AssignedWindow, Measurement, WindowAssigner};
