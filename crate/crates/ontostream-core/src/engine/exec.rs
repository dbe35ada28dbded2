//! Plan execution: the pulse-driven tick loop.
//!
//! The static subplan is evaluated once and its answers gate the streaming
//! bindings (static-first). Per tick, live windows are formed per source
//! and sensor, archived candidates are looked up (the window one set-back
//! ago, or every archived window for store-wide correlation), and the
//! correlate condition is evaluated per candidate combination: signature
//! conjuncts first, raw conjuncts only for survivors. Everything is a pure
//! function of the replayed inputs, so two runs produce identical rows,
//! and `evaluate_tick` can be fanned out over disjoint window partitions
//! by a caller that supplies one adaptive index per execution unit.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::correlate::{self, StatsMode, Undefined};
use super::index::AdaptiveIndex;
use super::metrics::Metrics;
use super::plan::{extract_spec, plan_condition, CorrelateSpec, PlanShapeError, TriplePlan};
use super::signature::{compute_mws, MwsSignature};
use super::store::WindowStore;
use super::window::{Measurement, WindowAssigner};
use crate::ir::{evaluate, Condition, Database, EvalError, Quantifier, StreamFn, ValueExpr};
use crate::ontology::Cmp;
use crate::starql::ExecutablePlan;
use crate::starql::ast::{OutputForm, TimeAnchor};

/// What a declared stream source is bound to at run time.
#[derive(Debug, Clone)]
pub enum SourceBinding {
    /// A replayed, time-ordered measurement sequence.
    Live(Vec<Measurement>),
    /// A pre-archived window store. `all_windows` correlates the live
    /// window against every archived window each tick (store-wide
    /// similarity search) instead of the single window one set-back ago.
    Archived { store: WindowStore, all_windows: bool },
}

#[derive(Debug, Clone, Copy)]
pub struct EngineConfig {
    /// Read archived moments from signatures (true) or recompute them
    /// from raw blocks (false). Result rows are identical either way.
    pub mws: bool,
    pub index_threshold: u64,
    pub lateness_ms: i64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mws: true,
            index_threshold: super::index::DEFAULT_PROBE_THRESHOLD,
            lateness_ms: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputRow {
    pub tick_ms: i64,
    pub wid: u64,
    /// Sorted (variable, value) bindings of the group and output variables.
    pub bindings: Vec<(String, String)>,
    /// The correlation value, when the condition is a single threshold
    /// comparison over a correlation function.
    pub coefficient: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ExecOutcome {
    pub rows: Vec<OutputRow>,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EngineError {
    Static(EvalError),
    PlanShape(PlanShapeError),
    MissingSourceBinding { source: String },
    /// A per-state expression mixed into an aggregate-only context.
    MixedStateExpression,
}

impl core::fmt::Display for EngineError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EngineError::Static(e) => write!(f, "static plan evaluation failed: {e}"),
            EngineError::PlanShape(e) => write!(f, "{e}"),
            EngineError::MissingSourceBinding { source } => {
                write!(f, "no data bound for stream `{source}`")
            }
            EngineError::MixedStateExpression => {
                f.write_str("a series variable is used outside any state or aggregate context")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EngineError {}

impl From<PlanShapeError> for EngineError {
    fn from(e: PlanShapeError) -> Self {
        EngineError::PlanShape(e)
    }
}

/// Prepared run state: static answers, extracted correlate spec, archived
/// stores, and the tick schedule.
pub struct RunContext {
    pub config: EngineConfig,
    spec: Option<CorrelateSpec>,
    static_answers: Option<StaticAnswers>,
    output: OutputForm,
    /// Per source: window range for live slicing.
    live_sources: BTreeMap<String, LiveSource>,
    archived_sources: BTreeMap<String, ArchivedSource>,
    ticks: Vec<i64>,
    pub prep_metrics: Metrics,
}

struct StaticAnswers {
    vars: Vec<String>,
    rows: BTreeSet<Vec<String>>,
}

struct LiveSource {
    range_ms: i64,
    measurements: Vec<Measurement>,
}

struct ArchivedSource {
    store: WindowStore,
    all_windows: bool,
    set_back_ms: i64,
}

/// One execution unit's share of a tick: unit `index` of `count` takes the
/// archived windows hashing to it, and unit 0 additionally takes the
/// combinations that touch no archived window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickPartition {
    pub index: usize,
    pub count: usize,
}

/// Everything one tick needs, prepared once and shared immutably by the
/// execution units evaluating its candidate partitions.
pub struct TickData {
    pub tick_ms: i64,
    /// source → sensor → time-ordered values in the source's live window.
    live_series: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
    /// source → candidate record positions in that source's store.
    archived_candidates: BTreeMap<String, Vec<usize>>,
}

impl RunContext {
    pub fn new(
        plan: &ExecutablePlan,
        db: &Database,
        mut bindings: BTreeMap<String, SourceBinding>,
        config: EngineConfig,
    ) -> Result<RunContext, EngineError> {
        let mut prep_metrics = Metrics::default();

        let static_answers = match &plan.static_plan {
            None => None,
            Some(sp) => {
                let rel = evaluate(sp, db).map_err(EngineError::Static)?;
                let rows = rel
                    .rows
                    .iter()
                    .map(|r| r.iter().map(|l| l.to_string()).collect())
                    .collect();
                Some(StaticAnswers { vars: rel.columns, rows })
            }
        };

        let spec = match &plan.stream_plan {
            None => None,
            Some(sp) => Some(extract_spec(sp)?),
        };

        // The replay clock: NOW is the earliest live measurement unless
        // the pulse anchors at an absolute time.
        let mut live_min: Option<i64> = None;
        let mut live_max: Option<i64> = None;
        for src in &plan.sources {
            if src.set_back_ms == 0 {
                if let Some(SourceBinding::Live(ms)) = bindings.get(&src.name) {
                    for m in ms {
                        live_min = Some(live_min.map_or(m.time_ms, |v| v.min(m.time_ms)));
                        live_max = Some(live_max.map_or(m.time_ms, |v| v.max(m.time_ms)));
                    }
                }
            }
        }
        let start = match plan.pulse_start {
            TimeAnchor::AbsoluteMs(ms) => ms,
            TimeAnchor::Now => live_min.unwrap_or(0),
        };
        let ticks: Vec<i64> = match live_max {
            None => Vec::new(),
            Some(end) => {
                let freq = plan.pulse_frequency_ms.max(1);
                let mut out = Vec::new();
                let mut t = start;
                while t <= end {
                    out.push(t);
                    t += freq;
                }
                out
            }
        };

        let mut live_sources = BTreeMap::new();
        let mut archived_sources = BTreeMap::new();
        for src in &plan.sources {
            let binding = bindings
                .remove(&src.name)
                .ok_or_else(|| EngineError::MissingSourceBinding { source: src.name.clone() })?;
            match binding {
                SourceBinding::Live(measurements) if src.set_back_ms == 0 => {
                    live_sources.insert(
                        src.name.clone(),
                        LiveSource { range_ms: src.range_ms, measurements },
                    );
                }
                SourceBinding::Live(measurements) => {
                    // A set-back stream is archived up front: windows are
                    // formed on its own timeline, anchored so that window
                    // ends align with `tick − setback`.
                    let assigner = WindowAssigner {
                        range_ms: src.range_ms,
                        slide_ms: src.slide_ms,
                        anchor_ms: start - src.set_back_ms,
                        set_back_ms: 0,
                        lateness_ms: config.lateness_ms,
                    };
                    let store = WindowStore::archive(&measurements, &assigner, &mut prep_metrics);
                    archived_sources.insert(
                        src.name.clone(),
                        ArchivedSource { store, all_windows: false, set_back_ms: src.set_back_ms },
                    );
                }
                SourceBinding::Archived { store, all_windows } => {
                    archived_sources.insert(
                        src.name.clone(),
                        ArchivedSource { store, all_windows, set_back_ms: src.set_back_ms },
                    );
                }
            }
        }

        Ok(RunContext {
            config,
            spec,
            static_answers,
            output: plan.output.clone(),
            live_sources,
            archived_sources,
            ticks,
            prep_metrics,
        })
    }

    pub fn ticks(&self) -> &[i64] {
        &self.ticks
    }

    pub fn spec(&self) -> Option<&CorrelateSpec> {
        self.spec.as_ref()
    }

    pub fn archived_store(&self, source: &str) -> Option<&WindowStore> {
        self.archived_sources.get(source).map(|a| &a.store)
    }

    pub fn prepare_tick(&self, tick_ms: i64) -> TickData {
        let mut live_series = BTreeMap::new();
        for (name, src) in &self.live_sources {
            let lo = tick_ms - src.range_ms;
            let mut per_sensor: BTreeMap<String, Vec<(i64, f64)>> = BTreeMap::new();
            for m in &src.measurements {
                if m.time_ms >= lo && m.time_ms <= tick_ms {
                    per_sensor.entry(m.sensor.clone()).or_default().push((m.time_ms, m.value));
                }
            }
            let series: BTreeMap<String, Vec<f64>> = per_sensor
                .into_iter()
                .map(|(sensor, mut samples)| {
                    samples.sort_by_key(|s| s.0);
                    (sensor, samples.into_iter().map(|s| s.1).collect())
                })
                .collect();
            live_series.insert(name.clone(), series);
        }
        let mut archived_candidates = BTreeMap::new();
        for (name, src) in &self.archived_sources {
            let positions: Vec<usize> = if src.all_windows {
                (0..src.store.records.len()).collect()
            } else {
                let end = tick_ms - src.set_back_ms;
                src.store
                    .records
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| r.end_ms == end)
                    .map(|(i, _)| i)
                    .collect()
            };
            archived_candidates.insert(name.clone(), positions);
        }
        TickData { tick_ms, live_series, archived_candidates }
    }

    /// Evaluates one tick, restricted to this execution unit's partition
    /// when one is given: archived candidates hash-route by window id, and
    /// combinations with no archived window at all belong to unit 0. Pure
    /// up to the adaptive-index and metrics state, which are per unit.
    pub fn evaluate_tick(
        &self,
        tick: &TickData,
        partition: Option<TickPartition>,
        index: &mut AdaptiveIndex,
        metrics: &mut Metrics,
    ) -> Result<Vec<OutputRow>, EngineError> {
        let Some(spec) = &self.spec else {
            if partition.map(|p| p.index != 0).unwrap_or(false) {
                return Ok(Vec::new());
            }
            return Ok(self.static_only_rows(tick.tick_ms));
        };
        // Static gate, applied before any streaming work.
        if let Some(sa) = &self.static_answers {
            if sa.rows.is_empty() {
                return Ok(Vec::new());
            }
        }

        let mut combos: Vec<Combo> = alloc::vec![Combo::default()];
        for triple in &spec.triples {
            let mut next = Vec::new();
            for combo in &combos {
                self.extend_combo(combo, triple, tick, partition, &mut next);
            }
            combos = next;
            if combos.is_empty() {
                return Ok(Vec::new());
            }
        }
        if let Some(p) = partition {
            if p.index != 0 {
                combos.retain(|c| c.wid.is_some());
            }
        }

        let mut rows: Vec<OutputRow> = Vec::new();
        let mut seen: BTreeSet<(u64, Vec<(String, String)>)> = BTreeSet::new();
        for combo in &combos {
            // Static-first: combinations outside the static answers never
            // reach the condition.
            let bindings = self.gated_bindings(combo);
            if bindings.is_empty() {
                continue;
            }
            // The condition depends only on the combination's series, so
            // it runs once however many static rows join the binding.
            let archived_vars: BTreeSet<String> = combo
                .series
                .iter()
                .filter(|(_, key)| matches!(key, SeriesKey::Archived { .. }))
                .map(|(var, _)| var.clone())
                .collect();
            let cond_plan = plan_condition(&spec.condition, &archived_vars);
            let mut eval = ComboEval {
                ctx: self,
                spec,
                tick,
                combo,
                index,
                metrics,
                fetched: BTreeMap::new(),
                coefficient: None,
            };
            let mut pass = true;
            let mut excluded = false;
            for conjunct in &cond_plan.prefilter {
                match eval.eval_condition(conjunct, None) {
                    Ok(true) => {}
                    Ok(false) => {
                        pass = false;
                        break;
                    }
                    Err(_) => {
                        excluded = true;
                        break;
                    }
                }
            }
            if !pass {
                eval.metrics.prefilter_pruned += 1;
                continue;
            }
            if !excluded {
                for conjunct in &cond_plan.residual {
                    match eval.eval_quantified(conjunct) {
                        Ok(true) => {}
                        Ok(false) => {
                            pass = false;
                            break;
                        }
                        Err(EvalStop::Undefined(_)) => {
                            excluded = true;
                            break;
                        }
                        Err(EvalStop::Engine(e)) => return Err(e),
                    }
                }
            }
            if excluded {
                metrics.excluded_pairs += 1;
                continue;
            }
            if !pass {
                continue;
            }
            let coefficient = eval.coefficient;
            let wid = combo.wid.unwrap_or(0);
            for binding in bindings {
                let output_binding = self.output_binding(&binding);
                if seen.insert((wid, output_binding.clone())) {
                    rows.push(OutputRow {
                        tick_ms: tick.tick_ms,
                        wid,
                        bindings: output_binding,
                        coefficient,
                    });
                }
            }
        }
        rows.sort_by(|a, b| (a.wid, &a.bindings).cmp(&(b.wid, &b.bindings)));
        Ok(rows)
    }

    fn static_only_rows(&self, tick_ms: i64) -> Vec<OutputRow> {
        let Some(sa) = &self.static_answers else { return Vec::new() };
        let mut rows = Vec::new();
        let mut seen = BTreeSet::new();
        for row in &sa.rows {
            let binding: BTreeMap<String, String> = sa
                .vars
                .iter()
                .cloned()
                .zip(row.iter().cloned())
                .collect();
            let mut out = Vec::new();
            let mut complete = true;
            for v in self.output.variables() {
                match binding.get(v) {
                    Some(val) => out.push((v.clone(), val.clone())),
                    None => {
                        complete = false;
                        break;
                    }
                }
            }
            if complete && seen.insert(out.clone()) {
                rows.push(OutputRow { tick_ms, wid: 0, bindings: out, coefficient: None });
            }
        }
        rows
    }

    /// Join the combo's subject bindings with the static answers; without
    /// a static plan the subjects stand alone.
    fn gated_bindings(&self, combo: &Combo) -> Vec<BTreeMap<String, String>> {
        match &self.static_answers {
            None => alloc::vec![combo.subjects.clone()],
            Some(sa) => {
                let mut out = Vec::new();
                for row in &sa.rows {
                    let mut merged = combo.subjects.clone();
                    let mut compatible = true;
                    for (var, value) in sa.vars.iter().zip(row.iter()) {
                        match merged.get(var) {
                            Some(existing) if existing != value => {
                                compatible = false;
                                break;
                            }
                            _ => {
                                merged.insert(var.clone(), value.clone());
                            }
                        }
                    }
                    if compatible {
                        out.push(merged);
                    }
                }
                out
            }
        }
    }

    fn output_binding(&self, binding: &BTreeMap<String, String>) -> Vec<(String, String)> {
        let mut wanted: BTreeSet<&String> = self.output.variables().into_iter().collect();
        if let Some(spec) = &self.spec {
            wanted.extend(spec.group.iter());
        }
        wanted
            .into_iter()
            .filter_map(|v| binding.get(v).map(|val| (v.clone(), val.clone())))
            .collect()
    }

    fn extend_combo(
        &self,
        combo: &Combo,
        triple: &TriplePlan,
        tick: &TickData,
        partition: Option<TickPartition>,
        out: &mut Vec<Combo>,
    ) {
        let bound_subject = triple.subject_var.as_ref().and_then(|v| combo.subjects.get(v));
        for arm in &triple.arms {
            if let Some(series) = tick.live_series.get(&arm.stream) {
                for sensor in series.keys() {
                    if let Some(c) = &triple.subject_const {
                        if sensor != c {
                            continue;
                        }
                    }
                    if let Some(b) = bound_subject {
                        if sensor != b {
                            continue;
                        }
                    }
                    let mut next = combo.clone();
                    if let Some(v) = &triple.subject_var {
                        next.subjects.insert(v.clone(), sensor.clone());
                    }
                    next.series.insert(
                        triple.value_var.clone(),
                        SeriesKey::Live { source: arm.stream.clone(), sensor: sensor.clone() },
                    );
                    next.offsets.insert(triple.value_var.clone(), triple.offset);
                    out.push(next);
                }
            }
            if let Some(positions) = tick.archived_candidates.get(&arm.stream) {
                let store = &self.archived_sources[&arm.stream].store;
                for &pos in positions {
                    let record = &store.records[pos];
                    // Partition ownership is decided by the first archived
                    // window of a combination; later archived triples stay
                    // unfiltered so cross-window combinations land on
                    // exactly one unit.
                    if combo.wid.is_none() {
                        if let Some(p) = partition {
                            if crate::partition::worker_for(record.wid, p.count) != p.index {
                                continue;
                            }
                        }
                    }
                    if let Some(c) = &triple.subject_const {
                        if &record.sensor != c {
                            continue;
                        }
                    }
                    if let Some(b) = bound_subject {
                        if &record.sensor != b {
                            continue;
                        }
                    }
                    let mut next = combo.clone();
                    if let Some(v) = &triple.subject_var {
                        next.subjects.insert(v.clone(), record.sensor.clone());
                    }
                    next.series.insert(
                        triple.value_var.clone(),
                        SeriesKey::Archived { source: arm.stream.clone(), position: pos },
                    );
                    next.offsets.insert(triple.value_var.clone(), triple.offset);
                    if next.wid.is_none() {
                        next.wid = Some(record.wid);
                    }
                    out.push(next);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Combo {
    subjects: BTreeMap<String, String>,
    series: BTreeMap<String, SeriesKey>,
    offsets: BTreeMap<String, i64>,
    wid: Option<u64>,
}

#[derive(Debug, Clone)]
enum SeriesKey {
    Live { source: String, sensor: String },
    Archived { source: String, position: usize },
}

enum EvalStop {
    Undefined(#[allow(dead_code)] Undefined),
    Engine(EngineError),
}

impl From<Undefined> for EvalStop {
    fn from(u: Undefined) -> Self {
        EvalStop::Undefined(u)
    }
}

struct ComboEval<'a> {
    ctx: &'a RunContext,
    spec: &'a CorrelateSpec,
    tick: &'a TickData,
    combo: &'a Combo,
    index: &'a mut AdaptiveIndex,
    metrics: &'a mut Metrics,
    /// Raw archived series fetched for this combo, by variable.
    fetched: BTreeMap<String, Vec<f64>>,
    coefficient: Option<f64>,
}

impl<'a> ComboEval<'a> {
    /// Folds per-state conditions over the aligned states; aggregate-only
    /// conditions evaluate once.
    fn eval_quantified(&mut self, cond: &Condition) -> Result<bool, EvalStop> {
        if !condition_needs_state(cond) {
            return self
                .eval_condition(cond, None)
                .map_err(EvalStop::from);
        }
        let states = self.aligned_state_count(cond)?;
        match self.spec.quantifier {
            Quantifier::Exists => {
                for k in 0..states {
                    if self.eval_condition(cond, Some(k)).map_err(EvalStop::from)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Quantifier::Forall => {
                for k in 0..states {
                    if !self.eval_condition(cond, Some(k)).map_err(EvalStop::from)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }

    fn aligned_state_count(&mut self, cond: &Condition) -> Result<usize, EvalStop> {
        let vars = cond.variables();
        let series_vars: Vec<&String> =
            vars.iter().filter(|v| self.combo.series.contains_key(*v)).collect();
        if series_vars.is_empty() {
            return Ok(1);
        }
        let offsets: Vec<i64> = series_vars
            .iter()
            .map(|v| self.combo.offsets.get(*v).copied().unwrap_or(0))
            .collect();
        let min_off = *offsets.iter().min().unwrap();
        let max_off = *offsets.iter().max().unwrap();
        let mut aligned: Option<usize> = None;
        for v in &series_vars {
            let len = self.series_len(v)?;
            let span = (max_off - min_off) as usize;
            let usable = len.saturating_sub(span);
            aligned = Some(match aligned {
                None => usable,
                Some(a) => {
                    if a != usable {
                        return Err(EvalStop::Undefined(Undefined::LengthMismatch));
                    }
                    a
                }
            });
        }
        Ok(aligned.unwrap_or(0))
    }

    fn eval_condition(&mut self, cond: &Condition, state: Option<usize>) -> Result<bool, Undefined> {
        match cond {
            Condition::Cmp(cmp, l, r) => {
                let lv = self.eval_value(l, state)?;
                let rv = self.eval_value(r, state)?;
                // Record the correlation value behind a plain threshold
                // comparison so result rows can carry it.
                if state.is_none() {
                    if let ValueExpr::Call(StreamFn::Pearson | StreamFn::Cosine, _) = l {
                        self.coefficient = Some(lv);
                    }
                }
                Ok(cmp_f64(*cmp, lv, rv))
            }
            Condition::And(l, r) => {
                Ok(self.eval_condition(l, state)? && self.eval_condition(r, state)?)
            }
            Condition::Or(l, r) => {
                Ok(self.eval_condition(l, state)? || self.eval_condition(r, state)?)
            }
            Condition::Not(inner) => Ok(!self.eval_condition(inner, state)?),
        }
    }

    fn eval_value(&mut self, e: &ValueExpr, state: Option<usize>) -> Result<f64, Undefined> {
        match e {
            ValueExpr::Const(c) => Ok(*c),
            ValueExpr::Var(v) => match state {
                Some(k) => self.state_value(v, k),
                // A bare series variable outside any state context has no
                // single value; the plan split keeps this from happening
                // for compiled queries.
                None => Err(Undefined::TooShort),
            },
            ValueExpr::Call(f, args) => self.eval_call(*f, args, state),
            ValueExpr::Arith(op, l, r) => {
                let a = self.eval_value(l, state)?;
                let b = self.eval_value(r, state)?;
                Ok(match op {
                    crate::ir::ArithOp::Add => a + b,
                    crate::ir::ArithOp::Sub => a - b,
                    crate::ir::ArithOp::Mul => a * b,
                    crate::ir::ArithOp::Div => a / b,
                })
            }
        }
    }

    fn eval_call(
        &mut self,
        f: StreamFn,
        args: &[ValueExpr],
        state: Option<usize>,
    ) -> Result<f64, Undefined> {
        match f {
            StreamFn::Abs => {
                let arg = args.first().ok_or(Undefined::TooShort)?;
                let v = self.eval_value(arg, state)?;
                Ok(crate::fmath::abs(v))
            }
            StreamFn::Avg | StreamFn::Min | StreamFn::Max | StreamFn::Sum | StreamFn::Count => {
                let Some(ValueExpr::Var(v)) = args.first() else {
                    // Aggregates apply to a bound series variable.
                    return Err(Undefined::TooShort);
                };
                let stats = self.stats(v)?;
                Ok(match f {
                    StreamFn::Avg => stats.mean,
                    StreamFn::Min => stats.min,
                    StreamFn::Max => stats.max,
                    StreamFn::Sum => stats.sum,
                    StreamFn::Count => stats.count as f64,
                    _ => unreachable!(),
                })
            }
            StreamFn::Pearson | StreamFn::Cosine => {
                let (Some(ValueExpr::Var(a)), Some(ValueExpr::Var(b))) =
                    (args.first(), args.get(1))
                else {
                    return Err(Undefined::TooShort);
                };
                self.eval_cross(f, a, b)
            }
        }
    }

    /// Cross-term evaluation: both series materialized and aligned by
    /// ordinal position (with state offsets applied); the second side's
    /// moments come from its signature when it is archived, the store is
    /// in signature mode, and no offset slicing invalidates them.
    fn eval_cross(&mut self, f: StreamFn, a: &str, b: &str) -> Result<f64, Undefined> {
        let off_a = self.combo.offsets.get(a).copied().unwrap_or(0);
        let off_b = self.combo.offsets.get(b).copied().unwrap_or(0);
        let min_off = off_a.min(off_b);
        let skip_a = (off_a - min_off) as usize;
        let skip_b = (off_b - min_off) as usize;

        let sig_b = self.signature_of(b);
        let use_sig = self.ctx.config.mws && sig_b.is_some() && skip_a == 0 && skip_b == 0;

        let series_a = self.materialize(a)?;
        let series_b = self.materialize(b)?;
        let len_a = series_a.len().saturating_sub(skip_a);
        let len_b = series_b.len().saturating_sub(skip_b);
        if len_a != len_b {
            return Err(Undefined::LengthMismatch);
        }
        let a_slice = &series_a[skip_a..skip_a + len_a];
        let b_slice = &series_b[skip_b..skip_b + len_b];

        match f {
            StreamFn::Pearson => {
                if use_sig {
                    self.metrics.signature_reads += 1;
                    correlate::pearson(a_slice, b_slice, &sig_b.unwrap(), StatsMode::Mws)
                } else {
                    let sig = compute_mws(b_slice).ok_or(Undefined::TooShort)?;
                    correlate::pearson(a_slice, b_slice, &sig, StatsMode::Direct)
                }
            }
            StreamFn::Cosine => {
                if use_sig {
                    self.metrics.signature_reads += 1;
                    correlate::cosine(a_slice, b_slice, &sig_b.unwrap(), StatsMode::Mws)
                } else {
                    let sig = compute_mws(b_slice).ok_or(Undefined::TooShort)?;
                    correlate::cosine(a_slice, b_slice, &sig, StatsMode::Direct)
                }
            }
            _ => unreachable!(),
        }
    }

    fn signature_of(&self, var: &str) -> Option<MwsSignature> {
        match self.combo.series.get(var)? {
            SeriesKey::Archived { source, position } => {
                let store = &self.ctx.archived_sources[source].store;
                Some(store.records[*position].signature)
            }
            SeriesKey::Live { .. } => None,
        }
    }

    /// Window statistics for a variable: live series are summarized on the
    /// fly; archived ones read their signature in signature mode and
    /// recompute from the raw block otherwise.
    fn stats(&mut self, var: &str) -> Result<MwsSignature, Undefined> {
        match self.combo.series.get(var) {
            Some(SeriesKey::Live { source, sensor }) => {
                let series = &self.tick.live_series[source][sensor];
                compute_mws(series).ok_or(Undefined::TooShort)
            }
            Some(SeriesKey::Archived { source, position }) => {
                if self.ctx.config.mws {
                    self.metrics.signature_reads += 1;
                    Ok(self.ctx.archived_sources[source].store.records[*position].signature)
                } else {
                    let series = self.materialize(var)?;
                    compute_mws(&series).ok_or(Undefined::TooShort)
                }
            }
            None => Err(Undefined::TooShort),
        }
    }

    fn series_len(&mut self, var: &str) -> Result<usize, EvalStop> {
        match self.combo.series.get(var) {
            Some(SeriesKey::Live { source, sensor }) => {
                Ok(self.tick.live_series[source][sensor].len())
            }
            Some(SeriesKey::Archived { .. }) => {
                Ok(self.materialize(var).map_err(EvalStop::from)?.len())
            }
            None => Err(EvalStop::Engine(EngineError::MixedStateExpression)),
        }
    }

    fn state_value(&mut self, var: &str, state: usize) -> Result<f64, Undefined> {
        let offset = self.combo.offsets.get(var).copied().unwrap_or(0);
        let all_offsets: Vec<i64> = self.combo.offsets.values().copied().collect();
        let min_off = all_offsets.iter().min().copied().unwrap_or(0);
        let idx = state + (offset - min_off) as usize;
        let series = self.materialize(var)?;
        series.get(idx).copied().ok_or(Undefined::TooShort)
    }

    /// The full raw series of a variable; fetching an archived block goes
    /// through the adaptive index and counts as a measurements scan.
    fn materialize(&mut self, var: &str) -> Result<Vec<f64>, Undefined> {
        if let Some(cached) = self.fetched.get(var) {
            return Ok(cached.clone());
        }
        let series: Vec<f64> = match self.combo.series.get(var) {
            Some(SeriesKey::Live { source, sensor }) => {
                self.tick.live_series[source][sensor].clone()
            }
            Some(SeriesKey::Archived { source, position }) => {
                let store = &self.ctx.archived_sources[source].store;
                let record = &store.records[*position];
                let pos = self
                    .index
                    .probe(store, record.wid, &record.sensor, self.metrics)
                    .ok_or(Undefined::TooShort)?;
                store
                    .fetch_block_at(pos, self.metrics)
                    .iter()
                    .map(|s| s.1)
                    .collect()
            }
            None => return Err(Undefined::TooShort),
        };
        self.fetched.insert(var.to_string(), series.clone());
        Ok(series)
    }
}

fn cmp_f64(cmp: Cmp, a: f64, b: f64) -> bool {
    match cmp {
        Cmp::Ge => a >= b,
        Cmp::Le => a <= b,
        Cmp::Lt => a < b,
        Cmp::Gt => a > b,
        Cmp::Eq => a == b,
        Cmp::Ne => a != b,
    }
}

fn condition_needs_state(c: &Condition) -> bool {
    match c {
        Condition::Cmp(_, l, r) => !(l.contains_aggregate() || r.contains_aggregate()) && {
            let mut vars = BTreeSet::new();
            l.variables(&mut vars);
            r.variables(&mut vars);
            !vars.is_empty()
        },
        Condition::And(l, r) | Condition::Or(l, r) => {
            condition_needs_state(l) || condition_needs_state(r)
        }
        Condition::Not(inner) => condition_needs_state(inner),
    }
}

/// Runs the whole plan to exhaustion on one execution unit.
pub fn execute(
    plan: &ExecutablePlan,
    db: &Database,
    bindings: BTreeMap<String, SourceBinding>,
    config: EngineConfig,
) -> Result<ExecOutcome, EngineError> {
    let ctx = RunContext::new(plan, db, bindings, config)?;
    let mut index = AdaptiveIndex::new(config.index_threshold);
    let mut outcome = ExecOutcome::default();
    outcome.metrics.merge(&ctx.prep_metrics);
    for &t in ctx.ticks() {
        let tick = ctx.prepare_tick(t);
        let rows = ctx.evaluate_tick(&tick, None, &mut index, &mut outcome.metrics)?;
        outcome.rows.extend(rows);
        outcome.metrics.ticks += 1;
    }
    outcome.metrics.output_rows = outcome.rows.len() as u64;
    Ok(outcome)
}
