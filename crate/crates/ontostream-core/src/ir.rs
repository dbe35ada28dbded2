//! The relational/stream algebra every compiled query lowers into.
//!
//! One algebra serves both halves of a plan: the static half uses scans,
//! selects, projects, joins, unions, and group-having; the streaming half
//! adds `Slice` leaves (a parameterized window of a stream) and a
//! `Correlate` root that evaluates windowed analytics. A validator checks
//! column well-typedness of every tree, and a small interpreter evaluates
//! static plans over in-memory tables with set semantics and exact rational
//! aggregates.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::ontology::{AggFn, Cmp, Dataset};
use crate::rational::{format_rational, Rational};
use crate::rewrite::Vocabulary;

/// A table cell: individuals and other identifiers are strings, attribute
/// values are exact rationals.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Literal {
    Str(String),
    Rat(Rational),
}

impl core::fmt::Display for Literal {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Literal::Str(s) => f.write_str(s),
            Literal::Rat(r) => f.write_str(&format_rational(r)),
        }
    }
}

/// Row filters supported by `Select`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowPredicate {
    ColEqLit(String, Literal),
    ColEqCol(String, String),
}

impl core::fmt::Display for RowPredicate {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RowPredicate::ColEqLit(c, l) => write!(f, "{c} = {l}"),
            RowPredicate::ColEqCol(a, b) => write!(f, "{a} = {b}"),
        }
    }
}

/// An output column of `Project`: kept name plus its source column, which
/// allows renaming without a dedicated operator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectCol {
    pub name: String,
    pub source: String,
}

impl ProjectCol {
    pub fn keep(name: impl Into<String>) -> Self {
        let name = name.into();
        ProjectCol { source: name.clone(), name }
    }

    pub fn renamed(name: impl Into<String>, source: impl Into<String>) -> Self {
        ProjectCol { name: name.into(), source: source.into() }
    }
}

/// The state index a slice is instantiated at: the quantified index
/// variable plus an offset, so `GRAPH i` and `GRAPH i+1` can join.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexTerm {
    pub var: String,
    pub offset: i64,
}

impl core::fmt::Display for IndexTerm {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.offset == 0 {
            f.write_str(&self.var)
        } else {
            write!(f, "{}+{}", self.var, self.offset)
        }
    }
}

/// Quantification of the state index over the window sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    Exists,
    /// Compiled as: no state falsifies the condition.
    Forall,
}

/// Functions allowed in streaming conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFn {
    Pearson,
    Cosine,
    Avg,
    Min,
    Max,
    Sum,
    Count,
    Abs,
}

impl StreamFn {
    pub fn name(self) -> &'static str {
        match self {
            StreamFn::Pearson => "PearsonCorrelation",
            StreamFn::Cosine => "cosineSimilarity",
            StreamFn::Avg => "avg",
            StreamFn::Min => "min",
            StreamFn::Max => "max",
            StreamFn::Sum => "sum",
            StreamFn::Count => "count",
            StreamFn::Abs => "abs",
        }
    }

    pub fn parse(s: &str) -> Option<StreamFn> {
        Some(match s {
            "PearsonCorrelation" => StreamFn::Pearson,
            "cosineSimilarity" => StreamFn::Cosine,
            "avg" => StreamFn::Avg,
            "min" => StreamFn::Min,
            "max" => StreamFn::Max,
            "sum" => StreamFn::Sum,
            "count" => StreamFn::Count,
            "abs" => StreamFn::Abs,
            _ => return None,
        })
    }

    /// Aggregates consume a whole series; `abs` is pointwise.
    pub fn is_aggregate(self) -> bool {
        !matches!(self, StreamFn::Abs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }
}

/// Numeric expression over value columns of the streaming subplan.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueExpr {
    Var(String),
    Const(f64),
    Call(StreamFn, Vec<ValueExpr>),
    Arith(ArithOp, Box<ValueExpr>, Box<ValueExpr>),
}

impl ValueExpr {
    pub fn variables(&self, out: &mut BTreeSet<String>) {
        match self {
            ValueExpr::Var(v) => {
                out.insert(v.clone());
            }
            ValueExpr::Const(_) => {}
            ValueExpr::Call(_, args) => {
                for a in args {
                    a.variables(out);
                }
            }
            ValueExpr::Arith(_, l, r) => {
                l.variables(out);
                r.variables(out);
            }
        }
    }

    pub fn contains_aggregate(&self) -> bool {
        match self {
            ValueExpr::Var(_) | ValueExpr::Const(_) => false,
            ValueExpr::Call(f, args) => {
                f.is_aggregate() || args.iter().any(|a| a.contains_aggregate())
            }
            ValueExpr::Arith(_, l, r) => l.contains_aggregate() || r.contains_aggregate(),
        }
    }
}

impl core::fmt::Display for ValueExpr {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ValueExpr::Var(v) => f.write_str(v),
            ValueExpr::Const(c) => write!(f, "{c}"),
            ValueExpr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            ValueExpr::Arith(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
        }
    }
}

/// Boolean condition of a `Correlate` node.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Cmp(Cmp, ValueExpr, ValueExpr),
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
    Not(Box<Condition>),
}

impl Condition {
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Condition::Cmp(_, l, r) => {
                l.variables(out);
                r.variables(out);
            }
            Condition::And(l, r) | Condition::Or(l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Condition::Not(inner) => inner.collect_vars(out),
        }
    }

    pub fn contains_aggregate(&self) -> bool {
        match self {
            Condition::Cmp(_, l, r) => l.contains_aggregate() || r.contains_aggregate(),
            Condition::And(l, r) | Condition::Or(l, r) => {
                l.contains_aggregate() || r.contains_aggregate()
            }
            Condition::Not(inner) => inner.contains_aggregate(),
        }
    }

    /// Splits a top-level conjunction into its conjuncts.
    pub fn conjuncts(&self) -> Vec<&Condition> {
        match self {
            Condition::And(l, r) => {
                let mut out = l.conjuncts();
                out.extend(r.conjuncts());
                out
            }
            other => alloc::vec![other],
        }
    }
}

impl core::fmt::Display for Condition {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Condition::Cmp(cmp, l, r) => write!(f, "{l} {} {r}", cmp.symbol()),
            Condition::And(l, r) => write!(f, "({l} AND {r})"),
            Condition::Or(l, r) => write!(f, "({l} OR {r})"),
            Condition::Not(inner) => write!(f, "NOT ({inner})"),
        }
    }
}

/// A relational/stream operator tree.
#[derive(Debug, Clone, PartialEq)]
pub enum RelExpr {
    /// Leaf over a named table; `bindings` pick and rename source columns.
    Scan {
        table: String,
        bindings: Vec<(String, String)>,
    },
    Select {
        input: Box<RelExpr>,
        predicate: RowPredicate,
    },
    Project {
        input: Box<RelExpr>,
        columns: Vec<ProjectCol>,
    },
    /// Natural join on the named columns (present on both sides).
    Join {
        left: Box<RelExpr>,
        right: Box<RelExpr>,
        keys: Vec<String>,
    },
    Union {
        inputs: Vec<RelExpr>,
    },
    /// `SELECT group FROM input GROUP BY group HAVING agg(value) cmp r`.
    GroupHaving {
        input: Box<RelExpr>,
        group: Vec<String>,
        value: String,
        agg: AggFn,
        cmp: Cmp,
        threshold: Rational,
    },
    /// A window slice of a stream at one state of the sequence. Output
    /// columns are the bindings plus the implicit state-index column.
    Slice {
        stream: String,
        bindings: Vec<(String, String)>,
        index: IndexTerm,
        range_ms: i64,
        slide_ms: i64,
        strategy: String,
        set_back_ms: i64,
    },
    /// Engine operator: evaluates windowed analytics over the value
    /// columns of its slice join and keeps qualifying groups.
    Correlate {
        input: Box<RelExpr>,
        quantifier: Quantifier,
        index_var: String,
        group: Vec<String>,
        condition: Condition,
    },
}

pub const STATE_COLUMN: &str = "_state";

impl RelExpr {
    pub fn scan(table: impl Into<String>, bindings: Vec<(String, String)>) -> RelExpr {
        RelExpr::Scan { table: table.into(), bindings }
    }

    /// Output column names, in deterministic order. Errors mirror the
    /// validator's.
    pub fn output_columns(&self) -> Result<Vec<String>, PlanError> {
        match self {
            RelExpr::Scan { bindings, .. } => {
                Ok(bindings.iter().map(|(out, _)| out.clone()).collect())
            }
            RelExpr::Select { input, .. } => input.output_columns(),
            RelExpr::Project { columns, .. } => {
                Ok(columns.iter().map(|c| c.name.clone()).collect())
            }
            RelExpr::Join { left, right, keys } => {
                let mut cols = left.output_columns()?;
                for c in right.output_columns()? {
                    if !keys.contains(&c) && !cols.contains(&c) {
                        cols.push(c);
                    }
                }
                Ok(cols)
            }
            RelExpr::Union { inputs } => inputs
                .first()
                .ok_or(PlanError::EmptyUnion)
                .and_then(|i| i.output_columns()),
            RelExpr::GroupHaving { group, .. } => Ok(group.clone()),
            RelExpr::Slice { bindings, .. } => {
                let mut cols: Vec<String> =
                    bindings.iter().map(|(out, _)| out.clone()).collect();
                cols.push(STATE_COLUMN.to_string());
                Ok(cols)
            }
            RelExpr::Correlate { group, .. } => Ok(group.clone()),
        }
    }

    /// Structural well-typedness: columns referenced by each node exist in
    /// its input, union arms agree, and slices appear only where streaming
    /// operators are allowed.
    pub fn validate(&self, streaming_allowed: bool) -> Result<(), PlanError> {
        match self {
            RelExpr::Scan { table, bindings } => {
                if bindings.is_empty() {
                    return Err(PlanError::NoColumns { node: format!("scan {table}") });
                }
                Ok(())
            }
            RelExpr::Select { input, predicate } => {
                input.validate(streaming_allowed)?;
                let cols = input.output_columns()?;
                let mentioned: Vec<&String> = match predicate {
                    RowPredicate::ColEqLit(c, _) => alloc::vec![c],
                    RowPredicate::ColEqCol(a, b) => alloc::vec![a, b],
                };
                for c in mentioned {
                    if !cols.contains(c) {
                        return Err(PlanError::UnknownColumn {
                            column: c.clone(),
                            node: "select".into(),
                        });
                    }
                }
                Ok(())
            }
            RelExpr::Project { input, columns } => {
                input.validate(streaming_allowed)?;
                let cols = input.output_columns()?;
                for c in columns {
                    if !cols.contains(&c.source) {
                        return Err(PlanError::UnknownColumn {
                            column: c.source.clone(),
                            node: "project".into(),
                        });
                    }
                }
                Ok(())
            }
            RelExpr::Join { left, right, keys } => {
                left.validate(streaming_allowed)?;
                right.validate(streaming_allowed)?;
                let lcols = left.output_columns()?;
                let rcols = right.output_columns()?;
                for k in keys {
                    if !lcols.contains(k) || !rcols.contains(k) {
                        return Err(PlanError::UnknownColumn {
                            column: k.clone(),
                            node: "join key".into(),
                        });
                    }
                }
                for c in &rcols {
                    if lcols.contains(c) && !keys.contains(c) {
                        return Err(PlanError::AmbiguousColumn { column: c.clone() });
                    }
                }
                Ok(())
            }
            RelExpr::Union { inputs } => {
                if inputs.is_empty() {
                    return Err(PlanError::EmptyUnion);
                }
                let first = inputs[0].output_columns()?;
                for arm in inputs {
                    arm.validate(streaming_allowed)?;
                    let cols = arm.output_columns()?;
                    if cols != first {
                        return Err(PlanError::UnionColumnMismatch {
                            left: first.clone(),
                            right: cols,
                        });
                    }
                }
                Ok(())
            }
            RelExpr::GroupHaving { input, group, value, .. } => {
                input.validate(streaming_allowed)?;
                let cols = input.output_columns()?;
                for c in group.iter().chain(core::iter::once(value)) {
                    if !cols.contains(c) {
                        return Err(PlanError::UnknownColumn {
                            column: c.clone(),
                            node: "group-having".into(),
                        });
                    }
                }
                Ok(())
            }
            RelExpr::Slice { stream, bindings, .. } => {
                if !streaming_allowed {
                    return Err(PlanError::StreamingOperatorInStaticPlan);
                }
                if bindings.is_empty() {
                    return Err(PlanError::NoColumns { node: format!("slice {stream}") });
                }
                Ok(())
            }
            RelExpr::Correlate { input, group, condition, index_var, .. } => {
                if !streaming_allowed {
                    return Err(PlanError::StreamingOperatorInStaticPlan);
                }
                input.validate(true)?;
                let cols = input.output_columns()?;
                for c in group {
                    if !cols.contains(c) {
                        return Err(PlanError::UnknownColumn {
                            column: c.clone(),
                            node: "correlate group".into(),
                        });
                    }
                }
                for v in condition.variables() {
                    if !cols.contains(&v) {
                        return Err(PlanError::UnknownColumn {
                            column: v,
                            node: "correlate condition".into(),
                        });
                    }
                }
                if group.iter().any(|g| g == index_var) {
                    return Err(PlanError::IndexVariableInOutput { var: index_var.clone() });
                }
                Ok(())
            }
        }
    }

    /// Deterministic indented rendering, one operator per line.
    pub fn explain(&self) -> String {
        let mut out = String::new();
        self.render(0, &mut out);
        out
    }

    fn render(&self, depth: usize, out: &mut String) {
        let indent = "  ".repeat(depth);
        match self {
            RelExpr::Scan { table, bindings } => {
                out.push_str(&format!("{indent}scan {table} [{}]\n", fmt_bindings(bindings)));
            }
            RelExpr::Select { input, predicate } => {
                out.push_str(&format!("{indent}select {predicate}\n"));
                input.render(depth + 1, out);
            }
            RelExpr::Project { input, columns } => {
                let cols: Vec<String> = columns
                    .iter()
                    .map(|c| {
                        if c.name == c.source {
                            c.name.clone()
                        } else {
                            format!("{}={}", c.name, c.source)
                        }
                    })
                    .collect();
                out.push_str(&format!("{indent}project {}\n", cols.join(", ")));
                input.render(depth + 1, out);
            }
            RelExpr::Join { left, right, keys } => {
                out.push_str(&format!("{indent}join on {}\n", keys.join(", ")));
                left.render(depth + 1, out);
                right.render(depth + 1, out);
            }
            RelExpr::Union { inputs } => {
                out.push_str(&format!("{indent}union\n"));
                for arm in inputs {
                    arm.render(depth + 1, out);
                }
            }
            RelExpr::GroupHaving { input, group, value, agg, cmp, threshold } => {
                out.push_str(&format!(
                    "{indent}group {} having {agg}({value}) {} {}\n",
                    group.join(", "),
                    cmp.symbol(),
                    format_rational(threshold)
                ));
                input.render(depth + 1, out);
            }
            RelExpr::Slice { stream, bindings, index, range_ms, slide_ms, strategy, set_back_ms } => {
                out.push_str(&format!(
                    "{indent}slice {stream} [{}] index={index} range={range_ms}ms slide={slide_ms}ms strategy={strategy} setback={set_back_ms}ms\n",
                    fmt_bindings(bindings)
                ));
            }
            RelExpr::Correlate { input, quantifier, index_var, group, condition } => {
                let q = match quantifier {
                    Quantifier::Exists => "exists",
                    Quantifier::Forall => "forall",
                };
                out.push_str(&format!(
                    "{indent}correlate {q} {index_var} group [{}] where {condition}\n",
                    group.join(", ")
                ));
                input.render(depth + 1, out);
            }
        }
    }
}

/// Collapses directly nested projections (the unfolder stacks a head
/// projection on top of each mapping body's own projection).
pub fn simplify(expr: RelExpr) -> RelExpr {
    match expr {
        RelExpr::Project { input, columns } => {
            let input = simplify(*input);
            if let RelExpr::Project { input: inner, columns: inner_cols } = input {
                let composed: Option<Vec<ProjectCol>> = columns
                    .iter()
                    .map(|c| {
                        inner_cols
                            .iter()
                            .find(|ic| ic.name == c.source)
                            .map(|ic| ProjectCol { name: c.name.clone(), source: ic.source.clone() })
                    })
                    .collect();
                match composed {
                    Some(columns) => simplify(RelExpr::Project { input: inner, columns }),
                    None => RelExpr::Project {
                        input: Box::new(RelExpr::Project { input: inner, columns: inner_cols }),
                        columns,
                    },
                }
            } else if columns.iter().all(|c| c.name == c.source)
                && input.output_columns().ok().as_deref()
                    == Some(&columns.iter().map(|c| c.name.clone()).collect::<Vec<_>>()[..])
            {
                // Identity projection over a set-semantics relation.
                input
            } else {
                RelExpr::Project { input: Box::new(input), columns }
            }
        }
        RelExpr::Select { input, predicate } => {
            RelExpr::Select { input: Box::new(simplify(*input)), predicate }
        }
        RelExpr::Join { left, right, keys } => RelExpr::Join {
            left: Box::new(simplify(*left)),
            right: Box::new(simplify(*right)),
            keys,
        },
        RelExpr::Union { inputs } => {
            RelExpr::Union { inputs: inputs.into_iter().map(simplify).collect() }
        }
        RelExpr::GroupHaving { input, group, value, agg, cmp, threshold } => RelExpr::GroupHaving {
            input: Box::new(simplify(*input)),
            group,
            value,
            agg,
            cmp,
            threshold,
        },
        RelExpr::Correlate { input, quantifier, index_var, group, condition } => {
            RelExpr::Correlate {
                input: Box::new(simplify(*input)),
                quantifier,
                index_var,
                group,
                condition,
            }
        }
        leaf => leaf,
    }
}

fn fmt_bindings(bindings: &[(String, String)]) -> String {
    bindings
        .iter()
        .map(|(out, src)| {
            if out == src {
                out.clone()
            } else {
                format!("{out}={src}")
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanError {
    UnknownColumn { column: String, node: String },
    AmbiguousColumn { column: String },
    UnionColumnMismatch { left: Vec<String>, right: Vec<String> },
    EmptyUnion,
    NoColumns { node: String },
    StreamingOperatorInStaticPlan,
    IndexVariableInOutput { var: String },
}

impl core::fmt::Display for PlanError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PlanError::UnknownColumn { column, node } => {
                write!(f, "column `{column}` not available at {node}")
            }
            PlanError::AmbiguousColumn { column } => {
                write!(f, "column `{column}` appears on both join sides without being a key")
            }
            PlanError::UnionColumnMismatch { left, right } => {
                write!(f, "union arms differ: [{}] vs [{}]", left.join(","), right.join(","))
            }
            PlanError::EmptyUnion => f.write_str("union with no arms"),
            PlanError::NoColumns { node } => write!(f, "{node} exposes no columns"),
            PlanError::StreamingOperatorInStaticPlan => {
                f.write_str("streaming operator in a static plan")
            }
            PlanError::IndexVariableInOutput { var } => {
                write!(f, "state index variable `{var}` cannot be in the output")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PlanError {}

/// An in-memory table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Literal>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// A named collection of tables. Static plans evaluate against this.
#[derive(Debug, Clone, Default)]
pub struct Database {
    pub tables: BTreeMap<String, Table>,
}

impl Database {
    pub fn new() -> Self {
        Database::default()
    }

    pub fn insert_table(&mut self, name: impl Into<String>, table: Table) {
        self.tables.insert(name.into(), table);
    }

    /// Materializes one table per predicate of the dataset: concepts get a
    /// single column `id`, roles `s`/`o`, attributes `s`/`v`. Every
    /// vocabulary name is pre-registered so scans of asserted-but-empty
    /// predicates evaluate to empty relations instead of failing.
    pub fn from_dataset(d: &Dataset, vocab: &Vocabulary) -> Database {
        let mut db = Database::new();
        for c in &vocab.concepts {
            db.insert_table(c.clone(), Table::new(alloc::vec!["id".into()]));
        }
        for r in &vocab.roles {
            db.insert_table(r.clone(), Table::new(alloc::vec!["s".into(), "o".into()]));
        }
        for f in &vocab.attributes {
            db.insert_table(f.clone(), Table::new(alloc::vec!["s".into(), "v".into()]));
        }
        for (c, a) in &d.concepts {
            db.tables
                .entry(c.clone())
                .or_insert_with(|| Table::new(alloc::vec!["id".into()]))
                .rows
                .push(alloc::vec![Literal::Str(a.name().to_string())]);
        }
        for (r, a, b) in &d.roles {
            db.tables
                .entry(r.clone())
                .or_insert_with(|| Table::new(alloc::vec!["s".into(), "o".into()]))
                .rows
                .push(alloc::vec![
                    Literal::Str(a.name().to_string()),
                    Literal::Str(b.name().to_string())
                ]);
        }
        for (f, a, v) in &d.attributes {
            db.tables
                .entry(f.clone())
                .or_insert_with(|| Table::new(alloc::vec!["s".into(), "v".into()]))
                .rows
                .push(alloc::vec![Literal::Str(a.name().to_string()), Literal::Rat(v.clone())]);
        }
        db
    }
}

/// A materialized intermediate relation with set semantics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub columns: Vec<String>,
    pub rows: BTreeSet<Vec<Literal>>,
}

impl Relation {
    fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    UnknownTable { table: String },
    UnknownSourceColumn { table: String, column: String },
    Plan(PlanError),
    NonNumericAggregate { column: String },
}

impl core::fmt::Display for EvalError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EvalError::UnknownTable { table } => write!(f, "unknown table `{table}`"),
            EvalError::UnknownSourceColumn { table, column } => {
                write!(f, "table `{table}` has no column `{column}`")
            }
            EvalError::Plan(e) => write!(f, "{e}"),
            EvalError::NonNumericAggregate { column } => {
                write!(f, "aggregate over non-numeric column `{column}`")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EvalError {}

impl From<PlanError> for EvalError {
    fn from(e: PlanError) -> Self {
        EvalError::Plan(e)
    }
}

/// Evaluates a static plan over the database.
pub fn evaluate(expr: &RelExpr, db: &Database) -> Result<Relation, EvalError> {
    match expr {
        RelExpr::Scan { table, bindings } => {
            let t = db
                .tables
                .get(table)
                .ok_or_else(|| EvalError::UnknownTable { table: table.clone() })?;
            let mut indices = Vec::with_capacity(bindings.len());
            for (_, src) in bindings {
                let idx = t.column_index(src).ok_or_else(|| EvalError::UnknownSourceColumn {
                    table: table.clone(),
                    column: src.clone(),
                })?;
                indices.push(idx);
            }
            let columns: Vec<String> = bindings.iter().map(|(out, _)| out.clone()).collect();
            let rows = t
                .rows
                .iter()
                .map(|row| indices.iter().map(|&i| row[i].clone()).collect())
                .collect();
            Ok(Relation { columns, rows })
        }
        RelExpr::Select { input, predicate } => {
            let rel = evaluate(input, db)?;
            let keep = |row: &Vec<Literal>| -> bool {
                match predicate {
                    RowPredicate::ColEqLit(c, lit) => {
                        rel.column_index(c).map(|i| &row[i] == lit).unwrap_or(false)
                    }
                    RowPredicate::ColEqCol(a, b) => match (rel.column_index(a), rel.column_index(b)) {
                        (Some(i), Some(j)) => row[i] == row[j],
                        _ => false,
                    },
                }
            };
            let rows = rel.rows.iter().filter(|r| keep(r)).cloned().collect();
            Ok(Relation { columns: rel.columns.clone(), rows })
        }
        RelExpr::Project { input, columns } => {
            let rel = evaluate(input, db)?;
            let mut indices = Vec::with_capacity(columns.len());
            for c in columns {
                let idx = rel.column_index(&c.source).ok_or(EvalError::Plan(
                    PlanError::UnknownColumn { column: c.source.clone(), node: "project".into() },
                ))?;
                indices.push(idx);
            }
            let rows = rel
                .rows
                .iter()
                .map(|row| indices.iter().map(|&i| row[i].clone()).collect())
                .collect();
            Ok(Relation { columns: columns.iter().map(|c| c.name.clone()).collect(), rows })
        }
        RelExpr::Join { left, right, keys } => {
            let l = evaluate(left, db)?;
            let r = evaluate(right, db)?;
            let lkeys: Vec<usize> = keys.iter().filter_map(|k| l.column_index(k)).collect();
            let rkeys: Vec<usize> = keys.iter().filter_map(|k| r.column_index(k)).collect();
            if lkeys.len() != keys.len() || rkeys.len() != keys.len() {
                return Err(EvalError::Plan(PlanError::UnknownColumn {
                    column: keys.join(","),
                    node: "join key".into(),
                }));
            }
            let carried: Vec<usize> = r
                .columns
                .iter()
                .enumerate()
                .filter(|(_, c)| !keys.contains(c))
                .map(|(i, _)| i)
                .collect();
            let mut columns = l.columns.clone();
            columns.extend(carried.iter().map(|&i| r.columns[i].clone()));

            // Hash join on the key tuple.
            let mut index: BTreeMap<Vec<&Literal>, Vec<&Vec<Literal>>> = BTreeMap::new();
            for row in &r.rows {
                index
                    .entry(rkeys.iter().map(|&i| &row[i]).collect())
                    .or_default()
                    .push(row);
            }
            let mut rows = BTreeSet::new();
            for lrow in &l.rows {
                let key: Vec<&Literal> = lkeys.iter().map(|&i| &lrow[i]).collect();
                if let Some(matches) = index.get(&key) {
                    for rrow in matches {
                        let mut row = lrow.clone();
                        row.extend(carried.iter().map(|&i| rrow[i].clone()));
                        rows.insert(row);
                    }
                }
            }
            Ok(Relation { columns, rows })
        }
        RelExpr::Union { inputs } => {
            let mut arms = inputs.iter();
            let first = arms.next().ok_or(EvalError::Plan(PlanError::EmptyUnion))?;
            let mut rel = evaluate(first, db)?;
            for arm in arms {
                let r = evaluate(arm, db)?;
                if r.columns != rel.columns {
                    return Err(EvalError::Plan(PlanError::UnionColumnMismatch {
                        left: rel.columns.clone(),
                        right: r.columns.clone(),
                    }));
                }
                rel.rows.extend(r.rows);
            }
            Ok(rel)
        }
        RelExpr::GroupHaving { input, group, value, agg, cmp, threshold } => {
            let rel = evaluate(input, db)?;
            let gidx: Vec<usize> = group.iter().filter_map(|c| rel.column_index(c)).collect();
            let vidx = rel.column_index(value).ok_or(EvalError::Plan(PlanError::UnknownColumn {
                column: value.clone(),
                node: "group-having".into(),
            }))?;
            if gidx.len() != group.len() {
                return Err(EvalError::Plan(PlanError::UnknownColumn {
                    column: group.join(","),
                    node: "group-having".into(),
                }));
            }
            let mut groups: BTreeMap<Vec<Literal>, Vec<Rational>> = BTreeMap::new();
            for row in &rel.rows {
                let key: Vec<Literal> = gidx.iter().map(|&i| row[i].clone()).collect();
                let v = match &row[vidx] {
                    Literal::Rat(r) => r.clone(),
                    Literal::Str(_) => {
                        return Err(EvalError::NonNumericAggregate { column: value.clone() })
                    }
                };
                groups.entry(key).or_default().push(v);
            }
            let mut rows = BTreeSet::new();
            for (key, values) in groups {
                let refs: Vec<&Rational> = values.iter().collect();
                let result = crate::ontology::apply_aggregate(*agg, &refs);
                if cmp.test(&result, threshold) {
                    rows.insert(key);
                }
            }
            Ok(Relation { columns: group.clone(), rows })
        }
        RelExpr::Slice { .. } | RelExpr::Correlate { .. } => {
            Err(EvalError::Plan(PlanError::StreamingOperatorInStaticPlan))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rational;

    fn rat(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn scores_db() -> Database {
        let mut t = Table::new(alloc::vec!["sid".into(), "score".into()]);
        for (s, v) in [("s1", "0.9"), ("s2", "0.95"), ("s2", "0.97"), ("s3", "0.5")] {
            t.rows.push(alloc::vec![Literal::Str(s.into()), Literal::Rat(rat(v))]);
        }
        let mut db = Database::new();
        db.insert_table("scores", t);
        db
    }

    #[test]
    fn scan_renames_and_dedups() {
        let db = scores_db();
        let e = RelExpr::scan("scores", alloc::vec![("x".into(), "sid".into())]);
        let rel = evaluate(&e, &db).unwrap();
        assert_eq!(rel.columns, ["x"]);
        assert_eq!(rel.rows.len(), 3); // set semantics collapses s2
    }

    #[test]
    fn group_having_min_threshold() {
        let db = scores_db();
        let e = RelExpr::GroupHaving {
            input: Box::new(RelExpr::scan(
                "scores",
                alloc::vec![("x".into(), "sid".into()), ("y".into(), "score".into())],
            )),
            group: alloc::vec!["x".into()],
            value: "y".into(),
            agg: AggFn::Min,
            cmp: Cmp::Ge,
            threshold: rat("0.9"),
        };
        let rel = evaluate(&e, &db).unwrap();
        let names: Vec<String> = rel.rows.iter().map(|r| r[0].to_string()).collect();
        assert_eq!(names, ["s1", "s2"]);
    }

    #[test]
    fn join_carries_non_key_columns() {
        let mut db = scores_db();
        let mut located = Table::new(alloc::vec!["sid".into(), "site".into()]);
        located.rows.push(alloc::vec![Literal::Str("s1".into()), Literal::Str("north".into())]);
        db.insert_table("located", located);

        let e = RelExpr::Join {
            left: Box::new(RelExpr::scan(
                "scores",
                alloc::vec![("x".into(), "sid".into()), ("y".into(), "score".into())],
            )),
            right: Box::new(RelExpr::scan(
                "located",
                alloc::vec![("x".into(), "sid".into()), ("where".into(), "site".into())],
            )),
            keys: alloc::vec!["x".into()],
        };
        e.validate(false).unwrap();
        let rel = evaluate(&e, &db).unwrap();
        assert_eq!(rel.columns, ["x", "y", "where"]);
        assert_eq!(rel.rows.len(), 1);
    }

    #[test]
    fn validator_rejects_bad_plans() {
        let scan = RelExpr::scan("t", alloc::vec![("a".into(), "a".into())]);
        let bad_project = RelExpr::Project {
            input: Box::new(scan.clone()),
            columns: alloc::vec![ProjectCol::keep("missing")],
        };
        assert!(matches!(bad_project.validate(false), Err(PlanError::UnknownColumn { .. })));

        let slice = RelExpr::Slice {
            stream: "s".into(),
            bindings: alloc::vec![("v".into(), "value".into())],
            index: IndexTerm { var: "i".into(), offset: 0 },
            range_ms: 1000,
            slide_ms: 1000,
            strategy: "StandardSequencing".into(),
            set_back_ms: 0,
        };
        assert_eq!(slice.validate(false), Err(PlanError::StreamingOperatorInStaticPlan));
        assert!(slice.validate(true).is_ok());

        let mismatch = RelExpr::Union {
            inputs: alloc::vec![
                RelExpr::scan("t", alloc::vec![("a".into(), "a".into())]),
                RelExpr::scan("t", alloc::vec![("b".into(), "b".into())]),
            ],
        };
        assert!(matches!(mismatch.validate(false), Err(PlanError::UnionColumnMismatch { .. })));
    }

    #[test]
    fn explain_is_deterministic() {
        let e = RelExpr::GroupHaving {
            input: Box::new(RelExpr::Union {
                inputs: alloc::vec![
                    RelExpr::scan(
                        "a",
                        alloc::vec![("x".into(), "sid".into()), ("y".into(), "val".into())],
                    ),
                    RelExpr::scan(
                        "b",
                        alloc::vec![("x".into(), "sid".into()), ("y".into(), "val".into())],
                    ),
                ],
            }),
            group: alloc::vec!["x".into()],
            value: "y".into(),
            agg: AggFn::Min,
            cmp: Cmp::Ge,
            threshold: rat("0.9"),
        };
        let text = e.explain();
        assert_eq!(text, e.explain());
        assert_eq!(
            text,
            "group x having min(y) >= 0.9\n  union\n    scan a [x=sid, y=val]\n    scan b [x=sid, y=val]\n"
        );
    }
}
