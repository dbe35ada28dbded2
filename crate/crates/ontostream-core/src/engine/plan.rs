//! Physical planning of the streaming subplan: recovering the executable
//! slice/join structure from the operator tree, and deciding per query
//! whether the archived side can be answered from signatures alone.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::ir::{Condition, Literal, Quantifier, RelExpr, RowPredicate, StreamFn, ValueExpr};

/// One stream a triple pattern may read from, with its window parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceArm {
    pub stream: String,
    pub range_ms: i64,
    pub slide_ms: i64,
    pub set_back_ms: i64,
}

/// A triple pattern of the streaming clause, physically: where its subject
/// and value columns come from and at which state offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriplePlan {
    pub offset: i64,
    /// The subject binding variable, unless the subject is a constant.
    pub subject_var: Option<String>,
    pub subject_const: Option<String>,
    pub value_var: String,
    pub arms: Vec<SliceArm>,
}

/// The executable shape of a `Correlate` plan.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelateSpec {
    pub quantifier: Quantifier,
    pub index_var: String,
    pub group: Vec<String>,
    pub condition: Condition,
    pub triples: Vec<TriplePlan>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanShapeError {
    pub message: String,
}

impl PlanShapeError {
    fn new(message: impl Into<String>) -> Self {
        PlanShapeError { message: message.into() }
    }
}

impl core::fmt::Display for PlanShapeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "unsupported streaming plan shape: {}", self.message)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PlanShapeError {}

/// Recovers the executable spec from a streaming plan: a `Correlate` root
/// over a join tree whose leaves are slices (optionally a union of slices
/// per triple, optionally behind a constant-subject select).
pub fn extract_spec(plan: &RelExpr) -> Result<CorrelateSpec, PlanShapeError> {
    let RelExpr::Correlate { input, quantifier, index_var, group, condition } = plan else {
        return Err(PlanShapeError::new("root operator is not a correlate"));
    };
    let mut leaves = Vec::new();
    flatten_joins(input, &mut leaves);
    let mut triples = Vec::new();
    for leaf in leaves {
        triples.push(extract_triple(leaf)?);
    }
    if triples.is_empty() {
        return Err(PlanShapeError::new("correlate has no slice inputs"));
    }
    Ok(CorrelateSpec {
        quantifier: *quantifier,
        index_var: index_var.clone(),
        group: group.clone(),
        condition: condition.clone(),
        triples,
    })
}

fn flatten_joins<'a>(e: &'a RelExpr, out: &mut Vec<&'a RelExpr>) {
    match e {
        RelExpr::Join { left, right, .. } => {
            flatten_joins(left, out);
            flatten_joins(right, out);
        }
        other => out.push(other),
    }
}

fn extract_triple(e: &RelExpr) -> Result<TriplePlan, PlanShapeError> {
    let (inner, subject_const) = match e {
        RelExpr::Select { input, predicate: RowPredicate::ColEqLit(_, Literal::Str(c)) } => {
            (input.as_ref(), Some(c.clone()))
        }
        other => (other, None),
    };
    let slices: Vec<&RelExpr> = match inner {
        RelExpr::Union { inputs } => inputs.iter().collect(),
        s @ RelExpr::Slice { .. } => alloc::vec![s],
        other => {
            return Err(PlanShapeError::new(format!(
                "expected slices under the correlate, found `{}`",
                first_line(&other.explain())
            )))
        }
    };
    let mut triple: Option<TriplePlan> = None;
    for s in slices {
        let RelExpr::Slice { stream, bindings, index, range_ms, slide_ms, set_back_ms, .. } = s
        else {
            return Err(PlanShapeError::new("union arm is not a slice"));
        };
        if bindings.len() != 2 {
            return Err(PlanShapeError::new("slice must bind a subject and a value"));
        }
        let subject_col = bindings[0].0.clone();
        let value_var = bindings[1].0.clone();
        let arm = SliceArm {
            stream: stream.clone(),
            range_ms: *range_ms,
            slide_ms: *slide_ms,
            set_back_ms: *set_back_ms,
        };
        match &mut triple {
            None => {
                let subject_var = if subject_const.is_some() { None } else { Some(subject_col) };
                triple = Some(TriplePlan {
                    offset: index.offset,
                    subject_var,
                    subject_const: subject_const.clone(),
                    value_var,
                    arms: alloc::vec![arm],
                });
            }
            Some(t) => {
                if t.value_var != value_var || t.offset != index.offset {
                    return Err(PlanShapeError::new("slice arms of one triple disagree"));
                }
                t.arms.push(arm);
            }
        }
    }
    Ok(triple.expect("nonempty slice list"))
}

fn first_line(s: &str) -> &str {
    s.lines().next().unwrap_or("")
}

/// How the archived side of a plan is accessed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessMode {
    /// Every statistic the condition needs from archived windows is a
    /// signature field; the raw measurements join is pruned entirely.
    SignatureOnly,
    /// Cross terms (Pearson, cosine inner product) or per-state values
    /// need the archived measurements.
    Hybrid,
}

/// The condition split into signature-decidable conjuncts (evaluated
/// before any raw access) and the residual.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionPlan {
    pub mode: AccessMode,
    pub prefilter: Vec<Condition>,
    pub residual: Vec<Condition>,
}

/// Statistics-only calls: answerable from a window signature.
fn is_signature_fn(f: StreamFn) -> bool {
    matches!(
        f,
        StreamFn::Avg | StreamFn::Min | StreamFn::Max | StreamFn::Sum | StreamFn::Count
    )
}

/// True when every use of an archived variable in the expression sits
/// directly inside a signature-computable aggregate.
fn expr_signature_only(e: &ValueExpr, archived: &BTreeSet<String>) -> bool {
    match e {
        ValueExpr::Var(v) => !archived.contains(v),
        ValueExpr::Const(_) => true,
        ValueExpr::Call(f, args) => {
            if is_signature_fn(*f) && args.len() == 1 {
                if let ValueExpr::Var(_) = &args[0] {
                    return true;
                }
            }
            args.iter().all(|a| expr_signature_only(a, archived))
        }
        ValueExpr::Arith(_, l, r) => {
            expr_signature_only(l, archived) && expr_signature_only(r, archived)
        }
    }
}

fn condition_signature_only(c: &Condition, archived: &BTreeSet<String>) -> bool {
    match c {
        Condition::Cmp(_, l, r) => {
            // Per-state comparisons over archived values read raw data.
            let aggregate_only = l.contains_aggregate() || r.contains_aggregate() || {
                let mut vars = BTreeSet::new();
                l.variables(&mut vars);
                r.variables(&mut vars);
                vars.is_disjoint(archived)
            };
            aggregate_only && expr_signature_only(l, archived) && expr_signature_only(r, archived)
        }
        Condition::And(l, r) | Condition::Or(l, r) => {
            condition_signature_only(l, archived) && condition_signature_only(r, archived)
        }
        Condition::Not(inner) => condition_signature_only(inner, archived),
    }
}

fn condition_mentions(c: &Condition, vars: &BTreeSet<String>) -> bool {
    !c.variables().is_disjoint(vars)
}

/// Splits the condition for a given set of archived-backed value
/// variables. Signature-only mode holds when no conjunct needs raw
/// archived data; a mixed condition keeps its signature conjuncts as a
/// prefilter in front of the raw work.
pub fn plan_condition(condition: &Condition, archived: &BTreeSet<String>) -> ConditionPlan {
    let mut prefilter = Vec::new();
    let mut residual = Vec::new();
    for conjunct in condition.conjuncts() {
        if condition_mentions(conjunct, archived) && condition_signature_only(conjunct, archived) {
            prefilter.push(conjunct.clone());
        } else {
            residual.push(conjunct.clone());
        }
    }
    let raw_needed = residual.iter().any(|c| condition_mentions(c, archived));
    ConditionPlan {
        mode: if raw_needed { AccessMode::Hybrid } else { AccessMode::SignatureOnly },
        prefilter,
        residual,
    }
}

/// Access-mode classification of a streaming predicate over archived
/// windows.
pub fn plan_hybrid(condition: &Condition, archived: &BTreeSet<String>) -> AccessMode {
    plan_condition(condition, archived).mode
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::Cmp;

    fn var(v: &str) -> ValueExpr {
        ValueExpr::Var(v.to_string())
    }

    fn call(f: StreamFn, args: Vec<ValueExpr>) -> ValueExpr {
        ValueExpr::Call(f, args)
    }

    fn archived(vars: &[&str]) -> BTreeSet<String> {
        vars.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn avg_comparison_is_signature_only() {
        // abs(avg(?y) - avg(?z)) < 10 with ?z archived.
        let cond = Condition::Cmp(
            Cmp::Lt,
            call(
                StreamFn::Abs,
                alloc::vec![ValueExpr::Arith(
                    crate::ir::ArithOp::Sub,
                    Box::new(call(StreamFn::Avg, alloc::vec![var("y")])),
                    Box::new(call(StreamFn::Avg, alloc::vec![var("z")])),
                )],
            ),
            ValueExpr::Const(10.0),
        );
        let plan = plan_condition(&cond, &archived(&["z"]));
        assert_eq!(plan.mode, AccessMode::SignatureOnly);
        assert_eq!(plan.prefilter.len(), 1);
        assert!(plan.residual.is_empty());
    }

    #[test]
    fn pearson_is_hybrid() {
        let cond = Condition::Cmp(
            Cmp::Gt,
            call(StreamFn::Pearson, alloc::vec![var("y"), var("z")]),
            ValueExpr::Const(0.75),
        );
        assert_eq!(plan_hybrid(&cond, &archived(&["z"])), AccessMode::Hybrid);
    }

    #[test]
    fn mixed_condition_keeps_signature_prefilter() {
        let avg_part = Condition::Cmp(
            Cmp::Lt,
            call(StreamFn::Avg, alloc::vec![var("z")]),
            ValueExpr::Const(30.0),
        );
        let pearson_part = Condition::Cmp(
            Cmp::Gt,
            call(StreamFn::Pearson, alloc::vec![var("y"), var("z")]),
            ValueExpr::Const(0.75),
        );
        let cond = Condition::And(Box::new(avg_part.clone()), Box::new(pearson_part.clone()));
        let plan = plan_condition(&cond, &archived(&["z"]));
        assert_eq!(plan.mode, AccessMode::Hybrid);
        assert_eq!(plan.prefilter, alloc::vec![avg_part]);
        assert_eq!(plan.residual, alloc::vec![pearson_part]);
    }

    #[test]
    fn per_state_comparison_on_archived_var_is_hybrid() {
        let cond = Condition::Cmp(Cmp::Gt, var("z"), ValueExpr::Const(90.0));
        assert_eq!(plan_hybrid(&cond, &archived(&["z"])), AccessMode::Hybrid);
        // The same comparison on a live variable needs no archive at all.
        assert_eq!(plan_hybrid(&cond, &archived(&["w"])), AccessMode::SignatureOnly);
    }
}
