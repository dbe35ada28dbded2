//! Lowering a validated query into an executable plan: the static WHERE
//! pattern goes through rewrite and unfold, the streaming HAVING clause is
//! normalized and unfolded over the stream mapping schemas, and the two are
//! composed so static answers gate the streaming bindings.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::*;
use super::validate::{validate, QueryValidation};
use crate::ir::{ArithOp, Condition, Quantifier, RelExpr, StreamFn, ValueExpr};
use crate::mapping::{
    unfold_static, unfold_streaming, GraphStateSpec, HavingNormal, MappingSet, StreamSourceSpec,
    SubjectTerm, TripleSpec, UnfoldError,
};
use crate::ontology::{Cmp, Ontology};
use crate::query::{Atom, ConjunctiveQuery, Term};
use crate::rational::parse_rational;
use crate::rewrite::{rewrite, RewriteError, Vocabulary};
use crate::starql::token::format_duration_ms;

/// A compiled query, ready for the engine: static filter plan, streaming
/// plan, window parameters, and the output recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutablePlan {
    pub static_plan: Option<RelExpr>,
    /// Head variables of the static plan, in its column order.
    pub static_vars: Vec<String>,
    pub stream_plan: Option<RelExpr>,
    pub sources: Vec<StreamSourceSpec>,
    pub output: OutputForm,
    pub output_stream: String,
    pub pulse_start: TimeAnchor,
    pub pulse_frequency_ms: i64,
}

impl ExecutablePlan {
    /// Deterministic plan rendering, one operator per line.
    pub fn explain(&self) -> String {
        let mut out = String::new();
        let start = match &self.pulse_start {
            TimeAnchor::Now => String::from("NOW"),
            TimeAnchor::AbsoluteMs(ms) => format!("{ms}ms"),
        };
        out.push_str(&format!(
            "pulse: start={start} frequency={}\n",
            format_duration_ms(self.pulse_frequency_ms)
        ));
        for s in &self.sources {
            out.push_str(&format!(
                "source: {} range={} slide={} setback={}\n",
                s.name,
                format_duration_ms(s.range_ms),
                format_duration_ms(s.slide_ms),
                format_duration_ms(s.set_back_ms)
            ));
        }
        match &self.output {
            OutputForm::Construct { subject_var, concept } => {
                out.push_str(&format!(
                    "output: construct ?{subject_var} a {concept} -> {}\n",
                    self.output_stream
                ));
            }
            OutputForm::Select { vars } => {
                let vars: Vec<String> = vars.iter().map(|v| format!("?{v}")).collect();
                out.push_str(&format!("output: select {} -> {}\n", vars.join(" "), self.output_stream));
            }
        }
        match &self.static_plan {
            Some(plan) => {
                out.push_str(&format!("static vars: [{}]\n", self.static_vars.join(", ")));
                out.push_str("static plan:\n");
                for line in plan.explain().lines() {
                    out.push_str("  ");
                    out.push_str(line);
                    out.push('\n');
                }
            }
            None => out.push_str("static plan: none\n"),
        }
        match &self.stream_plan {
            Some(plan) => {
                out.push_str("stream plan:\n");
                for line in plan.explain().lines() {
                    out.push_str("  ");
                    out.push_str(line);
                    out.push('\n');
                }
            }
            None => out.push_str("stream plan: none\n"),
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CompileError {
    Invalid(QueryValidation),
    Rewrite(RewriteError),
    Unfold(UnfoldError),
    /// Quantifiers may not nest and boolean combinations of quantified
    /// blocks are not supported.
    UnsupportedQuantifierShape,
    TripleValueNotVariable { predicate: String },
    NumericSubject { predicate: String },
    AmbiguousPredicate { name: String },
    BadNumericLiteral { text: String },
    SeriesVariableInOutput { var: String },
    MissingSlide { stream: String },
    WrongArity { function: &'static str, expected: usize },
}

impl core::fmt::Display for CompileError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CompileError::Invalid(v) => {
                write!(f, "query is invalid ({} violations)", v.violations.len())
            }
            CompileError::Rewrite(e) => write!(f, "{e}"),
            CompileError::Unfold(e) => write!(f, "{e}"),
            CompileError::UnsupportedQuantifierShape => {
                f.write_str("HAVING must be a single quantified block (no nesting)")
            }
            CompileError::TripleValueNotVariable { predicate } => {
                write!(f, "value position of `{predicate}` must be a variable")
            }
            CompileError::NumericSubject { predicate } => {
                write!(f, "subject of `{predicate}` cannot be a number")
            }
            CompileError::AmbiguousPredicate { name } => {
                write!(f, "`{name}` is declared both as a role and an attribute")
            }
            CompileError::BadNumericLiteral { text } => {
                write!(f, "cannot parse numeric literal `{text}`")
            }
            CompileError::SeriesVariableInOutput { var } => {
                write!(f, "output variable `?{var}` is a measured series, not a binding")
            }
            CompileError::MissingSlide { stream } => {
                write!(f, "stream `{stream}` has no slide and no pulse to default to")
            }
            CompileError::WrongArity { function, expected } => {
                write!(f, "`{function}` takes {expected} argument(s)")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CompileError {}

impl From<RewriteError> for CompileError {
    fn from(e: RewriteError) -> Self {
        CompileError::Rewrite(e)
    }
}

impl From<UnfoldError> for CompileError {
    fn from(e: UnfoldError) -> Self {
        CompileError::Unfold(e)
    }
}

/// The static WHERE pattern lowered to a conjunctive query, with the head
/// variables the rest of the query needs. `None` when there is no WHERE.
pub fn static_conjunctive_query(
    q: &StarqlQuery,
    o: &Ontology,
    m: &MappingSet,
) -> Result<Option<ConjunctiveQuery>, CompileError> {
    if q.where_triples.is_empty() {
        return Ok(None);
    }
    let mut vocab = Vocabulary::from_ontology(o);
    vocab.merge(&m.static_vocabulary());
    let mut needed: BTreeSet<String> = q.output.variables().into_iter().cloned().collect();
    if let Some(h) = &q.having {
        h.visit_quantifiers(&mut |expr| {
            if let HavingExpr::Quantified { graphs, .. } = expr {
                for g in graphs {
                    for t in &g.triples {
                        if let PatternTerm::Var(v) = &t.subject {
                            needed.insert(v.clone());
                        }
                    }
                }
            }
        });
    }
    lower_where(&q.where_triples, &vocab, &needed).map(Some)
}

pub fn compile(
    q: &StarqlQuery,
    o: &Ontology,
    m: &MappingSet,
) -> Result<ExecutablePlan, CompileError> {
    let report = validate(q);
    if !report.is_valid() {
        return Err(CompileError::Invalid(report));
    }
    let mut vocab = Vocabulary::from_ontology(o);
    vocab.merge(&m.static_vocabulary());

    // Variables the rest of the query needs from the static part.
    let mut needed: BTreeSet<String> = q.output.variables().into_iter().cloned().collect();
    let mut stream_vars: BTreeSet<String> = BTreeSet::new();
    if let Some(h) = &q.having {
        h.visit_quantifiers(&mut |expr| {
            if let HavingExpr::Quantified { graphs, .. } = expr {
                for g in graphs {
                    for t in &g.triples {
                        if let PatternTerm::Var(v) = &t.subject {
                            stream_vars.insert(v.clone());
                        }
                    }
                }
            }
        });
    }
    needed.extend(stream_vars.iter().cloned());

    // Static half.
    let (static_plan, static_vars) = if q.where_triples.is_empty() {
        (None, Vec::new())
    } else {
        let cq = lower_where(&q.where_triples, &vocab, &needed)?;
        let head = cq.head.clone();
        let ucq = rewrite(&cq, o, &vocab)?;
        let plan = unfold_static(&ucq, m, o)?;
        (Some(plan), head)
    };

    // Pulse defaults: without a declaration the pulse ticks at the
    // smallest declared slide (else range).
    let (pulse_start, pulse_frequency_ms) = match &q.pulse {
        Some(p) => (p.start.clone(), p.frequency_ms),
        None => {
            let freq = q
                .stream_sources
                .iter()
                .filter_map(|s| s.slide_ms)
                .chain(q.stream_sources.iter().map(|s| s.range_ms))
                .filter(|ms| *ms > 0)
                .min()
                .unwrap_or(1_000);
            (TimeAnchor::Now, freq)
        }
    };

    let mut sources = Vec::new();
    for s in &q.stream_sources {
        let slide_ms = match s.slide_ms {
            Some(sl) => sl,
            None => {
                if pulse_frequency_ms > 0 {
                    pulse_frequency_ms
                } else {
                    return Err(CompileError::MissingSlide { stream: s.name.clone() });
                }
            }
        };
        sources.push(StreamSourceSpec {
            name: s.name.clone(),
            range_ms: s.range_ms,
            slide_ms,
            set_back_ms: s.set_back_ms.unwrap_or(0),
        });
    }

    // Streaming half.
    let stream_plan = match &q.having {
        None => None,
        Some(h) => {
            let normal = normalize_having(h, q, &static_vars)?;
            Some(unfold_streaming(&normal, m, &sources)?)
        }
    };

    Ok(ExecutablePlan {
        static_plan,
        static_vars,
        stream_plan,
        sources,
        output: q.output.clone(),
        output_stream: q.output_stream.clone(),
        pulse_start,
        pulse_frequency_ms,
    })
}

fn lower_where(
    triples: &[WhereTriple],
    vocab: &Vocabulary,
    needed: &BTreeSet<String>,
) -> Result<ConjunctiveQuery, CompileError> {
    let mut atoms = Vec::new();
    let mut bound: BTreeSet<String> = BTreeSet::new();
    for t in triples {
        let subject = lower_term(&t.subject)?;
        if let Term::Var(v) = &subject {
            bound.insert(v.clone());
        }
        match &t.predicate {
            WherePredicate::IsA => {
                let concept = match &t.object {
                    PatternTerm::Name(n) => n.clone(),
                    PatternTerm::Var(_) | PatternTerm::Number(_) => {
                        return Err(CompileError::TripleValueNotVariable {
                            predicate: "a".into(),
                        })
                    }
                };
                atoms.push(Atom::Concept { name: concept, arg: subject });
            }
            WherePredicate::Named(p) => {
                let is_role = vocab.roles.contains(p);
                let is_attr = vocab.attributes.contains(p);
                let object = lower_term(&t.object)?;
                if let Term::Var(v) = &object {
                    bound.insert(v.clone());
                }
                if is_role && is_attr {
                    return Err(CompileError::AmbiguousPredicate { name: p.clone() });
                }
                if is_attr || matches!(object, Term::Val(_)) {
                    atoms.push(Atom::Attribute { name: p.clone(), subject, value: object });
                } else {
                    // Unknown predicates default to role atoms; the
                    // rewriter reports them against the vocabulary.
                    atoms.push(Atom::Role { name: p.clone(), subject, object });
                }
            }
        }
    }
    let head: Vec<String> = bound.iter().filter(|v| needed.contains(*v)).cloned().collect();
    Ok(ConjunctiveQuery::new(head, atoms))
}

fn lower_term(t: &PatternTerm) -> Result<Term, CompileError> {
    Ok(match t {
        PatternTerm::Var(v) => Term::Var(v.clone()),
        PatternTerm::Name(n) => Term::ind(n.clone()),
        PatternTerm::Number(text) => Term::Val(
            parse_rational(text)
                .map_err(|_| CompileError::BadNumericLiteral { text: text.clone() })?,
        ),
    })
}

fn normalize_having(
    h: &HavingExpr,
    q: &StarqlQuery,
    static_vars: &[String],
) -> Result<HavingNormal, CompileError> {
    let HavingExpr::Quantified { quantifier, index_var, graphs, filter, .. } = h else {
        return Err(CompileError::UnsupportedQuantifierShape);
    };

    // Merge graphs with equal offsets into one state.
    let mut states: Vec<GraphStateSpec> = Vec::new();
    let mut subject_vars: BTreeSet<String> = BTreeSet::new();
    for g in graphs {
        let mut triples = Vec::new();
        for t in &g.triples {
            let subject = match &t.subject {
                PatternTerm::Var(v) => {
                    subject_vars.insert(v.clone());
                    SubjectTerm::Var(v.clone())
                }
                PatternTerm::Name(n) => SubjectTerm::Const(n.clone()),
                PatternTerm::Number(_) => {
                    return Err(CompileError::NumericSubject { predicate: t.predicate.clone() })
                }
            };
            let value_var = match &t.value {
                PatternTerm::Var(v) => v.clone(),
                _ => {
                    return Err(CompileError::TripleValueNotVariable {
                        predicate: t.predicate.clone(),
                    })
                }
            };
            triples.push(TripleSpec { subject, predicate: t.predicate.clone(), value_var });
        }
        match states.iter_mut().find(|s| s.offset == g.index.offset) {
            Some(state) => state.triples.extend(triples),
            None => states.push(GraphStateSpec { offset: g.index.offset, triples }),
        }
    }
    states.sort_by_key(|s| s.offset);

    let condition = lower_condition(filter)?;

    // Output variables must be subject bindings, not measured series.
    for v in q.output.variables() {
        let in_stream = subject_vars.contains(v);
        let in_static = static_vars.contains(v);
        if !in_stream && !in_static {
            return Err(CompileError::SeriesVariableInOutput { var: v.clone() });
        }
    }
    let mut group: BTreeSet<String> = BTreeSet::new();
    for v in q.output.variables() {
        if subject_vars.contains(v) {
            group.insert(v.clone());
        }
    }
    for v in static_vars {
        if subject_vars.contains(v) {
            group.insert(v.clone());
        }
    }

    let strategy = q
        .sequencing
        .as_ref()
        .map(|s| s.strategy.clone())
        .unwrap_or_else(|| "StandardSequencing".to_string());

    Ok(HavingNormal {
        quantifier: match quantifier {
            QuantifierKind::Exists => Quantifier::Exists,
            QuantifierKind::Forall => Quantifier::Forall,
        },
        index_var: index_var.clone(),
        states,
        condition,
        group: group.into_iter().collect(),
        strategy,
    })
}

fn lower_condition(h: &HavingExpr) -> Result<Condition, CompileError> {
    Ok(match h {
        HavingExpr::Quantified { .. } => return Err(CompileError::UnsupportedQuantifierShape),
        HavingExpr::Compare { op, left, right } => {
            let cmp = match op {
                CompareOp::Lt => Cmp::Lt,
                CompareOp::Le => Cmp::Le,
                CompareOp::Gt => Cmp::Gt,
                CompareOp::Ge => Cmp::Ge,
                CompareOp::Eq => Cmp::Eq,
                CompareOp::Ne => Cmp::Ne,
            };
            Condition::Cmp(cmp, lower_value(left)?, lower_value(right)?)
        }
        HavingExpr::And(l, r) => {
            Condition::And(Box::new(lower_condition(l)?), Box::new(lower_condition(r)?))
        }
        HavingExpr::Or(l, r) => {
            Condition::Or(Box::new(lower_condition(l)?), Box::new(lower_condition(r)?))
        }
        HavingExpr::Not(inner) => Condition::Not(Box::new(lower_condition(inner)?)),
    })
}

fn lower_value(e: &NumExpr) -> Result<ValueExpr, CompileError> {
    Ok(match e {
        NumExpr::Var(v) => ValueExpr::Var(v.clone()),
        NumExpr::Const(c) => ValueExpr::Const(*c),
        NumExpr::Call(name, args) => {
            let f = StreamFn::parse(name).ok_or_else(|| {
                // Validation whitelists functions first; this guards
                // direct AST construction.
                CompileError::Invalid(QueryValidation::default())
            })?;
            let expected = match f {
                StreamFn::Pearson | StreamFn::Cosine => 2,
                _ => 1,
            };
            if args.len() != expected {
                return Err(CompileError::WrongArity { function: f.name(), expected });
            }
            let mut lowered = Vec::with_capacity(args.len());
            for a in args {
                lowered.push(lower_value(a)?);
            }
            ValueExpr::Call(f, lowered)
        }
        NumExpr::Add(l, r) => arith(ArithOp::Add, l, r)?,
        NumExpr::Sub(l, r) => arith(ArithOp::Sub, l, r)?,
        NumExpr::Mul(l, r) => arith(ArithOp::Mul, l, r)?,
        NumExpr::Div(l, r) => arith(ArithOp::Div, l, r)?,
    })
}

fn arith(op: ArithOp, l: &NumExpr, r: &NumExpr) -> Result<ValueExpr, CompileError> {
    Ok(ValueExpr::Arith(op, Box::new(lower_value(l)?), Box::new(lower_value(r)?)))
}
