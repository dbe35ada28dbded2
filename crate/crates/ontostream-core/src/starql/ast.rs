//! Typed AST of a stream query.

use alloc::string::String;
use alloc::vec::Vec;

/// A parsed query: pulse, output declaration, static sources and pattern,
/// windowed stream sources, sequencing, and the streaming condition.
#[derive(Debug, Clone, PartialEq)]
pub struct StarqlQuery {
    pub prefixes: Vec<(String, String)>,
    pub pulse: Option<PulseDecl>,
    pub output_stream: String,
    pub output: OutputForm,
    pub static_ontology: Option<String>,
    pub static_data: Option<String>,
    pub where_triples: Vec<WhereTriple>,
    pub stream_sources: Vec<StreamSourceDecl>,
    pub using_pulse: Option<String>,
    pub sequencing: Option<SequencingDecl>,
    pub having: Option<HavingExpr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PulseDecl {
    pub name: String,
    pub start: TimeAnchor,
    pub frequency_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimeAnchor {
    Now,
    AbsoluteMs(i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutputForm {
    /// `CONSTRUCT GRAPH NOW { ?v a Concept }`
    Construct { subject_var: String, concept: String },
    Select { vars: Vec<String> },
}

impl OutputForm {
    pub fn variables(&self) -> Vec<&String> {
        match self {
            OutputForm::Construct { subject_var, .. } => alloc::vec![subject_var],
            OutputForm::Select { vars } => vars.iter().collect(),
        }
    }
}

/// A term in a graph pattern. Qnames are resolved to their local name;
/// the ontology layer works with plain names.
#[derive(Debug, Clone, PartialEq)]
pub enum PatternTerm {
    Var(String),
    Name(String),
    /// Numeric literal kept as source text so the static layer can parse
    /// it into an exact rational.
    Number(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhereTriple {
    pub subject: PatternTerm,
    /// `a` (a concept membership) or a role/attribute name.
    pub predicate: WherePredicate,
    pub object: PatternTerm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WherePredicate {
    IsA,
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamSourceDecl {
    pub name: String,
    /// `setback <-[...]`: how far into the past this stream's windows are
    /// shifted relative to the pulse.
    pub set_back_ms: Option<i64>,
    pub range_ms: i64,
    /// `-> slide`; defaults to the pulse frequency when omitted.
    pub slide_ms: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequencingDecl {
    pub strategy: String,
    pub alias: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantifierKind {
    Exists,
    Forall,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexExpr {
    pub var: String,
    pub offset: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphTriple {
    pub subject: PatternTerm,
    pub predicate: String,
    pub value: PatternTerm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedGraph {
    pub index: IndexExpr,
    pub triples: Vec<GraphTriple>,
}

/// The streaming condition tree.
#[derive(Debug, Clone, PartialEq)]
pub enum HavingExpr {
    Quantified {
        quantifier: QuantifierKind,
        index_var: String,
        sequence: String,
        graphs: Vec<IndexedGraph>,
        filter: alloc::boxed::Box<HavingExpr>,
    },
    Compare {
        op: CompareOp,
        left: NumExpr,
        right: NumExpr,
    },
    And(alloc::boxed::Box<HavingExpr>, alloc::boxed::Box<HavingExpr>),
    Or(alloc::boxed::Box<HavingExpr>, alloc::boxed::Box<HavingExpr>),
    Not(alloc::boxed::Box<HavingExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NumExpr {
    Var(String),
    Const(f64),
    Call(String, Vec<NumExpr>),
    Add(alloc::boxed::Box<NumExpr>, alloc::boxed::Box<NumExpr>),
    Sub(alloc::boxed::Box<NumExpr>, alloc::boxed::Box<NumExpr>),
    Mul(alloc::boxed::Box<NumExpr>, alloc::boxed::Box<NumExpr>),
    Div(alloc::boxed::Box<NumExpr>, alloc::boxed::Box<NumExpr>),
}

impl HavingExpr {
    /// Walks every quantifier in the tree.
    pub fn visit_quantifiers<'a>(&'a self, f: &mut impl FnMut(&'a HavingExpr)) {
        match self {
            HavingExpr::Quantified { filter, .. } => {
                f(self);
                filter.visit_quantifiers(f);
            }
            HavingExpr::And(l, r) | HavingExpr::Or(l, r) => {
                l.visit_quantifiers(f);
                r.visit_quantifiers(f);
            }
            HavingExpr::Not(inner) => inner.visit_quantifiers(f),
            HavingExpr::Compare { .. } => {}
        }
    }

    /// Walks every comparison in the tree.
    pub fn visit_compares<'a>(&'a self, f: &mut impl FnMut(&'a NumExpr, &'a NumExpr)) {
        match self {
            HavingExpr::Quantified { filter, .. } => filter.visit_compares(f),
            HavingExpr::And(l, r) | HavingExpr::Or(l, r) => {
                l.visit_compares(f);
                r.visit_compares(f);
            }
            HavingExpr::Not(inner) => inner.visit_compares(f),
            HavingExpr::Compare { left, right, .. } => f(left, right),
        }
    }
}

impl NumExpr {
    pub fn collect_vars<'a>(&'a self, out: &mut Vec<&'a String>) {
        match self {
            NumExpr::Var(v) => out.push(v),
            NumExpr::Const(_) => {}
            NumExpr::Call(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
            NumExpr::Add(l, r) | NumExpr::Sub(l, r) | NumExpr::Mul(l, r) | NumExpr::Div(l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    pub fn collect_calls<'a>(&'a self, out: &mut Vec<&'a String>) {
        match self {
            NumExpr::Call(name, args) => {
                out.push(name);
                for a in args {
                    a.collect_calls(out);
                }
            }
            NumExpr::Add(l, r) | NumExpr::Sub(l, r) | NumExpr::Mul(l, r) | NumExpr::Div(l, r) => {
                l.collect_calls(out);
                r.collect_calls(out);
            }
            _ => {}
        }
    }
}
