//! Mappings from ontology vocabulary to data, and the unfolding of
//! rewritten queries through them into the relational/stream algebra.
//!
//! Two kinds of mappings are stored: classical ones (concept, role,
//! attribute to a table scan) and streaming schemas (a stream predicate to
//! a parameterized window slice). Aggregate mappings are never stored:
//! the group-having query for an aggregate concept is derived on the fly
//! from the current ontology and attribute mappings, so edits to either
//! can never leave a stale aggregate query behind.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::ir::{
    Condition, IndexTerm, ProjectCol, Quantifier, RelExpr, RowPredicate, Literal,
};
use crate::ontology::{AggregateConcept, Ontology};
use crate::query::{Atom, ConjunctiveQuery, Term, UnionOfCqs};
use crate::rewrite::{rewrite_attribute, RewriteError, Vocabulary};

/// What a classical mapping head refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredicateKind {
    Concept,
    Role,
    Attribute,
}

/// `Predicate(vars...) <- scan(table; var=col, ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalMapping {
    pub kind: PredicateKind,
    pub predicate: String,
    pub head_vars: Vec<String>,
    pub body: RelExpr,
}

/// `GRAPH i { ?s pred ?v } <- slice(stream; s=subject_field, v=value_field)`
/// with the window parameters left symbolic until compilation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamMappingSchema {
    pub predicate: String,
    pub stream: String,
    pub subject_field: String,
    pub value_field: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MappingSet {
    pub classical: Vec<ClassicalMapping>,
    pub streaming: Vec<StreamMappingSchema>,
}

impl MappingSet {
    /// Identity mappings over dataset-derived tables: every concept scans
    /// its own table (`id`), roles `s`/`o`, attributes `s`/`v`, matching the
    /// layout `Database::from_dataset` produces.
    pub fn identity(vocab: &Vocabulary) -> MappingSet {
        let mut m = MappingSet::default();
        for c in &vocab.concepts {
            m.classical.push(ClassicalMapping {
                kind: PredicateKind::Concept,
                predicate: c.clone(),
                head_vars: alloc::vec!["x".into()],
                body: RelExpr::scan(c.clone(), alloc::vec![("x".into(), "id".into())]),
            });
        }
        for r in &vocab.roles {
            m.classical.push(ClassicalMapping {
                kind: PredicateKind::Role,
                predicate: r.clone(),
                head_vars: alloc::vec!["x".into(), "y".into()],
                body: RelExpr::scan(
                    r.clone(),
                    alloc::vec![("x".into(), "s".into()), ("y".into(), "o".into())],
                ),
            });
        }
        for f in &vocab.attributes {
            m.classical.push(ClassicalMapping {
                kind: PredicateKind::Attribute,
                predicate: f.clone(),
                head_vars: alloc::vec!["x".into(), "y".into()],
                body: RelExpr::scan(
                    f.clone(),
                    alloc::vec![("x".into(), "s".into()), ("y".into(), "v".into())],
                ),
            });
        }
        m
    }

    /// The static vocabulary the mappings cover, merged into rewriting.
    pub fn static_vocabulary(&self) -> Vocabulary {
        let mut v = Vocabulary::default();
        for m in &self.classical {
            match m.kind {
                PredicateKind::Concept => {
                    v.concepts.insert(m.predicate.clone());
                }
                PredicateKind::Role => {
                    v.roles.insert(m.predicate.clone());
                }
                PredicateKind::Attribute => {
                    v.attributes.insert(m.predicate.clone());
                }
            }
        }
        v
    }

    pub fn stream_predicates(&self) -> BTreeSet<String> {
        self.streaming.iter().map(|s| s.predicate.clone()).collect()
    }

    fn classical_for(&self, kind: PredicateKind, name: &str) -> Vec<&ClassicalMapping> {
        self.classical
            .iter()
            .filter(|m| m.kind == kind && m.predicate == name)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UnfoldError {
    UnmappedPredicate { predicate: String, disjunct: String },
    NoStreamMapping { predicate: String },
    Rewrite(RewriteError),
}

impl core::fmt::Display for UnfoldError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            UnfoldError::UnmappedPredicate { predicate, disjunct } => {
                write!(f, "no mapping for predicate `{predicate}` in disjunct `{disjunct}`")
            }
            UnfoldError::NoStreamMapping { predicate } => {
                write!(f, "no streaming mapping covers `{predicate}` for any declared stream")
            }
            UnfoldError::Rewrite(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for UnfoldError {}

impl From<RewriteError> for UnfoldError {
    fn from(e: RewriteError) -> Self {
        UnfoldError::Rewrite(e)
    }
}

/// Instantiates a mapping body for a concrete atom: head variables become
/// the atom's terms. Variable terms rename the output column; constant
/// terms select on an internal column which is dropped by the final
/// projection; a repeated variable selects on column equality.
fn instantiate_body(
    body: &RelExpr,
    head_vars: &[String],
    terms: &[&Term],
    fresh: &mut usize,
) -> RelExpr {
    debug_assert_eq!(head_vars.len(), terms.len());
    let cols = body.output_columns().expect("mapping bodies are well-formed");
    let mut projections: Vec<ProjectCol> = Vec::new();
    let mut selections: Vec<RowPredicate> = Vec::new();
    let mut bound: alloc::collections::BTreeMap<&str, String> = alloc::collections::BTreeMap::new();

    for (hv, term) in head_vars.iter().zip(terms.iter()) {
        debug_assert!(cols.contains(hv));
        match term {
            Term::Var(v) => {
                if let Some(first) = bound.get(v.as_str()) {
                    // Repeated variable within the atom: equality filter.
                    selections.push(RowPredicate::ColEqCol(first.clone(), hv.clone()));
                } else {
                    bound.insert(v.as_str(), hv.clone());
                    projections.push(ProjectCol::renamed(v.clone(), hv.clone()));
                }
            }
            Term::Ind(i) => {
                selections.push(RowPredicate::ColEqLit(
                    hv.clone(),
                    Literal::Str(i.name().to_string()),
                ));
            }
            Term::Val(r) => {
                selections.push(RowPredicate::ColEqLit(hv.clone(), Literal::Rat(r.clone())));
            }
        }
    }

    let mut expr = body.clone();
    for p in selections {
        expr = RelExpr::Select { input: Box::new(expr), predicate: p };
    }
    if projections.is_empty() {
        // All-constant atom: keep one column so the relation is nonempty
        // schema-wise; it is filtered, not projected out downstream.
        let placeholder = format!("_k{}", *fresh);
        *fresh += 1;
        expr = RelExpr::Project {
            input: Box::new(expr),
            columns: alloc::vec![ProjectCol::renamed(placeholder, cols[0].clone())],
        };
    } else {
        expr = RelExpr::Project { input: Box::new(expr), columns: projections };
    }
    expr
}

/// Unfolds a rewritten union of conjunctive queries into a plan over the
/// mapped tables: each disjunct becomes a join of instantiated mapping
/// bodies over shared variables (one plan per combination of candidate
/// mappings), aggregate atoms become derived group-having subplans, and
/// everything is unioned and projected to the head variables.
pub fn unfold_static(
    u: &UnionOfCqs,
    m: &MappingSet,
    o: &Ontology,
) -> Result<RelExpr, UnfoldError> {
    let mut arms: Vec<RelExpr> = Vec::new();
    let mut fresh = 0usize;
    for disjunct in &u.disjuncts {
        let mut atom_plans: Vec<Vec<RelExpr>> = Vec::new();
        for atom in &disjunct.atoms {
            let candidates = atom_candidates(atom, m, o, &mut fresh, disjunct)?;
            atom_plans.push(candidates);
        }
        // Cross product of candidate choices.
        let mut combos: Vec<Vec<&RelExpr>> = alloc::vec![Vec::new()];
        for candidates in &atom_plans {
            let mut next = Vec::new();
            for combo in &combos {
                for c in candidates {
                    let mut extended = combo.clone();
                    extended.push(c);
                    next.push(extended);
                }
            }
            combos = next;
        }
        for combo in combos {
            let mut plan: Option<RelExpr> = None;
            let mut have_cols: Vec<String> = Vec::new();
            for part in combo {
                let part_cols = part.output_columns().expect("instantiated bodies are valid");
                plan = Some(match plan {
                    None => {
                        have_cols = part_cols;
                        part.clone()
                    }
                    Some(acc) => {
                        let keys: Vec<String> = part_cols
                            .iter()
                            .filter(|c| have_cols.contains(c))
                            .cloned()
                            .collect();
                        for c in part_cols {
                            if !have_cols.contains(&c) {
                                have_cols.push(c);
                            }
                        }
                        RelExpr::Join {
                            left: Box::new(acc),
                            right: Box::new(part.clone()),
                            keys,
                        }
                    }
                });
            }
            let plan = plan.expect("disjuncts have at least one atom");
            let projected = RelExpr::Project {
                input: Box::new(plan),
                columns: disjunct.head.iter().map(|h| ProjectCol::keep(h.clone())).collect(),
            };
            arms.push(projected);
        }
    }
    let plan = crate::ir::simplify(if arms.len() == 1 {
        arms.into_iter().next().unwrap()
    } else {
        RelExpr::Union { inputs: arms }
    });
    debug_assert!(plan.validate(false).is_ok(), "unfolding built an ill-typed plan");
    Ok(plan)
}

fn atom_candidates(
    atom: &Atom,
    m: &MappingSet,
    o: &Ontology,
    fresh: &mut usize,
    disjunct: &ConjunctiveQuery,
) -> Result<Vec<RelExpr>, UnfoldError> {
    let unmapped = |predicate: &str| UnfoldError::UnmappedPredicate {
        predicate: predicate.to_string(),
        disjunct: format!("{disjunct}"),
    };
    match atom {
        Atom::Concept { name, arg } => {
            let mappings = m.classical_for(PredicateKind::Concept, name);
            if mappings.is_empty() {
                return Err(unmapped(name));
            }
            Ok(mappings
                .iter()
                .map(|cm| instantiate_body(&cm.body, &cm.head_vars, &[arg], fresh))
                .collect())
        }
        Atom::Role { name, subject, object } => {
            let mappings = m.classical_for(PredicateKind::Role, name);
            if mappings.is_empty() {
                return Err(unmapped(name));
            }
            Ok(mappings
                .iter()
                .map(|cm| instantiate_body(&cm.body, &cm.head_vars, &[subject, object], fresh))
                .collect())
        }
        Atom::Attribute { name, subject, value } => {
            let mappings = m.classical_for(PredicateKind::Attribute, name);
            if mappings.is_empty() {
                return Err(unmapped(name));
            }
            Ok(mappings
                .iter()
                .map(|cm| instantiate_body(&cm.body, &cm.head_vars, &[subject, value], fresh))
                .collect())
        }
        Atom::Aggregate { concept, arg } => {
            let body = build_aggregate_query(concept, m, o)?;
            // The derived query exposes column `x`; bind it to the atom
            // term like a unary mapping head.
            Ok(alloc::vec![instantiate_body(
                &body,
                &["x".to_string()],
                &[arg],
                fresh
            )])
        }
    }
}

/// Builds the group-having query for an aggregate concept: the attribute is
/// rewritten (all sub-attributes), unfolded, and wrapped in
/// `GROUP BY x HAVING agg(y) cmp r`. Derived on the fly, never cached.
pub fn build_aggregate_query(
    e: &AggregateConcept,
    m: &MappingSet,
    o: &Ontology,
) -> Result<RelExpr, UnfoldError> {
    let mut vocab = Vocabulary::from_ontology(o);
    vocab.merge(&m.static_vocabulary());
    let attr_ucq = rewrite_attribute(&e.attribute, o, &vocab)?;
    let sql_f = unfold_static(&attr_ucq, m, o)?;
    Ok(RelExpr::GroupHaving {
        input: Box::new(sql_f),
        group: alloc::vec!["x".into()],
        value: "y".into(),
        agg: e.agg,
        cmp: e.cmp,
        threshold: e.threshold.clone(),
    })
}

/// One declared stream source of a query, with its window parameters
/// already normalized to milliseconds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamSourceSpec {
    pub name: String,
    pub range_ms: i64,
    pub slide_ms: i64,
    pub set_back_ms: i64,
}

/// The subject of a streaming triple pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubjectTerm {
    Var(String),
    Const(String),
}

/// `?subject predicate ?value` inside a `GRAPH` state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleSpec {
    pub subject: SubjectTerm,
    pub predicate: String,
    pub value_var: String,
}

/// One indexed state of the normalized streaming clause.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphStateSpec {
    pub offset: i64,
    pub triples: Vec<TripleSpec>,
}

/// The normalized relational form of a streaming clause: quantified graph
/// states plus a condition over the bound value variables.
#[derive(Debug, Clone, PartialEq)]
pub struct HavingNormal {
    pub quantifier: Quantifier,
    pub index_var: String,
    pub states: Vec<GraphStateSpec>,
    pub condition: Condition,
    /// Output/static variables the qualifying bindings are grouped by.
    pub group: Vec<String>,
    pub strategy: String,
}

/// Unfolds the normalized streaming clause: every triple becomes the slices
/// of the declared streams whose schemas cover its predicate (a union when
/// several do), states are joined on the temporal state column plus shared
/// subject variables, and the whole feeds the correlate operator carrying
/// the condition.
pub fn unfold_streaming(
    h: &HavingNormal,
    m: &MappingSet,
    sources: &[StreamSourceSpec],
) -> Result<RelExpr, UnfoldError> {
    let mut plan: Option<RelExpr> = None;
    let mut have_cols: Vec<String> = Vec::new();
    let mut fresh = 0usize;

    for state in &h.states {
        for triple in &state.triples {
            let (arms, subject_col) = slice_arms(triple, state.offset, h, m, sources, &mut fresh)?;
            let mut part = if arms.len() == 1 {
                arms.into_iter().next().unwrap()
            } else {
                RelExpr::Union { inputs: arms }
            };
            if let SubjectTerm::Const(c) = &triple.subject {
                part = RelExpr::Select {
                    input: Box::new(part),
                    predicate: RowPredicate::ColEqLit(subject_col, Literal::Str(c.clone())),
                };
            }
            let part_cols = part.output_columns().expect("slice plans are valid");
            plan = Some(match plan {
                None => {
                    have_cols = part_cols;
                    part
                }
                Some(acc) => {
                    let keys: Vec<String> = part_cols
                        .iter()
                        .filter(|c| have_cols.contains(c))
                        .cloned()
                        .collect();
                    for c in part_cols {
                        if !have_cols.contains(&c) {
                            have_cols.push(c);
                        }
                    }
                    RelExpr::Join { left: Box::new(acc), right: Box::new(part), keys }
                }
            });
        }
    }

    let input = plan.expect("having clause has at least one state pattern");
    let plan = RelExpr::Correlate {
        input: Box::new(input),
        quantifier: h.quantifier,
        index_var: h.index_var.clone(),
        group: h.group.clone(),
        condition: h.condition.clone(),
    };
    debug_assert!(plan.validate(true).is_ok(), "streaming unfolding built an ill-typed plan");
    Ok(plan)
}

fn slice_arms(
    triple: &TripleSpec,
    offset: i64,
    h: &HavingNormal,
    m: &MappingSet,
    sources: &[StreamSourceSpec],
    fresh: &mut usize,
) -> Result<(Vec<RelExpr>, String), UnfoldError> {
    let mut arms = Vec::new();
    // Keep column layout identical across arms so a union is well-typed:
    // constant subjects get one shared internal column per triple.
    let subject_col = match &triple.subject {
        SubjectTerm::Var(v) => v.clone(),
        SubjectTerm::Const(_) => {
            let c = format!("_subj{}", *fresh);
            *fresh += 1;
            c
        }
    };
    for schema in &m.streaming {
        if schema.predicate != triple.predicate {
            continue;
        }
        let Some(source) = sources.iter().find(|s| s.name == schema.stream) else {
            continue;
        };
        arms.push(RelExpr::Slice {
            stream: source.name.clone(),
            bindings: alloc::vec![
                (subject_col.clone(), schema.subject_field.clone()),
                (triple.value_var.clone(), schema.value_field.clone()),
            ],
            index: IndexTerm { var: h.index_var.clone(), offset },
            range_ms: source.range_ms,
            slide_ms: source.slide_ms,
            strategy: h.strategy.clone(),
            set_back_ms: source.set_back_ms,
        });
    }
    if arms.is_empty() {
        return Err(UnfoldError::NoStreamMapping { predicate: triple.predicate.clone() });
    }
    Ok((arms, subject_col))
}

/// Parses a mapping file: one mapping per line, `#` comments.
///
/// ```text
/// map concept Reliable(x) <- scan(reliable_sensors; x=sid)
/// map role locatedIn(x,y) <- scan(locations; x=obj, y=site)
/// map attr testScore(x,y) <- scan(scores; x=sid, y=score)
/// map stream hasValue(?s,?v) <- slice(sensorMeasurements; s=sensor_id, v=value)
/// ```
pub fn parse_mappings(input: &str) -> Result<MappingSet, MappingParseError> {
    let mut set = MappingSet::default();
    for (idx, raw) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let rest = line
            .strip_prefix("map ")
            .ok_or_else(|| MappingParseError::new(line_no, "expected `map ...`"))?;
        let (kind_word, rest) = rest
            .split_once(' ')
            .ok_or_else(|| MappingParseError::new(line_no, "expected mapping kind"))?;
        let (head, body) = rest
            .split_once("<-")
            .ok_or_else(|| MappingParseError::new(line_no, "expected `<-`"))?;
        let (pred, head_vars) = parse_head(head.trim(), line_no)?;
        match kind_word {
            "concept" | "role" | "attr" => {
                let kind = match kind_word {
                    "concept" => PredicateKind::Concept,
                    "role" => PredicateKind::Role,
                    _ => PredicateKind::Attribute,
                };
                let expected_arity = if kind == PredicateKind::Concept { 1 } else { 2 };
                if head_vars.len() != expected_arity {
                    return Err(MappingParseError::new(
                        line_no,
                        format!("{kind_word} mapping head must have {expected_arity} variable(s)"),
                    ));
                }
                let (table, bindings) = parse_body(body.trim(), "scan", line_no)?;
                for hv in &head_vars {
                    if !bindings.iter().any(|(v, _)| v == hv) {
                        return Err(MappingParseError::new(
                            line_no,
                            format!("head variable `{hv}` not bound by the body"),
                        ));
                    }
                }
                let scan_bindings: Vec<(String, String)> =
                    head_vars.iter().map(|hv| {
                        let (_, col) = bindings.iter().find(|(v, _)| v == hv).unwrap();
                        (hv.clone(), col.clone())
                    }).collect();
                set.classical.push(ClassicalMapping {
                    kind,
                    predicate: pred,
                    head_vars,
                    body: RelExpr::scan(table, scan_bindings),
                });
            }
            "stream" => {
                if head_vars.len() != 2 {
                    return Err(MappingParseError::new(
                        line_no,
                        "stream mapping head must have two variables",
                    ));
                }
                let (stream, bindings) = parse_body(body.trim(), "slice", line_no)?;
                let field_for = |hv: &str| -> Result<String, MappingParseError> {
                    bindings
                        .iter()
                        .find(|(v, _)| v == hv)
                        .map(|(_, c)| c.clone())
                        .ok_or_else(|| {
                            MappingParseError::new(
                                line_no,
                                format!("head variable `{hv}` not bound by the body"),
                            )
                        })
                };
                set.streaming.push(StreamMappingSchema {
                    predicate: pred,
                    stream,
                    subject_field: field_for(&head_vars[0])?,
                    value_field: field_for(&head_vars[1])?,
                });
            }
            other => {
                return Err(MappingParseError::new(
                    line_no,
                    format!("unknown mapping kind `{other}`"),
                ));
            }
        }
    }
    Ok(set)
}

fn parse_head(head: &str, line: usize) -> Result<(String, Vec<String>), MappingParseError> {
    let open = head
        .find('(')
        .ok_or_else(|| MappingParseError::new(line, "mapping head needs `(`"))?;
    let close = head
        .rfind(')')
        .ok_or_else(|| MappingParseError::new(line, "mapping head needs `)`"))?;
    let pred = head[..open].trim().to_string();
    if pred.is_empty() {
        return Err(MappingParseError::new(line, "empty predicate name"));
    }
    let vars: Vec<String> = head[open + 1..close]
        .split(',')
        .map(|v| v.trim().trim_start_matches('?').to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if vars.is_empty() {
        return Err(MappingParseError::new(line, "mapping head has no variables"));
    }
    Ok((pred, vars))
}

fn parse_body(
    body: &str,
    keyword: &str,
    line: usize,
) -> Result<(String, Vec<(String, String)>), MappingParseError> {
    let rest = body
        .strip_prefix(keyword)
        .ok_or_else(|| MappingParseError::new(line, format!("expected `{keyword}(...)` body")))?
        .trim();
    let inner = rest
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| MappingParseError::new(line, "malformed body parentheses"))?;
    let (table, binds) = inner
        .split_once(';')
        .ok_or_else(|| MappingParseError::new(line, "body needs `table; var=col` bindings"))?;
    let table = table.trim().to_string();
    if table.is_empty() {
        return Err(MappingParseError::new(line, "empty table name"));
    }
    let mut bindings = Vec::new();
    for part in binds.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (var, col) = part
            .split_once('=')
            .ok_or_else(|| MappingParseError::new(line, format!("binding `{part}` needs `var=col`")))?;
        bindings.push((
            var.trim().trim_start_matches('?').to_string(),
            col.trim().to_string(),
        ));
    }
    if bindings.is_empty() {
        return Err(MappingParseError::new(line, "body has no bindings"));
    }
    Ok((table, bindings))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingParseError {
    pub line: usize,
    pub message: String,
}

impl MappingParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        MappingParseError { line, message: message.into() }
    }
}

impl core::fmt::Display for MappingParseError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MappingParseError {}
