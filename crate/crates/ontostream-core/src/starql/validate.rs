//! Semantic validation of parsed queries: variable-kind separation, safety
//! of the streaming condition, output boundness, and clause cross
//! references. Each rule has a stable name so callers (and the negative
//! test corpus) can match on it.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::*;

/// The rules `validate` enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    TimeVariableInOutput,
    UnsafeValueVariable,
    UnsupportedSequencingStrategy,
    UnknownSequence,
    UnboundOutputVariable,
    NonpositiveFrequency,
    NonpositiveSlide,
    MixedVariableKinds,
    UnknownFunction,
    UnquantifiedIndexVariable,
    UnknownPulse,
    DuplicateStream,
    DuplicateValueBinding,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::TimeVariableInOutput => "time-variable-in-output",
            Rule::UnsafeValueVariable => "unsafe-value-variable",
            Rule::UnsupportedSequencingStrategy => "unsupported-sequencing-strategy",
            Rule::UnknownSequence => "unknown-sequence",
            Rule::UnboundOutputVariable => "unbound-output-variable",
            Rule::NonpositiveFrequency => "nonpositive-frequency",
            Rule::NonpositiveSlide => "nonpositive-slide",
            Rule::MixedVariableKinds => "mixed-variable-kinds",
            Rule::UnknownFunction => "unknown-function",
            Rule::UnquantifiedIndexVariable => "unquantified-index-variable",
            Rule::UnknownPulse => "unknown-pulse",
            Rule::DuplicateStream => "duplicate-stream",
            Rule::DuplicateValueBinding => "duplicate-value-binding",
        }
    }
}

pub const FUNCTION_WHITELIST: &[&str] = &[
    "PearsonCorrelation",
    "cosineSimilarity",
    "avg",
    "min",
    "max",
    "sum",
    "count",
    "abs",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleViolation {
    pub rule: Rule,
    pub message: String,
}

impl core::fmt::Display for RuleViolation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}: {}", self.rule.name(), self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryValidation {
    pub violations: Vec<RuleViolation>,
}

impl QueryValidation {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, rule: Rule, message: String) {
        self.violations.push(RuleViolation { rule, message });
    }
}

/// Variables of the query, split by kind.
struct Kinds {
    index_vars: BTreeSet<String>,
    /// Value variables bound by graph triples (value position).
    graph_bound: BTreeSet<String>,
    /// Subject variables of graph triples.
    subject_vars: BTreeSet<String>,
    where_vars: BTreeSet<String>,
}

fn collect_kinds(q: &StarqlQuery) -> Kinds {
    let mut index_vars = BTreeSet::new();
    let mut graph_bound = BTreeSet::new();
    let mut subject_vars = BTreeSet::new();
    let mut where_vars = BTreeSet::new();
    for t in &q.where_triples {
        for term in [&t.subject, &t.object] {
            if let PatternTerm::Var(v) = term {
                where_vars.insert(v.clone());
            }
        }
    }
    if let Some(h) = &q.having {
        h.visit_quantifiers(&mut |expr| {
            if let HavingExpr::Quantified { index_var, graphs, .. } = expr {
                index_vars.insert(index_var.clone());
                for g in graphs {
                    for t in &g.triples {
                        if let PatternTerm::Var(v) = &t.subject {
                            subject_vars.insert(v.clone());
                        }
                        if let PatternTerm::Var(v) = &t.value {
                            graph_bound.insert(v.clone());
                        }
                    }
                }
            }
        });
    }
    Kinds { index_vars, graph_bound, subject_vars, where_vars }
}

pub fn validate(q: &StarqlQuery) -> QueryValidation {
    let mut report = QueryValidation::default();
    let kinds = collect_kinds(q);

    // Pulse checks.
    if let Some(p) = &q.pulse {
        if p.frequency_ms <= 0 {
            report.push(
                Rule::NonpositiveFrequency,
                format!("pulse `{}` has frequency {}ms", p.name, p.frequency_ms),
            );
        }
    }
    if let Some(used) = &q.using_pulse {
        if q.pulse.as_ref().map(|p| &p.name) != Some(used) {
            report.push(Rule::UnknownPulse, format!("USING PULSE references undeclared `{used}`"));
        }
    }

    // Stream sources.
    let mut seen = BTreeSet::new();
    for s in &q.stream_sources {
        if !seen.insert(&s.name) {
            report.push(Rule::DuplicateStream, format!("stream `{}` declared twice", s.name));
        }
        if let Some(sl) = s.slide_ms {
            if sl <= 0 {
                report.push(
                    Rule::NonpositiveSlide,
                    format!("stream `{}` has slide {sl}ms", s.name),
                );
            }
        }
    }

    // Sequencing.
    if let Some(seq) = &q.sequencing {
        if seq.strategy != "StandardSequencing" {
            report.push(
                Rule::UnsupportedSequencingStrategy,
                format!("unsupported strategy `{}`", seq.strategy),
            );
        }
    }

    // Output variables: bound somewhere, and never an index variable.
    for v in q.output.variables() {
        if kinds.index_vars.contains(v) {
            report.push(
                Rule::TimeVariableInOutput,
                format!("time variable `?{v}` cannot be part of the output"),
            );
        } else if !kinds.where_vars.contains(v)
            && !kinds.graph_bound.contains(v)
            && !kinds.subject_vars.contains(v)
        {
            report.push(
                Rule::UnboundOutputVariable,
                format!("output variable `?{v}` is bound by no clause"),
            );
        }
    }

    // The streaming condition tree.
    if let Some(h) = &q.having {
        h.visit_quantifiers(&mut |expr| {
            if let HavingExpr::Quantified { index_var, sequence, graphs, .. } = expr {
                if let Some(seq) = &q.sequencing {
                    if sequence != &seq.alias {
                        report.push(
                            Rule::UnknownSequence,
                            format!("quantifier ranges over unknown sequence `{sequence}`"),
                        );
                    }
                } else {
                    report.push(
                        Rule::UnknownSequence,
                        format!("quantifier ranges over `{sequence}` but no SEQUENCE BY is declared"),
                    );
                }
                for g in graphs {
                    if g.index.var != *index_var {
                        report.push(
                            Rule::UnquantifiedIndexVariable,
                            format!("GRAPH index `{}` is not the quantified variable", g.index.var),
                        );
                    }
                    for t in &g.triples {
                        if let PatternTerm::Var(v) = &t.value {
                            if kinds.index_vars.contains(v) {
                                report.push(
                                    Rule::MixedVariableKinds,
                                    format!("index variable `{v}` used in a value position"),
                                );
                            }
                        }
                    }
                }
            }
        });

        // Value variables bound at most once.
        let mut bind_counts: alloc::collections::BTreeMap<&String, usize> =
            alloc::collections::BTreeMap::new();
        h.visit_quantifiers(&mut |expr| {
            if let HavingExpr::Quantified { graphs, .. } = expr {
                for g in graphs {
                    for t in &g.triples {
                        if let PatternTerm::Var(v) = &t.value {
                            *bind_counts.entry(v).or_insert(0) += 1;
                        }
                    }
                }
            }
        });
        for (v, n) in bind_counts {
            if n > 1 {
                report.push(
                    Rule::DuplicateValueBinding,
                    format!("value variable `?{v}` is bound by {n} triples"),
                );
            }
        }

        h.visit_compares(&mut |left, right| {
            for side in [left, right] {
                let mut vars = Vec::new();
                side.collect_vars(&mut vars);
                for v in vars {
                    if kinds.index_vars.contains(v) {
                        report.push(
                            Rule::MixedVariableKinds,
                            format!("index variable `{v}` compared as a value"),
                        );
                    } else if !kinds.graph_bound.contains(v) && !kinds.subject_vars.contains(v) {
                        report.push(
                            Rule::UnsafeValueVariable,
                            format!("`?{v}` is compared but bound by no graph pattern"),
                        );
                    }
                }
                let mut calls = Vec::new();
                side.collect_calls(&mut calls);
                for c in calls {
                    if !FUNCTION_WHITELIST.contains(&c.as_str()) {
                        report.push(Rule::UnknownFunction, format!("unknown function `{c}`"));
                    }
                }
            }
        });
    }

    report
}

impl QueryValidation {
    pub fn rule_names(&self) -> Vec<&'static str> {
        let mut names: Vec<&'static str> =
            self.violations.iter().map(|v| v.rule.name()).collect();
        names.sort();
        names.dedup();
        names
    }
}
