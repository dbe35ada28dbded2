//! Line-oriented text formats for ontologies and datasets.
//!
//! Ontology files hold one axiom per line:
//!
//! ```text
//! # comment
//! A sub B
//! A sub exists R
//! exists R sub B
//! exists inv(R) sub B
//! exists score sub Scored      # attribute-existential, if `score` is an attribute
//! agg:min testScore >= 0.9 sub Reliable
//! R1 subrole R2
//! F1 subattr F2
//! funct R
//! funct inv(R)
//! funct attr F
//! disjoint A B
//! disjoint role R1 R2
//! disjoint attr F1 F2
//! ```
//!
//! `exists N sub B` is read as an attribute existential when `N` is used as
//! an attribute anywhere else in the file (subattr, funct attr, disjoint
//! attr, or an aggregate axiom), and as a role existential otherwise.
//!
//! Dataset files are CSV rows `kind,subject,predicate,object` with kind one
//! of `concept`, `role`, `attr`; concept rows leave the object empty and
//! attr objects are decimal rationals.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::model::{
    AggFn, AggregateConcept, Axiom, BasicConcept, Cmp, Dataset, ExtendedConcept, Ontology, Role,
};
use crate::rational::parse_rational;

/// A parse failure with the 1-based line it occurred on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextError {
    pub line: usize,
    pub message: String,
}

impl TextError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        TextError { line, message: message.into() }
    }
}

impl core::fmt::Display for TextError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TextError {}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

/// Parses `R` or `inv(R)`.
fn parse_role_token(tok: &str, line: usize) -> Result<Role, TextError> {
    if let Some(inner) = tok.strip_prefix("inv(").and_then(|s| s.strip_suffix(')')) {
        if inner.is_empty() {
            return Err(TextError::new(line, "empty role name in inv()"));
        }
        Ok(Role::inverse_of(inner))
    } else if tok.is_empty() {
        Err(TextError::new(line, "empty role name"))
    } else {
        Ok(Role::named(tok))
    }
}

/// Parses a right-hand side: `B`, `exists R`, or `exists inv(R)`.
fn parse_basic(tokens: &[&str], line: usize) -> Result<BasicConcept, TextError> {
    match tokens {
        [name] => Ok(BasicConcept::Atomic((*name).to_string())),
        ["exists", role] => Ok(BasicConcept::ExistsRole(parse_role_token(role, line)?)),
        _ => Err(TextError::new(
            line,
            format!("expected a concept or `exists R`, got `{}`", tokens.join(" ")),
        )),
    }
}

/// Names used in attribute position anywhere in the file; used to decide
/// whether `exists N` is a role or an attribute existential.
fn collect_attribute_names(lines: &[(usize, Vec<String>)]) -> BTreeSet<String> {
    let mut attrs = BTreeSet::new();
    for (_, toks) in lines {
        let toks: Vec<&str> = toks.iter().map(|s| s.as_str()).collect();
        match toks.as_slice() {
            [f1, "subattr", f2] => {
                attrs.insert((*f1).to_string());
                attrs.insert((*f2).to_string());
            }
            ["funct", "attr", f] => {
                attrs.insert((*f).to_string());
            }
            ["disjoint", "attr", f1, f2] => {
                attrs.insert((*f1).to_string());
                attrs.insert((*f2).to_string());
            }
            [agg, f, ..] if agg.starts_with("agg:") => {
                attrs.insert((*f).to_string());
            }
            _ => {}
        }
    }
    attrs
}

/// Parses an ontology file. Load-time validation (the functionality
/// restrictions) is the caller's job via `validate_ontology`.
pub fn parse_ontology(input: &str) -> Result<Ontology, TextError> {
    let mut lines = Vec::new();
    for (idx, raw) in input.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<String> = line.split_whitespace().map(|s| s.to_string()).collect();
        lines.push((idx + 1, toks));
    }
    let attr_names = collect_attribute_names(&lines);

    let mut axioms = Vec::new();
    for (line_no, toks) in &lines {
        let line = *line_no;
        let toks: Vec<&str> = toks.iter().map(|s| s.as_str()).collect();
        let axiom = match toks.as_slice() {
            [f1, "subattr", f2] => {
                Axiom::AttributeInclusion((*f1).to_string(), (*f2).to_string())
            }
            [r1, "subrole", r2] => {
                Axiom::RoleInclusion(parse_role_token(r1, line)?, parse_role_token(r2, line)?)
            }
            ["funct", "attr", f] => Axiom::FunctAttribute((*f).to_string()),
            ["funct", r] => Axiom::FunctRole(parse_role_token(r, line)?),
            ["disjoint", "role", r1, r2] => {
                Axiom::RoleDisjoint(parse_role_token(r1, line)?, parse_role_token(r2, line)?)
            }
            ["disjoint", "attr", f1, f2] => {
                Axiom::AttributeDisjoint((*f1).to_string(), (*f2).to_string())
            }
            ["disjoint", rest @ ..] => {
                // Two basic concepts; each is one token or `exists R`.
                let (b1, rest2) = take_basic(rest, line)?;
                let (b2, tail) = take_basic(rest2, line)?;
                if !tail.is_empty() {
                    return Err(TextError::new(line, "trailing tokens after disjoint axiom"));
                }
                Axiom::ConceptDisjoint(b1, b2)
            }
            _ => {
                // Inclusion forms: `<lhs> sub <rhs>`.
                let sub_pos = toks
                    .iter()
                    .position(|t| *t == "sub")
                    .ok_or_else(|| TextError::new(line, format!("unrecognized axiom `{}`", toks.join(" "))))?;
                let (lhs, rhs) = (&toks[..sub_pos], &toks[sub_pos + 1..]);
                let rhs = parse_basic(rhs, line)?;
                match lhs {
                    [name] if name.starts_with("agg:") => {
                        return Err(TextError::new(line, "aggregate axiom missing attribute/comparison"));
                    }
                    [name] => Axiom::ConceptInclusion(ExtendedConcept::Atomic((*name).to_string()), rhs),
                    ["exists", name] => {
                        if attr_names.contains(*name) {
                            Axiom::ConceptInclusion(
                                ExtendedConcept::ExistsAttribute((*name).to_string()),
                                rhs,
                            )
                        } else {
                            Axiom::ConceptInclusion(
                                ExtendedConcept::ExistsRole(parse_role_token(name, line)?),
                                rhs,
                            )
                        }
                    }
                    [agg, f, cmp, threshold] if agg.starts_with("agg:") => {
                        let agg_fn = AggFn::parse(&agg[4..]).ok_or_else(|| {
                            TextError::new(line, format!("unknown aggregate function `{}`", &agg[4..]))
                        })?;
                        let cmp = Cmp::parse(cmp).ok_or_else(|| {
                            TextError::new(line, format!("unknown comparison `{cmp}`"))
                        })?;
                        let threshold = parse_rational(threshold)
                            .map_err(|e| TextError::new(line, e.to_string()))?;
                        Axiom::AggregateInclusion(
                            AggregateConcept { agg: agg_fn, cmp, threshold, attribute: (*f).to_string() },
                            rhs,
                        )
                    }
                    _ => {
                        return Err(TextError::new(
                            line,
                            format!("unrecognized left-hand side `{}`", lhs.join(" ")),
                        ))
                    }
                }
            }
        };
        axioms.push(axiom);
    }
    Ok(Ontology::new(axioms))
}

fn take_basic<'a>(
    tokens: &'a [&'a str],
    line: usize,
) -> Result<(BasicConcept, &'a [&'a str]), TextError> {
    match tokens {
        ["exists", role, rest @ ..] => Ok((
            BasicConcept::ExistsRole(parse_role_token(role, line)?),
            rest,
        )),
        [name, rest @ ..] => Ok((BasicConcept::Atomic((*name).to_string()), rest)),
        [] => Err(TextError::new(line, "expected a concept")),
    }
}

/// Parses a dataset CSV (`kind,subject,predicate,object`).
pub fn parse_dataset(input: &str) -> Result<Dataset, TextError> {
    let mut d = Dataset::new();
    for (idx, raw) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
        if fields.len() < 3 {
            return Err(TextError::new(line_no, "expected kind,subject,predicate,object"));
        }
        let object = fields.get(3).copied().unwrap_or("");
        match fields[0] {
            "kind" => continue, // header row
            "concept" => {
                if fields[1].is_empty() || fields[2].is_empty() {
                    return Err(TextError::new(line_no, "concept row needs subject and predicate"));
                }
                d.assert_concept(fields[2], fields[1]);
            }
            "role" => {
                if object.is_empty() {
                    return Err(TextError::new(line_no, "role row needs an object individual"));
                }
                d.assert_role(fields[2], fields[1], object);
            }
            "attr" => {
                let v = parse_rational(object)
                    .map_err(|e| TextError::new(line_no, e.to_string()))?;
                d.assert_attribute(fields[2], fields[1], v);
            }
            other => {
                return Err(TextError::new(line_no, format!("unknown assertion kind `{other}`")));
            }
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::model::validate_ontology;

    const EQ1: &str = "\
# reliability of sensors
precisionScore subattr testScore
agg:min testScore >= 0.9 sub Reliable
";

    const EXAMPLE_DATA: &str = "\
kind,subject,predicate,object
attr,s1,precisionScore,0.9
attr,s2,testScore,0.95
attr,s3,testScore,0.5
";

    #[test]
    fn parses_the_example_ontology() {
        let o = parse_ontology(EQ1).unwrap();
        assert_eq!(o.axioms.len(), 2);
        assert!(validate_ontology(&o).is_valid());
        assert!(matches!(&o.axioms[1], Axiom::AggregateInclusion(e, BasicConcept::Atomic(b))
            if e.agg == AggFn::Min && e.attribute == "testScore" && b == "Reliable"));
    }

    #[test]
    fn parses_every_axiom_form() {
        let src = "\
A sub B
A sub exists R
exists R sub B
exists inv(R) sub B
score subattr testScore
exists score sub Scored
R1 subrole R2
funct R
funct inv(R)
funct attr F
disjoint A B
disjoint exists R B
disjoint role R1 R2
disjoint attr F1 F2
";
        let o = parse_ontology(src).unwrap();
        assert_eq!(o.axioms.len(), 14);
        assert!(matches!(
            &o.axioms[5],
            Axiom::ConceptInclusion(ExtendedConcept::ExistsAttribute(f), _) if f == "score"
        ));
        assert!(matches!(
            &o.axioms[2],
            Axiom::ConceptInclusion(ExtendedConcept::ExistsRole(_), _)
        ));
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_ontology("A sub B\nnonsense here\n").unwrap_err();
        assert_eq!(err.line, 2);
        let err = parse_ontology("agg:median F >= 1 sub B").unwrap_err();
        assert!(err.message.contains("median"));
    }

    #[test]
    fn parses_dataset_rows() {
        let d = parse_dataset(EXAMPLE_DATA).unwrap();
        assert_eq!(d.attributes.len(), 3);
        assert_eq!(d.concepts.len(), 0);
        let err = parse_dataset("attr,s1,f,not-a-number").unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn duplicate_assertions_collapse() {
        let d = parse_dataset("concept,a,A,\nconcept,a,A,\n").unwrap();
        assert_eq!(d.concepts.len(), 1);
    }
}
