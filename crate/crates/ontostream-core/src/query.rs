//! Conjunctive queries over the ontology vocabulary and unions thereof.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::ontology::{AggregateConcept, Individual};
use crate::rational::{format_rational, Rational};

/// A term in a query atom.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Ind(Individual),
    Val(Rational),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn ind(name: impl Into<String>) -> Term {
        Term::Ind(Individual::new(name))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }
}

impl core::fmt::Display for Term {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Ind(i) => f.write_str(i.name()),
            Term::Val(r) => f.write_str(&format_rational(r)),
        }
    }
}

/// A query atom. Inverted role atoms are normalized away by swapping the
/// arguments, so role atoms always use the base role name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Concept { name: String, arg: Term },
    Aggregate { concept: AggregateConcept, arg: Term },
    Role { name: String, subject: Term, object: Term },
    Attribute { name: String, subject: Term, value: Term },
}

impl Atom {
    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Atom::Concept { arg, .. } | Atom::Aggregate { arg, .. } => alloc::vec![arg],
            Atom::Role { subject, object, .. } => alloc::vec![subject, object],
            Atom::Attribute { subject, value, .. } => alloc::vec![subject, value],
        }
    }

    pub fn terms_mut(&mut self) -> Vec<&mut Term> {
        match self {
            Atom::Concept { arg, .. } | Atom::Aggregate { arg, .. } => alloc::vec![arg],
            Atom::Role { subject, object, .. } => alloc::vec![subject, object],
            Atom::Attribute { subject, value, .. } => alloc::vec![subject, value],
        }
    }

    /// The predicate name for vocabulary checks; aggregate atoms report
    /// their attribute.
    pub fn predicate_name(&self) -> &str {
        match self {
            Atom::Concept { name, .. } => name,
            Atom::Aggregate { concept, .. } => &concept.attribute,
            Atom::Role { name, .. } => name,
            Atom::Attribute { name, .. } => name,
        }
    }
}

impl core::fmt::Display for Atom {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Atom::Concept { name, arg } => write!(f, "{name}({arg})"),
            Atom::Aggregate { concept, arg } => write!(
                f,
                "agg:{} {} {} {}({})",
                concept.agg,
                concept.attribute,
                concept.cmp,
                format_rational(&concept.threshold),
                arg
            ),
            Atom::Role { name, subject, object } => write!(f, "{name}({subject},{object})"),
            Atom::Attribute { name, subject, value } => write!(f, "{name}({subject},{value})"),
        }
    }
}

/// `q(head) :- atoms`. Safety: every head variable occurs in some atom.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConjunctiveQuery {
    pub head: Vec<String>,
    pub atoms: Vec<Atom>,
}

impl ConjunctiveQuery {
    pub fn new(head: Vec<String>, atoms: Vec<Atom>) -> Self {
        ConjunctiveQuery { head, atoms }
    }

    pub fn is_safe(&self) -> bool {
        self.head.iter().all(|h| {
            self.atoms
                .iter()
                .any(|a| a.terms().iter().any(|t| t.as_var() == Some(h.as_str())))
        })
    }

    /// Variables occurring in the body, in first-occurrence order.
    pub fn body_variables(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for atom in &self.atoms {
            for t in atom.terms() {
                if let Term::Var(v) = t {
                    if !seen.contains(v) {
                        seen.push(v.clone());
                    }
                }
            }
        }
        seen
    }

    /// Occurrence count of a variable across head and body.
    pub fn occurrences(&self, var: &str) -> usize {
        let head = self.head.iter().filter(|h| h.as_str() == var).count();
        let body: usize = self
            .atoms
            .iter()
            .map(|a| a.terms().iter().filter(|t| t.as_var() == Some(var)).count())
            .sum();
        head + body
    }

    /// Canonical form used for syntactic dedup: head variables are renamed
    /// positionally, existential variables by first occurrence along a
    /// sorted atom order. Sorting and numbering feed each other, so the
    /// assignment is iterated to a fixpoint; unassigned variables render as
    /// a placeholder that sorts before every assigned name.
    pub fn canonicalize(&self) -> ConjunctiveQuery {
        let mut names: BTreeMap<String, String> = BTreeMap::new();
        for (i, h) in self.head.iter().enumerate() {
            names.entry(h.clone()).or_insert_with(|| alloc::format!("_h{i}"));
        }
        let render = |atom: &Atom, names: &BTreeMap<String, String>| -> Atom {
            let mut a = atom.clone();
            for t in a.terms_mut() {
                if let Term::Var(v) = t {
                    let new = names.get(v).cloned().unwrap_or_else(|| String::from("_"));
                    *t = Term::Var(new);
                }
            }
            a
        };
        let head_names = names.clone();
        // Sorting and numbering feed each other: re-number along the order
        // induced by the previous round's names until stable. This is not a
        // full graph canonization (ties broken by input order can survive),
        // which only costs an occasional missed dedup, never a wrong result.
        for _ in 0..=self.body_variables().len() {
            let mut order: Vec<usize> = (0..self.atoms.len()).collect();
            order.sort_by_key(|&i| render(&self.atoms[i], &names));
            let mut next = head_names.clone();
            let mut counter = 0usize;
            for &i in &order {
                for t in self.atoms[i].terms() {
                    if let Term::Var(v) = t {
                        if !next.contains_key(v) {
                            next.insert(v.clone(), alloc::format!("_e{counter}"));
                            counter += 1;
                        }
                    }
                }
            }
            let stable = next == names;
            names = next;
            if stable {
                break;
            }
        }
        let mut out_atoms: Vec<Atom> = self.atoms.iter().map(|a| render(a, &names)).collect();
        out_atoms.sort();
        out_atoms.dedup();
        ConjunctiveQuery {
            head: (0..self.head.len()).map(|i| alloc::format!("_h{i}")).collect(),
            atoms: out_atoms,
        }
    }
}

impl core::fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "q(")?;
        for (i, h) in self.head.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            f.write_str(h)?;
        }
        write!(f, ") :- ")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// A union of conjunctive queries sharing one head signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnionOfCqs {
    pub disjuncts: Vec<ConjunctiveQuery>,
}

impl UnionOfCqs {
    /// Builds a union, canonicalizing and deduplicating the disjuncts while
    /// keeping first-appearance order.
    pub fn new(disjuncts: Vec<ConjunctiveQuery>) -> Self {
        debug_assert!(!disjuncts.is_empty());
        let arity = disjuncts[0].head.len();
        debug_assert!(disjuncts.iter().all(|d| d.head.len() == arity));
        let mut seen = alloc::collections::BTreeSet::new();
        let mut kept = Vec::new();
        for d in disjuncts {
            let canon = d.canonicalize();
            if seen.insert(canon) {
                kept.push(d);
            }
        }
        UnionOfCqs { disjuncts: kept }
    }

    pub fn head_arity(&self) -> usize {
        self.disjuncts[0].head.len()
    }
}

impl core::fmt::Display for UnionOfCqs {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        for (i, d) in self.disjuncts.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cq(head: &[&str], atoms: Vec<Atom>) -> ConjunctiveQuery {
        ConjunctiveQuery::new(head.iter().map(|s| s.to_string()).collect(), atoms)
    }

    #[test]
    fn canonical_form_ignores_variable_names_and_order() {
        let a = cq(
            &["x"],
            alloc::vec![
                Atom::Role { name: "R".into(), subject: Term::var("x"), object: Term::var("y") },
                Atom::Concept { name: "A".into(), arg: Term::var("y") },
            ],
        );
        let b = cq(
            &["u"],
            alloc::vec![
                Atom::Concept { name: "A".into(), arg: Term::var("w") },
                Atom::Role { name: "R".into(), subject: Term::var("u"), object: Term::var("w") },
            ],
        );
        assert_eq!(a.canonicalize(), b.canonicalize());
    }

    #[test]
    fn union_dedups_isomorphic_disjuncts() {
        let a = cq(&["x"], alloc::vec![Atom::Concept { name: "A".into(), arg: Term::var("x") }]);
        let b = cq(&["z"], alloc::vec![Atom::Concept { name: "A".into(), arg: Term::var("z") }]);
        let u = UnionOfCqs::new(alloc::vec![a.clone(), b]);
        assert_eq!(u.disjuncts.len(), 1);
        assert_eq!(u.disjuncts[0], a);
    }

    #[test]
    fn safety_check() {
        let q = cq(&["x"], alloc::vec![Atom::Concept { name: "A".into(), arg: Term::var("y") }]);
        assert!(!q.is_safe());
    }
}
