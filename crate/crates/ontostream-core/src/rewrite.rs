//! Conjunctive-query rewriting: folds the ontology axioms into the query so
//! that evaluating the resulting union over the raw data yields certain
//! answers.
//!
//! The algorithm is the classic backward-chaining saturation for DL-Lite
//! (atom rewriting through inclusions plus a unification "reduce" step),
//! extended with one rule for aggregate axioms: `E sub B` lets a `B(x)`
//! atom rewrite to the aggregate atom `E(x)`. Aggregate atoms themselves
//! are terminal: they behave like closed predicates and are only unfolded
//! later, never rewritten further.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::ontology::{Axiom, BasicConcept, ExtendedConcept, Ontology, Role};
use crate::query::{Atom, ConjunctiveQuery, Term, UnionOfCqs};

/// The predicate names a query may mention, gathered from the ontology and
/// the mapping set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub concepts: BTreeSet<String>,
    pub roles: BTreeSet<String>,
    pub attributes: BTreeSet<String>,
}

impl Vocabulary {
    pub fn from_ontology(o: &Ontology) -> Self {
        Vocabulary {
            concepts: o.concept_names(),
            roles: o.role_names(),
            attributes: o.attribute_names(),
        }
    }

    pub fn merge(&mut self, other: &Vocabulary) {
        self.concepts.extend(other.concepts.iter().cloned());
        self.roles.extend(other.roles.iter().cloned());
        self.attributes.extend(other.attributes.iter().cloned());
    }

    fn check_atom(&self, atom: &Atom) -> Result<(), RewriteError> {
        let known = match atom {
            Atom::Concept { name, .. } => self.concepts.contains(name),
            Atom::Aggregate { concept, .. } => self.attributes.contains(&concept.attribute),
            Atom::Role { name, .. } => self.roles.contains(name),
            Atom::Attribute { name, .. } => self.attributes.contains(name),
        };
        if known {
            Ok(())
        } else {
            Err(RewriteError::UnknownPredicate { name: atom.predicate_name().to_string() })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RewriteError {
    UnknownPredicate { name: String },
    UnknownAttribute { name: String },
}

impl core::fmt::Display for RewriteError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RewriteError::UnknownPredicate { name } => {
                write!(f, "query mentions unknown predicate `{name}`")
            }
            RewriteError::UnknownAttribute { name } => {
                write!(f, "unknown attribute `{name}`")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RewriteError {}

/// Rewrites `q` against the ontology into a union of conjunctive queries.
/// `vocab` is the set of predicates known to the ontology or the mappings;
/// atoms outside it are rejected.
pub fn rewrite(
    q: &ConjunctiveQuery,
    o: &Ontology,
    vocab: &Vocabulary,
) -> Result<UnionOfCqs, RewriteError> {
    for atom in &q.atoms {
        vocab.check_atom(atom)?;
    }

    let mut fresh = FreshVars::scan(q);
    let mut seen: BTreeSet<ConjunctiveQuery> = BTreeSet::new();
    let mut out: Vec<ConjunctiveQuery> = Vec::new();
    let mut frontier: Vec<ConjunctiveQuery> = Vec::new();

    seen.insert(q.canonicalize());
    out.push(q.clone());
    frontier.push(q.clone());

    while let Some(cq) = frontier.pop() {
        for idx in 0..cq.atoms.len() {
            for ax in &o.axioms {
                if let Some(new_atom) = apply_axiom(ax, &cq.atoms[idx], &cq, &mut fresh) {
                    let mut next = cq.clone();
                    next.atoms[idx] = new_atom;
                    next.atoms.dedup();
                    push_new(next, &mut seen, &mut out, &mut frontier);
                }
            }
        }
        for i in 0..cq.atoms.len() {
            for j in (i + 1)..cq.atoms.len() {
                if let Some(reduced) = reduce(&cq, i, j) {
                    push_new(reduced, &mut seen, &mut out, &mut frontier);
                }
            }
        }
    }
    Ok(UnionOfCqs::new(out))
}

/// All attributes `F'` with `o ⊨ F' subattr f` (reflexive-transitive), as a
/// union of binary atoms `F'(x,y)`.
pub fn rewrite_attribute(
    f: &str,
    o: &Ontology,
    vocab: &Vocabulary,
) -> Result<UnionOfCqs, RewriteError> {
    if !vocab.attributes.contains(f) {
        return Err(RewriteError::UnknownAttribute { name: f.to_string() });
    }
    let q = ConjunctiveQuery::new(
        alloc::vec!["x".into(), "y".into()],
        alloc::vec![Atom::Attribute {
            name: f.to_string(),
            subject: Term::var("x"),
            value: Term::var("y"),
        }],
    );
    rewrite(&q, o, vocab)
}

fn push_new(
    cq: ConjunctiveQuery,
    seen: &mut BTreeSet<ConjunctiveQuery>,
    out: &mut Vec<ConjunctiveQuery>,
    frontier: &mut Vec<ConjunctiveQuery>,
) {
    if seen.insert(cq.canonicalize()) {
        out.push(cq.clone());
        frontier.push(cq);
    }
}

/// Fresh non-answer variables for existential witnesses.
struct FreshVars {
    counter: usize,
}

impl FreshVars {
    fn scan(q: &ConjunctiveQuery) -> Self {
        let mut counter = 0;
        for v in q.body_variables() {
            if let Some(n) = v.strip_prefix("_v").and_then(|s| s.parse::<usize>().ok()) {
                counter = counter.max(n + 1);
            }
        }
        FreshVars { counter }
    }

    fn next(&mut self) -> Term {
        let v = alloc::format!("_v{}", self.counter);
        self.counter += 1;
        Term::Var(v)
    }
}

/// A term is unbound when it is a variable with a single occurrence across
/// the head and body, the "anonymous variable" of the rewriting algorithm.
fn is_unbound(term: &Term, cq: &ConjunctiveQuery) -> bool {
    match term {
        Term::Var(v) => !cq.head.iter().any(|h| h == v) && cq.occurrences(v) == 1,
        _ => false,
    }
}

/// The atom a left-hand side concept contributes when rewriting backward
/// through an inclusion whose right side matched.
fn atom_of_extended(c: &ExtendedConcept, subject: Term, fresh: &mut FreshVars) -> Atom {
    match c {
        ExtendedConcept::Atomic(a) => Atom::Concept { name: a.clone(), arg: subject },
        ExtendedConcept::ExistsRole(r) => role_atom(r, subject, fresh.next()),
        ExtendedConcept::ExistsAttribute(f) => Atom::Attribute {
            name: f.clone(),
            subject,
            value: fresh.next(),
        },
    }
}

/// `role_atom(R, s, o)` renders `R(s, o)` with inverse normalization: an
/// inverted role swaps the arguments of its base predicate.
fn role_atom(r: &Role, subject: Term, object: Term) -> Atom {
    if r.inverted {
        Atom::Role { name: r.base.clone(), subject: object, object: subject }
    } else {
        Atom::Role { name: r.base.clone(), subject, object }
    }
}

fn apply_axiom(
    ax: &Axiom,
    atom: &Atom,
    cq: &ConjunctiveQuery,
    fresh: &mut FreshVars,
) -> Option<Atom> {
    match (ax, atom) {
        // B(x) via C sub B with atomic B.
        (Axiom::ConceptInclusion(lhs, BasicConcept::Atomic(b)), Atom::Concept { name, arg })
            if b == name =>
        {
            Some(atom_of_extended(lhs, arg.clone(), fresh))
        }
        // B(x) via E sub B: rewrite into the (terminal) aggregate atom.
        (Axiom::AggregateInclusion(e, BasicConcept::Atomic(b)), Atom::Concept { name, arg })
            if b == name =>
        {
            Some(Atom::Aggregate { concept: e.clone(), arg: arg.clone() })
        }
        // P(x,y) via C sub exists R when the non-witnessed side is unbound.
        (Axiom::ConceptInclusion(lhs, BasicConcept::ExistsRole(r)), Atom::Role { name, subject, object })
            if r.base == *name =>
        {
            if !r.inverted && is_unbound(object, cq) {
                Some(atom_of_extended(lhs, subject.clone(), fresh))
            } else if r.inverted && is_unbound(subject, cq) {
                Some(atom_of_extended(lhs, object.clone(), fresh))
            } else {
                None
            }
        }
        // P(x,y) via R1 subrole R2 where R2's base is P.
        (Axiom::RoleInclusion(sub, sup), Atom::Role { name, subject, object })
            if sup.base == *name =>
        {
            let (s, o) = if sup.inverted {
                (object.clone(), subject.clone())
            } else {
                (subject.clone(), object.clone())
            };
            Some(role_atom(sub, s, o))
        }
        // F(x,y) via F1 subattr F2.
        (Axiom::AttributeInclusion(sub, sup), Atom::Attribute { name, subject, value })
            if sup == name =>
        {
            Some(Atom::Attribute {
                name: sub.clone(),
                subject: subject.clone(),
                value: value.clone(),
            })
        }
        _ => None,
    }
}

/// Unifies atoms `i` and `j` when possible and applies the unifier to the
/// whole query. Sound for any unifier (the result is a more specific
/// query); needed for completeness when an atom with an anonymous witness
/// variable can be merged into another atom, which may unblock further
/// rewriting steps.
fn reduce(cq: &ConjunctiveQuery, i: usize, j: usize) -> Option<ConjunctiveQuery> {
    let pairs: Vec<(Term, Term)> = match (&cq.atoms[i], &cq.atoms[j]) {
        (Atom::Concept { name: n1, arg: a1 }, Atom::Concept { name: n2, arg: a2 }) if n1 == n2 => {
            alloc::vec![(a1.clone(), a2.clone())]
        }
        (Atom::Aggregate { concept: c1, arg: a1 }, Atom::Aggregate { concept: c2, arg: a2 })
            if c1 == c2 =>
        {
            alloc::vec![(a1.clone(), a2.clone())]
        }
        (
            Atom::Role { name: n1, subject: s1, object: o1 },
            Atom::Role { name: n2, subject: s2, object: o2 },
        ) if n1 == n2 => alloc::vec![(s1.clone(), s2.clone()), (o1.clone(), o2.clone())],
        (
            Atom::Attribute { name: n1, subject: s1, value: v1 },
            Atom::Attribute { name: n2, subject: s2, value: v2 },
        ) if n1 == n2 => alloc::vec![(s1.clone(), s2.clone()), (v1.clone(), v2.clone())],
        _ => return None,
    };

    let mut subst: BTreeMap<String, Term> = BTreeMap::new();
    for (a, b) in pairs {
        let a = resolve(&a, &subst);
        let b = resolve(&b, &subst);
        if a == b {
            continue;
        }
        match (&a, &b) {
            (Term::Var(v), other) if !is_representative_preferred(&a, other, cq) => {
                subst.insert(v.clone(), other.clone());
            }
            (other, Term::Var(v)) if !is_representative_preferred(&b, other, cq) => {
                subst.insert(v.clone(), other.clone());
            }
            (Term::Var(v), other) => {
                subst.insert(v.clone(), other.clone());
            }
            (other, Term::Var(v)) => {
                subst.insert(v.clone(), other.clone());
            }
            _ => return None, // two distinct constants
        }
    }
    if subst.is_empty() {
        // Identical atoms: just drop the duplicate.
        let mut atoms = cq.atoms.clone();
        atoms.remove(j);
        return Some(ConjunctiveQuery::new(cq.head.clone(), atoms));
    }

    let mut atoms: Vec<Atom> = cq
        .atoms
        .iter()
        .map(|atom| {
            let mut atom = atom.clone();
            for t in atom.terms_mut() {
                *t = resolve(t, &subst);
            }
            atom
        })
        .collect();
    atoms.sort();
    atoms.dedup();
    // Head variables must survive the unification; a head variable unified
    // into a constant would change the head signature.
    let head_ok = cq.head.iter().all(|h| match subst.get(h) {
        None => true,
        Some(Term::Var(_)) => false, // renamed away: skip this reduction
        Some(_) => false,
    });
    if !head_ok {
        return None;
    }
    Some(ConjunctiveQuery::new(cq.head.clone(), atoms))
}

fn resolve(term: &Term, subst: &BTreeMap<String, Term>) -> Term {
    let mut current = term.clone();
    let mut guard = 0;
    while let Term::Var(v) = &current {
        match subst.get(v) {
            Some(next) => {
                current = next.clone();
                guard += 1;
                if guard > subst.len() {
                    break;
                }
            }
            None => break,
        }
    }
    current
}

/// Prefer constants and head variables as unification representatives.
fn is_representative_preferred(candidate: &Term, _other: &Term, cq: &ConjunctiveQuery) -> bool {
    match candidate {
        Term::Var(v) => cq.head.iter().any(|h| h == v),
        _ => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::parse_ontology;

    fn vocab_with(concepts: &[&str], roles: &[&str], attrs: &[&str]) -> Vocabulary {
        Vocabulary {
            concepts: concepts.iter().map(|s| s.to_string()).collect(),
            roles: roles.iter().map(|s| s.to_string()).collect(),
            attributes: attrs.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn concept_query(name: &str) -> ConjunctiveQuery {
        ConjunctiveQuery::new(
            alloc::vec!["x".into()],
            alloc::vec![Atom::Concept { name: name.into(), arg: Term::var("x") }],
        )
    }

    #[test]
    fn reliable_rewrites_to_two_disjuncts() {
        let o = parse_ontology(
            "precisionScore subattr testScore\nagg:min testScore >= 0.9 sub Reliable\n",
        )
        .unwrap();
        let vocab = Vocabulary::from_ontology(&o);
        let u = rewrite(&concept_query("Reliable"), &o, &vocab).unwrap();
        assert_eq!(u.disjuncts.len(), 2);
        assert_eq!(alloc::format!("{}", u.disjuncts[0]), "q(x) :- Reliable(x)");
        assert_eq!(
            alloc::format!("{}", u.disjuncts[1]),
            "q(x) :- agg:min testScore >= 0.9(x)"
        );
    }

    #[test]
    fn identity_on_empty_ontology() {
        let o = Ontology::default();
        let vocab = vocab_with(&["A"], &[], &[]);
        let u = rewrite(&concept_query("A"), &o, &vocab).unwrap();
        assert_eq!(u.disjuncts.len(), 1);
        assert_eq!(u.disjuncts[0], concept_query("A"));
    }

    #[test]
    fn unknown_predicate_is_an_error() {
        let o = Ontology::default();
        let vocab = vocab_with(&["A"], &[], &[]);
        let err = rewrite(&concept_query("B"), &o, &vocab).unwrap_err();
        assert_eq!(err, RewriteError::UnknownPredicate { name: "B".into() });
    }

    #[test]
    fn concept_and_existential_steps() {
        let o = parse_ontology("A sub B\nexists R sub B\n").unwrap();
        let vocab = Vocabulary::from_ontology(&o);
        let u = rewrite(&concept_query("B"), &o, &vocab).unwrap();
        // B(x) ∨ A(x) ∨ R(x,_)
        assert_eq!(u.disjuncts.len(), 3);
        let rendered: Vec<String> = u
            .disjuncts
            .iter()
            .map(|d| alloc::format!("{}", d.canonicalize()))
            .collect();
        assert!(rendered.contains(&"q(_h0) :- B(_h0)".to_string()));
        assert!(rendered.contains(&"q(_h0) :- A(_h0)".to_string()));
        assert!(rendered.contains(&"q(_h0) :- R(_h0,_e0)".to_string()));
    }

    #[test]
    fn existential_step_requires_unbound_object() {
        let o = parse_ontology("A sub exists R\n").unwrap();
        let vocab = vocab_with(&["A", "C"], &["R"], &[]);
        // q(x) :- R(x,y), C(y): y is bound, so no rewriting into A(x).
        let q = ConjunctiveQuery::new(
            alloc::vec!["x".into()],
            alloc::vec![
                Atom::Role { name: "R".into(), subject: Term::var("x"), object: Term::var("y") },
                Atom::Concept { name: "C".into(), arg: Term::var("y") },
            ],
        );
        let u = rewrite(&q, &o, &vocab).unwrap();
        assert_eq!(u.disjuncts.len(), 1);

        // q(x) :- R(x,y) alone: y unbound, A(x) appears.
        let q2 = ConjunctiveQuery::new(
            alloc::vec!["x".into()],
            alloc::vec![Atom::Role {
                name: "R".into(),
                subject: Term::var("x"),
                object: Term::var("y"),
            }],
        );
        let u2 = rewrite(&q2, &o, &vocab).unwrap();
        let rendered: Vec<String> =
            u2.disjuncts.iter().map(|d| alloc::format!("{}", d.canonicalize())).collect();
        assert!(rendered.contains(&"q(_h0) :- A(_h0)".to_string()));
    }

    #[test]
    fn reduce_unblocks_existential_step() {
        // Classic case: q(x) :- R(x,y), R(x,z), A(z). Unifying the two
        // R-atoms makes y/z shared, and A(z) then blocks nothing; the
        // reduced q(x) :- R(x,y), A(y) still has y bound. With C sub
        // exists R alone no step fires on the original; after reducing
        // R(x,y) with R(x,z) where z occurs in A... the full expansion is
        // exercised by the oracle-equivalence property; here we just check
        // reduction output exists and stays safe.
        let q = ConjunctiveQuery::new(
            alloc::vec!["x".into()],
            alloc::vec![
                Atom::Role { name: "R".into(), subject: Term::var("x"), object: Term::var("y") },
                Atom::Role { name: "R".into(), subject: Term::var("x"), object: Term::var("z") },
            ],
        );
        let reduced = reduce(&q, 0, 1).unwrap();
        assert_eq!(reduced.atoms.len(), 1);
        assert!(reduced.is_safe());
    }

    #[test]
    fn attribute_closure_is_reflexive_transitive() {
        let o = parse_ontology("F1 subattr F2\nF2 subattr F3\n").unwrap();
        let vocab = Vocabulary::from_ontology(&o);
        let u = rewrite_attribute("F3", &o, &vocab).unwrap();
        let names: Vec<&str> = u
            .disjuncts
            .iter()
            .map(|d| match &d.atoms[0] {
                Atom::Attribute { name, .. } => name.as_str(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(names, ["F3", "F2", "F1"]);

        let single = rewrite_attribute("F1", &o, &vocab).unwrap();
        assert_eq!(single.disjuncts.len(), 1);
    }

    #[test]
    fn test_score_unfolds_to_both_attributes() {
        let o = parse_ontology(
            "precisionScore subattr testScore\nagg:min testScore >= 0.9 sub Reliable\n",
        )
        .unwrap();
        let vocab = Vocabulary::from_ontology(&o);
        let u = rewrite_attribute("testScore", &o, &vocab).unwrap();
        assert_eq!(u.disjuncts.len(), 2);
    }

    #[test]
    fn aggregate_atoms_are_terminal() {
        // Even with axioms that could rewrite the attribute inside the
        // aggregate, the aggregate atom must pass through whole.
        let o = parse_ontology(
            "precisionScore subattr testScore\nagg:min testScore >= 0.9 sub Reliable\n",
        )
        .unwrap();
        let vocab = Vocabulary::from_ontology(&o);
        let u = rewrite(&concept_query("Reliable"), &o, &vocab).unwrap();
        for d in &u.disjuncts {
            for atom in &d.atoms {
                if let Atom::Aggregate { concept, .. } = atom {
                    assert_eq!(concept.attribute, "testScore");
                }
            }
        }
        // And rewriting a query that is already an aggregate atom is the
        // identity.
        let e = match &u.disjuncts[1].atoms[0] {
            Atom::Aggregate { concept, .. } => concept.clone(),
            _ => panic!("expected aggregate atom"),
        };
        let q = ConjunctiveQuery::new(
            alloc::vec!["x".into()],
            alloc::vec![Atom::Aggregate { concept: e, arg: Term::var("x") }],
        );
        let u2 = rewrite(&q, &o, &vocab).unwrap();
        assert_eq!(u2.disjuncts.len(), 1);
    }
}
