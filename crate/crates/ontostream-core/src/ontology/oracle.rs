//! Brute-force certain-answer computation, used as ground truth by the
//! test suites.
//!
//! The oracle materializes a bounded chase of the dataset: the named
//! closure first, then labeled nulls for existential heads up to a depth
//! bound. Aggregate atoms are closed predicates whose extension is fixed
//! by the closed attribute relation; so queries are evaluated
//! homomorphically over the chase with aggregate atoms replaced by
//! membership in that precomputed extension, and only null-free tuples are
//! answers.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::aggregate::eval_aggregate_over_closed_attributes;
use super::closure::{check_satisfiability, deductive_closure, SatReport};
use super::model::{
    AggregateConcept, Axiom, BasicConcept, Dataset, ExtendedConcept, Individual, Ontology, Role,
};
use crate::query::{Atom, ConjunctiveQuery, Term, UnionOfCqs};
use crate::rational::{format_rational, Rational};

/// A node of the chased instance: a named individual or a labeled null.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Node {
    Named(Individual),
    Null(u32),
}

impl core::fmt::Display for Node {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Node::Named(i) => f.write_str(i.name()),
            Node::Null(n) => write!(f, "_:n{n}"),
        }
    }
}

/// A ground answer component.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Constant {
    Ind(Individual),
    Val(Rational),
}

impl core::fmt::Display for Constant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Constant::Ind(i) => f.write_str(i.name()),
            Constant::Val(v) => f.write_str(&format_rational(v)),
        }
    }
}

/// The materialized, possibly depth-truncated chase.
#[derive(Debug, Clone, Default)]
pub struct ChaseInstance {
    pub concepts: BTreeSet<(String, Node)>,
    pub roles: BTreeSet<(String, Node, Node)>,
    /// Attribute rows never involve nulls: attributes cannot appear in
    /// existential heads.
    pub attributes: BTreeSet<(String, Individual, Rational)>,
    depths: BTreeMap<u32, u32>,
    next_null: u32,
    /// True when the depth bound suppressed at least one rule application.
    pub exhausted: bool,
}

impl ChaseInstance {
    /// Lifts a plain dataset (no nulls, no saturation).
    pub fn from_dataset(d: &Dataset) -> Self {
        let mut inst = ChaseInstance::default();
        for (c, a) in &d.concepts {
            inst.concepts.insert((c.clone(), Node::Named(a.clone())));
        }
        for (r, a, b) in &d.roles {
            inst.roles
                .insert((r.clone(), Node::Named(a.clone()), Node::Named(b.clone())));
        }
        inst.attributes = d.attributes.clone();
        inst
    }

    fn depth(&self, node: &Node) -> u32 {
        match node {
            Node::Named(_) => 0,
            Node::Null(n) => self.depths.get(n).copied().unwrap_or(0),
        }
    }

    fn fresh_null(&mut self, depth: u32) -> Node {
        let id = self.next_null;
        self.next_null += 1;
        self.depths.insert(id, depth);
        Node::Null(id)
    }

    fn role_pairs(&self, role: &Role) -> Vec<(Node, Node)> {
        self.roles
            .iter()
            .filter(|(name, _, _)| name == &role.base)
            .map(|(_, a, b)| {
                if role.inverted {
                    (b.clone(), a.clone())
                } else {
                    (a.clone(), b.clone())
                }
            })
            .collect()
    }

    fn basic_members(&self, b: &BasicConcept) -> Vec<Node> {
        match b {
            BasicConcept::Atomic(a) => self
                .concepts
                .iter()
                .filter(|(name, _)| name == a)
                .map(|(_, n)| n.clone())
                .collect(),
            BasicConcept::ExistsRole(r) => {
                let mut out: Vec<Node> = self.role_pairs(r).into_iter().map(|(a, _)| a).collect();
                out.sort();
                out.dedup();
                out
            }
        }
    }

    fn extended_members(&self, c: &ExtendedConcept) -> Vec<Node> {
        match c {
            ExtendedConcept::Atomic(a) => self.basic_members(&BasicConcept::Atomic(a.clone())),
            ExtendedConcept::ExistsRole(r) => {
                self.basic_members(&BasicConcept::ExistsRole(r.clone()))
            }
            ExtendedConcept::ExistsAttribute(f) => {
                let mut out: Vec<Node> = self
                    .attributes
                    .iter()
                    .filter(|(name, _, _)| name == f)
                    .map(|(_, a, _)| Node::Named(a.clone()))
                    .collect();
                out.sort();
                out.dedup();
                out
            }
        }
    }

    fn has_successor(&self, node: &Node, role: &Role) -> bool {
        self.role_pairs(role).iter().any(|(a, _)| a == node)
    }

    fn add_role(&mut self, role: &Role, from: Node, to: Node) -> bool {
        if role.inverted {
            self.roles.insert((role.base.clone(), to, from))
        } else {
            self.roles.insert((role.base.clone(), from, to))
        }
    }

    /// Saturates under the ontology with labeled nulls for existential
    /// heads, bounded by `max_depth` null generations.
    pub fn chase(d: &Dataset, o: &Ontology, max_depth: u32) -> ChaseInstance {
        let closed = deductive_closure(d, o);
        let mut inst = ChaseInstance::from_dataset(&closed);

        let aggregate_members: Vec<(Vec<Individual>, BasicConcept)> = o
            .axioms
            .iter()
            .filter_map(|ax| match ax {
                Axiom::AggregateInclusion(e, rhs) => Some((
                    eval_aggregate_over_closed_attributes(e, &closed),
                    rhs.clone(),
                )),
                _ => None,
            })
            .collect();

        loop {
            let mut grew = false;
            for ax in &o.axioms {
                match ax {
                    Axiom::ConceptInclusion(lhs, rhs) => {
                        for node in inst.extended_members(lhs) {
                            grew |= inst.apply_head(rhs, node, max_depth);
                        }
                    }
                    Axiom::RoleInclusion(sub, sup) => {
                        for (a, b) in inst.role_pairs(sub) {
                            grew |= inst.add_role(sup, a, b);
                        }
                    }
                    _ => {}
                }
            }
            for (members, rhs) in &aggregate_members {
                for a in members {
                    grew |= inst.apply_head(rhs, Node::Named(a.clone()), max_depth);
                }
            }
            if !grew {
                break;
            }
        }
        inst
    }

    fn apply_head(&mut self, rhs: &BasicConcept, node: Node, max_depth: u32) -> bool {
        match rhs {
            BasicConcept::Atomic(a) => self.concepts.insert((a.clone(), node)),
            BasicConcept::ExistsRole(r) => {
                if self.has_successor(&node, r) {
                    false
                } else if self.depth(&node) >= max_depth {
                    self.exhausted = true;
                    false
                } else {
                    let null = self.fresh_null(self.depth(&node) + 1);
                    self.add_role(r, node, null)
                }
            }
        }
    }
}

/// Oracle knobs. The chase bound targets desk-scale ground truth; the
/// outcome flags when it was hit.
#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub chase_depth: u32,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { chase_depth: 3 }
    }
}

#[derive(Debug, Clone)]
pub enum OracleError {
    Unsatisfiable(SatReport),
}

impl core::fmt::Display for OracleError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            OracleError::Unsatisfiable(report) => {
                write!(f, "ontology and dataset are unsatisfiable ({} violations)", report.violations.len())
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for OracleError {}

/// Certain answers plus the exhaustion flag: when `chase_exhausted` is set
/// the answers are sound but possibly incomplete.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleOutcome {
    pub answers: BTreeSet<Vec<Constant>>,
    pub chase_exhausted: bool,
}

/// Computes certain answers of `q` over `O ∪ D` by homomorphic evaluation
/// over the bounded chase. Null-bearing tuples are dropped.
pub fn certain_answers(
    q: &ConjunctiveQuery,
    o: &Ontology,
    d: &Dataset,
    config: OracleConfig,
) -> Result<OracleOutcome, OracleError> {
    let sat = check_satisfiability(o, d);
    if !sat.is_satisfiable() {
        return Err(OracleError::Unsatisfiable(sat));
    }
    let inst = ChaseInstance::chase(d, o, config.chase_depth);
    let aggs = aggregate_extensions(q, o, d);
    let answers = evaluate_cq(q, &inst, &aggs);
    Ok(OracleOutcome { answers, chase_exhausted: inst.exhausted })
}

/// Evaluates a UCQ directly over a raw dataset: plain atoms match the
/// asserted rows only, aggregate atoms go through the closed-world
/// evaluation. This is the evaluator the rewriting properties compare
/// against.
pub fn evaluate_ucq_over_dataset(
    u: &UnionOfCqs,
    d: &Dataset,
    o: &Ontology,
) -> BTreeSet<Vec<Constant>> {
    let inst = ChaseInstance::from_dataset(d);
    let mut answers = BTreeSet::new();
    for cq in &u.disjuncts {
        let aggs = aggregate_extensions(cq, o, d);
        answers.extend(evaluate_cq(cq, &inst, &aggs));
    }
    answers
}

fn aggregate_extensions(
    q: &ConjunctiveQuery,
    o: &Ontology,
    d: &Dataset,
) -> BTreeMap<AggregateConcept, BTreeSet<Individual>> {
    let mut out = BTreeMap::new();
    for atom in &q.atoms {
        if let Atom::Aggregate { concept, .. } = atom {
            out.entry(concept.clone()).or_insert_with(|| {
                super::aggregate::eval_aggregate_concept(concept, d, o)
                    .into_iter()
                    .collect()
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Bound {
    Node(Node),
    Val(Rational),
}

fn evaluate_cq(
    q: &ConjunctiveQuery,
    inst: &ChaseInstance,
    aggs: &BTreeMap<AggregateConcept, BTreeSet<Individual>>,
) -> BTreeSet<Vec<Constant>> {
    let mut answers = BTreeSet::new();
    let mut binding: BTreeMap<String, Bound> = BTreeMap::new();
    search(&q.atoms, 0, inst, aggs, &mut binding, &mut |binding| {
        let mut tuple = Vec::with_capacity(q.head.len());
        for h in &q.head {
            match binding.get(h) {
                Some(Bound::Node(Node::Named(i))) => tuple.push(Constant::Ind(i.clone())),
                Some(Bound::Val(v)) => tuple.push(Constant::Val(v.clone())),
                // Unbound head variables cannot happen for safe queries;
                // null bindings are not certain answers.
                _ => return,
            }
        }
        answers.insert(tuple);
    });
    answers
}

fn search(
    atoms: &[Atom],
    idx: usize,
    inst: &ChaseInstance,
    aggs: &BTreeMap<AggregateConcept, BTreeSet<Individual>>,
    binding: &mut BTreeMap<String, Bound>,
    emit: &mut dyn FnMut(&BTreeMap<String, Bound>),
) {
    if idx == atoms.len() {
        emit(binding);
        return;
    }
    match &atoms[idx] {
        Atom::Concept { name, arg } => {
            for (c, node) in &inst.concepts {
                if c == name {
                    try_bind_node(arg, node, binding, |b| {
                        search(atoms, idx + 1, inst, aggs, b, emit)
                    });
                }
            }
        }
        Atom::Aggregate { concept, arg } => {
            if let Some(members) = aggs.get(concept) {
                for m in members {
                    let node = Node::Named(m.clone());
                    try_bind_node(arg, &node, binding, |b| {
                        search(atoms, idx + 1, inst, aggs, b, emit)
                    });
                }
            }
        }
        Atom::Role { name, subject, object } => {
            for (r, a, b) in &inst.roles {
                if r == name {
                    try_bind_node(subject, a, binding, |bind| {
                        try_bind_node(object, b, bind, |bind| {
                            search(atoms, idx + 1, inst, aggs, bind, emit)
                        });
                    });
                }
            }
        }
        Atom::Attribute { name, subject, value } => {
            for (f, a, v) in &inst.attributes {
                if f == name {
                    let node = Node::Named(a.clone());
                    try_bind_node(subject, &node, binding, |bind| {
                        try_bind_val(value, v, bind, |bind| {
                            search(atoms, idx + 1, inst, aggs, bind, emit)
                        });
                    });
                }
            }
        }
    }
}

fn try_bind_node(
    term: &Term,
    node: &Node,
    binding: &mut BTreeMap<String, Bound>,
    mut cont: impl FnMut(&mut BTreeMap<String, Bound>),
) {
    match term {
        Term::Var(v) => match binding.get(v) {
            Some(Bound::Node(existing)) => {
                if existing == node {
                    cont(binding);
                }
            }
            Some(Bound::Val(_)) => {}
            None => {
                binding.insert(v.clone(), Bound::Node(node.clone()));
                cont(binding);
                binding.remove(v);
            }
        },
        Term::Ind(i) => {
            if let Node::Named(named) = node {
                if named == i {
                    cont(binding);
                }
            }
        }
        Term::Val(_) => {}
    }
}

fn try_bind_val(
    term: &Term,
    value: &Rational,
    binding: &mut BTreeMap<String, Bound>,
    mut cont: impl FnMut(&mut BTreeMap<String, Bound>),
) {
    match term {
        Term::Var(v) => match binding.get(v) {
            Some(Bound::Val(existing)) => {
                if existing == value {
                    cont(binding);
                }
            }
            Some(Bound::Node(_)) => {}
            None => {
                binding.insert(v.clone(), Bound::Val(value.clone()));
                cont(binding);
                binding.remove(v);
            }
        },
        Term::Val(r) => {
            if r == value {
                cont(binding);
            }
        }
        Term::Ind(_) => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::text::{parse_dataset, parse_ontology};

    fn answers_of(
        q: &ConjunctiveQuery,
        o: &Ontology,
        d: &Dataset,
    ) -> Vec<alloc::string::String> {
        use alloc::string::ToString;
        let outcome = certain_answers(q, o, d, OracleConfig::default()).unwrap();
        outcome
            .answers
            .iter()
            .map(|t| {
                t.iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect()
    }

    fn reliable_query() -> ConjunctiveQuery {
        ConjunctiveQuery::new(
            alloc::vec!["x".into()],
            alloc::vec![Atom::Concept { name: "Reliable".into(), arg: Term::var("x") }],
        )
    }

    #[test]
    fn running_example_certain_answers() {
        let o = parse_ontology(
            "precisionScore subattr testScore\nagg:min testScore >= 0.9 sub Reliable\n",
        )
        .unwrap();
        let d = parse_dataset(
            "attr,s1,precisionScore,0.9\nattr,s2,testScore,0.95\nattr,s3,testScore,0.5\n",
        )
        .unwrap();
        assert_eq!(answers_of(&reliable_query(), &o, &d), ["s1", "s2"]);
    }

    #[test]
    fn empty_dataset_has_no_answers() {
        let q = ConjunctiveQuery::new(
            alloc::vec!["x".into()],
            alloc::vec![Atom::Concept { name: "A".into(), arg: Term::var("x") }],
        );
        assert!(answers_of(&q, &Ontology::default(), &Dataset::new()).is_empty());
    }

    #[test]
    fn nulls_are_not_answers_but_witness_joins() {
        // A sub exists R, exists inv(R) sub B: the null R-successor makes
        // R(x,y) ∧ B(y) succeed for x=a, but q2(y) over the null is empty.
        let o = parse_ontology("A sub exists R\nexists inv(R) sub B\n").unwrap();
        let d = parse_dataset("concept,a,A,").unwrap();
        let q = ConjunctiveQuery::new(
            alloc::vec!["x".into()],
            alloc::vec![
                Atom::Role { name: "R".into(), subject: Term::var("x"), object: Term::var("y") },
                Atom::Concept { name: "B".into(), arg: Term::var("y") },
            ],
        );
        assert_eq!(answers_of(&q, &o, &d), ["a"]);

        let q2 = ConjunctiveQuery::new(
            alloc::vec!["y".into()],
            alloc::vec![Atom::Role {
                name: "R".into(),
                subject: Term::var("x"),
                object: Term::var("y"),
            }],
        );
        assert!(answers_of(&q2, &o, &d).is_empty());
    }

    #[test]
    fn unsatisfiable_input_is_reported() {
        let o = parse_ontology("funct attr F").unwrap();
        let d = parse_dataset("attr,a,F,1\nattr,a,F,2").unwrap();
        let err = certain_answers(&reliable_query(), &o, &d, OracleConfig::default());
        assert!(matches!(err, Err(OracleError::Unsatisfiable(_))));
    }

    #[test]
    fn deep_existential_chains_flag_exhaustion() {
        let o = parse_ontology(
            "A sub exists R\nexists inv(R) sub A\n",
        )
        .unwrap();
        let d = parse_dataset("concept,a,A,").unwrap();
        let inst = ChaseInstance::chase(&d, &o, 3);
        assert!(inst.exhausted);
        // Depth 0 is the named individual, then three null generations.
        assert_eq!(inst.roles.len(), 3);
    }

    #[test]
    fn attribute_join_with_value_head() {
        let o = Ontology::default();
        let d = parse_dataset("attr,a,F,0.5\nattr,b,F,0.75").unwrap();
        let q = ConjunctiveQuery::new(
            alloc::vec!["x".into(), "v".into()],
            alloc::vec![Atom::Attribute {
                name: "F".into(),
                subject: Term::var("x"),
                value: Term::var("v"),
            }],
        );
        assert_eq!(answers_of(&q, &o, &d), ["a,0.5", "b,0.75"]);
    }
}
