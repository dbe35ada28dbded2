//! Deterministic random-instance generation for the equivalence test
//! suites: small ontologies, datasets, and conjunctive queries over a
//! fixed vocabulary pool. Test support, not part of the engine proper.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::ontology::{
    validate_ontology, AggFn, AggregateConcept, Axiom, BasicConcept, Cmp, Dataset,
    ExtendedConcept, Ontology, Role,
};
use crate::query::{Atom, ConjunctiveQuery, Term};
use crate::rational::Rational;

const CONCEPTS: &[&str] = &["A0", "A1", "A2", "A3"];
const ROLES: &[&str] = &["R0", "R1"];
const ATTRS: &[&str] = &["F0", "F1", "F2"];
const INDIVIDUALS: &[&str] = &["a0", "a1", "a2", "a3", "a4", "a5"];
const VARS: &[&str] = &["x", "y", "z"];

/// splitmix64; deterministic across platforms.
pub struct TestRng {
    state: u64,
}

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }

    pub fn chance(&mut self, numerator: u64, denominator: u64) -> bool {
        self.next_u64() % denominator < numerator
    }
}

fn random_rational(rng: &mut TestRng) -> Rational {
    // Small halves around the data value pool.
    let k = rng.below(9) as i64 - 2;
    Rational::new(k.into(), 2.into())
}

fn random_value(rng: &mut TestRng) -> Rational {
    let k = rng.below(5) as i64;
    Rational::new(k.into(), 2.into())
}

fn random_role(rng: &mut TestRng) -> Role {
    let base = *rng.pick(ROLES);
    if rng.chance(1, 4) {
        Role::inverse_of(base)
    } else {
        Role::named(base)
    }
}

fn random_basic(rng: &mut TestRng) -> BasicConcept {
    if rng.chance(1, 4) {
        BasicConcept::ExistsRole(random_role(rng))
    } else {
        BasicConcept::Atomic(rng.pick(CONCEPTS).to_string())
    }
}

fn random_extended(rng: &mut TestRng) -> ExtendedConcept {
    match rng.below(4) {
        0 => ExtendedConcept::ExistsRole(random_role(rng)),
        1 => ExtendedConcept::ExistsAttribute(rng.pick(ATTRS).to_string()),
        _ => ExtendedConcept::Atomic(rng.pick(CONCEPTS).to_string()),
    }
}

pub fn random_aggregate(rng: &mut TestRng) -> AggregateConcept {
    let aggs = [AggFn::Min, AggFn::Max, AggFn::Count, AggFn::CountDistinct, AggFn::Sum, AggFn::Avg];
    let cmps = [Cmp::Ge, Cmp::Le, Cmp::Lt, Cmp::Gt, Cmp::Eq, Cmp::Ne];
    AggregateConcept {
        agg: *rng.pick(&aggs),
        cmp: *rng.pick(&cmps),
        threshold: random_rational(rng),
        attribute: rng.pick(ATTRS).to_string(),
    }
}

/// A random valid ontology: at most `max_axioms` axioms with at most two
/// aggregate axioms, regenerating until the syntactic restrictions hold.
pub fn random_ontology(rng: &mut TestRng, max_axioms: usize) -> Ontology {
    loop {
        let n = 1 + rng.below(max_axioms);
        let mut axioms = Vec::new();
        let mut aggregates = 0;
        for _ in 0..n {
            let axiom = match rng.below(10) {
                0..=3 => Axiom::ConceptInclusion(random_extended(rng), random_basic(rng)),
                4 | 5 => Axiom::AttributeInclusion(
                    rng.pick(ATTRS).to_string(),
                    rng.pick(ATTRS).to_string(),
                ),
                6 => Axiom::RoleInclusion(random_role(rng), random_role(rng)),
                7 if aggregates < 2 => {
                    aggregates += 1;
                    Axiom::AggregateInclusion(
                        random_aggregate(rng),
                        BasicConcept::Atomic(rng.pick(CONCEPTS).to_string()),
                    )
                }
                7 => Axiom::ConceptInclusion(random_extended(rng), random_basic(rng)),
                8 => {
                    if rng.chance(1, 2) {
                        Axiom::FunctRole(random_role(rng))
                    } else {
                        Axiom::FunctAttribute(rng.pick(ATTRS).to_string())
                    }
                }
                _ => match rng.below(3) {
                    0 => Axiom::ConceptDisjoint(random_basic(rng), random_basic(rng)),
                    1 => Axiom::RoleDisjoint(random_role(rng), random_role(rng)),
                    _ => Axiom::AttributeDisjoint(
                        rng.pick(ATTRS).to_string(),
                        rng.pick(ATTRS).to_string(),
                    ),
                },
            };
            axioms.push(axiom);
        }
        let o = Ontology::new(axioms);
        if validate_ontology(&o).is_valid() {
            return o;
        }
    }
}

/// A random dataset over at most `max_individuals` individuals.
pub fn random_dataset(rng: &mut TestRng, max_individuals: usize) -> Dataset {
    let mut d = Dataset::new();
    let n = 1 + rng.below(max_individuals);
    for &a in INDIVIDUALS.iter().take(n) {
        for _ in 0..rng.below(3) {
            d.assert_concept(rng.pick(CONCEPTS).to_string(), a);
        }
        for _ in 0..rng.below(3) {
            let b = INDIVIDUALS[rng.below(n)];
            d.assert_role(rng.pick(ROLES).to_string(), a, b);
        }
        for _ in 0..rng.below(4) {
            d.assert_attribute(rng.pick(ATTRS).to_string(), a, random_value(rng));
        }
    }
    d
}

/// A random safe conjunctive query with 1..=3 atoms. Aggregate atoms reuse
/// the ontology's aggregate concepts when it has any, so rewriting has
/// axioms to work with.
pub fn random_query(rng: &mut TestRng, o: &Ontology) -> ConjunctiveQuery {
    let n_atoms = 1 + rng.below(3);
    let mut atoms = Vec::new();
    for _ in 0..n_atoms {
        let atom = match rng.below(8) {
            0..=2 => Atom::Concept {
                name: rng.pick(CONCEPTS).to_string(),
                arg: Term::var(*rng.pick(VARS)),
            },
            3 | 4 => Atom::Role {
                name: rng.pick(ROLES).to_string(),
                subject: Term::var(*rng.pick(VARS)),
                object: Term::var(*rng.pick(VARS)),
            },
            5 | 6 => Atom::Attribute {
                name: rng.pick(ATTRS).to_string(),
                subject: Term::var(*rng.pick(VARS)),
                value: Term::var(*rng.pick(VARS)),
            },
            _ => {
                let from_ontology: Vec<&AggregateConcept> = o
                    .axioms
                    .iter()
                    .filter_map(|ax| match ax {
                        Axiom::AggregateInclusion(e, _) => Some(e),
                        _ => None,
                    })
                    .collect();
                let concept = if !from_ontology.is_empty() && rng.chance(3, 4) {
                    (*rng.pick(&from_ontology)).clone()
                } else {
                    random_aggregate(rng)
                };
                Atom::Aggregate { concept, arg: Term::var(*rng.pick(VARS)) }
            }
        };
        atoms.push(atom);
    }
    let mut used: Vec<String> = Vec::new();
    for a in &atoms {
        for t in a.terms() {
            if let Term::Var(v) = t {
                if !used.contains(v) {
                    used.push(v.clone());
                }
            }
        }
    }
    let head_len = 1 + rng.below(used.len().min(2));
    let head: Vec<String> = used.into_iter().take(head_len).collect();
    ConjunctiveQuery::new(head, atoms)
}
