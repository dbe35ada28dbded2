//! Deductive closure over named individuals, and satisfiability checking.
//!
//! The closure saturates a dataset under the positive axioms without ever
//! inventing individuals: existential heads (`C sub exists R`) contribute
//! nothing here and are handled by the oracle's bounded chase. Attribute
//! assertions stabilize first (only attribute inclusions produce them), and
//! aggregate-concept memberships are then fixed once from the closed
//! attribute relation, which keeps the remaining saturation monotone.

use alloc::string::String;
use alloc::vec::Vec;

use super::aggregate::eval_aggregate_over_closed_attributes;
use super::model::{Axiom, BasicConcept, Dataset, ExtendedConcept, Individual, Ontology, Role};
use crate::rational::format_rational;

/// Pairs of a basic role in a dataset, inverse-normalized.
pub(crate) fn role_pairs<'a>(
    d: &'a Dataset,
    role: &'a Role,
) -> impl Iterator<Item = (Individual, Individual)> + 'a {
    d.roles.iter().filter_map(move |(name, a, b)| {
        if *name != role.base {
            None
        } else if role.inverted {
            Some((b.clone(), a.clone()))
        } else {
            Some((a.clone(), b.clone()))
        }
    })
}

/// Members of a basic concept in a dataset.
pub(crate) fn basic_members(d: &Dataset, b: &BasicConcept) -> Vec<Individual> {
    match b {
        BasicConcept::Atomic(a) => d
            .concepts
            .iter()
            .filter(|(name, _)| name == a)
            .map(|(_, i)| i.clone())
            .collect(),
        BasicConcept::ExistsRole(r) => {
            let mut out: Vec<Individual> = role_pairs(d, r).map(|(a, _)| a).collect();
            out.sort();
            out.dedup();
            out
        }
    }
}

fn extended_members(d: &Dataset, c: &ExtendedConcept) -> Vec<Individual> {
    match c {
        ExtendedConcept::Atomic(a) => basic_members(d, &BasicConcept::Atomic(a.clone())),
        ExtendedConcept::ExistsRole(r) => basic_members(d, &BasicConcept::ExistsRole(r.clone())),
        ExtendedConcept::ExistsAttribute(f) => {
            let mut out: Vec<Individual> = d
                .attributes
                .iter()
                .filter(|(name, _, _)| name == f)
                .map(|(_, a, _)| a.clone())
                .collect();
            out.sort();
            out.dedup();
            out
        }
    }
}

fn add_basic(d: &mut Dataset, b: &BasicConcept, a: &Individual) -> bool {
    match b {
        BasicConcept::Atomic(name) => d.concepts.insert((name.clone(), a.clone())),
        // Existential head: no fresh individuals in the named closure.
        BasicConcept::ExistsRole(_) => false,
    }
}

/// Saturates `d` under the positive axioms of `o`, restricted to named
/// individuals. The result contains `d`.
pub fn deductive_closure(d: &Dataset, o: &Ontology) -> Dataset {
    let mut closed = d.clone();

    // Attribute inclusions first; nothing else produces attribute rows.
    loop {
        let mut added = Vec::new();
        for ax in &o.axioms {
            if let Axiom::AttributeInclusion(sub, sup) = ax {
                for (name, a, v) in &closed.attributes {
                    if name == sub && !closed.attributes.contains(&(sup.clone(), a.clone(), v.clone())) {
                        added.push((sup.clone(), a.clone(), v.clone()));
                    }
                }
            }
        }
        if added.is_empty() {
            break;
        }
        closed.attributes.extend(added);
    }

    // Aggregate memberships are fixed by the closed attribute relation.
    let aggregate_members: Vec<(Vec<Individual>, BasicConcept)> = o
        .axioms
        .iter()
        .filter_map(|ax| match ax {
            Axiom::AggregateInclusion(e, rhs) => {
                Some((eval_aggregate_over_closed_attributes(e, &closed), rhs.clone()))
            }
            _ => None,
        })
        .collect();

    // Monotone saturation of concept and role assertions.
    loop {
        let mut grew = false;
        for ax in &o.axioms {
            match ax {
                Axiom::ConceptInclusion(lhs, rhs) => {
                    for a in extended_members(&closed, lhs) {
                        grew |= add_basic(&mut closed, rhs, &a);
                    }
                }
                Axiom::RoleInclusion(sub, sup) => {
                    let pairs: Vec<_> = role_pairs(&closed, sub).collect();
                    for (a, b) in pairs {
                        let row = if sup.inverted {
                            (sup.base.clone(), b, a)
                        } else {
                            (sup.base.clone(), a, b)
                        };
                        grew |= closed.roles.insert(row);
                    }
                }
                _ => {}
            }
        }
        for (members, rhs) in &aggregate_members {
            for a in members {
                grew |= add_basic(&mut closed, rhs, a);
            }
        }
        if !grew {
            break;
        }
    }
    closed
}

/// A violated denial or functionality axiom, with witnesses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub axiom: Axiom,
    pub witness: String,
}

impl core::fmt::Display for Violation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{:?} violated by {}", self.axiom, self.witness)
    }
}

/// Satisfiability verdict: the list is empty iff `O ∪ D` is satisfiable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SatReport {
    pub violations: Vec<Violation>,
}

impl SatReport {
    pub fn is_satisfiable(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Computes the closure and checks every functionality and disjointness
/// axiom against it.
pub fn check_satisfiability(o: &Ontology, d: &Dataset) -> SatReport {
    let closed = deductive_closure(d, o);
    let mut report = SatReport::default();
    for ax in &o.axioms {
        match ax {
            Axiom::FunctRole(r) => {
                let mut pairs: Vec<_> = role_pairs(&closed, r).collect();
                pairs.sort();
                for w in pairs.windows(2) {
                    if w[0].0 == w[1].0 && w[0].1 != w[1].1 {
                        report.violations.push(Violation {
                            axiom: ax.clone(),
                            witness: alloc::format!(
                                "{}({},{}) and {}({},{})",
                                r, w[0].0, w[0].1, r, w[1].0, w[1].1
                            ),
                        });
                    }
                }
            }
            Axiom::FunctAttribute(fa) => {
                let mut rows: Vec<_> = closed
                    .attributes
                    .iter()
                    .filter(|(name, _, _)| name == fa)
                    .collect();
                rows.sort();
                for w in rows.windows(2) {
                    if w[0].1 == w[1].1 && w[0].2 != w[1].2 {
                        report.violations.push(Violation {
                            axiom: ax.clone(),
                            witness: alloc::format!(
                                "{}({},{}) and {}({},{})",
                                fa,
                                w[0].1,
                                format_rational(&w[0].2),
                                fa,
                                w[1].1,
                                format_rational(&w[1].2)
                            ),
                        });
                    }
                }
            }
            Axiom::ConceptDisjoint(b1, b2) => {
                let m1 = basic_members(&closed, b1);
                let m2 = basic_members(&closed, b2);
                for a in m1.iter().filter(|a| m2.contains(a)) {
                    report.violations.push(Violation {
                        axiom: ax.clone(),
                        witness: alloc::format!("{a} is in both {b1} and {b2}"),
                    });
                }
            }
            Axiom::RoleDisjoint(r1, r2) => {
                let p2: Vec<_> = role_pairs(&closed, r2).collect();
                for (a, b) in role_pairs(&closed, r1) {
                    if p2.contains(&(a.clone(), b.clone())) {
                        report.violations.push(Violation {
                            axiom: ax.clone(),
                            witness: alloc::format!("({a},{b}) is in both {r1} and {r2}"),
                        });
                    }
                }
            }
            Axiom::AttributeDisjoint(f1, f2) => {
                for (name, a, v) in &closed.attributes {
                    if name == f1
                        && closed.attributes.contains(&(f2.clone(), a.clone(), v.clone()))
                    {
                        report.violations.push(Violation {
                            axiom: ax.clone(),
                            witness: alloc::format!(
                                "({a},{}) is in both {f1} and {f2}",
                                format_rational(v)
                            ),
                        });
                    }
                }
            }
            _ => {}
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::text::{parse_dataset, parse_ontology};
    use crate::rational::parse_rational;

    fn reliability_ontology() -> Ontology {
        parse_ontology(
            "precisionScore subattr testScore\nagg:min testScore >= 0.9 sub Reliable\n",
        )
        .unwrap()
    }

    fn example_data() -> Dataset {
        parse_dataset(
            "attr,s1,precisionScore,0.9\nattr,s2,testScore,0.95\nattr,s3,testScore,0.5\n",
        )
        .unwrap()
    }

    #[test]
    fn closure_adds_test_score_for_s1() {
        let closed = deductive_closure(&example_data(), &reliability_ontology());
        assert!(closed.attributes.contains(&(
            "testScore".into(),
            Individual::new("s1"),
            parse_rational("0.9").unwrap()
        )));
        // And the aggregate axiom fires on the closed attributes.
        assert!(closed.concepts.contains(&("Reliable".into(), Individual::new("s1"))));
        assert!(closed.concepts.contains(&("Reliable".into(), Individual::new("s2"))));
        assert!(!closed.concepts.contains(&("Reliable".into(), Individual::new("s3"))));
    }

    #[test]
    fn closure_is_monotone_and_idempotent() {
        let d = example_data();
        let o = reliability_ontology();
        let once = deductive_closure(&d, &o);
        assert!(once.concepts.is_superset(&d.concepts));
        assert!(once.attributes.is_superset(&d.attributes));
        let twice = deductive_closure(&once, &o);
        assert_eq!(once, twice);
    }

    #[test]
    fn empty_dataset_closes_to_empty() {
        let closed = deductive_closure(&Dataset::new(), &reliability_ontology());
        assert!(closed.is_empty());
    }

    #[test]
    fn attribute_chains_saturate() {
        let o = parse_ontology("F1 subattr F2\nF2 subattr F3\n").unwrap();
        let d = parse_dataset("attr,a,F1,1").unwrap();
        let closed = deductive_closure(&d, &o);
        let one = parse_rational("1").unwrap();
        for f in ["F1", "F2", "F3"] {
            assert!(closed.attributes.contains(&(f.into(), Individual::new("a"), one.clone())));
        }
        assert_eq!(closed.attributes.len(), 3);
    }

    #[test]
    fn role_inclusion_with_inverse() {
        let o = parse_ontology("inv(partOf) subrole hasPart\n").unwrap();
        let d = parse_dataset("role,wheel,partOf,car").unwrap();
        let closed = deductive_closure(&d, &o);
        assert!(closed.roles.contains(&(
            "hasPart".into(),
            Individual::new("car"),
            Individual::new("wheel")
        )));
    }

    #[test]
    fn funct_attribute_violation_has_witness() {
        let o = parse_ontology("funct attr F").unwrap();
        let d = parse_dataset("attr,a,F,1\nattr,a,F,2").unwrap();
        let report = check_satisfiability(&o, &d);
        assert!(!report.is_satisfiable());
        assert!(report.violations[0].witness.contains("F(a,1)"));
        assert!(report.violations[0].witness.contains("F(a,2)"));
    }

    #[test]
    fn concept_disjointness_violation() {
        let o = parse_ontology("disjoint A B").unwrap();
        let d = parse_dataset("concept,a,A,\nconcept,a,B,").unwrap();
        let report = check_satisfiability(&o, &d);
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].witness.contains('a'));
    }

    #[test]
    fn example_instance_is_satisfiable() {
        assert!(check_satisfiability(&reliability_ontology(), &example_data()).is_satisfiable());
    }

    #[test]
    fn satisfiability_ignores_duplicated_assertions() {
        let o = parse_ontology("funct attr F").unwrap();
        let d = parse_dataset("attr,a,F,1\nattr,a,F,1").unwrap();
        assert!(check_satisfiability(&o, &d).is_satisfiable());
    }
}
