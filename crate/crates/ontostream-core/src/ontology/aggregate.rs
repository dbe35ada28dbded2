//! Evaluation of aggregate concepts under closed-world attribute semantics.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_traits::Zero;

use super::closure::deductive_closure;
use super::model::{AggFn, AggregateConcept, Dataset, Individual, Ontology};
use crate::rational::Rational;

/// Evaluates an aggregate concept against the deductive closure of `d` with
/// `o`: the individuals whose multiset of attribute values satisfies
/// `agg(values) cmp threshold`. Individuals with no value for the attribute
/// are members of no aggregate concept, `count` included: the same
/// convention a grouped query produces, where empty groups yield no row.
pub fn eval_aggregate_concept(
    e: &AggregateConcept,
    d: &Dataset,
    o: &Ontology,
) -> Vec<Individual> {
    eval_aggregate_over_closed_attributes(e, &deductive_closure(d, o))
}

/// Same evaluation, but over a dataset whose attribute relation is already
/// closed. The closure computation itself calls this to fix aggregate
/// memberships once the attributes have stabilized.
pub(crate) fn eval_aggregate_over_closed_attributes(
    e: &AggregateConcept,
    closed: &Dataset,
) -> Vec<Individual> {
    let mut groups: BTreeMap<&Individual, Vec<&Rational>> = BTreeMap::new();
    for (name, a, v) in &closed.attributes {
        if name == &e.attribute {
            groups.entry(a).or_default().push(v);
        }
    }
    let mut members = Vec::new();
    for (a, values) in groups {
        let agg = apply_aggregate(e.agg, &values);
        if e.cmp.test(&agg, &e.threshold) {
            members.push(a.clone());
        }
    }
    members
}

/// Applies an aggregate function to a nonempty multiset of rationals.
///
/// Assertions are a set of (individual, value) pairs, so within one
/// individual the multiset of values equals the value set and `count`
/// coincides with `countd`; both are kept because they diverge once the
/// value multiset can repeat (e.g. in the relational group-having form over
/// tables with duplicate rows).
pub fn apply_aggregate(agg: AggFn, values: &[&Rational]) -> Rational {
    debug_assert!(!values.is_empty());
    match agg {
        AggFn::Min => (*values.iter().min().unwrap()).clone(),
        AggFn::Max => (*values.iter().max().unwrap()).clone(),
        AggFn::Count => Rational::from_integer(values.len().into()),
        AggFn::CountDistinct => {
            let mut distinct: Vec<&&Rational> = values.iter().collect();
            distinct.sort();
            distinct.dedup();
            Rational::from_integer(distinct.len().into())
        }
        AggFn::Sum => values.iter().fold(Rational::zero(), |acc, v| acc + *v),
        AggFn::Avg => {
            let sum = values.iter().fold(Rational::zero(), |acc, v| acc + *v);
            sum / Rational::from_integer(values.len().into())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::model::Cmp;
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

    fn agg(agg: AggFn, attr: &str, cmp: Cmp, threshold: &str) -> AggregateConcept {
        AggregateConcept {
            agg,
            cmp,
            threshold: parse_rational(threshold).unwrap(),
            attribute: attr.into(),
        }
    }

    #[test]
    fn min_test_score_members() {
        let e = agg(AggFn::Min, "testScore", Cmp::Ge, "0.9");
        let members = eval_aggregate_concept(&e, &example_data(), &reliability_ontology());
        let names: Vec<&str> = members.iter().map(|i| i.name()).collect();
        assert_eq!(names, ["s1", "s2"]);
    }

    #[test]
    fn min_precision_score_members() {
        let e = agg(AggFn::Min, "precisionScore", Cmp::Ge, "0.9");
        let members = eval_aggregate_concept(&e, &example_data(), &reliability_ontology());
        let names: Vec<&str> = members.iter().map(|i| i.name()).collect();
        assert_eq!(names, ["s1"]);
    }

    #[test]
    fn empty_dataset_has_no_members() {
        let e = agg(AggFn::Count, "testScore", Cmp::Ge, "0");
        assert!(eval_aggregate_concept(&e, &Dataset::new(), &reliability_ontology()).is_empty());
    }

    #[test]
    fn empty_groups_are_excluded_even_for_count() {
        let d = parse_dataset("concept,a,A,\nattr,b,F,1").unwrap();
        let e = agg(AggFn::Count, "F", Cmp::Ge, "0");
        let members = eval_aggregate_concept(&e, &d, &Ontology::default());
        let names: Vec<&str> = members.iter().map(|i| i.name()).collect();
        // `a` has no F-value at all, so it is not in the concept.
        assert_eq!(names, ["b"]);
    }

    #[test]
    fn sum_avg_countd_are_exact() {
        let d = parse_dataset("attr,a,F,0.1\nattr,a,F,0.2\n").unwrap();
        let o = Ontology::default();
        let exactly = |agg_fn, th: &str| {
            let e = agg(agg_fn, "F", Cmp::Eq, th);
            eval_aggregate_concept(&e, &d, &o).len() == 1
        };
        assert!(exactly(AggFn::Sum, "0.3"));
        assert!(exactly(AggFn::Avg, "0.15"));
        assert!(exactly(AggFn::Count, "2"));
        assert!(exactly(AggFn::CountDistinct, "2"));
        assert!(exactly(AggFn::Min, "0.1"));
        assert!(exactly(AggFn::Max, "0.2"));
    }

    #[test]
    fn adding_concept_assertions_never_changes_membership() {
        let o = reliability_ontology();
        let e = agg(AggFn::Min, "testScore", Cmp::Ge, "0.9");
        let base = example_data();
        let before = eval_aggregate_concept(&e, &base, &o);
        let mut with_concepts = base.clone();
        with_concepts.assert_concept("Whatever", "s3");
        with_concepts.assert_concept("Reliable", "s3");
        assert_eq!(before, eval_aggregate_concept(&e, &with_concepts, &o));
    }
}
