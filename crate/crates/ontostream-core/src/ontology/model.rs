//! Data model for the ontology language: basic/extended concepts, roles,
//! attributes, aggregate concepts, axioms, and ground datasets.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::rational::{format_rational, Rational};

/// A named individual. Unique-name assumption: distinct names denote
/// distinct individuals.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Individual(pub String);

impl Individual {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        debug_assert!(!name.is_empty(), "individual names must be nonempty");
        Individual(name)
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl core::fmt::Display for Individual {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}

/// A basic role: a role name, possibly inverted. Double inversion
/// normalizes back to the base.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Role {
    pub base: String,
    pub inverted: bool,
}

impl Role {
    pub fn named(base: impl Into<String>) -> Self {
        Role { base: base.into(), inverted: false }
    }

    pub fn inverse_of(base: impl Into<String>) -> Self {
        Role { base: base.into(), inverted: true }
    }

    /// `R⁻`, with `(R⁻)⁻ = R`.
    pub fn inverse(&self) -> Role {
        Role { base: self.base.clone(), inverted: !self.inverted }
    }
}

impl core::fmt::Display for Role {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.inverted {
            write!(f, "inv({})", self.base)
        } else {
            f.write_str(&self.base)
        }
    }
}

/// A basic concept: atomic or an unqualified existential over a role.
/// Only basic concepts may appear on the right-hand side of inclusions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BasicConcept {
    Atomic(String),
    ExistsRole(Role),
}

impl core::fmt::Display for BasicConcept {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BasicConcept::Atomic(a) => f.write_str(a),
            BasicConcept::ExistsRole(r) => write!(f, "exists {r}"),
        }
    }
}

/// An extended concept: what may stand on the left of a concept inclusion.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtendedConcept {
    Atomic(String),
    ExistsRole(Role),
    ExistsAttribute(String),
}

impl ExtendedConcept {
    pub fn from_basic(b: &BasicConcept) -> Self {
        match b {
            BasicConcept::Atomic(a) => ExtendedConcept::Atomic(a.clone()),
            BasicConcept::ExistsRole(r) => ExtendedConcept::ExistsRole(r.clone()),
        }
    }
}

impl core::fmt::Display for ExtendedConcept {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ExtendedConcept::Atomic(a) => f.write_str(a),
            ExtendedConcept::ExistsRole(r) => write!(f, "exists {r}"),
            ExtendedConcept::ExistsAttribute(a) => write!(f, "exists attr {a}"),
        }
    }
}

/// Aggregate functions usable inside aggregate concepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AggFn {
    Min,
    Max,
    Count,
    CountDistinct,
    Sum,
    Avg,
}

impl AggFn {
    pub fn name(self) -> &'static str {
        match self {
            AggFn::Min => "min",
            AggFn::Max => "max",
            AggFn::Count => "count",
            AggFn::CountDistinct => "countd",
            AggFn::Sum => "sum",
            AggFn::Avg => "avg",
        }
    }

    pub fn parse(s: &str) -> Option<AggFn> {
        Some(match s {
            "min" => AggFn::Min,
            "max" => AggFn::Max,
            "count" => AggFn::Count,
            "countd" => AggFn::CountDistinct,
            "sum" => AggFn::Sum,
            "avg" => AggFn::Avg,
            _ => return None,
        })
    }
}

impl core::fmt::Display for AggFn {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Comparison predicates on rationals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cmp {
    Ge,
    Le,
    Lt,
    Gt,
    Eq,
    Ne,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Ge => ">=",
            Cmp::Le => "<=",
            Cmp::Lt => "<",
            Cmp::Gt => ">",
            Cmp::Eq => "=",
            Cmp::Ne => "!=",
        }
    }

    pub fn parse(s: &str) -> Option<Cmp> {
        Some(match s {
            ">=" => Cmp::Ge,
            "<=" => Cmp::Le,
            "<" => Cmp::Lt,
            ">" => Cmp::Gt,
            "=" => Cmp::Eq,
            "!=" => Cmp::Ne,
            _ => return None,
        })
    }

    pub fn test<T: PartialOrd + PartialEq>(self, left: &T, right: &T) -> bool {
        match self {
            Cmp::Ge => left >= right,
            Cmp::Le => left <= right,
            Cmp::Lt => left < right,
            Cmp::Gt => left > right,
            Cmp::Eq => left == right,
            Cmp::Ne => left != right,
        }
    }
}

impl core::fmt::Display for Cmp {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.symbol())
    }
}

/// An aggregate concept: the individuals whose multiset of attribute values
/// satisfies `agg(values) cmp threshold`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AggregateConcept {
    pub agg: AggFn,
    pub cmp: Cmp,
    pub threshold: Rational,
    pub attribute: String,
}

impl core::fmt::Display for AggregateConcept {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "agg:{} {} {} {}",
            self.agg,
            self.attribute,
            self.cmp,
            format_rational(&self.threshold)
        )
    }
}

/// One ontology axiom. Right-hand sides of inclusions are basic concepts by
/// construction; the attribute-existential and aggregate forms simply cannot
/// be represented there.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axiom {
    ConceptInclusion(ExtendedConcept, BasicConcept),
    AggregateInclusion(AggregateConcept, BasicConcept),
    RoleInclusion(Role, Role),
    AttributeInclusion(String, String),
    FunctRole(Role),
    FunctAttribute(String),
    ConceptDisjoint(BasicConcept, BasicConcept),
    RoleDisjoint(Role, Role),
    AttributeDisjoint(String, String),
}

/// A finite set of axioms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ontology {
    pub axioms: Vec<Axiom>,
}

impl Ontology {
    pub fn new(axioms: Vec<Axiom>) -> Self {
        Ontology { axioms }
    }

    /// All attribute names mentioned anywhere in the ontology.
    pub fn attribute_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for ax in &self.axioms {
            match ax {
                Axiom::ConceptInclusion(ExtendedConcept::ExistsAttribute(f), _) => {
                    out.insert(f.clone());
                }
                Axiom::AggregateInclusion(e, _) => {
                    out.insert(e.attribute.clone());
                }
                Axiom::AttributeInclusion(f1, f2) => {
                    out.insert(f1.clone());
                    out.insert(f2.clone());
                }
                Axiom::FunctAttribute(f) => {
                    out.insert(f.clone());
                }
                Axiom::AttributeDisjoint(f1, f2) => {
                    out.insert(f1.clone());
                    out.insert(f2.clone());
                }
                _ => {}
            }
        }
        out
    }

    /// All role names mentioned anywhere in the ontology.
    pub fn role_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let push_basic = |out: &mut BTreeSet<String>, b: &BasicConcept| {
            if let BasicConcept::ExistsRole(r) = b {
                out.insert(r.base.clone());
            }
        };
        for ax in &self.axioms {
            match ax {
                Axiom::ConceptInclusion(lhs, rhs) => {
                    if let ExtendedConcept::ExistsRole(r) = lhs {
                        out.insert(r.base.clone());
                    }
                    push_basic(&mut out, rhs);
                }
                Axiom::AggregateInclusion(_, rhs) => push_basic(&mut out, rhs),
                Axiom::RoleInclusion(r1, r2) => {
                    out.insert(r1.base.clone());
                    out.insert(r2.base.clone());
                }
                Axiom::FunctRole(r) => {
                    out.insert(r.base.clone());
                }
                Axiom::ConceptDisjoint(b1, b2) => {
                    push_basic(&mut out, b1);
                    push_basic(&mut out, b2);
                }
                Axiom::RoleDisjoint(r1, r2) => {
                    out.insert(r1.base.clone());
                    out.insert(r2.base.clone());
                }
                _ => {}
            }
        }
        out
    }

    /// All atomic concept names mentioned anywhere in the ontology.
    pub fn concept_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let push_basic = |out: &mut BTreeSet<String>, b: &BasicConcept| {
            if let BasicConcept::Atomic(a) = b {
                out.insert(a.clone());
            }
        };
        for ax in &self.axioms {
            match ax {
                Axiom::ConceptInclusion(lhs, rhs) => {
                    if let ExtendedConcept::Atomic(a) = lhs {
                        out.insert(a.clone());
                    }
                    push_basic(&mut out, rhs);
                }
                Axiom::AggregateInclusion(_, rhs) => push_basic(&mut out, rhs),
                Axiom::ConceptDisjoint(b1, b2) => {
                    push_basic(&mut out, b1);
                    push_basic(&mut out, b2);
                }
                _ => {}
            }
        }
        out
    }
}

/// A ground dataset: concept, role, and attribute assertions with set
/// semantics at the assertion level.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub concepts: BTreeSet<(String, Individual)>,
    pub roles: BTreeSet<(String, Individual, Individual)>,
    pub attributes: BTreeSet<(String, Individual, Rational)>,
}

impl Dataset {
    pub fn new() -> Self {
        Dataset::default()
    }

    pub fn assert_concept(&mut self, concept: impl Into<String>, a: impl Into<String>) {
        self.concepts.insert((concept.into(), Individual::new(a)));
    }

    pub fn assert_role(
        &mut self,
        role: impl Into<String>,
        a: impl Into<String>,
        b: impl Into<String>,
    ) {
        self.roles
            .insert((role.into(), Individual::new(a), Individual::new(b)));
    }

    pub fn assert_attribute(
        &mut self,
        attr: impl Into<String>,
        a: impl Into<String>,
        v: Rational,
    ) {
        self.attributes.insert((attr.into(), Individual::new(a), v));
    }

    pub fn len(&self) -> usize {
        self.concepts.len() + self.roles.len() + self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn individuals(&self) -> BTreeSet<Individual> {
        let mut out = BTreeSet::new();
        for (_, a) in &self.concepts {
            out.insert(a.clone());
        }
        for (_, a, b) in &self.roles {
            out.insert(a.clone());
            out.insert(b.clone());
        }
        for (_, a, _) in &self.attributes {
            out.insert(a.clone());
        }
        out
    }

    /// Values of attribute `f` for individual `a`. Set-level assertions mean
    /// the multiset over (a, v) pairs has per-pair multiplicity one.
    pub fn attribute_values(&self, f: &str, a: &Individual) -> Vec<&Rational> {
        self.attributes
            .iter()
            .filter(|(name, subj, _)| name == f && subj == a)
            .map(|(_, _, v)| v)
            .collect()
    }
}

/// One violation of the syntactic restrictions an ontology must satisfy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OntologyViolation {
    /// `funct R` together with some `R' subrole R` (or the inverse form).
    FunctionalRoleSpecialized { funct: Role, inclusion: (Role, Role) },
    /// `funct attr F` together with some `F' subattr F`.
    FunctionalAttributeSpecialized { funct: String, inclusion: (String, String) },
}

impl core::fmt::Display for OntologyViolation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            OntologyViolation::FunctionalRoleSpecialized { funct, inclusion } => write!(
                f,
                "funct {} conflicts with role inclusion {} subrole {}",
                funct, inclusion.0, inclusion.1
            ),
            OntologyViolation::FunctionalAttributeSpecialized { funct, inclusion } => write!(
                f,
                "funct attr {} conflicts with attribute inclusion {} subattr {}",
                funct, inclusion.0, inclusion.1
            ),
        }
    }
}

/// Result of `validate_ontology`: empty iff the ontology satisfies the
/// syntactic restrictions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<OntologyViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the syntactic restrictions: a functional role (attribute) must not
/// appear on the right-hand side of a role (attribute) inclusion. The
/// restriction on right-hand sides of concept inclusions is structural:
/// the axiom types cannot express a forbidden right-hand side.
pub fn validate_ontology(o: &Ontology) -> ValidationReport {
    let mut report = ValidationReport::default();
    for ax in &o.axioms {
        match ax {
            Axiom::FunctRole(r) => {
                for other in &o.axioms {
                    if let Axiom::RoleInclusion(sub, sup) = other {
                        // Compare by base name: specializing R⁻ also feeds
                        // new pairs into R.
                        if sup.base == r.base {
                            report.violations.push(OntologyViolation::FunctionalRoleSpecialized {
                                funct: r.clone(),
                                inclusion: (sub.clone(), sup.clone()),
                            });
                        }
                    }
                }
            }
            Axiom::FunctAttribute(fa) => {
                for other in &o.axioms {
                    if let Axiom::AttributeInclusion(sub, sup) = other {
                        if sup == fa {
                            report
                                .violations
                                .push(OntologyViolation::FunctionalAttributeSpecialized {
                                    funct: fa.clone(),
                                    inclusion: (sub.clone(), sup.clone()),
                                });
                        }
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
    use crate::rational::parse_rational;

    pub(crate) fn reliability_ontology() -> Ontology {
        Ontology::new(alloc::vec![
            Axiom::AttributeInclusion("precisionScore".into(), "testScore".into()),
            Axiom::AggregateInclusion(
                AggregateConcept {
                    agg: AggFn::Min,
                    cmp: Cmp::Ge,
                    threshold: parse_rational("0.9").unwrap(),
                    attribute: "testScore".into(),
                },
                BasicConcept::Atomic("Reliable".into()),
            ),
        ])
    }

    #[test]
    fn double_inversion_normalizes() {
        let r = Role::named("hasPart");
        assert_eq!(r.inverse().inverse(), r);
    }

    #[test]
    fn funct_with_subrole_is_flagged() {
        let o = Ontology::new(alloc::vec![
            Axiom::FunctRole(Role::named("hasPart")),
            Axiom::RoleInclusion(Role::named("partOf"), Role::named("hasPart")),
        ]);
        let report = validate_ontology(&o);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(
            &report.violations[0],
            OntologyViolation::FunctionalRoleSpecialized { .. }
        ));
    }

    #[test]
    fn funct_inverse_specialization_is_flagged() {
        let o = Ontology::new(alloc::vec![
            Axiom::FunctRole(Role::named("feeds")),
            Axiom::RoleInclusion(Role::named("fedBy"), Role::inverse_of("feeds")),
        ]);
        assert_eq!(validate_ontology(&o).violations.len(), 1);
    }

    #[test]
    fn example_ontology_is_valid() {
        assert!(validate_ontology(&reliability_ontology()).is_valid());
        assert!(validate_ontology(&Ontology::default()).is_valid());
    }
}
