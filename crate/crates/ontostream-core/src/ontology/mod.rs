//! The ontology layer: data model, text formats, deductive closure,
//! aggregate-concept evaluation, satisfiability, and the brute-force
//! certain-answer oracle used as ground truth by the test suites.

mod aggregate;
mod closure;
mod model;
mod oracle;
mod text;

pub use aggregate::{apply_aggregate, eval_aggregate_concept};
pub use closure::{check_satisfiability, deductive_closure, SatReport, Violation};
pub use model::{
    validate_ontology, AggFn, AggregateConcept, Axiom, BasicConcept, Cmp, Dataset,
    ExtendedConcept, Individual, Ontology, OntologyViolation, Role, ValidationReport,
};
pub use oracle::{
    certain_answers, evaluate_ucq_over_dataset, ChaseInstance, Constant, Node, OracleConfig,
    OracleError, OracleOutcome,
};
pub use text::{parse_dataset, parse_ontology, TextError};
