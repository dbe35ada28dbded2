//! Frontend for the stream query language: lexer, parser, validator,
//! pretty-printer, and the compiler into executable plans.

pub mod ast;
mod compile;
mod parse;
mod print;
pub mod token;
mod validate;

pub use compile::{compile, static_conjunctive_query, CompileError, ExecutablePlan};
pub use ast::StarqlQuery;
pub use parse::{parse, ParseError};
pub use print::print;
pub use validate::{validate, QueryValidation, Rule, RuleViolation, FUNCTION_WHITELIST};

#[cfg(test)]
mod tests {
    use super::ast::*;
    use super::*;

    /// A full-featured exemplar query, deliberately kept in a loose
    /// textual shape: uneven whitespace, a trailing comma after the
    /// stream list, and a prefix declared with spaces around the colon.
    pub const RUNNING_EXAMPLE: &str = r#"
PREFIX ex : <http://www.example.org/onto/gasturbine/>

CREATE PULSE examplePulse WITH START = NOW, FREQUENCY = 1min

CREATE STREAM StreamOfSensorsInCriticalMode AS
CONSTRUCT GRAPH NOW { ?sensor a :InCriticalMode }

FROM STATIC ONTOLOGY ex:sensorOntology, DATA ex:sensorStaticData
WHERE { ?sensor a ex:Reliable }

FROM STREAM   sensorMeasurements 			[NOW - 1min, NOW]-> 1sec
				  referenceSensorMeasurements 1year <-[NOW - 1min, NOW]-> 1sec,
USING PULSE   examplePulse
SEQUENCE BY   StandardSequencing AS MergedSequenceOfMeasurementes
HAVING EXISTS i IN MergedSequenceOfMeasurementes
		(GRAPH i { ?sensor ex:hasValue ?y. ex:refSensor ex:hasValue ?z })
		HAVING PearsonCorrelation(?y, ?z) > 0.75
"#;

    #[test]
    fn running_example_parses_to_the_documented_ast() {
        let q = parse(RUNNING_EXAMPLE).unwrap();
        let pulse = q.pulse.as_ref().unwrap();
        assert_eq!(pulse.frequency_ms, 60_000);
        assert_eq!(pulse.start, TimeAnchor::Now);
        assert_eq!(q.output_stream, "StreamOfSensorsInCriticalMode");
        assert_eq!(
            q.output,
            OutputForm::Construct { subject_var: "sensor".into(), concept: "InCriticalMode".into() }
        );
        assert_eq!(q.where_triples.len(), 1);
        assert_eq!(
            q.where_triples[0],
            WhereTriple {
                subject: PatternTerm::Var("sensor".into()),
                predicate: WherePredicate::IsA,
                object: PatternTerm::Name("Reliable".into()),
            }
        );

        assert_eq!(q.stream_sources.len(), 2);
        let live = &q.stream_sources[0];
        assert_eq!(live.name, "sensorMeasurements");
        assert_eq!(live.range_ms, 60_000);
        assert_eq!(live.slide_ms, Some(1_000));
        assert_eq!(live.set_back_ms, None);
        let reference = &q.stream_sources[1];
        assert_eq!(reference.name, "referenceSensorMeasurements");
        assert_eq!(reference.set_back_ms, Some(31_536_000_000));
        assert_eq!(reference.range_ms, 60_000);
        assert_eq!(reference.slide_ms, Some(1_000));

        assert_eq!(q.using_pulse.as_deref(), Some("examplePulse"));
        let seq = q.sequencing.as_ref().unwrap();
        assert_eq!(seq.strategy, "StandardSequencing");
        assert_eq!(seq.alias, "MergedSequenceOfMeasurementes");

        let Some(HavingExpr::Quantified { quantifier, index_var, sequence, graphs, filter }) =
            &q.having
        else {
            panic!("expected a quantified HAVING");
        };
        assert_eq!(*quantifier, QuantifierKind::Exists);
        assert_eq!(index_var, "i");
        assert_eq!(sequence, "MergedSequenceOfMeasurementes");
        assert_eq!(graphs.len(), 1);
        assert_eq!(graphs[0].triples.len(), 2);
        assert_eq!(
            graphs[0].triples[1].subject,
            PatternTerm::Name("refSensor".into())
        );
        let HavingExpr::Compare { op, left, right } = filter.as_ref() else {
            panic!("expected a comparison filter");
        };
        assert_eq!(*op, CompareOp::Gt);
        assert_eq!(
            left,
            &NumExpr::Call(
                "PearsonCorrelation".into(),
                alloc::vec![NumExpr::Var("y".into()), NumExpr::Var("z".into())]
            )
        );
        assert_eq!(right, &NumExpr::Const(0.75));

        assert!(validate(&q).is_valid());
    }

    #[test]
    fn minimal_select_query() {
        let q = parse(
            "CREATE STREAM out AS SELECT ?s FROM STREAM live [NOW - 10sec, NOW]-> 1sec\n\
             SEQUENCE BY StandardSequencing AS seq\n\
             HAVING EXISTS i IN seq (GRAPH i { ?s hasValue ?y }) HAVING avg(?y) > 0.5",
        )
        .unwrap();
        assert!(q.where_triples.is_empty());
        assert!(q.pulse.is_none());
        assert!(validate(&q).is_valid());
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = parse("CREATE STREAM out AS NONSENSE").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.contains("CONSTRUCT or SELECT"));

        let err = parse(
            "CREATE PULSE p WITH START = NOW, FREQUENCY = 1min\n\
             CREATE PULSE p2 WITH START = NOW, FREQUENCY = 1min\n\
             CREATE STREAM out AS SELECT ?x FROM STREAM s [NOW - 1min, NOW]",
        )
        .unwrap_err();
        assert!(err.message.contains("duplicate CREATE PULSE"));
    }

    #[test]
    fn round_trip_is_structurally_stable() {
        let q1 = parse(RUNNING_EXAMPLE).unwrap();
        let printed = print(&q1);
        let q2 = parse(&printed).unwrap();
        assert_eq!(q1, q2);
    }

    #[test]
    fn validation_rules_fire() {
        // Index variable in the output.
        let q = parse(
            "CREATE STREAM out AS SELECT ?i FROM STREAM s [NOW - 10sec, NOW]-> 1sec\n\
             SEQUENCE BY StandardSequencing AS seq\n\
             HAVING EXISTS i IN seq (GRAPH i { ?x hasValue ?y }) HAVING ?y > 0",
        )
        .unwrap();
        let report = validate(&q);
        assert!(report.rule_names().contains(&"time-variable-in-output"));

        // Unsafe compared variable.
        let q = parse(
            "CREATE STREAM out AS SELECT ?x FROM STREAM s [NOW - 10sec, NOW]-> 1sec\n\
             SEQUENCE BY StandardSequencing AS seq\n\
             HAVING EXISTS i IN seq (GRAPH i { ?x hasValue ?y }) HAVING ?z > 0",
        )
        .unwrap();
        assert!(validate(&q).rule_names().contains(&"unsafe-value-variable"));

        // Unsupported sequencing strategy.
        let q = parse(
            "CREATE STREAM out AS SELECT ?x FROM STREAM s [NOW - 10sec, NOW]-> 1sec\n\
             SEQUENCE BY HoltWinters AS seq\n\
             HAVING EXISTS i IN seq (GRAPH i { ?x hasValue ?y }) HAVING ?y > 0",
        )
        .unwrap();
        assert!(validate(&q)
            .rule_names()
            .contains(&"unsupported-sequencing-strategy"));
    }

    #[test]
    fn explain_is_stable_across_compilations() {
        use crate::mapping::{parse_mappings, MappingSet};
        use crate::ontology::parse_ontology;

        let o = parse_ontology(
            "precisionScore subattr testScore\nagg:min testScore >= 0.9 sub Reliable\n",
        )
        .unwrap();
        let m: MappingSet = parse_mappings(
            "map concept Reliable(x) <- scan(reliable_sensors; x=sid)\n\
             map attr precisionScore(x,y) <- scan(precision_scores; x=sid, y=score)\n\
             map attr testScore(x,y) <- scan(test_scores_a; x=sid, y=score)\n\
             map attr testScore(x,y) <- scan(test_scores_b; x=sid, y=score)\n\
             map stream hasValue(?s,?v) <- slice(sensorMeasurements; s=sensor_id, v=value)\n\
             map stream hasValue(?s,?v) <- slice(referenceSensorMeasurements; s=sensor_id, v=value)\n",
        )
        .unwrap();
        let q = parse(RUNNING_EXAMPLE).unwrap();
        let p1 = compile(&q, &o, &m).unwrap();
        let p2 = compile(&q, &o, &m).unwrap();
        assert_eq!(p1.explain(), p2.explain());
        assert!(p1.explain().contains("static plan:"));
        assert!(p1.explain().contains("correlate"));
    }

    #[test]
    fn running_example_compiles_to_static_union_and_pearson_correlate() {
        use crate::ir::{Condition, RelExpr, StreamFn, ValueExpr};
        use crate::mapping::parse_mappings;
        use crate::ontology::parse_ontology;

        let o = parse_ontology(
            "precisionScore subattr testScore\nagg:min testScore >= 0.9 sub Reliable\n",
        )
        .unwrap();
        let m = parse_mappings(
            "map concept Reliable(x) <- scan(reliable_sensors; x=sid)\n\
             map attr precisionScore(x,y) <- scan(precision_scores; x=sid, y=score)\n\
             map attr testScore(x,y) <- scan(test_scores_a; x=sid, y=score)\n\
             map attr testScore(x,y) <- scan(test_scores_b; x=sid, y=score)\n\
             map stream hasValue(?s,?v) <- slice(sensorMeasurements; s=sensor_id, v=value)\n\
             map stream hasValue(?s,?v) <- slice(referenceSensorMeasurements; s=sensor_id, v=value)\n",
        )
        .unwrap();
        let q = parse(RUNNING_EXAMPLE).unwrap();
        let plan = compile(&q, &o, &m).unwrap();

        // Static side: union of the Reliable scan and the derived
        // group-having over the three attribute scans.
        let static_plan = plan.static_plan.as_ref().unwrap();
        static_plan.validate(false).unwrap();
        assert_eq!(plan.static_vars, ["sensor"]);
        let RelExpr::Union { inputs } = static_plan else { panic!("expected union") };
        assert_eq!(inputs.len(), 2);

        // Streaming side: a correlate whose condition is the Pearson
        // threshold, over a state join of the two streams' slices.
        let stream_plan = plan.stream_plan.as_ref().unwrap();
        stream_plan.validate(true).unwrap();
        let RelExpr::Correlate { condition, group, input, .. } = stream_plan else {
            panic!("expected correlate root")
        };
        assert_eq!(group, &["sensor".to_string()]);
        let Condition::Cmp(cmp, ValueExpr::Call(f, _), ValueExpr::Const(th)) = condition else {
            panic!("expected a pearson comparison");
        };
        assert_eq!(*f, StreamFn::Pearson);
        assert_eq!(*cmp, crate::ontology::Cmp::Gt);
        assert_eq!(*th, 0.75);
        assert!(matches!(input.as_ref(), RelExpr::Join { .. }));
    }
}
