//! End-to-end execution of the running example on a hand-built corpus
//! with known correlations: the static filter keeps {s1, s2}, the Pearson
//! condition keeps {s2, s3}, so only s2 is ever emitted.

use std::collections::BTreeMap;

use ontostream_core::engine::{execute, EngineConfig, Measurement, SourceBinding};
use ontostream_core::ir::Database;
use ontostream_core::mapping::parse_mappings;
use ontostream_core::ontology::{parse_dataset, parse_ontology};
use ontostream_core::rewrite::Vocabulary;
use ontostream_core::starql::{compile, parse};

const QUERY: &str = "\
CREATE PULSE p WITH START = NOW, FREQUENCY = 10sec
CREATE STREAM out AS
CONSTRUCT GRAPH NOW { ?sensor a InCriticalMode }
FROM STATIC ONTOLOGY onto, DATA data
WHERE { ?sensor a Reliable }
FROM STREAM live [NOW - 10sec, NOW]-> 1sec
            reference 1min <-[NOW - 10sec, NOW]-> 1sec
USING PULSE p
SEQUENCE BY StandardSequencing AS seq
HAVING EXISTS i IN seq (GRAPH i { ?sensor hasValue ?y. refSensor hasValue ?z })
       HAVING PearsonCorrelation(?y, ?z) > 0.75
";

const MAPPINGS: &str = "\
map concept Reliable(x) <- scan(Reliable; x=id)
map attr testScore(x,y) <- scan(testScore; x=s, y=v)
map attr precisionScore(x,y) <- scan(precisionScore; x=s, y=v)
map stream hasValue(?s,?v) <- slice(live; s=sensor, v=value)
map stream hasValue(?s,?v) <- slice(reference; s=sensor, v=value)
";

const ONTOLOGY: &str = "\
precisionScore subattr testScore
agg:min testScore >= 0.9 sub Reliable
";

const DATASET: &str = "\
attr,s1,precisionScore,0.9
attr,s2,testScore,0.95
attr,s3,testScore,0.5
";

const START: i64 = 1_000_000;

/// Live sensors on a 1s grid offset by 500ms. s2 and s3 follow the
/// reference sawtooth exactly (r = 1.0), s1 alternates (r ≈ 0.17).
fn live_measurements() -> Vec<Measurement> {
    let mut out = Vec::new();
    for k in 0..30i64 {
        let t = START + k * 1_000 + 500;
        let saw = (k % 10) as f64;
        let alt = (k % 2) as f64;
        out.push(Measurement { sensor: "s1".into(), time_ms: t, value: alt });
        out.push(Measurement { sensor: "s2".into(), time_ms: t, value: saw });
        out.push(Measurement { sensor: "s3".into(), time_ms: t, value: saw });
    }
    out
}

/// The reference sensor, one minute in the past on the same grid.
fn reference_measurements() -> Vec<Measurement> {
    (0..30i64)
        .map(|k| Measurement {
            sensor: "refSensor".into(),
            time_ms: START - 60_000 + k * 1_000 + 500,
            value: (k % 10) as f64,
        })
        .collect()
}

fn setup() -> (
    ontostream_core::starql::ExecutablePlan,
    Database,
    BTreeMap<String, SourceBinding>,
) {
    let o = parse_ontology(ONTOLOGY).unwrap();
    let m = parse_mappings(MAPPINGS).unwrap();
    let d = parse_dataset(DATASET).unwrap();
    let q = parse(QUERY).unwrap();
    let plan = compile(&q, &o, &m).unwrap();
    let mut vocab = Vocabulary::from_ontology(&o);
    vocab.merge(&m.static_vocabulary());
    let db = Database::from_dataset(&d, &vocab);
    let mut bindings = BTreeMap::new();
    bindings.insert("live".to_string(), SourceBinding::Live(live_measurements()));
    bindings.insert("reference".to_string(), SourceBinding::Live(reference_measurements()));
    (plan, db, bindings)
}

#[test]
fn only_the_reliable_correlated_sensor_is_emitted() {
    let (plan, db, bindings) = setup();
    let outcome = execute(&plan, &db, bindings, EngineConfig::default()).unwrap();
    assert!(!outcome.rows.is_empty(), "expected qualifying ticks");
    for row in &outcome.rows {
        assert_eq!(row.bindings, vec![("sensor".to_string(), "s2".to_string())]);
        let r = row.coefficient.expect("pearson value recorded");
        assert!((r - 1.0).abs() < 1e-9);
    }
    // NOW anchors at the first live measurement (START + 500); the first
    // tick's windows are one sample short of aligning, so ticks 1 and 2
    // qualify.
    let ticks: Vec<i64> = outcome.rows.iter().map(|r| r.tick_ms).collect();
    assert_eq!(ticks, [START + 10_500, START + 20_500]);
}

#[test]
fn execution_is_deterministic() {
    let (plan, db, bindings) = setup();
    let a = execute(&plan, &db, bindings.clone(), EngineConfig::default()).unwrap();
    let b = execute(&plan, &db, bindings, EngineConfig::default()).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.metrics, b.metrics);
}

#[test]
fn signature_and_direct_modes_emit_identical_rows() {
    let (plan, db, bindings) = setup();
    let with_mws = execute(
        &plan,
        &db,
        bindings.clone(),
        EngineConfig { mws: true, ..EngineConfig::default() },
    )
    .unwrap();
    let without = execute(
        &plan,
        &db,
        bindings,
        EngineConfig { mws: false, ..EngineConfig::default() },
    )
    .unwrap();
    assert_eq!(with_mws.rows, without.rows);
    // The runs differ observably in how they touched the archive.
    assert!(with_mws.metrics.signature_reads > 0);
    assert_eq!(without.metrics.signature_reads, 0);
}

/// Cosine similarity against the archived window, with the archived norm
/// coming from the signature: the sawtooth sensors match the reference
/// exactly (cosine 1), the alternating sensor stays below 0.99.
#[test]
fn cosine_against_archived_window() {
    let (_, db, bindings) = setup();
    let query = QUERY.replace(
        "PearsonCorrelation(?y, ?z) > 0.75",
        "cosineSimilarity(?y, ?z) >= 0.99",
    );
    let o = parse_ontology(ONTOLOGY).unwrap();
    let m = parse_mappings(MAPPINGS).unwrap();
    let plan = compile(&parse(&query).unwrap(), &o, &m).unwrap();
    let outcome = execute(&plan, &db, bindings, EngineConfig::default()).unwrap();
    assert!(!outcome.rows.is_empty());
    for row in &outcome.rows {
        assert_eq!(row.bindings, vec![("sensor".to_string(), "s2".to_string())]);
        assert!((row.coefficient.unwrap() - 1.0).abs() < 1e-9);
    }
    assert!(outcome.metrics.signature_reads > 0);
}

/// A mixed condition evaluates its signature conjunct first: when the
/// average filter rejects the archived window, the raw block is never
/// fetched for that pair.
#[test]
fn signature_prefilter_skips_raw_access() {
    let (_, db, bindings) = setup();
    // Reference values are non-negative, so a negative average bound
    // prunes every candidate before the Pearson cross term runs.
    let query = QUERY.replace(
        "PearsonCorrelation(?y, ?z) > 0.75",
        "avg(?z) < -1 AND PearsonCorrelation(?y, ?z) > 0.75",
    );
    let o = parse_ontology(ONTOLOGY).unwrap();
    let m = parse_mappings(MAPPINGS).unwrap();
    let plan = compile(&parse(&query).unwrap(), &o, &m).unwrap();
    let outcome = execute(&plan, &db, bindings, EngineConfig::default()).unwrap();
    assert!(outcome.rows.is_empty());
    assert!(outcome.metrics.prefilter_pruned > 0);
    assert_eq!(outcome.metrics.measurements_scans, 0, "pruned pairs must not fetch raw blocks");

    // Loosening the bound lets the Pearson conjunct run and qualify s2.
    let (_, db2, bindings2) = setup();
    let query = QUERY.replace(
        "PearsonCorrelation(?y, ?z) > 0.75",
        "avg(?z) < 100 AND PearsonCorrelation(?y, ?z) > 0.75",
    );
    let plan = compile(&parse(&query).unwrap(), &o, &m).unwrap();
    let outcome = execute(&plan, &db2, bindings2, EngineConfig::default()).unwrap();
    assert!(outcome.rows.iter().all(|r| r.bindings[0].1 == "s2"));
    assert!(!outcome.rows.is_empty());
    assert!(outcome.metrics.measurements_scans > 0);
    let _ = db;
}

/// Per-state comparisons fold under the quantifier: EXISTS keeps sensors
/// with any reading above the bound, FORALL only those never at or above
/// it.
#[test]
fn per_state_quantifiers() {
    let mappings = parse_mappings("map stream hasValue(?s,?v) <- slice(live; s=sensor, v=value)")
        .unwrap();
    let o = parse_ontology("").unwrap();
    let measurements: Vec<Measurement> = (0..10i64)
        .flat_map(|k| {
            let t = 1_000 * k + 500;
            vec![
                Measurement { sensor: "spiky".into(), time_ms: t, value: if k == 0 { 99.0 } else { 1.0 } },
                Measurement { sensor: "flat".into(), time_ms: t, value: 1.0 },
            ]
        })
        .collect();
    let run = |text: &str| -> Vec<String> {
        let q = parse(text).unwrap();
        let plan = compile(&q, &o, &mappings).unwrap();
        let db = Database::default();
        let mut bindings = BTreeMap::new();
        bindings.insert("live".to_string(), SourceBinding::Live(measurements.clone()));
        let outcome = execute(&plan, &db, bindings, EngineConfig::default()).unwrap();
        let mut sensors: Vec<String> = outcome
            .rows
            .iter()
            .flat_map(|r| r.bindings.iter().map(|(_, v)| v.clone()))
            .collect();
        sensors.sort();
        sensors.dedup();
        sensors
    };
    let exists = run(
        "CREATE PULSE p WITH START = NOW, FREQUENCY = 10sec\n\
         CREATE STREAM out AS SELECT ?s\n\
         FROM STREAM live [NOW - 9sec, NOW]-> 1sec\n\
         USING PULSE p\n\
         SEQUENCE BY StandardSequencing AS seq\n\
         HAVING EXISTS i IN seq (GRAPH i { ?s hasValue ?y }) HAVING ?y > 50",
    );
    assert_eq!(exists, ["spiky"]);
    let forall = run(
        "CREATE PULSE p WITH START = NOW, FREQUENCY = 10sec\n\
         CREATE STREAM out AS SELECT ?s\n\
         FROM STREAM live [NOW - 9sec, NOW]-> 1sec\n\
         USING PULSE p\n\
         SEQUENCE BY StandardSequencing AS seq\n\
         HAVING FORALL i IN seq (GRAPH i { ?s hasValue ?y }) HAVING ?y < 50",
    );
    assert_eq!(forall, ["flat"]);
}

/// Adjacent-state patterns self-join the stream with an index offset:
/// strictly increasing series satisfy `?z > ?y` at every state pair.
#[test]
fn adjacent_state_offsets_align_series() {
    let mappings = parse_mappings("map stream hasValue(?s,?v) <- slice(live; s=sensor, v=value)")
        .unwrap();
    let o = parse_ontology("").unwrap();
    let measurements: Vec<Measurement> = (0..10i64)
        .flat_map(|k| {
            let t = 1_000 * k + 500;
            vec![
                Measurement { sensor: "rising".into(), time_ms: t, value: k as f64 },
                Measurement { sensor: "falling".into(), time_ms: t, value: -(k as f64) },
            ]
        })
        .collect();
    let q = parse(
        "CREATE PULSE p WITH START = NOW, FREQUENCY = 9sec\n\
         CREATE STREAM out AS SELECT ?s\n\
         FROM STREAM live [NOW - 9sec, NOW]-> 1sec\n\
         USING PULSE p\n\
         SEQUENCE BY StandardSequencing AS seq\n\
         HAVING FORALL i IN seq (GRAPH i { ?s hasValue ?y } AND GRAPH i + 1 { ?s hasValue ?z })\n\
                HAVING ?z > ?y",
    )
    .unwrap();
    let plan = compile(&q, &o, &mappings).unwrap();
    let db = Database::default();
    let mut bindings = BTreeMap::new();
    bindings.insert("live".to_string(), SourceBinding::Live(measurements));
    let outcome = execute(&plan, &db, bindings, EngineConfig::default()).unwrap();
    // The first tick holds a single state, whose empty pair sequence is
    // vacuously true for both sensors; the full window separates them.
    let last_tick = outcome.rows.iter().map(|r| r.tick_ms).max().unwrap();
    let sensors: Vec<&str> = outcome
        .rows
        .iter()
        .filter(|r| r.tick_ms == last_tick)
        .flat_map(|r| r.bindings.iter().map(|(_, v)| v.as_str()))
        .collect();
    assert!(sensors.contains(&"rising"));
    assert!(!sensors.contains(&"falling"));
}

#[test]
fn empty_static_answers_suppress_all_output() {
    let (plan, db, mut bindings) = setup();
    // A dataset in which nobody is reliable.
    let o = parse_ontology(ONTOLOGY).unwrap();
    let m = parse_mappings(MAPPINGS).unwrap();
    let d = parse_dataset("attr,s1,testScore,0.1\n").unwrap();
    let mut vocab = Vocabulary::from_ontology(&o);
    vocab.merge(&m.static_vocabulary());
    let empty_db = Database::from_dataset(&d, &vocab);
    let outcome = execute(
        &plan,
        &empty_db,
        std::mem::take(&mut bindings),
        EngineConfig::default(),
    )
    .unwrap();
    assert!(outcome.rows.is_empty());
    let _ = db;
}
