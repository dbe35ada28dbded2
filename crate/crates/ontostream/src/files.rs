//! File formats: loading the text inputs, replayed stream CSVs, the
//! archived-store directory layout, result sinks, and the metrics dump.
//!
//! Store layout: a directory holding `manifest.csv` (one row per archived
//! window: id, sensor, bounds, and the signature fields) and
//! `measurements.csv` (the raw blocks, one row per sample keyed by window
//! and sensor). Writing is deterministic, so re-ingesting identical input
//! produces byte-identical files.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use ontostream_core::engine::{
    Measurement, Metrics, MwsSignature, OutputRow, WindowBlock, WindowRecord, WindowStore,
};
use ontostream_core::mapping::{parse_mappings, MappingSet};
use ontostream_core::ontology::{parse_dataset, parse_ontology, Dataset, Ontology};
use ontostream_core::starql::{parse, StarqlQuery};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
}

impl FileError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        FileError::Io { path: path.display().to_string(), source }
    }

    fn format(path: &Path, line: usize, message: impl Into<String>) -> Self {
        FileError::Format { path: path.display().to_string(), line, message: message.into() }
    }
}

fn read(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(|e| FileError::io(path, e))
}

pub fn load_ontology(path: &Path) -> Result<Ontology, FileError> {
    let text = read(path)?;
    parse_ontology(&text).map_err(|e| FileError::format(path, e.line, e.message))
}

pub fn load_dataset(path: &Path) -> Result<Dataset, FileError> {
    let text = read(path)?;
    parse_dataset(&text).map_err(|e| FileError::format(path, e.line, e.message))
}

pub fn load_mappings(path: &Path) -> Result<MappingSet, FileError> {
    let text = read(path)?;
    parse_mappings(&text).map_err(|e| FileError::format(path, e.line, e.message))
}

pub fn load_query(path: &Path) -> Result<StarqlQuery, FileError> {
    let text = read(path)?;
    parse(&text).map_err(|e| {
        FileError::format(path, e.line, format!("col {}: {}", e.col, e.message))
    })
}

/// Stream CSV for archival: malformed rows are dropped and counted
/// instead of failing the whole ingest.
pub fn load_stream_lenient(path: &Path) -> Result<(Vec<Measurement>, usize), FileError> {
    let text = read(path)?;
    let mut out = Vec::new();
    let mut rejected = 0usize;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("time_ms") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
        let parsed = (|| -> Option<Measurement> {
            if fields.len() != 3 {
                return None;
            }
            let time_ms: i64 = fields[0].parse().ok()?;
            let value: f64 = fields[2].parse().ok()?;
            if !value.is_finite() || fields[1].is_empty() {
                return None;
            }
            Some(Measurement { sensor: fields[1].to_string(), time_ms, value })
        })();
        match parsed {
            Some(m) => out.push(m),
            None => rejected += 1,
        }
    }
    Ok((out, rejected))
}

/// Stream CSV: `time_ms,sensor_id,value`, optional header.
pub fn load_stream(path: &Path) -> Result<Vec<Measurement>, FileError> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
        if fields[0] == "time_ms" {
            continue;
        }
        if fields.len() != 3 {
            return Err(FileError::format(path, line_no, "expected time_ms,sensor_id,value"));
        }
        let time_ms: i64 = fields[0]
            .parse()
            .map_err(|_| FileError::format(path, line_no, "bad time_ms"))?;
        let value: f64 = fields[2]
            .parse()
            .map_err(|_| FileError::format(path, line_no, "bad value"))?;
        if !value.is_finite() {
            return Err(FileError::format(path, line_no, "non-finite value"));
        }
        out.push(Measurement { sensor: fields[1].to_string(), time_ms, value });
    }
    Ok(out)
}

pub fn write_stream(path: &Path, measurements: &[Measurement]) -> Result<(), FileError> {
    let mut text = String::from("time_ms,sensor_id,value\n");
    for m in measurements {
        text.push_str(&format!("{},{},{}\n", m.time_ms, m.sensor, m.value));
    }
    fs::write(path, text).map_err(|e| FileError::io(path, e))
}

const MANIFEST: &str = "manifest.csv";
const MEASUREMENTS: &str = "measurements.csv";

pub fn save_store(dir: &Path, store: &WindowStore) -> Result<(), FileError> {
    fs::create_dir_all(dir).map_err(|e| FileError::io(dir, e))?;
    let manifest_path = dir.join(MANIFEST);
    let mut manifest =
        String::from("wid,sensor,start_ms,end_ms,count,sum,mean,variance,min,max,norm\n");
    for r in &store.records {
        let s = &r.signature;
        manifest.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.wid, r.sensor, r.start_ms, r.end_ms, s.count, s.sum, s.mean, s.variance, s.min,
            s.max, s.norm
        ));
    }
    fs::write(&manifest_path, manifest).map_err(|e| FileError::io(&manifest_path, e))?;

    let blocks_path = dir.join(MEASUREMENTS);
    let file = fs::File::create(&blocks_path).map_err(|e| FileError::io(&blocks_path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "wid,sensor,time_ms,value").map_err(|e| FileError::io(&blocks_path, e))?;
    for b in store.blocks() {
        for (t, v) in &b.samples {
            writeln!(w, "{},{},{},{}", b.wid, b.sensor, t, v)
                .map_err(|e| FileError::io(&blocks_path, e))?;
        }
    }
    w.flush().map_err(|e| FileError::io(&blocks_path, e))
}

pub fn load_store(dir: &Path) -> Result<WindowStore, FileError> {
    let manifest_path = dir.join(MANIFEST);
    let text = read(&manifest_path)?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let line_no = idx + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(FileError::format(&manifest_path, line_no, "expected 11 columns"));
        }
        let parse_f = |s: &str| -> Result<f64, FileError> {
            s.parse().map_err(|_| FileError::format(&manifest_path, line_no, "bad number"))
        };
        records.push(WindowRecord {
            wid: f[0].parse().map_err(|_| FileError::format(&manifest_path, line_no, "bad wid"))?,
            sensor: f[1].to_string(),
            start_ms: f[2]
                .parse()
                .map_err(|_| FileError::format(&manifest_path, line_no, "bad start"))?,
            end_ms: f[3]
                .parse()
                .map_err(|_| FileError::format(&manifest_path, line_no, "bad end"))?,
            signature: MwsSignature {
                count: f[4]
                    .parse()
                    .map_err(|_| FileError::format(&manifest_path, line_no, "bad count"))?,
                sum: parse_f(f[5])?,
                mean: parse_f(f[6])?,
                variance: parse_f(f[7])?,
                min: parse_f(f[8])?,
                max: parse_f(f[9])?,
                norm: parse_f(f[10])?,
            },
        });
    }

    let blocks_path = dir.join(MEASUREMENTS);
    let text = read(&blocks_path)?;
    let mut blocks: Vec<WindowBlock> = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let line_no = idx + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(FileError::format(&blocks_path, line_no, "expected 4 columns"));
        }
        let wid: u64 =
            f[0].parse().map_err(|_| FileError::format(&blocks_path, line_no, "bad wid"))?;
        let sensor = f[1].to_string();
        let t: i64 =
            f[2].parse().map_err(|_| FileError::format(&blocks_path, line_no, "bad time"))?;
        let v: f64 =
            f[3].parse().map_err(|_| FileError::format(&blocks_path, line_no, "bad value"))?;
        match blocks.last_mut() {
            Some(b) if b.wid == wid && b.sensor == sensor => b.samples.push((t, v)),
            _ => blocks.push(WindowBlock { wid, sensor, samples: vec![(t, v)] }),
        }
    }
    Ok(WindowStore::from_parts(records, blocks))
}

/// CONSTRUCT sinks are `tick_ms,subject,concept` rows; SELECT sinks carry
/// one column per selected variable.
pub fn render_rows(rows: &[OutputRow], output: &ontostream_core::starql::ast::OutputForm) -> String {
    use ontostream_core::starql::ast::OutputForm;
    let mut out = String::new();
    match output {
        OutputForm::Construct { concept, subject_var } => {
            for row in rows {
                let subject = row
                    .bindings
                    .iter()
                    .find(|(v, _)| v == subject_var)
                    .map(|(_, s)| s.as_str())
                    .unwrap_or("");
                out.push_str(&format!("{},{},{}\n", row.tick_ms, subject, concept));
            }
        }
        OutputForm::Select { vars } => {
            out.push_str("tick_ms");
            for v in vars {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
            for row in rows {
                out.push_str(&format!("{}", row.tick_ms));
                for v in vars {
                    let value = row
                        .bindings
                        .iter()
                        .find(|(var, _)| var == v)
                        .map(|(_, s)| s.as_str())
                        .unwrap_or("");
                    out.push_str(&format!(",{value}"));
                }
                out.push('\n');
            }
        }
    }
    out
}

#[derive(serde::Serialize)]
struct MetricLine<'a> {
    counter: &'a str,
    value: u64,
}

/// JSON-lines counter dump, one object per counter, stable order.
pub fn metrics_json_lines(metrics: &Metrics, worker_ms: &[(usize, u128)]) -> String {
    let mut out = String::new();
    let pairs: [(&str, u64); 12] = [
        ("measurements_scans", metrics.measurements_scans),
        ("signature_reads", metrics.signature_reads),
        ("index_builds", metrics.index_builds),
        ("probes_indexed", metrics.probes_indexed),
        ("probes_scanned", metrics.probes_scanned),
        ("excluded_pairs", metrics.excluded_pairs),
        ("rejected_late", metrics.rejected_late),
        ("windows_assigned", metrics.windows_assigned),
        ("empty_windows", metrics.empty_windows),
        ("prefilter_pruned", metrics.prefilter_pruned),
        ("ticks", metrics.ticks),
        ("output_rows", metrics.output_rows),
    ];
    for (counter, value) in pairs {
        out.push_str(&serde_json::to_string(&MetricLine { counter, value }).unwrap());
        out.push('\n');
    }
    for (worker, ms) in worker_ms {
        out.push_str(&format!(
            "{{\"counter\":\"worker_time_ms\",\"worker\":{worker},\"value\":{ms}}}\n"
        ));
    }
    out
}

pub fn write_metrics(
    path: &Path,
    metrics: &Metrics,
    worker_ms: &[(usize, u128)],
) -> Result<(), FileError> {
    fs::write(path, metrics_json_lines(metrics, worker_ms)).map_err(|e| FileError::io(path, e))
}
