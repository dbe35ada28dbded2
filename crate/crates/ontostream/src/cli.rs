//! The command-line surface: validate, rewrite, unfold, explain, ingest,
//! run, and bench.
//!
//! Exit codes are part of the contract: 0 success, 1 semantic error
//! (failed validation, unsatisfiable input, unmapped predicates, engine
//! errors), 2 parse error with a location.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use ontostream_core::engine::{EngineConfig, Metrics, SourceBinding, WindowAssigner, WindowStore};
use ontostream_core::ir::Database;
use ontostream_core::rewrite::{rewrite, Vocabulary};
use ontostream_core::starql::{compile, static_conjunctive_query, validate};

use crate::bench::{run_suite, BenchConfig, BenchQuery, BenchSuite};
use crate::files;
use crate::parallel::run_parallel;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SEMANTIC: i32 = 1;
pub const EXIT_PARSE: i32 = 2;

#[derive(Parser)]
#[command(
    name = "ontostream",
    about = "Ontology-mediated analytical queries over live and archived streams"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Check the syntactic restrictions and satisfiability of an ontology
    /// and dataset.
    Validate {
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Print the rewriting of the query's static pattern, one disjunct
    /// per line.
    Rewrite {
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        mappings: PathBuf,
    },
    /// Print the unfolded static and streaming operator trees.
    Unfold {
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        mappings: PathBuf,
    },
    /// Print the full compiled plan.
    Explain {
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        mappings: PathBuf,
    },
    /// Archive a stream CSV into a window store with signatures.
    Ingest {
        /// `name=path` of the stream CSV.
        #[arg(long)]
        stream: String,
        /// Window range, e.g. `60sec`.
        #[arg(long)]
        range: String,
        /// Window slide, e.g. `60sec`.
        #[arg(long)]
        slide: String,
        /// Tick-grid anchor in ms since epoch.
        #[arg(long, default_value_t = 0)]
        anchor: i64,
        /// Output store directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compile and execute a query over replayed streams.
    Run {
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        mappings: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        query: PathBuf,
        /// `name=path[,setback=DUR]`, repeatable.
        #[arg(long = "stream")]
        streams: Vec<String>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// `on` or `off`.
        #[arg(long, default_value = "on")]
        mws: String,
        #[arg(long, default_value_t = ontostream_core::engine::DEFAULT_PROBE_THRESHOLD)]
        index_threshold: u64,
        /// Result sink; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Metrics JSON-lines sink.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Reproduce the similarity benchmarks on synthetic data.
    Bench {
        /// Comma list from {pearson, avg, min}.
        #[arg(long, default_value = "pearson,avg,min")]
        suite: String,
        /// Comma list from {on, off}.
        #[arg(long, default_value = "on,off")]
        mws: String,
        /// Comma list of worker counts.
        #[arg(long, default_value = "1")]
        workers: String,
        #[arg(long, default_value_t = 10_000)]
        windows: usize,
        #[arg(long, default_value_t = 15)]
        cycles: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = ontostream_core::engine::DEFAULT_PROBE_THRESHOLD)]
        index_threshold: u64,
        /// Timing CSV sink; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
}

/// Error plus the exit code it maps to.
pub struct CliFailure {
    pub code: i32,
    pub message: String,
}

impl CliFailure {
    fn parse(message: impl Into<String>) -> Self {
        CliFailure { code: EXIT_PARSE, message: message.into() }
    }

    fn semantic(message: impl Into<String>) -> Self {
        CliFailure { code: EXIT_SEMANTIC, message: message.into() }
    }
}

impl From<files::FileError> for CliFailure {
    fn from(e: files::FileError) -> Self {
        match e {
            files::FileError::Format { .. } => CliFailure::parse(e.to_string()),
            files::FileError::Io { .. } => CliFailure::semantic(e.to_string()),
        }
    }
}

pub fn run(cli: Cli) -> Result<String, CliFailure> {
    match cli.command {
        Command::Validate { ontology, data } => cmd_validate(&ontology, &data),
        Command::Rewrite { query, ontology, mappings } => cmd_rewrite(&query, &ontology, &mappings),
        Command::Unfold { query, ontology, mappings } => cmd_unfold(&query, &ontology, &mappings),
        Command::Explain { query, ontology, mappings } => cmd_explain(&query, &ontology, &mappings),
        Command::Ingest { stream, range, slide, anchor, out } => {
            cmd_ingest(&stream, &range, &slide, anchor, &out)
        }
        Command::Run {
            ontology,
            mappings,
            data,
            query,
            streams,
            workers,
            mws,
            index_threshold,
            out,
            metrics,
        } => cmd_run(RunArgs {
            ontology,
            mappings,
            data,
            query,
            streams,
            workers,
            mws,
            index_threshold,
            out,
            metrics,
        }),
        Command::Bench {
            suite,
            mws,
            workers,
            windows,
            cycles,
            seed,
            index_threshold,
            out,
            metrics,
        } => cmd_bench(&suite, &mws, &workers, windows, cycles, seed, index_threshold, out, metrics),
    }
}

fn cmd_validate(ontology: &Path, data: &Path) -> Result<String, CliFailure> {
    let o = files::load_ontology(ontology)?;
    let d = files::load_dataset(data)?;
    let mut out = String::new();
    let report = ontostream_core::ontology::validate_ontology(&o);
    for v in &report.violations {
        out.push_str(&format!("restriction violated: {v}\n"));
    }
    let sat = ontostream_core::ontology::check_satisfiability(&o, &d);
    for v in &sat.violations {
        out.push_str(&format!("unsatisfiable: {v}\n"));
    }
    if report.is_valid() && sat.is_satisfiable() {
        out.push_str(&format!(
            "ok: {} axioms, {} assertions, satisfiable\n",
            o.axioms.len(),
            d.len()
        ));
        Ok(out)
    } else {
        Err(CliFailure::semantic(out.trim_end().to_string()))
    }
}

fn load_compile_inputs(
    query: &Path,
    ontology: &Path,
    mappings: &Path,
) -> Result<
    (
        ontostream_core::starql::StarqlQuery,
        ontostream_core::ontology::Ontology,
        ontostream_core::mapping::MappingSet,
    ),
    CliFailure,
> {
    let q = files::load_query(query)?;
    let o = files::load_ontology(ontology)?;
    let m = files::load_mappings(mappings)?;
    let report = ontostream_core::ontology::validate_ontology(&o);
    if !report.is_valid() {
        let lines: Vec<String> =
            report.violations.iter().map(|v| v.to_string()).collect();
        return Err(CliFailure::semantic(lines.join("\n")));
    }
    Ok((q, o, m))
}

fn cmd_rewrite(query: &Path, ontology: &Path, mappings: &Path) -> Result<String, CliFailure> {
    let (q, o, m) = load_compile_inputs(query, ontology, mappings)?;
    let validation = validate(&q);
    if !validation.is_valid() {
        let lines: Vec<String> = validation.violations.iter().map(|v| v.to_string()).collect();
        return Err(CliFailure::semantic(lines.join("\n")));
    }
    let cq = static_conjunctive_query(&q, &o, &m)
        .map_err(|e| CliFailure::semantic(e.to_string()))?;
    let Some(cq) = cq else {
        return Ok(String::from("no static pattern\n"));
    };
    let mut vocab = Vocabulary::from_ontology(&o);
    vocab.merge(&m.static_vocabulary());
    let ucq = rewrite(&cq, &o, &vocab).map_err(|e| CliFailure::semantic(e.to_string()))?;
    let mut out = String::new();
    for d in &ucq.disjuncts {
        out.push_str(&format!("{d}\n"));
    }
    Ok(out)
}

fn cmd_unfold(query: &Path, ontology: &Path, mappings: &Path) -> Result<String, CliFailure> {
    let (q, o, m) = load_compile_inputs(query, ontology, mappings)?;
    let plan = compile(&q, &o, &m).map_err(|e| CliFailure::semantic(compile_error_text(&e)))?;
    let mut out = String::new();
    match &plan.static_plan {
        Some(p) => {
            out.push_str("static:\n");
            out.push_str(&p.explain());
        }
        None => out.push_str("static: none\n"),
    }
    match &plan.stream_plan {
        Some(p) => {
            out.push_str("stream:\n");
            out.push_str(&p.explain());
        }
        None => out.push_str("stream: none\n"),
    }
    Ok(out)
}

fn cmd_explain(query: &Path, ontology: &Path, mappings: &Path) -> Result<String, CliFailure> {
    let (q, o, m) = load_compile_inputs(query, ontology, mappings)?;
    let plan = compile(&q, &o, &m).map_err(|e| CliFailure::semantic(compile_error_text(&e)))?;
    Ok(plan.explain())
}

fn compile_error_text(e: &ontostream_core::starql::CompileError) -> String {
    match e {
        ontostream_core::starql::CompileError::Invalid(report) => {
            let lines: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            lines.join("\n")
        }
        other => other.to_string(),
    }
}

pub fn parse_duration_arg(text: &str) -> Result<i64, CliFailure> {
    let split = text.find(|c: char| !c.is_ascii_digit()).unwrap_or(text.len());
    let (digits, unit) = text.split_at(split);
    let value: i64 = digits
        .parse()
        .map_err(|_| CliFailure::parse(format!("bad duration `{text}`")))?;
    if unit.is_empty() {
        return Ok(value); // bare milliseconds
    }
    ontostream_core::starql::token::duration_to_ms(value, unit)
        .ok_or_else(|| CliFailure::parse(format!("unknown time unit in `{text}`")))
}

fn cmd_ingest(
    stream: &str,
    range: &str,
    slide: &str,
    anchor: i64,
    out: &Path,
) -> Result<String, CliFailure> {
    let (name, path) = stream
        .split_once('=')
        .ok_or_else(|| CliFailure::parse("--stream must be name=path"))?;
    let (measurements, malformed) = files::load_stream_lenient(Path::new(path))?;
    if measurements.is_empty() {
        files::save_store(out, &WindowStore::default())?;
        return Ok(format!("warning: stream `{name}` is empty; wrote an empty store\n"));
    }
    let assigner = WindowAssigner {
        range_ms: parse_duration_arg(range)?,
        slide_ms: parse_duration_arg(slide)?,
        anchor_ms: anchor,
        set_back_ms: 0,
        lateness_ms: 0,
    };
    if assigner.slide_ms <= 0 {
        return Err(CliFailure::semantic("slide must be positive"));
    }
    let mut metrics = Metrics::default();
    let store = WindowStore::archive(&measurements, &assigner, &mut metrics);
    files::save_store(out, &store)?;
    let mut means: Vec<f64> = store.records.iter().map(|r| r.signature.mean).collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let summary = if means.is_empty() {
        String::from("no windows archived")
    } else {
        format!(
            "{} windows archived, signature means in [{:.3}, {:.3}]",
            store.len(),
            means[0],
            means[means.len() - 1]
        )
    };
    Ok(format!(
        "{summary}; rejected {malformed} malformed and {} late rows; {} empty windows skipped\n",
        metrics.rejected_late, metrics.empty_windows
    ))
}

struct RunArgs {
    ontology: PathBuf,
    mappings: PathBuf,
    data: PathBuf,
    query: PathBuf,
    streams: Vec<String>,
    workers: usize,
    mws: String,
    index_threshold: u64,
    out: Option<PathBuf>,
    metrics: Option<PathBuf>,
}

fn parse_mws_flag(s: &str) -> Result<bool, CliFailure> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(CliFailure::parse(format!("--mws must be on or off, got `{other}`"))),
    }
}

fn cmd_run(args: RunArgs) -> Result<String, CliFailure> {
    if args.workers < 1 {
        return Err(CliFailure::semantic("--workers must be at least 1"));
    }
    let q = files::load_query(&args.query)?;
    let o = files::load_ontology(&args.ontology)?;
    let m = files::load_mappings(&args.mappings)?;
    let d = files::load_dataset(&args.data)?;
    let report = ontostream_core::ontology::validate_ontology(&o);
    if !report.is_valid() {
        return Err(CliFailure::semantic("ontology violates the syntactic restrictions"));
    }
    let mut plan = compile(&q, &o, &m).map_err(|e| CliFailure::semantic(compile_error_text(&e)))?;

    let mut bindings: BTreeMap<String, SourceBinding> = BTreeMap::new();
    for spec in &args.streams {
        let mut parts = spec.split(',');
        let name_path = parts.next().unwrap_or_default();
        let (name, path) = name_path
            .split_once('=')
            .ok_or_else(|| CliFailure::parse(format!("--stream `{spec}` must be name=path")))?;
        for extra in parts {
            let (key, value) = extra
                .split_once('=')
                .ok_or_else(|| CliFailure::parse(format!("bad stream option `{extra}`")))?;
            match key {
                "setback" => {
                    let ms = parse_duration_arg(value)?;
                    match plan.sources.iter_mut().find(|s| s.name == name) {
                        Some(src) => src.set_back_ms = ms,
                        None => {
                            return Err(CliFailure::semantic(format!(
                                "query declares no stream `{name}`"
                            )))
                        }
                    }
                }
                other => {
                    return Err(CliFailure::parse(format!("unknown stream option `{other}`")))
                }
            }
        }
        let measurements = files::load_stream(Path::new(path))?;
        bindings.insert(name.to_string(), SourceBinding::Live(measurements));
    }

    let mut vocab = Vocabulary::from_ontology(&o);
    vocab.merge(&m.static_vocabulary());
    let db = Database::from_dataset(&d, &vocab);
    let config = EngineConfig {
        mws: parse_mws_flag(&args.mws)?,
        index_threshold: args.index_threshold,
        lateness_ms: 0,
    };
    let outcome = run_parallel(&plan, &db, bindings, config, args.workers)
        .map_err(|e| CliFailure::semantic(e.to_string()))?;

    let rendered = files::render_rows(&outcome.rows, &plan.output);
    if let Some(path) = &args.metrics {
        files::write_metrics(path, &outcome.metrics, &outcome.worker_ms)?;
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, &rendered)
                .map_err(|e| CliFailure::semantic(format!("{}: {e}", path.display())))?;
            Ok(format!("{} rows -> {}\n", outcome.rows.len(), path.display()))
        }
        None => Ok(rendered),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    suite: &str,
    mws: &str,
    workers: &str,
    windows: usize,
    cycles: usize,
    seed: u64,
    index_threshold: u64,
    out: Option<PathBuf>,
    metrics_path: Option<PathBuf>,
) -> Result<String, CliFailure> {
    let queries: Vec<BenchQuery> = suite
        .split(',')
        .map(|s| {
            BenchQuery::parse(s.trim())
                .ok_or_else(|| CliFailure::parse(format!("unknown bench query `{s}`")))
        })
        .collect::<Result<_, _>>()?;
    let mws_modes: Vec<bool> = mws
        .split(',')
        .map(|s| parse_mws_flag(s.trim()))
        .collect::<Result<_, _>>()?;
    let worker_counts: Vec<usize> = workers
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| CliFailure::parse(format!("bad worker count `{s}`")))
        })
        .collect::<Result<_, _>>()?;

    let bench = BenchSuite {
        queries,
        mws_modes,
        worker_counts,
        config: BenchConfig { windows, cycles, seed, index_threshold, ..BenchConfig::default() },
    };
    let (cells, csv) = run_suite(&bench);

    if let Some(path) = &metrics_path {
        let mut merged = Metrics::default();
        for c in &cells {
            merged.merge(&c.metrics);
        }
        files::write_metrics(path, &merged, &[])?;
    }
    match &out {
        Some(path) => {
            std::fs::write(path, &csv)
                .map_err(|e| CliFailure::semantic(format!("{}: {e}", path.display())))?;
            Ok(format!("{} cells -> {}\n", cells.len(), path.display()))
        }
        None => Ok(csv),
    }
}
