//! `nestq` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data, schema or I/O error,
//! 3 engine/oracle mismatch.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nestq::engine::{summarize, write_report};
use nestq::model::{validate_event, write_jsonl, JsonlReader};
use nestq::{
    bench, execute, generate, ingest_jsonl, oracle_run, BenchConfig, DatasetFile, Error, GenConfig,
    HistogramSpec, Projection, Query, QueryConfig, QueryId, ScaleFactor, DEFAULT_ROW_GROUP_SIZE,
};

#[derive(Parser)]
#[command(
    name = "nestq",
    version,
    about = "Columnar queries over nested particle-physics events"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded synthetic events as JSON lines.
    Gen(GenArgs),
    /// Convert JSON-lines events into the native columnar format.
    Ingest(IngestArgs),
    /// Run one benchmark query and write its histogram(s) as CSV.
    Run(RunArgs),
    /// Sweep scale factors and write a timing report.
    Bench(BenchArgs),
    /// Check a native (.nf2) or JSON-lines dataset.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of events.
    #[arg(long, default_value_t = 10_000)]
    events: u64,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mean jet multiplicity (Poisson).
    #[arg(long, default_value_t = 6.0)]
    lambda_jets: f64,
    /// Mean muon multiplicity (Poisson).
    #[arg(long, default_value_t = 2.0)]
    lambda_muons: f64,
    /// Mean electron multiplicity (Poisson).
    #[arg(long, default_value_t = 1.0)]
    lambda_electrons: f64,
    /// Output JSON-lines file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    /// Input JSON-lines file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output native file.
    #[arg(long)]
    out: PathBuf,
    /// Events per row group.
    #[arg(long, default_value_t = DEFAULT_ROW_GROUP_SIZE)]
    row_group_size: usize,
}

#[derive(Args)]
struct RunArgs {
    /// Query: q1..q8, or q6a / q6b for a single Q6 plot.
    #[arg(long)]
    query: String,
    /// Native dataset.
    #[arg(long)]
    input: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Histogram lower edge [default: per query].
    #[arg(long)]
    lo: Option<f64>,
    /// Histogram upper edge [default: per query].
    #[arg(long)]
    hi: Option<f64>,
    /// Number of bins [default: per query].
    #[arg(long)]
    bins: Option<usize>,
    /// Also run the row-at-a-time oracle and fail with exit code 3 on any difference.
    #[arg(long)]
    oracle: bool,
    /// Output CSV. For q6 two files are written, `<stem>.q6a.csv` and `<stem>.q6b.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Base native dataset.
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated queries, or `all`.
    #[arg(long, default_value = "all")]
    queries: String,
    /// Smallest scale-factor exponent (sf = 2^i, i in [-16, 7]).
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    sf_min: i32,
    /// Largest scale-factor exponent.
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    sf_max: i32,
    /// Runs per (query, sf) cell.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Events per row group of the scaled datasets.
    #[arg(long, default_value_t = DEFAULT_ROW_GROUP_SIZE)]
    row_group_size: usize,
    /// Report CSV, one row per run.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Dataset; `.jsonl` files are parsed as JSON lines, anything else as native.
    #[arg(long)]
    input: PathBuf,
}

enum Failure {
    Usage(String),
    Data(Error),
    Mismatch(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::UnknownQuery(_)
            | Error::InvalidScaleFactor(_)
            | Error::InvalidHistogramSpec(_) => Failure::Usage(e.to_string()),
            e => Failure::Data(e),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Mismatch(msg)) => {
            eprintln!("oracle mismatch: {msg}");
            ExitCode::from(3)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| {
        Failure::Data(Error::Io {
            path: path.to_owned(),
            source: e,
        })
    })
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    let cfg = GenConfig {
        seed: a.seed,
        num_events: a.events,
        lambda_jets: a.lambda_jets,
        lambda_muons: a.lambda_muons,
        lambda_electrons: a.lambda_electrons,
        ..GenConfig::default()
    };
    let events = generate(&cfg)?;
    let mut out = create(&a.out)?;
    let mut n = 0;
    for e in events {
        n += write_jsonl(&mut out, [&e])?;
    }
    out.flush().map_err(Error::from)?;
    println!("{n} events");
    Ok(())
}

fn cmd_ingest(a: IngestArgs) -> CmdResult {
    let summary = ingest_jsonl(&a.input, &a.out, a.row_group_size)?;
    println!("{} events", summary.events);
    println!("{} row groups", summary.row_groups);
    Ok(())
}

/// Pipeline and plots selected by a `--query` value.
fn parse_query(s: &str) -> Result<(Query, Vec<QueryId>), Failure> {
    if let Ok(q) = s.parse::<Query>() {
        return Ok((q, q.sinks().to_vec()));
    }
    let id: QueryId = s.parse()?;
    Ok((id.query(), vec![id]))
}

fn output_paths(out: &Path, sinks: &[QueryId]) -> Vec<PathBuf> {
    if sinks.len() == 1 {
        return vec![out.to_owned()];
    }
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    sinks
        .iter()
        .map(|id| out.with_file_name(format!("{stem}.{id}.csv")))
        .collect()
}

fn cmd_run(a: RunArgs) -> CmdResult {
    let (query, sinks) = parse_query(&a.query)?;
    let mut cfg = QueryConfig::default();
    for &id in &sinks {
        let d = cfg.specs.get(id);
        let spec = HistogramSpec::new(
            a.lo.unwrap_or(d.lo),
            a.hi.unwrap_or(d.hi),
            a.bins.unwrap_or(d.nbins),
        )?;
        cfg.specs.set(id, spec);
    }
    let dataset = DatasetFile::open(&a.input)?;
    let (result, metrics) = execute(&dataset, query, a.threads, &cfg)?;

    for (&id, path) in sinks.iter().zip(output_paths(&a.out, &sinks)) {
        let h = result.histogram(id).expect("pipeline fills its sinks");
        let mut out = create(&path)?;
        out.write_all(h.to_csv().as_bytes()).map_err(Error::from)?;
        out.flush().map_err(Error::from)?;
        println!("{id}: {} entries -> {}", h.total(), path.display());
    }
    println!("selected events: {}", result.selected_event_count());
    println!("ops: {}", result.total_ops());
    println!("{metrics}");

    if a.oracle {
        let events = dataset.read_all_events()?;
        let oracle = oracle_run(query, &events, &cfg);
        for &id in &sinks {
            if result.histogram(id) != oracle.histogram(id) {
                return Err(Failure::Mismatch(format!(
                    "{id} histogram differs from the oracle"
                )));
            }
        }
        if result.total_ops() != oracle.total_ops() {
            return Err(Failure::Mismatch(format!(
                "{query} op count {} differs from the oracle's {}",
                result.total_ops(),
                oracle.total_ops()
            )));
        }
        println!("oracle: identical");
    }
    Ok(())
}

fn parse_queries(s: &str) -> Result<Vec<Query>, Failure> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Query::ALL.to_vec());
    }
    let mut qs = Vec::new();
    for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
        let q: Query = name.parse()?;
        if !qs.contains(&q) {
            qs.push(q);
        }
    }
    if qs.is_empty() {
        return Err(Failure::Usage("no queries given".into()));
    }
    Ok(qs)
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    let queries = parse_queries(&a.queries)?;
    for exp in [a.sf_min, a.sf_max] {
        ScaleFactor::from_exponent(exp)?;
    }
    if a.repeats == 0 {
        return Err(Failure::Usage("--repeats must be at least 1".into()));
    }
    let cfg = BenchConfig {
        queries,
        sf_min_exponent: a.sf_min,
        sf_max_exponent: a.sf_max,
        threads: a.threads,
        repeats: a.repeats,
        row_group_size: a.row_group_size,
        query_config: QueryConfig::default(),
    };
    let base = DatasetFile::open(&a.input)?;
    let scratch = tempfile::tempdir().map_err(Error::from)?;
    let rows = bench(&base, &cfg, scratch.path())?;
    write_report(create(&a.report)?, &rows)?;
    for s in summarize(&rows) {
        println!(
            "{} sf={} events={} median_wall_s={:.6} median_cpu_s={:.6} wall_us_per_event={:.4} bytes_per_event={:.1}",
            s.query,
            s.sf.value(),
            s.events,
            s.median_wall_s,
            s.median_cpu_s,
            s.wall_s_per_event * 1e6,
            s.bytes_per_event
        );
    }
    println!("{} report rows -> {}", rows.len(), a.report.display());
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> CmdResult {
    let is_jsonl = a
        .input
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("jsonl"));
    let events = if is_jsonl {
        let file = File::open(&a.input).map_err(|e| Error::Io {
            path: a.input.clone(),
            source: e,
        })?;
        let mut n = 0u64;
        for event in JsonlReader::new(BufReader::new(file)) {
            event?;
            n += 1;
        }
        n
    } else {
        let dataset = DatasetFile::open(&a.input)?;
        dataset.verify_checksum()?;
        let all = Projection::all();
        let mut n = 0u64;
        for i in 0..dataset.num_row_groups() {
            let rg = dataset.read_row_group(i, &all)?;
            rg.check_invariants()?;
            for e in rg.to_events()? {
                if let Err(v) = validate_event(&e) {
                    return Err(Failure::Data(Error::InvalidEvent {
                        line: 0,
                        event_id: v.event_id,
                        field: v.field,
                        rule: v.rule,
                    }));
                }
                n += 1;
            }
        }
        println!("{} row groups", dataset.num_row_groups());
        n
    };
    println!("{events} events valid");
    Ok(())
}
