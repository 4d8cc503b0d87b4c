//! Parallel execution over row groups.
//!
//! Row groups are the unit of work: a rayon pool of `threads` workers
//! steals row-group indices, each task reads its projected columns and fills
//! a private partial, and partials are merged in ascending row-group order.
//! Work inside a row group is never split.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::columnar::{replicate_scale_to_path, DatasetFile, ScaleFactor};
use crate::error::{Error, Result};
use crate::queries::{execute_row_group, Partial, Query, QueryConfig, QueryResult};

pub const BENCH_REPORT_HEADER: &str =
    "query,sf,threads,repeat,wall_s,cpu_s,bytes_scanned,events,events_per_s";

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub query: Query,
    pub dataset: PathBuf,
    pub threads: usize,
    pub query_config: QueryConfig,
    /// Applied by materializing a scaled copy next to the system temp dir.
    pub scale: Option<ScaleFactor>,
    /// Row group size of the scaled copy.
    pub scaled_row_group_size: usize,
    pub repeats: usize,
}

impl RunConfig {
    pub fn new(query: Query, dataset: impl Into<PathBuf>) -> Self {
        Self {
            query,
            dataset: dataset.into(),
            threads: 1,
            query_config: QueryConfig::default(),
            scale: None,
            scaled_row_group_size: crate::columnar::DEFAULT_ROW_GROUP_SIZE,
            repeats: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub wall_s: f64,
    /// Thread CPU time summed over every row-group task.
    pub cpu_s: f64,
    pub bytes_scanned: u64,
    pub events_processed: u64,
    pub row_groups: usize,
    pub threads: usize,
    /// Distinct pool workers that processed at least one row group.
    pub workers_used: usize,
}

impl RunMetrics {
    pub fn events_per_s(&self) -> f64 {
        if self.wall_s > 0.0 {
            self.events_processed as f64 / self.wall_s
        } else {
            0.0
        }
    }

    /// Scan throughput per configured worker.
    pub fn bytes_per_s_per_worker(&self) -> f64 {
        if self.wall_s > 0.0 {
            self.bytes_scanned as f64 / self.wall_s / self.threads as f64
        } else {
            0.0
        }
    }

    pub fn bytes_per_event(&self) -> f64 {
        if self.events_processed > 0 {
            self.bytes_scanned as f64 / self.events_processed as f64
        } else {
            0.0
        }
    }
}

impl fmt::Display for RunMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "wall {:.6} s, cpu {:.6} s, {} events, {} row groups, {} bytes scanned ({:.1} B/event), {:.0} events/s, {} of {} workers busy",
            self.wall_s,
            self.cpu_s,
            self.events_processed,
            self.row_groups,
            self.bytes_scanned,
            self.bytes_per_event(),
            self.events_per_s(),
            self.workers_used,
            self.threads,
        )
    }
}

fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: clock_gettime only writes into the timespec we own.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

/// Runs `query` over every row group of `dataset` on `threads` workers.
pub fn execute(
    dataset: &DatasetFile,
    query: Query,
    threads: usize,
    cfg: &QueryConfig,
) -> Result<(QueryResult, RunMetrics)> {
    if threads == 0 {
        return Err(Error::Config("threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let projection = query.projection();
    let n = dataset.num_row_groups();

    let start = Instant::now();
    let tasks: Vec<Result<(Partial, f64, Option<usize>)>> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .with_max_len(1)
            .map(|index| {
                let cpu0 = thread_cpu_seconds();
                let partial = dataset
                    .read_row_group(index, &projection)
                    .and_then(|rg| execute_row_group(query, &rg, cfg))
                    .map_err(|e| Error::RowGroupRead {
                        path: dataset.path().to_path_buf(),
                        index,
                        message: e.to_string(),
                    })?;
                Ok((
                    partial,
                    thread_cpu_seconds() - cpu0,
                    rayon::current_thread_index(),
                ))
            })
            .collect()
    });
    let wall_s = start.elapsed().as_secs_f64();

    let mut partials = Vec::with_capacity(n);
    let mut cpu_s = 0.0;
    let mut workers = BTreeSet::new();
    for task in tasks {
        let (partial, cpu, worker) = task?;
        partials.push(partial);
        cpu_s += cpu;
        workers.extend(worker);
    }
    let result = QueryResult::from_partials(query, cfg, partials)?;
    let metrics = RunMetrics {
        wall_s,
        cpu_s,
        bytes_scanned: result.total.bytes_read,
        events_processed: result.total.events,
        row_groups: n,
        threads,
        workers_used: workers.len(),
    };
    Ok((result, metrics))
}

/// Opens the configured dataset, applies the scale factor and runs the
/// query. Returns one metrics entry per repeat; results of all repeats are
/// identical, the first is returned.
pub fn run_parallel(cfg: &RunConfig) -> Result<(QueryResult, Vec<RunMetrics>)> {
    let base = DatasetFile::open(&cfg.dataset)?;
    let scaled;
    let dataset = match cfg.scale {
        Some(sf) if sf.exponent() != 0 => {
            let tmp = tempfile::NamedTempFile::new()?;
            replicate_scale_to_path(&base, sf, tmp.path(), cfg.scaled_row_group_size)?;
            scaled = (DatasetFile::open(tmp.path())?, tmp);
            &scaled.0
        }
        _ => &base,
    };
    let mut first = None;
    let mut metrics = Vec::with_capacity(cfg.repeats.max(1));
    for _ in 0..cfg.repeats.max(1) {
        let (result, m) = execute(dataset, cfg.query, cfg.threads, &cfg.query_config)?;
        metrics.push(m);
        first.get_or_insert(result);
    }
    Ok((first.expect("at least one repeat"), metrics))
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub queries: Vec<Query>,
    pub sf_min_exponent: i32,
    pub sf_max_exponent: i32,
    pub threads: usize,
    pub repeats: usize,
    pub row_group_size: usize,
    pub query_config: QueryConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub query: Query,
    pub sf: ScaleFactor,
    pub threads: usize,
    pub repeat: usize,
    pub metrics: RunMetrics,
}

impl BenchRow {
    pub fn to_csv_line(&self) -> String {
        let m = &self.metrics;
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.query,
            self.sf.value(),
            self.threads,
            self.repeat,
            m.wall_s,
            m.cpu_s,
            m.bytes_scanned,
            m.events_processed,
            m.events_per_s()
        )
    }
}

/// Median over the repeats of one (query, sf) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub query: Query,
    pub sf: ScaleFactor,
    pub events: u64,
    pub median_wall_s: f64,
    pub median_cpu_s: f64,
    pub bytes_per_event: f64,
    pub wall_s_per_event: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    match n {
        0 => 0.0,
        _ if n % 2 == 1 => xs[n / 2],
        _ => 0.5 * (xs[n / 2 - 1] + xs[n / 2]),
    }
}

pub fn summarize(rows: &[BenchRow]) -> Vec<BenchSummary> {
    let mut keys: Vec<(Query, ScaleFactor)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.query, r.sf)) {
            keys.push((r.query, r.sf));
        }
    }
    keys.into_iter()
        .map(|(query, sf)| {
            let cell: Vec<&BenchRow> = rows
                .iter()
                .filter(|r| r.query == query && r.sf == sf)
                .collect();
            let events = cell[0].metrics.events_processed;
            let wall = median(cell.iter().map(|r| r.metrics.wall_s).collect());
            BenchSummary {
                query,
                sf,
                events,
                median_wall_s: wall,
                median_cpu_s: median(cell.iter().map(|r| r.metrics.cpu_s).collect()),
                bytes_per_event: cell[0].metrics.bytes_per_event(),
                wall_s_per_event: if events > 0 {
                    wall / events as f64
                } else {
                    0.0
                },
            }
        })
        .collect()
}

/// Sweeps `2^sf_min ..= 2^sf_max` over `base`, materializing each scaled
/// dataset in `scratch`.
pub fn bench(base: &DatasetFile, cfg: &BenchConfig, scratch: &Path) -> Result<Vec<BenchRow>> {
    if cfg.sf_min_exponent > cfg.sf_max_exponent {
        return Err(Error::Config(format!(
            "empty scale-factor range 2^{}..2^{}",
            cfg.sf_min_exponent, cfg.sf_max_exponent
        )));
    }
    let mut rows = Vec::new();
    for exp in cfg.sf_min_exponent..=cfg.sf_max_exponent {
        let sf = ScaleFactor::from_exponent(exp)?;
        let path = scratch.join(format!("scaled_{exp}.nf2"));
        replicate_scale_to_path(base, sf, &path, cfg.row_group_size)?;
        let dataset = DatasetFile::open(&path)?;
        for &query in &cfg.queries {
            for repeat in 0..cfg.repeats {
                let (_, metrics) = execute(&dataset, query, cfg.threads, &cfg.query_config)?;
                rows.push(BenchRow {
                    query,
                    sf,
                    threads: cfg.threads,
                    repeat,
                    metrics,
                });
            }
        }
        drop(dataset);
        let _ = std::fs::remove_file(&path);
    }
    Ok(rows)
}

pub fn write_report<W: Write>(mut out: W, rows: &[BenchRow]) -> Result<()> {
    writeln!(out, "{BENCH_REPORT_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.to_csv_line())?;
    }
    out.flush()?;
    Ok(())
}
