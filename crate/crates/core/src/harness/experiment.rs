use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::controller::write_decision_log;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Method, Precision};
use crate::harness::driver::{run_one, RunOutput, WarmStart};
use crate::metrics::{emit_reports, write_tick_csv, MetricsReport};
use crate::rl::{load_qtable, save_qtable, QTable, TableMeta};
use crate::scalar::Scalar;
use crate::sim_env::write_sample_log;
use crate::textio;

/// One row of a comparison: a method's metrics averaged over its seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub method: String,
    pub runs: usize,
    pub mean_throughput: f64,
    pub mean_latency: f64,
    pub p999_latency: f64,
    pub jitter: f64,
    pub cache_full_seconds: f64,
    /// Ratios against the baseline row, same order as the metric columns.
    pub throughput_ratio: f64,
    pub latency_ratio: f64,
    pub p999_ratio: f64,
    pub jitter_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub workload: String,
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else if b == 0.0 {
        f64::INFINITY
    } else {
        a / b
    }
}

/// Averages reports per method and expresses each row against the
/// no-control row, or the first method when there is none.
pub fn compare(reports: &[MetricsReport]) -> Result<Comparison> {
    if reports.len() < 2 {
        return Err(Error::invalid("comparison", "at least two reports are required"));
    }
    let workload = reports[0].workload.clone();
    if let Some(r) = reports.iter().find(|r| r.workload != workload) {
        return Err(Error::WorkloadMismatch(workload, r.workload.clone()));
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<&MetricsReport>> = BTreeMap::new();
    for r in reports {
        if !groups.contains_key(&r.method) {
            order.push(r.method.clone());
        }
        groups.entry(r.method.clone()).or_default().push(r);
    }
    let mean = |g: &[&MetricsReport], f: fn(&MetricsReport) -> f64| {
        g.iter().map(|r| f(r)).sum::<f64>() / g.len() as f64
    };
    let mut rows: Vec<ComparisonRow> = order
        .iter()
        .map(|m| {
            let g = &groups[m];
            ComparisonRow {
                method: m.clone(),
                runs: g.len(),
                mean_throughput: mean(g, |r| r.mean_throughput),
                mean_latency: mean(g, |r| r.mean_latency),
                p999_latency: mean(g, |r| r.p999_latency),
                jitter: mean(g, |r| r.jitter),
                cache_full_seconds: mean(g, MetricsReport::cache_full_total),
                throughput_ratio: 1.0,
                latency_ratio: 1.0,
                p999_ratio: 1.0,
                jitter_ratio: 1.0,
            }
        })
        .collect();
    let baseline = rows
        .iter()
        .find(|r| r.method == Method::NoControl.label())
        .unwrap_or(&rows[0])
        .clone();
    for r in &mut rows {
        r.throughput_ratio = ratio(r.mean_throughput, baseline.mean_throughput);
        r.latency_ratio = ratio(r.mean_latency, baseline.mean_latency);
        r.p999_ratio = ratio(r.p999_latency, baseline.p999_latency);
        r.jitter_ratio = ratio(r.jitter, baseline.jitter);
    }
    Ok(Comparison {
        workload,
        baseline: baseline.method,
        rows,
    })
}

pub fn format_comparison(c: &Comparison) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "workload {}  (ratios vs {})", c.workload, c.baseline);
    let _ = writeln!(
        s,
        "{:<12} {:>4} {:>12} {:>11} {:>11} {:>8} {:>10} {:>7} {:>7} {:>7} {:>7}",
        "method", "runs", "thr(MB/s)", "mean(ms)", "p99.9(ms)", "jitter", "full(s)", "thr_r", "lat_r", "p999_r", "jit_r"
    );
    for r in &c.rows {
        let _ = writeln!(
            s,
            "{:<12} {:>4} {:>12.3} {:>11.3} {:>11.3} {:>8.4} {:>10.1} {:>7.3} {:>7.3} {:>7.3} {:>7.3}",
            r.method,
            r.runs,
            r.mean_throughput / 1e6,
            r.mean_latency * 1e3,
            r.p999_latency * 1e3,
            r.jitter,
            r.cache_full_seconds,
            r.throughput_ratio,
            r.latency_ratio,
            r.p999_ratio,
            r.jitter_ratio
        );
    }
    s
}

/// Saves a learned table with the bandwidth and bound needed to resume it.
pub fn save_warm_start<T: Scalar>(w: &WarmStart<T>, bands: &str, path: &Path) -> Result<()> {
    let mut meta = TableMeta::new();
    meta.insert("bandwidth".into(), format!("{:?}", w.bandwidth.as_f64()));
    meta.insert("lb".into(), format!("{:?}", w.lb.as_f64()));
    meta.insert("ub".into(), format!("{:?}", w.ub.as_f64()));
    save_qtable(&w.table, bands, &meta, path)
}

/// Loads a table for warm start. Missing bandwidth or bound metadata falls
/// back to the cold-start values of `cfg`.
pub fn load_warm_start<T: Scalar>(cfg: &ExperimentConfig, path: &Path) -> Result<WarmStart<T>> {
    let (table, bands, meta) = load_qtable::<T>(path)?;
    let current = cfg.collector.fingerprint();
    if bands != current {
        return Err(Error::BandMismatch { saved: bands, current });
    }
    let base = cfg.flush.base_bandwidth;
    let get = |k: &str, default: f64| -> Result<T> {
        match meta.get(k) {
            None => Ok(T::lit(default)),
            Some(v) => v
                .parse::<f64>()
                .map(T::lit)
                .map_err(|_| Error::parse(path, 0, format!("bad #{k} `{v}`"))),
        }
    };
    Ok(WarmStart {
        table,
        bandwidth: get("bandwidth", base)?,
        lb: get("lb", base * cfg.bound.lower_factor)?,
        ub: get("ub", base * cfg.bound.upper_factor)?,
    })
}

/// Directory for one run's files.
pub fn run_dir(out: &Path, method: Method, seed: u64) -> PathBuf {
    out.join(format!("{}-seed{}", method.label(), seed))
}

fn write_run<T: Scalar>(cfg: &ExperimentConfig, out: &Path, r: &RunOutput<T>) -> Result<()> {
    let dir = run_dir(out, r.method, r.seed);
    emit_reports(std::slice::from_ref(&r.report), &dir.join("report.txt"))?;
    if cfg.run.logs {
        write_sample_log(&r.samples, &dir.join("samples.csv"))?;
        write_decision_log(&r.decisions, &dir.join("decisions.csv"))?;
        write_tick_csv(&r.ticks, &dir.join("ticks.csv"))?;
    }
    if let Some(l) = &r.learned {
        let w = WarmStart {
            table: l.table.clone(),
            bandwidth: l.bandwidth,
            lb: l.lb,
            ub: l.ub,
        };
        save_warm_start(&w, &cfg.collector.fingerprint(), &dir.join("qtable.csv"))?;
    }
    Ok(())
}

/// Result of [`run_experiment`]: every report plus the comparison table.
#[derive(Clone, Debug)]
pub struct ExperimentSummary {
    pub reports: Vec<MetricsReport>,
    pub comparison: Option<Comparison>,
    pub table: String,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("[run] cannot start worker pool: {e}")))
}

/// Runs every `(method, seed)` pair, keeping the full outputs in memory.
pub fn run_all<T: Scalar>(cfg: &ExperimentConfig) -> Result<Vec<RunOutput<T>>> {
    cfg.validate()?;
    let warm = match &cfg.run.warm_start {
        Some(p) => Some(load_warm_start::<T>(cfg, p)?),
        None => None,
    };
    let traces: Vec<(u64, Vec<_>)> = cfg
        .run
        .seeds
        .iter()
        .map(|&s| cfg.trace(s).map(|t| (s, t)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(Method, usize)> = cfg
        .run
        .methods
        .iter()
        .flat_map(|&m| (0..traces.len()).map(move |i| (m, i)))
        .collect();
    pool(cfg.run.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(m, i)| {
                let (seed, trace) = &traces[i];
                let w = if m.is_lqoco() { warm.as_ref() } else { None };
                run_one::<T>(cfg, m, *seed, trace, w)
            })
            .collect()
    })
}

fn run_and_write<T: Scalar>(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<MetricsReport>> {
    let runs = run_all::<T>(cfg)?;
    for r in &runs {
        write_run(cfg, out, r)?;
    }
    Ok(runs.into_iter().map(|r| r.report).collect())
}

/// Runs the experiment and writes per-run files, the combined report and
/// the summary table under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentSummary> {
    let reports = match cfg.run.precision {
        Precision::F64 => run_and_write::<f64>(cfg, out)?,
        Precision::F32 => run_and_write::<f32>(cfg, out)?,
    };
    emit_reports(&reports, &out.join("report.txt"))?;
    let comparison = if reports.len() >= 2 { Some(compare(&reports)?) } else { None };
    let table = match &comparison {
        Some(c) => format_comparison(c),
        None => {
            let r = &reports[0];
            format!(
                "{} {} seed {}: throughput {:.3} MB/s, jitter {:.4}, p99.9 {:.3} ms\n",
                r.workload,
                r.method,
                r.seed,
                r.mean_throughput / 1e6,
                r.jitter,
                r.p999_latency * 1e3
            )
        }
    };
    textio::write_file(&out.join("summary.txt"), &table)?;
    Ok(ExperimentSummary {
        reports,
        comparison,
        table,
    })
}

/// Writes the table of an L-QoCo run on `seed`; with `trained == false` the
/// freshly initialised table is written instead.
pub fn export_qtable(cfg: &ExperimentConfig, seed: u64, trained: bool, path: &Path) -> Result<()> {
    cfg.validate()?;
    let bands = cfg.collector.fingerprint();
    let base = cfg.flush.base_bandwidth;
    let w = if trained {
        let trace = cfg.trace(seed)?;
        let r = run_one::<f64>(cfg, Method::LQoCo, seed, &trace, None)?;
        let l = r.learned.expect("lqoco run has a table");
        WarmStart {
            table: l.table,
            bandwidth: l.bandwidth,
            lb: l.lb,
            ub: l.ub,
        }
    } else {
        let table = if cfg.lqoco.domain_knowledge {
            QTable::with_domain_mask()
        } else {
            QTable::new(crate::collector::DiscreteState::COUNT, crate::rl::Action::COUNT)
        };
        WarmStart {
            table,
            bandwidth: base,
            lb: base * cfg.bound.lower_factor,
            ub: base * cfg.bound.upper_factor,
        }
    };
    save_warm_start(&w, &bands, path)
}
