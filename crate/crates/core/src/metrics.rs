//! Throughput, jitter, latency percentiles and cache-full windows.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::path::Path;

use ordered_float::OrderedFloat;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim_env::SystemSample;
use crate::textio;

pub const REPORT_HEADER: &str = "#qoco-report v1";
pub const TICKS_HEADER: &str = "#qoco-ticks v1";

/// Population standard deviation over mean.
pub fn jitter<T: Scalar>(series: &[T]) -> Result<T> {
    if series.is_empty() {
        return Err(Error::Empty("jitter"));
    }
    let n = T::from_usize_lossy(series.len());
    let mean = series.iter().fold(T::zero(), |s, &x| s + x) / n;
    if !(mean > T::zero()) {
        return Err(Error::NonPositiveMean);
    }
    let var = series
        .iter()
        .fold(T::zero(), |s, &x| s + (x - mean) * (x - mean))
        / n;
    Ok(var.sqrt() / mean)
}

fn cmp<T: Scalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// 1-based rank `ceil(q/100 n)`, clamped to `[1, n]`. The product is
/// nudged down by a relative 1e-12 so that decimal `q` values such as 99.9
/// do not round up past an exact integer rank.
pub fn nearest_rank(q: f64, n: usize) -> usize {
    let x = q / 100.0 * n as f64;
    ((x - x.abs() * 1e-12).ceil() as usize).clamp(1, n.max(1))
}

/// Nearest-rank percentile: the element at 1-based rank `ceil(q/100 n)`.
pub fn percentile<T: Scalar>(values: &[T], q: f64) -> Result<T> {
    if values.is_empty() {
        return Err(Error::Empty("percentile"));
    }
    if !(q > 0.0 && q <= 100.0) {
        return Err(Error::invalid("percentile", format!("q must lie in (0,100], got {q}")));
    }
    let k = nearest_rank(q, values.len()) - 1;
    let mut v = values.to_vec();
    let (_, x, _) = v.select_nth_unstable_by(k, cmp);
    Ok(*x)
}

/// Seconds with `W >= wbar` in each consecutive `window`-second slot. A
/// trailing partial slot is reported when the run length is not a multiple.
pub fn cache_full_windows(watermarks: &[f64], wbar: f64, window: f64, tick: f64) -> Vec<(usize, f64)> {
    assert!(window > 0.0 && tick > 0.0);
    let per = ((window / tick).round() as usize).max(1);
    watermarks
        .chunks(per)
        .enumerate()
        .map(|(i, c)| (i, c.iter().filter(|w| **w >= wbar).count() as f64 * tick))
        .collect()
}

/// Exact streaming quantile over an insert-only multiset, kept as a pair
/// of heaps split at the target rank.
#[derive(Clone, Debug)]
pub struct RunningQuantile {
    q: f64,
    low: BinaryHeap<OrderedFloat<f64>>,
    high: BinaryHeap<Reverse<OrderedFloat<f64>>>,
}

impl RunningQuantile {
    pub fn new(q: f64) -> Self {
        assert!(q > 0.0 && q <= 100.0);
        Self {
            q,
            low: BinaryHeap::new(),
            high: BinaryHeap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.low.len() + self.high.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, x: f64) {
        let x = OrderedFloat(x);
        match self.low.peek() {
            Some(top) if x > *top => self.high.push(Reverse(x)),
            _ => self.low.push(x),
        }
        let rank = nearest_rank(self.q, self.len());
        while self.low.len() > rank {
            let v = self.low.pop().expect("non-empty");
            self.high.push(Reverse(v));
        }
        while self.low.len() < rank {
            let Reverse(v) = self.high.pop().expect("non-empty");
            self.low.push(v);
        }
    }

    /// Same value as [`percentile`] over everything pushed so far.
    pub fn value(&self) -> Option<f64> {
        self.low.peek().map(|v| v.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub method: String,
    pub workload: String,
    pub seed: u64,
    /// Bytes/second.
    pub mean_throughput: f64,
    pub jitter: f64,
    /// Seconds.
    pub mean_latency: f64,
    /// Seconds.
    pub p999_latency: f64,
    /// Window length in seconds.
    pub window: f64,
    pub cache_full: Vec<(usize, f64)>,
    pub completed: u64,
}

impl MetricsReport {
    pub fn cache_full_total(&self) -> f64 {
        self.cache_full.iter().map(|(_, s)| s).sum()
    }

    /// Section name used in report files.
    pub fn key(&self) -> String {
        format!("{}/{}", self.method, self.seed)
    }
}

/// Per-tick collection owned by the run driver.
#[derive(Clone, Debug)]
pub struct MetricsAccumulator {
    tick: f64,
    wbar: f64,
    window: f64,
    throughput: Vec<f64>,
    watermark: Vec<f64>,
    latencies: Vec<f64>,
    running: RunningQuantile,
    rows: Vec<TickRow>,
}

/// One row of the per-tick export.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TickRow {
    pub t: u64,
    pub served_bw: f64,
    pub flushed_bw: f64,
    pub watermark: f64,
    pub p999_running: f64,
}

impl MetricsAccumulator {
    pub fn new(tick: f64, wbar: f64, window: f64) -> Self {
        Self {
            tick,
            wbar,
            window,
            throughput: Vec::new(),
            watermark: Vec::new(),
            latencies: Vec::new(),
            running: RunningQuantile::new(99.9),
            rows: Vec::new(),
        }
    }

    pub fn record(&mut self, s: &SystemSample) {
        for c in &s.completed {
            self.latencies.push(c.latency);
            self.running.push(c.latency);
        }
        self.throughput.push(s.served_bw());
        self.watermark.push(s.watermark);
        self.rows.push(TickRow {
            t: s.t,
            served_bw: s.served_bw(),
            flushed_bw: s.flushed_bw,
            watermark: s.watermark,
            p999_running: self.running.value().unwrap_or(0.0),
        });
    }

    pub fn throughput(&self) -> &[f64] {
        &self.throughput
    }

    pub fn watermarks(&self) -> &[f64] {
        &self.watermark
    }

    pub fn latencies(&self) -> &[f64] {
        &self.latencies
    }

    pub fn rows(&self) -> &[TickRow] {
        &self.rows
    }

    pub fn finish(&self, method: &str, workload: &str, seed: u64) -> Result<MetricsReport> {
        let n = self.throughput.len();
        if n == 0 {
            return Err(Error::Empty("metrics report"));
        }
        let mean_throughput = self.throughput.iter().sum::<f64>() / n as f64;
        let jitter = jitter(&self.throughput).unwrap_or(0.0);
        let (mean_latency, p999_latency) = if self.latencies.is_empty() {
            (0.0, 0.0)
        } else {
            (
                self.latencies.iter().sum::<f64>() / self.latencies.len() as f64,
                percentile(&self.latencies, 99.9)?,
            )
        };
        Ok(MetricsReport {
            method: method.to_string(),
            workload: workload.to_string(),
            seed,
            mean_throughput,
            jitter,
            mean_latency,
            p999_latency,
            window: self.window,
            cache_full: cache_full_windows(&self.watermark, self.wbar, self.window, self.tick),
            completed: self.latencies.len() as u64,
        })
    }
}

pub fn write_tick_csv(rows: &[TickRow], path: &Path) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 64 + 64);
    out.push_str(TICKS_HEADER);
    out.push_str("\nt,I,O,W,p999_running\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:?},{:?},{:?},{:?}\n",
            r.t, r.served_bw, r.flushed_bw, r.watermark, r.p999_running
        ));
    }
    textio::write_file(path, &out)
}

fn format_windows(w: &[(usize, f64)]) -> String {
    w.iter()
        .map(|(i, s)| format!("{i}:{s:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Writes reports as `[method/seed]` sections of `key=value` lines.
pub fn emit_reports(reports: &[MetricsReport], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!("\n[{}]\n", r.key()));
        out.push_str(&format!("method={}\n", r.method));
        out.push_str(&format!("workload={}\n", r.workload));
        out.push_str(&format!("seed={}\n", r.seed));
        out.push_str(&format!("mean_throughput={:?}\n", r.mean_throughput));
        out.push_str(&format!("jitter={:?}\n", r.jitter));
        out.push_str(&format!("mean_latency={:?}\n", r.mean_latency));
        out.push_str(&format!("p999_latency={:?}\n", r.p999_latency));
        out.push_str(&format!("completed={}\n", r.completed));
        out.push_str(&format!("window={:?}\n", r.window));
        out.push_str(&format!("cache_full_total={:?}\n", r.cache_full_total()));
        out.push_str(&format!("cache_full={}\n", format_windows(&r.cache_full)));
    }
    textio::write_file(path, &out)
}

pub fn emit_report(report: &MetricsReport, path: &Path) -> Result<()> {
    emit_reports(std::slice::from_ref(report), path)
}

#[derive(Default)]
struct Partial {
    method: Option<String>,
    workload: Option<String>,
    seed: Option<u64>,
    mean_throughput: Option<f64>,
    jitter: Option<f64>,
    mean_latency: Option<f64>,
    p999_latency: Option<f64>,
    completed: Option<u64>,
    window: Option<f64>,
    cache_full: Option<Vec<(usize, f64)>>,
}

impl Partial {
    fn finish(self, path: &Path, line: usize) -> Result<MetricsReport> {
        let miss = |k: &str| Error::parse(path, line, format!("section is missing `{k}`"));
        Ok(MetricsReport {
            method: self.method.ok_or_else(|| miss("method"))?,
            workload: self.workload.ok_or_else(|| miss("workload"))?,
            seed: self.seed.ok_or_else(|| miss("seed"))?,
            mean_throughput: self.mean_throughput.ok_or_else(|| miss("mean_throughput"))?,
            jitter: self.jitter.ok_or_else(|| miss("jitter"))?,
            mean_latency: self.mean_latency.ok_or_else(|| miss("mean_latency"))?,
            p999_latency: self.p999_latency.ok_or_else(|| miss("p999_latency"))?,
            completed: self.completed.ok_or_else(|| miss("completed"))?,
            window: self.window.ok_or_else(|| miss("window"))?,
            cache_full: self.cache_full.ok_or_else(|| miss("cache_full"))?,
        })
    }
}

pub fn read_reports(path: &Path) -> Result<Vec<MetricsReport>> {
    let rows = textio::read_rows(path, REPORT_HEADER)?;
    let mut out = Vec::new();
    let mut cur: Option<(usize, Partial)> = None;
    for (line, row) in rows {
        if row.starts_with('[') && row.ends_with(']') {
            if let Some((l, p)) = cur.take() {
                out.push(p.finish(path, l)?);
            }
            cur = Some((line, Partial::default()));
            continue;
        }
        let Some((_, p)) = cur.as_mut() else {
            return Err(Error::parse(path, line, "key outside of a section"));
        };
        let (k, v) = row
            .split_once('=')
            .ok_or_else(|| Error::parse(path, line, "expected key=value"))?;
        let f = |name| textio::field::<f64>(path, line, name, v);
        match k {
            "method" => p.method = Some(v.to_string()),
            "workload" => p.workload = Some(v.to_string()),
            "seed" => p.seed = Some(textio::field(path, line, "seed", v)?),
            "mean_throughput" => p.mean_throughput = Some(f("mean_throughput")?),
            "jitter" => p.jitter = Some(f("jitter")?),
            "mean_latency" => p.mean_latency = Some(f("mean_latency")?),
            "p999_latency" => p.p999_latency = Some(f("p999_latency")?),
            "completed" => p.completed = Some(textio::field(path, line, "completed", v)?),
            "window" => p.window = Some(f("window")?),
            "cache_full_total" => {}
            "cache_full" => {
                let mut w = Vec::new();
                for item in v.split_whitespace() {
                    let (i, s) = item
                        .split_once(':')
                        .ok_or_else(|| Error::parse(path, line, format!("bad window `{item}`")))?;
                    w.push((
                        textio::field(path, line, "window index", i)?,
                        textio::field(path, line, "window seconds", s)?,
                    ));
                }
                p.cache_full = Some(w);
            }
            other => return Err(Error::parse(path, line, format!("unknown key `{other}`"))),
        }
    }
    if let Some((l, p)) = cur {
        out.push(p.finish(path, l)?);
    }
    Ok(out)
}

/// Nearest-rank percentile of the latencies completed in `[from, to)`
/// seconds, keyed by completion tick.
pub fn windowed_percentile(
    completions: &[(f64, f64)],
    from: f64,
    to: f64,
    q: f64,
) -> Result<f64> {
    let v: Vec<f64> = completions
        .iter()
        .filter(|(t, _)| *t >= from && *t < to)
        .map(|(_, l)| *l)
        .collect();
    percentile(&v, q)
}
