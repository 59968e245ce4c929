//! Synthetic host I/O streams.
//!
//! The nineteen standard classes differ only in block size, request size and
//! read share. Arrival times come from a seeded constant-rate or Poisson
//! process so that every trace is a pure function of `(spec, seed)`.

use std::fmt::{self, Write as _};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textio;

pub const TRACE_HEADER: &str = "#qoco-trace v1";

const KIB: u64 = 1024;

/// `(block size, io size, read share %)` for S-1 ..= S-19.
const STANDARD_CLASSES: [(u64, u64, f64); 19] = [
    (512, 4 * KIB, 0.0),
    (512, 4 * KIB, 30.0),
    (512, 4 * KIB, 50.0),
    (512, 4 * KIB, 70.0),
    (8 * KIB, 32 * KIB, 0.0),
    (8 * KIB, 32 * KIB, 30.0),
    (8 * KIB, 32 * KIB, 70.0),
    (8 * KIB, 256 * KIB, 0.0),
    (8 * KIB, 256 * KIB, 30.0),
    (8 * KIB, 256 * KIB, 70.0),
    (32 * KIB, 32 * KIB, 0.0),
    (32 * KIB, 32 * KIB, 30.0),
    (32 * KIB, 32 * KIB, 70.0),
    (32 * KIB, 256 * KIB, 0.0),
    (32 * KIB, 256 * KIB, 30.0),
    (32 * KIB, 256 * KIB, 70.0),
    (8 * KIB, 8 * KIB, 0.0),
    (8 * KIB, 8 * KIB, 30.0),
    (8 * KIB, 8 * KIB, 70.0),
];

/// Replay order of the changing-workload experiment.
pub const CHANGING_ORDER: [&str; 9] = [
    "S-17", "S-6", "S-18", "S-9", "S-18", "S-7", "S-18", "S-8", "S-19",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Arrival {
    Constant,
    #[default]
    Poisson,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IoKind {
    Read,
    Write,
}

impl IoKind {
    fn code(self) -> char {
        match self {
            IoKind::Read => 'R',
            IoKind::Write => 'W',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IoRequest {
    pub id: u64,
    /// Simulated seconds since the start of the trace.
    pub arrival_time: f64,
    pub size: u64,
    pub kind: IoKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadSpec {
    pub id: String,
    pub block_size: u64,
    pub io_size: u64,
    /// Share of reads in percent.
    pub read_ratio: f64,
    /// Seconds.
    pub duration: f64,
    /// Mean requests per second.
    pub offered_rate: f64,
    pub arrival: Arrival,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("workload spec", reason));
        if self.block_size == 0 {
            return bad(format!("{}: block_size must be positive", self.id));
        }
        if self.io_size < self.block_size || !self.io_size.is_multiple_of(self.block_size) {
            return bad(format!(
                "{}: io_size {} is not a positive multiple of block_size {}",
                self.id, self.io_size, self.block_size
            ));
        }
        if !(0.0..=100.0).contains(&self.read_ratio) {
            return bad(format!("{}: read_ratio {} outside [0,100]", self.id, self.read_ratio));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("{}: duration must be positive", self.id));
        }
        if !(self.offered_rate > 0.0 && self.offered_rate.is_finite()) {
            return bad(format!("{}: offered_rate must be positive", self.id));
        }
        Ok(())
    }

    /// Offered bytes per second.
    pub fn offered_bandwidth(&self) -> f64 {
        self.offered_rate * self.io_size as f64
    }
}

/// How hard a workload pushes, either per request or per byte.
///
/// Byte-denominated load is converted to a request rate with each phase's own
/// I/O size, which keeps the pressure on the cache comparable across phases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OfferedLoad {
    RequestsPerSec(f64),
    BytesPerSec(f64),
}

impl OfferedLoad {
    fn rate_for(self, io_size: u64) -> f64 {
        match self {
            OfferedLoad::RequestsPerSec(r) => r,
            OfferedLoad::BytesPerSec(b) => b / io_size as f64,
        }
    }
}

pub fn standard_ids() -> impl Iterator<Item = String> {
    (1..=STANDARD_CLASSES.len()).map(|i| format!("S-{i}"))
}

fn valid_ids() -> String {
    standard_ids().collect::<Vec<_>>().join(", ")
}

pub fn build_standard_spec(id: &str, duration: f64, offered_rate: f64) -> Result<WorkloadSpec> {
    let idx = id
        .strip_prefix("S-")
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|n| (1..=STANDARD_CLASSES.len()).contains(n))
        .ok_or_else(|| Error::UnknownWorkload {
            id: id.to_string(),
            valid: valid_ids(),
        })?;
    let (block_size, io_size, read_ratio) = STANDARD_CLASSES[idx - 1];
    let spec = WorkloadSpec {
        id: format!("S-{idx}"),
        block_size,
        io_size,
        read_ratio,
        duration,
        offered_rate,
        arrival: Arrival::Poisson,
    };
    spec.validate()?;
    Ok(spec)
}

/// A workload built with a byte-denominated load.
pub fn build_standard_spec_with_load(
    id: &str,
    duration: f64,
    load: OfferedLoad,
) -> Result<WorkloadSpec> {
    let probe = build_standard_spec(id, duration, 1.0)?;
    build_standard_spec(id, duration, load.rate_for(probe.io_size))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadSequence {
    pub phases: Vec<WorkloadSpec>,
}

impl WorkloadSequence {
    pub fn new(phases: Vec<WorkloadSpec>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::invalid("workload sequence", "at least one phase is required"));
        }
        for p in &phases {
            p.validate()?;
        }
        for pair in phases.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.block_size == b.block_size && a.io_size == b.io_size && a.read_ratio == b.read_ratio
            {
                return Err(Error::invalid(
                    "workload sequence",
                    format!("consecutive phases {} and {} have identical properties", a.id, b.id),
                ));
            }
        }
        Ok(Self { phases })
    }

    pub fn total_duration(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum()
    }

    /// Start time of every phase, followed by the end of the last one.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.phases.len() + 1);
        let mut t = 0.0;
        out.push(t);
        for p in &self.phases {
            t += p.duration;
            out.push(t);
        }
        out
    }

    pub fn label(&self) -> String {
        self.phases.iter().map(|p| p.id.as_str()).collect::<Vec<_>>().join(">")
    }
}

pub fn build_changing_sequence(phase_duration: f64, load: OfferedLoad) -> Result<WorkloadSequence> {
    if !(phase_duration > 0.0) {
        return Err(Error::invalid("workload sequence", "phase_duration must be positive"));
    }
    let phases = CHANGING_ORDER
        .iter()
        .map(|id| build_standard_spec_with_load(id, phase_duration, load))
        .collect::<Result<Vec<_>>>()?;
    WorkloadSequence::new(phases)
}

impl From<WorkloadSpec> for WorkloadSequence {
    fn from(spec: WorkloadSpec) -> Self {
        WorkloadSequence { phases: vec![spec] }
    }
}

/// Generates the request stream for every phase of `seq`, back to back.
pub fn generate_trace(seq: &WorkloadSequence, seed: u64) -> Vec<IoRequest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut start = 0.0;
    for phase in &seq.phases {
        emit_phase(phase, start, &mut rng, &mut out);
        start += phase.duration;
    }
    out
}

fn emit_phase(spec: &WorkloadSpec, start: f64, rng: &mut ChaCha8Rng, out: &mut Vec<IoRequest>) {
    let end = start + spec.duration;
    let mut push = |t: f64, rng: &mut ChaCha8Rng| {
        let kind = if rng.random::<f64>() * 100.0 < spec.read_ratio {
            IoKind::Read
        } else {
            IoKind::Write
        };
        let id = out.len() as u64;
        out.push(IoRequest {
            id,
            arrival_time: t,
            size: spec.io_size,
            kind,
        });
    };
    match spec.arrival {
        Arrival::Constant => {
            let n = (spec.offered_rate * spec.duration).round() as u64;
            for i in 0..n {
                push(start + i as f64 / spec.offered_rate, rng);
            }
        }
        Arrival::Poisson => {
            let gap = Exp::new(spec.offered_rate).expect("validated positive rate");
            let mut t = start;
            loop {
                t += gap.sample(rng);
                if t >= end {
                    break;
                }
                push(t, rng);
            }
        }
    }
}

impl fmt::Display for IoRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.id, self.arrival_time, self.size, self.kind.code())
    }
}

pub fn save_trace(trace: &[IoRequest], path: &Path) -> Result<()> {
    let mut body = String::with_capacity(32 * (trace.len() + 1));
    body.push_str(TRACE_HEADER);
    body.push('\n');
    for r in trace {
        let _ = writeln!(body, "{r}");
    }
    textio::write_file(path, &body)
}

pub fn load_trace(path: &Path) -> Result<Vec<IoRequest>> {
    let rows = textio::read_rows(path, TRACE_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    let mut last_time = f64::NEG_INFINITY;
    for (line, row) in rows {
        let cols = textio::columns(path, line, &row, 4)?;
        let id: u64 = textio::field(path, line, "id", cols[0])?;
        let arrival_time: f64 = textio::field(path, line, "arrival_time_s", cols[1])?;
        if !(arrival_time >= 0.0 && arrival_time.is_finite()) {
            return Err(Error::parse(path, line, format!("bad arrival_time_s `{}`", cols[1])));
        }
        if arrival_time < last_time {
            return Err(Error::parse(path, line, "arrival times must be nondecreasing"));
        }
        last_time = arrival_time;
        let size: u64 = textio::field(path, line, "size_bytes", cols[2])?;
        let kind = match cols[3] {
            "R" => IoKind::Read,
            "W" => IoKind::Write,
            other => return Err(Error::parse(path, line, format!("bad kind `{other}`"))),
        };
        out.push(IoRequest {
            id,
            arrival_time,
            size,
            kind,
        });
    }
    Ok(out)
}
