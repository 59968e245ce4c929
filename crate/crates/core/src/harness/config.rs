use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{BypassConfig, CoToConfig};
use crate::collector::DiscretizationConfig;
use crate::controller::{BoundConfig, LQoCoConfig};
use crate::error::{Error, Result};
use crate::executor::ExecutorConfig;
use crate::rl::LearnerConfig;
use crate::sim_env::{CacheConfig, FlushProcess, SimConfig};
use crate::workload::{
    build_changing_sequence, build_standard_spec_with_load, load_trace, Arrival, IoRequest,
    OfferedLoad, WorkloadSequence,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "none")]
    NoControl,
    #[serde(rename = "bypass")]
    Bypass,
    #[serde(rename = "coto")]
    CoTo,
    #[serde(rename = "lqoco")]
    LQoCo,
    /// L-QoCo without safe actions, fine-tuning or the action mask.
    #[serde(rename = "lqoco-nodk")]
    LQoCoNoDomain,
    /// L-QoCo without the adaptive bound.
    #[serde(rename = "lqoco-noab")]
    LQoCoNoBound,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::NoControl,
        Method::Bypass,
        Method::CoTo,
        Method::LQoCo,
        Method::LQoCoNoDomain,
        Method::LQoCoNoBound,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::NoControl => "none",
            Method::Bypass => "bypass",
            Method::CoTo => "coto",
            Method::LQoCo => "lqoco",
            Method::LQoCoNoDomain => "lqoco-nodk",
            Method::LQoCoNoBound => "lqoco-noab",
        }
    }

    pub fn is_lqoco(self) -> bool {
        matches!(self, Method::LQoCo | Method::LQoCoNoDomain | Method::LQoCoNoBound)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.label() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = Method::ALL.iter().map(|m| m.label()).collect();
                Error::Config(format!("unknown method `{s}`; valid methods are {}", valid.join(", ")))
            })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkloadKind {
    #[default]
    Standard,
    Changing,
    Trace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadConfig {
    pub kind: WorkloadKind,
    /// Standard class id, e.g. `S-3`.
    pub id: String,
    /// Offered bytes/second as a multiple of the flush base bandwidth.
    pub load_factor: f64,
    /// Fixed request rate; overrides `load_factor` when set.
    pub requests_per_sec: Option<f64>,
    pub arrival: Arrival,
    /// Seconds per phase of the changing sequence.
    pub phase_duration: f64,
    pub trace: Option<PathBuf>,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            kind: WorkloadKind::Standard,
            id: "S-3".to_string(),
            load_factor: 1.5,
            requests_per_sec: None,
            arrival: Arrival::Poisson,
            phase_duration: 300.0,
            trace: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Cache-full window length, seconds.
    pub window: f64,
    /// Parallel runs; 0 uses every available core.
    pub workers: usize,
    /// Write per-run sample, decision and tick files.
    pub logs: bool,
    /// Q-table file to warm-start L-QoCo runs from.
    pub warm_start: Option<PathBuf>,
    pub precision: Precision,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::NoControl, Method::CoTo, Method::LQoCo],
            seeds: vec![1],
            output_dir: PathBuf::from("qoco-out"),
            window: 150.0,
            workers: 0,
            logs: true,
            warm_start: None,
            precision: Precision::F64,
        }
    }
}

/// Every tunable of an experiment. Unknown keys anywhere are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub workload: WorkloadConfig,
    pub sim: SimConfig,
    pub cache: CacheConfig,
    pub flush: FlushProcess,
    pub executor: ExecutorConfig,
    pub collector: DiscretizationConfig,
    pub lqoco: LQoCoConfig,
    pub learner: LearnerConfig,
    pub bound: BoundConfig,
    pub coto: CoToConfig,
    pub bypass: BypassConfig,
    pub run: RunConfig,
}

fn config_err(section: &str, e: Error) -> Error {
    Error::Config(format!("[{section}] {e}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate().map_err(|e| config_err("sim", e))?;
        self.cache.validate().map_err(|e| config_err("cache", e))?;
        self.flush.validate().map_err(|e| config_err("flush", e))?;
        if self.executor.bytes_per_token == 0 {
            return Err(Error::Config("[executor] bytes_per_token must be positive".into()));
        }
        self.collector.validate().map_err(|e| config_err("collector", e))?;
        self.lqoco.validate().map_err(|e| config_err("lqoco", e))?;
        self.learner.validate().map_err(|e| config_err("learner", e))?;
        self.bound.validate().map_err(|e| config_err("bound", e))?;
        self.coto.validate().map_err(|e| config_err("coto", e))?;
        self.bypass.validate().map_err(|e| config_err("bypass", e))?;
        if self.run.methods.is_empty() {
            return Err(Error::Config("[run] methods must list at least one method".into()));
        }
        if self.run.seeds.is_empty() {
            return Err(Error::Config("[run] seeds must list at least one seed".into()));
        }
        if !(self.run.window > 0.0) {
            return Err(Error::Config("[run] window must be positive".into()));
        }
        let w = &self.workload;
        if !(w.load_factor > 0.0) {
            return Err(Error::Config("[workload] load_factor must be positive".into()));
        }
        if let Some(r) = w.requests_per_sec {
            if !(r > 0.0) {
                return Err(Error::Config("[workload] requests_per_sec must be positive".into()));
            }
        }
        match w.kind {
            WorkloadKind::Trace => match &w.trace {
                None => return Err(Error::Config("[workload] trace is required when kind = \"trace\"".into())),
                Some(p) if !p.exists() => {
                    return Err(Error::Config(format!("[workload] trace file `{}` does not exist", p.display())))
                }
                Some(_) => {}
            },
            WorkloadKind::Changing if !(w.phase_duration > 0.0) => {
                return Err(Error::Config("[workload] phase_duration must be positive".into()))
            }
            _ => {}
        }
        if let Some(p) = &self.run.warm_start {
            if !p.exists() {
                return Err(Error::Config(format!("[run] warm_start file `{}` does not exist", p.display())));
            }
        }
        Ok(())
    }

    fn offered_load(&self) -> OfferedLoad {
        match self.workload.requests_per_sec {
            Some(r) => OfferedLoad::RequestsPerSec(r),
            None => OfferedLoad::BytesPerSec(self.workload.load_factor * self.flush.base_bandwidth),
        }
    }

    /// Workload phases for synthetic kinds; `None` for trace replay.
    pub fn sequence(&self) -> Result<Option<WorkloadSequence>> {
        let w = &self.workload;
        let mut seq = match w.kind {
            WorkloadKind::Standard => {
                let spec = build_standard_spec_with_load(&w.id, self.sim.total_duration, self.offered_load())?;
                WorkloadSequence::from(spec)
            }
            WorkloadKind::Changing => build_changing_sequence(w.phase_duration, self.offered_load())?,
            WorkloadKind::Trace => return Ok(None),
        };
        for p in &mut seq.phases {
            p.arrival = w.arrival;
        }
        Ok(Some(seq))
    }

    /// Simulated seconds: the sequence length for changing workloads, the
    /// configured duration otherwise.
    pub fn run_duration(&self) -> Result<f64> {
        Ok(match (self.workload.kind, self.sequence()?) {
            (WorkloadKind::Changing, Some(seq)) => seq.total_duration(),
            _ => self.sim.total_duration,
        })
    }

    pub fn ticks(&self) -> Result<u64> {
        Ok((self.run_duration()? / self.sim.tick).round().max(1.0) as u64)
    }

    pub fn workload_label(&self) -> Result<String> {
        Ok(match self.sequence()? {
            Some(seq) => seq.label(),
            None => format!(
                "trace:{}",
                self.workload
                    .trace
                    .as_deref()
                    .and_then(Path::file_name)
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default()
            ),
        })
    }

    /// Request stream for `seed`, shared by every method of that seed.
    pub fn trace(&self, seed: u64) -> Result<Vec<IoRequest>> {
        match self.sequence()? {
            Some(seq) => Ok(crate::workload::generate_trace(
                &seq,
                crate::seed::derive(seed, crate::seed::stream::TRACE),
            )),
            None => load_trace(self.workload.trace.as_deref().expect("validated")),
        }
    }
}
