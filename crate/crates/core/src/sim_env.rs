//! Tick-driven model of the caching tier and the storage tier below it.
//!
//! Host requests wait in a FIFO queue until the admission gate (normally the
//! token bucket) lets them into the cache. Cached bytes drain to the storage
//! tier at a stochastic flush bandwidth. Occupancy is tracked in whole bytes,
//! so the watermark obtained incrementally is exactly the cumulative sum of
//! admitted minus flushed bytes over the capacity.
//!
//! When the watermark at the start of a tick is at or above the overload
//! threshold the cache stops absorbing writes: admission is cut to
//! `collapse_fraction` of what the grant and the drain would allow, and the
//! flush path itself loses `overload_flush_penalty` of its bandwidth.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::TokenBucket;
use crate::seed;
use crate::textio;
use crate::workload::IoRequest;

pub const SAMPLES_HEADER: &str = "#qoco-samples v1";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Seconds per tick.
    pub tick: f64,
    /// Per-request service time on the cache path, seconds.
    pub cache_service: f64,
    /// Per-request service time when going straight to the storage tier, seconds.
    pub storage_service: f64,
    pub total_duration: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tick: 1.0,
            cache_service: 1e-4,
            storage_service: 2e-3,
            total_duration: 1500.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tick > 0.0) {
            return Err(Error::invalid("sim config", "tick must be positive"));
        }
        if !(self.total_duration >= self.tick) {
            return Err(Error::invalid("sim config", "total_duration must cover at least one tick"));
        }
        if self.cache_service < 0.0 || self.storage_service < 0.0 {
            return Err(Error::invalid("sim config", "service times must be non-negative"));
        }
        Ok(())
    }

    pub fn ticks(&self) -> u64 {
        (self.total_duration / self.tick).round().max(1.0) as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheConfig {
    pub capacity: u64,
    /// Overload threshold, percent of capacity.
    pub overload_threshold: f64,
    /// Share of the normal admission budget that survives an overloaded tick.
    pub collapse_fraction: f64,
    /// Share of flush bandwidth lost while overloaded.
    pub overload_flush_penalty: f64,
    /// Percentage points below the threshold still treated as full, so a
    /// cache that cannot fit another request counts as having reached it.
    pub full_tolerance: f64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            capacity: 64 << 20,
            overload_threshold: 100.0,
            collapse_fraction: 0.1,
            overload_flush_penalty: 0.5,
            full_tolerance: 0.1,
        }
    }
}

impl CacheConfig {
    /// Watermark at which the cache counts as full.
    pub fn full_level(&self) -> f64 {
        self.overload_threshold - self.full_tolerance
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(Error::invalid("cache config", "capacity must be positive"));
        }
        if !(self.overload_threshold > 0.0 && self.overload_threshold <= 100.0) {
            return Err(Error::invalid("cache config", "overload_threshold must lie in (0,100]"));
        }
        if !(0.0..=1.0).contains(&self.collapse_fraction) {
            return Err(Error::invalid("cache config", "collapse_fraction must lie in [0,1]"));
        }
        if !(0.0..1.0).contains(&self.overload_flush_penalty) {
            return Err(Error::invalid("cache config", "overload_flush_penalty must lie in [0,1)"));
        }
        if !(0.0..self.overload_threshold).contains(&self.full_tolerance) {
            return Err(Error::invalid("cache config", "full_tolerance must lie in [0, overload_threshold)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CacheModel {
    cfg: CacheConfig,
    occupied: u64,
}

impl CacheModel {
    pub fn new(cfg: CacheConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, occupied: 0 })
    }

    pub fn capacity(&self) -> u64 {
        self.cfg.capacity
    }

    pub fn occupied(&self) -> u64 {
        self.occupied
    }

    /// Occupancy in percent of capacity.
    pub fn watermark(&self) -> f64 {
        100.0 * self.occupied as f64 / self.cfg.capacity as f64
    }

    pub fn overloaded(&self) -> bool {
        self.watermark() >= self.cfg.full_level()
    }

    pub fn config(&self) -> &CacheConfig {
        &self.cfg
    }
}

/// Stochastic drain bandwidth of the caching tier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlushProcess {
    /// Bytes per second.
    pub base_bandwidth: f64,
    pub noise_cv: f64,
    /// Expected dip events per second.
    pub dip_rate: f64,
    pub dip_depth: f64,
    /// Seconds.
    pub dip_duration: f64,
    pub seed: u64,
}

impl Default for FlushProcess {
    fn default() -> Self {
        Self {
            base_bandwidth: 8.0 * 1024.0 * 1024.0,
            noise_cv: 0.05,
            dip_rate: 0.01,
            dip_depth: 0.4,
            dip_duration: 10.0,
            seed: 0,
        }
    }
}

impl FlushProcess {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_bandwidth > 0.0 && self.base_bandwidth.is_finite()) {
            return Err(Error::invalid("flush process", "base_bandwidth must be positive"));
        }
        if !(self.noise_cv >= 0.0) {
            return Err(Error::invalid("flush process", "noise_cv must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.dip_depth) {
            return Err(Error::invalid("flush process", "dip_depth must lie in [0,1)"));
        }
        if self.dip_rate < 0.0 || self.dip_duration < 0.0 {
            return Err(Error::invalid("flush process", "dip_rate and dip_duration must be non-negative"));
        }
        Ok(())
    }

    fn dip_starts_at(&self, t: u64, tick: f64) -> bool {
        let p = (self.dip_rate * tick).min(1.0);
        if p <= 0.0 {
            return false;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(
            seed::derive(self.seed, seed::stream::DIP),
            t,
        ));
        rng.random::<f64>() < p
    }

    pub fn dip_active(&self, t: u64, tick: f64) -> bool {
        if self.dip_duration <= 0.0 || self.dip_rate <= 0.0 {
            return false;
        }
        let span = (self.dip_duration / tick).ceil() as u64;
        (t.saturating_sub(span - 1)..=t).any(|s| self.dip_starts_at(s, tick))
    }

    /// Flush bandwidth (bytes/second) available during tick `t`.
    pub fn draw(&self, t: u64, tick: f64) -> f64 {
        let noise = if self.noise_cv > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(self.seed, t));
            Normal::new(0.0, self.noise_cv)
                .expect("validated cv")
                .sample(&mut rng)
        } else {
            0.0
        };
        let mut o = (self.base_bandwidth * (1.0 + noise)).max(0.0);
        if self.dip_active(t, tick) {
            o *= 1.0 - self.dip_depth;
        }
        o
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Cache,
    Storage,
}

/// Per-request admission decision used by [`StorageEnv::step`].
pub trait AdmissionGate {
    fn route(&mut self, _req: &IoRequest) -> Route {
        Route::Cache
    }

    /// Takes whatever credit `req` needs; `false` defers it and every
    /// request behind it to a later tick.
    fn try_take(&mut self, req: &IoRequest) -> bool;
}

impl AdmissionGate for TokenBucket {
    fn try_take(&mut self, req: &IoRequest) -> bool {
        self.try_admit(req.size)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pending {
    pub req: IoRequest,
    pub arrival_tick: u64,
}

#[derive(Clone, Debug, Default)]
pub struct HostQueue {
    items: VecDeque<Pending>,
    bytes: u64,
}

impl HostQueue {
    pub fn push(&mut self, p: Pending) {
        self.bytes += p.req.size;
        self.items.push_back(p);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }

    pub fn front(&self) -> Option<&Pending> {
        self.items.front()
    }

    pub fn pop(&mut self) -> Option<Pending> {
        let p = self.items.pop_front()?;
        self.bytes -= p.req.size;
        Some(p)
    }

    /// FIFO byte-budget admission: pops requests while they fit in
    /// `budget` bytes. The unspent remainder is returned, never banked.
    pub fn drain(&mut self, mut budget: u64) -> (Vec<Pending>, u64) {
        let mut out = Vec::new();
        while let Some(p) = self.items.front() {
            if p.req.size > budget {
                break;
            }
            budget -= p.req.size;
            out.push(self.pop().expect("front exists"));
        }
        (out, budget)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Completion {
    pub id: u64,
    /// End-to-end seconds: host queueing plus service time.
    pub latency: f64,
    pub queued_ticks: u64,
    pub route: Route,
}

/// Ground truth for one tick. Bandwidths are bytes/second, `watermark` is
/// percent and reflects the occupancy at the end of the tick.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SystemSample {
    pub t: u64,
    pub admitted_bw: f64,
    pub flushed_bw: f64,
    pub watermark: f64,
    pub host_queue_depth: usize,
    pub completed: Vec<Completion>,
    pub direct_bw: f64,
    pub grant_bw: f64,
    pub flush_capacity_bw: f64,
    /// Bytes newly dirtied this tick, as a rate; every such byte must be destaged once.
    pub destage_demand_bw: f64,
    pub overloaded: bool,
    pub admitted_bytes: u64,
    pub flushed_bytes: u64,
}

impl SystemSample {
    /// Bytes/second served to the host on either path.
    pub fn served_bw(&self) -> f64 {
        self.admitted_bw + self.direct_bw
    }
}

pub struct StorageEnv {
    cfg: SimConfig,
    cache: CacheModel,
    flush: FlushProcess,
    queue: HostQueue,
    t: u64,
}

impl StorageEnv {
    pub fn new(cfg: SimConfig, cache: CacheConfig, flush: FlushProcess) -> Result<Self> {
        cfg.validate()?;
        flush.validate()?;
        Ok(Self {
            cfg,
            cache: CacheModel::new(cache)?,
            flush,
            queue: HostQueue::default(),
            t: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn cache(&self) -> &CacheModel {
        &self.cache
    }

    pub fn flush_process(&self) -> &FlushProcess {
        &self.flush
    }

    pub fn queue(&self) -> &HostQueue {
        &self.queue
    }

    pub fn now(&self) -> u64 {
        self.t
    }

    /// Fills the cache to `bytes` without recording any traffic.
    pub fn preload(&mut self, bytes: u64) {
        self.cache.occupied = bytes.min(self.cache.capacity());
    }

    pub fn enqueue(&mut self, req: IoRequest) {
        let arrival_tick = (req.arrival_time / self.cfg.tick).floor().max(0.0) as u64;
        self.queue.push(Pending { req, arrival_tick });
    }

    /// Plain FIFO admission against a byte budget, bypassing the cache model.
    pub fn drain_host_queue(&mut self, granted_bytes: u64) -> Vec<Pending> {
        self.queue.drain(granted_bytes).0
    }

    /// Advances one tick. `grant_bw` is the bandwidth the controller granted,
    /// used to size the collapsed admission budget.
    pub fn step<G: AdmissionGate + ?Sized>(&mut self, gate: &mut G, grant_bw: f64) -> SystemSample {
        let tick = self.cfg.tick;
        let t = self.t;
        let overloaded = self.cache.overloaded();
        let ccfg = *self.cache.config();

        let mut storage_bytes = (self.flush.draw(t, tick) * tick).floor() as u64;
        if overloaded {
            storage_bytes = ((storage_bytes as f64) * (1.0 - ccfg.overload_flush_penalty)).floor() as u64;
        }
        let cache_limit = if overloaded {
            let grant_bytes = (grant_bw.max(0.0) * tick).floor() as u64;
            (ccfg.collapse_fraction * grant_bytes.min(storage_bytes) as f64).floor() as u64
        } else {
            u64::MAX
        };

        let occupied = self.cache.occupied;
        let headroom = ccfg.capacity - occupied + storage_bytes;
        let mut cache_in = 0u64;
        let mut direct = 0u64;
        let mut completed = Vec::new();

        while let Some(head) = self.queue.front() {
            let req = head.req;
            let route = gate.route(&req);
            let fits = cache_in + direct + req.size <= headroom
                && match route {
                    Route::Cache => cache_in + req.size <= cache_limit,
                    Route::Storage => direct + req.size <= storage_bytes,
                };
            if !fits || !gate.try_take(&req) {
                break;
            }
            let p = self.queue.pop().expect("front exists");
            let queued_ticks = t.saturating_sub(p.arrival_tick);
            let service = match route {
                Route::Cache => {
                    cache_in += req.size;
                    self.cfg.cache_service
                }
                Route::Storage => {
                    direct += req.size;
                    self.cfg.storage_service
                }
            };
            completed.push(Completion {
                id: req.id,
                latency: queued_ticks as f64 * tick + service,
                queued_ticks,
                route,
            });
        }

        let flushed = (storage_bytes - direct).min(occupied + cache_in);
        self.cache.occupied = occupied + cache_in - flushed;
        debug_assert!(self.cache.occupied <= ccfg.capacity);
        self.t += 1;

        SystemSample {
            t,
            admitted_bw: cache_in as f64 / tick,
            flushed_bw: flushed as f64 / tick,
            watermark: self.cache.watermark(),
            host_queue_depth: self.queue.len(),
            completed,
            direct_bw: direct as f64 / tick,
            grant_bw,
            flush_capacity_bw: storage_bytes as f64 / tick,
            destage_demand_bw: cache_in as f64 / tick,
            overloaded,
            admitted_bytes: cache_in,
            flushed_bytes: flushed,
        }
    }
}

pub fn write_sample_log(samples: &[SystemSample], path: &Path) -> Result<()> {
    let mut body = String::with_capacity(48 * (samples.len() + 1));
    body.push_str(SAMPLES_HEADER);
    body.push('\n');
    body.push_str("t,I_t,O_t,W_t,queue_depth\n");
    for s in samples {
        let _ = writeln!(
            body,
            "{},{},{},{},{}",
            s.t, s.admitted_bw, s.flushed_bw, s.watermark, s.host_queue_depth
        );
    }
    textio::write_file(path, &body)
}

/// One parsed row of a sample log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleRow {
    pub t: u64,
    pub admitted_bw: f64,
    pub flushed_bw: f64,
    pub watermark: f64,
    pub queue_depth: usize,
}

pub fn read_sample_log(path: &Path) -> Result<Vec<SampleRow>> {
    let rows = textio::read_rows(path, SAMPLES_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, row) in rows.into_iter().skip_while(|(_, r)| r.starts_with("t,")) {
        let c = textio::columns(path, line, &row, 5)?;
        out.push(SampleRow {
            t: textio::field(path, line, "t", c[0])?,
            admitted_bw: textio::field(path, line, "I_t", c[1])?,
            flushed_bw: textio::field(path, line, "O_t", c[2])?,
            watermark: textio::field(path, line, "W_t", c[3])?,
            queue_depth: textio::field(path, line, "queue_depth", c[4])?,
        });
    }
    Ok(out)
}
