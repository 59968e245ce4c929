//! Rule-based comparators: CoTo, latency-threshold bypass and no control.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim_env::{AdmissionGate, Route, SystemSample};
use crate::workload::IoRequest;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoToDelta {
    /// Watermark change measured in band indices.
    #[default]
    BandIndex,
    /// Watermark change measured in percentage points.
    RawPercent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoToConfig {
    /// Low/Mid and Mid/High watermark edges, percent.
    pub band_edges: [f64; 2],
    pub rate: f64,
    pub delta: CoToDelta,
    pub min_bandwidth: f64,
}

impl Default for CoToConfig {
    fn default() -> Self {
        Self {
            band_edges: [20.0, 80.0],
            rate: 0.05,
            delta: CoToDelta::BandIndex,
            min_bandwidth: 4096.0,
        }
    }
}

impl CoToConfig {
    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.band_edges;
        if !(0.0 < a && a < b && b <= 100.0) {
            return Err(Error::invalid("coto", "band edges must satisfy 0 < low < high <= 100"));
        }
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(Error::invalid("coto", "rate must lie in (0,1)"));
        }
        if !(self.min_bandwidth > 0.0) {
            return Err(Error::invalid("coto", "min_bandwidth must be positive"));
        }
        Ok(())
    }

    /// 0 = Low, 1 = Mid, 2 = High.
    pub fn band(&self, w: f64) -> usize {
        if w < self.band_edges[0] {
            0
        } else if w < self.band_edges[1] {
            1
        } else {
            2
        }
    }
}

const COTO_BANDS: usize = 3;

/// Finite-state-machine bandwidth controller.
#[derive(Clone, Debug)]
pub struct CoTo<T> {
    cfg: CoToConfig,
    prev_band: Option<usize>,
    prev_w: Option<T>,
    bandwidth: T,
}

impl<T: Scalar> CoTo<T> {
    pub fn new(cfg: CoToConfig, initial: T) -> Result<Self> {
        cfg.validate()?;
        if !(initial > T::zero()) {
            return Err(Error::NonPositiveBandwidth(initial.as_f64()));
        }
        Ok(Self {
            cfg,
            prev_band: None,
            prev_w: None,
            bandwidth: initial,
        })
    }

    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    /// Adjustment rate for the transition into watermark `w` with inbound
    /// `i` and flush `o`. The first observation counts as persistent.
    pub fn alpha(&self, w: T, i: T, o: T) -> T {
        let band = self.cfg.band(w.as_f64());
        let r = T::lit(self.cfg.rate);
        match self.prev_band {
            Some(pb) if pb != band => {
                if !(o > T::zero()) {
                    return T::zero();
                }
                let dw = match self.cfg.delta {
                    CoToDelta::BandIndex => T::from_usize_lossy(band) - T::from_usize_lossy(pb),
                    CoToDelta::RawPercent => w - self.prev_w.unwrap_or(w),
                };
                dw / T::from_usize_lossy(COTO_BANDS) * ((i - o).abs() / o)
            }
            _ if band == 2 && self.prev_band.is_some() => -r,
            _ if band == 0 && self.prev_band.is_some() => r,
            _ => T::zero(),
        }
    }

    /// Applies one step using `i_t` both as the measured inbound rate and
    /// the bandwidth being scaled.
    pub fn coto_decide(&mut self, w: T, i_t: T, o_t: T) -> T {
        self.bandwidth = i_t;
        self.advance(w, i_t, o_t)
    }

    /// Driver entry point: the ratio uses measured admission, the scale
    /// uses the current bandwidth.
    pub fn step(&mut self, sample: &SystemSample) -> T {
        self.advance(
            T::lit(sample.watermark),
            T::lit(sample.admitted_bw),
            T::lit(sample.flushed_bw),
        )
    }

    fn advance(&mut self, w: T, i: T, o: T) -> T {
        let a = self.alpha(w, i, o);
        let next = (T::one() + a) * self.bandwidth;
        self.bandwidth = next.max(T::lit(self.cfg.min_bandwidth));
        self.prev_band = Some(self.cfg.band(w.as_f64()));
        self.prev_w = Some(w);
        self.bandwidth
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BypassConfig {
    /// Seconds.
    pub latency_threshold: f64,
    pub window: usize,
}

impl Default for BypassConfig {
    fn default() -> Self {
        Self {
            latency_threshold: 1e-3,
            window: 100,
        }
    }
}

impl BypassConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.latency_threshold > 0.0) {
            return Err(Error::invalid("bypass", "latency_threshold must be positive"));
        }
        if self.window == 0 {
            return Err(Error::invalid("bypass", "window must be positive"));
        }
        Ok(())
    }
}

pub fn bypass_route(estimate: f64, cfg: &BypassConfig) -> Route {
    if estimate > cfg.latency_threshold {
        Route::Storage
    } else {
        Route::Cache
    }
}

/// Moving average over the most recent cache-path latencies.
#[derive(Clone, Debug)]
pub struct LatencyWindow {
    samples: VecDeque<f64>,
    sum: f64,
    cap: usize,
}

impl LatencyWindow {
    pub fn new(cap: usize) -> Self {
        assert!(cap > 0);
        Self {
            samples: VecDeque::with_capacity(cap),
            sum: 0.0,
            cap,
        }
    }

    pub fn push(&mut self, x: f64) {
        if self.samples.len() == self.cap {
            if let Some(old) = self.samples.pop_front() {
                self.sum -= old;
            }
        }
        self.samples.push_back(x);
        self.sum += x;
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Zero before any sample.
    pub fn estimate(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            // recompute to keep the running sum from drifting
            self.samples.iter().sum::<f64>() / self.samples.len() as f64
        }
    }
}

/// Routes every request of a tick by the latency estimate taken at the
/// start of that tick.
#[derive(Clone, Debug)]
pub struct BypassRouter {
    cfg: BypassConfig,
    window: LatencyWindow,
    route: Route,
}

impl BypassRouter {
    pub fn new(cfg: BypassConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            window: LatencyWindow::new(cfg.window),
            cfg,
            route: Route::Cache,
        })
    }

    pub fn estimate(&self) -> f64 {
        self.window.estimate()
    }

    pub fn current_route(&self) -> Route {
        self.route
    }

    /// Fixes the route for the coming tick.
    pub fn begin_tick(&mut self) -> Route {
        self.route = bypass_route(self.window.estimate(), &self.cfg);
        self.route
    }

    /// Feeds the tick's cache-path latencies. When the tick had none,
    /// `probe` (the wait a cache-bound request would currently see) is
    /// recorded instead so the estimate can recover.
    pub fn observe(&mut self, sample: &SystemSample, probe: f64) {
        let mut any = false;
        for c in sample.completed.iter().filter(|c| c.route == Route::Cache) {
            self.window.push(c.latency);
            any = true;
        }
        if !any {
            self.window.push(probe);
        }
    }
}

impl AdmissionGate for BypassRouter {
    fn route(&mut self, _req: &IoRequest) -> Route {
        self.route
    }

    fn try_take(&mut self, _req: &IoRequest) -> bool {
        true
    }
}

/// Admits everything; only the simulator's own limits apply.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoControl;

impl NoControl {
    pub fn no_control<T>(offered: T) -> T {
        offered
    }
}

impl AdmissionGate for NoControl {
    fn try_take(&mut self, _req: &IoRequest) -> bool {
        true
    }
}
