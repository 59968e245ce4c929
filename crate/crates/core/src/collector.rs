//! Continuous state `(W, P, B)`, its discretization and state categories.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim_env::SystemSample;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateSample<T> {
    /// Watermark, percent.
    pub w: T,
    /// Processing ability `(I - O) / O`.
    pub p: T,
    /// Destage demand as a percentage of the estimated maximum flush bandwidth.
    pub b: T,
    /// Set when `O == 0` made `P` undefined; `p` is then `+inf`.
    pub p_undefined: bool,
}

macro_rules! labelled_enum {
    ($name:ident { $($variant:ident),+ $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn index(self) -> usize {
                self as usize
            }

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => stringify!($variant)),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                Self::ALL
                    .iter()
                    .copied()
                    .find(|v| v.label() == s)
                    .ok_or_else(|| s.to_string())
            }
        }
    };
}

labelled_enum!(WaterLevel { ExtremelyLow, Low, Mid, High });
labelled_enum!(Processing { Low, Mid, High });
labelled_enum!(Bdp { Underuse, Fulluse, Overuse });

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DiscreteState {
    pub w: WaterLevel,
    pub p: Processing,
    pub b: Bdp,
}

impl DiscreteState {
    pub const COUNT: usize = 4 * 3 * 3;

    pub fn new(w: WaterLevel, p: Processing, b: Bdp) -> Self {
        Self { w, p, b }
    }

    pub fn index(self) -> usize {
        (self.w.index() * 3 + self.p.index()) * 3 + self.b.index()
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < Self::COUNT, "state index {i} out of range");
        Self {
            w: WaterLevel::ALL[i / 9],
            p: Processing::ALL[(i / 3) % 3],
            b: Bdp::ALL[i % 3],
        }
    }

    pub fn all() -> impl Iterator<Item = DiscreteState> {
        (0..Self::COUNT).map(Self::from_index)
    }
}

impl fmt::Display for DiscreteState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.w, self.p, self.b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Category {
    Better,
    Worse,
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Extreme {
    High,
    Low,
}

/// Category plus the extreme-state flag that overrides the learned policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StateClass {
    pub category: Category,
    pub extreme: Option<Extreme>,
}

impl StateClass {
    pub fn is_better(self) -> bool {
        self.category == Category::Better
    }

    pub fn label(self) -> &'static str {
        match (self.extreme, self.category) {
            (Some(Extreme::High), _) => "ExtremeHigh",
            (Some(Extreme::Low), _) => "ExtremeLow",
            (None, Category::Better) => "Better",
            (None, Category::Worse) => "Worse",
            (None, Category::General) => "General",
        }
    }
}

pub fn is_extreme_high(d: DiscreteState) -> bool {
    d.w == WaterLevel::High || d.p == Processing::High || d.b == Bdp::Overuse
}

pub fn is_extreme_low(d: DiscreteState) -> bool {
    d.w == WaterLevel::ExtremelyLow || d.p == Processing::Low || d.b == Bdp::Underuse
}

/// When both extreme predicates hold, the high side wins.
pub fn classify(d: DiscreteState) -> StateClass {
    let category = if d.w == WaterLevel::Mid && d.p == Processing::Mid && d.b == Bdp::Fulluse {
        Category::Better
    } else if d.w == WaterLevel::High
        && matches!(d.p, Processing::Low | Processing::High)
        && d.b == Bdp::Overuse
    {
        Category::Worse
    } else {
        Category::General
    };
    let extreme = if is_extreme_high(d) {
        Some(Extreme::High)
    } else if is_extreme_low(d) {
        Some(Extreme::Low)
    } else {
        None
    };
    StateClass { category, extreme }
}

/// Band edges for each state dimension.
///
/// Watermark: `[0,w0) [w0,w1) [w1,w2) [w2,100]`. Processing ability:
/// `(-inf,p0] (p0,p1) [p1,inf)`. BDP: `[0,b0) [b0,b1) [b1,inf)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationConfig {
    pub watermark_edges: [f64; 3],
    pub processing_edges: [f64; 2],
    pub bdp_edges: [f64; 2],
    pub bdp_max_decay: f64,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self {
            watermark_edges: [10.0, 30.0, 80.0],
            processing_edges: [-0.1, 0.1],
            bdp_edges: [15.0, 100.0],
            bdp_max_decay: 0.999,
        }
    }
}

impl DiscretizationConfig {
    pub fn validate(&self) -> Result<()> {
        let [w0, w1, w2] = self.watermark_edges;
        if !(0.0 < w0 && w0 < w1 && w1 < w2 && w2 <= 100.0) {
            return Err(Error::invalid("discretization", "watermark edges must increase within (0,100]"));
        }
        let [p0, p1] = self.processing_edges;
        if !(-1.0 <= p0 && p0 < p1) {
            return Err(Error::invalid("discretization", "processing edges must increase from >= -1"));
        }
        let [b0, b1] = self.bdp_edges;
        if !(0.0 < b0 && b0 < b1) {
            return Err(Error::invalid("discretization", "bdp edges must increase from > 0"));
        }
        if !(self.bdp_max_decay > 0.0 && self.bdp_max_decay <= 1.0) {
            return Err(Error::invalid("discretization", "bdp_max_decay must lie in (0,1]"));
        }
        Ok(())
    }

    /// Compact description of the bands, stored with saved Q-tables.
    pub fn fingerprint(&self) -> String {
        let [w0, w1, w2] = self.watermark_edges;
        let [p0, p1] = self.processing_edges;
        let [b0, b1] = self.bdp_edges;
        format!("w={w0},{w1},{w2} p={p0},{p1} b={b0},{b1}")
    }
}

pub fn discretize<T: Scalar>(s: &StateSample<T>, cfg: &DiscretizationConfig) -> DiscreteState {
    let [w0, w1, w2] = cfg.watermark_edges.map(T::lit);
    let w = if s.w < w0 {
        WaterLevel::ExtremelyLow
    } else if s.w < w1 {
        WaterLevel::Low
    } else if s.w < w2 {
        WaterLevel::Mid
    } else {
        WaterLevel::High
    };
    let [p0, p1] = cfg.processing_edges.map(T::lit);
    let p = if s.p_undefined || s.p.is_nan() {
        Processing::High
    } else if s.p <= p0 {
        Processing::Low
    } else if s.p < p1 {
        Processing::Mid
    } else {
        Processing::High
    };
    let [b0, b1] = cfg.bdp_edges.map(T::lit);
    let b = if s.b < b0 {
        Bdp::Underuse
    } else if s.b < b1 {
        Bdp::Fulluse
    } else {
        Bdp::Overuse
    };
    DiscreteState { w, p, b }
}

/// Turns simulator samples into state observations.
///
/// Owns the decayed running maximum of observed flush bandwidth used as the
/// denominator of `B`.
#[derive(Clone, Debug)]
pub struct StateCollector<T> {
    cfg: DiscretizationConfig,
    flush_max: T,
}

impl<T: Scalar> StateCollector<T> {
    pub fn new(cfg: DiscretizationConfig) -> Self {
        Self {
            cfg,
            flush_max: T::zero(),
        }
    }

    pub fn config(&self) -> &DiscretizationConfig {
        &self.cfg
    }

    pub fn flush_max_estimate(&self) -> T {
        self.flush_max
    }

    pub fn compute_state(&mut self, sample: &SystemSample) -> StateSample<T> {
        self.observe(
            T::lit(sample.watermark),
            T::lit(sample.admitted_bw),
            T::lit(sample.flushed_bw),
            T::lit(sample.destage_demand_bw),
        )
    }

    /// Raw-value form of [`compute_state`](Self::compute_state).
    pub fn observe(&mut self, watermark: T, admitted: T, flushed: T, demand: T) -> StateSample<T> {
        let decayed = self.flush_max * T::lit(self.cfg.bdp_max_decay);
        self.flush_max = if flushed > decayed { flushed } else { decayed };
        let p_undefined = flushed <= T::zero();
        let p = if p_undefined {
            T::infinity()
        } else {
            (admitted - flushed) / flushed
        };
        let b = if self.flush_max > T::zero() {
            T::lit(100.0) * demand / self.flush_max
        } else if demand > T::zero() {
            T::infinity()
        } else {
            T::zero()
        };
        StateSample {
            w: watermark,
            p,
            b,
            p_undefined,
        }
    }

    pub fn discretize(&self, s: &StateSample<T>) -> DiscreteState {
        discretize(s, &self.cfg)
    }
}
