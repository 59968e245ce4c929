//! The learned bandwidth controller: safe-action overrides, fine-tuning in
//! better states, an epsilon-greedy policy, and the adaptive bound.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collector::{
    classify, Bdp, DiscreteState, DiscretizationConfig, Extreme, StateClass, StateCollector,
    StateSample, WaterLevel,
};
use crate::error::{Error, Result};
use crate::rl::{
    compute_reward, select_action, Action, ActionRates, LearnerConfig, PerLearner, QTable,
    RewardMode, RewardWeights,
};
use crate::scalar::Scalar;
use crate::seed;
use crate::sim_env::SystemSample;
use crate::textio;

pub const DECISIONS_HEADER: &str = "#qoco-decisions v1";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundConfig {
    /// Initial `lb` as a multiple of the flush base bandwidth.
    pub lower_factor: f64,
    /// Initial `ub` as a multiple of the flush base bandwidth.
    pub upper_factor: f64,
    pub window: usize,
    pub violation_threshold: f64,
    pub sigma: f64,
    pub decay: f64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            lower_factor: 0.2,
            upper_factor: 5.0,
            window: 30,
            violation_threshold: 0.9,
            sigma: 0.15,
            decay: 0.5,
        }
    }
}

impl BoundConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lower_factor > 0.0 && self.lower_factor <= self.upper_factor) {
            return Err(Error::invalid("bound", "need 0 < lower_factor <= upper_factor"));
        }
        if self.window == 0 {
            return Err(Error::invalid("bound", "window must be positive"));
        }
        if !(self.violation_threshold > 0.0 && self.violation_threshold < 1.0) {
            return Err(Error::invalid("bound", "violation_threshold must lie in (0,1)"));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::invalid("bound", "sigma must lie in (0,1)"));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::invalid("bound", "decay must lie in (0,1)"));
        }
        Ok(())
    }
}

/// Dynamically maintained `[lb, ub]` band for recommended bandwidths.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveBound<T> {
    pub lb: T,
    pub ub: T,
    pub c_b: usize,
    pub v_lb: T,
    pub v_ub: T,
    pub n: usize,
    pub v: T,
    pub sigma: T,
    pub delta: T,
    history: VecDeque<T>,
}

impl<T: Scalar> AdaptiveBound<T> {
    pub fn new(lb: T, ub: T, cfg: &BoundConfig) -> Result<Self> {
        cfg.validate()?;
        if !(lb <= ub) {
            return Err(Error::invalid("bound", format!("lb {lb} exceeds ub {ub}")));
        }
        Ok(Self {
            lb,
            ub,
            c_b: 0,
            v_lb: T::zero(),
            v_ub: T::zero(),
            n: cfg.window,
            v: T::lit(cfg.violation_threshold),
            sigma: T::lit(cfg.sigma),
            delta: T::lit(cfg.decay),
            history: VecDeque::with_capacity(cfg.window + 1),
        })
    }

    pub fn from_base(base: f64, cfg: &BoundConfig) -> Result<Self> {
        Self::new(
            T::lit(base * cfg.lower_factor),
            T::lit(base * cfg.upper_factor),
            cfg,
        )
    }

    pub fn history(&self) -> impl Iterator<Item = T> + '_ {
        self.history.iter().copied()
    }

    pub fn contains(&self, x: T) -> bool {
        self.lb <= x && x <= self.ub
    }
}

/// Executes `recommended` when it lies inside the band, otherwise holds
/// the previous bandwidth.
pub fn bound_gate<T: Scalar>(bound: &AdaptiveBound<T>, recommended: T, prev: T) -> (T, bool) {
    if bound.contains(recommended) {
        (recommended, false)
    } else {
        (prev, true)
    }
}

/// One iteration of the adaptive bound loop.
pub fn update_bounds<T: Scalar>(bound: &mut AdaptiveBound<T>, recommended: T, better: bool) {
    let previous = bound.history.back().copied().unwrap_or(recommended);
    bound.history.push_back(recommended);
    while bound.history.len() > bound.n {
        bound.history.pop_front();
    }
    if better {
        bound.c_b += 1;
    }
    if recommended > bound.ub {
        bound.v_ub = (bound.v_ub - T::one()) * bound.delta + T::one();
    }
    if recommended < bound.lb {
        bound.v_lb = (bound.v_lb - T::one()) * bound.delta + T::one();
    }
    if bound.c_b >= bound.n {
        let sum = bound.history.iter().fold(T::zero(), |s, &x| s + x);
        let mean = sum / T::from_usize_lossy(bound.history.len());
        bound.lb = mean * (T::one() - bound.sigma);
        bound.ub = mean * (T::one() + bound.sigma);
        bound.c_b = 0;
    }
    // The snap targets are clamped against the opposite edge so lb <= ub
    // survives a snap to an out-of-band recommendation.
    if bound.v_lb > bound.v {
        bound.lb = previous.min(bound.ub);
        bound.v_lb = T::zero();
    }
    if bound.v_ub > bound.v {
        bound.ub = previous.max(bound.lb);
        bound.v_ub = T::zero();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafeActionConfig {
    /// `W` at or above which a High watermark forces FastDecrease.
    pub fast_decrease_watermark: f64,
    /// `B` at or above which Overuse forces FastDecrease.
    pub fast_decrease_bdp: f64,
    /// `W` below which an ExtremelyLow watermark forces FastIncrease.
    pub fast_increase_watermark: f64,
    /// `B` below which Underuse forces FastIncrease.
    pub fast_increase_bdp: f64,
}

impl Default for SafeActionConfig {
    fn default() -> Self {
        Self {
            fast_decrease_watermark: 90.0,
            fast_decrease_bdp: 150.0,
            fast_increase_watermark: 5.0,
            fast_increase_bdp: 7.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LQoCoConfig {
    pub rates: ActionRates,
    pub safe: SafeActionConfig,
    pub fine_tune_rate: f64,
    /// Watermark change, in percentage points, treated as no trend.
    pub fine_tune_deadband: f64,
    pub domain_knowledge: bool,
    pub adaptive_bound: bool,
    pub reward_mode: RewardMode,
    pub reward_weights: RewardWeights,
    /// Smallest bandwidth the controller will recommend, bytes/second.
    pub min_bandwidth: f64,
}

impl Default for LQoCoConfig {
    fn default() -> Self {
        Self {
            rates: ActionRates::default(),
            safe: SafeActionConfig::default(),
            fine_tune_rate: 0.001,
            fine_tune_deadband: 0.1,
            domain_knowledge: true,
            adaptive_bound: true,
            reward_mode: RewardMode::default(),
            reward_weights: RewardWeights::default(),
            min_bandwidth: 4096.0,
        }
    }
}

impl LQoCoConfig {
    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        self.reward_weights.validate()?;
        if !(self.fine_tune_rate >= 0.0 && self.fine_tune_rate < 1.0) {
            return Err(Error::invalid("lqoco", "fine_tune_rate must lie in [0,1)"));
        }
        if !(self.fine_tune_deadband >= 0.0) {
            return Err(Error::invalid("lqoco", "fine_tune_deadband must be non-negative"));
        }
        if !(self.min_bandwidth > 0.0) {
            return Err(Error::invalid("lqoco", "min_bandwidth must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    Policy,
    SafeAction,
    FineTune,
    CoTo,
    Bypass,
    NoControl,
}

impl Source {
    pub fn label(self) -> &'static str {
        match self {
            Source::Policy => "policy",
            Source::SafeAction => "safe_action",
            Source::FineTune => "fine_tune",
            Source::CoTo => "coto",
            Source::Bypass => "bypass",
            Source::NoControl => "none",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerDecision<T> {
    pub recommended: T,
    pub executed: T,
    /// Discrete action for policy and safe-action ticks.
    pub action: Option<Action>,
    /// Rate applied to the previous bandwidth.
    pub rate: T,
    pub source: Source,
    pub bound_rejected: bool,
    pub learn: bool,
}

impl<T: Scalar> ControllerDecision<T> {
    pub fn action_label(&self) -> String {
        match self.action {
            Some(a) => a.label().to_string(),
            None if self.rate > T::zero() => "FineUp".to_string(),
            None if self.rate < T::zero() => "FineDown".to_string(),
            None => "FineHold".to_string(),
        }
    }
}

fn safe_action<T: Scalar>(d: DiscreteState, s: &StateSample<T>, ext: Extreme, cfg: &SafeActionConfig) -> Action {
    match ext {
        Extreme::High => {
            let fast = (d.w == WaterLevel::High && s.w >= T::lit(cfg.fast_decrease_watermark))
                || (d.b == Bdp::Overuse && s.b >= T::lit(cfg.fast_decrease_bdp));
            if fast {
                Action::FastDecrease
            } else {
                Action::SlowDecrease
            }
        }
        Extreme::Low => {
            let fast = (d.w == WaterLevel::ExtremelyLow && s.w < T::lit(cfg.fast_increase_watermark))
                || (d.b == Bdp::Underuse && s.b < T::lit(cfg.fast_increase_bdp));
            if fast {
                Action::FastIncrease
            } else {
                Action::SlowIncrease
            }
        }
    }
}

/// Chooses the next bandwidth for one tick.
///
/// `prev_w` is the previous tick's watermark, used for fine-tuning.
#[allow(clippy::too_many_arguments)]
pub fn decide<T: Scalar, R: Rng + ?Sized>(
    d: DiscreteState,
    cls: StateClass,
    s: &StateSample<T>,
    prev_w: Option<T>,
    i_prev: T,
    q: &QTable<T>,
    bound: &AdaptiveBound<T>,
    cfg: &LQoCoConfig,
    epsilon: f64,
    tie_order: &[usize],
    rng: &mut R,
) -> Result<ControllerDecision<T>> {
    if !(i_prev > T::zero()) {
        return Err(Error::NonPositiveBandwidth(i_prev.as_f64()));
    }
    let (source, action, rate) = match cls.extreme {
        Some(ext) if cfg.domain_knowledge => {
            let a = safe_action(d, s, ext, &cfg.safe);
            (Source::SafeAction, Some(a), T::lit(cfg.rates.rate(a)))
        }
        _ if cfg.domain_knowledge && cls.is_better() => {
            let band = T::lit(cfg.fine_tune_deadband);
            let step = T::lit(cfg.fine_tune_rate);
            let rate = match prev_w {
                Some(pw) if s.w < pw - band => step,
                Some(pw) if s.w > pw + band => -step,
                _ => T::zero(),
            };
            (Source::FineTune, None, rate)
        }
        _ => {
            let a = select_action(q, d.index(), epsilon, tie_order, rng).map_err(|_| {
                Error::AllActionsMasked {
                    state: d.to_string(),
                }
            })?;
            let a = Action::from_index(a);
            (Source::Policy, Some(a), T::lit(cfg.rates.rate(a)))
        }
    };
    let recommended = ((T::one() + rate) * i_prev).max(T::lit(cfg.min_bandwidth));
    let (executed, bound_rejected) = if cfg.adaptive_bound {
        bound_gate(bound, recommended, i_prev)
    } else {
        (recommended, false)
    };
    Ok(ControllerDecision {
        recommended,
        executed,
        action,
        rate,
        source,
        bound_rejected,
        learn: source == Source::Policy && !bound_rejected,
    })
}

#[derive(Clone, Copy, Debug)]
struct Previous {
    state: usize,
    action: usize,
    learn: bool,
}

/// Everything the driver needs to log about one controller tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TickOutcome<T> {
    pub state: DiscreteState,
    pub class: StateClass,
    pub sample: StateSample<T>,
    pub decision: ControllerDecision<T>,
}

/// Per-run controller state: collector, learner, bound and current bandwidth.
#[derive(Clone, Debug)]
pub struct LQoCo<T> {
    cfg: LQoCoConfig,
    collector: StateCollector<T>,
    learner: PerLearner<T>,
    bound: AdaptiveBound<T>,
    rng: ChaCha8Rng,
    prev: Option<Previous>,
    prev_w: Option<T>,
    bandwidth: T,
}

impl<T: Scalar> LQoCo<T> {
    /// Cold start: zeroed table, bandwidth and bounds from `base`.
    pub fn new(
        cfg: LQoCoConfig,
        discretization: DiscretizationConfig,
        learner: LearnerConfig,
        bound: BoundConfig,
        base: f64,
        seed: u64,
    ) -> Result<Self> {
        let table = if cfg.domain_knowledge {
            QTable::with_domain_mask()
        } else {
            QTable::new(DiscreteState::COUNT, Action::COUNT)
        };
        let bound = AdaptiveBound::from_base(base, &bound)?;
        Self::with_table(cfg, discretization, learner, bound, table, T::lit(base), seed)
    }

    /// Starts from an existing table, bound and bandwidth.
    pub fn with_table(
        cfg: LQoCoConfig,
        discretization: DiscretizationConfig,
        learner: LearnerConfig,
        bound: AdaptiveBound<T>,
        table: QTable<T>,
        bandwidth: T,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        discretization.validate()?;
        learner.validate()?;
        if (table.states(), table.actions()) != (DiscreteState::COUNT, Action::COUNT) {
            return Err(Error::invalid("qtable", "expected a 36 x 5 table"));
        }
        if !(bandwidth > T::zero()) {
            return Err(Error::NonPositiveBandwidth(bandwidth.as_f64()));
        }
        let tie_order = cfg.rates.tie_order();
        Ok(Self {
            learner: PerLearner::new(table, learner, tie_order, seed::derive(seed, seed::stream::REPLAY)),
            collector: StateCollector::new(discretization),
            bound,
            rng: ChaCha8Rng::seed_from_u64(seed::derive(seed, seed::stream::POLICY)),
            prev: None,
            prev_w: None,
            bandwidth,
            cfg,
        })
    }

    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    pub fn bound(&self) -> &AdaptiveBound<T> {
        &self.bound
    }

    pub fn table(&self) -> &QTable<T> {
        self.learner.table()
    }

    pub fn learner(&self) -> &PerLearner<T> {
        &self.learner
    }

    pub fn config(&self) -> &LQoCoConfig {
        &self.cfg
    }

    pub fn discretization(&self) -> &DiscretizationConfig {
        self.collector.config()
    }

    /// Observes the tick's sample, learns from the previous decision if it
    /// was eligible, and sets the bandwidth for the next tick.
    pub fn step(&mut self, sample: &SystemSample) -> Result<TickOutcome<T>> {
        let s = self.collector.compute_state(sample);
        self.step_state(s)
    }

    pub fn step_state(&mut self, s: StateSample<T>) -> Result<TickOutcome<T>> {
        let d = self.collector.discretize(&s);
        let cls = classify(d);
        if let Some(p) = self.prev.filter(|p| p.learn) {
            let r: T = compute_reward(d, &self.cfg.reward_weights, self.cfg.reward_mode);
            self.learner.observe(p.state, p.action, r, d.index());
        }
        let epsilon = self.learner.config().epsilon;
        let decision = decide(
            d,
            cls,
            &s,
            self.prev_w,
            self.bandwidth,
            self.learner.table(),
            &self.bound,
            &self.cfg,
            epsilon,
            self.learner.tie_order(),
            &mut self.rng,
        )?;
        if self.cfg.adaptive_bound {
            update_bounds(&mut self.bound, decision.recommended, cls.is_better());
        }
        self.bandwidth = decision.executed;
        self.prev = Some(Previous {
            state: d.index(),
            action: decision.action.map_or(Action::Keep.index(), Action::index),
            learn: decision.learn,
        });
        self.prev_w = Some(s.w);
        Ok(TickOutcome {
            state: d,
            class: cls,
            sample: s,
            decision,
        })
    }
}

/// One row of the decision log.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionRecord {
    pub t: u64,
    pub source: Source,
    pub action: String,
    pub recommended: f64,
    pub executed: f64,
    pub bound_rejected: bool,
    pub learn: bool,
    pub lb: f64,
    pub ub: f64,
    /// Class of the state the decision was made in; not written to the log.
    pub class: Option<StateClass>,
}

pub fn write_decision_log(rows: &[DecisionRecord], path: &Path) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 80 + 64);
    out.push_str(DECISIONS_HEADER);
    out.push('\n');
    out.push_str("t,source,action,recommended_I,executed_I,bound_rejected,learn,lb,ub\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:?},{:?},{},{},{:?},{:?}\n",
            r.t,
            r.source,
            r.action,
            r.recommended,
            r.executed,
            r.bound_rejected as u8,
            r.learn as u8,
            r.lb,
            r.ub
        ));
    }
    textio::write_file(path, &out)
}
