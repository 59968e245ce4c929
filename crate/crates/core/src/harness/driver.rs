use std::time::{Duration, Instant};

use crate::baselines::{BypassRouter, CoTo, NoControl};
use crate::collector::DiscreteState;
use crate::controller::{AdaptiveBound, DecisionRecord, LQoCo, LQoCoConfig, Source};
use crate::error::Result;
use crate::executor::TokenBucket;
use crate::harness::config::{ExperimentConfig, Method};
use crate::metrics::{MetricsAccumulator, MetricsReport, TickRow};
use crate::rl::QTable;
use crate::scalar::Scalar;
use crate::seed;
use crate::sim_env::{FlushProcess, Route, StorageEnv, SystemSample};
use crate::workload::IoRequest;

/// State carried into a warm-started L-QoCo run.
#[derive(Clone, Debug, PartialEq)]
pub struct WarmStart<T> {
    pub table: QTable<T>,
    pub bandwidth: T,
    pub lb: T,
    pub ub: T,
}

/// Final learned state of an L-QoCo run.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnedState<T> {
    pub table: QTable<T>,
    pub bandwidth: T,
    pub lb: T,
    pub ub: T,
    pub updates: u64,
}

#[derive(Clone, Debug)]
pub struct RunOutput<T> {
    pub method: Method,
    pub seed: u64,
    pub report: MetricsReport,
    /// Per-tick samples with their completion lists stripped.
    pub samples: Vec<SystemSample>,
    pub decisions: Vec<DecisionRecord>,
    pub ticks: Vec<TickRow>,
    /// `(completion time in seconds, latency)` for every finished request.
    pub completions: Vec<(f64, f64)>,
    pub learned: Option<LearnedState<T>>,
    /// Wall time spent inside the controller, excluding the simulator.
    pub controller_time: Duration,
    /// Requests still queued when the run ended.
    pub backlog: usize,
}

enum Ctrl<T> {
    LQoCo(Box<LQoCo<T>>, TokenBucket),
    CoTo(CoTo<T>, TokenBucket),
    Bypass(BypassRouter),
    None,
}

fn lqoco_config(cfg: &ExperimentConfig, method: Method) -> LQoCoConfig {
    let mut c = cfg.lqoco;
    match method {
        Method::LQoCoNoDomain => c.domain_knowledge = false,
        Method::LQoCoNoBound => c.adaptive_bound = false,
        _ => {}
    }
    c
}

fn build<T: Scalar>(
    cfg: &ExperimentConfig,
    method: Method,
    seed: u64,
    warm: Option<&WarmStart<T>>,
) -> Result<Ctrl<T>> {
    let base = cfg.flush.base_bandwidth;
    Ok(match method {
        Method::NoControl => Ctrl::None,
        Method::Bypass => Ctrl::Bypass(BypassRouter::new(cfg.bypass)?),
        Method::CoTo => Ctrl::CoTo(CoTo::new(cfg.coto, T::lit(base))?, TokenBucket::from_config(&cfg.executor)),
        m => {
            let lc = lqoco_config(cfg, m);
            let ctrl = match warm {
                None => LQoCo::new(lc, cfg.collector, cfg.learner, cfg.bound, base, seed)?,
                Some(w) => {
                    let bound = AdaptiveBound::new(w.lb, w.ub, &cfg.bound)?;
                    LQoCo::with_table(lc, cfg.collector, cfg.learner, bound, w.table.clone(), w.bandwidth, seed)?
                }
            };
            Ctrl::LQoCo(Box::new(ctrl), TokenBucket::from_config(&cfg.executor))
        }
    })
}

/// Simulates one `(method, seed)` pair over `trace`.
pub fn run_one<T: Scalar>(
    cfg: &ExperimentConfig,
    method: Method,
    seed: u64,
    trace: &[IoRequest],
    warm: Option<&WarmStart<T>>,
) -> Result<RunOutput<T>> {
    cfg.validate()?;
    let tick = cfg.sim.tick;
    let ticks = cfg.ticks()?;
    let flush = FlushProcess {
        seed: seed::derive(seed, seed::stream::FLUSH),
        ..cfg.flush
    };
    let mut env = StorageEnv::new(cfg.sim, cfg.cache, flush)?;
    let mut ctrl = build::<T>(cfg, method, seed, warm)?;
    let mut acc = MetricsAccumulator::new(tick, cfg.cache.full_level(), cfg.run.window);
    let mut samples = Vec::with_capacity(ticks as usize);
    let mut decisions = Vec::with_capacity(ticks as usize);
    let mut completions = Vec::new();
    let mut controller_time = Duration::ZERO;
    let mut next = 0usize;

    for t in 0..ticks {
        let horizon = (t + 1) as f64 * tick;
        while next < trace.len() && trace[next].arrival_time < horizon {
            env.enqueue(trace[next]);
            next += 1;
        }

        let mut sample = match &mut ctrl {
            Ctrl::LQoCo(c, bucket) => {
                let grant = c.bandwidth().as_f64();
                bucket.set_bandwidth(grant, tick);
                bucket.replenish();
                env.step(bucket, grant)
            }
            Ctrl::CoTo(c, bucket) => {
                let grant = c.bandwidth().as_f64();
                bucket.set_bandwidth(grant, tick);
                bucket.replenish();
                env.step(bucket, grant)
            }
            Ctrl::Bypass(r) => {
                r.begin_tick();
                let grant = env.queue().bytes() as f64 / tick;
                env.step(r, grant)
            }
            Ctrl::None => {
                let grant = env.queue().bytes() as f64 / tick;
                env.step(&mut NoControl, grant)
            }
        };
        acc.record(&sample);
        let done_at = horizon;
        completions.extend(sample.completed.iter().map(|c| (done_at, c.latency)));

        let started = Instant::now();
        let record = match &mut ctrl {
            Ctrl::LQoCo(c, _) => {
                let (lb, ub) = (c.bound().lb.as_f64(), c.bound().ub.as_f64());
                let out = c.step(&sample)?;
                let d = out.decision;
                DecisionRecord {
                    t,
                    source: d.source,
                    action: d.action_label(),
                    recommended: d.recommended.as_f64(),
                    executed: d.executed.as_f64(),
                    bound_rejected: d.bound_rejected,
                    learn: d.learn,
                    lb,
                    ub,
                    class: Some(out.class),
                }
            }
            Ctrl::CoTo(c, _) => {
                let prev = c.bandwidth();
                let b = c.step(&sample).as_f64();
                let action = if b > prev.as_f64() {
                    "Increase"
                } else if b < prev.as_f64() {
                    "Decrease"
                } else {
                    "Hold"
                };
                passthrough(t, Source::CoTo, action, b)
            }
            Ctrl::Bypass(r) => {
                let probe = match env.queue().front() {
                    Some(p) => (t + 1).saturating_sub(p.arrival_tick) as f64 * tick + cfg.sim.cache_service,
                    None => cfg.sim.cache_service,
                };
                let route = r.current_route();
                r.observe(&sample, probe);
                let action = if route == Route::Storage { "Storage" } else { "Cache" };
                passthrough(t, Source::Bypass, action, sample.grant_bw)
            }
            Ctrl::None => passthrough(t, Source::NoControl, "Admit", sample.grant_bw),
        };
        controller_time += started.elapsed();
        decisions.push(record);
        sample.completed = Vec::new();
        samples.push(sample);
    }

    let label = cfg.workload_label()?;
    let report = acc.finish(method.label(), &label, seed)?;
    let learned = match &ctrl {
        Ctrl::LQoCo(c, _) => Some(LearnedState {
            table: c.table().clone(),
            bandwidth: c.bandwidth(),
            lb: c.bound().lb,
            ub: c.bound().ub,
            updates: c.learner().updates(),
        }),
        _ => None,
    };
    debug_assert!(learned.as_ref().is_none_or(|l| l.table.states() == DiscreteState::COUNT));
    Ok(RunOutput {
        method,
        seed,
        report,
        ticks: acc.rows().to_vec(),
        samples,
        decisions,
        completions,
        learned,
        controller_time,
        backlog: env.queue().len(),
    })
}

fn passthrough(t: u64, source: Source, action: &str, bw: f64) -> DecisionRecord {
    DecisionRecord {
        t,
        source,
        action: action.to_string(),
        recommended: bw,
        executed: bw,
        bound_rejected: false,
        learn: false,
        lb: 0.0,
        ub: 0.0,
        class: None,
    }
}
