//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Runs without the libtest harness so the lines
//! always reach the console.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qoco::baselines::{CoTo, CoToConfig};
use qoco::collector::{classify, Bdp, Category, DiscreteState, Extreme, Processing, WaterLevel};
use qoco::controller::{update_bounds, AdaptiveBound, BoundConfig};
use qoco::harness::{run_all, run_experiment, run_one, ExperimentConfig, Method, RunOutput, WorkloadKind};
use qoco::metrics::{jitter, percentile, windowed_percentile};
use qoco::rl::{compute_reward, save_qtable, select_action, Action, LearnerConfig, PerLearner, QTable, RewardMode, RewardWeights};
use qoco::workload::build_standard_spec;

const WORKLOADS: [&str; 5] = ["S-1", "S-3", "S-6", "S-9", "S-14"];
const SEEDS: u64 = 10;
const LOAD_FACTOR: f64 = 1.5;
const RUN_LIMIT_SECS: f64 = 120.0;

const JITTER_RATIO: f64 = 0.5;
const FULL_RATIO: f64 = 0.5;
const PAIR_SHARE: f64 = 0.8;
const COTO_SHARE: f64 = 0.7;
const COTO_THROUGHPUT: f64 = 0.95;

const BOUNDARY_HALF_WINDOW: f64 = 60.0;

const MDP_TOLERANCE: f64 = 1e-3;
const MDP_UPDATES: u64 = 50_000;
const MDP_SEEDS: u64 = 10;
const MDP_TIME_LIMIT: f64 = 5.0;

const WATERMARK_REL_TOL: f64 = 1e-9;
const BUCKET_WINDOW: usize = 10;
const TICK_BUDGET_SECS: f64 = 1e-3;
const QTABLE_MAX_BYTES: u64 = 100 * 1024;

type Check<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn share(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Flush of 80 requests per second, a cache that holds 30 seconds of flush.
fn sweep_config(id: &str) -> ExperimentConfig {
    let io = build_standard_spec(id, 1.0, 1.0).expect("standard id").io_size as f64;
    let mut cfg = ExperimentConfig::default();
    cfg.workload.id = id.to_string();
    cfg.workload.load_factor = LOAD_FACTOR;
    cfg.flush.base_bandwidth = 80.0 * io;
    cfg.cache.capacity = (30.0 * 80.0 * io) as u64;
    cfg.run.methods = vec![Method::NoControl, Method::CoTo, Method::LQoCo];
    cfg.run.seeds = (1..=SEEDS).collect();
    cfg.run.logs = false;
    cfg
}

fn changing_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.workload.kind = WorkloadKind::Changing;
    cfg.workload.load_factor = LOAD_FACTOR;
    cfg.workload.phase_duration = 300.0;
    cfg.flush.base_bandwidth = 64.0 * 256.0 * 1024.0;
    cfg.cache.capacity = (30.0 * cfg.flush.base_bandwidth) as u64;
    cfg.run.methods = vec![Method::NoControl, Method::LQoCo];
    cfg.run.seeds = vec![1, 2, 3];
    cfg.run.logs = false;
    cfg
}

struct Sweep {
    /// workload -> seed -> method -> run
    runs: BTreeMap<String, BTreeMap<u64, BTreeMap<Method, RunOutput<f64>>>>,
    slowest_run: f64,
}

impl Sweep {
    fn pairs(&self) -> impl Iterator<Item = (&str, u64, &BTreeMap<Method, RunOutput<f64>>)> {
        self.runs
            .iter()
            .flat_map(|(w, seeds)| seeds.iter().map(move |(s, m)| (w.as_str(), *s, m)))
    }
}

fn sweep() -> Sweep {
    let mut runs: BTreeMap<_, BTreeMap<_, BTreeMap<_, _>>> = BTreeMap::new();
    for id in WORKLOADS {
        let cfg = sweep_config(id);
        for r in run_all::<f64>(&cfg).expect("sweep run") {
            runs.entry(id.to_string()).or_default().entry(r.seed).or_default().insert(r.method, r);
        }
    }

    // Wall time of a single run, timed on its own rather than inside the pool.
    let mut slowest_run: f64 = 0.0;
    for id in WORKLOADS {
        let cfg = sweep_config(id);
        let trace = cfg.trace(1).expect("trace");
        for m in [Method::NoControl, Method::LQoCo] {
            let start = Instant::now();
            run_one::<f64>(&cfg, m, 1, &trace, None).expect("timed run");
            slowest_run = slowest_run.max(start.elapsed().as_secs_f64());
        }
    }
    Sweep { runs, slowest_run }
}

fn jitter_vs_none(sw: &Sweep) -> Outcome {
    let (mut hits, mut total) = (0, 0);
    let mut misses = Vec::new();
    for (w, s, m) in sw.pairs() {
        total += 1;
        let (l, n) = (m[&Method::LQoCo].report.jitter, m[&Method::NoControl].report.jitter);
        if l <= JITTER_RATIO * n {
            hits += 1;
        } else {
            misses.push(format!("{w}/{s} {l:.3} vs {n:.3}"));
        }
    }
    let sh = share(hits, total);
    outcome(
        sh >= PAIR_SHARE && sw.slowest_run <= RUN_LIMIT_SECS,
        format!(
            "{hits}/{total} pairs ({:.0}%) with jitter <= {JITTER_RATIO}x none, need {:.0}%; slowest run {:.2}s of {RUN_LIMIT_SECS}s{}",
            sh * 100.0,
            PAIR_SHARE * 100.0,
            sw.slowest_run,
            miss_list(&misses)
        ),
    )
}

fn cache_full_vs_none(sw: &Sweep) -> Outcome {
    let (mut hits, mut total) = (0, 0);
    let mut misses = Vec::new();
    for (w, s, m) in sw.pairs() {
        total += 1;
        let l = m[&Method::LQoCo].report.cache_full_total();
        let n = m[&Method::NoControl].report.cache_full_total();
        if l <= FULL_RATIO * n {
            hits += 1;
        } else {
            misses.push(format!("{w}/{s} {l}s vs {n}s"));
        }
    }
    let sh = share(hits, total);
    outcome(
        sh >= PAIR_SHARE,
        format!(
            "{hits}/{total} pairs ({:.0}%) with cache-full time <= {FULL_RATIO}x none, need {:.0}%{}",
            sh * 100.0,
            PAIR_SHARE * 100.0,
            miss_list(&misses)
        ),
    )
}

fn versus_coto(sw: &Sweep) -> Outcome {
    let (mut hits, mut total) = (0, 0);
    let mut misses = Vec::new();
    for (w, s, m) in sw.pairs() {
        total += 1;
        let (l, c) = (&m[&Method::LQoCo].report, &m[&Method::CoTo].report);
        if l.jitter <= c.jitter && l.mean_throughput >= COTO_THROUGHPUT * c.mean_throughput {
            hits += 1;
        } else {
            misses.push(format!(
                "{w}/{s} jitter {:.3}/{:.3} thr {:.3}",
                l.jitter,
                c.jitter,
                l.mean_throughput / c.mean_throughput
            ));
        }
    }
    let sh = share(hits, total);
    outcome(
        sh >= COTO_SHARE,
        format!(
            "{hits}/{total} pairs ({:.0}%) with jitter <= coto and throughput >= {COTO_THROUGHPUT}x coto, need {:.0}%{}",
            sh * 100.0,
            COTO_SHARE * 100.0,
            miss_list(&misses)
        ),
    )
}

fn miss_list(misses: &[String]) -> String {
    if misses.is_empty() {
        String::new()
    } else {
        let shown: Vec<_> = misses.iter().take(5).cloned().collect();
        format!(" [misses: {}{}]", shown.join("; "), if misses.len() > 5 { "; ..." } else { "" })
    }
}

fn changing_boundaries() -> Outcome {
    let cfg = changing_config();
    // Interior points only: the run's start and end are not phase changes.
    let all = cfg.sequence().expect("sequence").expect("changing").boundaries();
    let boundaries = &all[1..all.len() - 1];
    let runs = run_all::<f64>(&cfg).expect("changing run");
    let mut by_seed: BTreeMap<u64, BTreeMap<Method, &RunOutput<f64>>> = BTreeMap::new();
    for r in &runs {
        by_seed.entry(r.seed).or_default().insert(r.method, r);
    }
    let (mut ok, mut total) = (0, 0);
    let mut worst: f64 = 0.0;
    let mut misses = Vec::new();
    for (seed, m) in &by_seed {
        for &b in boundaries {
            total += 1;
            let (from, to) = (b - BOUNDARY_HALF_WINDOW, b + BOUNDARY_HALF_WINDOW);
            let l = windowed_percentile(&m[&Method::LQoCo].completions, from, to, 99.9);
            let n = windowed_percentile(&m[&Method::NoControl].completions, from, to, 99.9);
            match (l, n) {
                (Ok(l), Ok(n)) if l < n => {
                    ok += 1;
                    worst = worst.max(l / n);
                }
                (l, n) => misses.push(format!("seed {seed} t={b}: {l:?} vs {n:?}")),
            }
        }
    }
    outcome(
        ok == total && total > 0,
        format!(
            "{ok}/{total} boundary windows (+-{BOUNDARY_HALF_WINDOW}s, {} seeds) with p99.9 below none, worst ratio {worst:.3}{}",
            by_seed.len(),
            miss_list(&misses)
        ),
    )
}

/// Deterministic three-state, two-action MDP: `(next, reward)` per entry.
const MDP: [[(usize, f64); 2]; 3] = [
    [(1, 0.0), (2, 1.0)],
    [(0, 2.0), (2, 0.0)],
    [(2, 0.5), (0, -1.0)],
];
const MDP_GAMMA: f64 = 0.9;

fn value_iteration() -> [[f64; 2]; 3] {
    let mut q = [[0.0f64; 2]; 3];
    loop {
        let mut next = q;
        let mut change: f64 = 0.0;
        for s in 0..3 {
            for a in 0..2 {
                let (s2, r) = MDP[s][a];
                next[s][a] = r + MDP_GAMMA * q[s2][0].max(q[s2][1]);
                change = change.max((next[s][a] - q[s][a]).abs());
            }
        }
        q = next;
        if change < 1e-14 {
            return q;
        }
    }
}

fn learner_oracle() -> Outcome {
    let qstar = value_iteration();
    let cfg = LearnerConfig {
        gamma: MDP_GAMMA,
        learning_rate: 0.5,
        batch_size: 8,
        update_period: 1,
        prune_period: 100,
        capacity: 64,
        epsilon: 0.3,
        ..LearnerConfig::default()
    };
    let start = Instant::now();
    let mut converged = 0;
    let mut worst_err: f64 = 0.0;
    let mut worst_hit = 0u64;
    for seed in 1..=MDP_SEEDS {
        let mut learner = PerLearner::new(QTable::<f64>::new(3, 2), cfg, vec![0, 1], seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
        let mut s = 0usize;
        let mut first_hit = None;
        let err = |l: &PerLearner<f64>| {
            (0..3)
                .flat_map(|s| (0..2).map(move |a| (s, a)))
                .map(|(s, a)| (l.table().get(s, a) - qstar[s][a]).abs())
                .fold(0.0, f64::max)
        };
        while learner.updates() < MDP_UPDATES {
            let a = select_action(learner.table(), s, cfg.epsilon, &[0, 1], &mut rng).expect("action");
            let (s2, r) = MDP[s][a];
            if learner.observe(s, a, r, s2).is_some() && first_hit.is_none() && err(&learner) <= MDP_TOLERANCE {
                first_hit = Some(learner.updates());
            }
            // Occasional restarts keep every state visited.
            s = if rng.random::<f64>() < 0.05 { rng.random_range(0..3) } else { s2 };
        }
        let e = err(&learner);
        worst_err = worst_err.max(e);
        if let Some(h) = first_hit.filter(|_| e <= MDP_TOLERANCE) {
            converged += 1;
            worst_hit = worst_hit.max(h);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        converged == MDP_SEEDS && secs < MDP_TIME_LIMIT,
        format!(
            "{converged}/{MDP_SEEDS} seeds within {MDP_TOLERANCE} of value iteration by {MDP_UPDATES} updates \
             (slowest at {worst_hit}, final max error {worst_err:.2e}), {secs:.2}s of {MDP_TIME_LIMIT}s"
        ),
    )
}

fn formula_exactness(sw: &Sweep) -> Outcome {
    let mut failures: Vec<String> = Vec::new();

    // Watermark rebuilt from per-tick byte flows.
    let cfg = sweep_config("S-3");
    let run = &sw.runs["S-3"][&1][&Method::NoControl];
    let mut occ = 0f64;
    let mut worst_rel: f64 = 0.0;
    for s in &run.samples {
        occ += s.admitted_bytes as f64 - s.flushed_bytes as f64;
        let w = 100.0 * occ / cfg.cache.capacity as f64;
        if s.watermark != 0.0 || w != 0.0 {
            worst_rel = worst_rel.max((w - s.watermark).abs() / s.watermark.abs().max(w.abs()));
        }
    }
    if worst_rel > WATERMARK_REL_TOL {
        failures.push(format!("watermark relative error {worst_rel:.2e}"));
    }

    // Jitter and percentile against definition-based oracles.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..100 {
        let n = rng.random_range(1..400);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1e6)).collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let oracle = var.sqrt() / mean;
        if jitter(&v).expect("jitter") != oracle {
            failures.push(format!("jitter series {i}"));
        }
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        for (num, den) in [(999usize, 1000usize), (99, 100), (50, 100), (1, 1)] {
            let rank = (num * n).div_ceil(den).max(1);
            let q = 100.0 * num as f64 / den as f64;
            if percentile(&v, q).expect("percentile") != sorted[rank - 1] {
                failures.push(format!("percentile {q} series {i}"));
            }
        }
    }

    // Reward extremes under the default weights.
    let weights = RewardWeights::default();
    for d in DiscreteState::all() {
        let r: f64 = compute_reward(d, &weights, RewardMode::ValueTable);
        if classify(d).category == Category::Better && r != 0.75 {
            failures.push(format!("better reward {r}"));
        }
        if !(-1.0..=0.75).contains(&r) {
            failures.push(format!("reward {r} out of range"));
        }
    }
    for p in [Processing::Low, Processing::High] {
        let d = DiscreteState::new(WaterLevel::High, p, Bdp::Overuse);
        let r: f64 = compute_reward(d, &weights, RewardMode::ValueTable);
        if r != -1.0 {
            failures.push(format!("all-minus reward {r}"));
        }
    }

    // CoTo branches.
    let coto_cfg = CoToConfig {
        min_bandwidth: 1e-9,
        ..CoToConfig::default()
    };
    let mut c = CoTo::<f64>::new(coto_cfg, 100.0).expect("coto");
    c.coto_decide(90.0, 100.0, 100.0);
    if c.coto_decide(92.0, 100.0, 100.0) != 0.95 * 100.0 {
        failures.push("coto persistent high".into());
    }
    let mut c = CoTo::<f64>::new(coto_cfg, 100.0).expect("coto");
    c.coto_decide(50.0, 100.0, 100.0);
    if c.coto_decide(55.0, 100.0, 100.0) != 100.0 {
        failures.push("coto persistent mid".into());
    }
    let mut c = CoTo::<f64>::new(coto_cfg, 110.0).expect("coto");
    c.coto_decide(50.0, 110.0, 100.0);
    let expected = (1.0 + (2.0 - 1.0) / 3.0 * ((110.0f64 - 100.0).abs() / 100.0)) * 110.0;
    let got = c.coto_decide(85.0, 110.0, 100.0);
    if got != expected {
        failures.push(format!("coto band change {got} vs {expected}"));
    }

    // Adaptive bound: mean-band refresh, violation recurrence, snap-and-reset.
    let bcfg = BoundConfig {
        window: 3,
        sigma: 0.2,
        decay: 0.5,
        violation_threshold: 0.9,
        ..BoundConfig::default()
    };
    let mut b = AdaptiveBound::<f64>::new(0.0, 1000.0, &bcfg).expect("bound");
    for r in [90.0, 100.0, 110.0] {
        update_bounds(&mut b, r, true);
    }
    if (b.lb, b.ub, b.c_b) != (100.0 * (1.0 - 0.2), 100.0 * (1.0 + 0.2), 0) {
        failures.push(format!("bound refresh lb {} ub {} c_b {}", b.lb, b.ub, b.c_b));
    }
    let mut b = AdaptiveBound::<f64>::new(50.0, 150.0, &bcfg).expect("bound");
    let mut seen = Vec::new();
    for (i, r) in [200.0, 210.0, 220.0, 230.0].into_iter().enumerate() {
        update_bounds(&mut b, r, false);
        if i < 3 {
            seen.push(b.v_ub);
        }
    }
    if seen != [0.5, 0.75, 0.875] {
        failures.push(format!("violation recurrence {seen:?}"));
    }
    if (b.ub, b.v_ub) != (220.0, 0.0) {
        failures.push(format!("snap ub {} v_ub {}", b.ub, b.v_ub));
    }

    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "watermark rel err {worst_rel:.1e}, jitter and percentiles exact on 100 series, reward extremes, coto branches, bound examples"
            )
        } else {
            failures.join("; ")
        },
    )
}

fn gating(sw: &Sweep) -> Outcome {
    let mut failures = Vec::new();
    let (mut extreme, mut rejected, mut windows) = (0usize, 0usize, 0usize);
    for (w, s, m) in sw.pairs() {
        let lq = &m[&Method::LQoCo];
        for (i, d) in lq.decisions.iter().enumerate() {
            if let Some(ext) = d.class.and_then(|c| c.extreme) {
                extreme += 1;
                let dir_ok = match d.action.parse::<Action>() {
                    Ok(a) => match ext {
                        Extreme::High => a.is_decrease(),
                        Extreme::Low => a.is_increase(),
                    },
                    Err(_) => false,
                };
                if d.learn || !dir_ok {
                    failures.push(format!("{w}/{s} t={} extreme {:?} action {} learn {}", d.t, ext, d.action, d.learn));
                }
            }
            if d.bound_rejected {
                rejected += 1;
                let prev = if i == 0 { None } else { Some(lq.decisions[i - 1].executed) };
                if d.learn || prev.is_some_and(|p| p != d.executed) {
                    failures.push(format!("{w}/{s} t={} rejected but executed changed", d.t));
                }
            }
        }
        for method in [Method::LQoCo, Method::CoTo] {
            let r = &m[&method];
            let cfg = sweep_config(w);
            let max_req = build_standard_spec(w, 1.0, 1.0).expect("spec").io_size as f64;
            for win in r.samples.windows(BUCKET_WINDOW) {
                windows += 1;
                let admitted: u64 = win.iter().map(|x| x.admitted_bytes).sum();
                let granted: f64 = win.iter().map(|x| x.grant_bw * cfg.sim.tick).sum();
                if admitted as f64 > granted + max_req {
                    failures.push(format!("{w}/{s} {} bucket window at t={}", method.label(), win[0].t));
                }
            }
        }
    }
    let n = failures.len();
    outcome(
        n == 0,
        format!(
            "{extreme} extreme ticks, {rejected} rejected ticks, {windows} bucket windows checked, {n} violations{}",
            miss_list(&failures)
        ),
    )
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).expect("read dir") {
            let p = e.expect("entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(root).expect("prefix").display().to_string();
                out.insert(key, std::fs::read(&p).expect("read file"));
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let mut cfg = sweep_config("S-6");
    cfg.run.seeds = vec![3];
    cfg.run.methods = vec![Method::NoControl, Method::CoTo, Method::Bypass, Method::LQoCo];
    cfg.run.logs = true;
    let (a, b) = (tempfile::tempdir().expect("tmp"), tempfile::tempdir().expect("tmp"));
    run_experiment(&cfg, a.path()).expect("first run");
    run_experiment(&cfg, b.path()).expect("second run");
    let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
    let differing: Vec<_> = ta.keys().filter(|k| ta.get(*k) != tb.get(*k)).cloned().collect();
    let has_logs = ["report.txt", "samples.csv", "decisions.csv"]
        .iter()
        .all(|f| ta.keys().any(|k| k.ends_with(f)));
    outcome(
        differing.is_empty() && ta.len() == tb.len() && has_logs,
        format!("{} files compared across two runs, {} differ", ta.len(), differing.len()),
    )
}

fn efficiency(sw: &Sweep) -> Outcome {
    let mut worst: f64 = 0.0;
    for (_, _, m) in sw.pairs() {
        let r = &m[&Method::LQoCo];
        worst = worst.max(r.controller_time.as_secs_f64() / r.decisions.len() as f64);
    }
    let table = sw.runs["S-3"][&1][&Method::LQoCo].learned.as_ref().expect("learned").table.clone();
    let dir = tempfile::tempdir().expect("tmp");
    let path = dir.path().join("qtable.csv");
    save_qtable(&table, &sweep_config("S-3").collector.fingerprint(), &Default::default(), &path).expect("save");
    let size = std::fs::metadata(&path).expect("stat").len();
    outcome(
        worst < TICK_BUDGET_SECS && size < QTABLE_MAX_BYTES,
        format!(
            "worst mean controller tick {:.1}us of {:.0}us, Q-table file {size} bytes of {QTABLE_MAX_BYTES}",
            worst * 1e6,
            TICK_BUDGET_SECS * 1e6
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let sw = sweep();
    let checks: [Check; 9] = [
        ("jitter vs no control", Box::new(|| jitter_vs_none(&sw))),
        ("cache-full time vs no control", Box::new(|| cache_full_vs_none(&sw))),
        ("jitter and throughput vs coto", Box::new(|| versus_coto(&sw))),
        ("changing workload boundaries", Box::new(changing_boundaries)),
        ("learner converges on a known MDP", Box::new(learner_oracle)),
        ("formula exactness", Box::new(|| formula_exactness(&sw))),
        ("gating properties", Box::new(|| gating(&sw))),
        ("determinism", Box::new(determinism)),
        ("efficiency", Box::new(|| efficiency(&sw))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("acceptance {} {name}: {} - {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        checks.len() - failed,
        checks.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
