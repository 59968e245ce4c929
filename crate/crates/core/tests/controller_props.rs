use proptest::prelude::*;

use qoco::baselines::{bypass_route, BypassConfig, CoTo, CoToConfig};
use qoco::collector::{DiscretizationConfig, Extreme, StateSample};
use qoco::controller::{bound_gate, update_bounds, AdaptiveBound, BoundConfig, LQoCo, LQoCoConfig, Source};
use qoco::rl::LearnerConfig;
use qoco::sim_env::Route;

fn controller(seed: u64) -> LQoCo<f64> {
    LQoCo::new(
        LQoCoConfig::default(),
        DiscretizationConfig::default(),
        LearnerConfig::default(),
        BoundConfig::default(),
        1e6,
        seed,
    )
    .unwrap()
}

fn state() -> impl Strategy<Value = StateSample<f64>> {
    (0.0..100.0f64, -1.0..1.0f64, 0.0..200.0f64).prop_map(|(w, p, b)| StateSample {
        w,
        p,
        b,
        p_undefined: false,
    })
}

proptest! {
    #[test]
    fn safe_actions_take_precedence(seed in 0u64..1000, states in prop::collection::vec(state(), 1..200)) {
        let mut c = controller(seed);
        for s in states {
            let prev = c.bandwidth();
            let out = c.step_state(s).unwrap();
            let d = out.decision;
            if let Some(e) = out.class.extreme {
                prop_assert_eq!(d.source, Source::SafeAction);
                prop_assert!(!d.learn);
                let a = d.action.unwrap();
                match e {
                    Extreme::High => prop_assert!(a.is_decrease()),
                    Extreme::Low => prop_assert!(a.is_increase()),
                }
            }
            if d.bound_rejected {
                prop_assert_eq!(d.executed, prev);
                prop_assert!(!d.learn);
            }
            if out.class.is_better() && out.class.extreme.is_none() {
                prop_assert!((d.executed / prev - 1.0).abs() <= 0.001 + 1e-12);
            }
            prop_assert!(c.bandwidth() > 0.0);
        }
    }

    #[test]
    fn gate_is_inclusive_band_check(lb in 0.0..100.0f64, width in 0.0..100.0f64, rec in 0.0..300.0f64, prev in 1.0..300.0f64) {
        let b = AdaptiveBound::<f64>::new(lb, lb + width, &BoundConfig::default()).unwrap();
        let (exec, rejected) = bound_gate(&b, rec, prev);
        let inside = lb <= rec && rec <= lb + width;
        prop_assert_eq!(rejected, !inside);
        prop_assert_eq!(exec, if inside { rec } else { prev });
    }

    #[test]
    fn refresh_band_is_two_sigma_wide(recs in prop::collection::vec(1.0..1e6f64, 5), sigma in 0.01..0.9f64) {
        let cfg = BoundConfig { window: 5, sigma, ..BoundConfig::default() };
        let mut b = AdaptiveBound::<f64>::new(0.0, 1e9, &cfg).unwrap();
        for &r in &recs {
            update_bounds(&mut b, r, true);
        }
        let mean = recs.iter().sum::<f64>() / 5.0;
        prop_assert_eq!(b.c_b, 0);
        prop_assert!(b.lb < mean && mean < b.ub);
        prop_assert!(((b.ub - b.lb) / mean - 2.0 * sigma).abs() < 1e-9);
    }

    #[test]
    fn coto_is_geometric_in_persistent_bands(start in 1.0..1e6f64, ticks in 2usize..50, high in any::<bool>()) {
        let cfg = CoToConfig { min_bandwidth: 1e-9, ..CoToConfig::default() };
        let mut c = CoTo::<f64>::new(cfg, start).unwrap();
        let w = if high { 90.0 } else { 10.0 };
        let mut prev = c.coto_decide(w, start, start);
        for _ in 1..ticks {
            let next = c.coto_decide(w, prev, prev);
            let factor = if high { 1.0 - cfg.rate } else { 1.0 + cfg.rate };
            prop_assert_eq!(next, factor * prev);
            prev = next;
        }
    }

    #[test]
    fn coto_stays_positive(ws in prop::collection::vec(0.0..100.0f64, 1..300), flush in 0.0..1e6f64) {
        let mut c = CoTo::<f64>::new(CoToConfig::default(), 1e5).unwrap();
        let mut bw = c.bandwidth();
        for w in ws {
            bw = c.coto_decide(w, bw, flush);
            prop_assert!(bw >= CoToConfig::default().min_bandwidth);
        }
    }

    #[test]
    fn bypass_is_a_threshold(estimate in 0.0..1e-2f64, threshold in 1e-5..1e-2f64) {
        let cfg = BypassConfig { latency_threshold: threshold, ..BypassConfig::default() };
        let expected = if estimate > threshold { Route::Storage } else { Route::Cache };
        prop_assert_eq!(bypass_route(estimate, &cfg), expected);
    }
}

#[test]
fn violation_accumulator_stays_below_one() {
    // 1 - 0.99^1000 is about 0.99996, so the snap never fires here.
    let cfg = BoundConfig {
        violation_threshold: 0.99999,
        decay: 0.99,
        ..BoundConfig::default()
    };
    let mut b = AdaptiveBound::<f64>::new(10.0, 20.0, &cfg).unwrap();
    let mut last = 0.0;
    for _ in 0..1000 {
        update_bounds(&mut b, 5.0, false);
        assert!(b.v_lb > last && b.v_lb < 1.0);
        last = b.v_lb;
    }
    assert_eq!(b.lb, 10.0);
}
