use proptest::prelude::*;

use qoco::executor::TokenBucket;
use qoco::sim_env::{CacheConfig, FlushProcess, SimConfig, StorageEnv};
use qoco::workload::{IoKind, IoRequest};

fn env(capacity: u64, flush: f64, seed: u64) -> StorageEnv {
    let cache = CacheConfig {
        capacity,
        ..CacheConfig::default()
    };
    let flush = FlushProcess {
        base_bandwidth: flush,
        seed,
        ..FlushProcess::default()
    };
    StorageEnv::new(SimConfig::default(), cache, flush).unwrap()
}

fn requests(sizes: &[u64], per_tick: usize) -> Vec<IoRequest> {
    sizes
        .iter()
        .enumerate()
        .map(|(i, &size)| IoRequest {
            id: i as u64,
            arrival_time: (i / per_tick) as f64,
            size,
            kind: IoKind::Write,
        })
        .collect()
}

proptest! {
    #[test]
    fn cache_conserves_bytes(
        seed in 0u64..500,
        sizes in prop::collection::vec(512u64..65536, 1..600),
        grants in prop::collection::vec(0.0..400_000.0f64, 40),
    ) {
        let mut e = env(1 << 20, 100_000.0, seed);
        let reqs = requests(&sizes, 20);
        let mut next = 0;
        let mut bucket = TokenBucket::new(1024);
        let mut occ: i128 = 0;
        let mut last_id = None;
        for (t, &g) in grants.iter().enumerate() {
            while next < reqs.len() && reqs[next].arrival_time < (t + 1) as f64 {
                e.enqueue(reqs[next]);
                next += 1;
            }
            bucket.set_bandwidth(g, 1.0);
            bucket.replenish();
            let s = e.step(&mut bucket, g);
            occ += s.admitted_bytes as i128 - s.flushed_bytes as i128;
            prop_assert_eq!(occ as u64, e.cache().occupied());
            prop_assert!(e.cache().occupied() <= e.cache().capacity());
            prop_assert!((0.0..=100.0).contains(&s.watermark));
            prop_assert!(s.admitted_bytes as f64 <= g + 1.0);
            for c in &s.completed {
                // FIFO: completions never overtake earlier arrivals.
                prop_assert!(last_id.is_none_or(|l| c.id > l));
                last_id = Some(c.id);
                prop_assert!(c.latency >= 0.0);
            }
        }
    }
}
