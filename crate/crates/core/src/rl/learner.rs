use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rl::qtable::QTable;
use crate::rl::replay::ReplayBuffer;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub alpha: f64,
    pub beta: f64,
    pub batch_size: usize,
    pub prune_period: u64,
    pub update_period: u64,
    pub capacity: usize,
    pub epsilon: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            learning_rate: 0.1,
            alpha: 0.6,
            beta: 0.4,
            batch_size: 32,
            prune_period: 100,
            update_period: 50,
            capacity: 10_000,
            epsilon: 0.14,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::invalid("learner", "gamma must lie in [0,1)"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("learner", "learning_rate must lie in (0,1]"));
        }
        if !unit(self.alpha) || !unit(self.beta) || !unit(self.epsilon) {
            return Err(Error::invalid("learner", "alpha, beta and epsilon must lie in [0,1]"));
        }
        if self.batch_size == 0 || self.prune_period == 0 || self.update_period == 0 || self.capacity == 0 {
            return Err(Error::invalid(
                "learner",
                "batch_size, prune_period, update_period and capacity must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub samples: usize,
    pub mean_abs_td: f64,
}

/// One prioritized double-Q pass: `k` weighted TD updates against the
/// target table, after which the target is refreshed from the real table.
pub fn update_step<T: Scalar, R: Rng + ?Sized>(
    real: &mut QTable<T>,
    target: &mut QTable<T>,
    buffer: &mut ReplayBuffer<T>,
    cfg: &LearnerConfig,
    tie_order: &[usize],
    rng: &mut R,
) -> UpdateStats {
    let picks = buffer.sample(cfg.batch_size, cfg.alpha, cfg.beta, rng);
    let gamma = T::lit(cfg.gamma);
    let eta = T::lit(cfg.learning_rate);
    let mut total = 0.0;
    for &(j, w) in &picks {
        let t = buffer.items()[j];
        let next = real
            .argmax(t.next_state, tie_order)
            .map_or(T::zero(), |a| target.get(t.next_state, a));
        let q = real.get(t.state, t.action);
        let delta = t.reward + gamma * next - q;
        buffer.set_priority(j, delta.abs());
        real.set(t.state, t.action, q + eta * w * delta);
        total += delta.abs().as_f64();
    }
    target.copy_values_from(real);
    UpdateStats {
        samples: picks.len(),
        mean_abs_td: if picks.is_empty() { 0.0 } else { total / picks.len() as f64 },
    }
}

/// Prioritized-replay double-Q learner over integer states and actions.
#[derive(Clone, Debug)]
pub struct PerLearner<T> {
    cfg: LearnerConfig,
    real: QTable<T>,
    target: QTable<T>,
    buffer: ReplayBuffer<T>,
    tie_order: Vec<usize>,
    stored: u64,
    updates: u64,
    rng: ChaCha8Rng,
}

impl<T: Scalar> PerLearner<T> {
    pub fn new(table: QTable<T>, cfg: LearnerConfig, tie_order: Vec<usize>, seed: u64) -> Self {
        assert_eq!(tie_order.len(), table.actions(), "tie order must list every action");
        Self {
            buffer: ReplayBuffer::new(cfg.capacity),
            target: table.clone(),
            real: table,
            cfg,
            tie_order,
            stored: 0,
            updates: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn table(&self) -> &QTable<T> {
        &self.real
    }

    pub fn target(&self) -> &QTable<T> {
        &self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer<T> {
        &self.buffer
    }

    pub fn tie_order(&self) -> &[usize] {
        &self.tie_order
    }

    /// Number of individual TD updates applied so far.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Stores a transition, pruning and updating on their periods.
    pub fn observe(&mut self, state: usize, action: usize, reward: T, next_state: usize) -> Option<UpdateStats> {
        self.buffer.push(state, action, reward, next_state);
        self.stored += 1;
        if self.stored.is_multiple_of(self.cfg.prune_period) {
            self.buffer.prune();
        }
        if self.stored.is_multiple_of(self.cfg.update_period) {
            let stats = update_step(
                &mut self.real,
                &mut self.target,
                &mut self.buffer,
                &self.cfg,
                &self.tie_order,
                &mut self.rng,
            );
            self.updates += stats.samples as u64;
            Some(stats)
        } else {
            None
        }
    }
}
