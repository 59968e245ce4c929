//! Token-bucket enforcement of the granted bandwidth at the cache entrance.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExecutorConfig {
    pub bytes_per_token: u64,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            bytes_per_token: 1024,
        }
    }
}

/// A bucket whose burst capacity equals one tick of fill.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenBucket {
    capacity: f64,
    tokens: f64,
    bytes_per_token: u64,
    fill_rate: f64,
}

impl TokenBucket {
    pub fn new(bytes_per_token: u64) -> Self {
        assert!(bytes_per_token > 0, "bytes_per_token must be positive");
        Self {
            capacity: 0.0,
            tokens: 0.0,
            bytes_per_token,
            fill_rate: 0.0,
        }
    }

    pub fn from_config(cfg: &ExecutorConfig) -> Self {
        Self::new(cfg.bytes_per_token)
    }

    /// Converts a bandwidth in bytes/second into a per-tick token fill.
    pub fn set_bandwidth(&mut self, bandwidth: f64, tick: f64) {
        debug_assert!(bandwidth >= 0.0);
        self.fill_rate = bandwidth.max(0.0) * tick / self.bytes_per_token as f64;
        self.capacity = self.fill_rate;
        self.tokens = self.tokens.min(self.capacity);
    }

    pub fn replenish(&mut self) {
        self.tokens = (self.tokens + self.fill_rate).min(self.capacity);
    }

    pub fn tokens_for(&self, size: u64) -> u64 {
        size.div_ceil(self.bytes_per_token)
    }

    pub fn can_admit(&self, size: u64) -> bool {
        self.tokens >= self.tokens_for(size) as f64
    }

    /// Takes the tokens for a request of `size` bytes if the balance allows it.
    pub fn try_admit(&mut self, size: u64) -> bool {
        let need = self.tokens_for(size) as f64;
        if self.tokens >= need {
            self.tokens -= need;
            true
        } else {
            false
        }
    }

    pub fn tokens(&self) -> f64 {
        self.tokens
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn fill_rate(&self) -> f64 {
        self.fill_rate
    }

    #[cfg(test)]
    fn with_state(tokens: f64, fill_rate: f64, capacity: f64) -> Self {
        Self {
            capacity,
            tokens,
            bytes_per_token: 1,
            fill_rate,
        }
    }
}
