use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete bandwidth adjustments, in table-column order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    FastDecrease,
    SlowDecrease,
    Keep,
    SlowIncrease,
    FastIncrease,
}

impl Action {
    pub const COUNT: usize = 5;
    pub const ALL: [Action; 5] = [
        Action::FastDecrease,
        Action::SlowDecrease,
        Action::Keep,
        Action::SlowIncrease,
        Action::FastIncrease,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Action {
        Self::ALL[i]
    }

    pub fn is_increase(self) -> bool {
        matches!(self, Action::SlowIncrease | Action::FastIncrease)
    }

    pub fn is_decrease(self) -> bool {
        matches!(self, Action::SlowDecrease | Action::FastDecrease)
    }

    pub fn label(self) -> &'static str {
        match self {
            Action::FastDecrease => "FastDecrease",
            Action::SlowDecrease => "SlowDecrease",
            Action::Keep => "Keep",
            Action::SlowIncrease => "SlowIncrease",
            Action::FastIncrease => "FastIncrease",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .iter()
            .copied()
            .find(|a| a.label() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Adjustment rate applied by each action; `Keep` is always zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActionRates {
    pub fast_decrease: f64,
    pub slow_decrease: f64,
    pub slow_increase: f64,
    pub fast_increase: f64,
}

impl Default for ActionRates {
    fn default() -> Self {
        Self {
            fast_decrease: -0.03,
            slow_decrease: -0.01,
            slow_increase: 0.01,
            fast_increase: 0.03,
        }
    }
}

impl ActionRates {
    pub fn validate(&self) -> Result<()> {
        let ordered = self.fast_decrease < self.slow_decrease
            && self.slow_decrease < 0.0
            && 0.0 < self.slow_increase
            && self.slow_increase < self.fast_increase
            && self.fast_decrease > -1.0;
        if ordered {
            Ok(())
        } else {
            Err(Error::invalid(
                "action rates",
                "need -1 < fast_decrease < slow_decrease < 0 < slow_increase < fast_increase",
            ))
        }
    }

    pub fn rate(&self, a: Action) -> f64 {
        match a {
            Action::FastDecrease => self.fast_decrease,
            Action::SlowDecrease => self.slow_decrease,
            Action::Keep => 0.0,
            Action::SlowIncrease => self.slow_increase,
            Action::FastIncrease => self.fast_increase,
        }
    }

    /// Action indices ordered for tie-breaking: smaller magnitude first,
    /// decrease before increase at equal magnitude.
    pub fn tie_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..Action::COUNT).collect();
        idx.sort_by(|&a, &b| {
            let (ra, rb) = (self.rate(Action::ALL[a]), self.rate(Action::ALL[b]));
            ra.abs()
                .partial_cmp(&rb.abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(ra.partial_cmp(&rb).unwrap_or(std::cmp::Ordering::Equal))
        });
        idx
    }
}
