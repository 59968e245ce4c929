use serde::{Deserialize, Serialize};

use crate::collector::{Bdp, DiscreteState, Processing, WaterLevel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// Weighted per-dimension values: Mid watermark, Mid processing and
    /// Fulluse BDP score +1; High/Low processing, High watermark and Overuse -1.
    #[default]
    ValueTable,
    /// `sum_d f_d * (idx_d^2 / (|D|-1)^2 - 1)` over band indices.
    IndexQuadratic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub watermark: f64,
    pub processing: f64,
    pub bdp: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            watermark: 0.5,
            processing: 0.25,
            bdp: 0.25,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.watermark, self.processing, self.bdp];
        if w.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::invalid("reward weights", "weights must be non-negative"));
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("reward weights", "weights must sum to 1"));
        }
        Ok(())
    }
}

fn watermark_value(w: WaterLevel) -> f64 {
    match w {
        WaterLevel::ExtremelyLow | WaterLevel::Low => 0.0,
        WaterLevel::Mid => 1.0,
        WaterLevel::High => -1.0,
    }
}

fn processing_value(p: Processing) -> f64 {
    match p {
        Processing::Mid => 0.0,
        Processing::Low | Processing::High => -1.0,
    }
}

fn bdp_value(b: Bdp) -> f64 {
    match b {
        Bdp::Underuse => 0.0,
        Bdp::Fulluse => 1.0,
        Bdp::Overuse => -1.0,
    }
}

fn index_term<T: Scalar>(index: usize, levels: usize) -> T {
    let i = T::from_usize_lossy(index);
    let top = T::from_usize_lossy(levels - 1);
    i * i / (top * top) - T::one()
}

/// Reward for arriving in state `next`.
pub fn compute_reward<T: Scalar>(next: DiscreteState, w: &RewardWeights, mode: RewardMode) -> T {
    let (fw, fp, fb) = (T::lit(w.watermark), T::lit(w.processing), T::lit(w.bdp));
    match mode {
        RewardMode::ValueTable => {
            fw * T::lit(watermark_value(next.w))
                + fp * T::lit(processing_value(next.p))
                + fb * T::lit(bdp_value(next.b))
        }
        RewardMode::IndexQuadratic => {
            fw * index_term::<T>(next.w.index(), WaterLevel::ALL.len())
                + fp * index_term::<T>(next.p.index(), Processing::ALL.len())
                + fb * index_term::<T>(next.b.index(), Bdp::ALL.len())
        }
    }
}
