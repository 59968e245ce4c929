//! Tabular Q-learning with prioritized experience replay.

pub mod action;
pub mod learner;
pub mod qtable;
pub mod replay;
pub mod reward;

pub use action::{Action, ActionRates};
pub use learner::{update_step, LearnerConfig, PerLearner, UpdateStats};
pub use qtable::{load_qtable, save_qtable, select_action, QTable, TableMeta, QTABLE_HEADER};
pub use replay::{ReplayBuffer, Transition};
pub use reward::{compute_reward, RewardMode, RewardWeights};
