//! Optimistic least-squares bandit learning and its adaptive, model-selecting
//! wrapper.
//!
//! The base learner fits the empirical risk minimiser over a finite class,
//! keeps every function within `β_t` of it in empirical squared distance, and
//! plays the action with the highest value under any surviving function. The
//! adaptive learner runs the base learner in doubling epochs; before each
//! epoch it scores every class by its minimum average squared error on all
//! data so far and picks the smallest class within `C_1` of the largest.

mod confidence;
mod run;
mod schedule;

pub use confidence::{
    bandit_test_statistic, beta_bandit, build_confidence_set, least_squares_fit, optimistic_action,
    BanditDataset, ConfidenceState,
};
pub use run::{abl_run, bandit_learning_run, RoundRecord, RunTrace};
pub use schedule::{select_model, Epoch, EpochRecord, EpochSchedule};

pub(crate) use run::coverage;
pub(crate) use schedule::check_run;
