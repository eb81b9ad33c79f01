//! Adaptive model selection over nested finite hypothesis classes.
//!
//! [`bandit::abl_run`] and [`mdp::arl_run`] run a base optimistic learner in
//! doubling epochs and, before each epoch, pick the smallest class whose
//! average empirical loss is within a slack of the largest class's. The
//! [`harness`] runs seeded experiments and the acceptance suites.

pub mod bandit;
pub mod environment;
pub mod error;
pub mod harness;
pub mod hypothesis;
pub mod mdp;
pub mod rng;

pub use environment::{BanditInstance, MdpInstance, NoiseModel};
pub use error::{Error, Result};
pub use hypothesis::{HypothesisFunction, NestedFamily, TransitionKernel};
pub use mdp::{RewardTable, ValueTables};
