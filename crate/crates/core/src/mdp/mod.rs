//! Episodic tabular MDPs: planning, value-targeted regression, UCRL-VTR and
//! its adaptive model-selecting wrapper.
//!
//! UCRL-VTR keeps a confidence set of transition kernels around the
//! value-targeted least-squares estimate, plans with the kernel whose optimal
//! value at the initial state is largest, and follows that kernel's greedy
//! policy for one episode. Regret is computed exactly by evaluating each
//! episode's policy under the true kernel.

mod planning;
mod run;
mod vtr;

pub use planning::{apply_kernel, policy_evaluation, value_iteration, GreedyPolicy, RewardTable, ValueTables};
pub use run::{arl_run, optimistic_model, ucrl_vtr_run, EpisodeRecord, MdpRunTrace};
pub use vtr::{
    beta_mdp, mdp_confidence_set, mdp_test_statistic, vtr_discrepancy, vtr_fit, vtr_loss, BetaForm, Fit,
    Transition, VtrDataset,
};
