//! Experiment configuration, seeded multi-run execution, persisted traces
//! and summaries, and the Monte Carlo acceptance suites.
//!
//! Seed `i` of an experiment draws from `root_seed ^ i`. Seeds run in
//! parallel, each writing only its own files, so every artifact is identical
//! for any worker count.

mod config;
mod experiment;
mod output;
mod suite;
mod summary;

pub use config::{AlgorithmConfig, ExperimentConfig, Learner, Mode};
pub use experiment::{run_experiment, Instance};
pub use output::{
    epochs_path, read_csv, trace_path, BanditRow, CoverageRow, EpochRow, MdpRow, CONFIG_FILE, COVERAGE_FILE,
    INSTANCE_FILE, SUMMARY_FILE,
};
pub use suite::{run_suite, CriterionResult, Relation, SuiteReport, SUITES, SUITE_FILE};
pub use summary::{
    class_complexity, instance_summary, read_summary, report, summarize, ClassComplexity, InstanceSummary,
    RunOutcome, SummaryReport,
};

pub mod serde_inf {
    pub use super::output::serde_inf::{deserialize, serialize};
}
