//! Monte Carlo acceptance suites. Each suite runs one or more experiments
//! into subdirectories of its output directory and compares a measured
//! statistic against a fixed threshold.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{AlgorithmConfig, ExperimentConfig, Learner};
use super::experiment::run_experiment;
use super::output::write_json;
use super::summary::SummaryReport;
use crate::environment::{BanditGenConfig, MdpGenConfig};
use crate::error::{Error, Result};

pub const SUITES: [&str; 5] = ["coverage-bandit", "coverage-mdp", "selection", "oracle-compare", "sublinearity"];

pub const SUITE_FILE: &str = "suite.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<=")]
    AtMost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

impl CriterionResult {
    fn new(name: &str, measured: f64, relation: Relation, threshold: f64) -> Self {
        let passed = match relation {
            Relation::AtLeast => measured >= threshold,
            Relation::AtMost => measured <= threshold,
        };
        Self {
            name: name.to_string(),
            measured,
            relation,
            threshold,
            passed,
        }
    }
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.relation {
            Relation::AtLeast => ">=",
            Relation::AtMost => "<=",
        };
        write!(
            f,
            "{} {}: measured {:.4} {op} {:.4}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.threshold
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub criteria: Vec<CriterionResult>,
}

fn canonical_bandit() -> BanditGenConfig {
    BanditGenConfig::default()
}

fn coverage_bandit() -> BanditGenConfig {
    BanditGenConfig {
        class_sizes: vec![4, 8, 16],
        ..BanditGenConfig::default()
    }
}

fn coverage_mdp() -> MdpGenConfig {
    MdpGenConfig {
        horizon: 3,
        true_index: 1,
        class_sizes: vec![6],
        ..MdpGenConfig::default()
    }
}

fn algorithm(horizon: usize) -> AlgorithmConfig {
    AlgorithmConfig {
        delta: 0.1,
        slack: 0.25,
        horizon,
        ..AlgorithmConfig::default()
    }
}

struct Runner<'a> {
    out: &'a Path,
    jobs: usize,
    root_seed: u64,
}

impl Runner<'_> {
    fn run(&self, label: &str, mut config: ExperimentConfig, learner: Learner, seeds: usize) -> Result<SummaryReport> {
        config.learner = learner;
        config.seeds = seeds;
        config.root_seed = self.root_seed;
        config.out = Some(self.out.join(label));
        run_experiment(&config, self.jobs)
    }
}

fn coverage(summary: &SummaryReport) -> f64 {
    summary.coverage_rate.unwrap_or(0.0)
}

/// Run a named suite, writing experiments under `out` and the report to
/// `out/suite.json`.
pub fn run_suite(name: &str, out: &Path, jobs: usize, root_seed: u64) -> Result<SuiteReport> {
    let r = Runner { out, jobs, root_seed };
    let criteria = match name {
        "coverage-bandit" => {
            let s = r.run(
                "bandit",
                ExperimentConfig::bandit(coverage_bandit(), algorithm(512)),
                Learner::Oracle,
                200,
            )?;
            vec![CriterionResult::new("bandit confidence coverage", coverage(&s), Relation::AtLeast, 0.85)]
        }
        "coverage-mdp" => {
            let s = r.run("mdp", ExperimentConfig::mdp(coverage_mdp(), algorithm(256)), Learner::Oracle, 200)?;
            vec![CriterionResult::new("mdp confidence coverage", coverage(&s), Relation::AtLeast, 0.85)]
        }
        "selection" => {
            let b = r.run(
                "bandit",
                ExperimentConfig::bandit(canonical_bandit(), algorithm(4096)),
                Learner::Adaptive,
                100,
            )?;
            let m = r.run(
                "mdp",
                ExperimentConfig::mdp(MdpGenConfig::default(), algorithm(2048)),
                Learner::Adaptive,
                100,
            )?;
            vec![
                CriterionResult::new(
                    "ABL late-epoch selection of m*",
                    b.consistent_selection_rate,
                    Relation::AtLeast,
                    0.90,
                ),
                CriterionResult::new(
                    "ARL late-epoch selection of m*",
                    m.consistent_selection_rate,
                    Relation::AtLeast,
                    0.90,
                ),
            ]
        }
        "oracle-compare" => {
            let config = ExperimentConfig::bandit(canonical_bandit(), algorithm(4096));
            let adaptive = r.run("adaptive", config.clone(), Learner::Adaptive, 50)?;
            let oracle = r.run("oracle", config.clone(), Learner::Oracle, 50)?;
            let largest = r.run("largest", config, Learner::Largest, 50)?;
            vec![
                CriterionResult::new(
                    "ABL regret / oracle regret",
                    adaptive.mean_regret / oracle.mean_regret,
                    Relation::AtMost,
                    1.5,
                ),
                CriterionResult::new(
                    "ABL regret / largest-class regret",
                    adaptive.mean_regret / largest.mean_regret,
                    Relation::AtMost,
                    1.1,
                ),
            ]
        }
        "sublinearity" => {
            let short = r.run(
                "short",
                ExperimentConfig::bandit(canonical_bandit(), algorithm(256)),
                Learner::Oracle,
                50,
            )?;
            let long = r.run(
                "long",
                ExperimentConfig::bandit(canonical_bandit(), algorithm(4096)),
                Learner::Oracle,
                50,
            )?;
            let ratio = (long.mean_regret / 4096.0) / (short.mean_regret / 256.0);
            vec![CriterionResult::new(
                "oracle R_T/T at 4096 over R_T/T at 256",
                ratio,
                Relation::AtMost,
                0.5,
            )]
        }
        other => return Err(Error::UnknownSuite(other.to_string())),
    };
    let report = SuiteReport {
        suite: name.to_string(),
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    };
    write_json(&out.join(SUITE_FILE), &report)?;
    Ok(report)
}
