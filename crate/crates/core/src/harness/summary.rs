use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Mode};
use super::experiment::Instance;
use super::output::{
    epochs_path, read_csv, read_json, trace_path, BanditRow, CoverageRow, EpochRow, MdpRow, CONFIG_FILE,
    COVERAGE_FILE, INSTANCE_FILE,
};
use crate::error::{Error, Result};
use crate::hypothesis::{
    eluder_dimension, induced_value_class, metric_entropy, EluderReport, FunctionTable, SeparabilityReport,
};

/// What the summary needs from one seeded run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub run_id: usize,
    pub final_regret: f64,
    /// Selected class per epoch, in epoch order.
    pub selections: Vec<usize>,
    pub covered: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub mode: Mode,
    pub class_sizes: Vec<usize>,
    pub true_index: usize,
    pub separation: f64,
    pub locality: f64,
    pub separability: SeparabilityReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassComplexity {
    pub class: usize,
    pub size: usize,
    pub entropy: f64,
    pub eluder: EluderReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub n_seeds: usize,
    pub final_regret: Vec<f64>,
    pub mean_regret: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub std_regret: f64,
    /// `selection_rates[i][m - 1]`: fraction of seeds choosing class `m` in
    /// epoch `i + 1`.
    pub selection_rates: Vec<Vec<f64>>,
    /// Fraction of seeds whose selection equals `m*` in every epoch of the
    /// final half (epochs `i > ⌊N/2⌋`).
    pub consistent_selection_rate: f64,
    /// Fraction of runs where the truth stayed in every confidence set,
    /// among runs that ever used a class containing it.
    pub coverage_rate: Option<f64>,
    pub covered_runs: usize,
    pub coverage_eligible_runs: usize,
    pub instance: InstanceSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complexity: Option<Vec<ClassComplexity>>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Aggregate run outcomes, which must be ordered by `run_id`.
pub fn summarize(
    runs: &[RunOutcome],
    instance: InstanceSummary,
    complexity: Option<Vec<ClassComplexity>>,
) -> Result<SummaryReport> {
    if runs.is_empty() {
        return Err(Error::config("summary needs at least one run"));
    }
    let num_classes = instance.class_sizes.len();
    let n_epochs = runs[0].selections.len();
    if runs.iter().any(|r| r.selections.len() != n_epochs) {
        return Err(Error::config("runs disagree on the number of epochs"));
    }
    let n = runs.len() as f64;
    let mut selection_rates = vec![vec![0.0; num_classes]; n_epochs];
    for r in runs {
        for (i, &m) in r.selections.iter().enumerate() {
            if m == 0 || m > num_classes {
                return Err(Error::IndexOutOfRange {
                    what: "selected class",
                    index: m,
                    len: num_classes,
                });
            }
            selection_rates[i][m - 1] += 1.0;
        }
    }
    for row in &mut selection_rates {
        for x in row.iter_mut() {
            *x /= n;
        }
    }
    let late = n_epochs / 2;
    let consistent = runs
        .iter()
        .filter(|r| r.selections[late..].iter().all(|&m| m == instance.true_index))
        .count();
    let eligible = runs.iter().filter(|r| r.covered.is_some()).count();
    let covered = runs.iter().filter(|r| r.covered == Some(true)).count();
    let final_regret: Vec<f64> = runs.iter().map(|r| r.final_regret).collect();
    Ok(SummaryReport {
        n_seeds: runs.len(),
        mean_regret: mean(&final_regret),
        std_regret: sample_std(&final_regret),
        final_regret,
        selection_rates,
        consistent_selection_rate: consistent as f64 / n,
        coverage_rate: (eligible > 0).then(|| covered as f64 / eligible as f64),
        covered_runs: covered,
        coverage_eligible_runs: eligible,
        instance,
        complexity,
    })
}

pub fn instance_summary(instance: &Instance, config: &ExperimentConfig) -> Result<InstanceSummary> {
    match instance {
        Instance::Bandit(b) => {
            let f = b.family();
            Ok(InstanceSummary {
                mode: Mode::Bandit,
                class_sizes: f.class_sizes(),
                true_index: f.true_index(),
                separation: f.separation(),
                locality: f.locality(),
                separability: b.separability()?,
            })
        }
        Instance::Mdp(p) => {
            let f = p.family();
            let (random, seed) = bank_settings(config);
            Ok(InstanceSummary {
                mode: Mode::Mdp,
                class_sizes: f.class_sizes(),
                true_index: f.true_index(),
                separation: f.separation(),
                locality: f.locality(),
                separability: p.separability(random, seed)?,
            })
        }
    }
}

fn bank_settings(config: &ExperimentConfig) -> (usize, u64) {
    config.mdp.as_ref().map_or((0, 0), |g| (g.bank_random, g.seed))
}

/// Entropy and eluder dimension of every class. MDP classes are measured
/// through their induced value class over the separability bank.
pub fn class_complexity(instance: &Instance, config: &ExperimentConfig) -> Result<Vec<ClassComplexity>> {
    let eps = config.eluder_epsilon;
    match instance {
        Instance::Bandit(b) => (1..=b.family().num_classes())
            .map(|m| {
                let class = b.family().class(m);
                let table = FunctionTable::new(class.iter().map(|f| f.values().to_vec()).collect())?;
                Ok(ClassComplexity {
                    class: m,
                    size: class.len(),
                    entropy: metric_entropy(class.len(), None)?,
                    eluder: eluder_dimension(&table, eps)?,
                })
            })
            .collect(),
        Instance::Mdp(p) => {
            let (random, seed) = bank_settings(config);
            let bank = p.value_bank(random, seed)?;
            (1..=p.family().num_classes())
                .map(|m| {
                    let class = p.family().class(m);
                    Ok(ClassComplexity {
                        class: m,
                        size: class.len(),
                        entropy: metric_entropy(class.len(), None)?,
                        eluder: eluder_dimension(&induced_value_class(class, &bank)?, eps)?,
                    })
                })
                .collect()
        }
    }
}

fn check_rows(path: &Path, rows: usize, horizon: usize) -> Result<()> {
    if rows != horizon {
        return Err(Error::parse(path, format!("expected {horizon} rows, found {rows}")));
    }
    Ok(())
}

/// Recompute the summary of an experiment directory from its CSV files,
/// `config.toml` and `instance.json`.
pub fn report(dir: &Path) -> Result<SummaryReport> {
    let config = ExperimentConfig::load(&dir.join(CONFIG_FILE), &[])?;
    let instance = Instance::load(&dir.join(INSTANCE_FILE), config.mode)?;
    let horizon = config.algorithm.horizon;
    let coverage: Vec<CoverageRow> = read_csv(&dir.join(COVERAGE_FILE))?;
    let mut runs = Vec::with_capacity(config.seeds);
    for run_id in 0..config.seeds {
        let path = trace_path(dir, run_id);
        let final_regret = match config.mode {
            Mode::Bandit => {
                let rows: Vec<BanditRow> = read_csv(&path)?;
                check_rows(&path, rows.len(), horizon)?;
                rows.last().map_or(0.0, |r| r.cum_regret)
            }
            Mode::Mdp => {
                let rows: Vec<MdpRow> = read_csv(&path)?;
                check_rows(&path, rows.len(), horizon)?;
                rows.last().map_or(0.0, |r| r.cum_regret)
            }
        };
        let epochs: Vec<EpochRow> = read_csv(&epochs_path(dir, run_id))?;
        let selections = epochs.iter().filter(|r| r.chosen == 1).map(|r| r.m).collect();
        let covered = coverage
            .iter()
            .find(|r| r.run_id == run_id)
            .ok_or_else(|| Error::parse(dir.join(COVERAGE_FILE), format!("no row for run {run_id}")))?
            .covered;
        runs.push(RunOutcome {
            run_id,
            final_regret,
            selections,
            covered,
        });
    }
    let complexity = if config.report_complexity {
        Some(class_complexity(&instance, &config)?)
    } else {
        None
    };
    summarize(&runs, instance_summary(&instance, &config)?, complexity)
}

/// Read a previously written `summary.json`.
pub fn read_summary(path: &Path) -> Result<SummaryReport> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance() -> InstanceSummary {
        InstanceSummary {
            mode: Mode::Bandit,
            class_sizes: vec![1, 2, 3],
            true_index: 2,
            separation: 1.0,
            locality: 0.05,
            separability: SeparabilityReport {
                holds: true,
                achieved_gap: f64::INFINITY,
                violation_count: 0,
                violations: vec![],
            },
        }
    }

    fn run(run_id: usize, final_regret: f64, selections: Vec<usize>, covered: Option<bool>) -> RunOutcome {
        RunOutcome {
            run_id,
            final_regret,
            selections,
            covered,
        }
    }

    #[test]
    fn aggregates_by_hand() {
        let runs = vec![
            run(0, 2.0, vec![3, 1, 2, 2, 2], Some(true)),
            run(1, 4.0, vec![3, 2, 2, 3, 2], Some(false)),
            run(2, 6.0, vec![3, 2, 2, 2, 2], None),
        ];
        let s = summarize(&runs, instance(), None).unwrap();
        assert_eq!(s.mean_regret, 4.0);
        assert_eq!(s.std_regret, 2.0);
        assert_eq!(s.selection_rates[0], vec![0.0, 0.0, 1.0]);
        assert_eq!(s.selection_rates[3], vec![0.0, 2.0 / 3.0, 1.0 / 3.0]);
        // Final half of five epochs is epochs 3..=5.
        assert_eq!(s.consistent_selection_rate, 2.0 / 3.0);
        assert_eq!(s.coverage_rate, Some(0.5));
        for row in &s.selection_rates {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_seed_has_zero_spread_and_no_coverage_without_eligible_runs() {
        let s = summarize(&[run(0, 1.5, vec![1], None)], instance(), None).unwrap();
        assert_eq!(s.std_regret, 0.0);
        assert_eq!(s.coverage_rate, None);
        assert!(summarize(&[], instance(), None).is_err());
        assert!(summarize(&[run(0, 0.0, vec![4], None)], instance(), None).is_err());
    }
}
