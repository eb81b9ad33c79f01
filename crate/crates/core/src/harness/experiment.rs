use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Learner, Mode};
use super::output::{
    bandit_rows, epoch_rows, epochs_path, mdp_rows, read_json, trace_path, write_csv, write_json, CoverageRow,
    CONFIG_FILE, COVERAGE_FILE, INSTANCE_FILE, SUMMARY_FILE,
};
use super::summary::{class_complexity, instance_summary, summarize, RunOutcome, SummaryReport};
use crate::bandit::{abl_run, bandit_learning_run};
use crate::environment::{gen_bandit_instance, gen_mdp_instance, BanditInstance, MdpInstance};
use crate::error::{Error, Result};
use crate::mdp::{arl_run, ucrl_vtr_run};
use crate::rng::run_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Instance {
    Bandit(BanditInstance),
    Mdp(MdpInstance),
}

impl Instance {
    pub fn mode(&self) -> Mode {
        match self {
            Instance::Bandit(_) => Mode::Bandit,
            Instance::Mdp(_) => Mode::Mdp,
        }
    }

    /// Generate from the config's generator section.
    pub fn generate(config: &ExperimentConfig) -> Result<Self> {
        match config.mode {
            Mode::Bandit => {
                let g = config.bandit.as_ref().ok_or_else(|| Error::config("missing [bandit] section"))?;
                Ok(Instance::Bandit(gen_bandit_instance(g)?))
            }
            Mode::Mdp => {
                let g = config.mdp.as_ref().ok_or_else(|| Error::config("missing [mdp] section"))?;
                Ok(Instance::Mdp(gen_mdp_instance(g)?))
            }
        }
    }

    pub fn load(path: &Path, mode: Mode) -> Result<Self> {
        match mode {
            Mode::Bandit => Ok(Instance::Bandit(read_json(path)?)),
            Mode::Mdp => Ok(Instance::Mdp(read_json(path)?)),
        }
    }

    /// Load `instance_file` when set, otherwise generate.
    pub fn resolve(config: &ExperimentConfig) -> Result<Self> {
        match &config.instance_file {
            Some(path) => Self::load(path, config.mode),
            None => Self::generate(config),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Instance::Bandit(b) => b.family().num_classes(),
            Instance::Mdp(p) => p.family().num_classes(),
        }
    }

    pub fn true_index(&self) -> usize {
        match self {
            Instance::Bandit(b) => b.family().true_index(),
            Instance::Mdp(p) => p.family().true_index(),
        }
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config(format!("cannot start {jobs} worker threads: {e}")))
}

/// Run one seed and write its trace and epoch files.
fn run_seed(instance: &Instance, config: &ExperimentConfig, dir: &Path, run_id: usize) -> Result<RunOutcome> {
    let alg = &config.algorithm;
    let mut rng = run_rng(config.root_seed, run_id);
    let class = match config.learner {
        Learner::Adaptive => None,
        Learner::Oracle => Some(instance.true_index()),
        Learner::Largest => Some(instance.num_classes()),
    };
    let num_classes = instance.num_classes();
    match instance {
        Instance::Bandit(b) => {
            let trace = match class {
                None => abl_run(b, alg.horizon, alg.delta, alg.slack, &mut rng)?,
                Some(m) => bandit_learning_run(b, m, alg.horizon, alg.delta, &mut rng)?,
            };
            write_csv(&trace_path(dir, run_id), bandit_rows(run_id, &trace))?;
            write_csv(&epochs_path(dir, run_id), epoch_rows(run_id, num_classes, &trace.epochs))?;
            Ok(RunOutcome {
                run_id,
                final_regret: trace.final_regret(),
                selections: trace.selections(),
                covered: trace.coverage(),
            })
        }
        Instance::Mdp(p) => {
            let trace = match class {
                None => arl_run(p, alg.horizon, alg.delta, alg.slack, alg.beta_form, &mut rng)?,
                Some(m) => ucrl_vtr_run(p, m, alg.horizon, alg.delta, alg.beta_form, &mut rng)?,
            };
            write_csv(&trace_path(dir, run_id), mdp_rows(run_id, &trace))?;
            write_csv(&epochs_path(dir, run_id), epoch_rows(run_id, num_classes, &trace.epochs))?;
            Ok(RunOutcome {
                run_id,
                final_regret: trace.final_regret(),
                selections: trace.selections(),
                covered: trace.coverage(),
            })
        }
    }
}

/// Resolve the instance, run every seed on `jobs` worker threads (0 picks
/// the rayon default) and write all artifacts to `config.out`. The files are
/// identical for any `jobs`.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<SummaryReport> {
    config.validate()?;
    let dir: PathBuf = config
        .out
        .clone()
        .ok_or_else(|| Error::config("no output directory (set `out` or pass --out)"))?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let instance = Instance::resolve(config)?;
    if instance.mode() != config.mode {
        return Err(Error::config("instance does not match the configured mode"));
    }

    let mut resolved = config.clone();
    resolved.out = None;
    let config_path = dir.join(CONFIG_FILE);
    std::fs::write(&config_path, resolved.to_toml()?).map_err(|e| Error::io(&config_path, e))?;
    instance.save(&dir.join(INSTANCE_FILE))?;

    let runs: Vec<RunOutcome> = thread_pool(jobs)?.install(|| {
        (0..config.seeds)
            .into_par_iter()
            .map(|run_id| run_seed(&instance, config, &dir, run_id))
            .collect::<Result<Vec<_>>>()
    })?;

    write_csv(
        &dir.join(COVERAGE_FILE),
        runs.iter().map(|r| CoverageRow {
            run_id: r.run_id,
            covered: r.covered,
        }),
    )?;
    let complexity = if config.report_complexity {
        Some(class_complexity(&instance, config)?)
    } else {
        None
    };
    let summary = summarize(&runs, instance_summary(&instance, config)?, complexity)?;
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{BanditGenConfig, NoiseModel};
    use crate::harness::config::AlgorithmConfig;
    use crate::harness::summary::report;
    use crate::hypothesis::{HypothesisFunction, NestedFamily};

    fn trivial_instance_file(dir: &Path) -> PathBuf {
        let truth = HypothesisFunction::new(vec![0.2, 0.9, 0.5]).unwrap();
        let family = NestedFamily::new(vec![vec![truth.clone()]], 1, 1.0, 0.05).unwrap();
        let inst = BanditInstance::new(family, truth, NoiseModel::uniform(0.0).unwrap()).unwrap();
        let path = dir.join("given.json");
        Instance::Bandit(inst).save(&path).unwrap();
        path
    }

    #[test]
    fn single_noiseless_seed_matches_its_run() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ExperimentConfig::bandit(
            BanditGenConfig::default(),
            AlgorithmConfig {
                horizon: 40,
                ..AlgorithmConfig::default()
            },
        );
        config.instance_file = Some(trivial_instance_file(dir.path()));
        config.out = Some(dir.path().join("out"));
        let s = run_experiment(&config, 1).unwrap();
        assert_eq!(s.final_regret, vec![0.0]);
        assert_eq!(s.mean_regret, 0.0);
        assert!(s.selection_rates.iter().all(|r| r == &vec![1.0]));
        assert_eq!(s.coverage_rate, Some(1.0));
    }

    #[test]
    fn outputs_are_independent_of_thread_count_and_recompute() {
        let root = tempfile::tempdir().unwrap();
        let mut config = ExperimentConfig::bandit(
            BanditGenConfig {
                class_sizes: vec![2, 4, 12],
                ..BanditGenConfig::default()
            },
            AlgorithmConfig {
                horizon: 100,
                ..AlgorithmConfig::default()
            },
        );
        config.seeds = 4;
        config.root_seed = 9;
        let mut dirs = Vec::new();
        let mut summaries = Vec::new();
        for jobs in [1, 3] {
            let d = root.path().join(format!("j{jobs}"));
            config.out = Some(d.clone());
            summaries.push(run_experiment(&config, jobs).unwrap());
            dirs.push(d);
        }
        assert_eq!(summaries[0], summaries[1]);
        for name in ["trace_0003.csv", "epochs_0002.csv", "coverage.csv", "summary.json", "instance.json"] {
            let a = std::fs::read(dirs[0].join(name)).unwrap();
            let b = std::fs::read(dirs[1].join(name)).unwrap();
            assert_eq!(a, b, "{name}");
        }
        assert_eq!(report(&dirs[0]).unwrap(), summaries[0]);
        let trace = std::fs::read_to_string(dirs[0].join("trace_0000.csv")).unwrap();
        assert_eq!(trace.lines().count(), 101);
    }

    #[test]
    fn missing_output_directory_is_a_config_error() {
        let config = ExperimentConfig::bandit(BanditGenConfig::default(), AlgorithmConfig::default());
        assert!(run_experiment(&config, 1).unwrap_err().is_config());
    }
}
