use rand::Rng;
use serde::{Deserialize, Serialize};

use super::confidence::{beta_bandit, confidence_around, least_squares_fit, optimistic_action, BanditDataset};
use super::schedule::{check_run, select_model, EpochRecord, EpochSchedule};
use crate::environment::{sample_reward, BanditInstance};
use crate::error::{check_confidence, Error, Result};
use crate::hypothesis::metric_entropy;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round over the whole run.
    pub round: usize,
    pub epoch: usize,
    pub selected_class: usize,
    pub action: usize,
    pub reward: f64,
    pub instant_regret: f64,
    pub cum_regret: f64,
    /// Whether `f*` was in this round's confidence set; `None` when the
    /// active class does not contain `f*`.
    pub covered: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub rounds: Vec<RoundRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl RunTrace {
    pub fn final_regret(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.cum_regret)
    }

    /// True iff `f*` stayed in every confidence set built from a class that
    /// contains it; `None` if no such round exists.
    pub fn coverage(&self) -> Option<bool> {
        coverage(self.rounds.iter().map(|r| r.covered))
    }

    pub fn selections(&self) -> Vec<usize> {
        self.epochs.iter().map(|e| e.selected).collect()
    }
}

pub(crate) fn coverage(flags: impl Iterator<Item = Option<bool>>) -> Option<bool> {
    flags.flatten().fold(None, |acc, c| Some(acc.unwrap_or(true) && c))
}

/// One restart of the base algorithm on class `m` for `length` rounds.
#[allow(clippy::too_many_arguments)]
fn base_epoch<R: Rng + ?Sized>(
    instance: &BanditInstance,
    m: usize,
    epoch: usize,
    length: usize,
    delta: f64,
    history: &mut BanditDataset,
    trace: &mut RunTrace,
    rng: &mut R,
) -> Result<()> {
    let family = instance.family();
    if m == 0 || m > family.num_classes() {
        return Err(Error::IndexOutOfRange {
            what: "class",
            index: m,
            len: family.num_classes(),
        });
    }
    let class = family.class(m);
    let entropy = metric_entropy(class.len(), None)?;
    let truth = instance.truth();
    let realizable = family.position_in(m, truth).is_some();
    let mut data = BanditDataset::new(instance.n_actions());
    let mut cum = trace.final_regret();
    for t in 1..=length {
        let (estimate, _) = least_squares_fit(class, &data)?;
        let beta = beta_bandit(entropy, t, delta, instance.sigma())?;
        let conf = confidence_around(class, &data, estimate, beta)?;
        let covered = if realizable {
            Some(data.discrepancy(truth, &class[estimate])? <= beta)
        } else {
            None
        };
        let (action, _) = optimistic_action(&conf, class)?;
        let reward = sample_reward(instance, action, rng)?;
        data.push(action, reward)?;
        history.push(action, reward)?;
        let instant_regret = instance.gap(action);
        cum += instant_regret;
        trace.rounds.push(RoundRecord {
            round: trace.rounds.len() + 1,
            epoch,
            selected_class: m,
            action,
            reward,
            instant_regret,
            cum_regret: cum,
            covered,
        });
    }
    Ok(())
}

/// The base algorithm on class `m` of the instance's family for `horizon`
/// rounds, recorded as a single epoch.
pub fn bandit_learning_run<R: Rng + ?Sized>(
    instance: &BanditInstance,
    m: usize,
    horizon: usize,
    delta: f64,
    rng: &mut R,
) -> Result<RunTrace> {
    check_confidence(delta)?;
    if horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    let mut trace = RunTrace::default();
    trace.epochs.push(EpochRecord {
        epoch: 1,
        start: 0,
        length: horizon,
        confidence: delta,
        selected: m,
        statistics: Vec::new(),
        threshold: None,
    });
    let mut history = BanditDataset::new(instance.n_actions());
    base_epoch(instance, m, 1, horizon, delta, &mut history, &mut trace, rng)?;
    Ok(trace)
}

/// Adaptive bandit learning: doubling epochs, each running the base algorithm
/// on the smallest class whose average squared error on all past data is
/// within `slack` of the largest class's. The first epoch uses `F_M`.
pub fn abl_run<R: Rng + ?Sized>(
    instance: &BanditInstance,
    horizon: usize,
    delta: f64,
    slack: f64,
    rng: &mut R,
) -> Result<RunTrace> {
    check_run(horizon, delta, slack)?;
    let schedule = EpochSchedule::new(horizon)?;
    let family = instance.family();
    let mut trace = RunTrace::default();
    let mut history = BanditDataset::new(instance.n_actions());
    for epoch in schedule.epochs() {
        let (selected, statistics, threshold) = if history.is_empty() {
            (family.num_classes(), Vec::new(), None)
        } else {
            let tau = history.len() as f64;
            let stats = family
                .classes()
                .iter()
                .map(|c| least_squares_fit(c, &history).map(|(_, loss)| loss / tau))
                .collect::<Result<Vec<_>>>()?;
            let (m, gamma) = select_model(&stats, slack)?;
            (m, stats, Some(gamma))
        };
        let confidence = epoch.confidence(delta);
        trace.epochs.push(EpochRecord {
            epoch: epoch.index,
            start: epoch.start,
            length: epoch.length,
            confidence,
            selected,
            statistics,
            threshold,
        });
        base_epoch(instance, selected, epoch.index, epoch.length, confidence, &mut history, &mut trace, rng)?;
    }
    Ok(trace)
}
