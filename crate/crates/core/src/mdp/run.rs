use rand::Rng;
use serde::{Deserialize, Serialize};

use super::planning::{policy_evaluation, value_iteration, GreedyPolicy, RewardTable, ValueTables};
use super::vtr::{beta_mdp, mdp_confidence_set, mdp_test_statistic, vtr_discrepancy, vtr_fit, BetaForm, VtrDataset};
use crate::bandit::{check_run, coverage, select_model, EpochRecord, EpochSchedule};
use crate::environment::{mdp_step, MdpInstance};
use crate::error::{check_confidence, Error, Result};
use crate::hypothesis::{metric_entropy, TransitionKernel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// 1-based episode over the whole run.
    pub episode: usize,
    pub epoch: usize,
    pub selected_class: usize,
    /// `V^{π_k}_1(s_1)` under `P*`.
    pub episode_value: f64,
    /// `V*_1(s_1)`.
    pub optimal_value: f64,
    pub instant_regret: f64,
    pub cum_regret: f64,
    /// Whether `P*` was in the confidence set used for planning; `None` when
    /// the active class does not contain `P*`.
    pub covered: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MdpRunTrace {
    pub episodes: Vec<EpisodeRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl MdpRunTrace {
    pub fn final_regret(&self) -> f64 {
        self.episodes.last().map_or(0.0, |e| e.cum_regret)
    }

    pub fn coverage(&self) -> Option<bool> {
        coverage(self.episodes.iter().map(|e| e.covered))
    }

    pub fn selections(&self) -> Vec<usize> {
        self.epochs.iter().map(|e| e.selected).collect()
    }
}

/// Returns the position in `members` of the kernel with the largest
/// `V*_{P,1}(s_1)` (lowest position on ties), its value and its tables.
pub fn optimistic_model(
    members: &[&TransitionKernel],
    reward: &RewardTable,
    horizon: usize,
    initial_state: usize,
) -> Result<(usize, f64, ValueTables)> {
    let mut best: Option<(usize, f64, ValueTables)> = None;
    for (i, p) in members.iter().enumerate() {
        let tables = value_iteration(p, reward, horizon)?;
        let v = *tables.state_values(1).get(initial_state).ok_or(Error::IndexOutOfRange {
            what: "initial state",
            index: initial_state,
            len: p.n_states(),
        })?;
        if best.as_ref().map_or(true, |b| v > b.1) {
            best = Some((i, v, tables));
        }
    }
    best.ok_or_else(|| Error::config("optimistic planning over an empty confidence set"))
}

/// Planning results for every kernel of a class: the tables, the greedy
/// policy, and that policy's value under `P*`.
struct ClassPlans {
    tables: Vec<ValueTables>,
    policies: Vec<GreedyPolicy>,
    true_values: Vec<f64>,
}

impl ClassPlans {
    fn new(instance: &MdpInstance, class: &[TransitionKernel]) -> Result<Self> {
        let (r, h, s1) = (instance.reward(), instance.horizon(), instance.initial_state());
        let mut plans = Self {
            tables: Vec::with_capacity(class.len()),
            policies: Vec::with_capacity(class.len()),
            true_values: Vec::with_capacity(class.len()),
        };
        for p in class {
            let tables = value_iteration(p, r, h)?;
            let policy = tables.greedy_policy();
            plans.true_values.push(policy_evaluation(&policy, instance.truth(), r, h)?[s1]);
            plans.tables.push(tables);
            plans.policies.push(policy);
        }
        Ok(plans)
    }

    fn optimistic(&self, members: &[usize], s1: usize) -> usize {
        let mut best = members[0];
        for &i in &members[1..] {
            if self.tables[i].state_values(1)[s1] > self.tables[best].state_values(1)[s1] {
                best = i;
            }
        }
        best
    }
}

struct EpochRun<'a> {
    instance: &'a MdpInstance,
    form: BetaForm,
    plans: Vec<Option<ClassPlans>>,
}

impl<'a> EpochRun<'a> {
    fn new(instance: &'a MdpInstance, form: BetaForm) -> Self {
        Self {
            instance,
            form,
            plans: (0..instance.family().num_classes()).map(|_| None).collect(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn run<R: Rng + ?Sized>(
        &mut self,
        m: usize,
        epoch: usize,
        length: usize,
        delta: f64,
        history: &mut VtrDataset,
        trace: &mut MdpRunTrace,
        rng: &mut R,
    ) -> Result<()> {
        let instance = self.instance;
        let family = instance.family();
        if m == 0 || m > family.num_classes() {
            return Err(Error::IndexOutOfRange {
                what: "class",
                index: m,
                len: family.num_classes(),
            });
        }
        let class = family.class(m);
        if self.plans[m - 1].is_none() {
            self.plans[m - 1] = Some(ClassPlans::new(instance, class)?);
        }
        let plans = self.plans[m - 1].as_ref().expect("filled above");
        let entropy = metric_entropy(class.len(), None)?;
        let truth = instance.truth();
        let realizable = family.position_in(m, truth).is_some();
        let (horizon, s1) = (instance.horizon(), instance.initial_state());
        let optimal_value = instance.optimal_value();
        let all: Vec<usize> = (0..class.len()).collect();
        let mut data = VtrDataset::new(instance.n_states(), instance.n_actions(), horizon);
        let mut cum = trace.final_regret();
        let mut path = Vec::with_capacity(horizon);
        for _ in 0..length {
            let (members, covered) = if data.is_empty() {
                (all.clone(), realizable.then_some(true))
            } else {
                let fit = vtr_fit(class, &data)?;
                let beta = beta_mdp(entropy, data.episodes(), horizon, delta, self.form)?;
                let members = mdp_confidence_set(class, fit.index, &data, beta)?;
                let covered = if realizable {
                    Some(vtr_discrepancy(truth, &class[fit.index], &data)? <= beta)
                } else {
                    None
                };
                (members, covered)
            };
            let chosen = plans.optimistic(&members, s1);
            let policy = &plans.policies[chosen];
            path.clear();
            let mut s = s1;
            for h in 1..=horizon {
                let a = policy.action(h, s);
                let next = mdp_step(instance, s, a, rng)?;
                path.push((s, a, next));
                s = next;
            }
            data.push_episode(&plans.tables[chosen], &path)?;
            history.push_episode(&plans.tables[chosen], &path)?;
            let episode_value = plans.true_values[chosen];
            let instant_regret = (optimal_value - episode_value).max(0.0);
            cum += instant_regret;
            trace.episodes.push(EpisodeRecord {
                episode: trace.episodes.len() + 1,
                epoch,
                selected_class: m,
                episode_value,
                optimal_value,
                instant_regret,
                cum_regret: cum,
                covered,
            });
        }
        Ok(())
    }
}

/// UCRL-VTR on class `m` of the instance's family for `episodes` episodes,
/// recorded as a single epoch.
pub fn ucrl_vtr_run<R: Rng + ?Sized>(
    instance: &MdpInstance,
    m: usize,
    episodes: usize,
    delta: f64,
    form: BetaForm,
    rng: &mut R,
) -> Result<MdpRunTrace> {
    check_confidence(delta)?;
    if episodes == 0 {
        return Err(Error::config("episode count must be at least 1"));
    }
    let mut trace = MdpRunTrace::default();
    trace.epochs.push(EpochRecord {
        epoch: 1,
        start: 0,
        length: episodes,
        confidence: delta,
        selected: m,
        statistics: Vec::new(),
        threshold: None,
    });
    let mut history = VtrDataset::new(instance.n_states(), instance.n_actions(), instance.horizon());
    EpochRun::new(instance, form).run(m, 1, episodes, delta, &mut history, &mut trace, rng)?;
    Ok(trace)
}

/// Adaptive reinforcement learning: doubling epochs of UCRL-VTR on the
/// smallest class whose average VTR loss over all past episodes is within
/// `slack` of the largest class's. The first epoch uses `P_M`.
pub fn arl_run<R: Rng + ?Sized>(
    instance: &MdpInstance,
    episodes: usize,
    delta: f64,
    slack: f64,
    form: BetaForm,
    rng: &mut R,
) -> Result<MdpRunTrace> {
    check_run(episodes, delta, slack)?;
    let schedule = EpochSchedule::new(episodes)?;
    let family = instance.family();
    let mut trace = MdpRunTrace::default();
    let mut history = VtrDataset::new(instance.n_states(), instance.n_actions(), instance.horizon());
    let mut runner = EpochRun::new(instance, form);
    for epoch in schedule.epochs() {
        let (selected, statistics, threshold) = if history.is_empty() {
            (family.num_classes(), Vec::new(), None)
        } else {
            let stats = family
                .classes()
                .iter()
                .map(|c| mdp_test_statistic(c, &history))
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
        runner.run(selected, epoch.index, epoch.length, confidence, &mut history, &mut trace, rng)?;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::environment::{gen_mdp_instance, MdpGenConfig};
    use crate::hypothesis::NestedFamily;
    use crate::rng::seeded;

    /// Two states, two actions. Action 0 stays, action 1 switches; reward 1
    /// only in state 1.
    fn switch_instance(class: Vec<TransitionKernel>, horizon: usize) -> MdpInstance {
        let truth = TransitionKernel::deterministic(2, 2, &[0, 1, 1, 0]).unwrap();
        let reward = RewardTable::new(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let family = NestedFamily::new(vec![class], 1, 0.5, 0.05).unwrap();
        MdpInstance::new(family, truth, reward, horizon, 0).unwrap()
    }

    fn truth() -> TransitionKernel {
        TransitionKernel::deterministic(2, 2, &[0, 1, 1, 0]).unwrap()
    }

    #[test]
    fn optimistic_model_cases() {
        let r = RewardTable::new(2, 1, vec![0.0, 1.0]).unwrap();
        let steer = TransitionKernel::deterministic(2, 1, &[1, 1]).unwrap();
        let uniform = TransitionKernel::from_flat(2, 1, vec![0.5; 4]).unwrap();
        let (i, v, _) = optimistic_model(&[&uniform, &steer], &r, 2, 0).unwrap();
        assert_eq!((i, v), (1, 1.0));
        let (i, _, _) = optimistic_model(&[&steer], &r, 2, 0).unwrap();
        assert_eq!(i, 0);
        let (i, _, _) = optimistic_model(&[&steer, &steer], &r, 2, 0).unwrap();
        assert_eq!(i, 0);
        assert!(optimistic_model(&[], &r, 2, 0).is_err());
    }

    #[test]
    fn true_singleton_class_has_zero_regret() {
        let inst = switch_instance(vec![truth()], 3);
        let trace = ucrl_vtr_run(&inst, 1, 20, 0.1, BetaForm::Finite, &mut seeded(1)).unwrap();
        assert_eq!(trace.final_regret(), 0.0);
        assert_eq!(trace.coverage(), Some(true));
        assert!(trace.episodes.iter().all(|e| e.episode_value == e.optimal_value));
    }

    #[test]
    fn wrong_kernel_is_excluded_once_data_separates_it() {
        // `liar` sends everything to state 1, so it rates both first actions
        // equally, ties with the truth on V_1(s_1) = 1, and wins the tie. Its
        // greedy policy stays in state 0 under the truth (regret 1), and each
        // such episode adds 1 to its discrepancy from the fitted truth. With
        // δ = 1 and two kernels, β = 8·2²·ln 2 ≈ 22.18, so the liar plans
        // episodes 1..=23 and the truth plans every later one.
        let liar = TransitionKernel::deterministic(2, 2, &[1, 1, 1, 1]).unwrap();
        let inst = switch_instance(vec![liar, truth()], 2);
        let trace = ucrl_vtr_run(&inst, 1, 60, 1.0, BetaForm::Finite, &mut seeded(2)).unwrap();
        let bad: Vec<usize> = trace
            .episodes
            .iter()
            .filter(|e| e.instant_regret > 0.0)
            .map(|e| e.episode)
            .collect();
        assert_eq!(bad, (1..=23).collect::<Vec<_>>());
        assert_eq!(trace.final_regret(), 23.0);
        assert_eq!(trace.coverage(), Some(true));
    }

    #[test]
    fn runs_replay_and_stay_bounded() {
        let inst = gen_mdp_instance(&MdpGenConfig::default()).unwrap();
        let a = arl_run(&inst, 200, 0.1, 0.25, BetaForm::Finite, &mut seeded(3)).unwrap();
        let b = arl_run(&inst, 200, 0.1, 0.25, BetaForm::Finite, &mut seeded(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.episodes.len(), 200);
        assert!(a.final_regret() <= 200.0 * inst.horizon() as f64);
        assert!(a.episodes.windows(2).all(|w| w[1].cum_regret >= w[0].cum_regret));
    }

    #[test]
    fn deterministic_separable_instance_selects_true_class() {
        let inst = gen_mdp_instance(&MdpGenConfig::default()).unwrap();
        let trace = arl_run(&inst, 256, 0.1, 0.25, BetaForm::Finite, &mut seeded(4)).unwrap();
        let s = trace.selections();
        assert_eq!(s[0], 3);
        assert!(s[1..].iter().all(|&m| m == 2), "{s:?}");
    }

    #[test]
    fn single_class_arl_only_restarts() {
        let inst = switch_instance(vec![truth()], 2);
        let trace = arl_run(&inst, 30, 0.1, 0.25, BetaForm::Covering, &mut seeded(5)).unwrap();
        assert!(trace.selections().iter().all(|&m| m == 1));
        assert_eq!(trace.final_regret(), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn arl_invariants(gen_seed in 0u64..1000, run_seed in any::<u64>(), episodes in 2usize..120) {
            let cfg = MdpGenConfig {
                seed: gen_seed,
                ..MdpGenConfig::default()
            };
            let inst = gen_mdp_instance(&cfg).unwrap();
            let run = |s| arl_run(&inst, episodes, 0.1, 0.25, BetaForm::Finite, &mut seeded(s)).unwrap();
            let trace = run(run_seed);
            prop_assert_eq!(&trace, &run(run_seed));
            prop_assert_eq!(trace.episodes.len(), episodes);
            for e in &trace.episodes {
                prop_assert!(e.instant_regret >= -1e-12);
                prop_assert!(e.episode_value <= e.optimal_value + 1e-12);
            }
            for e in &trace.epochs {
                prop_assert!(e.statistics.windows(2).all(|w| w[1] <= w[0] + 1e-12));
            }
        }
    }
}
