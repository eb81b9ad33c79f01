//! Simulated environments and instance generators.

mod generate;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{
    verify_nesting, verify_separability_bandit, verify_separability_mdp, HypothesisFunction,
    NestedFamily, SeparabilityReport, TransitionKernel, TOLERANCE,
};
use crate::mdp::{value_iteration, RewardTable, ValueTables};

pub use generate::{
    gen_bandit_instance, gen_mdp_instance, value_bank, BanditGenConfig, MdpGenConfig,
    DEFAULT_MAX_ATTEMPTS,
};

/// Additive observation noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseModel {
    /// Uniform on `[−σ, σ]`, hence σ-sub-Gaussian.
    UniformBounded { sigma: f64 },
}

impl NoiseModel {
    pub fn uniform(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::config(format!("noise scale {sigma} must be finite and nonnegative")));
        }
        Ok(NoiseModel::UniformBounded { sigma })
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseModel::UniformBounded { sigma } => sigma,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseModel::UniformBounded { sigma } => {
                let u: f64 = rng.gen();
                sigma * (2.0 * u - 1.0)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BanditInstanceData {
    truth: HypothesisFunction,
    noise: NoiseModel,
    family: NestedFamily<HypothesisFunction>,
}

/// A stochastic bandit with mean rewards `f*` and a nested family of
/// candidate reward functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BanditInstanceData", into = "BanditInstanceData")]
pub struct BanditInstance {
    family: NestedFamily<HypothesisFunction>,
    truth: HypothesisFunction,
    noise: NoiseModel,
    best_action: usize,
}

impl BanditInstance {
    /// Checks dimensions and nesting. Separability is reported by
    /// [`BanditInstance::separability`] rather than enforced, so that
    /// deliberately non-separable instances can still be simulated.
    pub fn new(family: NestedFamily<HypothesisFunction>, truth: HypothesisFunction, noise: NoiseModel) -> Result<Self> {
        let n = truth.n_actions();
        if let Some(bad) = family.classes().iter().flatten().find(|f| f.n_actions() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.n_actions(),
            });
        }
        if !verify_nesting(&family, &truth)? {
            return Err(Error::config(format!(
                "family is not nested or the truth does not first appear in class {}",
                family.true_index()
            )));
        }
        let noise = NoiseModel::uniform(noise.sigma())?;
        Ok(Self {
            best_action: truth.argmax(),
            family,
            truth,
            noise,
        })
    }

    pub fn family(&self) -> &NestedFamily<HypothesisFunction> {
        &self.family
    }

    pub fn truth(&self) -> &HypothesisFunction {
        &self.truth
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn sigma(&self) -> f64 {
        self.noise.sigma()
    }

    pub fn n_actions(&self) -> usize {
        self.truth.n_actions()
    }

    /// `x*`, lowest index among maximisers.
    pub fn best_action(&self) -> usize {
        self.best_action
    }

    /// `f*(x*)`.
    pub fn best_value(&self) -> f64 {
        self.truth.value(self.best_action)
    }

    /// `f*(x*) − f*(x)`.
    pub fn gap(&self, action: usize) -> f64 {
        self.best_value() - self.truth.value(action)
    }

    pub fn separability(&self) -> Result<SeparabilityReport> {
        verify_separability_bandit(&self.family, &self.truth)
    }
}

impl TryFrom<BanditInstanceData> for BanditInstance {
    type Error = Error;

    fn try_from(d: BanditInstanceData) -> Result<Self> {
        Self::new(d.family, d.truth, d.noise)
    }
}

impl From<BanditInstance> for BanditInstanceData {
    fn from(b: BanditInstance) -> Self {
        Self {
            truth: b.truth,
            noise: b.noise,
            family: b.family,
        }
    }
}

/// `y = f*(x) + ε`.
pub fn sample_reward<R: Rng + ?Sized>(instance: &BanditInstance, action: usize, rng: &mut R) -> Result<f64> {
    if action >= instance.n_actions() {
        return Err(Error::IndexOutOfRange {
            what: "action",
            index: action,
            len: instance.n_actions(),
        });
    }
    Ok(instance.truth.value(action) + instance.noise.sample(rng))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpInstanceData {
    horizon: usize,
    initial_state: usize,
    reward: RewardTable,
    truth: TransitionKernel,
    family: NestedFamily<TransitionKernel>,
}

/// An episodic MDP with known rewards, unknown kernel `P*` and a fixed
/// initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpInstanceData", into = "MdpInstanceData")]
pub struct MdpInstance {
    horizon: usize,
    initial_state: usize,
    reward: RewardTable,
    truth: TransitionKernel,
    family: NestedFamily<TransitionKernel>,
    optimal: ValueTables,
}

impl MdpInstance {
    pub fn new(
        family: NestedFamily<TransitionKernel>,
        truth: TransitionKernel,
        reward: RewardTable,
        horizon: usize,
        initial_state: usize,
    ) -> Result<Self> {
        let (s, a) = (truth.n_states(), truth.n_actions());
        if let Some(bad) = family
            .classes()
            .iter()
            .flatten()
            .find(|p| p.n_states() != s || p.n_actions() != a)
        {
            return Err(Error::DimensionMismatch {
                expected: s * a,
                got: bad.n_states() * bad.n_actions(),
            });
        }
        if initial_state >= s {
            return Err(Error::IndexOutOfRange {
                what: "initial state",
                index: initial_state,
                len: s,
            });
        }
        if !verify_nesting(&family, &truth)? {
            return Err(Error::config(format!(
                "family is not nested or the truth does not first appear in class {}",
                family.true_index()
            )));
        }
        let optimal = value_iteration(&truth, &reward, horizon)?;
        Ok(Self {
            horizon,
            initial_state,
            reward,
            truth,
            family,
            optimal,
        })
    }

    pub fn family(&self) -> &NestedFamily<TransitionKernel> {
        &self.family
    }

    pub fn truth(&self) -> &TransitionKernel {
        &self.truth
    }

    pub fn reward(&self) -> &RewardTable {
        &self.reward
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.truth.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.truth.n_actions()
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    /// Value tables of `P*`.
    pub fn optimal(&self) -> &ValueTables {
        &self.optimal
    }

    /// `V*_1(s_1)`.
    pub fn optimal_value(&self) -> f64 {
        self.optimal.state_values(1)[self.initial_state]
    }

    /// Separability over `V*_{P,h}` for every kernel in the family plus
    /// `random` uniform vectors in `[0, H]` drawn from `seed`.
    pub fn separability(&self, random: usize, seed: u64) -> Result<SeparabilityReport> {
        let bank = self.value_bank(random, seed)?;
        verify_separability_mdp(&self.family, &self.truth, &bank)
    }

    pub fn value_bank(&self, random: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        value_bank(self.family.largest(), &self.reward, self.horizon, random, seed)
    }
}

impl TryFrom<MdpInstanceData> for MdpInstance {
    type Error = Error;

    fn try_from(d: MdpInstanceData) -> Result<Self> {
        Self::new(d.family, d.truth, d.reward, d.horizon, d.initial_state)
    }
}

impl From<MdpInstance> for MdpInstanceData {
    fn from(m: MdpInstance) -> Self {
        Self {
            horizon: m.horizon,
            initial_state: m.initial_state,
            reward: m.reward,
            truth: m.truth,
            family: m.family,
        }
    }
}

/// Inverse-CDF draw from a probability row.
pub(crate) fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    // Row sums may fall short of 1 by rounding.
    last
}

/// `s' ~ P*(· | s, a)`.
pub fn mdp_step<R: Rng + ?Sized>(instance: &MdpInstance, state: usize, action: usize, rng: &mut R) -> Result<usize> {
    if state >= instance.n_states() {
        return Err(Error::IndexOutOfRange {
            what: "state",
            index: state,
            len: instance.n_states(),
        });
    }
    if action >= instance.n_actions() {
        return Err(Error::IndexOutOfRange {
            what: "action",
            index: action,
            len: instance.n_actions(),
        });
    }
    Ok(sample_row(instance.truth.row(state, action), rng))
}

/// True iff `a` and `b` agree up to [`TOLERANCE`] in every entry.
pub(crate) fn same_vector(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= TOLERANCE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn f(values: &[f64]) -> HypothesisFunction {
        HypothesisFunction::new(values.to_vec()).unwrap()
    }

    fn bandit(sigma: f64) -> BanditInstance {
        let truth = f(&[0.2, 0.7, 0.4]);
        let family = NestedFamily::new(vec![vec![truth.clone()]], 1, 0.5, 0.1).unwrap();
        BanditInstance::new(family, truth, NoiseModel::uniform(sigma).unwrap()).unwrap()
    }

    #[test]
    fn noiseless_reward_is_exact() {
        let inst = bandit(0.0);
        let mut rng = seeded(1);
        assert_eq!(sample_reward(&inst, 1, &mut rng).unwrap(), 0.7);
        assert!(sample_reward(&inst, 3, &mut rng).is_err());
        assert_eq!(inst.best_action(), 1);
        assert_eq!(inst.best_value(), 0.7);
    }

    #[test]
    fn noisy_rewards_replay_and_stay_in_band() {
        let inst = bandit(0.1);
        let draw = |seed| {
            let mut rng = seeded(seed);
            [sample_reward(&inst, 0, &mut rng).unwrap(), sample_reward(&inst, 0, &mut rng).unwrap()]
        };
        let a = draw(5);
        assert_eq!(a, draw(5));
        assert_ne!(a[0], a[1]);
        for y in a {
            assert!((0.1..=0.3).contains(&y));
        }
    }

    #[test]
    fn empirical_mean_converges() {
        let inst = bandit(0.1);
        let mut rng = seeded(9);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_reward(&inst, 2, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 0.4).abs() <= 3.0 * 0.1 / (n as f64).sqrt());
    }

    fn chain(rows: Vec<Vec<Vec<f64>>>) -> MdpInstance {
        let truth = TransitionKernel::from_rows(rows).unwrap();
        let n = truth.n_states();
        let family = NestedFamily::new(vec![vec![truth.clone()]], 1, 0.5, 0.1).unwrap();
        let reward = RewardTable::new(n, 1, vec![0.5; n]).unwrap();
        MdpInstance::new(family, truth, reward, 2, 0).unwrap()
    }

    #[test]
    fn deterministic_row_always_lands() {
        let inst = chain(vec![vec![vec![0.0, 1.0]], vec![vec![0.0, 1.0]]]);
        let mut rng = seeded(3);
        assert!((0..100).all(|_| mdp_step(&inst, 0, 0, &mut rng).unwrap() == 1));
        assert!(mdp_step(&inst, 2, 0, &mut rng).is_err());
        assert!(mdp_step(&inst, 0, 1, &mut rng).is_err());
    }

    #[test]
    fn uniform_row_frequencies() {
        let row = vec![0.25; 4];
        let inst = chain(vec![vec![row.clone()]; 4]);
        let mut rng = seeded(4);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[mdp_step(&inst, 1, 0, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn trajectories_replay() {
        let inst = chain(vec![vec![vec![0.3, 0.7]], vec![vec![0.6, 0.4]]]);
        let walk = |seed| {
            let mut rng = seeded(seed);
            let mut s = 0;
            (0..50)
                .map(|_| {
                    s = mdp_step(&inst, s, 0, &mut rng).unwrap();
                    s
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(walk(12), walk(12));
    }

    #[test]
    fn instances_round_trip_through_json() {
        let b = bandit(0.1);
        let back: BanditInstance = serde_json::from_str(&serde_json::to_string(&b).unwrap()).unwrap();
        assert_eq!(back, b);
        let m = chain(vec![vec![vec![0.3, 0.7]], vec![vec![0.6, 0.4]]]);
        let back: MdpInstance = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn truth_outside_its_class_is_rejected() {
        let truth = f(&[0.2, 0.7]);
        let other = f(&[0.1, 0.1]);
        let family = NestedFamily::new(vec![vec![other]], 1, 0.5, 0.1).unwrap();
        let err = BanditInstance::new(family, truth, NoiseModel::uniform(0.0).unwrap()).unwrap_err();
        assert!(err.is_config());
    }
}
