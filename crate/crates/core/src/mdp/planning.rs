//! Finite-horizon dynamic programming on tabular models.
//!
//! Steps are 1-based in the public API (`h` in `1..=H`, with `V_{H+1} ≡ 0`),
//! matching the usual episodic notation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::TransitionKernel;

/// Known rewards `r(s, a) ∈ [0, 1]`, serialised as `[state][action]` rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct RewardTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl RewardTable {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch {
                expected: n_states * n_actions,
                got: values.len(),
            });
        }
        if let Some(r) = values.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::config(format!("reward {r} outside [0, 1]")));
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if n_actions == 0 {
            return Err(Error::config("reward table needs at least one state and action"));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n_actions) {
            return Err(Error::DimensionMismatch {
                expected: n_actions,
                got: bad.len(),
            });
        }
        let n_states = rows.len();
        Self::new(n_states, n_actions, rows.concat())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.n_actions + action]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl TryFrom<Vec<Vec<f64>>> for RewardTable {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<RewardTable> for Vec<Vec<f64>> {
    fn from(r: RewardTable) -> Self {
        r.values.chunks(r.n_actions).map(<[f64]>::to_vec).collect()
    }
}

/// `(P V)(s, a) = Σ_{s'} P(s' | s, a) V(s')`, laid out as `s * A + a`.
pub fn apply_kernel(kernel: &TransitionKernel, values: &[f64]) -> Result<Vec<f64>> {
    if values.len() != kernel.n_states() {
        return Err(Error::DimensionMismatch {
            expected: kernel.n_states(),
            got: values.len(),
        });
    }
    Ok(kernel.rows().map(|row| dot(row, values)).collect())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Action values `Q_h` for `h = 1..=H` and state values `V_h` for
/// `h = 1..=H+1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTables {
    n_states: usize,
    n_actions: usize,
    q: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl ValueTables {
    pub fn horizon(&self) -> usize {
        self.q.len()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// `V_h` for `1 <= h <= H + 1`.
    pub fn state_values(&self, h: usize) -> &[f64] {
        &self.v[h - 1]
    }

    /// `Q_h` for `1 <= h <= H`, laid out as `s * A + a`.
    pub fn action_values(&self, h: usize) -> &[f64] {
        &self.q[h - 1]
    }

    /// All of `V_1 ..= V_{H+1}`.
    pub fn all_state_values(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub fn greedy_policy(&self) -> GreedyPolicy {
        let actions = self
            .q
            .iter()
            .map(|q| q.chunks(self.n_actions).map(argmax).collect())
            .collect();
        GreedyPolicy { actions }
    }
}

/// Lowest-index argmax.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// A deterministic nonstationary policy, `actions[h - 1][s]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyPolicy {
    actions: Vec<Vec<usize>>,
}

impl GreedyPolicy {
    pub fn new(actions: Vec<Vec<usize>>) -> Self {
        Self { actions }
    }

    pub fn action(&self, h: usize, state: usize) -> usize {
        self.actions[h - 1][state]
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }
}

fn check_model(kernel: &TransitionKernel, reward: &RewardTable, horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    if kernel.n_states() != reward.n_states() || kernel.n_actions() != reward.n_actions() {
        return Err(Error::DimensionMismatch {
            expected: kernel.n_states() * kernel.n_actions(),
            got: reward.n_states() * reward.n_actions(),
        });
    }
    Ok(())
}

/// Backward induction from `V_{H+1} ≡ 0`:
/// `Q_h = r + P V_{h+1}`, `V_h(s) = max_a Q_h(s, a)`.
pub fn value_iteration(kernel: &TransitionKernel, reward: &RewardTable, horizon: usize) -> Result<ValueTables> {
    check_model(kernel, reward, horizon)?;
    let (n_states, n_actions) = (kernel.n_states(), kernel.n_actions());
    let mut v = vec![vec![0.0; n_states]; horizon + 1];
    let mut q = vec![Vec::new(); horizon];
    for h in (0..horizon).rev() {
        let next = &v[h + 1];
        let q_h: Vec<f64> = kernel
            .rows()
            .zip(reward.values())
            .map(|(row, r)| r + dot(row, next))
            .collect();
        v[h] = q_h
            .chunks(n_actions)
            .map(|qs| qs.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        q[h] = q_h;
    }
    Ok(ValueTables {
        n_states,
        n_actions,
        q,
        v,
    })
}

/// Exact `V^π_1` by backward recursion under `kernel`.
pub fn policy_evaluation(
    policy: &GreedyPolicy,
    kernel: &TransitionKernel,
    reward: &RewardTable,
    horizon: usize,
) -> Result<Vec<f64>> {
    check_model(kernel, reward, horizon)?;
    if policy.horizon() != horizon {
        return Err(Error::DimensionMismatch {
            expected: horizon,
            got: policy.horizon(),
        });
    }
    let n_states = kernel.n_states();
    let mut v = vec![0.0; n_states];
    for h in (1..=horizon).rev() {
        v = (0..n_states)
            .map(|s| {
                let a = policy.action(h, s);
                reward.get(s, a) + dot(kernel.row(s, a), &v)
            })
            .collect();
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn apply_kernel_cases() {
        let k = TransitionKernel::from_rows(vec![
            vec![vec![0.5, 0.5], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.5, 0.5]],
        ])
        .unwrap();
        assert_eq!(apply_kernel(&k, &[0.0, 0.0]).unwrap(), vec![0.0; 4]);
        assert_eq!(apply_kernel(&k, &[0.0, 1.0]).unwrap()[1], 1.0);
        assert!((apply_kernel(&k, &[0.2, 0.8]).unwrap()[0] - 0.5).abs() < 1e-15);
        assert!(apply_kernel(&k, &[0.0]).is_err());
    }

    #[test]
    fn horizon_one_is_row_max_of_reward() {
        let k = TransitionKernel::deterministic(2, 2, &[0, 1, 1, 0]).unwrap();
        let r = RewardTable::new(2, 2, vec![0.3, 0.7, 0.9, 0.1]).unwrap();
        let t = value_iteration(&k, &r, 1).unwrap();
        assert_eq!(t.action_values(1), r.values());
        assert_eq!(t.state_values(1), &[0.7, 0.9]);
        assert_eq!(t.state_values(2), &[0.0, 0.0]);
    }

    fn chain() -> (TransitionKernel, RewardTable) {
        // s0 -> s1 under every action, s1 absorbing; reward only in s1.
        let k = TransitionKernel::deterministic(2, 2, &[1, 1, 1, 1]).unwrap();
        let r = RewardTable::new(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        (k, r)
    }

    #[test]
    fn two_state_chain() {
        let (k, r) = chain();
        let t = value_iteration(&k, &r, 2).unwrap();
        assert_eq!(t.state_values(1)[0], 1.0);
        assert_eq!(t.state_values(1)[1], 2.0);
    }

    #[test]
    fn policy_evaluation_matches_optimal_values() {
        let k = TransitionKernel::from_rows(vec![
            vec![vec![0.2, 0.8], vec![0.6, 0.4]],
            vec![vec![0.5, 0.5], vec![0.1, 0.9]],
        ])
        .unwrap();
        let r = RewardTable::new(2, 2, vec![0.1, 0.4, 0.8, 0.3]).unwrap();
        let t = value_iteration(&k, &r, 3).unwrap();
        let v = policy_evaluation(&t.greedy_policy(), &k, &r, 3).unwrap();
        assert_eq!(v, t.state_values(1));
    }

    #[test]
    fn policy_evaluation_horizon_one_and_hand_chain() {
        let (k, _) = chain();
        let r = RewardTable::new(2, 2, vec![0.25, 0.0, 1.0, 0.5]).unwrap();
        let pi = GreedyPolicy::new(vec![vec![0, 1]]);
        assert_eq!(policy_evaluation(&pi, &k, &r, 1).unwrap(), vec![0.25, 0.5]);
        // h=1 in s0 takes a0 (0.25) then h=2 in s1 takes a1 (0.5).
        let pi = GreedyPolicy::new(vec![vec![0, 0], vec![1, 1]]);
        assert_eq!(policy_evaluation(&pi, &k, &r, 2).unwrap(), vec![0.75, 1.5]);
    }

    proptest! {
        #[test]
        fn values_are_bounded_and_decrease_with_the_step(
            raw in proptest::collection::vec(0.001f64..1.0, 3 * 2 * 3),
            rewards in proptest::collection::vec(0.0f64..=1.0, 3 * 2),
            horizon in 1usize..5,
        ) {
            let rows: Vec<Vec<Vec<f64>>> = raw
                .chunks(3)
                .map(|w| {
                    let total: f64 = w.iter().sum();
                    w.iter().map(|x| x / total).collect()
                })
                .collect::<Vec<Vec<f64>>>()
                .chunks(2)
                .map(|c| c.to_vec())
                .collect();
            let p = TransitionKernel::from_rows(rows).unwrap();
            let r = RewardTable::new(3, 2, rewards).unwrap();
            let t = value_iteration(&p, &r, horizon).unwrap();
            for h in 1..=horizon {
                for (s, &v) in t.state_values(h).iter().enumerate() {
                    prop_assert!(v >= 0.0 && v <= (horizon - h + 1) as f64 + 1e-12);
                    prop_assert!(v + 1e-12 >= t.state_values(h + 1)[s]);
                }
            }
            prop_assert!(t.state_values(horizon + 1).iter().all(|&v| v == 0.0));
        }
    }
}
