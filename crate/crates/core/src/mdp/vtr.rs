//! Value-targeted regression.
//!
//! Each transition `(s, a, s')` observed in episode `j` at step `h` is a
//! regression sample with feature vector `V^j_{h+1}` and target
//! `V^j_{h+1}(s')`; a kernel `P` predicts `(P V^j_{h+1})(s, a)`. The dataset
//! keeps, per `(s, a)`, the sums `Σ y²`, `Σ y V` and `Σ V Vᵀ`, so the loss of
//! any kernel is a quadratic form whose cost does not grow with the number of
//! episodes.

use serde::{Deserialize, Serialize};

use super::planning::{dot, ValueTables};
use crate::error::{check_confidence, Error, Result};
use crate::hypothesis::TransitionKernel;

/// One observed step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    /// 0-based episode index within the dataset.
    pub episode: usize,
    /// 1-based step `h`.
    pub step: usize,
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
}

#[derive(Clone, Debug, Default)]
struct PairStats {
    sum_y2: f64,
    /// `Σ y V`, length `S`.
    cross: Vec<f64>,
    /// `Σ V Vᵀ`, row-major `S × S`.
    gram: Vec<f64>,
}

impl PairStats {
    fn new(n_states: usize) -> Self {
        Self {
            sum_y2: 0.0,
            cross: vec![0.0; n_states],
            gram: vec![0.0; n_states * n_states],
        }
    }

    fn add(&mut self, v: &[f64], y: f64) {
        let n = v.len();
        self.sum_y2 += y * y;
        for i in 0..n {
            self.cross[i] += y * v[i];
            let row = &mut self.gram[i * n..(i + 1) * n];
            for (g, vj) in row.iter_mut().zip(v) {
                *g += v[i] * vj;
            }
        }
    }

    /// `xᵀ G x`.
    fn quad(&self, x: &[f64]) -> f64 {
        self.gram
            .chunks(x.len())
            .zip(x)
            .map(|(row, xi)| xi * dot(row, x))
            .sum()
    }
}

/// Transitions grouped by episode, together with the next-step value vectors
/// `V_{h+1}` that were active in each episode.
#[derive(Clone, Debug)]
pub struct VtrDataset {
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    transitions: Vec<Transition>,
    /// `targets[j][h - 1]` is `V^j_{h+1}`.
    targets: Vec<Vec<Vec<f64>>>,
    stats: Vec<PairStats>,
}

impl VtrDataset {
    pub fn new(n_states: usize, n_actions: usize, horizon: usize) -> Self {
        Self {
            n_states,
            n_actions,
            horizon,
            transitions: Vec::new(),
            targets: Vec::new(),
            stats: vec![PairStats::new(n_states); n_states * n_actions],
        }
    }

    /// Append one episode. `path[h - 1] = (s_h, a_h, s_{h+1})` and `values`
    /// are the tables the episode's policy was planned with.
    pub fn push_episode(&mut self, values: &ValueTables, path: &[(usize, usize, usize)]) -> Result<()> {
        if path.len() != self.horizon || values.horizon() != self.horizon {
            return Err(Error::DimensionMismatch {
                expected: self.horizon,
                got: if path.len() != self.horizon { path.len() } else { values.horizon() },
            });
        }
        if values.n_states() != self.n_states {
            return Err(Error::DimensionMismatch {
                expected: self.n_states,
                got: values.n_states(),
            });
        }
        for &(s, a, s_next) in path {
            if s >= self.n_states || s_next >= self.n_states {
                return Err(Error::IndexOutOfRange {
                    what: "state",
                    index: s.max(s_next),
                    len: self.n_states,
                });
            }
            if a >= self.n_actions {
                return Err(Error::IndexOutOfRange {
                    what: "action",
                    index: a,
                    len: self.n_actions,
                });
            }
        }
        let episode = self.targets.len();
        let next_values: Vec<Vec<f64>> = (2..=self.horizon + 1)
            .map(|h| values.state_values(h).to_vec())
            .collect();
        for (i, &(state, action, next_state)) in path.iter().enumerate() {
            let v = &next_values[i];
            self.stats[state * self.n_actions + action].add(v, v[next_state]);
            self.transitions.push(Transition {
                episode,
                step: i + 1,
                state,
                action,
                next_state,
            });
        }
        self.targets.push(next_values);
        Ok(())
    }

    pub fn episodes(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// `V^j_{h+1}` for the episode and step of `t`.
    pub fn next_values(&self, t: &Transition) -> &[f64] {
        &self.targets[t.episode][t.step - 1]
    }

    /// The regression target `V^j_{h+1}(s')`.
    pub fn target(&self, t: &Transition) -> f64 {
        self.next_values(t)[t.next_state]
    }

    fn check_kernel(&self, kernel: &TransitionKernel) -> Result<()> {
        if kernel.n_states() != self.n_states || kernel.n_actions() != self.n_actions {
            return Err(Error::DimensionMismatch {
                expected: self.n_states * self.n_actions,
                got: kernel.n_states() * kernel.n_actions(),
            });
        }
        Ok(())
    }
}

/// `Σ_j Σ_h (V^j_{h+1}(s') − (P V^j_{h+1})(s, a))²`.
pub fn vtr_loss(kernel: &TransitionKernel, data: &VtrDataset) -> Result<f64> {
    data.check_kernel(kernel)?;
    let loss: f64 = kernel
        .rows()
        .zip(&data.stats)
        .map(|(p, st)| st.sum_y2 - 2.0 * dot(p, &st.cross) + st.quad(p))
        .sum();
    Ok(loss.max(0.0))
}

/// `Σ_j Σ_h ((P V^j_{h+1}) − (Q V^j_{h+1}))²(s, a)`.
pub fn vtr_discrepancy(p: &TransitionKernel, q: &TransitionKernel, data: &VtrDataset) -> Result<f64> {
    data.check_kernel(p)?;
    data.check_kernel(q)?;
    let mut diff = vec![0.0; data.n_states];
    let mut total = 0.0;
    for ((rp, rq), st) in p.rows().zip(q.rows()).zip(&data.stats) {
        for ((d, a), b) in diff.iter_mut().zip(rp).zip(rq) {
            *d = a - b;
        }
        total += st.quad(&diff);
    }
    Ok(total.max(0.0))
}

/// Least-squares fit over a finite class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fit {
    /// 0-based position in the class; lowest index on ties.
    pub index: usize,
    pub loss: f64,
}

pub fn vtr_fit(class: &[TransitionKernel], data: &VtrDataset) -> Result<Fit> {
    if class.is_empty() {
        return Err(Error::config("cannot fit an empty kernel class"));
    }
    let mut best = Fit {
        index: 0,
        loss: vtr_loss(&class[0], data)?,
    };
    for (i, p) in class.iter().enumerate().skip(1) {
        let loss = vtr_loss(p, data)?;
        if loss < best.loss {
            best = Fit { index: i, loss };
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaForm {
    /// `8H²(entropy + ln(1/δ))`, valid for finite classes.
    #[default]
    Finite,
    /// `8H²(ln 2 + entropy + ln(1/δ)) + 4H²(2 + √(2 ln(4kH(kH+1)/δ)))`.
    Covering,
}

/// Confidence width after `k >= 1` episodes of data.
pub fn beta_mdp(entropy: f64, k: usize, horizon: usize, delta: f64, form: BetaForm) -> Result<f64> {
    check_confidence(delta)?;
    let h2 = (horizon * horizon) as f64;
    let log_inv = (1.0 / delta).ln();
    Ok(match form {
        BetaForm::Finite => 8.0 * h2 * (entropy + log_inv),
        BetaForm::Covering => {
            let kh = (k.max(1) * horizon) as f64;
            let tail = (2.0 * (4.0 * kh * (kh + 1.0) / delta).ln()).sqrt();
            8.0 * h2 * (std::f64::consts::LN_2 + entropy + log_inv) + 4.0 * h2 * (2.0 + tail)
        }
    })
}

/// Positions of all kernels whose discrepancy to `class[fit]` is at most `beta`.
pub fn mdp_confidence_set(class: &[TransitionKernel], fit: usize, data: &VtrDataset, beta: f64) -> Result<Vec<usize>> {
    let estimate = class.get(fit).ok_or(Error::IndexOutOfRange {
        what: "fitted kernel",
        index: fit,
        len: class.len(),
    })?;
    let mut members = Vec::new();
    for (i, p) in class.iter().enumerate() {
        if i == fit || vtr_discrepancy(p, estimate, data)? <= beta {
            members.push(i);
        }
    }
    Ok(members)
}

/// Minimum VTR loss over the class, averaged over `τ H` samples.
pub fn mdp_test_statistic(class: &[TransitionKernel], data: &VtrDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::UndefinedStatistic);
    }
    let fit = vtr_fit(class, data)?;
    Ok(fit.loss / (data.episodes() * data.horizon()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{value_iteration, RewardTable};

    fn literal_loss(p: &TransitionKernel, data: &VtrDataset) -> f64 {
        data.transitions()
            .iter()
            .map(|t| {
                let pred = dot(p.row(t.state, t.action), data.next_values(t));
                (data.target(t) - pred).powi(2)
            })
            .sum()
    }

    fn uniform_kernel(n_states: usize, n_actions: usize) -> TransitionKernel {
        let p = 1.0 / n_states as f64;
        TransitionKernel::from_flat(n_states, n_actions, vec![p; n_states * n_actions * n_states]).unwrap()
    }

    /// Tables whose `V_2` is the given vector (H = 1 has `V_2 ≡ 0`, so use H = 2
    /// with a hand-set reward and a kernel that lands in a known state).
    fn one_step_tables(v2: [f64; 2]) -> ValueTables {
        // Absorbing kernel and per-state constant reward: V_2(s) = r(s).
        let k = TransitionKernel::deterministic(2, 1, &[0, 1]).unwrap();
        let r = RewardTable::new(2, 1, v2.to_vec()).unwrap();
        value_iteration(&k, &r, 2).unwrap()
    }

    #[test]
    fn empty_dataset_has_zero_loss_and_fits_first() {
        let data = VtrDataset::new(2, 1, 2);
        let class = vec![uniform_kernel(2, 1), TransitionKernel::deterministic(2, 1, &[1, 1]).unwrap()];
        assert_eq!(vtr_loss(&class[1], &data).unwrap(), 0.0);
        assert_eq!(vtr_fit(&class, &data).unwrap(), Fit { index: 0, loss: 0.0 });
        assert!(matches!(mdp_test_statistic(&class, &data), Err(Error::UndefinedStatistic)));
    }

    #[test]
    fn single_record_hand_loss() {
        // V_2 = (0.2, 0.8); uniform row predicts 0.5, observed s' = 1 gives 0.8.
        let tables = one_step_tables([0.2, 0.8]);
        let mut data = VtrDataset::new(2, 1, 2);
        data.push_episode(&tables, &[(0, 0, 1), (1, 0, 1)]).unwrap();
        assert_eq!(data.target(&data.transitions()[0]), 0.8);
        let p = uniform_kernel(2, 1);
        let first_only = (0.8f64 - 0.5).powi(2);
        // The step-2 record has V_3 ≡ 0, so it contributes nothing.
        assert!((vtr_loss(&p, &data).unwrap() - first_only).abs() < 1e-12);
        assert!((first_only - 0.09).abs() < 1e-12);
    }

    #[test]
    fn truth_has_zero_loss_on_deterministic_data() {
        let truth = TransitionKernel::deterministic(2, 1, &[1, 0]).unwrap();
        let r = RewardTable::new(2, 1, vec![0.0, 1.0]).unwrap();
        let tables = value_iteration(&truth, &r, 3).unwrap();
        let mut data = VtrDataset::new(2, 1, 3);
        data.push_episode(&tables, &[(0, 0, 1), (1, 0, 0), (0, 0, 1)]).unwrap();
        assert_eq!(vtr_loss(&truth, &data).unwrap(), 0.0);
        assert_eq!(mdp_test_statistic(&[truth], &data).unwrap(), 0.0);
    }

    #[test]
    fn fit_prefers_kernel_matching_targets() {
        let tables = one_step_tables([0.0, 1.0]);
        let mut data = VtrDataset::new(2, 1, 2);
        data.push_episode(&tables, &[(0, 0, 1), (1, 0, 1)]).unwrap();
        data.push_episode(&tables, &[(0, 0, 1), (1, 0, 0)]).unwrap();
        let stay = TransitionKernel::deterministic(2, 1, &[0, 1]).unwrap();
        let jump = TransitionKernel::deterministic(2, 1, &[1, 1]).unwrap();
        // Targets at step 1 are both 1: `stay` predicts 0 (loss 2), `jump` 1 (loss 0).
        let fit = vtr_fit(&[stay.clone(), jump.clone()], &data).unwrap();
        assert_eq!(fit, Fit { index: 1, loss: 0.0 });
        assert_eq!(literal_loss(&stay, &data), 2.0);
        assert_eq!(vtr_loss(&stay, &data).unwrap(), 2.0);
    }

    #[test]
    fn confidence_set_hand_discrepancy() {
        // One informative record with V_2 = (0, 1); rows differ by 0.2 in
        // mass on state 1, so the discrepancy is 0.04.
        let tables = one_step_tables([0.0, 1.0]);
        let mut data = VtrDataset::new(2, 1, 2);
        data.push_episode(&tables, &[(0, 0, 1), (1, 0, 1)]).unwrap();
        let a = TransitionKernel::from_rows(vec![vec![vec![0.3, 0.7]], vec![vec![0.0, 1.0]]]).unwrap();
        let b = TransitionKernel::from_rows(vec![vec![vec![0.5, 0.5]], vec![vec![0.0, 1.0]]]).unwrap();
        let class = vec![a, b];
        assert!((vtr_discrepancy(&class[0], &class[1], &data).unwrap() - 0.04).abs() < 1e-12);
        let fit = vtr_fit(&class, &data).unwrap();
        assert_eq!(fit.index, 0);
        assert_eq!(mdp_confidence_set(&class, 0, &data, 0.01).unwrap(), vec![0]);
        assert_eq!(mdp_confidence_set(&class, 0, &data, 1e6).unwrap(), vec![0, 1]);
    }

    #[test]
    fn single_kernel_statistic_is_average_residual() {
        // H = 2, one episode: step-1 residual (1 − 0.5)², step-2 residual 0.
        let tables = one_step_tables([0.0, 1.0]);
        let mut data = VtrDataset::new(2, 1, 2);
        data.push_episode(&tables, &[(0, 0, 1), (1, 0, 1)]).unwrap();
        let stat = mdp_test_statistic(&[uniform_kernel(2, 1)], &data).unwrap();
        assert!((stat - 0.25 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn beta_values() {
        assert_eq!(beta_mdp(0.0, 1, 3, 1.0, BetaForm::Finite).unwrap(), 0.0);
        let b = beta_mdp(4f64.ln(), 1, 2, 0.5, BetaForm::Finite).unwrap();
        assert!((b - 32.0 * 8f64.ln()).abs() < 1e-12);
        assert!((b - 66.54).abs() < 0.01);
        let cov = beta_mdp(4f64.ln(), 1, 2, 0.5, BetaForm::Covering).unwrap();
        assert!(cov > b);
        assert!(beta_mdp(1.0, 1, 2, 0.0, BetaForm::Finite).is_err());
        assert!(beta_mdp(1.0, 1, 2, 1.5, BetaForm::Covering).is_err());
    }

    #[test]
    fn malformed_episode_is_rejected() {
        let tables = one_step_tables([0.0, 1.0]);
        let mut data = VtrDataset::new(2, 1, 2);
        assert!(data.push_episode(&tables, &[(0, 0, 1)]).is_err());
        assert!(data.push_episode(&tables, &[(0, 0, 1), (1, 3, 1)]).is_err());
        assert!(data.is_empty());
    }

    #[test]
    fn sufficient_statistics_match_literal_sum() {
        let k = TransitionKernel::from_rows(vec![
            vec![vec![0.1, 0.6, 0.3], vec![0.5, 0.25, 0.25]],
            vec![vec![0.0, 0.2, 0.8], vec![1.0, 0.0, 0.0]],
            vec![vec![0.3, 0.3, 0.4], vec![0.05, 0.9, 0.05]],
        ])
        .unwrap();
        let r = RewardTable::new(3, 2, vec![0.1, 0.9, 0.4, 0.2, 0.7, 0.3]).unwrap();
        let tables = value_iteration(&k, &r, 3).unwrap();
        let mut data = VtrDataset::new(3, 2, 3);
        data.push_episode(&tables, &[(0, 1, 2), (2, 0, 1), (1, 1, 0)]).unwrap();
        data.push_episode(&tables, &[(0, 0, 0), (0, 1, 1), (1, 0, 2)]).unwrap();
        let u = uniform_kernel(3, 2);
        for p in [&k, &u] {
            assert!((vtr_loss(p, &data).unwrap() - literal_loss(p, &data)).abs() < 1e-12);
        }
    }
}
