use serde::{Deserialize, Serialize};

use crate::error::{check_confidence, Error, Result};
use crate::hypothesis::HypothesisFunction;

/// Running count, mean and centred sum of squares for one action.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct ActionStats {
    n: usize,
    mean: f64,
    m2: f64,
}

impl ActionStats {
    fn push(&mut self, y: f64) {
        self.n += 1;
        let d = y - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (y - self.mean);
    }

    /// `Σ (y − c)²` over this action's observations.
    fn squared_error(&self, c: f64) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let d = self.mean - c;
        self.m2 + self.n as f64 * d * d
    }
}

/// Append-only history of `(action, reward)` pairs.
#[derive(Clone, Debug)]
pub struct BanditDataset {
    records: Vec<(usize, f64)>,
    stats: Vec<ActionStats>,
}

impl BanditDataset {
    pub fn new(n_actions: usize) -> Self {
        Self {
            records: Vec::new(),
            stats: vec![ActionStats::default(); n_actions],
        }
    }

    pub fn push(&mut self, action: usize, reward: f64) -> Result<()> {
        let n_actions = self.stats.len();
        let st = self.stats.get_mut(action).ok_or(Error::IndexOutOfRange {
            what: "action",
            index: action,
            len: n_actions,
        })?;
        st.push(reward);
        self.records.push((action, reward));
        Ok(())
    }

    pub fn records(&self) -> &[(usize, f64)] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_actions(&self) -> usize {
        self.stats.len()
    }

    /// Plays of each action.
    pub fn counts(&self) -> Vec<usize> {
        self.stats.iter().map(|s| s.n).collect()
    }

    fn check(&self, f: &HypothesisFunction) -> Result<()> {
        if f.n_actions() != self.stats.len() {
            return Err(Error::DimensionMismatch {
                expected: self.stats.len(),
                got: f.n_actions(),
            });
        }
        Ok(())
    }

    /// `L(f) = Σ_s (y_s − f(x_s))²`.
    pub fn loss(&self, f: &HypothesisFunction) -> Result<f64> {
        self.check(f)?;
        Ok(self
            .stats
            .iter()
            .zip(f.values())
            .map(|(st, &v)| st.squared_error(v))
            .sum())
    }

    /// `Σ_s (f(x_s) − g(x_s))²`.
    pub fn discrepancy(&self, f: &HypothesisFunction, g: &HypothesisFunction) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        Ok(self
            .stats
            .iter()
            .zip(f.values().iter().zip(g.values()))
            .map(|(st, (a, b))| st.n as f64 * (a - b) * (a - b))
            .sum())
    }
}

/// Position of the empirical risk minimiser in `class` and its loss. Ties go
/// to the lowest index, so an empty dataset selects `class[0]`.
pub fn least_squares_fit(class: &[HypothesisFunction], data: &BanditDataset) -> Result<(usize, f64)> {
    if class.is_empty() {
        return Err(Error::config("cannot fit an empty function class"));
    }
    let mut best = (0, data.loss(&class[0])?);
    for (i, f) in class.iter().enumerate().skip(1) {
        let loss = data.loss(f)?;
        if loss < best.1 {
            best = (i, loss);
        }
    }
    Ok(best)
}

/// Confidence width at round `t >= 1` for noise scale `σ`:
/// `8σ²(ln 2 + entropy + ln(1/δ)) + 2(8 + √(8σ² ln(8t(t+1)/δ)))`.
pub fn beta_bandit(entropy: f64, t: usize, delta: f64, sigma: f64) -> Result<f64> {
    check_confidence(delta)?;
    if !(sigma >= 0.0) {
        return Err(Error::config(format!("noise scale {sigma} must be nonnegative")));
    }
    let t = t.max(1) as f64;
    let s2 = sigma * sigma;
    let head = 8.0 * s2 * (std::f64::consts::LN_2 + entropy + (1.0 / delta).ln());
    let tail = (8.0 * s2 * (8.0 * t * (t + 1.0) / delta).ln()).sqrt();
    Ok(head + 2.0 * (8.0 + tail))
}

/// `C_t`: the least-squares estimate and every class member within `width`
/// of it in empirical squared distance. Indices refer to the class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceState {
    pub estimate: usize,
    pub width: f64,
    pub members: Vec<usize>,
}

pub fn build_confidence_set(
    class: &[HypothesisFunction],
    data: &BanditDataset,
    beta: f64,
) -> Result<ConfidenceState> {
    let (estimate, _) = least_squares_fit(class, data)?;
    confidence_around(class, data, estimate, beta)
}

pub(crate) fn confidence_around(
    class: &[HypothesisFunction],
    data: &BanditDataset,
    estimate: usize,
    beta: f64,
) -> Result<ConfidenceState> {
    let center = &class[estimate];
    let mut members = Vec::new();
    for (i, f) in class.iter().enumerate() {
        if i == estimate || data.discrepancy(f, center)? <= beta {
            members.push(i);
        }
    }
    Ok(ConfidenceState {
        estimate,
        width: beta,
        members,
    })
}

/// `argmax_x max_{f ∈ C} f(x)` with the optimistic value. Ties go to the
/// lowest action, then the lowest member.
pub fn optimistic_action(conf: &ConfidenceState, class: &[HypothesisFunction]) -> Result<(usize, f64)> {
    let first = conf
        .members
        .first()
        .and_then(|&i| class.get(i))
        .ok_or_else(|| Error::config("confidence set is empty"))?;
    let mut best = (0, f64::NEG_INFINITY);
    for x in 0..first.n_actions() {
        let ucb = conf
            .members
            .iter()
            .map(|&i| class[i].value(x))
            .fold(f64::NEG_INFINITY, f64::max);
        if ucb > best.1 {
            best = (x, ucb);
        }
    }
    Ok(best)
}

/// `min_f L(f) / τ` over all `τ` records.
pub fn bandit_test_statistic(class: &[HypothesisFunction], data: &BanditDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::UndefinedStatistic);
    }
    let (_, loss) = least_squares_fit(class, data)?;
    Ok(loss / data.len() as f64)
}
