//! Finite hypothesis classes and nested families.
//!
//! A hypothesis is either a reward function over a finite action set
//! ([`HypothesisFunction`]) or a tabular transition model
//! ([`TransitionKernel`]). Both are stored extensionally, so a finite class is
//! its own zero-radius cover and its metric entropy is `ln |class|`.
//!
//! Class indices are 1-based throughout the crate: `m` ranges over `1..=M`
//! and `family.class(m)` is the m-th smallest class.

mod eluder;
mod separability;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eluder::{
    eluder_dimension, eluder_dimension_with_cap, induced_value_class, EluderReport, FunctionTable,
    DEFAULT_EXHAUSTIVE_CAP,
};
pub use separability::{
    verify_separability_bandit, verify_separability_mdp, SeparabilityReport, Violation,
};

/// Tolerance for extensional equality of hypotheses and for the boundary
/// comparisons in the separability checks.
pub const TOLERANCE: f64 = 1e-12;

/// Row sums of a transition kernel must be within this of 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Extensional equality up to [`TOLERANCE`].
pub trait Hypothesis {
    fn approx_eq(&self, other: &Self) -> bool;
}

/// A reward function over a finite action set, with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct HypothesisFunction {
    values: Vec<f64>,
}

impl HypothesisFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("hypothesis function over an empty action set"));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::config(format!(
                "hypothesis value {v} outside [0, 1]"
            )));
        }
        Ok(Self { values })
    }

    pub fn constant(n_actions: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n_actions])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_actions(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn value(&self, action: usize) -> f64 {
        self.values[action]
    }

    /// Lowest-index maximiser.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (x, &v) in self.values.iter().enumerate().skip(1) {
            if v > self.values[best] {
                best = x;
            }
        }
        best
    }

    pub fn max_value(&self) -> f64 {
        self.values[self.argmax()]
    }
}

impl TryFrom<Vec<f64>> for HypothesisFunction {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<HypothesisFunction> for Vec<f64> {
    fn from(f: HypothesisFunction) -> Self {
        f.values
    }
}

impl Hypothesis for HypothesisFunction {
    fn approx_eq(&self, other: &Self) -> bool {
        self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| (a - b).abs() <= TOLERANCE)
    }
}

/// A tabular transition model `P(s' | s, a)`.
///
/// Stored flat in `[state][action][next_state]` order; serialised as the
/// nested `[state][action] -> distribution` form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Vec<f64>>>", into = "Vec<Vec<Vec<f64>>>")]
pub struct TransitionKernel {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TransitionKernel {
    pub fn from_flat(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::config("transition kernel needs at least one state and action"));
        }
        let expected = n_states * n_actions * n_states;
        if probs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: probs.len(),
            });
        }
        for (i, row) in probs.chunks(n_states).enumerate() {
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(Error::config(format!(
                    "negative or non-finite probability in row (s={}, a={})",
                    i / n_actions,
                    i % n_actions
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::config(format!(
                    "row (s={}, a={}) sums to {sum}",
                    i / n_actions,
                    i % n_actions
                )));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn from_rows(rows: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, Vec::len);
        let mut probs = Vec::with_capacity(n_states * n_actions * n_states);
        for per_state in &rows {
            if per_state.len() != n_actions {
                return Err(Error::DimensionMismatch {
                    expected: n_actions,
                    got: per_state.len(),
                });
            }
            for row in per_state {
                if row.len() != n_states {
                    return Err(Error::DimensionMismatch {
                        expected: n_states,
                        got: row.len(),
                    });
                }
                probs.extend_from_slice(row);
            }
        }
        Self::from_flat(n_states, n_actions, probs)
    }

    /// Deterministic kernel: `next[s * n_actions + a]` is the successor of `(s, a)`.
    pub fn deterministic(n_states: usize, n_actions: usize, next: &[usize]) -> Result<Self> {
        if next.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch {
                expected: n_states * n_actions,
                got: next.len(),
            });
        }
        let mut probs = vec![0.0; n_states * n_actions * n_states];
        for (i, &s_next) in next.iter().enumerate() {
            if s_next >= n_states {
                return Err(Error::IndexOutOfRange {
                    what: "next state",
                    index: s_next,
                    len: n_states,
                });
            }
            probs[i * n_states + s_next] = 1.0;
        }
        Self::from_flat(n_states, n_actions, probs)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.n_actions + action) * self.n_states;
        &self.probs[start..start + self.n_states]
    }

    /// Rows in `(state, action)` order.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.n_states)
    }
}

impl TryFrom<Vec<Vec<Vec<f64>>>> for TransitionKernel {
    type Error = Error;

    fn try_from(rows: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<TransitionKernel> for Vec<Vec<Vec<f64>>> {
    fn from(k: TransitionKernel) -> Self {
        let n_states = k.n_states;
        k.probs
            .chunks(n_states * k.n_actions)
            .map(|per_state| per_state.chunks(n_states).map(<[f64]>::to_vec).collect())
            .collect()
    }
}

impl Hypothesis for TransitionKernel {
    fn approx_eq(&self, other: &Self) -> bool {
        self.n_states == other.n_states
            && self.n_actions == other.n_actions
            && self
                .probs
                .iter()
                .zip(&other.probs)
                .all(|(a, b)| (a - b).abs() <= TOLERANCE)
    }
}

/// Ordered classes `F_1 ⊆ F_2 ⊆ … ⊆ F_M` with the index `m*` of the smallest
/// class containing the true model, plus the separation `Δ` and locality `η`
/// the family is claimed to satisfy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedFamily<H> {
    classes: Vec<Vec<H>>,
    true_index: usize,
    separation: f64,
    locality: f64,
}

impl<H> NestedFamily<H> {
    pub fn new(classes: Vec<Vec<H>>, true_index: usize, separation: f64, locality: f64) -> Result<Self> {
        let family = Self {
            classes,
            true_index,
            separation,
            locality,
        };
        family.validate()?;
        Ok(family)
    }

    /// Structural checks only; nesting and separability are verified separately.
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::config("nested family has no classes"));
        }
        if let Some(m) = self.classes.iter().position(Vec::is_empty) {
            return Err(Error::config(format!("class {} is empty", m + 1)));
        }
        if self.true_index == 0 || self.true_index > self.classes.len() {
            return Err(Error::config(format!(
                "true class index {} outside 1..={}",
                self.true_index,
                self.classes.len()
            )));
        }
        if !(self.separation > 0.0) || !(self.locality > 0.0) {
            return Err(Error::config("separation and locality must be positive"));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// The m-th class, `1 <= m <= M`.
    pub fn class(&self, m: usize) -> &[H] {
        &self.classes[m - 1]
    }

    pub fn classes(&self) -> &[Vec<H>] {
        &self.classes
    }

    pub fn largest(&self) -> &[H] {
        self.classes.last().expect("validated family is nonempty")
    }

    pub fn true_index(&self) -> usize {
        self.true_index
    }

    pub fn true_class(&self) -> &[H] {
        self.class(self.true_index)
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    pub fn locality(&self) -> f64 {
        self.locality
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        self.classes.iter().map(Vec::len).collect()
    }

    /// Classes strictly below `m*`, flattened. Only the largest of them matters
    /// for a nested family, but checking all of them also covers non-nested input.
    pub(crate) fn misspecified(&self) -> impl Iterator<Item = &H> {
        self.classes[..self.true_index - 1].iter().flatten()
    }
}

impl<H: Hypothesis> NestedFamily<H> {
    /// Position of `h` within class `m`, if present.
    pub fn position_in(&self, m: usize, h: &H) -> Option<usize> {
        self.class(m).iter().position(|g| g.approx_eq(h))
    }
}

fn contains<H: Hypothesis>(class: &[H], h: &H) -> bool {
    class.iter().any(|g| g.approx_eq(h))
}

/// True iff every class is contained in its successor and `m*` is the first
/// class containing `truth`.
pub fn verify_nesting<H: Hypothesis>(family: &NestedFamily<H>, truth: &H) -> Result<bool> {
    family.validate()?;
    let nested = family
        .classes
        .windows(2)
        .all(|pair| pair[0].iter().all(|h| contains(&pair[1], h)));
    let first = family.classes.iter().position(|c| contains(c, truth));
    Ok(nested && first == Some(family.true_index - 1))
}

/// Metric entropy of a finite class: `ln |class|`, or the caller's covering
/// number estimate when one is supplied.
pub fn metric_entropy(cardinality: usize, user_override: Option<f64>) -> Result<f64> {
    if cardinality == 0 {
        return Err(Error::config("metric entropy of an empty class"));
    }
    Ok(user_override.unwrap_or_else(|| (cardinality as f64).ln()))
}

/// Drop later duplicates (up to [`TOLERANCE`]), keeping first occurrences in order.
pub fn dedup<H: Hypothesis + Clone>(items: &[H]) -> Vec<H> {
    let mut out: Vec<H> = Vec::with_capacity(items.len());
    for h in items {
        if !contains(&out, h) {
            out.push(h.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(values: &[f64]) -> HypothesisFunction {
        HypothesisFunction::new(values.to_vec()).unwrap()
    }

    #[test]
    fn rejects_values_outside_unit_interval() {
        assert!(HypothesisFunction::new(vec![0.2, 1.2]).is_err());
        assert!(HypothesisFunction::new(vec![-0.1]).is_err());
        assert!(HypothesisFunction::new(vec![]).is_err());
    }

    #[test]
    fn kernel_rows_must_be_distributions() {
        assert!(TransitionKernel::from_rows(vec![vec![vec![0.5, 0.4]], vec![vec![0.0, 1.0]]]).is_err());
        assert!(TransitionKernel::from_rows(vec![vec![vec![1.5, -0.5]], vec![vec![0.0, 1.0]]]).is_err());
        let k = TransitionKernel::from_rows(vec![vec![vec![0.5, 0.5]], vec![vec![0.0, 1.0]]]).unwrap();
        assert_eq!(k.row(1, 0), &[0.0, 1.0]);
    }

    #[test]
    fn kernel_serde_uses_nested_rows() {
        let k = TransitionKernel::deterministic(2, 2, &[1, 0, 0, 1]).unwrap();
        let json = serde_json::to_string(&k).unwrap();
        assert_eq!(json, "[[[0.0,1.0],[1.0,0.0]],[[1.0,0.0],[0.0,1.0]]]");
        let back: TransitionKernel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, k);
    }

    #[test]
    fn nesting_literal_subset() {
        let fa = f(&[0.1, 0.2]);
        let fb = f(&[0.3, 0.4]);
        let family = NestedFamily::new(vec![vec![fa.clone()], vec![fa.clone(), fb.clone()]], 1, 0.1, 0.1).unwrap();
        assert!(verify_nesting(&family, &fa).unwrap());
    }

    #[test]
    fn nesting_violated() {
        let fa = f(&[0.1, 0.2]);
        let fb = f(&[0.3, 0.4]);
        let family = NestedFamily::new(vec![vec![fa.clone()], vec![fb]], 1, 0.1, 0.1).unwrap();
        assert!(!verify_nesting(&family, &fa).unwrap());
    }

    #[test]
    fn nesting_rejects_truth_in_earlier_class() {
        let fa = f(&[0.1, 0.2]);
        let fb = f(&[0.3, 0.4]);
        let family = NestedFamily::new(vec![vec![fa.clone()], vec![fa.clone(), fb]], 2, 0.1, 0.1).unwrap();
        assert!(!verify_nesting(&family, &fa).unwrap());
    }

    #[test]
    fn empty_family_is_a_config_error() {
        let err = NestedFamily::<HypothesisFunction>::new(vec![], 1, 0.1, 0.1).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn metric_entropy_values() {
        assert_eq!(metric_entropy(1, None).unwrap(), 0.0);
        assert!((metric_entropy(8, None).unwrap() - 2.0794).abs() < 1e-4);
        assert_eq!(metric_entropy(8, Some(3.5)).unwrap(), 3.5);
        assert!(metric_entropy(0, None).is_err());
    }

    #[test]
    fn dedup_uses_tolerance() {
        let a = f(&[0.5, 0.5]);
        let b = f(&[0.5 + 1e-14, 0.5]);
        let c = f(&[0.6, 0.5]);
        assert_eq!(dedup(&[a, b, c]).len(), 2);
    }
}
