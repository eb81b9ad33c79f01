//! Exhaustive local-separability checks.
//!
//! For every hypothesis below the true class and every ordered pair of
//! distinct domain points whose true values are within `η` of each other, the
//! hypothesis' value at the first point must sit at least `Δ` away from the
//! true value at the second.

use serde::{Deserialize, Serialize};

use super::{HypothesisFunction, NestedFamily, TransitionKernel, TOLERANCE};
use crate::error::{Error, Result};
use crate::mdp::apply_kernel;

/// Violations beyond this many are counted but not stored.
const MAX_RECORDED_VIOLATIONS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Index into the flattened misspecified hypotheses (classes `1..m*`).
    pub hypothesis: usize,
    /// Domain points: actions for bandits, `s * n_actions + a` for MDPs.
    pub first: usize,
    pub second: usize,
    /// Index into the value bank (MDP check only).
    pub value: Option<usize>,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityReport {
    pub holds: bool,
    /// Infimum of the gap over all checked pairs; `+inf` when no pair qualifies.
    #[serde(with = "crate::harness::serde_inf")]
    pub achieved_gap: f64,
    pub violation_count: usize,
    pub violations: Vec<Violation>,
}

impl SeparabilityReport {
    fn vacuous() -> Self {
        Self {
            holds: true,
            achieved_gap: f64::INFINITY,
            violation_count: 0,
            violations: Vec::new(),
        }
    }
}

struct Scan {
    separation: f64,
    locality: f64,
    report: SeparabilityReport,
}

impl Scan {
    fn new(separation: f64, locality: f64) -> Self {
        Self {
            separation,
            locality,
            report: SeparabilityReport::vacuous(),
        }
    }

    /// `truth[x]` and `candidate[x]` are the true and hypothesised values at point x.
    fn check(&mut self, hypothesis: usize, value: Option<usize>, truth: &[f64], candidate: &[f64]) {
        for x1 in 0..truth.len() {
            for x2 in 0..truth.len() {
                if x1 == x2 || (truth[x1] - truth[x2]).abs() > self.locality + TOLERANCE {
                    continue;
                }
                let gap = (candidate[x1] - truth[x2]).abs();
                self.report.achieved_gap = self.report.achieved_gap.min(gap);
                if gap < self.separation - TOLERANCE {
                    self.report.violation_count += 1;
                    if self.report.violations.len() < MAX_RECORDED_VIOLATIONS {
                        self.report.violations.push(Violation {
                            hypothesis,
                            first: x1,
                            second: x2,
                            value,
                            gap,
                        });
                    }
                }
            }
        }
    }

    fn finish(mut self) -> SeparabilityReport {
        self.report.holds = self.report.violation_count == 0;
        self.report
    }
}

pub fn verify_separability_bandit(
    family: &NestedFamily<HypothesisFunction>,
    truth: &HypothesisFunction,
) -> Result<SeparabilityReport> {
    family.validate()?;
    let n = truth.n_actions();
    if let Some(bad) = family.classes().iter().flatten().find(|f| f.n_actions() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bad.n_actions(),
        });
    }
    let mut scan = Scan::new(family.separation(), family.locality());
    for (i, f) in family.misspecified().enumerate() {
        scan.check(i, None, truth.values(), f.values());
    }
    Ok(scan.finish())
}

/// Necessary-condition check over a finite bank of state-value vectors.
pub fn verify_separability_mdp(
    family: &NestedFamily<TransitionKernel>,
    truth: &TransitionKernel,
    value_bank: &[Vec<f64>],
) -> Result<SeparabilityReport> {
    family.validate()?;
    if value_bank.is_empty() {
        return Err(Error::config("separability check needs a nonempty value bank"));
    }
    if family.true_index() == 1 {
        return Ok(SeparabilityReport::vacuous());
    }
    let mut scan = Scan::new(family.separation(), family.locality());
    for (vi, v) in value_bank.iter().enumerate() {
        let true_backup = apply_kernel(truth, v)?;
        for (i, p) in family.misspecified().enumerate() {
            let backup = apply_kernel(p, v)?;
            scan.check(i, Some(vi), &true_backup, &backup);
        }
    }
    Ok(scan.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(values: &[f64]) -> HypothesisFunction {
        HypothesisFunction::new(values.to_vec()).unwrap()
    }

    fn bandit_family(misspecified: HypothesisFunction, truth: &HypothesisFunction, eta: f64, delta: f64) -> NestedFamily<HypothesisFunction> {
        NestedFamily::new(
            vec![vec![misspecified.clone()], vec![misspecified, truth.clone()]],
            2,
            delta,
            eta,
        )
        .unwrap()
    }

    #[test]
    fn constant_gap_holds_at_exactly_delta() {
        let truth = f(&[0.5, 0.5]);
        let family = bandit_family(f(&[0.9, 0.9]), &truth, 0.1, 0.4);
        let report = verify_separability_bandit(&family, &truth).unwrap();
        assert!(report.holds);
        assert!((report.achieved_gap - 0.4).abs() < 1e-12);
    }

    #[test]
    fn matching_value_is_a_violation() {
        let truth = f(&[0.5, 0.5]);
        let family = bandit_family(f(&[0.5, 0.9]), &truth, 0.1, 0.4);
        let report = verify_separability_bandit(&family, &truth).unwrap();
        assert!(!report.holds);
        assert_eq!(report.achieved_gap, 0.0);
        assert!(report
            .violations
            .iter()
            .any(|v| v.hypothesis == 0 && v.first == 0 && v.second == 1));
    }

    #[test]
    fn no_close_pair_is_vacuous() {
        let truth = f(&[0.1, 0.9]);
        let family = bandit_family(f(&[0.1, 0.9 - 0.5]), &truth, 0.1, 0.4);
        let report = verify_separability_bandit(&family, &truth).unwrap();
        assert!(report.holds);
        assert_eq!(report.achieved_gap, f64::INFINITY);
    }

    #[test]
    fn first_class_truth_is_vacuous() {
        let truth = f(&[0.5, 0.5]);
        let family = NestedFamily::new(vec![vec![truth.clone()]], 1, 0.4, 0.1).unwrap();
        let report = verify_separability_bandit(&family, &truth).unwrap();
        assert!(report.holds);
        assert!(report.achieved_gap.is_infinite());
    }

    fn two_state_family(truth: &TransitionKernel, wrong: &TransitionKernel) -> NestedFamily<TransitionKernel> {
        NestedFamily::new(
            vec![vec![wrong.clone()], vec![wrong.clone(), truth.clone()]],
            2,
            0.5,
            0.05,
        )
        .unwrap()
    }

    #[test]
    fn constant_value_vector_always_violates() {
        let truth = TransitionKernel::deterministic(2, 1, &[0, 1]).unwrap();
        let wrong = TransitionKernel::deterministic(2, 1, &[1, 0]).unwrap();
        let family = two_state_family(&truth, &wrong);
        let report = verify_separability_mdp(&family, &truth, &[vec![0.7, 0.7]]).unwrap();
        assert!(!report.holds);
        assert_eq!(report.achieved_gap, 0.0);
    }

    #[test]
    fn indicator_value_on_flipped_deterministic_kernel() {
        // Both (s, a) pairs land on state 1 under the truth; the wrong kernel
        // sends both to state 0. With V = e_1 the true backups are (1, 1) and
        // the wrong backups (0, 0), so every close pair has gap exactly 1.
        let truth = TransitionKernel::deterministic(2, 1, &[1, 1]).unwrap();
        let wrong = TransitionKernel::deterministic(2, 1, &[0, 0]).unwrap();
        let family = two_state_family(&truth, &wrong);
        let report = verify_separability_mdp(&family, &truth, &[vec![0.0, 1.0]]).unwrap();
        assert!(report.holds);
        assert_eq!(report.achieved_gap, 1.0);

        // Sending only one pair the wrong way leaves a zero gap on the other.
        let half = TransitionKernel::deterministic(2, 1, &[0, 1]).unwrap();
        let family = two_state_family(&truth, &half);
        let report = verify_separability_mdp(&family, &truth, &[vec![0.0, 1.0]]).unwrap();
        assert!(!report.holds);
        assert_eq!(report.violation_count, 1);
        assert_eq!((report.violations[0].first, report.violations[0].second), (1, 0));
    }

    #[test]
    fn empty_bank_is_config_error() {
        let truth = TransitionKernel::deterministic(2, 1, &[1, 1]).unwrap();
        let family = two_state_family(&truth, &truth);
        assert!(verify_separability_mdp(&family, &truth, &[]).unwrap_err().is_config());
    }
}
