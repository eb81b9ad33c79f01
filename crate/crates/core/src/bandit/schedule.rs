use serde::{Deserialize, Serialize};

use crate::error::{check_confidence, Error, Result};

/// One epoch of the doubling schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Epoch {
    /// 1-based epoch index `i`.
    pub index: usize,
    /// Rounds (or episodes) before this epoch, `τ_{i−1}`.
    pub start: usize,
    /// `t_i = 2^i`, truncated so the schedule ends at the horizon.
    pub length: usize,
}

impl Epoch {
    /// `δ_i = δ / 2^i`.
    pub fn confidence(&self, delta: f64) -> f64 {
        delta / 2f64.powi(self.index as i32)
    }
}

/// Doubling epochs `t_i = 2^i` covering `1..=horizon`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpochSchedule {
    horizon: usize,
    epochs: Vec<Epoch>,
}

impl EpochSchedule {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        let mut epochs = Vec::new();
        let mut start = 0;
        let mut index = 1;
        while start < horizon {
            let length = (1usize << index).min(horizon - start);
            epochs.push(Epoch { index, start, length });
            start += length;
            index += 1;
        }
        Ok(Self { horizon, epochs })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn epochs(&self) -> &[Epoch] {
        &self.epochs
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

/// `γ = T_M + slack`; returns the smallest 1-based `m` with `T_m ≤ γ`, and `γ`.
pub fn select_model(stats: &[f64], slack: f64) -> Result<(usize, f64)> {
    let last = *stats
        .last()
        .ok_or_else(|| Error::config("model selection needs at least one class"))?;
    if !(slack >= 0.0) {
        return Err(Error::config(format!("slack {slack} must be nonnegative")));
    }
    let gamma = last + slack;
    let m = stats.iter().position(|&t| t <= gamma).unwrap_or(stats.len() - 1);
    Ok((m + 1, gamma))
}

/// Statistics and the class chosen at one epoch boundary. The first epoch has
/// no past data, so `statistics` is empty and `threshold` is `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub start: usize,
    pub length: usize,
    pub confidence: f64,
    pub selected: usize,
    pub statistics: Vec<f64>,
    pub threshold: Option<f64>,
}

pub(crate) fn check_run(horizon: usize, delta: f64, slack: f64) -> Result<()> {
    check_confidence(delta)?;
    if horizon < 2 {
        return Err(Error::config("adaptive runs need a horizon of at least 2"));
    }
    if !(slack >= 0.0) {
        return Err(Error::config(format!("slack {slack} must be nonnegative")));
    }
    Ok(())
}
