//! Eluder dimension of a finite function class over a finite domain.
//!
//! A point `x` is ε'-independent of a set `S` when some pair `f1, f2` in the
//! class has `sqrt(Σ_{z∈S} (f1 - f2)²(z)) <= ε'` and `(f1 - f2)(x) > ε'`. The
//! ε-eluder dimension is the length of the longest sequence in which every
//! point (the first included) is ε'-independent of its predecessors, for one
//! common `ε' >= ε`.
//!
//! Whether `x` is independent of `S` depends only on the set `S`, so a point can
//! never repeat and the exact search is a dynamic program over subsets. For
//! every subset we keep the set of scales `ε'` at which *some* ordering of it
//! is valid; that set is a finite union of half-open intervals
//! `[norm, |diff|)`, one per pair.

use serde::{Deserialize, Serialize};

use super::{TransitionKernel, TOLERANCE};
use crate::error::{Error, Result};
use crate::mdp::apply_kernel;

pub const DEFAULT_EXHAUSTIVE_CAP: usize = 12;

/// A finite function class as a table: one row per function, one column per
/// domain point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionTable {
    rows: Vec<Vec<f64>>,
    n_points: usize,
}

impl FunctionTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_points = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || n_points == 0 {
            return Err(Error::config("function table needs at least one function and one point"));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n_points) {
            return Err(Error::DimensionMismatch {
                expected: n_points,
                got: r.len(),
            });
        }
        Ok(Self { rows, n_points })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_functions(&self) -> usize {
        self.rows.len()
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Remove rows equal (within tolerance) to an earlier row.
    pub fn deduplicated(&self) -> Self {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            let dup = rows
                .iter()
                .any(|q| q.iter().zip(r).all(|(a, b)| (a - b).abs() <= TOLERANCE));
            if !dup {
                rows.push(r.clone());
            }
        }
        Self {
            rows,
            n_points: self.n_points,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EluderReport {
    pub epsilon: f64,
    pub dimension: usize,
    /// Domain point indices, in sequence order.
    pub witness: Vec<usize>,
    /// The common scale `ε' >= ε` at which the witness is valid.
    pub witness_scale: f64,
    /// False when the greedy heuristic was used.
    pub exact: bool,
}

/// Sorted, disjoint, half-open intervals.
#[derive(Clone, Debug, Default, PartialEq)]
struct Scales(Vec<(f64, f64)>);

impl Scales {
    fn from_lower(lo: f64) -> Self {
        Scales(vec![(lo, f64::INFINITY)])
    }

    fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn contains(&self, x: f64) -> bool {
        self.0.iter().any(|&(lo, hi)| lo <= x && x < hi)
    }

    fn measure(&self, cap: f64) -> f64 {
        self.0.iter().map(|&(lo, hi)| hi.min(cap) - lo.min(cap)).sum()
    }

    fn normalize(mut raw: Vec<(f64, f64)>) -> Self {
        raw.retain(|&(lo, hi)| lo < hi);
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (lo, hi) in raw {
            match out.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        Scales(out)
    }

    fn intersect(&self, other: &Scales) -> Scales {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.0.len() && j < other.0.len() {
            let (a_lo, a_hi) = self.0[i];
            let (b_lo, b_hi) = other.0[j];
            let lo = a_lo.max(b_lo);
            let hi = a_hi.min(b_hi);
            if lo < hi {
                out.push((lo, hi));
            }
            if a_hi < b_hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        Scales(out)
    }

    fn union_with(&mut self, other: Scales) {
        let mut raw = std::mem::take(&mut self.0);
        raw.extend(other.0);
        *self = Scales::normalize(raw);
    }
}

/// Pairwise differences of the class, one entry per unordered pair of
/// distinct rows. Both orders are covered by taking absolute values.
struct PairDiffs {
    abs_diff: Vec<Vec<f64>>,
    n_points: usize,
}

impl PairDiffs {
    fn new(table: &FunctionTable) -> Self {
        let rows = table.rows();
        let mut abs_diff = Vec::new();
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                let d: Vec<f64> = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b).abs()).collect();
                if d.iter().any(|&v| v > 0.0) {
                    abs_diff.push(d);
                }
            }
        }
        Self {
            abs_diff,
            n_points: table.n_points(),
        }
    }

    fn max_diff(&self) -> f64 {
        self.abs_diff
            .iter()
            .flatten()
            .fold(0.0_f64, |m, &v| m.max(v))
    }

    /// Scales at which `point` is independent of the set whose squared-norm
    /// per pair is `sq_norms`.
    fn independence(&self, point: usize, sq_norms: &[f64]) -> Scales {
        let raw = self
            .abs_diff
            .iter()
            .zip(sq_norms)
            .map(|(d, &sq)| (sq.sqrt(), d[point]))
            .collect();
        Scales::normalize(raw)
    }

    /// Squared norms of every pair over the points of `mask`, summed in
    /// ascending point order.
    fn sq_norms(&self, mask: u64) -> Vec<f64> {
        self.abs_diff
            .iter()
            .map(|d| {
                (0..self.n_points)
                    .filter(|&z| mask >> z & 1 == 1)
                    .map(|z| d[z] * d[z])
                    .sum()
            })
            .collect()
    }
}

pub fn eluder_dimension(table: &FunctionTable, epsilon: f64) -> Result<EluderReport> {
    eluder_dimension_with_cap(table, epsilon, DEFAULT_EXHAUSTIVE_CAP)
}

/// Exact subset search when the domain has at most `exhaustive_cap` points
/// (capped at 20), greedy otherwise.
pub fn eluder_dimension_with_cap(
    table: &FunctionTable,
    epsilon: f64,
    exhaustive_cap: usize,
) -> Result<EluderReport> {
    if !(epsilon > 0.0) {
        return Err(Error::config(format!("eluder scale must be positive, got {epsilon}")));
    }
    let pairs = PairDiffs::new(table);
    if table.n_points() <= exhaustive_cap.min(20) {
        Ok(exact(&pairs, epsilon))
    } else {
        Ok(greedy(&pairs, epsilon))
    }
}

fn exact(pairs: &PairDiffs, epsilon: f64) -> EluderReport {
    let n = pairs.n_points;
    let full = 1usize << n;
    let mut feasible: Vec<Scales> = vec![Scales::default(); full];
    feasible[0] = Scales::from_lower(epsilon);

    for mask in 0..full {
        if feasible[mask].is_empty() {
            continue;
        }
        let sq = pairs.sq_norms(mask as u64);
        for x in (0..n).filter(|&x| mask >> x & 1 == 0) {
            let ext = feasible[mask].intersect(&pairs.independence(x, &sq));
            if !ext.is_empty() {
                feasible[mask | 1 << x].union_with(ext);
            }
        }
    }

    let best = (0..full)
        .filter(|&m| !feasible[m].is_empty())
        .max_by(|&a, &b| a.count_ones().cmp(&b.count_ones()).then(b.cmp(&a)))
        .unwrap_or(0);
    let dimension = best.count_ones() as usize;
    let scale = feasible[best].0.first().map_or(epsilon, |iv| iv.0);

    // Walk back from the best subset, always removing the lowest-index point
    // that keeps the chosen scale feasible.
    let mut witness = Vec::with_capacity(dimension);
    let mut mask = best;
    while mask != 0 {
        let x = (0..n)
            .filter(|&x| mask >> x & 1 == 1)
            .find(|&x| {
                let rest = mask & !(1 << x);
                feasible[rest].contains(scale)
                    && pairs.independence(x, &pairs.sq_norms(rest as u64)).contains(scale)
            })
            .expect("feasible subset has a valid last point");
        witness.push(x);
        mask &= !(1 << x);
    }
    witness.reverse();

    EluderReport {
        epsilon,
        dimension,
        witness,
        witness_scale: scale,
        exact: true,
    }
}

fn greedy(pairs: &PairDiffs, epsilon: f64) -> EluderReport {
    let n = pairs.n_points;
    let cap = pairs.max_diff();
    let mut region = Scales::from_lower(epsilon);
    let mut sq = vec![0.0; pairs.abs_diff.len()];
    let mut used = vec![false; n];
    let mut witness = Vec::new();

    loop {
        let mut choice: Option<(usize, Scales, f64)> = None;
        for x in (0..n).filter(|&x| !used[x]) {
            let next = region.intersect(&pairs.independence(x, &sq));
            if next.is_empty() {
                continue;
            }
            let room = next.measure(cap);
            if choice.as_ref().map_or(true, |(_, _, best)| room > *best) {
                choice = Some((x, next, room));
            }
        }
        let Some((x, next, _)) = choice else { break };
        used[x] = true;
        witness.push(x);
        region = next;
        for (s, d) in sq.iter_mut().zip(&pairs.abs_diff) {
            *s += d[x] * d[x];
        }
    }

    EluderReport {
        epsilon,
        dimension: witness.len(),
        witness_scale: region.0.first().map_or(epsilon, |iv| iv.0),
        witness,
        exact: false,
    }
}

/// The class `{(s, a, V) -> (P V)(s, a) : P in kernels}` over the domain
/// `value_bank × S × A` (bank-major, then state, then action), with duplicate
/// functions removed.
pub fn induced_value_class(kernels: &[TransitionKernel], value_bank: &[Vec<f64>]) -> Result<FunctionTable> {
    if kernels.is_empty() || value_bank.is_empty() {
        return Err(Error::config("induced value class needs kernels and value vectors"));
    }
    let rows = kernels
        .iter()
        .map(|p| {
            let mut row = Vec::new();
            for v in value_bank {
                row.extend(apply_kernel(p, v)?);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FunctionTable::new(rows)?.deduplicated())
}
