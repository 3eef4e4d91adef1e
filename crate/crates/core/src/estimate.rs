//! Visit counts and the empirical transition estimator.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::matrix::Matrix;
use crate::model::{CmcModel, StateControl};
use crate::simulate::Trajectory;

/// `N_s^(l)` and `N_{s,t}^(l)`.
///
/// `visits[s * k + l]` counts `i ∈ 1..=m` with `(X_i, a_i) = (s, l)`.
/// `transitions[(s * k + l) * d + t]` counts `i ∈ 1..m` with
/// `(X_i, a_i, X_{i+1}) = (s, l, t)`, skipping moves into episodic restarts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub d: usize,
    pub k: usize,
    pub visits: Vec<u64>,
    pub transitions: Vec<u64>,
}

impl CountTable {
    pub fn zeros(d: usize, k: usize) -> Self {
        Self {
            d,
            k,
            visits: vec![0; d * k],
            transitions: vec![0; d * k * d],
        }
    }

    #[inline]
    pub fn visits(&self, s: usize, l: usize) -> u64 {
        self.visits[s * self.k + l]
    }

    #[inline]
    pub fn transition(&self, s: usize, l: usize, t: usize) -> u64 {
        self.transitions[(s * self.k + l) * self.d + t]
    }

    /// Visits to `(s, l)` with an observed model successor.
    pub fn successor_visits(&self, s: usize, l: usize) -> u64 {
        let base = (s * self.k + l) * self.d;
        self.transitions[base..base + self.d].iter().sum()
    }

    /// Adds another table of the same shape. Counting is a fold, so tables
    /// from disjoint chunks merge to the count of the whole path, as long as
    /// the transition straddling each chunk boundary is added by the caller.
    pub fn merge(&mut self, other: &CountTable) -> Result<()> {
        if (self.d, self.k) != (other.d, other.k) {
            return Err(mismatch!(
                "count tables for ({}, {}) and ({}, {})",
                self.d,
                self.k,
                other.d,
                other.k
            ));
        }
        for (a, b) in self.visits.iter_mut().zip(&other.visits) {
            *a += b;
        }
        for (a, b) in self.transitions.iter_mut().zip(&other.transitions) {
            *a += b;
        }
        Ok(())
    }

    /// Total visits; equals `m` for a path of length `m + 1`.
    pub fn total_visits(&self) -> u64 {
        self.visits.iter().sum()
    }
}

/// Streaming counter for paths too long to keep in memory.
///
/// Feed pairs in order with [`CountAccumulator::push`]; the first pair pushed
/// is `(X_0, a_0)` and is not counted as a visit.
#[derive(Debug, Clone)]
pub struct CountAccumulator {
    table: CountTable,
    prev: Option<StateControl>,
    index: usize,
    horizon: Option<usize>,
}

impl CountAccumulator {
    pub fn new(d: usize, k: usize, episode_horizon: Option<usize>) -> Self {
        Self {
            table: CountTable::zeros(d, k),
            prev: None,
            index: 0,
            horizon: episode_horizon,
        }
    }

    pub fn push(&mut self, p: StateControl) {
        let (d, k) = (self.table.d, self.table.k);
        if let Some(prev) = self.prev {
            let i = self.index;
            // prev is (X_{i-1}, a_{i-1}); the move i-1 → i is a transition
            // only if i-1 ≥ 1 and i is not a restart.
            let restart = self.horizon.is_some_and(|h| i % h == 0);
            if i >= 2 && !restart {
                self.table.transitions[(prev.state * k + prev.control) * d + p.state] += 1;
            }
            self.table.visits[p.state * k + p.control] += 1;
        }
        self.prev = Some(p);
        self.index += 1;
    }

    pub fn finish(self) -> CountTable {
        self.table
    }
}

/// Counts over a stored trajectory.
pub fn count(traj: &Trajectory, d: usize, k: usize) -> CountTable {
    let mut t = CountTable::zeros(d, k);
    let pairs = &traj.pairs;
    for p in pairs.iter().skip(1) {
        t.visits[p.state * k + p.control] += 1;
    }
    for i in 1..pairs.len().saturating_sub(1) {
        if traj.is_model_transition(i) {
            let (a, b) = (pairs[i], pairs[i + 1]);
            t.transitions[(a.state * k + a.control) * d + b.state] += 1;
        }
    }
    t
}

/// `M̂^(l)` with the pairs whose rows had no data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedModel {
    #[serde(flatten)]
    pub model: CmcModel,
    /// `[s, l]` pairs whose row was filled with the uniform law.
    pub undefined_rows: Vec<[usize; 2]>,
}

/// `M̂_{s,t}^(l) = N_{s,t}^(l) / Σ_t N_{s,t}^(l)`; rows without data are
/// uniform and listed in `undefined_rows`.
pub fn estimate(counts: &CountTable) -> EstimatedModel {
    let (d, k) = (counts.d, counts.k);
    let mut mats = vec![Matrix::zeros(d, d); k];
    let mut undefined = Vec::new();
    for s in 0..d {
        for (l, mat) in mats.iter_mut().enumerate() {
            let total = counts.successor_visits(s, l);
            let row = mat.row_mut(s);
            if total == 0 {
                row.fill(1.0 / d as f64);
                undefined.push([s, l]);
            } else {
                for (t, r) in row.iter_mut().enumerate() {
                    *r = counts.transition(s, l, t) as f64 / total as f64;
                }
            }
        }
    }
    // Each row is a ratio of integers over their sum, so it is stochastic up
    // to rounding; the unchecked constructor avoids a redundant pass.
    let model = CmcModel::new_unchecked(mats).expect("shapes are consistent");
    EstimatedModel {
        model,
        undefined_rows: undefined,
    }
}

/// Error of an estimate against the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationError {
    /// `sup_l ‖M̂^(l) − M^(l)‖_∞` (max absolute row sum).
    pub sup_norm: f64,
    /// `Σ_t |M̂^(l)_{s,t} − M^(l)_{s,t}|` indexed by `s * k + l`.
    pub row_l1: Vec<f64>,
}

pub fn estimation_error(est: &CmcModel, truth: &CmcModel) -> Result<EstimationError> {
    if (est.d(), est.k()) != (truth.d(), truth.k()) {
        return Err(Error::DimensionMismatch(alloc::format!(
            "estimate is ({}, {}), truth is ({}, {})",
            est.d(),
            est.k(),
            truth.d(),
            truth.k()
        )));
    }
    let (d, k) = (truth.d(), truth.k());
    let mut row_l1 = vec![0.0; d * k];
    let mut sup: f64 = 0.0;
    for l in 0..k {
        let rows = est.matrix(l).row_l1_distances(truth.matrix(l))?;
        for (s, e) in rows.into_iter().enumerate() {
            row_l1[s * k + l] = e;
            sup = sup.max(e);
        }
    }
    Ok(EstimationError { sup_norm: sup, row_l1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn path(v: &[(usize, usize)]) -> Trajectory {
        Trajectory::from_pairs(v.iter().map(|&(s, l)| StateControl::new(s, l)).collect())
    }

    #[test]
    fn hand_counts() {
        let t = path(&[(0, 0), (1, 0), (0, 0), (1, 0)]);
        let c = count(&t, 2, 1);
        assert_eq!(c.visits(0, 0), 1);
        assert_eq!(c.visits(1, 0), 2);
        assert_eq!(c.transition(0, 0, 1), 1);
        assert_eq!(c.transition(1, 0, 0), 1);
        assert_eq!(c.total_visits(), 3);
    }

    #[test]
    fn constant_path() {
        let t = path(&[(0, 0); 6]);
        let c = count(&t, 1, 1);
        assert_eq!(c.visits(0, 0), 5);
        assert_eq!(c.transition(0, 0, 0), 4);
    }

    #[test]
    fn accumulator_matches_batch_count() {
        let v = [(0, 1), (1, 0), (2, 1), (0, 0), (2, 1), (1, 1), (0, 0), (0, 1)];
        for h in [None, Some(3)] {
            let mut t = path(&v);
            t.episode_horizon = h;
            let mut acc = CountAccumulator::new(3, 2, h);
            for p in &t.pairs {
                acc.push(*p);
            }
            assert_eq!(acc.finish(), count(&t, 3, 2));
        }
    }

    #[test]
    fn unvisited_rows_are_uniform_and_flagged() {
        let t = path(&[(0, 0), (0, 0), (0, 0)]);
        let e = estimate(&count(&t, 2, 1));
        assert_eq!(e.undefined_rows, vec![[1, 0]]);
        assert_eq!(e.model.row(1, 0), &[0.5, 0.5]);
        assert_eq!(e.model.row(0, 0), &[1.0, 0.0]);
    }

    #[test]
    fn error_of_compensated_perturbation_is_twice_delta() {
        let truth = CmcModel::from_rows(&[vec![vec![0.5, 0.5], vec![0.3, 0.7]]]).unwrap();
        let est = CmcModel::from_rows(&[vec![vec![0.6, 0.4], vec![0.3, 0.7]]]).unwrap();
        let e = estimation_error(&est, &truth).unwrap();
        assert!((e.sup_norm - 0.2).abs() < 1e-12);
        assert!((e.row_l1[0] - 0.2).abs() < 1e-12);
        assert_eq!(e.row_l1[1], 0.0);
    }
}
