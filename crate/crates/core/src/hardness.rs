//! Hard-instance families for the minimax lower bound, and touring times.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::model::{paired_chain, stationary_distribution, CmcModel, Distribution, StateControl};
use crate::policy::LoggingPolicy;
use crate::rng::child_seed;
use crate::simulate::{simulate, InitialLaw, Trajectory};

/// Parameters of the single-chain family indexed by `σ ∈ {−1, +1}^{d/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaParams {
    /// Even number of body states; the chain has `d + 1` states.
    pub d: usize,
    pub p_star: f64,
    pub epsilon: f64,
    /// Length `d / 2`, entries ±1.
    pub sigma: Vec<i8>,
}

impl SigmaParams {
    pub fn validate(&self) -> Result<()> {
        let d = self.d;
        if d < 2 || d % 2 != 0 {
            return Err(invalid!("d = {} must be even and at least 2", d));
        }
        if !(self.p_star > 0.0 && self.p_star < 1.0 / (d as f64 + 1.0)) {
            return Err(invalid!("p_star = {} outside (0, 1/(d+1))", self.p_star));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0 / 32.0) {
            return Err(invalid!("epsilon = {} outside [0, 1/32)", self.epsilon));
        }
        if self.sigma.len() != d / 2 || self.sigma.iter().any(|&s| s != 1 && s != -1) {
            return Err(invalid!("sigma must be a ±1 vector of length {}", d / 2));
        }
        Ok(())
    }

    /// Perturbed last row `η(σ)`.
    pub fn eta(&self) -> Vec<f64> {
        let (d, p) = (self.d as f64, self.p_star);
        let mut row = Vec::with_capacity(self.d + 1);
        for &s in &self.sigma {
            let b = 16.0 * s as f64 * self.epsilon;
            row.push((1.0 - p + b) / d);
            row.push((1.0 - p - b) / d);
        }
        row.push(p);
        row
    }
}

/// `M_σ` as a one-control model on `d + 1` states.
pub fn build_sigma_instance(params: &SigmaParams) -> Result<CmcModel> {
    params.validate()?;
    let n = params.d + 1;
    let mut m = Matrix::zeros(n, n);
    let body = (1.0 - params.p_star) / params.d as f64;
    for s in 0..params.d {
        let row = m.row_mut(s);
        row[..params.d].fill(body);
        row[params.d] = params.p_star;
    }
    m.row_mut(params.d).copy_from_slice(&params.eta());
    CmcModel::new(vec![m])
}

/// Closed-form stationary law of `M_σ`.
pub fn sigma_stationary(params: &SigmaParams) -> Result<Distribution> {
    params.validate()?;
    let (d, p) = (params.d as f64, params.p_star);
    let mut w: Vec<f64> = params
        .eta()
        .iter()
        .take(params.d)
        .map(|&e| ((1.0 - p) * (1.0 - p) + e * d * p) / d)
        .collect();
    w.push(p);
    Distribution::normalized(w)
}

/// Parameters of the block family with `ξ^(l) ∈ {0, 1}^{d/3}` per control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockParams {
    /// Number of states, divisible by 3.
    pub d: usize,
    pub k: usize,
    pub iota: f64,
    pub epsilon: f64,
    /// `xi[l]` has length `d / 3`, entries 0 or 1.
    pub xi: Vec<Vec<u8>>,
}

impl BlockParams {
    /// `ξ^(l) = (1, …, 1)` for every control.
    pub fn all_ones(d: usize, k: usize, iota: f64, epsilon: f64) -> Self {
        Self {
            d,
            k,
            iota,
            epsilon,
            xi: vec![vec![1; d / 3]; k],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d;
        if d < 3 || d % 3 != 0 {
            return Err(invalid!("d = {} must be a positive multiple of 3", d));
        }
        if self.k == 0 {
            return Err(invalid!("k must be positive"));
        }
        if !(self.iota > 0.0 && self.iota < 31.0 / 64.0) {
            return Err(invalid!("iota = {} outside (0, 31/64)", self.iota));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0 / 32.0) {
            return Err(invalid!("epsilon = {} outside [0, 1/32)", self.epsilon));
        }
        if self.xi.len() != self.k || self.xi.iter().any(|x| x.len() != d / 3 || x.iter().any(|&b| b > 1)) {
            return Err(invalid!(
                "xi must hold k = {} binary vectors of length {}",
                self.k,
                d / 3
            ));
        }
        Ok(())
    }
}

/// One matrix `M^(l)` of the block family.
///
/// With `d > 3` the paired entries of the top-right block are
/// `(1 ± ξε − 2ι)/2` and the rest `3ι / (2(d − 3))`. At `d = 3` there are no
/// off-pair columns, so the paired entries become `(1 ± ξε − ι)/2` to keep
/// rows stochastic; the stationary law is the same closed form either way.
pub fn block_matrix(d: usize, iota: f64, epsilon: f64, xi: &[u8]) -> Matrix {
    let b = d / 3;
    let mut m = Matrix::zeros(d, d);
    let c = 3.0 * iota / d as f64;
    let off = if d > 3 {
        3.0 * iota / (2.0 * (d - 3) as f64)
    } else {
        0.0
    };
    let pair_shift = if d > 3 { 2.0 * iota } else { iota };
    for r in 0..b {
        let row = m.row_mut(r);
        row[..b].fill(c);
        row[b..].fill(off);
        let e = xi[r] as f64 * epsilon;
        row[b + 2 * r] = (1.0 + e - pair_shift) / 2.0;
        row[b + 2 * r + 1] = (1.0 - e - pair_shift) / 2.0;
    }
    for r in b..d {
        let row = m.row_mut(r);
        row[..b].fill(c);
        row[r] = 1.0 - iota;
    }
    m
}

/// Block-family model and its uniform control policy.
pub fn build_block_instance(params: &BlockParams) -> Result<(CmcModel, LoggingPolicy)> {
    params.validate()?;
    let mats = params
        .xi
        .iter()
        .map(|x| block_matrix(params.d, params.iota, params.epsilon, x))
        .collect();
    let model = CmcModel::new(mats)?;
    let policy = LoggingPolicy::StationaryRandomized {
        table: Matrix::filled(params.d, params.k, 1.0 / params.k as f64),
    };
    Ok((model, policy))
}

/// Closed-form stationary law of `M^(l)`.
pub fn block_stationary(d: usize, iota: f64, epsilon: f64, xi: &[u8]) -> Vec<f64> {
    let b = d / 3;
    let mut w = vec![3.0 * iota / d as f64; b];
    for &x in xi {
        let e = x as f64 * epsilon;
        w.push(3.0 * (1.0 + e - iota) / (2.0 * d as f64));
        w.push(3.0 * (1.0 - e - iota) / (2.0 * d as f64));
    }
    w
}

/// Stationary law of the pair chain under uniform controls, flattened to
/// `s * k + l`.
///
/// When every `ξ^(l)` is the same this is `(1/k)(Π^(1), …, Π^(k))` in closed
/// form. Otherwise the state marginal is stationary for the averaged matrix
/// and is computed numerically.
pub fn block_pair_stationary(params: &BlockParams) -> Result<Distribution> {
    params.validate()?;
    let (d, k) = (params.d, params.k);
    if params.xi.iter().all(|x| *x == params.xi[0]) {
        let state = block_stationary(d, params.iota, params.epsilon, &params.xi[0]);
        let w = (0..d * k).map(|i| state[i / k] / k as f64).collect();
        return Distribution::normalized(w);
    }
    let (model, policy) = build_block_instance(params)?;
    let LoggingPolicy::StationaryRandomized { table } = &policy else {
        unreachable!("block policy is a stationary table")
    };
    stationary_distribution(&paired_chain(&model, table)?)
}

/// Code over `{−1, +1}^n` built greedily.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GvCode {
    pub codewords: Vec<Vec<i8>>,
    pub min_dist: usize,
    /// `2^{n/8}`.
    pub target: f64,
    pub target_met: bool,
}

/// Largest code length accepted by [`gilbert_varshamov_set`].
pub const GV_MAX_LEN: usize = 24;

/// Scans `{−1, +1}^n` in lexicographic order (−1 before +1) and keeps every
/// word at Hamming distance `≥ min_dist` from all kept words.
pub fn gilbert_varshamov_set(n: usize, min_dist: usize) -> Result<GvCode> {
    if !(2..=GV_MAX_LEN).contains(&n) {
        return Err(invalid!("code length {} outside 2..={}", n, GV_MAX_LEN));
    }
    let mut kept: Vec<u32> = Vec::new();
    for w in 0u32..(1 << n) {
        if kept.iter().all(|&c| ((c ^ w).count_ones() as usize) >= min_dist) {
            kept.push(w);
        }
    }
    let codewords = kept
        .iter()
        .map(|&w| (0..n).map(|i| if w >> (n - 1 - i) & 1 == 1 { 1 } else { -1 }).collect())
        .collect::<Vec<Vec<i8>>>();
    let target = libm::pow(2.0, n as f64 / 8.0);
    Ok(GvCode {
        target_met: codewords.len() as f64 >= target,
        codewords,
        min_dist,
        target,
    })
}

/// Hamming distance between two sign vectors.
pub fn hamming(a: &[i8], b: &[i8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// First index `n ≥ 1` by which every pair `(s, l)` with `s < d/3` has been
/// visited at some step in `1..=n`; `None` if the path never covers them.
///
/// The initial pair is not counted: it comes from `D_0`, while each later
/// step lands in the first block with probability `ι` regardless of the past.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TouringTime {
    pub value: Option<usize>,
}

pub fn touring_time(traj: &Trajectory, d: usize, k: usize) -> TouringTime {
    touring_time_of(&traj.pairs, d, k)
}

fn touring_time_of(pairs: &[StateControl], d: usize, k: usize) -> TouringTime {
    let b = d / 3;
    let need = b * k;
    if need == 0 {
        return TouringTime { value: Some(0) };
    }
    let mut seen = vec![false; need];
    let mut count = 0;
    for (i, p) in pairs.iter().enumerate().skip(1) {
        if p.state < b && p.control < k {
            let idx = p.state * k + p.control;
            if !seen[idx] {
                seen[idx] = true;
                count += 1;
                if count == need {
                    return TouringTime { value: Some(i) };
                }
            }
        }
    }
    TouringTime { value: None }
}

/// `(dk / 3ι) · Σ_{u=1}^{dk/3} 1/u`, the mean touring time.
pub fn expected_touring_time(d: usize, k: usize, iota: f64) -> f64 {
    let n = d * k / 3;
    let h: f64 = (1..=n).map(|u| 1.0 / u as f64).sum();
    (d * k) as f64 / (3.0 * iota) * h
}

/// `(dk / 6ι) · ln(dk / 3)`, below which `P(𝕋 > n) ≥ 1/(1+π²)`.
pub fn cover_time_threshold(d: usize, k: usize, iota: f64) -> f64 {
    let dk = (d * k) as f64;
    dk / (6.0 * iota) * libm::log(dk / 3.0)
}

/// `(dk / 6ι) · (ln(dk / 3) + 1)`, the point the proof actually bounds.
pub fn cover_time_proof_point(d: usize, k: usize, iota: f64) -> f64 {
    let dk = (d * k) as f64;
    dk / (6.0 * iota) * (libm::log(dk / 3.0) + 1.0)
}

/// `1 / (1 + π²)`.
pub fn cover_time_floor() -> f64 {
    let pi = core::f64::consts::PI;
    1.0 / (1.0 + pi * pi)
}

/// Whether `𝕋 > n` on one path of length `n` seeded with `seed`.
pub fn touring_exceeds(
    model: &CmcModel,
    policy: &LoggingPolicy,
    init: &InitialLaw,
    n: usize,
    seed: u64,
) -> Result<bool> {
    let traj = simulate(model, policy, init, n, seed)?;
    Ok(touring_time(&traj, model.d(), model.k()).value.is_none())
}

/// Empirical `P(𝕋 > n)` with a 99% normal-approximation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverTimeEstimate {
    pub n: usize,
    pub replications: usize,
    pub exceed: usize,
    pub p: f64,
    pub ci_half_width: f64,
}

impl CoverTimeEstimate {
    pub fn from_counts(n: usize, replications: usize, exceed: usize) -> Self {
        let p = exceed as f64 / replications.max(1) as f64;
        Self {
            n,
            replications,
            exceed,
            p,
            ci_half_width: 2.576 * libm::sqrt(p * (1.0 - p) / replications.max(1) as f64),
        }
    }
}

/// Sequential cover-time experiment on the block family started from its
/// stationary pair law; replication `r` uses `child_seed(seed, r)`.
pub fn cover_time_experiment(
    params: &BlockParams,
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<CoverTimeEstimate> {
    let (model, policy) = build_block_instance(params)?;
    let init = InitialLaw::Pairs(block_pair_stationary(params)?);
    let mut exceed = 0;
    for r in 0..replications {
        if touring_exceeds(&model, &policy, &init, n, child_seed(seed, r as u64))? {
            exceed += 1;
        }
    }
    Ok(CoverTimeEstimate::from_counts(n, replications, exceed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_example_row() {
        let p = SigmaParams {
            d: 2,
            p_star: 0.2,
            epsilon: 0.01,
            sigma: vec![1],
        };
        let m = build_sigma_instance(&p).unwrap();
        let last = m.row(2, 0);
        for (a, b) in last.iter().zip([0.48, 0.32, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sigma_stationary_closed_form() {
        let p = SigmaParams {
            d: 6,
            p_star: 0.1,
            epsilon: 0.02,
            sigma: vec![1, -1, 1],
        };
        let m = build_sigma_instance(&p).unwrap();
        let num = stationary_distribution(m.matrix(0)).unwrap();
        let closed = sigma_stationary(&p).unwrap();
        for (a, b) in num.weights().iter().zip(closed.weights()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn block_rows_and_stationary() {
        for d in [3, 6, 9] {
            let p = BlockParams {
                d,
                k: 2,
                iota: 0.3,
                epsilon: 0.02,
                xi: vec![vec![1; d / 3], vec![0; d / 3]],
            };
            let (model, _) = build_block_instance(&p).unwrap();
            for (l, x) in p.xi.iter().enumerate() {
                let pi = block_stationary(d, 0.3, 0.02, x);
                let back = model.matrix(l).left_mul(&pi);
                for (a, b) in back.iter().zip(&pi) {
                    assert!((a - b).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn zero_xi_gives_equal_pairs() {
        let m = block_matrix(6, 0.3, 0.02, &[0, 0]);
        assert_eq!(m[(0, 2)], m[(0, 3)]);
        assert!((m[(0, 2)] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn gv_small_cases() {
        let c = gilbert_varshamov_set(2, 1).unwrap();
        assert!(c.codewords.len() >= 2);
        let c = gilbert_varshamov_set(8, 1).unwrap();
        assert!(c.target_met);
        let c = gilbert_varshamov_set(10, 4).unwrap();
        for (i, a) in c.codewords.iter().enumerate() {
            for b in &c.codewords[i + 1..] {
                assert!(hamming(a, b) >= 4);
            }
        }
    }

    #[test]
    fn touring_scan() {
        let sc = |s, l| StateControl::new(s, l);
        let t = [sc(0, 0), sc(1, 0), sc(0, 1), sc(0, 0)];
        assert_eq!(touring_time_of(&t, 3, 2).value, Some(3));
        let t = [sc(0, 1), sc(0, 0), sc(2, 1)];
        assert_eq!(touring_time_of(&t, 3, 2).value, None);
    }

    #[test]
    fn cover_time_at_zero_is_one() {
        let p = BlockParams::all_ones(6, 2, 0.3, 0.01);
        let e = cover_time_experiment(&p, 0, 50, 1).unwrap();
        assert_eq!(e.p, 1.0);
    }
}
