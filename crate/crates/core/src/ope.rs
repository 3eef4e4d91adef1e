//! Discounted policy evaluation with true and estimated models, and the
//! recovery of transition matrices from data logged by a greedy policy.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bounds::{theorem1_threshold, BoundInputs};
use crate::error::{invalid, mismatch, Error, Result};
use crate::matrix::Matrix;
use crate::model::{validate_stochastic, CmcModel, StateControl};
use crate::rng::{rng_from_seed, uniform_index};
use crate::simulate::Trajectory;

/// Residual accepted from a linear solve, relative to `max(1, ‖g‖_∞)`.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Iteration cap of the Neumann fallback.
pub const NEUMANN_CAP: usize = 1_000_000;

/// `V = g + α M V` on a single chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpeProblem {
    pub m: Matrix,
    pub g: Vec<f64>,
    pub alpha: f64,
}

impl OpeProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid!("discount {} outside (0, 1)", self.alpha));
        }
        if !self.m.is_square() || self.m.rows() != self.g.len() {
            return Err(mismatch!(
                "matrix is {}x{}, cost has length {}",
                self.m.rows(),
                self.m.cols(),
                self.g.len()
            ));
        }
        if self.g.iter().any(|x| !x.is_finite()) {
            return Err(invalid!("cost vector has a non-finite entry"));
        }
        validate_stochastic(&self.m, 0)
    }
}

/// How a value vector was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Elimination,
    Neumann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSolution {
    pub v: Vec<f64>,
    /// `‖(I − αM)V − g‖_∞`.
    pub residual: f64,
    pub method: SolveMethod,
}

/// `‖(I − αM)v − g‖_∞`.
pub fn bellman_residual(m: &Matrix, g: &[f64], alpha: f64, v: &[f64]) -> f64 {
    let mv = m.mul_vec(v);
    v.iter()
        .zip(&mv)
        .zip(g)
        .map(|((vi, mvi), gi)| (vi - alpha * mvi - gi).abs())
        .fold(0.0, f64::max)
}

/// Gaussian elimination with partial pivoting on `(I − αM) v = g`.
fn eliminate(m: &Matrix, g: &[f64], alpha: f64) -> Option<Vec<f64>> {
    let n = g.len();
    let w = n + 1;
    let mut a = vec![0.0; n * w];
    for r in 0..n {
        for c in 0..n {
            a[r * w + c] = if r == c { 1.0 } else { 0.0 } - alpha * m[(r, c)];
        }
        a[r * w + n] = g[r];
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x * w + col].abs().total_cmp(&a[y * w + col].abs()))?;
        if a[piv * w + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for c in 0..w {
                a.swap(piv * w + c, col * w + c);
            }
        }
        let p = a[col * w + col];
        for r in col + 1..n {
            let f = a[r * w + col] / p;
            if f != 0.0 {
                for c in col..w {
                    a[r * w + c] -= f * a[col * w + c];
                }
            }
        }
    }
    let mut v = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r * w + c] * v[c]).sum();
        v[r] = (a[r * w + n] - s) / a[r * w + r];
    }
    v.iter().all(|x| x.is_finite()).then_some(v)
}

/// `v ← g + αMv` until the update stalls.
fn neumann(m: &Matrix, g: &[f64], alpha: f64) -> Vec<f64> {
    let mut v = g.to_vec();
    for _ in 0..NEUMANN_CAP {
        let mv = m.mul_vec(&v);
        let next: Vec<f64> = g.iter().zip(&mv).map(|(gi, x)| gi + alpha * x).collect();
        let change = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if change <= f64::EPSILON * v.iter().fold(1.0, |acc: f64, x| acc.max(x.abs())) {
            break;
        }
    }
    v
}

/// `V = (I − αM)^{-1} g`; falls back to the Neumann series when elimination
/// misses the residual tolerance.
pub fn solve_value(problem: &OpeProblem) -> Result<ValueSolution> {
    problem.validate()?;
    solve_unchecked(&problem.m, &problem.g, problem.alpha)
}

fn solve_unchecked(m: &Matrix, g: &[f64], alpha: f64) -> Result<ValueSolution> {
    let scale = g.iter().fold(1.0, |acc: f64, x| acc.max(x.abs()));
    if let Some(v) = eliminate(m, g, alpha) {
        let residual = bellman_residual(m, g, alpha, &v);
        if residual <= RESIDUAL_TOL * scale {
            return Ok(ValueSolution {
                v,
                residual,
                method: SolveMethod::Elimination,
            });
        }
    }
    let v = neumann(m, g, alpha);
    let residual = bellman_residual(m, g, alpha, &v);
    if residual <= RESIDUAL_TOL * scale {
        Ok(ValueSolution {
            v,
            residual,
            method: SolveMethod::Neumann,
        })
    } else {
        Err(Error::SingularSystem)
    }
}

/// `V̂` from an estimated chain. Rows filled in for lack of data are passed
/// through as warnings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlugInValue {
    pub solution: ValueSolution,
    pub undefined_rows: Vec<usize>,
}

pub fn plug_in_value(m_hat: &Matrix, g: &[f64], alpha: f64, undefined_rows: &[usize]) -> Result<PlugInValue> {
    let problem = OpeProblem {
        m: m_hat.clone(),
        g: g.to_vec(),
        alpha,
    };
    Ok(PlugInValue {
        solution: solve_value(&problem)?,
        undefined_rows: undefined_rows.to_vec(),
    })
}

/// `α √d ‖M̂ − M‖_∞ ‖g‖_1 / (1 − α)²`.
pub fn perturbation_bound(m: &Matrix, m_hat: &Matrix, g: &[f64], alpha: f64) -> Result<f64> {
    let dist = m.inf_norm_distance(m_hat)?;
    let g1: f64 = g.iter().map(|x| x.abs()).sum();
    let d = m.rows() as f64;
    Ok(alpha * libm::sqrt(d) * dist * g1 / ((1.0 - alpha) * (1.0 - alpha)))
}

/// Evaluation problem of a stationary policy `Π` (`d × k`) with
/// state-control cost `g̃` (`d × k`): row `s` of the chain is
/// `Σ_l Π_{s,l} M^(l)_{s,·}` and `g(s) = Σ_l Π_{s,l} g̃(s, l)`.
pub fn compose_policy(model: &CmcModel, pi: &Matrix, g_tilde: &Matrix, alpha: f64) -> Result<OpeProblem> {
    let (d, k) = (model.d(), model.k());
    if (pi.rows(), pi.cols()) != (d, k) || (g_tilde.rows(), g_tilde.cols()) != (d, k) {
        return Err(mismatch!(
            "policy {}x{} and cost {}x{} for d = {d}, k = {k}",
            pi.rows(),
            pi.cols(),
            g_tilde.rows(),
            g_tilde.cols()
        ));
    }
    validate_stochastic(pi, 0)?;
    let mut m = Matrix::zeros(d, d);
    let mut g = vec![0.0; d];
    for s in 0..d {
        for l in 0..k {
            let w = pi[(s, l)];
            g[s] += w * g_tilde[(s, l)];
            for (t, x) in m.row_mut(s).iter_mut().enumerate() {
                *x += w * model.row(s, l)[t];
            }
        }
    }
    let problem = OpeProblem { m, g, alpha };
    problem.validate()?;
    Ok(problem)
}

/// `T_α = ‖g‖_1² d α² T / (1 − α)⁴`.
pub fn t_alpha(g: &[f64], d: usize, alpha: f64, t: f64) -> f64 {
    let g1: f64 = g.iter().map(|x| x.abs()).sum();
    g1 * g1 * d as f64 * alpha * alpha * t / libm::pow(1.0 - alpha, 4.0)
}

/// Sample-size thresholds for value accuracy `inputs.epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueThresholds {
    pub t_alpha: f64,
    /// Matrix accuracy `ε (1 − α)² / (‖g‖_1 √d α)` that yields value accuracy `ε`.
    pub matrix_epsilon: f64,
    /// Estimation threshold at `matrix_epsilon`.
    pub via_matrix_accuracy: f64,
    /// The same form with `T_α` in place of `T` and `C_θ²` in place of `C_Δ²`.
    pub via_t_alpha: f64,
}

pub fn value_thresholds(inputs: &BoundInputs, c_theta: f64, g: &[f64], alpha: f64) -> ValueThresholds {
    let d = inputs.d as f64;
    let g1: f64 = g.iter().map(|x| x.abs()).sum();
    let matrix_epsilon = inputs.epsilon * (1.0 - alpha) * (1.0 - alpha) / (g1 * libm::sqrt(d) * alpha);
    let via_matrix_accuracy = theorem1_threshold(&BoundInputs {
        epsilon: matrix_epsilon,
        ..*inputs
    });
    let ta = t_alpha(g, inputs.d, alpha, inputs.t);
    let dk = (inputs.d * inputs.k) as f64;
    let e2 = inputs.epsilon * inputs.epsilon;
    let z = 1.0 - inputs.zeta();
    let first = ta / e2 * libm::log(dk * ta / (e2 * inputs.delta));
    let second = c_theta * c_theta * (ta * ta).max(1.0 / (z * z)) * libm::log(dk / inputs.delta);
    ValueThresholds {
        t_alpha: ta,
        matrix_epsilon,
        via_matrix_accuracy,
        via_t_alpha: inputs.c * first.max(second),
    }
}

/// Replaces every step with `ω_i = 0` by independent uniform draws
/// `(D^(2)_i, D^(3)_i)` and folds the flag into the state.
///
/// The output lives on `2d` states: `X̃_i + d · ω_i`. Draws come from
/// `ChaCha8Rng` seeded with `seed`, two per masked step.
pub fn greedy_transform(traj: &Trajectory, d: usize, k: usize, seed: u64) -> Result<Trajectory> {
    let flags = traj.greedy_flags.as_ref().ok_or(Error::MissingFlags)?;
    if flags.len() != traj.pairs.len() {
        return Err(mismatch!("{} flags for {} pairs", flags.len(), traj.pairs.len()));
    }
    let mut rng = rng_from_seed(seed);
    let pairs = traj
        .pairs
        .iter()
        .zip(flags)
        .map(|(p, &omega)| {
            if omega {
                StateControl::new(p.state + d, p.control)
            } else {
                let s = uniform_index(&mut rng, d);
                StateControl::new(s, uniform_index(&mut rng, k))
            }
        })
        .collect();
    Ok(Trajectory {
        pairs,
        seed,
        greedy_flags: None,
        episode_horizon: None,
    })
}

/// `𝔐̃^(l)` with top blocks `(1 − υ)J` and `υM^(l)` repeated on both rows.
pub fn transformed_model(model: &CmcModel, upsilon: f64) -> Result<CmcModel> {
    check_upsilon(upsilon)?;
    let d = model.d();
    let mats = model
        .matrices()
        .iter()
        .map(|m| {
            let mut big = Matrix::zeros(2 * d, 2 * d);
            for r in 0..2 * d {
                let row = big.row_mut(r);
                row[..d].fill((1.0 - upsilon) / d as f64);
                for (t, x) in m.row(r % d).iter().enumerate() {
                    row[d + t] = upsilon * x;
                }
            }
            big
        })
        .collect();
    CmcModel::new(mats)
}

fn check_upsilon(upsilon: f64) -> Result<()> {
    if upsilon > 0.0 && upsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidUpsilon(upsilon))
    }
}

/// Matrices read back from an estimate of `𝔐̃^(l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyRecovery {
    pub upsilon: f64,
    /// `(1/υ)` times the explored-to-explored block, as is.
    pub raw: Vec<Matrix>,
    /// `raw` with each row renormalized to sum to 1.
    pub model: CmcModel,
    /// `[s, l]` rows whose raw sum was off by more than the tolerance.
    pub renormalized: Vec<[usize; 2]>,
}

/// `M̂^(l) = (1/υ) · 𝔐̂^(l)[d.., d..]`.
pub fn recover_greedy_m(estimated: &CmcModel, upsilon: f64, tol: f64) -> Result<GreedyRecovery> {
    check_upsilon(upsilon)?;
    if estimated.d() % 2 != 0 {
        return Err(mismatch!("transformed model has odd size {}", estimated.d()));
    }
    let d = estimated.d() / 2;
    let mut raw = Vec::with_capacity(estimated.k());
    let mut fixed = Vec::with_capacity(estimated.k());
    let mut renormalized = Vec::new();
    for (l, m) in estimated.matrices().iter().enumerate() {
        let block = m.block(d, d, d, d).scaled(1.0 / upsilon);
        let mut norm = block.clone();
        for s in 0..d {
            let row = norm.row_mut(s);
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tol {
                renormalized.push([s, l]);
            }
            if sum > 0.0 {
                row.iter_mut().for_each(|x| *x /= sum);
            } else {
                row.fill(1.0 / d as f64);
            }
        }
        raw.push(block);
        fixed.push(norm);
    }
    Ok(GreedyRecovery {
        upsilon,
        raw,
        model: CmcModel::new(fixed)?,
        renormalized,
    })
}
