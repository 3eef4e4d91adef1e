//! Exact mixing coefficients by enumeration of the full path law.
//!
//! All suprema over event sets are computed as total-variation distances:
//! for two laws on a finite space, `sup_B |P(B) − Q(B)| = ½ ‖P − Q‖_1`.
//!
//! Coefficient tables are ragged: row `i` (for `i = 0..=m`) holds the values
//! for `j = i + 1, …, m`. Use [`at`] to index them by `(i, j)`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Result};
use crate::exact::{path_law, total_variation};
use crate::model::CmcModel;
use crate::policy::LoggingPolicy;
use crate::simulate::InitialLaw;

/// Ragged `(i, j)` table with `j > i`.
pub type Ragged = Vec<Vec<f64>>;

/// Value at `(i, j)` of a ragged table.
#[inline]
pub fn at(table: &Ragged, i: usize, j: usize) -> f64 {
    table[i][j - i - 1]
}

/// Exact law of a path `(y_0, …, y_m)` over `n` symbols, `y_0` most
/// significant in the index.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLaw {
    pub n: usize,
    pub m: usize,
    pub probs: Vec<f64>,
}

impl PathLaw {
    pub fn new(n: usize, m: usize, probs: Vec<f64>) -> Result<Self> {
        let want = (n as u128).checked_pow(m as u32 + 1);
        if want != Some(probs.len() as u128) {
            return Err(mismatch!(
                "{} probabilities for {} symbols over {} steps",
                probs.len(),
                n,
                m + 1
            ));
        }
        Ok(Self { n, m, probs })
    }

    /// Law of the pair process of a CMC.
    pub fn from_model(
        model: &CmcModel,
        policy: &LoggingPolicy,
        init: &InitialLaw,
        m: usize,
        cap: u128,
    ) -> Result<Self> {
        let probs = path_law::<f64>(model, policy, init, m, cap)?;
        Ok(Self {
            n: model.pairs(),
            m,
            probs,
        })
    }

    #[inline]
    fn pow(&self, e: usize) -> usize {
        self.n.pow(e as u32)
    }

    /// Value of the segment `y_a, …, y_b` (inclusive) as a base-`n` number.
    #[inline]
    fn segment(&self, idx: usize, a: usize, b: usize) -> usize {
        (idx / self.pow(self.m - b)) % self.pow(b + 1 - a)
    }

    /// Law of `y_t`.
    pub fn marginal(&self, t: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (idx, &p) in self.probs.iter().enumerate() {
            out[self.segment(idx, t, t)] += p;
        }
        out
    }

    /// Joint law of `(y_i, y_j)` as `out[a * n + b]`.
    pub fn joint2(&self, i: usize, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for (idx, &p) in self.probs.iter().enumerate() {
            out[self.segment(idx, i, i) * self.n + self.segment(idx, j, j)] += p;
        }
        out
    }

    /// Law of the binary process `1[y_t = target]`.
    pub fn indicator_reduced(&self, target: usize) -> PathLaw {
        let mut probs = vec![0.0; 1usize << (self.m + 1)];
        for (idx, &p) in self.probs.iter().enumerate() {
            let mut bits = 0usize;
            for t in 0..=self.m {
                bits = bits * 2 + usize::from(self.segment(idx, t, t) == target);
            }
            probs[bits] += p;
        }
        PathLaw { n: 2, m: self.m, probs }
    }

    /// For each prefix `h_0^i` the pair `(P(h_0^i), P(tail_j | h_0^i))`,
    /// where `tail_j = (y_j, …, y_m)`, together with the unconditional law
    /// of `tail_j`.
    fn tails(&self, i: usize, j: usize) -> (Vec<(f64, Vec<f64>)>, Vec<f64>) {
        let prefixes = self.pow(i + 1);
        let tail_len = self.pow(self.m - j + 1);
        let mut joint = vec![0.0; prefixes * tail_len];
        for (idx, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let pre = idx / self.pow(self.m - i);
            let tail = idx % tail_len;
            joint[pre * tail_len + tail] += p;
        }
        let mut marginal = vec![0.0; tail_len];
        let rows = joint
            .chunks(tail_len)
            .map(|row| {
                let mass: f64 = row.iter().sum();
                for (m, r) in marginal.iter_mut().zip(row) {
                    *m += r;
                }
                let cond = if mass > 0.0 {
                    row.iter().map(|x| x / mass).collect()
                } else {
                    Vec::new()
                };
                (mass, cond)
            })
            .collect();
        (rows, marginal)
    }
}

/// How the weak-mixing supremum treats the conditioning histories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    /// Compare any two positive-probability full conditions
    /// `(h_0^{i-1}, y_i)` and `(h'_0^{i-1}, y'_i)`.
    #[default]
    AnyHistory,
    /// Both conditions share the same earlier history `h_0^{i-1}`.
    SharedPrefix,
}

fn dedupe(rows: Vec<&Vec<f64>>) -> Vec<&Vec<f64>> {
    // Laws equal up to rounding contribute nothing to a supremum of
    // differences, so one representative per rounded key is enough.
    let mut seen: BTreeMap<Vec<i64>, &Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = r.iter().map(|x| libm::round(x * 1e12) as i64).collect();
        seen.entry(key).or_insert(r);
    }
    seen.into_values().collect()
}

fn max_pairwise_tv(rows: &[&Vec<f64>]) -> f64 {
    let mut best: f64 = 0.0;
    for a in 0..rows.len() {
        for b in a + 1..rows.len() {
            best = best.max(total_variation(rows[a], rows[b]));
        }
    }
    best
}

fn eta_from_tails(rows: &[(f64, Vec<f64>)], n: usize, mode: EtaMode) -> f64 {
    match mode {
        EtaMode::AnyHistory => {
            let live = rows.iter().filter(|r| r.0 > 0.0).map(|r| &r.1).collect();
            max_pairwise_tv(&dedupe(live))
        }
        EtaMode::SharedPrefix => rows
            .chunks(n)
            .map(|group| {
                let live = group.iter().filter(|r| r.0 > 0.0).map(|r| &r.1).collect();
                max_pairwise_tv(&dedupe(live))
            })
            .fold(0.0, f64::max),
    }
}

fn phi_from_tails(rows: &[(f64, Vec<f64>)], marginal: &[f64]) -> f64 {
    rows.iter()
        .filter(|r| r.0 > 0.0)
        .map(|r| total_variation(&r.1, marginal))
        .fold(0.0, f64::max)
}

/// Weak-mixing coefficients `η̄_{i,j}`.
pub fn compute_eta_bar(law: &PathLaw, mode: EtaMode) -> Ragged {
    (0..=law.m)
        .map(|i| {
            (i + 1..=law.m)
                .map(|j| eta_from_tails(&law.tails(i, j).0, law.n, mode))
                .collect()
        })
        .collect()
}

/// Uniform-mixing coefficients `φ_{i,j}`, relative to the law's own
/// unconditional marginals (hence to the supplied initial law).
pub fn compute_phi(law: &PathLaw) -> Ragged {
    (0..=law.m)
        .map(|i| {
            (i + 1..=law.m)
                .map(|j| {
                    let (rows, marginal) = law.tails(i, j);
                    phi_from_tails(&rows, &marginal)
                })
                .collect()
        })
        .collect()
}

/// `η̄` and `φ` from one pass over the tails.
pub fn compute_eta_and_phi(law: &PathLaw, mode: EtaMode) -> (Ragged, Ragged) {
    let mut eta = Vec::with_capacity(law.m + 1);
    let mut phi = Vec::with_capacity(law.m + 1);
    for i in 0..=law.m {
        let mut er = Vec::with_capacity(law.m - i);
        let mut pr = Vec::with_capacity(law.m - i);
        for j in i + 1..=law.m {
            let (rows, marginal) = law.tails(i, j);
            er.push(eta_from_tails(&rows, law.n, mode));
            pr.push(phi_from_tails(&rows, &marginal));
        }
        eta.push(er);
        phi.push(pr);
    }
    (eta, phi)
}

/// State-mixing coefficients `θ̄_{i,j}`: the largest TV distance between
/// the laws of `X_j` under two distinct positive-probability values of
/// `(X_i, a_i)`. `k` is the number of controls of the pair process.
pub fn compute_theta_bar(law: &PathLaw, k: usize) -> Ragged {
    let n = law.n;
    let d = n / k;
    (0..=law.m)
        .map(|i| {
            (i + 1..=law.m)
                .map(|j| {
                    let joint = law.joint2(i, j);
                    let conds: Vec<Vec<f64>> = (0..n)
                        .filter_map(|a| {
                            let row = &joint[a * n..(a + 1) * n];
                            let mass: f64 = row.iter().sum();
                            (mass > 0.0).then(|| {
                                (0..d)
                                    .map(|t| row[t * k..(t + 1) * k].iter().sum::<f64>() / mass)
                                    .collect()
                            })
                        })
                        .collect();
                    max_pairwise_tv(&conds.iter().collect::<Vec<_>>())
                })
                .collect()
        })
        .collect()
}

/// One control-mixing coefficient `γ_{p,j,i}` (`j ≥ 1`, `p > i + j`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaEntry {
    pub i: usize,
    pub j: usize,
    pub p: usize,
    pub value: f64,
}

/// Control-mixing coefficients: the largest TV distance between the law of
/// `a_p` given `(X_p, H_{i+j}^{p-1}, H_0^i)` and given `(X_p, H_{i+j}^{p-1})`.
pub fn compute_gamma(law: &PathLaw, k: usize) -> Vec<GammaEntry> {
    let mut out = Vec::new();
    for i in 0..=law.m {
        for j in 1..=law.m {
            for p in i + j + 1..=law.m {
                out.push(GammaEntry {
                    i,
                    j,
                    p,
                    value: gamma_one(law, k, i, j, p),
                });
            }
        }
    }
    out
}

fn gamma_one(law: &PathLaw, k: usize, i: usize, j: usize, p: usize) -> f64 {
    let n = law.n;
    let remote = law.pow(i + 1);
    let recent = law.pow(p - i - j);
    // joint[(remote, recent, y_p)]
    let mut joint = vec![0.0; remote * recent * n];
    for (idx, &w) in law.probs.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let a = law.segment(idx, 0, i);
        let b = law.segment(idx, i + j, p - 1);
        let y = law.segment(idx, p, p);
        joint[(a * recent + b) * n + y] += w;
    }
    let d = n / k;
    let mut best: f64 = 0.0;
    let mut pooled = vec![0.0; n];
    let mut cond_a = vec![0.0; k];
    let mut cond_b = vec![0.0; k];
    for b in 0..recent {
        pooled.fill(0.0);
        for a in 0..remote {
            let base = (a * recent + b) * n;
            for (y, v) in pooled.iter_mut().enumerate() {
                *v += joint[base + y];
            }
        }
        for s in 0..d {
            let pooled_mass: f64 = pooled[s * k..(s + 1) * k].iter().sum();
            if pooled_mass <= 0.0 {
                continue;
            }
            for (l, c) in cond_b.iter_mut().enumerate() {
                *c = pooled[s * k + l] / pooled_mass;
            }
            for a in 0..remote {
                let base = (a * recent + b) * n + s * k;
                let row = &joint[base..base + k];
                let mass: f64 = row.iter().sum();
                if mass <= 0.0 {
                    continue;
                }
                for (c, r) in cond_a.iter_mut().zip(row) {
                    *c = r / mass;
                }
                best = best.max(total_variation(&cond_a, &cond_b));
            }
        }
    }
    best
}

/// `‖Δ_m‖ = max_{1 ≤ i ≤ m} (1 + Σ_{j > i} η̄_{i,j})`.
pub fn delta_norm(eta_bar: &Ragged) -> f64 {
    eta_bar
        .iter()
        .skip(1)
        .map(|row| 1.0 + row.iter().sum::<f64>())
        .fold(1.0, f64::max)
}

/// Every computed coefficient for one `(model, policy, D_0, m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub m: usize,
    pub d: usize,
    pub k: usize,
    pub eta_mode: EtaMode,
    /// Law of `(X_0, a_0)` the coefficients are relative to.
    pub initial_pair_law: Vec<f64>,
    pub eta_bar: Ragged,
    pub phi: Ragged,
    pub theta_bar: Ragged,
    pub gamma: Vec<GammaEntry>,
    pub delta_norm: f64,
}

impl MixingReport {
    /// Largest violation of `φ ≤ η̄ ≤ 2φ` (non-positive when it holds).
    pub fn sandwich_violation(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (er, pr) in self.eta_bar.iter().zip(&self.phi) {
            for (&e, &p) in er.iter().zip(pr) {
                worst = worst.max(p - e).max(e - 2.0 * p);
            }
        }
        worst
    }
}

pub fn mixing_report(
    model: &CmcModel,
    policy: &LoggingPolicy,
    init: &InitialLaw,
    m: usize,
    cap: u128,
    mode: EtaMode,
) -> Result<MixingReport> {
    let law = PathLaw::from_model(model, policy, init, m, cap)?;
    let (eta_bar, phi) = compute_eta_and_phi(&law, mode);
    let theta_bar = compute_theta_bar(&law, model.k());
    let gamma = compute_gamma(&law, model.k());
    Ok(MixingReport {
        m,
        d: model.d(),
        k: model.k(),
        eta_mode: mode,
        initial_pair_law: init.pair_law(policy, model.d(), model.k()),
        delta_norm: delta_norm(&eta_bar),
        eta_bar,
        phi,
        theta_bar,
        gamma,
    })
}

/// Both sides of the covariance inequality for uniformly mixing sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCheck {
    /// `|Cov(f(y_j), g(y_i))|`.
    pub covariance: f64,
    /// `φ_{i,j} · E|f(y_j) − E f(y_j)| · ess sup |g(y_i)|`.
    pub bound: f64,
    /// `covariance ≤ bound + 1e-10`.
    pub holds: bool,
    /// The same with the bound doubled.
    pub holds_doubled: bool,
}

/// Evaluates the covariance inequality at `(i, j)` for real functions `f`,
/// `g` on the symbol set of `law`.
pub fn check_covariance_inequality(
    law: &PathLaw,
    f: &[f64],
    g: &[f64],
    i: usize,
    j: usize,
    phi_ij: f64,
) -> CovarianceCheck {
    let n = law.n;
    let joint = law.joint2(i, j);
    let pi: Vec<f64> = (0..n).map(|a| joint[a * n..(a + 1) * n].iter().sum()).collect();
    let pj: Vec<f64> = (0..n).map(|b| (0..n).map(|a| joint[a * n + b]).sum()).collect();
    let ef: f64 = pj.iter().zip(f).map(|(p, x)| p * x).sum();
    let eg: f64 = pi.iter().zip(g).map(|(p, x)| p * x).sum();
    let mut efg = 0.0;
    for a in 0..n {
        for b in 0..n {
            efg += joint[a * n + b] * g[a] * f[b];
        }
    }
    let covariance = (efg - ef * eg).abs();
    let abs_dev: f64 = pj.iter().zip(f).map(|(p, x)| p * (x - ef).abs()).sum();
    let sup_g = pi
        .iter()
        .zip(g)
        .filter(|(p, _)| **p > 0.0)
        .map(|(_, x)| x.abs())
        .fold(0.0, f64::max);
    let bound = phi_ij * abs_dev * sup_g;
    CovarianceCheck {
        covariance,
        bound,
        holds: covariance <= bound + 1e-10,
        holds_doubled: covariance <= 2.0 * bound + 1e-10,
    }
}

/// Both sides of the chain rule for total variation. `joint[z][y][x]` is
/// the law of `(Z, Y, X)`; returns `(lhs, rhs)` for conditions `z1`, `z2`:
/// `lhs = ‖L(X,Y|z1) − L(X,Y|z2)‖`, `rhs = ‖L(Y|z1) − L(Y|z2)‖ +
/// sup_y ‖L(X|y,z1) − L(X|y,z2)‖` (sup over `y` positive under both).
pub fn tv_decomposition(joint: &[Vec<Vec<f64>>], z1: usize, z2: usize) -> Option<(f64, f64)> {
    let norm = |z: usize| -> Option<Vec<Vec<f64>>> {
        let mass: f64 = joint[z].iter().flatten().sum();
        (mass > 0.0).then(|| {
            joint[z]
                .iter()
                .map(|row| row.iter().map(|v| v / mass).collect())
                .collect()
        })
    };
    let (a, b) = (norm(z1)?, norm(z2)?);
    let flat = |t: &Vec<Vec<f64>>| t.iter().flatten().copied().collect::<Vec<_>>();
    let lhs = total_variation(&flat(&a), &flat(&b));
    let ya: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let yb: Vec<f64> = b.iter().map(|r| r.iter().sum()).collect();
    let mut sup: f64 = 0.0;
    for y in 0..ya.len() {
        if ya[y] > 0.0 && yb[y] > 0.0 {
            let xa: Vec<f64> = a[y].iter().map(|v| v / ya[y]).collect();
            let xb: Vec<f64> = b[y].iter().map(|v| v / yb[y]).collect();
            sup = sup.max(total_variation(&xa, &xb));
        }
    }
    Some((lhs, total_variation(&ya, &yb) + sup))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::DEFAULT_PATH_CAP;
    use crate::matrix::Matrix;
    use crate::model::Distribution;

    #[test]
    fn single_state_single_control_is_independent() {
        let model = CmcModel::new(vec![Matrix::identity(1)]).unwrap();
        let policy = LoggingPolicy::StationaryRandomized {
            table: Matrix::filled(1, 1, 1.0),
        };
        let r = mixing_report(
            &model,
            &policy,
            &InitialLaw::uniform_pairs(1, 1),
            4,
            DEFAULT_PATH_CAP,
            EtaMode::AnyHistory,
        )
        .unwrap();
        assert!(r.eta_bar.iter().flatten().all(|&x| x == 0.0));
        assert!(r.phi.iter().flatten().all(|&x| x == 0.0));
        assert_eq!(r.delta_norm, 1.0);
    }

    #[test]
    fn delta_norm_of_zero_table_is_one() {
        assert_eq!(delta_norm(&vec![vec![0.0; 3], vec![0.0; 2], vec![0.0], vec![]]), 1.0);
        let t = vec![vec![0.9, 0.9], vec![0.5], vec![]];
        // row 0 is excluded: the maximum runs over i ≥ 1
        assert_eq!(delta_norm(&t), 1.5);
    }

    #[test]
    fn identical_copies_break_the_unit_constant() {
        // y_0 = y_1 fair bit: Cov(f, g) with f centred sign, g = sign of f.
        let law = PathLaw::new(2, 1, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let phi = compute_phi(&law);
        assert!((at(&phi, 0, 1) - 0.5).abs() < 1e-15);
        let f = [0.5, -0.5];
        let g = [1.0, -1.0];
        let c = check_covariance_inequality(&law, &f, &g, 0, 1, at(&phi, 0, 1));
        assert!((c.covariance - 0.5).abs() < 1e-15);
        assert!((c.bound - 0.25).abs() < 1e-15);
        assert!(!c.holds);
        assert!(c.holds_doubled);
    }

    #[test]
    fn indicator_reduction_preserves_mass() {
        let model = CmcModel::from_rows(&[vec![vec![0.3, 0.7], vec![0.6, 0.4]]]).unwrap();
        let policy = LoggingPolicy::StationaryRandomized {
            table: Matrix::filled(2, 1, 1.0),
        };
        let law = PathLaw::from_model(
            &model,
            &policy,
            &InitialLaw::Pairs(Distribution::uniform(2)),
            3,
            DEFAULT_PATH_CAP,
        )
        .unwrap();
        let red = law.indicator_reduced(1);
        assert!((red.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(red.probs.len(), 16);
    }
}
