//! Exact path laws by full enumeration.
//!
//! A path `(y_0, …, y_m)` over `n = d * k` pair values is encoded as the
//! base-`n` number with `y_0` most significant, so every history prefix
//! `h_0^i` owns a contiguous block of `n^{m-i}` paths.
//!
//! The enumerators are generic over [`Weight`] so tests can run them with
//! exact rational arithmetic.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul};

use crate::error::{Error, Result};
use crate::model::{CmcModel, StateControl};
use crate::policy::LoggingPolicy;
use crate::simulate::InitialLaw;

/// Default cap on the number of enumerated paths.
pub const DEFAULT_PATH_CAP: u128 = 10_000_000;

/// Probability arithmetic needed by the enumerators.
pub trait Weight: Clone + PartialEq + Add<Output = Self> + Mul<Output = Self> {
    fn zero() -> Self;
    fn one() -> Self;
    /// Exact conversion for rational types; identity for `f64`.
    fn from_f64(x: f64) -> Self;
    fn is_zero(&self) -> bool;
}

impl Weight for f64 {
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn one() -> Self {
        1.0
    }
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

/// Shape of the path space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathSpace {
    pub d: usize,
    pub k: usize,
    pub m: usize,
}

impl PathSpace {
    #[inline]
    pub fn n(&self) -> usize {
        self.d * self.k
    }

    /// `n^{m+1}`, or `None` on overflow.
    pub fn size(&self) -> Option<u128> {
        (self.n() as u128).checked_pow(self.m as u32 + 1)
    }

    /// Errors when the space exceeds `cap` paths.
    pub fn check(&self, cap: u128) -> Result<usize> {
        let paths = self.size().unwrap_or(u128::MAX);
        if paths > cap {
            return Err(Error::TooLarge { paths, cap });
        }
        Ok(paths as usize)
    }

    /// Pair values of path `idx`.
    pub fn decode(&self, mut idx: usize, out: &mut [usize]) {
        let n = self.n();
        for slot in out.iter_mut().rev() {
            *slot = idx % n;
            idx /= n;
        }
    }

    pub fn encode(&self, ys: &[usize]) -> usize {
        ys.iter().fold(0, |acc, &y| acc * self.n() + y)
    }
}

/// Exact law of `(y_0, …, y_m)` under the direct dynamics.
pub fn path_law<W: Weight>(
    model: &CmcModel,
    policy: &LoggingPolicy,
    init: &InitialLaw,
    m: usize,
    cap: u128,
) -> Result<Vec<W>> {
    let space = PathSpace {
        d: model.d(),
        k: model.k(),
        m,
    };
    let size = space.check(cap)?;
    policy.validate(space.d, space.k)?;
    init.validate(space.d, space.k)?;
    let init_law = init.pair_law(policy, space.d, space.k);
    let mut out = vec![W::zero(); size];
    let mut hist = Vec::with_capacity(m + 1);
    let mut law = vec![0.0; space.k];
    direct_rec(
        model,
        policy,
        &space,
        &init_law,
        0,
        0,
        W::one(),
        &mut hist,
        &mut law,
        &mut out,
    );
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn direct_rec<W: Weight>(
    model: &CmcModel,
    policy: &LoggingPolicy,
    space: &PathSpace,
    init: &[f64],
    i: usize,
    prefix: usize,
    w: W,
    hist: &mut Vec<StateControl>,
    law: &mut [f64],
    out: &mut [W],
) {
    let (d, k, n) = (space.d, space.k, space.n());
    let mut visit = |y: usize, factors: [f64; 2], hist: &mut Vec<StateControl>, law: &mut [f64]| {
        let w2 = w.clone() * W::from_f64(factors[0]) * W::from_f64(factors[1]);
        let idx = prefix * n + y;
        if i == space.m {
            out[idx] = out[idx].clone() + w2;
        } else {
            hist.push(StateControl::from_flat(y, k));
            direct_rec(model, policy, space, init, i + 1, idx, w2, hist, law, out);
            hist.pop();
        }
    };
    if i == 0 {
        for (y, &p) in init.iter().enumerate() {
            if p != 0.0 {
                visit(y, [p, 1.0], hist, law);
            }
        }
        return;
    }
    if let Some(r) = policy.restart_law(i, d, k) {
        for (y, &p) in r.weights().iter().enumerate() {
            if p != 0.0 {
                visit(y, [p, 1.0], hist, law);
            }
        }
        return;
    }
    let prev = hist[i - 1];
    for s in 0..d {
        let p = model.row(prev.state, prev.control)[s];
        if p == 0.0 {
            continue;
        }
        policy.control_law(i, s, hist, law);
        let snapshot: Vec<f64> = law.to_vec();
        for (l, &q) in snapshot.iter().enumerate() {
            if q != 0.0 {
                visit(s * k + l, [p, q], hist, law);
            }
        }
    }
}

/// Exact law of the array-based sampler.
///
/// Enumerates every filling of the successor array (cells `(s, l, τ)` for
/// `τ < m`, each an independent draw from row `s` of `M^(l)`) and, for each,
/// every control and restart outcome, then runs the array mechanics. This
/// shares no transition bookkeeping with [`path_law`].
pub fn array_path_law<W: Weight>(
    model: &CmcModel,
    policy: &LoggingPolicy,
    init: &InitialLaw,
    m: usize,
    cap: u128,
) -> Result<Vec<W>> {
    let space = PathSpace {
        d: model.d(),
        k: model.k(),
        m,
    };
    let size = space.check(cap)?;
    policy.validate(space.d, space.k)?;
    init.validate(space.d, space.k)?;
    let (d, k) = (space.d, space.k);
    let cells = d * k * m;
    let fillings = (d as u128).checked_pow(cells as u32).unwrap_or(u128::MAX);
    if fillings > cap {
        return Err(Error::TooLarge { paths: fillings, cap });
    }
    let init_law = init.pair_law(policy, d, k);
    let mut out = vec![W::zero(); size];
    let mut array = vec![0usize; cells];
    let mut hist = Vec::with_capacity(m + 1);
    let mut law = vec![0.0; k];
    for f in 0..fillings as usize {
        let mut rest = f;
        let mut w = W::one();
        for (c, slot) in array.iter_mut().enumerate() {
            *slot = rest % d;
            rest /= d;
            // cell c = ((s * k + l) * m + τ)
            let pair = c / m.max(1);
            let (s, l) = (pair / k, pair % k);
            w = w * W::from_f64(model.row(s, l)[*slot]);
        }
        if w.is_zero() {
            continue;
        }
        let mut used = vec![0usize; d * k];
        array_rec(
            policy, &space, &init_law, &array, &mut used, 0, w, &mut hist, &mut law, &mut out,
        );
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn array_rec<W: Weight>(
    policy: &LoggingPolicy,
    space: &PathSpace,
    init: &[f64],
    array: &[usize],
    used: &mut [usize],
    i: usize,
    w: W,
    hist: &mut Vec<StateControl>,
    law: &mut [f64],
    out: &mut [W],
) {
    let (d, k, m) = (space.d, space.k, space.m);
    let emit = |y: usize, p: f64, used: &mut [usize], hist: &mut Vec<StateControl>, law: &mut [f64], out: &mut [W]| {
        let w2 = w.clone() * W::from_f64(p);
        hist.push(StateControl::from_flat(y, k));
        if i == m {
            let idx = space.encode(&hist.iter().map(|p| p.flat(k)).collect::<Vec<_>>());
            out[idx] = out[idx].clone() + w2;
        } else {
            array_rec(policy, space, init, array, used, i + 1, w2, hist, law, out);
        }
        hist.pop();
    };
    if i == 0 {
        for (y, &p) in init.iter().enumerate() {
            if p != 0.0 {
                emit(y, p, used, hist, law, out);
            }
        }
        return;
    }
    if let Some(r) = policy.restart_law(i, d, k) {
        for (y, &p) in r.weights().iter().enumerate() {
            if p != 0.0 {
                emit(y, p, used, hist, law, out);
            }
        }
        return;
    }
    let prev = hist[i - 1].flat(k);
    let tau = used[prev];
    let s = array[prev * m + tau];
    used[prev] += 1;
    policy.control_law(i, s, hist, law);
    let snapshot: Vec<f64> = law.to_vec();
    for (l, &q) in snapshot.iter().enumerate() {
        if q != 0.0 {
            emit(s * k + l, q, used, hist, law, out);
        }
    }
    used[prev] -= 1;
}

/// Total-variation distance `½ Σ |p − q|` between two laws on one space.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
