//! Trajectory generation and return-time statistics.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};
use crate::model::{CmcModel, Distribution, StateControl};
use crate::policy::LoggingPolicy;
use crate::rng::{rng_from_seed, sample_index, sample_index_with};

/// Law of the first observation.
///
/// `Pairs` draws `(X_0, a_0)` jointly from a law over `s * k + l`; `States`
/// draws `X_0` and lets the policy choose `a_0`. Greedy policies always
/// choose `a_0` themselves so that `ω_0` is well defined; a pair law is then
/// reduced to its state marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialLaw {
    Pairs(Distribution),
    States(Distribution),
}

impl InitialLaw {
    /// Uniform over all `d * k` pairs.
    pub fn uniform_pairs(d: usize, k: usize) -> Self {
        InitialLaw::Pairs(Distribution::uniform(d * k))
    }

    pub fn validate(&self, d: usize, k: usize) -> Result<()> {
        let (len, want) = match self {
            InitialLaw::Pairs(p) => (p.len(), d * k),
            InitialLaw::States(p) => (p.len(), d),
        };
        if len != want {
            return Err(mismatch!("initial law over {} points, expected {}", len, want));
        }
        Ok(())
    }

    /// Marginal law of `X_0`.
    pub fn state_marginal(&self, d: usize, k: usize) -> Vec<f64> {
        match self {
            InitialLaw::States(p) => p.weights().to_vec(),
            InitialLaw::Pairs(p) => (0..d).map(|s| p.weights()[s * k..(s + 1) * k].iter().sum()).collect(),
        }
    }

    /// Joint law of `(X_0, a_0)` under `policy`, flattened.
    pub fn pair_law(&self, policy: &LoggingPolicy, d: usize, k: usize) -> Vec<f64> {
        match self {
            InitialLaw::Pairs(p) if !matches!(policy, LoggingPolicy::Greedy { .. }) => p.weights().to_vec(),
            _ => {
                let states = self.state_marginal(d, k);
                let mut out = vec![0.0; d * k];
                let mut law = vec![0.0; k];
                for (s, &w) in states.iter().enumerate() {
                    policy.control_law(0, s, &[], &mut law);
                    for l in 0..k {
                        out[s * k + l] = w * law[l];
                    }
                }
                out
            }
        }
    }
}

/// A sample path `((X_0, a_0), …, (X_m, a_m))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub pairs: Vec<StateControl>,
    pub seed: u64,
    /// `ω_i` for greedy policies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greedy_flags: Option<Vec<bool>>,
    /// Horizon of an episodic policy. Transitions into a restart point are
    /// not governed by the model and are left out of transition counts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode_horizon: Option<usize>,
}

impl Trajectory {
    /// Wraps a bare path.
    pub fn from_pairs(pairs: Vec<StateControl>) -> Self {
        Self {
            pairs,
            seed: 0,
            greedy_flags: None,
            episode_horizon: None,
        }
    }

    /// Index of the last observation, `m`.
    #[inline]
    pub fn m(&self) -> usize {
        self.pairs.len().saturating_sub(1)
    }

    /// Whether the move `i → i + 1` follows the model dynamics.
    #[inline]
    pub fn is_model_transition(&self, i: usize) -> bool {
        match self.episode_horizon {
            Some(h) => (i + 1) % h != 0,
            None => true,
        }
    }

    pub fn validate(&self, d: usize, k: usize) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(invalid!("empty trajectory"));
        }
        if let Some(p) = self.pairs.iter().find(|p| p.state >= d || p.control >= k) {
            return Err(crate::error::Error::IndexOutOfRange(alloc::format!(
                "pair ({}, {}) with d = {d}, k = {k}",
                p.state,
                p.control
            )));
        }
        if let Some(f) = &self.greedy_flags {
            if f.len() != self.pairs.len() {
                return Err(mismatch!("{} flags for {} pairs", f.len(), self.pairs.len()));
            }
        }
        Ok(())
    }
}

fn check_inputs(model: &CmcModel, policy: &LoggingPolicy, init: &InitialLaw) -> Result<()> {
    policy.validate(model.d(), model.k())?;
    init.validate(model.d(), model.k())
}

fn first_pair<R: Rng>(
    policy: &LoggingPolicy,
    init: &InitialLaw,
    d: usize,
    k: usize,
    rng: &mut R,
    flags: &mut Option<Vec<bool>>,
) -> StateControl {
    match init {
        InitialLaw::Pairs(p) if !matches!(policy, LoggingPolicy::Greedy { .. }) => {
            StateControl::from_flat(sample_index(rng, p.weights()), k)
        }
        _ => {
            let s = sample_index(rng, &init.state_marginal(d, k));
            pick(policy, 0, s, &[], k, rng, flags)
        }
    }
}

fn pick<R: Rng>(
    policy: &LoggingPolicy,
    i: usize,
    s: usize,
    history: &[StateControl],
    k: usize,
    rng: &mut R,
    flags: &mut Option<Vec<bool>>,
) -> StateControl {
    let draw = policy.next_control(i, s, history, k, rng);
    if let (Some(f), Some(w)) = (flags.as_mut(), draw.explore) {
        f.push(w);
    }
    StateControl::new(s, draw.control)
}

fn new_trajectory(policy: &LoggingPolicy, m: usize, seed: u64) -> Trajectory {
    Trajectory {
        pairs: Vec::with_capacity(m + 1),
        seed,
        greedy_flags: matches!(policy, LoggingPolicy::Greedy { .. }).then(|| Vec::with_capacity(m + 1)),
        episode_horizon: policy.horizon(),
    }
}

/// Draws a restart pair; greedy policies never restart, so no flag is due.
fn restart_pair<R: Rng>(law: &Distribution, k: usize, rng: &mut R) -> StateControl {
    StateControl::from_flat(sample_index(rng, law.weights()), k)
}

/// Direct sampler: `X_{i+1}` from row `X_i` of `M^(a_i)`, `a_{i+1}` from the
/// policy.
pub fn simulate(
    model: &CmcModel,
    policy: &LoggingPolicy,
    init: &InitialLaw,
    m: usize,
    seed: u64,
) -> Result<Trajectory> {
    check_inputs(model, policy, init)?;
    let (d, k) = (model.d(), model.k());
    let mut rng = rng_from_seed(seed);
    let mut traj = new_trajectory(policy, m, seed);
    let first = first_pair(policy, init, d, k, &mut rng, &mut traj.greedy_flags);
    traj.pairs.push(first);
    for i in 1..=m {
        if let Some(law) = policy.restart_law(i, d, k) {
            let p = restart_pair(&law, k, &mut rng);
            traj.pairs.push(p);
            continue;
        }
        let prev = traj.pairs[i - 1];
        let s = sample_index(&mut rng, model.row(prev.state, prev.control));
        let p = pick(policy, i, s, &traj.pairs, k, &mut rng, &mut traj.greedy_flags);
        traj.pairs.push(p);
    }
    Ok(traj)
}

/// Lazily materialized array of successor draws.
///
/// Cell `(s, l, τ)` holds the `τ`-th successor drawn for the pair `(s, l)`.
/// Each pair owns its own ChaCha stream, so a cell's value depends only on
/// `(seed, s, l, τ)` and not on the order in which cells are read.
pub struct SuccessorArray {
    streams: Vec<ChaCha8Rng>,
    d: usize,
    k: usize,
}

impl SuccessorArray {
    pub fn new(seed: u64, d: usize, k: usize) -> Self {
        let streams = (0..d * k)
            .map(|idx| {
                let (s, l) = (idx / k, idx % k);
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream((l * d + s + 1) as u64);
                r
            })
            .collect();
        Self { streams, d, k }
    }

    /// Next unread cell for pair `(s, l)` under `model`.
    pub fn next(&mut self, model: &CmcModel, s: usize, l: usize) -> usize {
        debug_assert!(s < self.d && l < self.k);
        let u: f64 = self.streams[s * self.k + l].random();
        sample_index_with(u, model.row(s, l))
    }
}

/// Array-based sampler: successors come from per-pair i.i.d. arrays read in
/// order of visits; controls, restarts and `X_0` use stream 0.
pub fn simulate_via_array_scheme(
    model: &CmcModel,
    policy: &LoggingPolicy,
    init: &InitialLaw,
    m: usize,
    seed: u64,
) -> Result<Trajectory> {
    check_inputs(model, policy, init)?;
    let (d, k) = (model.d(), model.k());
    let mut rng = rng_from_seed(seed);
    let mut array = SuccessorArray::new(seed, d, k);
    let mut traj = new_trajectory(policy, m, seed);
    let first = first_pair(policy, init, d, k, &mut rng, &mut traj.greedy_flags);
    traj.pairs.push(first);
    for i in 1..=m {
        if let Some(law) = policy.restart_law(i, d, k) {
            let p = restart_pair(&law, k, &mut rng);
            traj.pairs.push(p);
            continue;
        }
        let prev = traj.pairs[i - 1];
        let s = array.next(model, prev.state, prev.control);
        let p = pick(policy, i, s, &traj.pairs, k, &mut rng, &mut traj.greedy_flags);
        traj.pairs.push(p);
    }
    Ok(traj)
}

/// Return times of one state-control pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReturnTimes {
    /// Whether the pair was occupied at `i = 0`.
    pub started_here: bool,
    /// `τ^(1)` (first visit at `n ≥ 1`) followed by the gaps between later
    /// visits.
    pub times: Vec<usize>,
    /// Mean return time: the gaps, plus `τ^(1)` when the pair started at
    /// `i = 0` (then `τ^(1)` is itself a return). `None` with no returns.
    pub mean: Option<f64>,
    pub max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnTimeStats {
    /// Indexed by `s * k + l`.
    pub pairs: Vec<PairReturnTimes>,
    /// Largest mean return time over pairs that have one.
    pub t_hat: Option<f64>,
}

/// Hitting and return times per pair. `τ^(1)` is the first `n ≥ 1` with
/// `(X_n, a_n) = (s, l)`; a visit at `i = 0` is recorded in `started_here`.
pub fn return_times(traj: &Trajectory, d: usize, k: usize) -> ReturnTimeStats {
    let n = d * k;
    let mut last: Vec<Option<usize>> = vec![None; n];
    let mut out: Vec<PairReturnTimes> = (0..n)
        .map(|_| PairReturnTimes {
            started_here: false,
            times: Vec::new(),
            mean: None,
            max: None,
        })
        .collect();
    if let Some(p0) = traj.pairs.first() {
        out[p0.flat(k)].started_here = true;
    }
    for (i, p) in traj.pairs.iter().enumerate().skip(1) {
        let idx = p.flat(k);
        let gap = match last[idx] {
            Some(prev) => i - prev,
            None => i,
        };
        out[idx].times.push(gap);
        last[idx] = Some(i);
    }
    let mut t_hat: Option<f64> = None;
    for pr in &mut out {
        let returns: &[usize] = if pr.started_here {
            &pr.times
        } else {
            pr.times.get(1..).unwrap_or(&[])
        };
        if !returns.is_empty() {
            let mean = returns.iter().sum::<usize>() as f64 / returns.len() as f64;
            pr.mean = Some(mean);
            pr.max = returns.iter().copied().max();
            t_hat = Some(t_hat.map_or(mean, |t: f64| t.max(mean)));
        }
    }
    ReturnTimeStats { pairs: out, t_hat }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use alloc::vec;

    fn flip() -> CmcModel {
        CmcModel::from_rows(&[vec![vec![0.0, 1.0], vec![1.0, 0.0]]]).unwrap()
    }

    fn one_control() -> LoggingPolicy {
        LoggingPolicy::StationaryRandomized {
            table: Matrix::filled(2, 1, 1.0),
        }
    }

    #[test]
    fn deterministic_chain_alternates_in_both_samplers() {
        let init = InitialLaw::Pairs(Distribution::dirac(2, 0));
        for seed in 0..5 {
            let a = simulate(&flip(), &one_control(), &init, 9, seed).unwrap();
            let b = simulate_via_array_scheme(&flip(), &one_control(), &init, 9, seed).unwrap();
            assert_eq!(a.pairs, b.pairs);
            for (i, p) in a.pairs.iter().enumerate() {
                assert_eq!(p.state, i % 2);
            }
        }
    }

    #[test]
    fn same_seed_same_path() {
        let m = CmcModel::from_rows(&[
            vec![vec![0.5, 0.5], vec![0.2, 0.8]],
            vec![vec![0.9, 0.1], vec![0.3, 0.7]],
        ])
        .unwrap();
        let p = LoggingPolicy::StationaryRandomized {
            table: Matrix::filled(2, 2, 0.5),
        };
        let init = InitialLaw::uniform_pairs(2, 2);
        let a = simulate(&m, &p, &init, 500, 42).unwrap();
        let b = simulate(&m, &p, &init, 500, 42).unwrap();
        let c = simulate(&m, &p, &init, 500, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.pairs, c.pairs);
    }

    #[test]
    fn return_times_of_small_paths() {
        let t = Trajectory::from_pairs(vec![
            StateControl::new(0, 0),
            StateControl::new(1, 0),
            StateControl::new(0, 0),
        ]);
        let r = return_times(&t, 2, 1);
        assert!(r.pairs[0].started_here);
        assert_eq!(r.pairs[0].times, vec![2]);
        assert_eq!(r.pairs[0].mean, Some(2.0));
        assert_eq!(r.pairs[1].times, vec![1]);
        assert_eq!(r.pairs[1].mean, None);
    }

    #[test]
    fn alternating_chain_returns_every_two_steps() {
        let init = InitialLaw::Pairs(Distribution::dirac(2, 1));
        let t = simulate(&flip(), &one_control(), &init, 50, 0).unwrap();
        let r = return_times(&t, 2, 1);
        for pr in &r.pairs {
            assert!(pr.times.iter().skip(1).all(|&g| g == 2));
            assert_eq!(pr.mean, Some(2.0));
        }
    }

    #[test]
    fn episodic_restart_marks_transitions() {
        let t = Trajectory {
            episode_horizon: Some(3),
            ..Trajectory::from_pairs(vec![StateControl::new(0, 0); 7])
        };
        let skipped: Vec<usize> = (0..6).filter(|&i| !t.is_model_transition(i)).collect();
        assert_eq!(skipped, vec![2, 5]);
    }
}
