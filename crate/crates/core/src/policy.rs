//! Logging policies: the mechanisms that produced the controls in a dataset.
//!
//! Every variant exposes its conditional control law
//! `P(a_i = · | X_i = s, H_0^{i-1})` through [`LoggingPolicy::control_law`],
//! which is what the array sampler and the exact path-law enumerators
//! consume. [`LoggingPolicy::next_control`] draws from the same law.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::matrix::Matrix;
use crate::model::{validate_stochastic, Distribution, StateControl};
use crate::rng::{bernoulli, sample_index, uniform_index};

/// Control sequence of a deterministic schedule. Both forms repeat
/// cyclically once exhausted; they differ only in how they are written.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Explicit(Vec<usize>),
    Periodic(Vec<usize>),
}

impl Schedule {
    pub fn controls(&self) -> &[usize] {
        match self {
            Schedule::Explicit(v) | Schedule::Periodic(v) => v,
        }
    }

    #[inline]
    pub fn at(&self, i: usize) -> usize {
        let c = self.controls();
        c[i % c.len()]
    }

    /// The first `len` controls.
    pub fn prefix(&self, len: usize) -> Vec<usize> {
        (0..len).map(|i| self.at(i)).collect()
    }
}

/// Within-episode control law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeLaw {
    /// Table indexed by the position inside the episode; the last table
    /// covers any later position.
    Tables(Vec<Matrix>),
    /// With probability `stick` repeat the control the episode started
    /// with, otherwise draw from `table`. Depends on episode-local history.
    Sticky { table: Matrix, stick: f64 },
}

/// The five logging-policy classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LoggingPolicy {
    /// `a_i` depends on `X_i` only, through a fixed `d × k` table.
    StationaryRandomized { table: Matrix },
    /// Controls follow a fixed sequence, independent of the states.
    DeterministicSchedule {
        schedule: Schedule,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        revisit_window: Option<usize>,
    },
    /// Per-time tables `P^(i)`; the last one repeats.
    NonStationaryMarkov { tables: Vec<Matrix> },
    /// Every `horizon` steps the pair `(X_i, a_i)` is redrawn from `restart`
    /// (uniform over pairs when absent).
    Episodic {
        horizon: usize,
        within: EpisodeLaw,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        restart: Option<Distribution>,
    },
    /// With probability `upsilon` explore uniformly (`ω_i = 1`), otherwise
    /// follow `base`.
    Greedy { upsilon: f64, base: Box<LoggingPolicy> },
}

/// One control draw. `explore` is `Some(ω_i)` for greedy policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlDraw {
    pub control: usize,
    pub explore: Option<bool>,
}

/// Short variant name, also used as the policy class label in outputs.
pub fn class_name(policy: &LoggingPolicy) -> &'static str {
    match policy {
        LoggingPolicy::StationaryRandomized { .. } => "stationary",
        LoggingPolicy::DeterministicSchedule { .. } => "inhomogeneous",
        LoggingPolicy::NonStationaryMarkov { .. } => "markov",
        LoggingPolicy::Episodic { .. } => "episodic",
        LoggingPolicy::Greedy { .. } => "greedy",
    }
}

fn check_table(table: &Matrix, d: usize, k: usize) -> Result<()> {
    if table.rows() != d || table.cols() != k {
        return Err(mismatch!(
            "policy table is {}x{}, expected {}x{}",
            table.rows(),
            table.cols(),
            d,
            k
        ));
    }
    validate_stochastic(table, usize::MAX)
}

fn conditional_on_state(restart: &[f64], state: usize, k: usize, out: &mut [f64]) {
    let row = &restart[state * k..(state + 1) * k];
    let mass: f64 = row.iter().sum();
    if mass > 0.0 {
        for (o, w) in out.iter_mut().zip(row) {
            *o = w / mass;
        }
    } else {
        out.fill(1.0 / k as f64);
    }
}

impl LoggingPolicy {
    /// Checks shapes and probability rows against a `d`-state, `k`-control
    /// model.
    pub fn validate(&self, d: usize, k: usize) -> Result<()> {
        match self {
            LoggingPolicy::StationaryRandomized { table } => check_table(table, d, k),
            LoggingPolicy::DeterministicSchedule {
                schedule,
                revisit_window,
            } => {
                let c = schedule.controls();
                if c.is_empty() {
                    return Err(invalid!("empty schedule"));
                }
                if let Some(&bad) = c.iter().find(|&&l| l >= k) {
                    return Err(Error::IndexOutOfRange(alloc::format!("control {bad} with k = {k}")));
                }
                if let Some(w) = *revisit_window {
                    // Two periods plus a window cover every cyclic window.
                    let seq = schedule.prefix(2 * c.len() + w + 2);
                    if !verify_revisit_window(&seq, k, w)? {
                        return Err(invalid!("schedule violates revisit window {}", w));
                    }
                }
                Ok(())
            }
            LoggingPolicy::NonStationaryMarkov { tables } => {
                if tables.is_empty() {
                    return Err(invalid!("no tables"));
                }
                tables.iter().try_for_each(|t| check_table(t, d, k))
            }
            LoggingPolicy::Episodic {
                horizon,
                within,
                restart,
            } => {
                if *horizon == 0 {
                    return Err(invalid!("episode horizon must be at least 1"));
                }
                match within {
                    EpisodeLaw::Tables(tables) => {
                        if tables.is_empty() {
                            return Err(invalid!("no tables"));
                        }
                        tables.iter().try_for_each(|t| check_table(t, d, k))?;
                    }
                    EpisodeLaw::Sticky { table, stick } => {
                        check_table(table, d, k)?;
                        if !(0.0..=1.0).contains(stick) {
                            return Err(invalid!("stick probability {} outside [0, 1]", stick));
                        }
                    }
                }
                if let Some(r) = restart {
                    if r.len() != d * k {
                        return Err(mismatch!("restart law over {} pairs, expected {}", r.len(), d * k));
                    }
                }
                Ok(())
            }
            LoggingPolicy::Greedy { upsilon, base } => {
                if !(*upsilon > 0.0 && *upsilon <= 1.0) {
                    return Err(Error::InvalidUpsilon(*upsilon));
                }
                if matches!(**base, LoggingPolicy::Greedy { .. } | LoggingPolicy::Episodic { .. }) {
                    return Err(invalid!("greedy base must not be greedy or episodic"));
                }
                base.validate(d, k)
            }
        }
    }

    /// Law of the whole pair `(X_i, a_i)` when time `i` is a restart point
    /// (episodic policies at positive multiples of the horizon).
    pub fn restart_law(&self, i: usize, d: usize, k: usize) -> Option<Distribution> {
        match self {
            LoggingPolicy::Episodic { horizon, restart, .. } if i > 0 && i % horizon == 0 => {
                Some(restart.clone().unwrap_or_else(|| Distribution::uniform(d * k)))
            }
            _ => None,
        }
    }

    /// Whether `i` is a restart point.
    pub fn is_restart(&self, i: usize) -> bool {
        matches!(self, LoggingPolicy::Episodic { horizon, .. } if i > 0 && i % horizon == 0)
    }

    /// Episode horizon, if episodic.
    pub fn horizon(&self) -> Option<usize> {
        match self {
            LoggingPolicy::Episodic { horizon, .. } => Some(*horizon),
            _ => None,
        }
    }

    /// Writes `P(a_i = l | X_i = state, H_0^{i-1} = history)` into `out`
    /// (length `k`). `history` holds the `i` earlier pairs.
    ///
    /// At a restart point this is the restart law conditioned on the state.
    pub fn control_law(&self, i: usize, state: usize, history: &[StateControl], out: &mut [f64]) {
        let k = out.len();
        match self {
            LoggingPolicy::StationaryRandomized { table } => out.copy_from_slice(table.row(state)),
            LoggingPolicy::DeterministicSchedule { schedule, .. } => {
                out.fill(0.0);
                out[schedule.at(i)] = 1.0;
            }
            LoggingPolicy::NonStationaryMarkov { tables } => {
                out.copy_from_slice(tables[i.min(tables.len() - 1)].row(state));
            }
            LoggingPolicy::Episodic {
                horizon,
                within,
                restart,
            } => {
                let pos = i % horizon;
                if pos == 0 {
                    match restart {
                        Some(r) => conditional_on_state(r.weights(), state, k, out),
                        None => out.fill(1.0 / k as f64),
                    }
                    return;
                }
                match within {
                    EpisodeLaw::Tables(tables) => {
                        out.copy_from_slice(tables[pos.min(tables.len() - 1)].row(state));
                    }
                    EpisodeLaw::Sticky { table, stick } => {
                        let first = history[i - pos].control;
                        for (l, o) in out.iter_mut().enumerate() {
                            *o = (1.0 - stick) * table[(state, l)];
                        }
                        out[first] += stick;
                    }
                }
            }
            LoggingPolicy::Greedy { upsilon, base } => {
                base.control_law(i, state, history, out);
                let explore = upsilon / k as f64;
                for o in out.iter_mut() {
                    *o = (1.0 - upsilon) * *o + explore;
                }
            }
        }
    }

    /// Draws `a_i` given `X_i = state` and the earlier pairs.
    pub fn next_control<R: Rng + ?Sized>(
        &self,
        i: usize,
        state: usize,
        history: &[StateControl],
        k: usize,
        rng: &mut R,
    ) -> ControlDraw {
        match self {
            LoggingPolicy::DeterministicSchedule { schedule, .. } => ControlDraw {
                control: schedule.at(i),
                explore: None,
            },
            LoggingPolicy::Greedy { upsilon, base } => {
                let omega = bernoulli(rng, *upsilon);
                let control = if omega {
                    uniform_index(rng, k)
                } else {
                    base.next_control(i, state, history, k, rng).control
                };
                ControlDraw {
                    control,
                    explore: Some(omega),
                }
            }
            _ => {
                let mut law = vec![0.0; k];
                self.control_law(i, state, history, &mut law);
                ControlDraw {
                    control: sample_index(rng, &law),
                    explore: None,
                }
            }
        }
    }

    /// True when the control law never looks past `X_i`; used to pick the
    /// fast path in enumerators.
    pub fn is_stationary(&self) -> bool {
        matches!(self, LoggingPolicy::StationaryRandomized { .. })
    }
}

/// Checks that every window `a_j, …, a_{j+window}` with
/// `1 ≤ j ≤ m − window` contains each of the `k` controls more than once,
/// where `m + 1 = schedule.len()`.
pub fn verify_revisit_window(schedule: &[usize], k: usize, window: usize) -> Result<bool> {
    let m = schedule.len().saturating_sub(1);
    if window > m {
        return Err(Error::WindowTooLong { window, m });
    }
    let mut counts = vec![0usize; k];
    for j in 1..=m - window {
        counts.fill(0);
        for &l in &schedule[j..=j + window] {
            if l >= k {
                return Err(Error::IndexOutOfRange(alloc::format!("control {l} with k = {k}")));
            }
            counts[l] += 1;
        }
        if counts.iter().any(|&c| c <= 1) {
            return Ok(false);
        }
    }
    Ok(true)
}
