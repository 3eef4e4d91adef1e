//! Closed-form visit brackets, tail bounds and sample-size thresholds, plus
//! the per-class constants that feed them.

use alloc::vec::Vec;

use libm::{exp, log, pow};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::model::{paired_chain, stationary_distribution, CmcModel, Distribution};
use crate::policy::LoggingPolicy;

/// Constants entering the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub d: usize,
    pub k: usize,
    /// Bound on conditional mean return times.
    pub t: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    /// Bound on `‖Δ_m‖`.
    pub c_delta: f64,
    /// Largest marginal pair probability.
    pub rho_star: f64,
    /// Bernstein constant, default 1.
    pub c_pel: f64,
    /// Universal multiplier of the thresholds, default 1.
    pub c: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let dk = (self.d * self.k) as f64;
        if !(0.0 < self.zeta2 && self.zeta2 <= self.zeta1 && self.zeta1 < 1.0) {
            return Err(invalid!(
                "need 0 < zeta2 <= zeta1 < 1, got {} and {}",
                self.zeta2,
                self.zeta1
            ));
        }
        if !(self.t > dk / 2.0) {
            return Err(invalid!("T = {} must exceed dk/2 = {}", self.t, dk / 2.0));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid!("epsilon must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid!("delta must lie in (0, 1)"));
        }
        if !(self.rho_star > 0.0 && self.rho_star <= 1.0) {
            return Err(invalid!("rho_star must lie in (0, 1]"));
        }
        if !(self.c_delta >= 1.0) || !(self.c_pel > 0.0) || !(self.c > 0.0) {
            return Err(invalid!("C_delta >= 1, C_pel > 0 and c > 0 are required"));
        }
        Ok(())
    }

    /// `max{ζ1, 1 − ζ2}`.
    #[inline]
    pub fn zeta(&self) -> f64 {
        self.zeta1.max(1.0 - self.zeta2)
    }
}

/// `(m / 2T, m · max{ζ1, 1 − ζ2})`, valid once `m ≥ 2T`.
pub fn expected_visit_bracket(inputs: &BoundInputs, m: f64) -> Result<(f64, f64)> {
    if m < 2.0 * inputs.t {
        return Err(Error::MTooSmall { m, min: 2.0 * inputs.t });
    }
    Ok((m / (2.0 * inputs.t), m * inputs.zeta()))
}

/// Hoeffding-type bound on `P(N ∉ [n_low, n_high])`.
pub fn hoeffding_tail(inputs: &BoundInputs, m: f64, n_low: f64, n_high: f64) -> f64 {
    let scale = 2.0 * m * inputs.c_delta * inputs.c_delta;
    let lo = n_low - m / (2.0 * inputs.t);
    let hi = n_high - m * inputs.zeta();
    2.0 * exp(-lo * lo / scale) + 2.0 * exp(-hi * hi / scale)
}

/// Bernstein-type bound on `P(N ∉ [n_low, n_high])` with `ρ = ρ_s^(l)`.
///
/// A term whose denominator is not positive carries no information and is
/// reported as its trivial value 2.
pub fn bernstein_tail(inputs: &BoundInputs, m: f64, n_low: f64, n_high: f64, rho: f64) -> f64 {
    let lm2 = log(m) * log(m);
    let base = 4.0 * m * inputs.c_delta * rho + 1.0;
    let term = |dev: f64, extra: f64| {
        let den = base + extra * lm2;
        if den <= 0.0 {
            2.0
        } else {
            2.0 * exp(-inputs.c_pel * dev * dev / den)
        }
    };
    let half = m / (2.0 * inputs.t);
    let upper = m * inputs.zeta();
    term(n_low - half, half - n_low) + term(n_high - upper, n_high - upper)
}

/// Sample size above which the plain estimator is `(ε, δ)`-accurate under
/// summable weak mixing.
pub fn theorem1_threshold(inputs: &BoundInputs) -> f64 {
    let BoundInputs {
        d,
        k,
        t,
        c_delta,
        c,
        epsilon,
        delta,
        ..
    } = *inputs;
    let dk = (d * k) as f64;
    let e2 = epsilon * epsilon;
    let first = t / e2 * log(dk * t / (e2 * delta));
    let z = 1.0 - inputs.zeta();
    let second = c_delta * c_delta * (t * t).max(1.0 / (z * z)) * log(dk / delta);
    c * first.max(second)
}

/// Intermediate constants of the geometric-mixing threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Terms {
    pub c_zeta: f64,
    pub c_t: f64,
    pub c_zeta_delta: f64,
    pub c_t_delta: f64,
    pub m_star: f64,
}

/// Sample size above which the estimator is `(ε, δ)`-accurate under
/// geometric weak mixing.
pub fn theorem2_threshold(inputs: &BoundInputs) -> Theorem2Terms {
    let BoundInputs {
        d,
        k,
        t,
        c_delta,
        rho_star,
        c_pel,
        c,
        epsilon,
        delta,
        ..
    } = *inputs;
    let z = inputs.zeta();
    let c_zeta = 8.0 * (2.0 * c_delta * rho_star * pow(1.0 - z, -2.0) + 1.0 / (1.0 - z)) / c_pel;
    let c_t = 64.0 * (c_delta * rho_star * t * t + 2.0 * t) / c_pel;
    let l = log(6.0 * (d * k) as f64 / delta);
    let (c_zeta_delta, c_t_delta) = (c_zeta * l, c_t * l);
    let lg = |x: f64| log(x) * log(x);
    let m_star = c
        * (8.0 * d as f64 / (epsilon * epsilon * (1.0 + z)))
            .max(2.0 * c_t_delta * lg(c_t_delta))
            .max(2.0 * c_zeta_delta * lg(c_zeta_delta));
    Theorem2Terms {
        c_zeta,
        c_t,
        c_zeta_delta,
        c_t_delta,
        m_star,
    }
}

/// Class-specific parameters for [`class_constants`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ClassParams {
    /// Stationary law `pi` of the pair chain, smallest control probability
    /// `p_min`, and the column floor `x0 = max_χ0 |χ0| · min M` used by the
    /// state-mixing constant.
    Stationary {
        pi: Distribution,
        p_min: f64,
        x0: f64,
    },
    Inhomogeneous {
        m_min: f64,
        m_max: f64,
        window: usize,
    },
    Markov {
        t_star: f64,
        m_min: f64,
        m_max: f64,
    },
    Episodic {
        horizon: usize,
        m_min: f64,
        m_max: f64,
    },
    Greedy {
        upsilon: f64,
        pi_star: f64,
    },
}

/// Verified constants for one policy class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassConstants {
    pub t: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    /// Control-mixing constant `C`.
    pub c: f64,
    pub c_theta: f64,
    /// `C + C_θ + 1`.
    pub c_delta: f64,
    /// Largest marginal pair probability, or the bound `max{ζ1, 1 − ζ2}`
    /// when the class gives nothing sharper.
    pub rho_star: f64,
}

impl ClassConstants {
    /// Bound inputs at accuracy `epsilon` and confidence `delta`, with the
    /// universal constants set to `c` and `c_pel`.
    pub fn inputs(&self, d: usize, k: usize, epsilon: f64, delta: f64, c: f64, c_pel: f64) -> BoundInputs {
        BoundInputs {
            d,
            k,
            t: self.t,
            zeta1: self.zeta1,
            zeta2: self.zeta2,
            c_delta: self.c_delta,
            rho_star: self.rho_star,
            c_pel,
            c,
            epsilon,
            delta,
        }
    }
}

fn probability(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(invalid!("{} = {} must lie in (0, 1)", name, x))
    }
}

/// Constants `(T, ζ1, ζ2, C, C_θ)` established for each policy class.
pub fn class_constants(d: usize, k: usize, params: &ClassParams) -> Result<ClassConstants> {
    let (t, zeta1, zeta2, c, c_theta, rho) = match params {
        ClassParams::Stationary { pi, p_min, x0 } => {
            probability("P_min", *p_min)?;
            probability("|chi_0| M_min", *x0)?;
            let min = pi.min();
            if !(min > 0.0) {
                return Err(invalid!("stationary law has an empty pair"));
            }
            let zeta1 = 1.0 - (k as f64 - 1.0) * p_min;
            (1.0 / min, zeta1, *p_min, 0.0, 1.0 / (1.0 - x0), Some(pi.max()))
        }
        ClassParams::Inhomogeneous { m_min, m_max, window } => {
            probability("M_min", *m_min)?;
            probability("M_max", *m_max)?;
            if *window == 0 {
                return Err(invalid!("revisit window must be positive"));
            }
            let w = *window as f64;
            let q = 1.0 - m_min;
            let t = pow(q, 1.0 - 1.0 / w) / (1.0 - pow(q, 1.0 / w));
            let e = core::f64::consts::E;
            (t, *m_max, *m_min, 0.0, e / (e - 1.0), None)
        }
        ClassParams::Markov { t_star, m_min, m_max } => {
            probability("M_min", *m_min)?;
            probability("M_max", *m_max)?;
            let dm = d as f64 * m_min;
            probability("d M_min", dm)?;
            let m_opt = m_max.max(1.0 - m_min);
            let t = t_star * m_max / (m_opt * (1.0 - m_opt));
            (t, *m_max, *m_min, 0.0, 1.0 / (1.0 - dm), None)
        }
        ClassParams::Episodic { horizon, m_min, m_max } => {
            probability("M_min", *m_min)?;
            probability("M_max", *m_max)?;
            let h = *horizon as f64;
            ((d * k) as f64 * h - 1.0, *m_max, *m_min, h * h, h, None)
        }
        ClassParams::Greedy { upsilon, pi_star } => {
            probability("upsilon", *upsilon)?;
            probability("pi_star", *pi_star)?;
            let z = 1.0 / k as f64;
            (1.0 / pi_star, z, z, 0.0, 1.0 / upsilon, None)
        }
    };
    probability("zeta1", zeta1)?;
    probability("zeta2", zeta2)?;
    let dk = (d * k) as f64;
    if !(t > dk / 2.0) {
        return Err(invalid!("T = {} does not exceed dk/2 = {}", t, dk / 2.0));
    }
    Ok(ClassConstants {
        t,
        zeta1,
        zeta2,
        c,
        c_theta,
        c_delta: c + c_theta + 1.0,
        rho_star: rho.unwrap_or(zeta1.max(1.0 - zeta2)),
    })
}

/// Largest `|χ0| · min_{s,l,t∈χ0} M^(l)_{s,t}` over subsets `χ0`, taken over
/// the effective state chain `matrices`.
pub fn best_column_floor(matrices: &[&Matrix]) -> f64 {
    let d = matrices.first().map_or(0, |m| m.cols());
    let mut floors: Vec<f64> = (0..d)
        .map(|t| {
            matrices
                .iter()
                .flat_map(|m| (0..m.rows()).map(move |s| m[(s, t)]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    floors.sort_by(|a, b| b.total_cmp(a));
    floors
        .iter()
        .enumerate()
        .map(|(i, &f)| (i + 1) as f64 * f)
        .fold(0.0, f64::max)
}

/// Derives [`ClassParams`] from a model and a policy.
///
/// Quantities the classes leave to the analyst are filled with the natural
/// choice for these presets: the Markov class uses `T★ = 1 / q_min` with
/// `q_min` the smallest control probability, and the episodic class reads
/// `M_min`, `M_max` off the transition matrices.
pub fn derive_class_params(model: &CmcModel, policy: &LoggingPolicy) -> Result<ClassParams> {
    let (d, k) = (model.d(), model.k());
    policy.validate(d, k)?;
    let mats: Vec<&Matrix> = model.matrices().iter().collect();
    let (m_min, m_max) = (model.min_entry(), model.max_entry());
    Ok(match policy {
        LoggingPolicy::StationaryRandomized { table } => {
            let pi = stationary_distribution(&paired_chain(model, table)?)?;
            let p_min = table.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
            ClassParams::Stationary {
                pi,
                p_min,
                x0: best_column_floor(&mats),
            }
        }
        LoggingPolicy::DeterministicSchedule { revisit_window, .. } => ClassParams::Inhomogeneous {
            m_min,
            m_max,
            window: revisit_window.ok_or_else(|| invalid!("schedule has no revisit window"))?,
        },
        LoggingPolicy::NonStationaryMarkov { tables } => {
            let q_min = tables
                .iter()
                .flat_map(|t| t.as_slice().iter().copied())
                .fold(f64::INFINITY, f64::min);
            if !(q_min > 0.0) {
                return Err(invalid!("a control has probability zero"));
            }
            ClassParams::Markov {
                t_star: 1.0 / q_min,
                m_min,
                m_max,
            }
        }
        LoggingPolicy::Episodic { horizon, .. } => ClassParams::Episodic {
            horizon: *horizon,
            m_min,
            m_max,
        },
        LoggingPolicy::Greedy { upsilon, base } => {
            let LoggingPolicy::StationaryRandomized { table } = &**base else {
                return Err(invalid!("greedy constants need a stationary base table"));
            };
            let mut eff = table.clone();
            for s in 0..d {
                for l in 0..k {
                    eff[(s, l)] = (1.0 - upsilon) * table[(s, l)] + upsilon / k as f64;
                }
            }
            let pi = stationary_distribution(&paired_chain(model, &eff)?)?;
            let pi_min_state = (0..d)
                .map(|s| pi.weights()[s * k..(s + 1) * k].iter().sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            let explored = upsilon * pi_min_state / k as f64;
            let masked = (1.0 - upsilon) / (d * k) as f64;
            ClassParams::Greedy {
                upsilon: *upsilon,
                pi_star: explored.min(masked),
            }
        }
    })
}
