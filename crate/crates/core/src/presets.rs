//! Named model, policy and initial-law combinations used by the experiments
//! and the acceptance suite.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hardness::{block_pair_stationary, build_block_instance, BlockParams};
use crate::matrix::Matrix;
use crate::model::{paired_chain, stationary_distribution, CmcModel, Distribution};
use crate::policy::{EpisodeLaw, LoggingPolicy, Schedule};
use crate::simulate::InitialLaw;

/// A ready-to-run instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub model: CmcModel,
    pub policy: LoggingPolicy,
    pub init: InitialLaw,
}

/// Every name accepted by [`preset`].
pub const PRESET_NAMES: &[&str] = &[
    "stationary",
    "inhomogeneous",
    "markov",
    "episodic",
    "greedy",
    "block",
    "counterexample",
    "iid",
    "small-stationary",
];

/// The five policy classes on the shared base model.
pub const CLASS_PRESETS: &[&str] = &["stationary", "inhomogeneous", "markov", "episodic", "greedy"];

fn rows(r: &[&[f64]]) -> Matrix {
    Matrix::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).expect("preset rows are rectangular")
}

/// Positive `3 × 3` model with two controls shared by the class presets.
pub fn base_model() -> CmcModel {
    CmcModel::new(vec![
        rows(&[&[0.5, 0.3, 0.2], &[0.2, 0.5, 0.3], &[0.3, 0.2, 0.5]]),
        rows(&[&[0.2, 0.4, 0.4], &[0.4, 0.2, 0.4], &[0.4, 0.4, 0.2]]),
    ])
    .expect("base model is stochastic")
}

pub fn stationary_table() -> Matrix {
    rows(&[&[0.5, 0.5], &[0.7, 0.3], &[0.4, 0.6]])
}

pub fn greedy_base_table() -> Matrix {
    rows(&[&[0.9, 0.1], &[0.1, 0.9], &[0.8, 0.2]])
}

/// Tables `P^(i)` whose first control probability sweeps `0.5 ± 0.3` over 64
/// steps; the last table then repeats.
fn markov_tables() -> Vec<Matrix> {
    (0..64)
        .map(|i| {
            let x = 0.3 * libm::sin(i as f64 * 0.7);
            rows(&[
                &[0.5 + x, 0.5 - x],
                &[0.5 - x, 0.5 + x],
                &[0.4 + x / 2.0, 0.6 - x / 2.0],
            ])
        })
        .collect()
}

/// Appendix block instance with `ξ^(l) = 1`.
pub fn block_params() -> BlockParams {
    BlockParams::all_ones(3, 2, 0.3, 0.01)
}

fn class_preset(name: &str) -> Result<Preset> {
    let model = base_model();
    let (d, k) = (model.d(), model.k());
    let policy = match name {
        "stationary" => LoggingPolicy::StationaryRandomized {
            table: stationary_table(),
        },
        "inhomogeneous" => LoggingPolicy::DeterministicSchedule {
            schedule: Schedule::Periodic(vec![0, 1]),
            revisit_window: Some(3),
        },
        "markov" => LoggingPolicy::NonStationaryMarkov {
            tables: markov_tables(),
        },
        "episodic" => LoggingPolicy::Episodic {
            horizon: 5,
            within: EpisodeLaw::Sticky {
                table: stationary_table(),
                stick: 0.5,
            },
            restart: None,
        },
        "greedy" => LoggingPolicy::Greedy {
            upsilon: 0.3,
            base: alloc::boxed::Box::new(LoggingPolicy::StationaryRandomized {
                table: greedy_base_table(),
            }),
        },
        _ => return Err(invalid!("unknown preset {}", name)),
    };
    Ok(Preset {
        name: name.into(),
        model,
        policy,
        init: InitialLaw::uniform_pairs(d, k),
    })
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<Preset> {
    match name {
        "stationary" | "inhomogeneous" | "markov" | "episodic" | "greedy" => {
            let mut p = class_preset(name)?;
            if let LoggingPolicy::StationaryRandomized { table } = &p.policy {
                p.init = InitialLaw::Pairs(stationary_distribution(&paired_chain(&p.model, table)?)?);
            }
            Ok(p)
        }
        "block" => {
            let params = block_params();
            let (model, policy) = build_block_instance(&params)?;
            Ok(Preset {
                name: name.into(),
                model,
                policy,
                init: InitialLaw::Pairs(block_pair_stationary(&params)?),
            })
        }
        "counterexample" => Ok(Preset {
            name: name.into(),
            model: counterexample_model(),
            policy: LoggingPolicy::DeterministicSchedule {
                schedule: Schedule::Periodic(vec![0, 1]),
                revisit_window: None,
            },
            init: InitialLaw::States(Distribution::uniform(4)),
        }),
        "iid" => {
            let row = [0.25, 0.75];
            let model = CmcModel::new(vec![rows(&[&row, &row]), rows(&[&row, &row])])?;
            Ok(Preset {
                name: name.into(),
                model,
                policy: LoggingPolicy::StationaryRandomized {
                    table: rows(&[&[0.5, 0.5], &[0.5, 0.5]]),
                },
                init: InitialLaw::States(Distribution::new(row.to_vec())?),
            })
        }
        "small-stationary" => Ok(Preset {
            name: name.into(),
            model: small_model(),
            policy: LoggingPolicy::StationaryRandomized {
                table: rows(&[&[0.5, 0.5], &[0.25, 0.75]]),
            },
            init: InitialLaw::uniform_pairs(2, 2),
        }),
        _ => Err(invalid!("unknown preset {}; known: {}", name, PRESET_NAMES.join(", "))),
    }
}

/// Four states in two halves. Control 0 keeps the half, control 1 swaps
/// it; within the target half the state is uniform. Under alternating
/// controls the half of `X_j` is a function of the half of `X_i`.
pub fn counterexample_model() -> CmcModel {
    let same = rows(&[
        &[0.5, 0.5, 0.0, 0.0],
        &[0.5, 0.5, 0.0, 0.0],
        &[0.0, 0.0, 0.5, 0.5],
        &[0.0, 0.0, 0.5, 0.5],
    ]);
    let swap = rows(&[
        &[0.0, 0.0, 0.5, 0.5],
        &[0.0, 0.0, 0.5, 0.5],
        &[0.5, 0.5, 0.0, 0.0],
        &[0.5, 0.5, 0.0, 0.0],
    ]);
    CmcModel::new(vec![same, swap]).expect("halves are stochastic")
}

/// Two states, two controls, dyadic entries so laws are exact in binary.
pub fn small_model() -> CmcModel {
    CmcModel::new(vec![
        rows(&[&[0.25, 0.75], &[0.5, 0.5]]),
        rows(&[&[0.875, 0.125], &[0.375, 0.625]]),
    ])
    .expect("small model is stochastic")
}
