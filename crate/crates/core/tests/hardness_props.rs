//! Hard-instance families: validity, distances, marginals and touring times.

use cmc_core::exact::DEFAULT_PATH_CAP;
use cmc_core::hardness::{
    block_pair_stationary, build_block_instance, build_sigma_instance, expected_touring_time, gilbert_varshamov_set,
    hamming, sigma_stationary, touring_time, BlockParams, SigmaParams,
};
use cmc_core::mixing::PathLaw;
use cmc_core::model::{stationary_distribution, validate_model};
use cmc_core::rng::child_seed;
use cmc_core::simulate::simulate;
use cmc_core::InitialLaw;
use proptest::prelude::*;

fn sigma_params() -> impl Strategy<Value = SigmaParams> {
    (1usize..6).prop_flat_map(|h| {
        let d = 2 * h;
        (
            0.001f64..(1.0 / (d as f64 + 1.0) - 1e-3),
            0.0f64..(1.0 / 32.0 - 1e-6),
            proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], h),
        )
            .prop_map(move |(p_star, epsilon, sigma)| SigmaParams {
                d,
                p_star,
                epsilon,
                sigma,
            })
    })
}

fn block_params() -> impl Strategy<Value = BlockParams> {
    (1usize..4, 1usize..4).prop_flat_map(|(b, k)| {
        (
            0.01f64..(31.0 / 64.0 - 1e-3),
            0.0f64..(1.0 / 32.0 - 1e-6),
            proptest::collection::vec(proptest::collection::vec(0u8..2, b), k),
        )
            .prop_map(move |(iota, epsilon, xi)| BlockParams {
                d: 3 * b,
                k,
                iota,
                epsilon,
                xi,
            })
    })
}

proptest! {
    #[test]
    fn sigma_family_is_valid_and_closed_form_holds(p in sigma_params()) {
        let m = build_sigma_instance(&p).unwrap();
        validate_model(&m).unwrap();
        let num = stationary_distribution(m.matrix(0)).unwrap();
        for (a, b) in num.weights().iter().zip(sigma_stationary(&p).unwrap().weights()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn block_family_is_valid(p in block_params()) {
        let (m, policy) = build_block_instance(&p).unwrap();
        validate_model(&m).unwrap();
        policy.validate(p.d, p.k).unwrap();
        block_pair_stationary(&p).unwrap();
    }
}

#[test]
fn one_flip_in_sigma_moves_the_last_row_by_64_eps_over_d() {
    let base = SigmaParams {
        d: 8,
        p_star: 0.05,
        epsilon: 0.01,
        sigma: vec![1, 1, -1, 1],
    };
    let mut flip = base.clone();
    flip.sigma[2] = 1;
    let a = build_sigma_instance(&base).unwrap();
    let b = build_sigma_instance(&flip).unwrap();
    let dist = a.matrix(0).inf_norm_distance(b.matrix(0)).unwrap();
    assert!((dist - 64.0 * 0.01 / 8.0).abs() < 1e-14);
}

#[test]
fn first_block_has_probability_iota_at_every_step() {
    let params = BlockParams {
        d: 3,
        k: 2,
        iota: 0.3,
        epsilon: 0.02,
        xi: vec![vec![1], vec![0]],
    };
    let (model, policy) = build_block_instance(&params).unwrap();
    let init = InitialLaw::Pairs(block_pair_stationary(&params).unwrap());
    let law = PathLaw::from_model(&model, &policy, &init, 4, DEFAULT_PATH_CAP).unwrap();
    for i in 0..=4 {
        let marg = law.marginal(i);
        let first: f64 = marg[..2].iter().sum();
        assert!((first - 0.3).abs() < 1e-12, "step {i}: {first}");
    }
}

#[test]
fn gv_codes_respect_distance() {
    for (n, dist) in [(8, 1), (12, 3), (16, 2)] {
        let c = gilbert_varshamov_set(n, dist).unwrap();
        assert!(c.target_met);
        for (i, a) in c.codewords.iter().enumerate() {
            for b in &c.codewords[i + 1..] {
                assert!(hamming(a, b) >= dist);
            }
        }
    }
}

#[test]
fn mean_touring_time_is_the_coupon_collector_mean() {
    let params = BlockParams::all_ones(3, 2, 0.3, 0.01);
    let (model, policy) = build_block_instance(&params).unwrap();
    let init = InitialLaw::Pairs(block_pair_stationary(&params).unwrap());
    let reps = 100_000;
    let mut total = 0usize;
    for r in 0..reps {
        let t = simulate(&model, &policy, &init, 300, child_seed(11, r)).unwrap();
        total += touring_time(&t, 3, 2).value.expect("covered within 300 steps");
    }
    let mean = total as f64 / reps as f64;
    let want = expected_touring_time(3, 2, 0.3);
    assert!((mean / want - 1.0).abs() < 0.05, "{mean} vs {want}");
}
