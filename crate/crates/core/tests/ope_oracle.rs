//! Policy evaluation against independent linear algebra.

use cmc_core::matrix::Matrix;
use cmc_core::ope::{compose_policy, perturbation_bound, plug_in_value, solve_value, OpeProblem};
use cmc_core::CmcModel;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn stochastic(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(0.0f64..1.0, rows * cols).prop_map(move |v| {
        let mut m = Matrix::new(rows, cols, v).unwrap();
        for r in 0..rows {
            let row = m.row_mut(r);
            let s: f64 = row.iter().sum();
            if s == 0.0 {
                row.fill(1.0 / cols as f64);
            } else {
                row.iter_mut().for_each(|x| *x /= s);
            }
        }
        m
    })
}

fn nalgebra_value(m: &Matrix, g: &[f64], alpha: f64) -> Vec<f64> {
    let n = g.len();
    let a = DMatrix::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 } - alpha * m[(r, c)]);
    a.lu()
        .solve(&DVector::from_column_slice(g))
        .unwrap()
        .iter()
        .copied()
        .collect()
}

fn neumann_series(m: &Matrix, g: &[f64], alpha: f64, terms: usize) -> Vec<f64> {
    let mut term = g.to_vec();
    let mut sum = g.to_vec();
    for _ in 1..=terms {
        term = m.mul_vec(&term).iter().map(|x| alpha * x).collect();
        sum.iter_mut().zip(&term).for_each(|(s, t)| *s += t);
    }
    sum
}

#[test]
fn random_instance_matches_truncated_series() {
    let m = Matrix::from_rows(&[
        vec![0.1, 0.2, 0.3, 0.2, 0.2],
        vec![0.5, 0.1, 0.1, 0.2, 0.1],
        vec![0.0, 0.0, 0.5, 0.5, 0.0],
        vec![0.3, 0.3, 0.1, 0.1, 0.2],
        vec![0.2, 0.2, 0.2, 0.2, 0.2],
    ])
    .unwrap();
    let g = [1.0, -0.5, 2.0, 0.0, 0.3];
    let v = solve_value(&OpeProblem {
        m: m.clone(),
        g: g.to_vec(),
        alpha: 0.8,
    })
    .unwrap()
    .v;
    for (a, b) in v.iter().zip(neumann_series(&m, &g, 0.8, 200)) {
        assert!((a - b).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn solve_matches_lu_and_bound_dominates(
        (m, m_hat, g) in (1usize..9).prop_flat_map(|d| (stochastic(d, d), stochastic(d, d), proptest::collection::vec(-5.0f64..5.0, d))),
        alpha in 0.01f64..0.9,
    ) {
        let v = solve_value(&OpeProblem { m: m.clone(), g: g.clone(), alpha }).unwrap();
        prop_assert!(v.residual <= 1e-10);
        for (a, b) in v.v.iter().zip(nalgebra_value(&m, &g, alpha)) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
        let vh = plug_in_value(&m_hat, &g, alpha, &[]).unwrap();
        let err = v.v.iter().zip(&vh.solution.v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= perturbation_bound(&m, &m_hat, &g, alpha).unwrap() + 1e-12);
    }

    #[test]
    fn composed_rows_are_convex_combinations(
        m0 in stochastic(4, 4), m1 in stochastic(4, 4), m2 in stochastic(4, 4),
        pi in stochastic(4, 3),
        cost in proptest::collection::vec(-1.0f64..1.0, 12),
    ) {
        let model = CmcModel::new(vec![m0.clone(), m1.clone(), m2.clone()]).unwrap();
        let cost = Matrix::new(4, 3, cost).unwrap();
        let p = compose_policy(&model, &pi, &cost, 0.5).unwrap();
        let ms = [&m0, &m1, &m2];
        for s in 0..4 {
            let mut g = 0.0;
            for t in 0..4 {
                let mut x = 0.0;
                for (l, ml) in ms.iter().enumerate() {
                    x += pi[(s, l)] * ml[(s, t)];
                }
                prop_assert!((p.m[(s, t)] - x).abs() < 1e-14);
            }
            for l in 0..3 {
                g += pi[(s, l)] * cost[(s, l)];
            }
            prop_assert!((p.g[s] - g).abs() < 1e-14);
            prop_assert!((p.m.row(s).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
