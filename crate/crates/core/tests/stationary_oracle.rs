//! Stationary laws against a dense eigen-solve.

use cmc_core::matrix::Matrix;
use cmc_core::model::{paired_chain, stationary_distribution};
use cmc_core::presets::{base_model, stationary_table};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Solves `π (P − I) = 0`, `Σ π = 1` by least squares on the stacked system.
fn oracle(p: &Matrix) -> Vec<f64> {
    let n = p.rows();
    let mut a = DMatrix::<f64>::zeros(n + 1, n);
    for r in 0..n {
        for c in 0..n {
            a[(c, r)] = p[(r, c)] - if r == c { 1.0 } else { 0.0 };
        }
    }
    for c in 0..n {
        a[(n, c)] = 1.0;
    }
    let mut b = nalgebra::DVector::<f64>::zeros(n + 1);
    b[n] = 1.0;
    let ata = a.transpose() * &a;
    let atb = a.transpose() * b;
    ata.lu().solve(&atb).unwrap().iter().copied().collect()
}

fn stochastic(n: usize) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(0.05f64..1.0, n * n).prop_map(move |v| {
        let mut m = Matrix::new(n, n, v).unwrap();
        for r in 0..n {
            let row = m.row_mut(r);
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
        m
    })
}

#[test]
fn paired_chain_of_base_model() {
    let p = paired_chain(&base_model(), &stationary_table()).unwrap();
    let pi = stationary_distribution(&p).unwrap();
    for (a, b) in pi.weights().iter().zip(oracle(&p)) {
        assert!((a - b).abs() < 1e-10);
    }
}

proptest! {
    #[test]
    fn power_iteration_matches_eigen_solve(m in (2usize..7).prop_flat_map(stochastic)) {
        let pi = stationary_distribution(&m).unwrap();
        for (a, b) in pi.weights().iter().zip(oracle(&m)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn paired_chain_is_stochastic(m0 in stochastic(3), m1 in stochastic(3), t in stochastic(2)) {
        let model = cmc_core::CmcModel::new(vec![m0, m1]).unwrap();
        // Reuse a 2x2 stochastic draw to build a 3x2 policy table.
        let table = Matrix::from_rows(&[t.row(0).to_vec(), t.row(1).to_vec(), t.row(0).to_vec()]).unwrap();
        let p = paired_chain(&model, &table).unwrap();
        for s in p.row_sums() {
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
