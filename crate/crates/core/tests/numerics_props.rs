use mfbma::numerics::{cholesky_spd, JitterSchedule};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn spd(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let g = DMatrix::from_row_slice(n, n, &entries[..n * n]);
    g.transpose() * &g + DMatrix::identity(n, n) * n as f64
}

fn cofactor_det(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 1 {
        return m[(0, 0)];
    }
    (0..n)
        .map(|j| {
            let minor = m.clone().remove_row(0).remove_column(j);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[(0, j)] * cofactor_det(&minor)
        })
        .sum()
}

fn matrix_strategy(max_n: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| (Just(n), prop::collection::vec(-1.0f64..1.0, n * n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reconstruction_and_solve((n, e) in matrix_strategy(20), b in prop::collection::vec(-5.0f64..5.0, 20)) {
        let a = spd(n, &e);
        let f = cholesky_spd(&a, &JitterSchedule::default()).unwrap();
        prop_assert_eq!(f.jitter_used(), 0.0);
        let l = f.lower_factor();
        let err = (&l * l.transpose() - &a).norm() / a.norm();
        prop_assert!(err <= 1e-10, "reconstruction {err}");
        let rhs = nalgebra::DVector::from_column_slice(&b[..n]);
        let x = nalgebra::DVector::from_vec(f.solve_vec(&b[..n]).unwrap());
        let res = (&a * &x - &rhs).norm() / rhs.norm().max(1e-300);
        prop_assert!(res <= 1e-9, "solve residual {res}");
    }

    #[test]
    fn log_det_matches_cofactor_expansion((n, e) in matrix_strategy(4)) {
        let a = spd(n, &e);
        let f = cholesky_spd(&a, &JitterSchedule::default()).unwrap();
        let det = cofactor_det(&a);
        prop_assert!((f.log_det().exp() - det).abs() <= 1e-9 * det);
    }
}
