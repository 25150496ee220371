use nalgebra::DMatrix;
use panto_core::linalg::{lyapunov_residual, solve_lyapunov, spectral_abscissa, spectral_norm, sym_eigenvalues};
use panto_core::DenseMatrix;
use proptest::prelude::*;

fn to_na(m: &DenseMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn na_abscissa(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

fn matrix(d: usize) -> impl Strategy<Value = DenseMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, d * d).prop_map(move |v| DenseMatrix::new(d, d, v).unwrap())
}

fn hurwitz() -> impl Strategy<Value = DenseMatrix<f64>> {
    (1usize..=8, 0.05f64..2.0)
        .prop_flat_map(|(d, margin)| (matrix(d), Just(margin)))
        .prop_map(|(m, margin)| {
            let shift = na_abscissa(&to_na(&m)) + margin;
            &m - &DenseMatrix::identity(m.rows()).scale(shift)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lyapunov_matches_kronecker_oracle(a in hurwitz()) {
        let c = solve_lyapunov(&a).unwrap();
        prop_assert!(lyapunov_residual(&a, &c) <= 1e-10);
        // independent solve of (I ⊗ Aᵀ + Aᵀ ⊗ I) vec(C) = -vec(I)
        let d = a.rows();
        let at = to_na(&a).transpose();
        let eye = DMatrix::<f64>::identity(d, d);
        let k = eye.kronecker(&at) + at.kronecker(&eye);
        let rhs = -DMatrix::<f64>::identity(d, d).reshape_generic(nalgebra::Dyn(d * d), nalgebra::Const::<1>);
        let sol = k.lu().solve(&rhs).unwrap();
        let scale = sol.amax().max(1.0);
        for i in 0..d {
            for j in 0..d {
                prop_assert!((c[(i, j)] - sol[j * d + i]).abs() <= 1e-9 * scale);
            }
        }
        prop_assert!(c.asymmetry() == 0.0);
    }

    #[test]
    fn symmetric_eigenvalues_match(m in (1usize..=8).prop_flat_map(matrix)) {
        let s = &m + &m.transpose();
        let mut ours = sym_eigenvalues(&s).unwrap();
        ours.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut theirs: Vec<f64> = to_na(&s).symmetric_eigen().eigenvalues.iter().copied().collect();
        theirs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let scale = s.frobenius_norm().max(1.0);
        for (x, y) in ours.iter().zip(&theirs) {
            prop_assert!((x - y).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn spectral_norm_matches_svd(m in (1usize..=8).prop_flat_map(matrix)) {
        let ours = spectral_norm(&m).unwrap();
        let theirs = to_na(&m).singular_values().max();
        prop_assert!((ours - theirs).abs() <= 1e-10 * theirs.max(1.0));
    }

    #[test]
    fn abscissa_matches_schur(m in (1usize..=8).prop_flat_map(matrix)) {
        let ours = spectral_abscissa(&m).unwrap();
        let theirs = na_abscissa(&to_na(&m));
        prop_assert!((ours - theirs).abs() <= 1e-8 * m.frobenius_norm().max(1.0));
    }

    #[test]
    fn lyapunov_solution_positive_definite(a in hurwitz()) {
        let c = solve_lyapunov(&a).unwrap();
        let ev = sym_eigenvalues(&c).unwrap();
        prop_assert!(ev.iter().all(|v| *v > 0.0));
    }
}

#[test]
fn single_precision_lyapunov() {
    let a = DenseMatrix::<f32>::from_rows(&[vec![-1.0, 0.3], vec![0.0, -2.0]]).unwrap();
    let c = solve_lyapunov(&a).unwrap();
    assert!(lyapunov_residual(&a, &c) <= 1e-4);
}
