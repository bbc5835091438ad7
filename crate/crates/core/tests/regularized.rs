use gtrs_core::gtrs::{compute_endpoint, eval_phi, regularized_solve, Context, Regularizer, Side};
use gtrs_core::oracle::to_dense;
use gtrs_core::probgen::{generate, CaseKind, ClassKind, GenSpec};
use gtrs_core::sparse::LinearOperator;
use gtrs_core::SolverConfig;
use nalgebra::{DMatrix, DVector};

#[test]
fn regularized_path_matches_dense_solve_near_endpoint() {
    let cfg = SolverConfig::default();
    for seed in 0..8 {
        let class = if seed % 2 == 0 { ClassKind::Class1 } else { ClassKind::Class2 };
        let art = generate(&GenSpec::new(6, 1.0, 10.0, CaseKind::Hard1, class, seed)).unwrap();
        let prob = &art.problem;
        let ctx = Context::new(prob, &cfg);
        let ep = compute_endpoint(&ctx, Side::Upper).unwrap();
        let hat = eval_phi(&ctx, prob.lambda_hat).unwrap();
        let reg = Regularizer::new(&ctx, &ep, &hat.x);

        let lambda = ep.value - 1e-7 * ep.value.abs().max(1.0);
        let (x, _) = regularized_solve(&ctx, lambda, &reg).unwrap();
        let m = to_dense(&prob.q_mat) + to_dense(&prob.g_mat) * lambda;
        let rhs = -DVector::from_column_slice(&prob.shifted_linear(lambda));
        let direct = m.lu().solve(&rhs).unwrap();
        let err = (DVector::from_column_slice(&x) - &direct).norm() / direct.norm();
        assert!(err < 1e-8, "seed {seed}: relative error {err:e}");

        let op = reg.operator(&ctx, ep.value);
        let mut cols = DMatrix::zeros(6, 6);
        for j in 0..6 {
            let mut e = vec![0.0; 6];
            e[j] = 1.0;
            cols.set_column(j, &DVector::from_vec(op.apply_vec(&e)));
        }
        let min = cols.symmetric_eigen().eigenvalues.min();
        assert!(min > 0.0, "seed {seed}: min eigenvalue {min:e}");
    }
}
