use gtrs_core::gtrs::{eval_phi, multiplier_interval, phi_derivative, Context};
use gtrs_core::oracle::{accuracy, dense_solve};
use gtrs_core::probgen::{generate, CaseKind, ClassKind, GenSpec};
use gtrs_core::{solve, SolverConfig};
use proptest::prelude::*;

fn case_kind() -> impl Strategy<Value = CaseKind> {
    prop_oneof![Just(CaseKind::Easy), Just(CaseKind::Hard1), Just(CaseKind::Hard2)]
}

fn class_kind() -> impl Strategy<Value = ClassKind> {
    prop_oneof![Just(ClassKind::Class1), Just(ClassKind::Class2)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solution_matches_reference_and_satisfies_kkt(
        n in 3usize..25,
        cond in prop_oneof![Just(10.0), Just(100.0)],
        case in case_kind(),
        class in class_kind(),
        seed in any::<u64>(),
    ) {
        let art = generate(&GenSpec::new(n, 0.5, cond, case, class, seed)).unwrap();
        let out = solve(&art.problem, &SolverConfig::default()).unwrap();
        let reference = dense_solve(&art.problem).unwrap();
        let (acc, _) = accuracy(out.q_star, reference.q_star);
        prop_assert!(acc.abs() < 1e-6, "accuracy {acc:e}");
        prop_assert!(out.success, "kkt {:e}", out.kkt_metric);
        prop_assert!(out.kkt_metric < 1e-8);
        if !reference.ambiguous {
            prop_assert_eq!(out.case, reference.case);
        }
    }

    #[test]
    fn secular_function_decreases_with_matching_derivative(
        n in 3usize..20,
        class in class_kind(),
        seed in any::<u64>(),
        t1 in 0.05f64..0.95,
        t2 in 0.05f64..0.95,
    ) {
        let art = generate(&GenSpec::new(n, 0.5, 10.0, CaseKind::Easy, class, seed)).unwrap();
        let cfg = SolverConfig::default();
        let ctx = Context::new(&art.problem, &cfg);
        let (iv, _, _) = multiplier_interval(&ctx).unwrap();
        let (lo, hi) = iv.bounds();
        let lo = if lo.is_finite() { lo } else { art.problem.lambda_hat - 1.0 };
        let hi = if hi.is_finite() { hi } else { art.problem.lambda_hat + 1.0 };
        let (l1, l2) = (lo + t1.min(t2) * (hi - lo), lo + t1.max(t2) * (hi - lo));
        let e1 = eval_phi(&ctx, l1).unwrap();
        let e2 = eval_phi(&ctx, l2).unwrap();
        let scale = 1.0 + e1.phi.abs() + e2.phi.abs();
        prop_assert!(e2.phi <= e1.phi + 1e-6 * scale);
        let d = phi_derivative(&ctx, &e1).unwrap();
        prop_assert!(d <= 0.0);
    }
}
