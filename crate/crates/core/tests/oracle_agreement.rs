use gtrs_core::oracle::{accuracy, dense_solve};
use gtrs_core::probgen::{generate, CaseKind, ClassKind, GenSpec};
use gtrs_core::{solve, SolverConfig};

fn suite(sizes: &[usize], reps: u64) -> Vec<GenSpec> {
    let mut out = Vec::new();
    for &n in sizes {
        for cond in [10.0, 100.0] {
            for case in CaseKind::ALL {
                for class in [ClassKind::Class1, ClassKind::Class2] {
                    for r in 0..reps {
                        let seed = 1000 * n as u64 + 17 * r + if cond > 50.0 { 7 } else { 0 };
                        out.push(GenSpec::new(
                            n,
                            (10.0 / n as f64).min(1.0),
                            cond,
                            case,
                            class,
                            seed,
                        ));
                    }
                }
            }
        }
    }
    out
}

#[test]
fn sparse_solver_agrees_with_dense_reference() {
    let reps = 9;
    let cfg = SolverConfig::default();
    let mut failures = Vec::new();
    for recipe in suite(&[50], reps) {
        let art = generate(&recipe).unwrap();
        let out = solve(&art.problem, &cfg).unwrap();
        let reference = dense_solve(&art.problem).unwrap();
        let (acc, _) = accuracy(out.q_star, reference.q_star);
        let same = out.case == reference.case || reference.ambiguous;
        if acc.abs() > 1e-6 || !same || !out.success {
            failures.push(format!(
                "n={} cond={} {} {:?} seed={}: acc={acc:e} case={} ref={} amb={} kkt={:e}",
                recipe.n,
                recipe.cond,
                recipe.case_kind,
                recipe.class_kind,
                recipe.seed,
                out.case,
                reference.case,
                reference.ambiguous,
                out.kkt_metric
            ));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
