mod common;

use common::checks::{bound_ratio, gradient_errors, hessian_ratio, oracle_equivalence};

#[test]
fn oracle_equivalence_on_random_instances() {
    let (sim, roles) = oracle_equivalence(101, 8);
    assert!(sim < 1e-10, "simulate vs oracle {sim:e}");
    assert!(roles < 1e-10, "object vs window form {roles:e}");
}

#[test]
fn gradients_match_finite_differences() {
    for (name, err) in gradient_errors(102, 4) {
        assert!(err < 1e-6, "{name}: relative error {err:e}");
    }
}

#[test]
fn analytic_bounds_dominate_dense_norms() {
    let r = bound_ratio(103, 12);
    assert!(r <= 1.0 + 1e-12, "ratio {r}");
}

#[test]
fn second_differences_respect_the_hessian_bound() {
    let r = hessian_ratio(104, 60);
    assert!(r <= 1.0, "ratio {r}");
}
