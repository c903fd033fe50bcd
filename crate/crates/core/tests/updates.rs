mod support;

use support::checks::{b3_fft_vs_dense, sylvester_residual, update_optimality};

#[test]
fn every_update_satisfies_its_optimality_condition() {
    for (name, worst) in update_optimality(25, 1) {
        assert!(worst <= 1e-8, "{name}: {worst:e}");
    }
}

#[test]
fn fourier_b3_solve_matches_dense() {
    let worst = b3_fft_vs_dense(5, 2);
    assert!(worst <= 1e-8, "{worst:e}");
}

#[test]
fn sylvester_solution_has_small_residual() {
    let worst = sylvester_residual(50, 3);
    assert!(worst <= 1e-10, "{worst:e}");
}
