mod common;

#[test]
fn analytic_gradient_matches_central_differences() {
    for seed in 0..25 {
        let check = common::gradient_check(seed, 1e-5);
        assert!(
            check.max_rel_error < 1e-4,
            "seed {seed}: relative error {} over {} weights",
            check.max_rel_error,
            check.weights
        );
    }
}
