//! Property tests for the support function and the direction subproblems.

mod common;

use mocg::gap;
use mocg::robust::PolyhedralUncertaintySet;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn set_strategy(n: usize) -> impl Strategy<Value = (PolyhedralUncertaintySet, Vec<f64>, Vec<f64>)> {
    (
        proptest::collection::vec(0.05f64..1.0, n * n),
        0.05f64..0.8,
        proptest::collection::vec(-3.0f64..3.0, n),
        proptest::collection::vec(-3.0f64..3.0, n),
    )
        .prop_filter_map("nonsingular", move |(b, delta, x, y)| {
            let m = DMatrix::from_row_slice(n, n, &b);
            PolyhedralUncertaintySet::new(m, delta)
                .ok()
                .map(|s| (s, x, y))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn support_is_positively_homogeneous((set, x, _) in set_strategy(3), alpha in 0.0f64..4.0) {
        let gx = gap::support_value(&set, &x).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| alpha * v).collect();
        let gax = gap::support_value(&set, &scaled).unwrap();
        let tol = 1e-8 * (1.0 + gx.abs() * (1.0 + alpha));
        prop_assert!((gax - alpha * gx).abs() <= tol, "g(ax)={gax}, a g(x)={}", alpha * gx);
    }

    #[test]
    fn support_is_subadditive((set, x, y) in set_strategy(3)) {
        let gx = gap::support_value(&set, &x).unwrap();
        let gy = gap::support_value(&set, &y).unwrap();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let gxy = gap::support_value(&set, &sum).unwrap();
        prop_assert!(gxy <= gx + gy + 1e-8);
    }

    #[test]
    fn support_grows_with_delta((set, x, _) in set_strategy(3), bump in 0.01f64..0.5) {
        let small = gap::support_value(&set, &x).unwrap();
        let bigger = set.with_delta(set.delta() + bump).unwrap();
        let large = gap::support_value(&bigger, &x).unwrap();
        prop_assert!(small <= large + 1e-10, "g grew smaller with delta: {small} vs {large}");
    }

    #[test]
    fn support_matches_closed_form((set, x, _) in set_strategy(3)) {
        let lp_value = gap::support_value(&set, &x).unwrap();
        let direct = common::support_closed_form(&set, &x);
        prop_assert!((lp_value - direct).abs() <= 1e-7 * (1.0 + direct.abs()));
    }
}

#[test]
fn direction_solutions_respect_their_contracts() {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xD1CE);
    for trial in 0..12 {
        let n = 1 + trial % 3;
        let problem = common::small_robust_instance(&mut rng, n);
        for _ in 0..8 {
            let x: Vec<f64> = (0..n)
                .map(|i| {
                    rng.gen_range(problem.domain().lower()[i]..problem.domain().upper()[i])
                })
                .collect();
            let cg = gap::condg_direction(&problem, &x).unwrap();
            let pg = gap::proxgrad_direction(&problem, &x, 1.0).unwrap();
            for sol in [&cg, &pg] {
                assert!(problem.domain().contains(&sol.p));
                for i in 0..n {
                    assert_eq!(sol.direction[i], sol.p[i] - x[i]);
                }
                assert!(sol.theta <= 1e-9, "theta = {}", sol.theta);
            }
            assert!(cg.theta <= pg.theta + 1e-8);
        }
    }
}
