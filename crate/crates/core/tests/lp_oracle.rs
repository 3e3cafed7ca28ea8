mod common;

use std::time::Instant;

use common::vertex::{random_feasible_lp, vertex_optimum};
use scuc::solver::{solve_lp, LpStatus};

#[test]
fn random_lps_match_basis_enumeration() {
    let start = Instant::now();
    for seed in 0..50 {
        let p = random_feasible_lp(seed);
        let want = vertex_optimum(&p).expect("generated LPs are feasible");
        let got = solve_lp(&p).unwrap();
        assert_eq!(got.status, LpStatus::Optimal, "seed {seed}");
        let rel = (got.objective - want).abs() / want.abs().max(1.0);
        assert!(rel <= 1e-8, "seed {seed} ({}x{}): {} vs {want}", p.rows.len(), p.n_cols(), got.objective);
        assert!(p.max_violation(&got.x) <= 1e-7, "seed {seed}");
    }
    assert!(start.elapsed().as_secs_f64() < 10.0, "took {:?}", start.elapsed());
}

#[test]
fn oracle_agrees_on_a_hand_example() {
    // min -x - y, x + 2y <= 4, 3x + y <= 6, boxes [0, 5]: optimum at (1.6, 1.2)
    let mut p = scuc::solver::LpProblem::new();
    let x = p.add_col(-1.0, 0.0, 5.0);
    let y = p.add_col(-1.0, 0.0, 5.0);
    p.add_row(vec![(x, 1.0), (y, 2.0)], f64::NEG_INFINITY, 4.0);
    p.add_row(vec![(x, 3.0), (y, 1.0)], f64::NEG_INFINITY, 6.0);
    assert!((vertex_optimum(&p).unwrap() + 2.8).abs() < 1e-12);
    assert!((solve_lp(&p).unwrap().objective + 2.8).abs() < 1e-12);
}
