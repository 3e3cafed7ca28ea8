mod common;

use common::curves::check;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scuc::scenario::{reference_scenario, SfocPoint};

#[test]
fn greedy_fill_equals_chord_interpolation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = reference_scenario();
    let mut hulls = 0;
    for dg in &cfg.dgs {
        hulls += usize::from(check(dg, cfg.n_segments, &mut rng));
    }
    // a unit whose fuel rate is convex needs no hull
    let mut convex = cfg.dgs[0].clone();
    convex.sfoc_points = vec![SfocPoint(0.25, 190.0), SfocPoint(0.5, 195.0), SfocPoint(0.75, 205.0), SfocPoint(1.0, 220.0)];
    assert!(!check(&convex, 10, &mut rng));
    for n in [1, 3, 7] {
        check(&cfg.dgs[1], n, &mut rng);
    }
    assert_eq!(hulls, cfg.dgs.len(), "reference curves are all convexified");
}
