//! Independent evaluation of linearized fuel curves.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use scuc::fuelcurve::{fit_sfoc, linearize};
use scuc::scenario::DieselGenSpec;

/// Lower convex hull of the breakpoint samples at `p`, by brute force over
/// every bracketing pair.
fn hull_at(xs: &[f64], ys: &[f64], p: f64) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..xs.len() {
        for j in i..xs.len() {
            if xs[i] <= p && p <= xs[j] {
                let v = if j == i { ys[i] } else { ys[i] + (ys[j] - ys[i]) * (p - xs[i]) / (xs[j] - xs[i]) };
                best = best.min(v);
            }
        }
    }
    best
}

pub fn check(dg: &DieselGenSpec, n: usize, rng: &mut ChaCha8Rng) -> bool {
    let quad = fit_sfoc(&dg.sfoc_points).unwrap();
    let curve = linearize(&quad, dg, n).unwrap();
    assert!(curve.segment_slopes.windows(2).all(|w| w[0] <= w[1]), "{}", dg.id);
    let xs = curve.breakpoints();
    let ys: Vec<f64> = xs.iter().map(|&p| quad.fuel_rate(p, dg.rated_power)).collect();
    for _ in 0..100 {
        let p = rng.random_range(0.0..=dg.rated_power);
        let want = if curve.convexified {
            hull_at(&xs, &ys, p)
        } else {
            // plain chord interpolation between neighbouring breakpoints
            let k = xs.windows(2).position(|w| p <= w[1]).unwrap();
            ys[k] + (ys[k + 1] - ys[k]) * (p - xs[k]) / (xs[k + 1] - xs[k])
        };
        let got = curve.eval(p);
        assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{} at {p}: {got} vs {want}", dg.id);
    }
    curve.convexified
}
