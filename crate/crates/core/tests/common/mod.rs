//! Random tiny instances shared by the integration tests.

#![allow(dead_code)]

pub mod curves;
pub mod vertex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scuc::loadgen::LoadProfile;
use scuc::scenario::{reference_scenario, InitialUnitState, ScenarioConfig, SfocPoint};

/// Two generators, optional battery, at most three steps and three
/// segments: small enough for exhaustive enumeration.
pub fn tiny_instance(seed: u64) -> (ScenarioConfig, LoadProfile) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = reference_scenario();
    cfg.dgs.truncate(2);
    cfg.horizon = rng.random_range(1..=3);
    cfg.n_segments = rng.random_range(1..=3);
    for dg in &mut cfg.dgs {
        dg.rated_power = rng.random_range(2.0..6.0);
        dg.c_min = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.1..0.3) };
        dg.alpha = rng.random_range(1.05..1.3);
        dg.beta = rng.random_range(0.25..0.5);
        dg.startup_cost = rng.random_range(0.0..300.0);
        dg.min_up_time = 15.0 * rng.random_range(1..=3) as f64;
        dg.min_down_time = 15.0 * rng.random_range(1..=2) as f64;
        dg.ramp_up = rng.random_range(0.05..0.5);
        dg.ramp_down = rng.random_range(0.05..0.5);
        let base = rng.random_range(170.0..200.0);
        let curve = rng.random_range(20.0..80.0);
        dg.sfoc_points = [0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&f: &f64| SfocPoint(f, base + curve * (f - 0.8) * (f - 0.8)))
            .collect();
    }
    cfg.initial_commitment = (0..2)
        .map(|_| InitialUnitState { on: rng.random_bool(0.3), power: 0.0 })
        .collect();
    if rng.random_bool(0.5) {
        cfg.bess = None;
    } else if let Some(bs) = cfg.bess.as_mut() {
        bs.rated_power = rng.random_range(1.0..3.0);
        bs.rated_energy = rng.random_range(1.0..3.0);
        bs.soc_final = bs.soc_initial;
    }
    let cap: f64 = cfg.dgs.iter().map(|d| d.rated_power).sum();
    let loads: Vec<f64> = (0..cfg.horizon).map(|_| rng.random_range(0.5..0.8 * cap)).collect();
    let v: Vec<bool> = (0..cfg.horizon).map(|_| rng.random_bool(0.4)).collect();
    (cfg, LoadProfile::from_loads(&loads, &v))
}
