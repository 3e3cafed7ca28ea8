mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scuc::fuelcurve::build_curves;
use scuc::loadgen::LoadProfile;
use scuc::milp::{build_model, extract_schedule, Schedule, ScheduleStep};
use scuc::report::{compute_report, LoadFactorMode};
use scuc::scenario::ScenarioConfig;
use scuc::solver::{solve_milp, MipOptions, MipStatus};
use scuc::verify::{brute_force_optimum, check_feasibility, check_security};

#[test]
fn exact_search_matches_enumeration() {
    let opts = MipOptions { gap_tol: 0.0, ..Default::default() };
    let mut finite = 0;
    for seed in 0..40 {
        let (cfg, profile) = common::tiny_instance(seed);
        let curves = build_curves(&cfg.dgs, cfg.n_segments).unwrap();
        let model = build_model(&cfg, &curves, &profile).unwrap();
        let oracle = brute_force_optimum(&cfg, &profile).unwrap();
        let result = solve_milp(&model, &opts).unwrap();
        if oracle.is_infinite() {
            assert_eq!(result.status, MipStatus::Infeasible, "seed {seed}");
            continue;
        }
        finite += 1;
        let obj = result.objective().unwrap_or(f64::NAN);
        assert!((obj - oracle).abs() <= 1e-6 * oracle.abs().max(1.0), "seed {seed}: {obj} vs {oracle}");
        let sched = extract_schedule(&model, &result.incumbent.unwrap().x).unwrap();
        assert!(check_feasibility(&sched, &cfg, &profile).passed(), "seed {seed}");
        assert!(check_security(&sched, &cfg, &profile).passed(), "seed {seed}");
    }
    assert!(finite >= 20, "only {finite} feasible instances");
}

/// Random commitment with load shared in proportion to rated power and the
/// battery idle.
fn random_schedule(cfg: &ScenarioConfig, profile: &LoadProfile, rng: &mut ChaCha8Rng) -> Schedule {
    let n = cfg.n_dgs();
    let mut prev: Vec<bool> = (0..n).map(|i| cfg.initial_state(i).on).collect();
    let soc = cfg.bess.as_ref().map(|b| b.soc_initial);
    let steps = (0..cfg.horizon)
        .map(|t| {
            let z: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
            let u: Vec<bool> = (0..n).map(|i| z[i] && !prev[i]).collect();
            prev = z.clone();
            let online: f64 = (0..n).filter(|&i| z[i]).map(|i| cfg.dgs[i].rated_power).sum();
            let p_dg = (0..n)
                .map(|i| if z[i] { profile.load(t) * cfg.dgs[i].rated_power / online } else { 0.0 })
                .collect();
            ScheduleStep {
                p_dg,
                delta: Vec::new(),
                z,
                u,
                p_charge: 0.0,
                p_discharge: 0.0,
                soc,
                z_charge: false,
                z_discharge: false,
                p_load: profile.load(t),
                v: profile.v(t),
            }
        })
        .collect();
    Schedule {
        dg_ids: cfg.dgs.iter().map(|d| d.id.clone()).collect(),
        has_bess: cfg.bess.is_some(),
        dt: cfg.dt,
        steps,
    }
}

#[test]
fn enumeration_bounds_every_feasible_schedule() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut feasible = 0;
    for seed in 0..40 {
        let (cfg, profile) = common::tiny_instance(seed);
        let oracle = brute_force_optimum(&cfg, &profile).unwrap();
        let curves = build_curves(&cfg.dgs, cfg.n_segments).unwrap();
        for _ in 0..50 {
            let sched = random_schedule(&cfg, &profile, &mut rng);
            if !check_feasibility(&sched, &cfg, &profile).passed() || !check_security(&sched, &cfg, &profile).passed() {
                continue;
            }
            feasible += 1;
            let cost = compute_report(&sched, &cfg, &curves, None, LoadFactorMode::UnitStep).unwrap().total_cost;
            assert!(oracle <= cost + 1e-6 * cost.abs().max(1.0), "seed {seed}: oracle {oracle} above {cost}");
        }
    }
    assert!(feasible >= 20, "only {feasible} feasible random schedules");
}
