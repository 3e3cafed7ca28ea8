mod common;

use std::time::Instant;

use scuc::fuelcurve::build_curves;
use scuc::loadgen::reference_profile;
use scuc::milp::{build_model, extract_schedule, Domain};
use scuc::report::{compute_report, LoadFactorMode};
use scuc::scenario::reference_scenario;
use scuc::solver::{read_mps, solve_milp, write_mps, MipOptions};

fn exact() -> MipOptions {
    MipOptions { gap_tol: 0.0, ..Default::default() }
}

#[test]
fn report_cost_reproduces_the_objective() {
    let mut checked = 0;
    for seed in 0..30 {
        let (cfg, profile) = common::tiny_instance(seed);
        let curves = build_curves(&cfg.dgs, cfg.n_segments).unwrap();
        let model = build_model(&cfg, &curves, &profile).unwrap();
        let result = solve_milp(&model, &exact()).unwrap();
        let Some(inc) = &result.incumbent else { continue };
        let sched = extract_schedule(&model, &inc.x).unwrap();
        let report = compute_report(&sched, &cfg, &curves, Some(&result), LoadFactorMode::UnitStep).unwrap();
        assert!(report.objective_mismatch().unwrap() <= 1e-6, "seed {seed}: {} vs {}", report.total_cost, inc.objective);
        assert_eq!(report.total_co2, report.total_fuel * cfg.co2_factor);
        let alpha_max = cfg.dgs.iter().map(|d| d.alpha).fold(0.0, f64::max);
        if let Some(lf) = report.lf_avg {
            assert!(lf > 0.0 && lf <= alpha_max, "seed {seed}: {lf}");
        }
        checked += 1;
    }
    assert!(checked >= 15);
}

#[test]
fn battery_never_raises_the_optimum() {
    let mut compared = 0;
    for seed in 0..120 {
        let (cfg, profile) = common::tiny_instance(seed);
        if cfg.bess.is_none() {
            continue;
        }
        let solve = |c: &scuc::scenario::ScenarioConfig| {
            let curves = build_curves(&c.dgs, c.n_segments).unwrap();
            solve_milp(&build_model(c, &curves, &profile).unwrap(), &exact()).unwrap().objective()
        };
        let with = solve(&cfg);
        let without = solve(&cfg.without_bess());
        if let Some(b) = without {
            let a = with.expect("a feasible plant stays feasible with an idle battery");
            assert!(a <= b + 1e-6 * b.abs().max(1.0), "seed {seed}: {a} > {b}");
            compared += 1;
        }
    }
    assert!(compared >= 10, "{compared}");
}

#[test]
fn worker_count_does_not_change_tiny_results() {
    for seed in 0..20 {
        let (cfg, profile) = common::tiny_instance(seed);
        let curves = build_curves(&cfg.dgs, cfg.n_segments).unwrap();
        let model = build_model(&cfg, &curves, &profile).unwrap();
        let runs: Vec<_> = [1, 2, 5]
            .iter()
            .map(|&w| solve_milp(&model, &MipOptions { workers: w, ..exact() }).unwrap())
            .collect();
        for r in &runs[1..] {
            assert_eq!(r.status, runs[0].status, "seed {seed}");
            assert_eq!(r.nodes_explored, runs[0].nodes_explored, "seed {seed}");
            assert_eq!(r.incumbent.as_ref().map(|s| &s.x), runs[0].incumbent.as_ref().map(|s| &s.x), "seed {seed}");
        }
    }
}

#[test]
fn reference_mps_round_trip() {
    let cfg = reference_scenario();
    let profile = reference_profile(&cfg);
    let start = Instant::now();
    let curves = build_curves(&cfg.dgs, cfg.n_segments).unwrap();
    let model = build_model(&cfg, &curves, &profile).unwrap();
    let text = write_mps(&model, "REFERENCE");
    let back = read_mps(&text).unwrap();
    assert!(start.elapsed().as_secs_f64() < 5.0);
    assert_eq!(back.cols.len(), model.n_vars());
    assert_eq!(back.rows.len(), model.n_rows());
    assert_eq!(back.cols.iter().filter(|c| c.binary).count(), 524);
    assert_eq!(back.cols.iter().filter(|c| c.binary).count(), model.count_domain(Domain::Binary));
    let e18 = back.rows.iter().filter(|r| r.name.starts_with("E18_")).count();
    assert_eq!(e18, profile.active_steps());
    for (c, v) in back.cols.iter().zip(&model.vars) {
        assert_eq!((c.lower, c.upper), (v.lower, v.upper));
    }
    for (r, row) in back.rows.iter().zip(&model.rows) {
        assert_eq!(r.sense, row.sense);
        assert_eq!(r.rhs.to_bits(), row.rhs.to_bits());
        let mut want = row.coefs.clone();
        want.sort_by_key(|e| e.0);
        assert_eq!(r.coefs, want);
    }
}
