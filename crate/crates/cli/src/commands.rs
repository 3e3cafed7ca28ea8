//! Subcommand bodies. Each returns the exit status to use on success, or
//! a failure carrying its own.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context};
use serde::Serialize;

use scuc::fuelcurve::{build_curves, curves_csv};
use scuc::loadgen::LoadProfile;
use scuc::milp::{build_model, extract_schedule, Schedule};
use scuc::report::{compute_report, plot_dispatch, plot_soc, read_schedule_csv, write_schedule_csv, RunReport};
use scuc::scenario::{load_scenario, reference_scenario, ScenarioConfig};
use scuc::solver::{export_mps as write_mps_file, read_mps, solve_milp, MipOptions, MipStatus};
use scuc::verify::{check_feasibility, check_security, ContingencyReport, FeasibilityReport};

use crate::manifest::{InputSpec, Inputs, RunManifest, SolverSettings};
use crate::{CompareArgs, CurveArgs, Exit, ExportArgs, Failure, InputArgs, OptimizeArgs, OrExit, SimulateArgs, VerifyArgs};

type CmdResult = Result<Exit, Failure>;

impl From<&InputArgs> for InputSpec {
    fn from(a: &InputArgs) -> Self {
        InputSpec {
            scenario: a.scenario.clone(),
            profile: a.profile.clone(),
            oc_schedule: a.oc_schedule.clone(),
            seed: a.seed,
            no_bess: a.no_bess,
        }
    }
}

fn scenario_or_reference(path: Option<&Path>) -> Result<ScenarioConfig, Failure> {
    match path {
        Some(p) => load_scenario(p).or_exit(Exit::Input),
        None => Ok(reference_scenario()),
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .or_exit(Exit::Input)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).or_exit(Exit::Internal)?;
    write(path, text + "\n")
}

pub fn simulate_load(a: SimulateArgs) -> CmdResult {
    let spec = InputSpec { scenario: a.scenario, profile: None, oc_schedule: a.oc_schedule, seed: a.seed, no_bess: false };
    let inputs = spec.resolve().or_exit(Exit::Input)?;
    write(&a.out, inputs.profile.to_csv_string())?;
    println!(
        "{} steps, {} security-active, profile sha256 {}",
        inputs.profile.len(),
        inputs.profile.active_steps(),
        inputs.profile_sha256
    );
    Ok(Exit::Ok)
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    passed: bool,
    feasibility: &'a FeasibilityReport,
    security: &'a ContingencyReport,
    /// Every incumbent the search accepted, final one last.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    incumbents: Vec<IncumbentCheck>,
}

#[derive(Serialize)]
struct IncumbentCheck {
    objective: f64,
    violations: usize,
    worst_margin: f64,
    security_failures: usize,
}

fn print_verification(feas: &FeasibilityReport, sec: &ContingencyReport) {
    println!(
        "operating rules: {} checks, {} violations, worst margin {:.6}",
        feas.checks.len(),
        feas.violations,
        feas.worst_margin
    );
    for m in feas.failures() {
        let t = m.t.map(|t| (t + 1).to_string()).unwrap_or_else(|| "-".into());
        println!("  FAIL {:?} t={t} unit={} margin {:.6}", m.kind, m.unit.as_deref().unwrap_or("-"), m.margin);
    }
    println!("N-1 security: {} steps, {} checks, {} violations", sec.steps.len(), sec.checks, sec.failures);
    for step in &sec.steps {
        if !step.min_online.pass {
            println!("  FAIL t={} only {} unit(s) online", step.t + 1, step.online.len());
        }
        for u in &step.units {
            for (name, c) in [("capacity", u.capacity), ("step coverage", u.step_coverage), ("headroom", u.headroom)] {
                if !c.pass {
                    println!("  FAIL t={} loss of {}: {name} margin {:.6}", step.t + 1, u.unit, c.margin);
                }
            }
        }
    }
}

fn print_report(r: &RunReport) {
    println!("total cost   {:>12.2} EUR", r.total_cost);
    println!("total fuel   {:>12.2} kg", r.total_fuel);
    println!("CO2          {:>12.2} kg ({:.3} t)", r.total_co2, r.total_co2_t);
    match r.lf_avg {
        Some(lf) => println!("LF_avg       {:>12.4}", lf),
        None => println!("LF_avg       {:>12}", "n/a"),
    }
    println!("start-ups    {:>12}", r.startups);
}

pub fn optimize(a: OptimizeArgs) -> CmdResult {
    let (inputs, settings, lf_mode): (Inputs, SolverSettings, _) = match &a.manifest {
        Some(path) => {
            let m = RunManifest::load(path).or_exit(Exit::Input)?;
            (m.resolve().or_exit(Exit::Input)?, m.solver, m.lf_mode)
        }
        None => {
            let s = &a.solver;
            let settings = SolverSettings { gap: s.gap, nodes: s.nodes, time_limit: s.time_limit, workers: s.workers };
            (InputSpec::from(&a.input).resolve().or_exit(Exit::Input)?, settings, a.lf_mode.into())
        }
    };
    if !(settings.gap >= 0.0) || !(settings.time_limit > 0.0) || settings.nodes == 0 || settings.workers == 0 {
        return Err(Failure::new(Exit::Input, anyhow!("gap must be >= 0; time limit, nodes and workers positive")));
    }
    let config = &inputs.config;
    let curves = build_curves(&config.dgs, config.n_segments).or_exit(Exit::Input)?;
    let model = build_model(config, &curves, &inputs.profile).or_exit(Exit::Input)?;

    fs::create_dir_all(&a.out)
        .with_context(|| format!("creating {}", a.out.display()))
        .or_exit(Exit::Input)?;
    let out = fs::canonicalize(&a.out).or_exit(Exit::Input)?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: inputs.scenario_ref.clone(),
        profile: inputs.profile_ref.clone(),
        profile_sha256: inputs.profile_sha256.clone(),
        no_bess: config.bess.is_none(),
        solver: settings.clone(),
        lf_mode,
        out_dir: out.clone(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;

    println!("model: {} variables, {} rows", model.n_vars(), model.n_rows());
    let options = MipOptions {
        gap_tol: settings.gap,
        node_limit: settings.nodes,
        time_limit: settings.time_limit,
        workers: settings.workers,
        ..MipOptions::default()
    };
    let result = solve_milp(&model, &options).or_exit(Exit::Internal)?;
    println!(
        "solver: {:?}, gap {:.4}%, bound {:.4}, {} nodes, {:.1} s",
        result.status,
        result.gap * 100.0,
        result.best_bound,
        result.nodes_explored,
        result.wall_time
    );
    let Some(incumbent) = &result.incumbent else {
        return match result.status {
            MipStatus::Infeasible => Err(Failure::new(Exit::Infeasible, anyhow!("model is infeasible"))),
            _ => Err(Failure::new(Exit::Limit, anyhow!("limit reached without a feasible schedule"))),
        };
    };
    let schedule = extract_schedule(&model, &incumbent.x).or_exit(Exit::Internal)?;
    let feas = check_feasibility(&schedule, config, &inputs.profile);
    let sec = check_security(&schedule, config, &inputs.profile);
    let passed = feas.passed() && sec.passed();
    let lp = model.to_lp();
    let mut incumbents = Vec::with_capacity(result.history.len());
    for x in &result.history {
        let s = extract_schedule(&model, x).or_exit(Exit::Internal)?;
        let f = check_feasibility(&s, config, &inputs.profile);
        incumbents.push(IncumbentCheck {
            objective: lp.objective(x),
            violations: f.violations,
            worst_margin: f.worst_margin,
            security_failures: check_security(&s, config, &inputs.profile).failures,
        });
    }
    write_json(&out.join("verify.json"), &VerifyOutput { passed, feasibility: &feas, security: &sec, incumbents })?;

    let report = compute_report(&schedule, config, &curves, Some(&result), lf_mode).or_exit(Exit::Internal)?;
    write_json(&out.join("report.json"), &report)?;
    let mut csv = Vec::new();
    write_schedule_csv(&schedule, &mut csv).or_exit(Exit::Internal)?;
    write(&out.join("schedule.csv"), csv)?;
    write(&out.join("plot_dispatch.csv"), plot_dispatch(&report))?;
    write(&out.join("plot_soc.csv"), plot_soc(&report, config.bess.as_ref().map(|b| b.soc_initial)))?;

    print_report(&report);
    print_verification(&feas, &sec);
    if let Some(d) = report.objective_mismatch() {
        if d > 1e-6 {
            log::warn!("report cost differs from the solver objective by {d:e} (relative)");
        }
    }
    if !passed {
        return Err(Failure::new(Exit::Verification, anyhow!("schedule fails verification")));
    }
    if result.status == MipStatus::LimitReached {
        return Err(Failure::new(Exit::Limit, anyhow!("limit reached before the gap target; best schedule written")));
    }
    Ok(Exit::Ok)
}

fn read_schedule(path: &Path, config: &ScenarioConfig) -> anyhow::Result<Schedule> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let mut value: serde_json::Value = serde_json::from_str(&text)?;
        if let Some(inner) = value.get_mut("schedule") {
            value = inner.take();
        }
        return Ok(serde_json::from_value(value)?);
    }
    let ids: Vec<String> = config.dgs.iter().map(|d| d.id.clone()).collect();
    Ok(read_schedule_csv(text.as_bytes(), &ids, config.dt)?)
}

pub fn verify(a: VerifyArgs) -> CmdResult {
    let mut config = scenario_or_reference(a.scenario.as_deref())?;
    if a.no_bess {
        config = config.without_bess();
    }
    let schedule = read_schedule(&a.schedule, &config).or_exit(Exit::Input)?;
    let profile = match &a.profile {
        Some(p) => {
            let file = fs::File::open(p).with_context(|| format!("reading {}", p.display())).or_exit(Exit::Input)?;
            LoadProfile::read_csv(file).or_exit(Exit::Input)?
        }
        None => {
            let loads: Vec<f64> = schedule.steps.iter().map(|s| s.p_load).collect();
            let v: Vec<bool> = schedule.steps.iter().map(|s| s.v).collect();
            LoadProfile::from_loads(&loads, &v)
        }
    };
    let feas = check_feasibility(&schedule, &config, &profile);
    let sec = check_security(&schedule, &config, &profile);
    let passed = feas.passed() && sec.passed();
    if let Some(out) = &a.out {
        write_json(out, &VerifyOutput { passed, feasibility: &feas, security: &sec, incumbents: Vec::new() })?;
    }
    print_verification(&feas, &sec);
    if passed {
        println!("schedule passes");
        Ok(Exit::Ok)
    } else {
        Err(Failure::new(Exit::Verification, anyhow!("schedule fails verification")))
    }
}

#[derive(Debug, Serialize)]
struct Delta {
    metric: &'static str,
    a: Option<f64>,
    b: Option<f64>,
    delta: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Comparison {
    profile_sha256: String,
    rows: Vec<Delta>,
    /// Fuel saved by run b relative to run a, percent.
    fuel_saving_pct: f64,
    fuel_saving_kg: f64,
}

fn load_run(dir: &Path) -> anyhow::Result<(RunManifest, RunReport)> {
    let manifest = RunManifest::load(&dir.join("manifest.json"))?;
    let path = dir.join("report.json");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let report = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok((manifest, report))
}

pub fn compare(a: CompareArgs) -> CmdResult {
    let (ma, ra) = load_run(&a.run_a).or_exit(Exit::Input)?;
    let (mb, rb) = load_run(&a.run_b).or_exit(Exit::Input)?;
    if ma.profile_sha256 != mb.profile_sha256 {
        return Err(Failure::new(
            Exit::Input,
            anyhow!("runs used different load profiles ({} vs {}); refusing to compare", ma.profile_sha256, mb.profile_sha256),
        ));
    }
    let row = |metric, x: Option<f64>, y: Option<f64>| Delta {
        metric,
        a: x,
        b: y,
        delta: x.zip(y).map(|(x, y)| y - x),
    };
    let rows = vec![
        row("total_cost_eur", Some(ra.total_cost), Some(rb.total_cost)),
        row("total_fuel_kg", Some(ra.total_fuel), Some(rb.total_fuel)),
        row("total_co2_kg", Some(ra.total_co2), Some(rb.total_co2)),
        row("total_co2_t", Some(ra.total_co2_t), Some(rb.total_co2_t)),
        row("lf_avg", ra.lf_avg, rb.lf_avg),
    ];
    let saving_kg = ra.total_fuel - rb.total_fuel;
    let saving_pct = if ra.total_fuel > 0.0 { saving_kg / ra.total_fuel * 100.0 } else { 0.0 };
    let cmp = Comparison { profile_sha256: ma.profile_sha256, rows, fuel_saving_pct: saving_pct, fuel_saving_kg: saving_kg };

    let fmt = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into());
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{:<16} {:>14} {:>14} {:>14}", "metric", "a", "b", "b - a");
    for d in &cmp.rows {
        let _ = writeln!(out, "{:<16} {:>14} {:>14} {:>14}", d.metric, fmt(d.a), fmt(d.b), fmt(d.delta));
    }
    let _ = writeln!(out, "fuel saving of b: {:.2} kg ({:.3}%)", cmp.fuel_saving_kg, cmp.fuel_saving_pct);
    if let Some(path) = &a.out {
        write_json(path, &cmp)?;
    }
    Ok(Exit::Ok)
}

pub fn export_mps(a: ExportArgs) -> CmdResult {
    let inputs = InputSpec::from(&a.input).resolve().or_exit(Exit::Input)?;
    let config = &inputs.config;
    let curves = build_curves(&config.dgs, config.n_segments).or_exit(Exit::Input)?;
    let model = build_model(config, &curves, &inputs.profile).or_exit(Exit::Input)?;
    write_mps_file(&model, &a.out).or_exit(Exit::Input)?;
    let text = fs::read_to_string(&a.out).or_exit(Exit::Input)?;
    let back = read_mps(&text).or_exit(Exit::Internal)?;
    if back.cols.len() != model.n_vars() || back.rows.len() != model.n_rows() {
        return Err(Failure::new(
            Exit::Internal,
            anyhow!(
                "round trip changed dimensions: {}x{} became {}x{}",
                model.n_rows(),
                model.n_vars(),
                back.rows.len(),
                back.cols.len()
            ),
        ));
    }
    let binaries = back.cols.iter().filter(|c| c.binary).count();
    println!("{}: {} rows, {} columns ({} binary)", a.out.display(), back.rows.len(), back.cols.len(), binaries);
    Ok(Exit::Ok)
}

pub fn dump_fuel_curves(a: CurveArgs) -> CmdResult {
    let config = scenario_or_reference(a.scenario.as_deref())?;
    let curves = build_curves(&config.dgs, config.n_segments).or_exit(Exit::Input)?;
    let ids: Vec<String> = config.dgs.iter().map(|d| d.id.clone()).collect();
    let text = curves_csv(&ids, &curves);
    match &a.out {
        Some(path) => write(path, text)?,
        None => print!("{text}"),
    }
    Ok(Exit::Ok)
}
