//! Model-independent validation of dispatch schedules.
//!
//! Every rule is re-derived from the scenario and checked arithmetically on
//! schedule values; nothing here reads the MILP rows. The brute-force oracle
//! enumerates commitment patterns of tiny instances and prices each with its
//! own dispatch LP.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuelcurve::{build_curves, CurveError, PiecewiseFuelCurve};
use crate::loadgen::LoadProfile;
use crate::milp::Schedule;
use crate::scenario::ScenarioConfig;
use crate::solver::{solve_lp, LpProblem, LpStatus};

/// A check passes when its margin is at least `-MARGIN_TOL`.
pub const MARGIN_TOL: f64 = 1e-6;
/// Largest number of enumerated binaries accepted by the oracle.
pub const MAX_ENUMERATED_BITS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("instance has {bits} enumerated binaries, the oracle accepts at most {max}")]
    TooLarge { bits: usize, max: usize },
    #[error("profile has {got} steps, scenario horizon is {want}")]
    Misaligned { got: usize, want: usize },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Dimensions,
    Balance,
    DispatchMax,
    DispatchMin,
    Startup,
    MinUp,
    MinDown,
    RampUp,
    RampDown,
    SocRecursion,
    SocBounds,
    SocFinal,
    ChargeMax,
    ChargeMin,
    DischargeMax,
    DischargeMin,
    BessExclusive,
}

/// Slack of one replayed constraint: MW for power rules, percentage points
/// for SOC rules, plain counts for status rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub kind: ConstraintKind,
    pub t: Option<usize>,
    pub unit: Option<String>,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub checks: Vec<Margin>,
    pub violations: usize,
    pub worst_margin: f64,
}

impl FeasibilityReport {
    fn new(checks: Vec<Margin>) -> Self {
        let violations = checks.iter().filter(|c| !c.pass).count();
        let worst_margin = checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
        FeasibilityReport { checks, violations, worst_margin }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn failures(&self) -> impl Iterator<Item = &Margin> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn find(&self, kind: ConstraintKind, t: usize, unit: Option<&str>) -> Option<&Margin> {
        self.checks
            .iter()
            .find(|c| c.kind == kind && c.t == Some(t) && c.unit.as_deref() == unit)
    }
}

struct Collector(Vec<Margin>);

impl Collector {
    fn push(&mut self, kind: ConstraintKind, t: Option<usize>, unit: Option<&str>, margin: f64) {
        self.0.push(Margin {
            kind,
            t,
            unit: unit.map(str::to_string),
            margin,
            pass: margin >= -MARGIN_TOL,
        });
    }
}

fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Replays every non-security rule of `schedule` and returns its margins.
pub fn check_feasibility(schedule: &Schedule, config: &ScenarioConfig, profile: &LoadProfile) -> FeasibilityReport {
    let mut out = Collector(Vec::new());
    let n = config.n_dgs();
    let horizon = schedule.horizon();
    let shape_ok = schedule.n_dgs() == n
        && profile.len() == horizon
        && schedule.has_bess == config.bess.is_some()
        && schedule
            .steps
            .iter()
            .all(|s| s.p_dg.len() == n && s.z.len() == n && s.u.len() == n);
    if !shape_ok {
        let got = schedule.n_dgs() as f64 + horizon as f64;
        let want = n as f64 + profile.len() as f64;
        out.push(ConstraintKind::Dimensions, None, None, -(got - want).abs().max(1.0));
        return FeasibilityReport::new(out.0);
    }
    let dt = config.dt;

    for (t, step) in schedule.steps.iter().enumerate() {
        let supplied: f64 = step.p_dg.iter().sum::<f64>() + step.p_discharge - step.p_charge;
        out.push(ConstraintKind::Balance, Some(t), None, -(supplied - profile.load(t)).abs());
    }

    for (i, dg) in config.dgs.iter().enumerate() {
        let id = Some(dg.id.as_str());
        let pn = dg.rated_power;
        let up = dg.min_up_steps(dt);
        let down = dg.min_down_steps(dt);
        for (t, step) in schedule.steps.iter().enumerate() {
            let z = bit(step.z[i]);
            let u = bit(step.u[i]);
            let p = step.p_dg[i];
            out.push(ConstraintKind::DispatchMax, Some(t), id, dg.c_max * pn * z - p);
            out.push(ConstraintKind::DispatchMin, Some(t), id, p - dg.c_min * pn * z);

            let before = if t == 0 {
                bit(config.initial_state(i).on)
            } else {
                bit(schedule.steps[t - 1].z[i])
            };
            out.push(ConstraintKind::Startup, Some(t), id, u - (z - before));

            // a start needs the unit on over the following window and off
            // over the preceding one, both cut at the horizon edges
            let after: Vec<f64> =
                (t + 1..=t + up).filter(|&s| s < horizon).map(|s| bit(schedule.steps[s].z[i])).collect();
            if !after.is_empty() {
                let mean = after.iter().sum::<f64>() / after.len() as f64;
                out.push(ConstraintKind::MinUp, Some(t), id, mean - u);
            }
            let prior: Vec<f64> = (1..=down).filter(|&k| k <= t).map(|k| bit(schedule.steps[t - k].z[i])).collect();
            if !prior.is_empty() {
                let mean = prior.iter().sum::<f64>() / prior.len() as f64;
                out.push(ConstraintKind::MinDown, Some(t), id, 1.0 - u - mean);
            }

            if t > 0 {
                let prev = schedule.steps[t - 1].p_dg[i];
                out.push(ConstraintKind::RampUp, Some(t), id, dg.ramp_up_per_step(dt) - (p - prev));
                out.push(ConstraintKind::RampDown, Some(t), id, dg.ramp_down_per_step(dt) - (prev - p));
            }
        }
    }

    if let Some(bs) = &config.bess {
        let id = Some("BESS");
        let pn = bs.rated_power;
        let mut soc = bs.soc_initial;
        for (t, step) in schedule.steps.iter().enumerate() {
            let zc = bit(step.z_charge);
            let zd = bit(step.z_discharge);
            out.push(ConstraintKind::ChargeMax, Some(t), id, bs.c_charge_max * pn * zc - step.p_charge);
            out.push(ConstraintKind::ChargeMin, Some(t), id, step.p_charge - bs.c_charge_min * pn * zc);
            out.push(ConstraintKind::DischargeMax, Some(t), id, bs.c_discharge_max * pn * zd - step.p_discharge);
            out.push(ConstraintKind::DischargeMin, Some(t), id, step.p_discharge - bs.c_discharge_min * pn * zd);
            out.push(ConstraintKind::BessExclusive, Some(t), id, 1.0 - zc - zd);

            soc += (bs.eta_charge * step.p_charge - step.p_discharge / bs.eta_discharge) * dt / bs.rated_energy;
            if let Some(reported) = step.soc {
                out.push(ConstraintKind::SocRecursion, Some(t), id, -100.0 * (reported - soc).abs());
            }
            let level = step.soc.unwrap_or(soc);
            out.push(ConstraintKind::SocBounds, Some(t), id, 100.0 * (level - bs.soc_min).min(bs.soc_max - level));
            if t + 1 == horizon {
                out.push(ConstraintKind::SocFinal, Some(t), id, -100.0 * (level - bs.soc_final).abs());
            }
        }
    }
    FeasibilityReport::new(out.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub margin: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(margin: f64) -> Self {
        CheckResult { margin, pass: margin >= -MARGIN_TOL }
    }
}

/// Outcome of losing one online unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitContingency {
    pub unit: String,
    /// Overload capacity of the survivors minus load plus charging, MW.
    pub capacity: CheckResult,
    /// Load-step capacity of the survivors minus the lost output, MW.
    pub step_coverage: CheckResult,
    /// Overload reserve of the unit above its output, MW.
    pub headroom: CheckResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepContingency {
    pub t: usize,
    pub online: Vec<String>,
    /// Online units minus the required minimum.
    pub min_online: CheckResult,
    pub units: Vec<UnitContingency>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyReport {
    pub steps: Vec<StepContingency>,
    pub checks: usize,
    pub failures: usize,
}

impl ContingencyReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// One online unit as seen by the contingency checks.
struct Online<'a> {
    id: &'a str,
    power: f64,
    rated: f64,
    alpha: f64,
    beta: f64,
}

/// Single-outage checks on every security-active step.
pub fn check_security(schedule: &Schedule, config: &ScenarioConfig, profile: &LoadProfile) -> ContingencyReport {
    let mut steps = Vec::new();
    let (mut checks, mut failures) = (0, 0);
    let mut tally = |c: CheckResult| {
        checks += 1;
        failures += usize::from(!c.pass);
        c
    };
    for (t, step) in schedule.steps.iter().enumerate() {
        if t >= profile.len() || !profile.v(t) {
            continue;
        }
        let mut online: Vec<Online> = config
            .dgs
            .iter()
            .enumerate()
            .filter(|(i, _)| step.z.get(*i).copied().unwrap_or(false))
            .map(|(i, dg)| Online {
                id: dg.id.as_str(),
                power: step.p_dg[i],
                rated: dg.rated_power,
                alpha: dg.alpha,
                beta: dg.beta,
            })
            .collect();
        if let Some(bs) = config.bess.as_ref().filter(|_| step.bess_online()) {
            online.push(Online {
                id: "BESS",
                power: step.p_discharge,
                rated: bs.rated_power,
                alpha: bs.alpha,
                beta: bs.beta(),
            });
        }
        let min_online = tally(CheckResult::new(
            online.len() as f64 - config.security.min_online_units as f64,
        ));
        let demand = profile.load(t) + step.p_charge;
        let units = online
            .iter()
            .enumerate()
            .map(|(r, lost)| {
                let survivors = online.iter().enumerate().filter(|&(h, _)| h != r).map(|(_, u)| u);
                let overload: f64 = survivors.clone().map(|u| u.alpha * u.rated).sum();
                let step_cap: f64 = survivors.map(|u| u.beta * u.rated).sum();
                UnitContingency {
                    unit: lost.id.to_string(),
                    capacity: tally(CheckResult::new(overload - demand)),
                    step_coverage: tally(CheckResult::new(step_cap - lost.power)),
                    headroom: tally(CheckResult::new((lost.alpha - lost.beta) * lost.rated - lost.power)),
                }
            })
            .collect();
        steps.push(StepContingency {
            t,
            online: online.iter().map(|u| u.id.to_string()).collect(),
            min_online,
            units,
        });
    }
    ContingencyReport { steps, checks, failures }
}

/// BESS mode of one step in the enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Idle,
    Charge,
    Discharge,
}

/// Number of binaries the oracle enumerates: one status per generator and
/// step, plus the charge and discharge flags of the battery.
pub fn enumerated_bits(config: &ScenarioConfig) -> usize {
    let per_step = config.n_dgs() + if config.bess.is_some() { 2 } else { 0 };
    per_step * config.horizon
}

/// Minimum total cost over all commitment patterns, `+inf` when none is
/// feasible.
pub fn brute_force_optimum(config: &ScenarioConfig, profile: &LoadProfile) -> Result<f64, VerifyError> {
    let bits = enumerated_bits(config);
    if bits > MAX_ENUMERATED_BITS {
        return Err(VerifyError::TooLarge { bits, max: MAX_ENUMERATED_BITS });
    }
    if profile.len() != config.horizon {
        return Err(VerifyError::Misaligned { got: profile.len(), want: config.horizon });
    }
    let curves = build_curves(&config.dgs, config.n_segments)?;
    let (n, horizon) = (config.n_dgs(), config.horizon);
    let mode_patterns = if config.bess.is_some() { 3usize.pow(horizon as u32) } else { 1 };
    let mut best = f64::INFINITY;
    for mask in 0u64..1 << (n * horizon) {
        let z: Vec<Vec<bool>> =
            (0..horizon).map(|t| (0..n).map(|i| mask >> (t * n + i) & 1 == 1).collect()).collect();
        let Some(fixed_cost) = commitment_cost(config, &curves, &z) else {
            continue;
        };
        for code in 0..mode_patterns {
            let modes: Vec<Mode> = (0..horizon)
                .map(|t| match code / 3usize.pow(t as u32) % 3 {
                    0 => Mode::Idle,
                    1 => Mode::Charge,
                    _ => Mode::Discharge,
                })
                .collect();
            if let Some(cost) = dispatch_cost(config, &curves, profile, &z, &modes) {
                best = best.min(cost + fixed_cost);
            }
        }
    }
    Ok(best)
}

/// Cost of the start-ups implied by `z` plus the no-load fuel, or `None`
/// when the pattern breaks a minimum up or down window.
fn commitment_cost(config: &ScenarioConfig, curves: &[PiecewiseFuelCurve], z: &[Vec<bool>]) -> Option<f64> {
    let horizon = z.len();
    let mut cost = 0.0;
    for (i, dg) in config.dgs.iter().enumerate() {
        for t in 0..horizon {
            let before = if t == 0 { config.initial_state(i).on } else { z[t - 1][i] };
            if z[t][i] {
                cost += curves[i].intercept * config.fuel_price * config.dt;
            }
            if !(z[t][i] && !before) {
                continue;
            }
            cost += dg.startup_cost;
            let up = dg.min_up_steps(config.dt);
            if (t + 1..=t + up).any(|s| s < horizon && !z[s][i]) {
                return None;
            }
            let down = dg.min_down_steps(config.dt);
            if (1..=down).any(|k| k <= t && z[t - k][i]) {
                return None;
            }
        }
    }
    Some(cost)
}

/// Fuel cost of the cheapest dispatch for fixed statuses and BESS modes.
fn dispatch_cost(
    config: &ScenarioConfig,
    curves: &[PiecewiseFuelCurve],
    profile: &LoadProfile,
    z: &[Vec<bool>],
    modes: &[Mode],
) -> Option<f64> {
    let horizon = z.len();
    let dt = config.dt;
    let mut lp = LpProblem::new();
    // segment columns per generator and step; power is their sum
    let mut seg: Vec<Vec<Vec<usize>>> = Vec::with_capacity(horizon);
    for zt in z {
        let mut per_unit = Vec::new();
        for (i, curve) in curves.iter().enumerate() {
            let on = if zt[i] { 1.0 } else { 0.0 };
            let bp = curve.breakpoints();
            let cols = (0..curve.n_segments())
                .map(|m| {
                    let cost = curve.segment_slopes[m] * config.fuel_price * dt;
                    lp.add_col(cost, 0.0, (bp[m + 1] - bp[m]) * on)
                })
                .collect();
            per_unit.push(cols);
        }
        seg.push(per_unit);
    }
    let power = |t: usize, i: usize, sign: f64| -> Vec<(usize, f64)> { seg[t][i].iter().map(|&c| (c, sign)).collect() };

    // battery columns: charge, discharge, soc
    let bess_cols: Option<Vec<(usize, usize, usize)>> = config.bess.as_ref().map(|bs| {
        (0..horizon)
            .map(|t| {
                let pn = bs.rated_power;
                let (zc, zd) = match modes[t] {
                    Mode::Idle => (0.0, 0.0),
                    Mode::Charge => (1.0, 0.0),
                    Mode::Discharge => (0.0, 1.0),
                };
                let pc = lp.add_col(0.0, bs.c_charge_min * pn * zc, bs.c_charge_max * pn * zc);
                let pd = lp.add_col(0.0, bs.c_discharge_min * pn * zd, bs.c_discharge_max * pn * zd);
                let soc = lp.add_col(0.0, bs.soc_min, bs.soc_max);
                (pc, pd, soc)
            })
            .collect()
    });

    for t in 0..horizon {
        for (i, dg) in config.dgs.iter().enumerate() {
            let on = if z[t][i] { 1.0 } else { 0.0 };
            let pn = dg.rated_power;
            lp.add_row(power(t, i, 1.0), dg.c_min * pn * on, dg.c_max * pn * on);
            if t > 0 {
                let mut ramp = power(t, i, 1.0);
                ramp.extend(power(t - 1, i, -1.0));
                lp.add_row(ramp, -dg.ramp_down_per_step(dt), dg.ramp_up_per_step(dt));
            }
        }
        let mut balance: Vec<(usize, f64)> = (0..config.n_dgs()).flat_map(|i| power(t, i, 1.0)).collect();
        if let (Some(bs), Some(cols)) = (&config.bess, &bess_cols) {
            let (pc, pd, soc) = cols[t];
            balance.push((pd, 1.0));
            balance.push((pc, -1.0));
            let mut rec = vec![
                (soc, 1.0),
                (pc, -bs.eta_charge * dt / bs.rated_energy),
                (pd, dt / (bs.eta_discharge * bs.rated_energy)),
            ];
            let rhs = if t == 0 {
                bs.soc_initial
            } else {
                rec.push((cols[t - 1].2, -1.0));
                0.0
            };
            lp.add_row(rec, rhs, rhs);
            if t + 1 == horizon {
                lp.add_row(vec![(soc, 1.0)], bs.soc_final, bs.soc_final);
            }
        }
        lp.add_row(balance, profile.load(t), profile.load(t));

        if profile.v(t) && !security_rows(config, &mut lp, &z[t], modes[t], &seg[t], bess_cols.as_ref().map(|c| c[t]), profile.load(t)) {
            return None;
        }
    }
    let sol = solve_lp(&lp).ok()?;
    (sol.status == LpStatus::Optimal).then_some(sol.objective)
}

/// Adds the outage rows of step `t` for the online set as a whole. Returns
/// false when the set itself makes the step infeasible.
#[allow(clippy::too_many_arguments)]
/// Power terms, rated power, alpha and beta of one online unit.
type OnlineTerms = (Vec<(usize, f64)>, f64, f64, f64);

fn security_rows(
    config: &ScenarioConfig,
    lp: &mut LpProblem,
    z: &[bool],
    mode: Mode,
    seg: &[Vec<usize>],
    bess: Option<(usize, usize, usize)>,
    load: f64,
) -> bool {
    let mut online: Vec<OnlineTerms> = config
        .dgs
        .iter()
        .enumerate()
        .filter(|(i, _)| z[*i])
        .map(|(i, dg)| (seg[i].iter().map(|&c| (c, 1.0)).collect(), dg.rated_power, dg.alpha, dg.beta))
        .collect();
    if let (Some(bs), Some((_, pd, _))) = (&config.bess, bess) {
        if mode != Mode::Idle {
            online.push((vec![(pd, 1.0)], bs.rated_power, bs.alpha, bs.beta()));
        }
    }
    if online.len() < config.security.min_online_units {
        return false;
    }
    for r in 0..online.len() {
        let others = || online.iter().enumerate().filter(move |&(h, _)| h != r).map(|(_, u)| u);
        let overload: f64 = others().map(|u| u.1 * u.2).sum();
        let step_cap: f64 = others().map(|u| u.1 * u.3).sum();
        match bess {
            Some((pc, ..)) => lp.add_row(vec![(pc, 1.0)], f64::NEG_INFINITY, overload - load),
            None if load > overload + MARGIN_TOL => return false,
            None => 0,
        };
        let (terms, rated, alpha, beta) = &online[r];
        lp.add_row(terms.clone(), f64::NEG_INFINITY, step_cap.min((alpha - beta) * rated));
    }
    true
}
