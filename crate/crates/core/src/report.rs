//! Run summary: total cost, fuel, CO2 and average loading, plus the
//! schedule and plot series written next to it.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuelcurve::PiecewiseFuelCurve;
use crate::milp::{Schedule, ScheduleStep};
use crate::scenario::ScenarioConfig;
use crate::solver::{MipResult, MipStatus};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("schedule has no steps")]
    Empty,
    #[error("schedule has {got} generators, the scenario {want}")]
    Misaligned { got: usize, want: usize },
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How the average loading factor is aggregated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadFactorMode {
    /// Mean of `P/P_n` over every online unit-step.
    #[default]
    UnitStep,
    /// Dispatched energy over online rated energy.
    EnergyWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSeries {
    /// 1-based step index.
    pub t: usize,
    pub p_dg: Vec<f64>,
    /// Discharge minus charge, MW.
    pub p_bess: f64,
    /// Percent of rated energy at the end of the step.
    pub soc_pct: Option<f64>,
    pub p_load: f64,
    pub v: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub status: MipStatus,
    pub objective: Option<f64>,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub wall_time: f64,
}

impl From<&MipResult> for SolveSummary {
    fn from(r: &MipResult) -> Self {
        SolveSummary {
            status: r.status,
            objective: r.objective(),
            best_bound: r.best_bound,
            gap: r.gap,
            nodes: r.nodes_explored,
            wall_time: r.wall_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// EUR.
    pub total_cost: f64,
    pub fuel_cost: f64,
    pub startup_cost: f64,
    pub startups: usize,
    /// kg.
    pub total_fuel: f64,
    /// kg.
    pub total_co2: f64,
    pub total_co2_t: f64,
    /// `None` when no unit is ever online.
    pub lf_avg: Option<f64>,
    pub lf_mode: LoadFactorMode,
    pub series: Vec<StepSeries>,
    pub solve: Option<SolveSummary>,
    pub schedule: Schedule,
}

impl RunReport {
    /// Relative difference between the report cost and the solver objective.
    pub fn objective_mismatch(&self) -> Option<f64> {
        let obj = self.solve.as_ref()?.objective?;
        Some((self.total_cost - obj).abs() / obj.abs().max(1.0))
    }
}

pub fn co2_from_fuel(fuel_kg: f64, factor: f64) -> f64 {
    fuel_kg * factor
}

/// Fuel in kg burned by generator `i` over one step.
fn step_fuel(curve: &PiecewiseFuelCurve, p: f64, delta: &[f64], on: bool, dt: f64) -> f64 {
    if !on {
        return 0.0;
    }
    let variable = if delta.is_empty() {
        curve.variable_rate(&curve.fill(p))
    } else {
        curve.variable_rate(delta)
    };
    (variable + curve.intercept) * dt
}

pub fn compute_report(
    schedule: &Schedule,
    config: &ScenarioConfig,
    curves: &[PiecewiseFuelCurve],
    result: Option<&MipResult>,
    lf_mode: LoadFactorMode,
) -> Result<RunReport, ReportError> {
    if schedule.steps.is_empty() {
        return Err(ReportError::Empty);
    }
    let n = config.n_dgs();
    if schedule.n_dgs() != n || curves.len() != n {
        return Err(ReportError::Misaligned { got: schedule.n_dgs(), want: n });
    }
    let mut fuel = 0.0;
    let mut startup_cost = 0.0;
    let mut startups = 0;
    let (mut lf_sum, mut lf_count) = (0.0, 0usize);
    let (mut energy, mut rated_energy) = (0.0, 0.0);
    let mut series = Vec::with_capacity(schedule.horizon());
    for (t, step) in schedule.steps.iter().enumerate() {
        if step.p_dg.len() != n || step.z.len() != n || step.u.len() != n {
            return Err(ReportError::Misaligned { got: step.p_dg.len(), want: n });
        }
        for (i, dg) in config.dgs.iter().enumerate() {
            let delta = step.delta.get(i).map(Vec::as_slice).unwrap_or(&[]);
            fuel += step_fuel(&curves[i], step.p_dg[i], delta, step.z[i], schedule.dt);
            if step.u[i] {
                startups += 1;
                startup_cost += dg.startup_cost;
            }
            if step.z[i] {
                lf_sum += step.p_dg[i] / dg.rated_power;
                lf_count += 1;
                energy += step.p_dg[i];
                rated_energy += dg.rated_power;
            }
        }
        let soc_pct = step.soc.map(|s| s * 100.0);
        series.push(StepSeries {
            t: t + 1,
            p_dg: step.p_dg.clone(),
            p_bess: step.p_discharge - step.p_charge,
            soc_pct,
            p_load: step.p_load,
            v: step.v,
        });
    }
    let lf_avg = match lf_mode {
        _ if lf_count == 0 => None,
        LoadFactorMode::UnitStep => Some(lf_sum / lf_count as f64),
        LoadFactorMode::EnergyWeighted => Some(energy / rated_energy),
    };
    let fuel_cost = fuel * config.fuel_price;
    let total_co2 = co2_from_fuel(fuel, config.co2_factor);
    Ok(RunReport {
        total_cost: fuel_cost + startup_cost,
        fuel_cost,
        startup_cost,
        startups,
        total_fuel: fuel,
        total_co2,
        total_co2_t: total_co2 / 1000.0,
        lf_avg,
        lf_mode,
        series,
        solve: result.map(SolveSummary::from),
        schedule: schedule.clone(),
    })
}

/// `t, p_dg1..N, z1..N, u1..N, p_charge, p_discharge, soc, p_load, v`,
/// then the battery modes `z_charge, z_discharge` so that a battery held
/// online at zero power survives a round trip.
pub fn write_schedule_csv<W: Write>(schedule: &Schedule, out: W) -> Result<(), ReportError> {
    let csv_err = |e: csv::Error| ReportError::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let n = schedule.n_dgs();
    let mut header = vec!["t".to_string()];
    for prefix in ["p_dg", "z", "u"] {
        header.extend((1..=n).map(|i| format!("{prefix}{i}")));
    }
    header.extend(["p_charge", "p_discharge", "soc", "p_load", "v", "z_charge", "z_discharge"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    let flag = |b: bool| u8::from(b).to_string();
    for (t, s) in schedule.steps.iter().enumerate() {
        let mut rec = vec![(t + 1).to_string()];
        rec.extend(s.p_dg.iter().map(f64::to_string));
        rec.extend(s.z.iter().map(|&b| flag(b)));
        rec.extend(s.u.iter().map(|&b| flag(b)));
        rec.push(s.p_charge.to_string());
        rec.push(s.p_discharge.to_string());
        rec.push(s.soc.map(|v| v.to_string()).unwrap_or_default());
        rec.push(s.p_load.to_string());
        rec.push(flag(s.v));
        rec.push(flag(s.z_charge));
        rec.push(flag(s.z_discharge));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `schedule.csv` back. Without the battery mode columns the
/// battery counts as charging or discharging when that power is positive.
pub fn read_schedule_csv<R: Read>(input: R, dg_ids: &[String], dt: f64) -> Result<Schedule, ReportError> {
    let bad = |msg: String| ReportError::Csv(msg);
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column `{name}`")))
    };
    let n = dg_ids.len();
    let cols = |prefix: &str| (1..=n).map(|i| col(&format!("{prefix}{i}"))).collect::<Result<Vec<_>, _>>();
    let (c_p, c_z, c_u) = (cols("p_dg")?, cols("z")?, cols("u")?);
    let (c_pc, c_pd, c_soc, c_load, c_v) =
        (col("p_charge")?, col("p_discharge")?, col("soc")?, col("p_load")?, col("v")?);
    let modes = col("z_charge").ok().zip(col("z_discharge").ok());
    let mut steps = Vec::new();
    let mut has_bess = false;
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |c: usize| -> Result<f64, ReportError> {
            rec[c].parse().map_err(|_| bad(format!("row {}: `{}` is not a number", k + 1, &rec[c])))
        };
        let flag = |c: usize| -> Result<bool, ReportError> {
            match &rec[c] {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(bad(format!("row {}: `{other}` is not 0 or 1", k + 1))),
            }
        };
        let soc = if rec[c_soc].is_empty() { None } else { Some(num(c_soc)?) };
        has_bess |= soc.is_some();
        let (p_charge, p_discharge) = (num(c_pc)?, num(c_pd)?);
        let (z_charge, z_discharge) = match modes {
            Some((c, d)) => (flag(c)?, flag(d)?),
            None => (p_charge > 0.0, p_discharge > 0.0),
        };
        steps.push(ScheduleStep {
            p_dg: c_p.iter().map(|&c| num(c)).collect::<Result<_, _>>()?,
            delta: Vec::new(),
            z: c_z.iter().map(|&c| flag(c)).collect::<Result<_, _>>()?,
            u: c_u.iter().map(|&c| flag(c)).collect::<Result<_, _>>()?,
            p_charge,
            p_discharge,
            soc,
            z_charge,
            z_discharge,
            p_load: num(c_load)?,
            v: flag(c_v)?,
        });
    }
    Ok(Schedule { dg_ids: dg_ids.to_vec(), has_bess, dt, steps })
}

/// Gnuplot index blocks of `hour value`: one per generator, then BESS
/// power and load.
pub fn plot_dispatch(report: &RunReport) -> String {
    let dt = report.schedule.dt;
    let mut out = String::new();
    let mut block = |name: &str, values: &mut dyn Iterator<Item = f64>| {
        let _ = writeln!(out, "# {name}");
        for (t, v) in values.enumerate() {
            let _ = writeln!(out, "{} {v}", (t + 1) as f64 * dt);
        }
        out.push_str("\n\n");
    };
    for (i, id) in report.schedule.dg_ids.iter().enumerate() {
        block(id, &mut report.series.iter().map(|s| s.p_dg[i]));
    }
    if report.schedule.has_bess {
        block("bess", &mut report.series.iter().map(|s| s.p_bess));
    }
    block("load", &mut report.series.iter().map(|s| s.p_load));
    out
}

/// `hour soc_percent`, starting from the initial state at hour 0.
pub fn plot_soc(report: &RunReport, soc_initial: Option<f64>) -> String {
    let mut out = String::from("# soc_pct\n");
    if let Some(s0) = soc_initial {
        let _ = writeln!(out, "0 {}", s0 * 100.0);
    }
    for s in &report.series {
        if let Some(v) = s.soc_pct {
            let _ = writeln!(out, "{} {v}", s.t as f64 * report.schedule.dt);
        }
    }
    out
}
