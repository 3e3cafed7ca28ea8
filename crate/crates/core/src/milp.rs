//! Unit commitment and dispatch model with N-1 security constraints.
//!
//! Rows carry a [`RowTag`] naming the constraint family they belong to; the
//! tag doubles as the MPS row name (`E21_J5_R2_T7`). Indices in names are
//! 1-based, everything in memory is 0-based.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuelcurve::PiecewiseFuelCurve;
use crate::loadgen::LoadProfile;
use crate::scenario::{BessSpec, ScenarioConfig};
use crate::solver::lp::LpProblem;
use crate::solver::mip::{CombinationGroup, MipProblem};

/// Integrality tolerance used when reading solutions back.
pub const INTEGRALITY_TOL: f64 = 1e-6;
const SOC_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{what}: got {got}, expected {want}")]
    Misaligned {
        what: &'static str,
        got: usize,
        want: usize,
    },
    #[error("security constraints need at least 2 generating units, found {0}")]
    TooFewUnits(usize),
    #[error("variable {name} = {value} is not integral")]
    Integrality { name: String, value: f64 },
    #[error("SOC at step {t} drifted: solver {solver}, replay {replay}")]
    SocDrift { t: usize, solver: f64, replay: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarKind {
    Delta { m: usize, i: usize, t: usize },
    PDg { i: usize, t: usize },
    Z { i: usize, t: usize },
    U { i: usize, t: usize },
    PCharge { t: usize },
    PDischarge { t: usize },
    Soc { t: usize },
    S { j: usize, t: usize },
    F { j: usize, t: usize },
    ZCharge { t: usize },
    ZDischarge { t: usize },
    ZBess { t: usize },
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use VarKind::*;
        match *self {
            Delta { m, i, t } => write!(f, "D_{}_{}_{}", m + 1, i + 1, t + 1),
            PDg { i, t } => write!(f, "P_{}_{}", i + 1, t + 1),
            Z { i, t } => write!(f, "Z_{}_{}", i + 1, t + 1),
            U { i, t } => write!(f, "U_{}_{}", i + 1, t + 1),
            PCharge { t } => write!(f, "PC_{}", t + 1),
            PDischarge { t } => write!(f, "PD_{}", t + 1),
            Soc { t } => write!(f, "SOC_{}", t + 1),
            S { j, t } => write!(f, "S_{}_{}", j + 1, t + 1),
            F { j, t } => write!(f, "F_{}_{}", j + 1, t + 1),
            ZCharge { t } => write!(f, "ZBC_{}", t + 1),
            ZDischarge { t } => write!(f, "ZBD_{}", t + 1),
            ZBess { t } => write!(f, "ZB_{}", t + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Continuous,
    Binary,
    Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarRef {
    pub kind: VarKind,
    pub domain: Domain,
    pub lower: f64,
    pub upper: f64,
}

/// A set of at least two generating units that may be online together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Combination {
    pub index: usize,
    /// Positions in the unit list.
    pub members: Vec<usize>,
    pub member_ids: Vec<String>,
}

impl Combination {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// All subsets of at least two units, in lexicographic order of member
/// positions.
pub fn enumerate_combinations(unit_ids: &[String]) -> Result<Vec<Combination>, ModelError> {
    let n = unit_ids.len();
    if n < 2 {
        return Err(ModelError::TooFewUnits(n));
    }
    let mut out = Vec::new();
    let mut stack = Vec::new();
    fn walk(start: usize, n: usize, stack: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for k in start..n {
            stack.push(k);
            if stack.len() >= 2 {
                out.push(stack.clone());
            }
            walk(k + 1, n, stack, out);
            stack.pop();
        }
    }
    walk(0, n, &mut stack, &mut out);
    Ok(out
        .into_iter()
        .enumerate()
        .map(|(index, members)| Combination {
            index,
            member_ids: members.iter().map(|&k| unit_ids[k].clone()).collect(),
            members,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Constraint family plus indices; renders as the row name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowTag {
    pub family: &'static str,
    pub i: Option<usize>,
    pub j: Option<usize>,
    pub r: Option<usize>,
    pub t: usize,
}

impl RowTag {
    fn at(family: &'static str, t: usize) -> Self {
        RowTag { family, i: None, j: None, r: None, t }
    }

    fn unit(family: &'static str, i: usize, t: usize) -> Self {
        RowTag { i: Some(i), ..Self::at(family, t) }
    }

    fn combo(family: &'static str, j: usize, r: Option<usize>, t: usize) -> Self {
        RowTag { j: Some(j), r, ..Self::at(family, t) }
    }
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family)?;
        if let Some(i) = self.i {
            write!(f, "_I{}", i + 1)?;
        }
        if let Some(j) = self.j {
            write!(f, "_J{}", j + 1)?;
        }
        if let Some(r) = self.r {
            write!(f, "_R{}", r + 1)?;
        }
        write!(f, "_T{}", self.t + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub tag: RowTag,
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    pub vars: Vec<VarRef>,
    pub rows: Vec<Row>,
    /// Dense cost per variable, EUR.
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub combinations: Vec<Combination>,
    pub unit_ids: Vec<String>,
    pub dg_ids: Vec<String>,
    pub horizon: usize,
    pub dt: f64,
    pub n_segments: Vec<usize>,
    pub bess: Option<BessSpec>,
    pub p_load: Vec<f64>,
    pub v: Vec<bool>,
    index: HashMap<VarKind, usize>,
}

impl MilpModel {
    pub fn var(&self, kind: VarKind) -> Option<usize> {
        self.index.get(&kind).copied()
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn var_name(&self, k: usize) -> String {
        self.vars[k].kind.to_string()
    }

    pub fn count_domain(&self, d: Domain) -> usize {
        self.vars.iter().filter(|v| v.domain == d).count()
    }

    pub fn count_family(&self, family: &str) -> usize {
        self.rows.iter().filter(|r| r.tag.family == family).count()
    }

    /// Continuous relaxation.
    pub fn to_lp(&self) -> LpProblem {
        let mut lp = LpProblem::new();
        for (v, &c) in self.vars.iter().zip(&self.objective) {
            lp.add_col(c, v.lower, v.upper);
        }
        for row in &self.rows {
            let (lo, hi) = match row.sense {
                Sense::Le => (f64::NEG_INFINITY, row.rhs),
                Sense::Ge => (row.rhs, f64::INFINITY),
                Sense::Eq => (row.rhs, row.rhs),
            };
            lp.add_row(row.coefs.clone(), lo, hi);
        }
        lp.objective_offset = self.objective_constant;
        lp
    }

    /// Branch-and-bound view: branching on unit-status binaries only, with
    /// one combination group per security-active step.
    pub fn to_mip(&self) -> MipProblem {
        let integer = self.vars.iter().map(|v| v.domain != Domain::Continuous).collect();
        let branchable = self
            .vars
            .iter()
            .map(|v| {
                matches!(
                    v.kind,
                    VarKind::Z { .. }
                        | VarKind::U { .. }
                        | VarKind::ZCharge { .. }
                        | VarKind::ZDischarge { .. }
                        | VarKind::ZBess { .. }
                )
            })
            .collect();
        let status = self
            .vars
            .iter()
            .map(|v| matches!(v.kind, VarKind::Z { .. } | VarKind::ZBess { .. }))
            .collect();
        let mut groups = Vec::new();
        for t in 0..self.horizon {
            if !self.v[t] {
                continue;
            }
            let units = (0..self.unit_ids.len())
                .map(|r| self.var(self.unit_status_kind(r, t)).expect("unit status"))
                .collect();
            let combos = self
                .combinations
                .iter()
                .map(|c| {
                    (
                        c.members.clone(),
                        self.var(VarKind::S { j: c.index, t }).expect("s var"),
                        self.var(VarKind::F { j: c.index, t }).expect("f var"),
                    )
                })
                .collect();
            groups.push(CombinationGroup { units, combos });
        }
        MipProblem {
            lp: self.to_lp(),
            integer,
            branchable,
            status,
            groups,
        }
    }

    fn unit_status_kind(&self, r: usize, t: usize) -> VarKind {
        if r < self.dg_ids.len() {
            VarKind::Z { i: r, t }
        } else {
            VarKind::ZBess { t }
        }
    }
}

struct Builder {
    vars: Vec<VarRef>,
    objective: Vec<f64>,
    index: HashMap<VarKind, usize>,
    rows: Vec<Row>,
}

impl Builder {
    fn add(&mut self, kind: VarKind, domain: Domain, lower: f64, upper: f64, cost: f64) -> usize {
        let k = self.vars.len();
        self.vars.push(VarRef { kind, domain, lower, upper });
        self.objective.push(cost);
        self.index.insert(kind, k);
        k
    }

    fn row(&mut self, tag: RowTag, mut coefs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        coefs.retain(|&(_, a)| a != 0.0);
        self.rows.push(Row { tag, coefs, sense, rhs });
    }
}

/// Builds the full model for `config` over `profile`.
pub fn build_model(
    config: &ScenarioConfig,
    curves: &[PiecewiseFuelCurve],
    profile: &LoadProfile,
) -> Result<MilpModel, ModelError> {
    let n = config.n_dgs();
    let horizon = config.horizon;
    if curves.len() != n {
        return Err(ModelError::Misaligned { what: "fuel curves", got: curves.len(), want: n });
    }
    if profile.len() != horizon {
        return Err(ModelError::Misaligned { what: "profile steps", got: profile.len(), want: horizon });
    }
    let dt = config.dt;
    let bess = config.bess.as_ref();
    let mut unit_ids: Vec<String> = config.dgs.iter().map(|d| d.id.clone()).collect();
    if bess.is_some() {
        unit_ids.push("BESS".to_string());
    }
    let v: Vec<bool> = (0..horizon).map(|t| profile.v(t)).collect();
    let any_active = v.iter().any(|&a| a);
    let combinations = if any_active {
        enumerate_combinations(&unit_ids)?
    } else {
        Vec::new()
    };
    let mut b = Builder {
        vars: Vec::new(),
        objective: Vec::new(),
        index: HashMap::new(),
        rows: Vec::new(),
    };

    // variable table, step by step
    for t in 0..horizon {
        for (i, (dg, curve)) in config.dgs.iter().zip(curves).enumerate() {
            let bp = curve.breakpoints();
            for m in 0..curve.n_segments() {
                let width = bp[m + 1] - bp[m];
                let cost = curve.segment_slopes[m] * config.fuel_price * dt;
                b.add(VarKind::Delta { m, i, t }, Domain::Continuous, 0.0, width, cost);
            }
            b.add(VarKind::PDg { i, t }, Domain::Continuous, 0.0, dg.c_max * dg.rated_power, 0.0);
            let z_cost = curve.intercept * config.fuel_price * dt;
            b.add(VarKind::Z { i, t }, Domain::Binary, 0.0, 1.0, z_cost);
            b.add(VarKind::U { i, t }, Domain::Binary, 0.0, 1.0, dg.startup_cost);
        }
        if let Some(bs) = bess {
            b.add(VarKind::PCharge { t }, Domain::Continuous, 0.0, bs.max_charge(), 0.0);
            b.add(VarKind::PDischarge { t }, Domain::Continuous, 0.0, bs.max_discharge(), 0.0);
            b.add(VarKind::Soc { t }, Domain::Continuous, bs.soc_min, bs.soc_max, 0.0);
            b.add(VarKind::ZCharge { t }, Domain::Binary, 0.0, 1.0, 0.0);
            b.add(VarKind::ZDischarge { t }, Domain::Binary, 0.0, 1.0, 0.0);
            b.add(VarKind::ZBess { t }, Domain::Binary, 0.0, 1.0, 0.0);
        }
        if v[t] {
            for c in &combinations {
                b.add(VarKind::S { j: c.index, t }, Domain::Binary, 0.0, 1.0, 0.0);
                b.add(VarKind::F { j: c.index, t }, Domain::Integer, 0.0, c.size() as f64, 0.0);
            }
        }
    }
    let ix = |b: &Builder, k: VarKind| b.index[&k];

    for t in 0..horizon {
        for (i, (dg, curve)) in config.dgs.iter().zip(curves).enumerate() {
            let p = ix(&b, VarKind::PDg { i, t });
            let z = ix(&b, VarKind::Z { i, t });
            let u = ix(&b, VarKind::U { i, t });

            let mut agg = vec![(p, 1.0)];
            for m in 0..curve.n_segments() {
                agg.push((ix(&b, VarKind::Delta { m, i, t }), -1.0));
            }
            b.row(RowTag::unit("E2", i, t), agg, Sense::Eq, 0.0);

            let pn = dg.rated_power;
            b.row(RowTag::unit("E4", i, t), vec![(p, 1.0), (z, -dg.c_max * pn)], Sense::Le, 0.0);
            b.row(RowTag::unit("E5", i, t), vec![(p, 1.0), (z, -dg.c_min * pn)], Sense::Ge, 0.0);

            if t == 0 {
                let init = if config.initial_state(i).on { 1.0 } else { 0.0 };
                b.row(RowTag::unit("E6", i, t), vec![(z, 1.0), (u, -1.0)], Sense::Le, init);
            } else {
                let zp = ix(&b, VarKind::Z { i, t: t - 1 });
                b.row(RowTag::unit("E6", i, t), vec![(z, 1.0), (zp, -1.0), (u, -1.0)], Sense::Le, 0.0);
            }

            // minimum up: a start at t needs the unit on over the following window
            let up: Vec<usize> = (1..=dg.min_up_steps(dt)).map(|k| t + k).filter(|&s| s < horizon).collect();
            if !up.is_empty() {
                let w = 1.0 / up.len() as f64;
                let mut coefs = vec![(u, 1.0)];
                coefs.extend(up.iter().map(|&s| (ix(&b, VarKind::Z { i, t: s }), -w)));
                b.row(RowTag::unit("E7", i, t), coefs, Sense::Le, 0.0);
            }
            let down: Vec<usize> = (1..=dg.min_down_steps(dt)).filter(|&k| k <= t).map(|k| t - k).collect();
            if !down.is_empty() {
                let w = 1.0 / down.len() as f64;
                let mut coefs = vec![(u, 1.0)];
                coefs.extend(down.iter().map(|&s| (ix(&b, VarKind::Z { i, t: s }), w)));
                b.row(RowTag::unit("E8", i, t), coefs, Sense::Le, 1.0);
            }

            if t > 0 {
                let pp = ix(&b, VarKind::PDg { i, t: t - 1 });
                b.row(RowTag::unit("E9", i, t), vec![(p, 1.0), (pp, -1.0)], Sense::Le, dg.ramp_up_per_step(dt));
                b.row(RowTag::unit("E10", i, t), vec![(pp, 1.0), (p, -1.0)], Sense::Le, dg.ramp_down_per_step(dt));
            }
        }

        if let Some(bs) = bess {
            let pc = ix(&b, VarKind::PCharge { t });
            let pd = ix(&b, VarKind::PDischarge { t });
            let soc = ix(&b, VarKind::Soc { t });
            let zc = ix(&b, VarKind::ZCharge { t });
            let zd = ix(&b, VarKind::ZDischarge { t });
            let zb = ix(&b, VarKind::ZBess { t });
            let kc = bs.eta_charge * dt / bs.rated_energy;
            let kd = dt / (bs.eta_discharge * bs.rated_energy);
            let mut coefs = vec![(soc, 1.0), (pc, -kc), (pd, kd)];
            let rhs = if t == 0 {
                bs.soc_initial
            } else {
                coefs.push((ix(&b, VarKind::Soc { t: t - 1 }), -1.0));
                0.0
            };
            b.row(RowTag::at("E1", t), coefs, Sense::Eq, rhs);
            if t + 1 == horizon {
                b.row(RowTag::at("SOCT", t), vec![(soc, 1.0)], Sense::Eq, bs.soc_final);
            }
            let pn = bs.rated_power;
            b.row(RowTag::at("E12", t), vec![(pc, 1.0), (zc, -bs.c_charge_max * pn)], Sense::Le, 0.0);
            b.row(RowTag::at("E13", t), vec![(pc, 1.0), (zc, -bs.c_charge_min * pn)], Sense::Ge, 0.0);
            b.row(RowTag::at("E14", t), vec![(pd, 1.0), (zd, -bs.c_discharge_max * pn)], Sense::Le, 0.0);
            b.row(RowTag::at("E15", t), vec![(pd, 1.0), (zd, -bs.c_discharge_min * pn)], Sense::Ge, 0.0);
            b.row(RowTag::at("E16", t), vec![(zc, 1.0), (zd, 1.0), (zb, -1.0)], Sense::Eq, 0.0);
        }

        if v[t] {
            add_security_rows(&mut b, config, &combinations, profile.load(t), t);
        }

        let mut lb: Vec<(usize, f64)> = (0..n).map(|i| (ix(&b, VarKind::PDg { i, t }), 1.0)).collect();
        if bess.is_some() {
            lb.push((ix(&b, VarKind::PDischarge { t }), 1.0));
            lb.push((ix(&b, VarKind::PCharge { t }), -1.0));
        }
        b.row(RowTag::at("LB", t), lb, Sense::Eq, profile.load(t));
    }

    Ok(MilpModel {
        vars: b.vars,
        rows: b.rows,
        objective: b.objective,
        objective_constant: 0.0,
        combinations,
        unit_ids,
        dg_ids: config.dgs.iter().map(|d| d.id.clone()).collect(),
        horizon,
        dt,
        n_segments: curves.iter().map(|c| c.n_segments()).collect(),
        bess: config.bess.clone(),
        p_load: (0..horizon).map(|t| profile.load(t)).collect(),
        v,
        index: b.index,
    })
}

/// Per-unit data used by the security rows: status var, power var, rated
/// power, overload and load-step factors.
struct UnitData {
    z: usize,
    p: usize,
    rated: f64,
    alpha: f64,
    beta: f64,
}

fn add_security_rows(
    b: &mut Builder,
    config: &ScenarioConfig,
    combinations: &[Combination],
    load: f64,
    t: usize,
) {
    let big_m = config.security.big_m;
    let mut units: Vec<UnitData> = config
        .dgs
        .iter()
        .enumerate()
        .map(|(i, dg)| UnitData {
            z: b.index[&VarKind::Z { i, t }],
            p: b.index[&VarKind::PDg { i, t }],
            rated: dg.rated_power,
            alpha: dg.alpha,
            beta: dg.beta,
        })
        .collect();
    let pc = config.bess.as_ref().map(|bs| {
        units.push(UnitData {
            z: b.index[&VarKind::ZBess { t }],
            p: b.index[&VarKind::PDischarge { t }],
            rated: bs.rated_power,
            alpha: bs.alpha,
            beta: bs.beta(),
        });
        b.index[&VarKind::PCharge { t }]
    });

    let s_of = |b: &Builder, j| b.index[&VarKind::S { j, t }];
    let sum: Vec<(usize, f64)> = combinations.iter().map(|c| (s_of(b, c.index), 1.0)).collect();
    b.row(RowTag::at("E18", t), sum, Sense::Eq, 1.0);

    for c in combinations {
        let j = c.index;
        let s = s_of(b, j);
        let f = b.index[&VarKind::F { j, t }];
        let mut coefs = vec![(f, 1.0)];
        coefs.extend(c.members.iter().map(|&r| (units[r].z, -1.0)));
        b.row(RowTag::combo("E19", j, None, t), coefs, Sense::Eq, 0.0);
        b.row(
            RowTag::combo("E20", j, None, t),
            vec![(f, 1.0), (s, -(c.size() as f64))],
            Sense::Ge,
            0.0,
        );
    }
    for c in combinations {
        let j = c.index;
        let s = s_of(b, j);
        for &r in &c.members {
            let others = c.members.iter().filter(|&&h| h != r);

            let mut coefs = vec![(s, load + big_m)];
            if let Some(pc) = pc {
                coefs.push((pc, 1.0));
            }
            coefs.extend(others.clone().map(|&h| (units[h].z, -units[h].alpha * units[h].rated)));
            b.row(RowTag::combo("E21", j, Some(r), t), coefs, Sense::Le, big_m);

            let cover: f64 = others.map(|&h| units[h].beta * units[h].rated).sum();
            b.row(
                RowTag::combo("E22", j, Some(r), t),
                vec![(units[r].p, 1.0), (s, big_m)],
                Sense::Le,
                big_m + cover,
            );
            let headroom = (units[r].alpha - units[r].beta) * units[r].rated;
            b.row(
                RowTag::combo("E23", j, Some(r), t),
                vec![(units[r].p, 1.0), (s, big_m)],
                Sense::Le,
                big_m + headroom,
            );
        }
    }
}

/// One step of a dispatch schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleStep {
    pub p_dg: Vec<f64>,
    /// Segment loadings per generator; empty when not known.
    #[serde(default)]
    pub delta: Vec<Vec<f64>>,
    pub z: Vec<bool>,
    pub u: Vec<bool>,
    pub p_charge: f64,
    pub p_discharge: f64,
    /// Fraction of rated energy at the end of the step.
    pub soc: Option<f64>,
    pub z_charge: bool,
    pub z_discharge: bool,
    pub p_load: f64,
    pub v: bool,
}

impl ScheduleStep {
    pub fn bess_online(&self) -> bool {
        self.z_charge || self.z_discharge
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub dg_ids: Vec<String>,
    pub has_bess: bool,
    pub dt: f64,
    pub steps: Vec<ScheduleStep>,
}

impl Schedule {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn n_dgs(&self) -> usize {
        self.dg_ids.len()
    }
}

/// Reads a solver assignment back into a typed schedule.
pub fn extract_schedule(model: &MilpModel, x: &[f64]) -> Result<Schedule, ModelError> {
    if x.len() != model.n_vars() {
        return Err(ModelError::Misaligned { what: "assignment", got: x.len(), want: model.n_vars() });
    }
    for (k, v) in model.vars.iter().enumerate() {
        if v.domain != Domain::Continuous && (x[k] - x[k].round()).abs() > INTEGRALITY_TOL {
            return Err(ModelError::Integrality { name: model.var_name(k), value: x[k] });
        }
    }
    let get = |kind: VarKind| -> f64 {
        let k = model.var(kind).expect("variable exists");
        let v = &model.vars[k];
        if v.domain == Domain::Continuous {
            // clear solver noise at the bounds
            let val = x[k];
            if (val - v.lower).abs() < 1e-9 {
                v.lower
            } else if (val - v.upper).abs() < 1e-9 {
                v.upper
            } else {
                val
            }
        } else {
            x[k].round()
        }
    };
    let bit = |kind: VarKind| get(kind) > 0.5;
    let n = model.dg_ids.len();
    let mut soc_prev = model.bess.as_ref().map(|b| b.soc_initial);
    let mut steps = Vec::with_capacity(model.horizon);
    for t in 0..model.horizon {
        let delta: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..model.n_segments[i]).map(|m| get(VarKind::Delta { m, i, t })).collect())
            .collect();
        let mut step = ScheduleStep {
            p_dg: (0..n).map(|i| get(VarKind::PDg { i, t })).collect(),
            delta,
            z: (0..n).map(|i| bit(VarKind::Z { i, t })).collect(),
            u: (0..n).map(|i| bit(VarKind::U { i, t })).collect(),
            p_charge: 0.0,
            p_discharge: 0.0,
            soc: None,
            z_charge: false,
            z_discharge: false,
            p_load: model.p_load[t],
            v: model.v[t],
        };
        if let Some(bs) = &model.bess {
            step.p_charge = get(VarKind::PCharge { t });
            step.p_discharge = get(VarKind::PDischarge { t });
            step.z_charge = bit(VarKind::ZCharge { t });
            step.z_discharge = bit(VarKind::ZDischarge { t });
            let prev = soc_prev.expect("bess has initial soc");
            let replay = prev
                + (step.p_charge * bs.eta_charge - step.p_discharge / bs.eta_discharge) * model.dt
                    / bs.rated_energy;
            let solver = x[model.var(VarKind::Soc { t }).expect("soc")];
            if (replay - solver).abs() > SOC_TOL {
                return Err(ModelError::SocDrift { t, solver, replay });
            }
            step.soc = Some(replay);
            soc_prev = Some(replay);
        }
        steps.push(step);
    }
    Ok(Schedule {
        dg_ids: model.dg_ids.clone(),
        has_bess: model.bess.is_some(),
        dt: model.dt,
        steps,
    })
}
