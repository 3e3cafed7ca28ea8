//! Plant, price, horizon and security-policy description of a run.
//!
//! A scenario is a single JSON document. Units are fixed: power in MW, energy
//! in MWh, time steps in hours, minimum up/down times in minutes, ramp limits
//! in MW per minute, prices in EUR and masses in kg.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum number of generating units that must be online on a
/// security-active step.
pub const MIN_ONLINE_UNITS: usize = 2;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl ScenarioError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Field path of a validation failure, if this is one.
    pub fn field(&self) -> Option<&str> {
        match self {
            ScenarioError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

/// One datasheet sample: (fraction of rated power, SFOC in g/kWh).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfocPoint(pub f64, pub f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DieselGenSpec {
    pub id: String,
    /// MW.
    pub rated_power: f64,
    pub c_min: f64,
    pub c_max: f64,
    /// Minutes.
    pub min_up_time: f64,
    /// Minutes.
    pub min_down_time: f64,
    /// MW per minute.
    pub ramp_up: f64,
    /// MW per minute.
    pub ramp_down: f64,
    /// Emergency overload factor.
    pub alpha: f64,
    /// Largest instantaneous load step the unit absorbs, fraction of rated.
    pub beta: f64,
    /// EUR per start.
    pub startup_cost: f64,
    pub sfoc_points: Vec<SfocPoint>,
}

impl DieselGenSpec {
    /// Ramp-up limit over one step of `dt` hours, in MW.
    pub fn ramp_up_per_step(&self, dt: f64) -> f64 {
        self.ramp_up * dt * 60.0
    }

    pub fn ramp_down_per_step(&self, dt: f64) -> f64 {
        self.ramp_down * dt * 60.0
    }

    /// Minimum up time in whole steps.
    pub fn min_up_steps(&self, dt: f64) -> usize {
        (self.min_up_time / (dt * 60.0)).round() as usize
    }

    pub fn min_down_steps(&self, dt: f64) -> usize {
        (self.min_down_time / (dt * 60.0)).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BessSpec {
    /// MW.
    pub rated_power: f64,
    /// MWh.
    pub rated_energy: f64,
    pub soc_initial: f64,
    pub soc_final: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
    pub c_charge_min: f64,
    pub c_charge_max: f64,
    pub c_discharge_min: f64,
    pub c_discharge_max: f64,
    pub alpha: f64,
    /// Defaults to `alpha`: the converter can take a full emergency step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl BessSpec {
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(self.alpha)
    }

    pub fn max_charge(&self) -> f64 {
        self.c_charge_max * self.rated_power
    }

    pub fn max_discharge(&self) -> f64 {
        self.c_discharge_max * self.rated_power
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityConfig {
    pub big_m: f64,
    /// Operating conditions on which the N-1 constraints are enforced.
    pub v_active_ocs: BTreeSet<String>,
    #[serde(default = "default_min_online")]
    pub min_online_units: usize,
}

fn default_min_online() -> usize {
    MIN_ONLINE_UNITS
}

/// Status of one generator before the first step of the horizon.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialUnitState {
    pub on: bool,
    /// MW.
    #[serde(default)]
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dgs: Vec<DieselGenSpec>,
    #[serde(default)]
    pub bess: Option<BessSpec>,
    #[serde(rename = "fuel_price_eur_per_kg")]
    pub fuel_price: f64,
    #[serde(rename = "co2_kg_per_kg_fuel")]
    pub co2_factor: f64,
    #[serde(rename = "dt_hours")]
    pub dt: f64,
    #[serde(rename = "horizon_steps")]
    pub horizon: usize,
    pub n_segments: usize,
    pub security: SecurityConfig,
    /// One entry per generator; empty means every unit starts off.
    #[serde(default)]
    pub initial_commitment: Vec<InitialUnitState>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let config: ScenarioConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn n_dgs(&self) -> usize {
        self.dgs.len()
    }

    /// Initial state of generator `i`, all-off when not given.
    pub fn initial_state(&self, i: usize) -> InitialUnitState {
        self.initial_commitment.get(i).copied().unwrap_or_default()
    }

    /// Same scenario without the storage system.
    pub fn without_bess(&self) -> ScenarioConfig {
        ScenarioConfig {
            bess: None,
            ..self.clone()
        }
    }

    /// Checks every invariant and reports the first violation.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let step_minutes = self.dt * 60.0;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(ScenarioError::invalid("dt_hours", "must be positive"));
        }
        if self.horizon < 1 {
            return Err(ScenarioError::invalid("horizon_steps", "must be at least 1"));
        }
        if self.n_segments < 1 {
            return Err(ScenarioError::invalid("n_segments", "must be at least 1"));
        }
        if self.dgs.is_empty() {
            return Err(ScenarioError::invalid("dgs", "at least one generator is required"));
        }
        if !(self.fuel_price > 0.0) {
            return Err(ScenarioError::invalid(
                "fuel_price_eur_per_kg",
                "must be positive",
            ));
        }
        if !(self.co2_factor >= 0.0) {
            return Err(ScenarioError::invalid(
                "co2_kg_per_kg_fuel",
                "must be non-negative",
            ));
        }

        let mut ids = BTreeSet::new();
        for (i, dg) in self.dgs.iter().enumerate() {
            let f = |name: &str| format!("dgs[{i}].{name}");
            if !ids.insert(dg.id.as_str()) {
                return Err(ScenarioError::invalid(f("id"), "duplicate generator id"));
            }
            if !(dg.rated_power > 0.0) {
                return Err(ScenarioError::invalid(f("rated_power"), "must be positive"));
            }
            if !(dg.c_min >= 0.0) {
                return Err(ScenarioError::invalid(f("c_min"), "must be non-negative"));
            }
            if !(dg.c_min <= dg.c_max) {
                return Err(ScenarioError::invalid(f("c_max"), "must not be below c_min"));
            }
            if !(dg.c_max <= dg.alpha) {
                return Err(ScenarioError::invalid(f("alpha"), "must not be below c_max"));
            }
            if !(dg.beta > 0.0 && dg.beta <= dg.alpha) {
                return Err(ScenarioError::invalid(f("beta"), "must lie in (0, alpha]"));
            }
            for (name, minutes) in [
                ("min_up_time", dg.min_up_time),
                ("min_down_time", dg.min_down_time),
            ] {
                let steps = minutes / step_minutes;
                if !(minutes > 0.0) || (steps - steps.round()).abs() > 1e-9 {
                    return Err(ScenarioError::invalid(
                        f(name),
                        format!("{minutes} min is not a positive multiple of the {step_minutes} min step"),
                    ));
                }
            }
            if !(dg.ramp_up >= 0.0) {
                return Err(ScenarioError::invalid(f("ramp_up"), "must be non-negative"));
            }
            if !(dg.ramp_down >= 0.0) {
                return Err(ScenarioError::invalid(f("ramp_down"), "must be non-negative"));
            }
            if !(dg.startup_cost >= 0.0) {
                return Err(ScenarioError::invalid(f("startup_cost"), "must be non-negative"));
            }
            if dg.sfoc_points.len() < 3 {
                return Err(ScenarioError::invalid(
                    f("sfoc_points"),
                    "at least 3 samples are required",
                ));
            }
            if dg
                .sfoc_points
                .windows(2)
                .any(|w| !(w[1].0 > w[0].0))
            {
                return Err(ScenarioError::invalid(
                    f("sfoc_points"),
                    "power fractions must be strictly increasing",
                ));
            }
        }

        if let Some(b) = &self.bess {
            let f = |name: &str| format!("bess.{name}");
            if !(b.rated_power > 0.0) {
                return Err(ScenarioError::invalid(f("rated_power"), "must be positive"));
            }
            if !(b.rated_energy > 0.0) {
                return Err(ScenarioError::invalid(f("rated_energy"), "must be positive"));
            }
            if !(0.0 <= b.soc_min && b.soc_max <= 1.0) {
                return Err(ScenarioError::invalid(f("soc_max"), "SOC limits must lie in [0, 1]"));
            }
            if !(b.soc_min <= b.soc_max) {
                return Err(ScenarioError::invalid(f("soc_min"), "must not exceed soc_max"));
            }
            if !(b.soc_min <= b.soc_initial && b.soc_initial <= b.soc_max) {
                return Err(ScenarioError::invalid(
                    f("soc_initial"),
                    "must lie within [soc_min, soc_max]",
                ));
            }
            if !(b.soc_min <= b.soc_final && b.soc_final <= b.soc_max) {
                return Err(ScenarioError::invalid(
                    f("soc_final"),
                    "must lie within [soc_min, soc_max]",
                ));
            }
            for (name, eta) in [("eta_charge", b.eta_charge), ("eta_discharge", b.eta_discharge)] {
                if !(eta > 0.0 && eta <= 1.0) {
                    return Err(ScenarioError::invalid(f(name), "must lie in (0, 1]"));
                }
            }
            if !(b.c_charge_min >= 0.0) {
                return Err(ScenarioError::invalid(f("c_charge_min"), "must be non-negative"));
            }
            if !(b.c_charge_min <= b.c_charge_max) {
                return Err(ScenarioError::invalid(f("c_charge_max"), "must not be below c_charge_min"));
            }
            if !(b.c_discharge_min >= 0.0) {
                return Err(ScenarioError::invalid(f("c_discharge_min"), "must be non-negative"));
            }
            if !(b.c_discharge_min <= b.c_discharge_max) {
                return Err(ScenarioError::invalid(
                    f("c_discharge_max"),
                    "must not be below c_discharge_min",
                ));
            }
            if !(b.c_discharge_max <= b.alpha) {
                return Err(ScenarioError::invalid(f("alpha"), "must not be below c_discharge_max"));
            }
            if let Some(beta) = b.beta {
                if !(beta > 0.0 && beta <= b.alpha) {
                    return Err(ScenarioError::invalid(f("beta"), "must lie in (0, alpha]"));
                }
            }
        }

        let sec = &self.security;
        if sec.min_online_units != MIN_ONLINE_UNITS {
            return Err(ScenarioError::invalid(
                "security.min_online_units",
                format!("must be {MIN_ONLINE_UNITS}"),
            ));
        }
        let mut largest = 0.0f64;
        for dg in &self.dgs {
            largest = largest.max(dg.rated_power * dg.alpha);
        }
        if let Some(b) = &self.bess {
            largest = largest.max(b.rated_power * b.alpha);
        }
        let max_rated = self
            .dgs
            .iter()
            .map(|d| d.rated_power)
            .chain(self.bess.iter().map(|b| b.rated_power))
            .fold(0.0, f64::max);
        let max_alpha = self
            .dgs
            .iter()
            .map(|d| d.alpha)
            .chain(self.bess.iter().map(|b| b.alpha))
            .fold(0.0, f64::max);
        if !(sec.big_m >= 10.0 * max_rated * max_alpha) {
            return Err(ScenarioError::invalid(
                "security.big_m",
                format!(
                    "must be at least {} (10x largest rated power x largest alpha)",
                    10.0 * max_rated * max_alpha
                ),
            ));
        }
        debug_assert!(largest <= max_rated * max_alpha);

        if !self.initial_commitment.is_empty() {
            if self.initial_commitment.len() != self.dgs.len() {
                return Err(ScenarioError::invalid(
                    "initial_commitment",
                    "needs one entry per generator",
                ));
            }
            for (i, (init, dg)) in self.initial_commitment.iter().zip(&self.dgs).enumerate() {
                let upper = if init.on { dg.c_max * dg.rated_power } else { 0.0 };
                if !(init.power >= 0.0 && init.power <= upper + 1e-12) {
                    return Err(ScenarioError::invalid(
                        format!("initial_commitment[{i}].power"),
                        "must be zero when off and within the dispatch range when on",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioConfig::from_json(&text)
}

/// The bundled reference plant: four generators, one battery, 6 h at 15 min.
pub const REFERENCE_SCENARIO_JSON: &str = include_str!("../data/reference.json");

pub fn reference_scenario() -> ScenarioConfig {
    ScenarioConfig::from_json(REFERENCE_SCENARIO_JSON).expect("bundled reference scenario is valid")
}
