//! Synthetic ship load profiles.
//!
//! Total load per step is propulsion power, driven by a Markov-chain speed over
//! ground, plus the hotel load of the current operating condition with
//! truncated Gaussian noise. Profiles are reproducible: the generator is
//! `ChaCha8Rng` seeded from a `u64`, normals come from `rand_distr`'s
//! `StandardNormal` (ziggurat), and rejected draws beyond 3 sigma are redrawn.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::ScenarioConfig;

const STATE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LoadGenError {
    #[error("speed series is empty or too short")]
    EmptySeries,
    #[error("state list is empty")]
    NoStates,
    #[error("states must be strictly increasing and non-negative")]
    BadStates,
    #[error("transition matrix row {row}: {reason}")]
    BadTransition { row: usize, reason: String },
    #[error("operating condition `{oc}` uses speed {sog} kn which is not a chain state")]
    UnknownSog { oc: String, sog: f64 },
    #[error("operating condition `{0}` is not defined")]
    UnknownOc(String),
    #[error("operating condition `{oc}`: {reason}")]
    BadCondition { oc: String, reason: String },
    #[error("operating schedule covers {got} steps but the horizon is {want}")]
    HorizonMismatch { got: usize, want: usize },
    #[error("total load at step {0} is not positive")]
    NonPositiveLoad(usize),
    #[error("load profile csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCondition {
    pub name: String,
    /// MW.
    pub hotel_load: f64,
    /// Admissible speeds in knots, strictly increasing.
    pub sog_states: Vec<f64>,
    pub security_active: bool,
}

impl OperatingCondition {
    fn validate(&self) -> Result<(), LoadGenError> {
        let bad = |reason: &str| LoadGenError::BadCondition {
            oc: self.name.clone(),
            reason: reason.to_string(),
        };
        if !(self.hotel_load >= 0.0) {
            return Err(bad("hotel load must be non-negative"));
        }
        if self.sog_states.is_empty() {
            return Err(bad("needs at least one speed state"));
        }
        if self.sog_states[0] < 0.0 || self.sog_states.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(bad("speed states must be non-negative and strictly increasing"));
        }
        Ok(())
    }
}

/// Discrete speed-over-ground chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovChain {
    pub states: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

impl MarkovChain {
    pub fn new(states: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self, LoadGenError> {
        let chain = MarkovChain { states, transition };
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<(), LoadGenError> {
        validate_states(&self.states)?;
        let n = self.states.len();
        if self.transition.len() != n {
            return Err(LoadGenError::BadTransition {
                row: self.transition.len().min(n),
                reason: format!("matrix must be {n} x {n}"),
            });
        }
        for (row, probs) in self.transition.iter().enumerate() {
            if probs.len() != n {
                return Err(LoadGenError::BadTransition {
                    row,
                    reason: format!("has {} entries, expected {n}", probs.len()),
                });
            }
            if probs.iter().any(|p| !(*p >= 0.0)) {
                return Err(LoadGenError::BadTransition {
                    row,
                    reason: "negative probability".into(),
                });
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(LoadGenError::BadTransition {
                    row,
                    reason: format!("sums to {sum}"),
                });
            }
        }
        Ok(())
    }

    pub fn index_of(&self, sog: f64) -> Option<usize> {
        self.states.iter().position(|s| (s - sog).abs() <= STATE_TOL)
    }

    fn nearest(&self, sog: f64) -> usize {
        nearest_index(&self.states, sog)
    }
}

fn validate_states(states: &[f64]) -> Result<(), LoadGenError> {
    if states.is_empty() {
        return Err(LoadGenError::NoStates);
    }
    if states[0] < 0.0 || states.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LoadGenError::BadStates);
    }
    Ok(())
}

/// Index of the state closest to `x`; ties go to the lower state.
fn nearest_index(states: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (k, s) in states.iter().enumerate() {
        if (s - x).abs() < (states[best] - x).abs() {
            best = k;
        }
    }
    best
}

/// Maximum-likelihood transition matrix from an observed speed series.
///
/// Samples are snapped to the nearest state. States never left in the series
/// get a self-loop.
pub fn estimate_chain(sog_series: &[f64], states: &[f64]) -> Result<MarkovChain, LoadGenError> {
    validate_states(states)?;
    if sog_series.len() < 2 {
        return Err(LoadGenError::EmptySeries);
    }
    let n = states.len();
    let idx: Vec<usize> = sog_series.iter().map(|&s| nearest_index(states, s)).collect();
    let mut counts = vec![vec![0u64; n]; n];
    for w in idx.windows(2) {
        counts[w[0]][w[1]] += 1;
    }
    let transition = counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                (0..n).map(|j| if j == i { 1.0 } else { 0.0 }).collect()
            } else {
                row.iter().map(|&c| c as f64 / total as f64).collect()
            }
        })
        .collect();
    MarkovChain::new(states.to_vec(), transition)
}

/// Cubic propeller law calibrated at one design point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropulsionCalibration {
    /// Knots.
    pub design_sog: f64,
    /// MW.
    pub design_power: f64,
}

/// Propulsion power in MW at `sog` knots, capped at the design power.
pub fn propulsion_power(sog: f64, calibration: PropulsionCalibration) -> f64 {
    let ratio = (sog / calibration.design_sog).max(0.0);
    (calibration.design_power * ratio.powi(3)).min(calibration.design_power)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadStep {
    /// MW.
    pub total_load: f64,
    /// Knots.
    pub sog: f64,
    pub oc_name: String,
    /// Security constraints enforced on this step.
    pub v: bool,
    pub p_prop: f64,
    pub p_hotel: f64,
}

/// Per-step ship load over the optimization horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    pub steps: Vec<LoadStep>,
}

impl LoadProfile {
    /// Profile from bare loads and security flags, for hand-built cases.
    pub fn from_loads(loads: &[f64], v: &[bool]) -> Self {
        assert_eq!(loads.len(), v.len());
        let steps = loads
            .iter()
            .zip(v)
            .map(|(&l, &v)| LoadStep {
                total_load: l,
                sog: 0.0,
                oc_name: String::from("custom"),
                v,
                p_prop: 0.0,
                p_hotel: l,
            })
            .collect();
        LoadProfile { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn load(&self, t: usize) -> f64 {
        self.steps[t].total_load
    }

    pub fn v(&self, t: usize) -> bool {
        self.steps[t].v
    }

    pub fn active_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.v).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), LoadGenError> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| LoadGenError::Csv(e.to_string());
        w.write_record(["t", "oc", "sog_kn", "p_prop_mw", "p_hotel_mw", "p_load_mw", "v"])
            .map_err(csv_err)?;
        for (t, s) in self.steps.iter().enumerate() {
            w.write_record([
                (t + 1).to_string(),
                s.oc_name.clone(),
                s.sog.to_string(),
                s.p_prop.to_string(),
                s.p_hotel.to_string(),
                s.total_load.to_string(),
                u8::from(s.v).to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, LoadGenError> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = r
            .headers()
            .map_err(|e| LoadGenError::Csv(e.to_string()))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| LoadGenError::Csv(format!("missing column `{name}`")))
        };
        let (c_t, c_oc, c_sog, c_prop, c_hotel, c_load, c_v) = (
            col("t")?,
            col("oc")?,
            col("sog_kn")?,
            col("p_prop_mw")?,
            col("p_hotel_mw")?,
            col("p_load_mw")?,
            col("v")?,
        );
        let mut steps = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| LoadGenError::Csv(e.to_string()))?;
            let num = |c: usize| -> Result<f64, LoadGenError> {
                rec.get(c)
                    .unwrap_or("")
                    .parse::<f64>()
                    .map_err(|e| LoadGenError::Csv(format!("row {}: {e}", k + 1)))
            };
            let t = num(c_t)?;
            if t != (k + 1) as f64 {
                return Err(LoadGenError::Csv(format!("row {}: expected t = {}", k + 1, k + 1)));
            }
            let v = match rec.get(c_v).unwrap_or("") {
                "0" => false,
                "1" => true,
                other => {
                    return Err(LoadGenError::Csv(format!("row {}: v must be 0 or 1, got `{other}`", k + 1)))
                }
            };
            let total = num(c_load)?;
            if !(total > 0.0) {
                return Err(LoadGenError::NonPositiveLoad(k + 1));
            }
            steps.push(LoadStep {
                total_load: total,
                sog: num(c_sog)?,
                oc_name: rec.get(c_oc).unwrap_or("").to_string(),
                v,
                p_prop: num(c_prop)?,
                p_hotel: num(c_hotel)?,
            });
        }
        if steps.is_empty() {
            return Err(LoadGenError::Csv("profile has no rows".into()));
        }
        Ok(LoadProfile { steps })
    }
}

/// Parameters of the load synthesis that are not part of the chain or the
/// operating schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    pub propulsion: PropulsionCalibration,
    /// Standard deviation of the hotel load as a fraction of its mean.
    pub hotel_noise_rel_std: f64,
    /// Speed the ship holds before the first step; defaults to the lowest
    /// chain state.
    pub initial_sog: Option<f64>,
}

/// Samples one load profile over the scenario horizon.
pub fn sample_profile(
    chain: &MarkovChain,
    ocs: &[(OperatingCondition, usize)],
    config: &ScenarioConfig,
    params: &ProfileParams,
    seed: u64,
) -> Result<LoadProfile, LoadGenError> {
    chain.validate()?;
    let total: usize = ocs.iter().map(|(_, d)| d).sum();
    if total != config.horizon {
        return Err(LoadGenError::HorizonMismatch {
            got: total,
            want: config.horizon,
        });
    }
    // admissible chain indices per block
    let mut admissible = Vec::with_capacity(ocs.len());
    for (oc, _) in ocs {
        oc.validate()?;
        let idx = oc
            .sog_states
            .iter()
            .map(|&s| {
                chain.index_of(s).ok_or_else(|| LoadGenError::UnknownSog {
                    oc: oc.name.clone(),
                    sog: s,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        admissible.push(idx);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = params
        .initial_sog
        .map(|s| chain.nearest(s))
        .unwrap_or(0);
    let mut steps = Vec::with_capacity(total);
    for ((oc, duration), allowed) in ocs.iter().zip(&admissible) {
        for _ in 0..*duration {
            current = next_state(chain, current, allowed, &mut rng);
            let sog = chain.states[current];
            let p_prop = propulsion_power(sog, params.propulsion);
            let p_hotel = noisy_hotel(oc.hotel_load, params.hotel_noise_rel_std, &mut rng);
            let total_load = p_prop + p_hotel;
            if !(total_load > 0.0) {
                return Err(LoadGenError::NonPositiveLoad(steps.len() + 1));
            }
            steps.push(LoadStep {
                total_load,
                sog,
                oc_name: oc.name.clone(),
                v: oc.security_active,
                p_prop,
                p_hotel,
            });
        }
    }
    Ok(LoadProfile { steps })
}

/// One chain transition restricted to `allowed` and renormalized.
fn next_state(chain: &MarkovChain, from: usize, allowed: &[usize], rng: &mut ChaCha8Rng) -> usize {
    let row = &chain.transition[from];
    let mass: f64 = allowed.iter().map(|&j| row[j]).sum();
    let draw: f64 = rng.random();
    if mass <= 0.0 {
        // no admissible successor: snap to the closest admissible speed
        let speeds: Vec<f64> = allowed.iter().map(|&j| chain.states[j]).collect();
        return allowed[nearest_index(&speeds, chain.states[from])];
    }
    let target = draw * mass;
    let mut acc = 0.0;
    for &j in allowed {
        acc += row[j];
        if target < acc {
            return j;
        }
    }
    // rounding at the top end of the cumulative sum
    *allowed
        .iter()
        .rev()
        .find(|&&j| row[j] > 0.0)
        .expect("positive mass")
}

fn noisy_hotel(mean: f64, rel_std: f64, rng: &mut ChaCha8Rng) -> f64 {
    if rel_std <= 0.0 || mean == 0.0 {
        return mean;
    }
    let z = loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 3.0 {
            break z;
        }
    };
    (mean * (1.0 + rel_std * z)).max(0.0)
}

/// Where the chain of a load model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ChainSource {
    Matrix {
        states: Vec<f64>,
        transition: Vec<Vec<f64>>,
    },
    Series {
        states: Vec<f64>,
        sog_series_kn: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub name: String,
    pub hotel_load_mw: f64,
    pub sog_states_kn: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleBlock {
    pub oc: String,
    pub steps: usize,
}

/// Contents of an operating-schedule file: chain, conditions, block
/// sequence and propulsion calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadModel {
    pub design_sog_kn: f64,
    pub design_power_mw: f64,
    #[serde(default = "default_noise")]
    pub hotel_noise_rel_std: f64,
    #[serde(default)]
    pub initial_sog_kn: Option<f64>,
    pub chain: ChainSource,
    pub conditions: Vec<ConditionSpec>,
    pub schedule: Vec<ScheduleBlock>,
}

fn default_noise() -> f64 {
    0.05
}

impl LoadModel {
    pub fn from_json(text: &str) -> Result<Self, LoadGenError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn chain(&self) -> Result<MarkovChain, LoadGenError> {
        match &self.chain {
            ChainSource::Matrix { states, transition } => {
                MarkovChain::new(states.clone(), transition.clone())
            }
            ChainSource::Series {
                states,
                sog_series_kn,
            } => estimate_chain(sog_series_kn, states),
        }
    }

    pub fn params(&self) -> ProfileParams {
        ProfileParams {
            propulsion: PropulsionCalibration {
                design_sog: self.design_sog_kn,
                design_power: self.design_power_mw,
            },
            hotel_noise_rel_std: self.hotel_noise_rel_std,
            initial_sog: self.initial_sog_kn,
        }
    }

    /// Block sequence with security activation taken from the scenario.
    pub fn blocks(
        &self,
        config: &ScenarioConfig,
    ) -> Result<Vec<(OperatingCondition, usize)>, LoadGenError> {
        self.schedule
            .iter()
            .map(|b| {
                let spec = self
                    .conditions
                    .iter()
                    .find(|c| c.name == b.oc)
                    .ok_or_else(|| LoadGenError::UnknownOc(b.oc.clone()))?;
                let oc = OperatingCondition {
                    name: spec.name.clone(),
                    hotel_load: spec.hotel_load_mw,
                    sog_states: spec.sog_states_kn.clone(),
                    security_active: config.security.v_active_ocs.contains(&spec.name),
                };
                Ok((oc, b.steps))
            })
            .collect()
    }

    pub fn generate(&self, config: &ScenarioConfig, seed: u64) -> Result<LoadProfile, LoadGenError> {
        let chain = self.chain()?;
        let blocks = self.blocks(config)?;
        sample_profile(&chain, &blocks, config, &self.params(), seed)
    }
}

/// Operating schedule bundled with the reference scenario.
pub const REFERENCE_LOAD_MODEL_JSON: &str = include_str!("../data/oc_schedule.json");

/// Seed of the bundled reference profile.
pub const REFERENCE_SEED: u64 = 42;

pub fn reference_load_model() -> LoadModel {
    LoadModel::from_json(REFERENCE_LOAD_MODEL_JSON).expect("bundled load model is valid")
}

/// The reference profile: bundled schedule, seed 42.
pub fn reference_profile(config: &ScenarioConfig) -> LoadProfile {
    reference_load_model()
        .generate(config, REFERENCE_SEED)
        .expect("bundled load model matches the reference horizon")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::reference_scenario;

    fn calib() -> PropulsionCalibration {
        PropulsionCalibration {
            design_sog: 20.0,
            design_power: 16.0,
        }
    }

    fn params(noise: f64) -> ProfileParams {
        ProfileParams {
            propulsion: calib(),
            hotel_noise_rel_std: noise,
            initial_sog: None,
        }
    }

    #[test]
    fn chain_from_hand_counted_series() {
        let c = estimate_chain(&[0.0, 0.0, 10.0, 10.0, 0.0], &[0.0, 10.0]).unwrap();
        assert_eq!(c.transition, vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
    }

    #[test]
    fn chain_single_state() {
        let c = estimate_chain(&[8.0, 8.0, 8.0], &[8.0]).unwrap();
        assert_eq!(c.transition, vec![vec![1.0]]);
    }

    #[test]
    fn unvisited_row_becomes_self_loop() {
        let c = estimate_chain(&[0.0, 10.0], &[0.0, 10.0]).unwrap();
        assert_eq!(c.transition, vec![vec![0.0, 1.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn chain_estimation_errors() {
        assert!(matches!(estimate_chain(&[], &[0.0]), Err(LoadGenError::EmptySeries)));
        assert!(matches!(estimate_chain(&[1.0, 2.0], &[]), Err(LoadGenError::NoStates)));
        assert!(matches!(
            MarkovChain::new(vec![0.0, 1.0], vec![vec![0.5, 0.4], vec![0.0, 1.0]]),
            Err(LoadGenError::BadTransition { row: 0, .. })
        ));
    }

    #[test]
    fn samples_snap_to_nearest_state() {
        let c = estimate_chain(&[0.4, 9.2, 10.3, 0.1], &[0.0, 10.0]).unwrap();
        assert_eq!(c.transition, vec![vec![0.0, 1.0], vec![0.5, 0.5]]);
    }

    #[test]
    fn propulsion_law() {
        assert_eq!(propulsion_power(20.0, calib()), 16.0);
        assert_eq!(propulsion_power(0.0, calib()), 0.0);
        assert_eq!(propulsion_power(10.0, calib()), 2.0);
        assert_eq!(propulsion_power(25.0, calib()), 16.0);
    }

    fn cfg(horizon: usize) -> ScenarioConfig {
        let mut c = reference_scenario();
        c.horizon = horizon;
        c
    }

    #[test]
    fn harbor_without_noise_is_flat() {
        let chain = MarkovChain::new(vec![0.0, 10.0], vec![vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let harbor = OperatingCondition {
            name: "harbor".into(),
            hotel_load: 3.0,
            sog_states: vec![0.0],
            security_active: false,
        };
        let p = sample_profile(&chain, &[(harbor, 8)], &cfg(8), &params(0.0), 7).unwrap();
        assert_eq!(p.len(), 8);
        for s in &p.steps {
            assert_eq!(s.total_load, 3.0);
            assert_eq!(s.sog, 0.0);
            assert!(!s.v);
        }
    }

    #[test]
    fn same_seed_same_profile() {
        let config = reference_scenario();
        let model = reference_load_model();
        let a = model.generate(&config, 42).unwrap();
        let b = model.generate(&config, 42).unwrap();
        assert_eq!(a, b);
        let c = model.generate(&config, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn reference_profile_shape() {
        let config = reference_scenario();
        let p = reference_profile(&config);
        assert_eq!(p.len(), 24);
        assert_eq!(p.active_steps(), 10);
        let model = reference_load_model();
        for s in &p.steps {
            assert!(s.total_load > 0.0);
            let oc = model.conditions.iter().find(|c| c.name == s.oc_name).unwrap();
            assert!(oc.sog_states_kn.contains(&s.sog));
            let hotel = oc.hotel_load_mw;
            assert!((s.p_hotel - hotel).abs() <= 3.0 * 0.05 * hotel + 1e-12);
        }
    }

    #[test]
    fn horizon_and_state_errors() {
        let chain = MarkovChain::new(vec![0.0, 10.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let oc = OperatingCondition {
            name: "nav".into(),
            hotel_load: 3.0,
            sog_states: vec![10.0],
            security_active: true,
        };
        assert!(matches!(
            sample_profile(&chain, &[(oc.clone(), 3)], &cfg(4), &params(0.05), 1),
            Err(LoadGenError::HorizonMismatch { got: 3, want: 4 })
        ));
        let mut odd = oc;
        odd.sog_states = vec![12.0];
        assert!(matches!(
            sample_profile(&chain, &[(odd, 4)], &cfg(4), &params(0.05), 1),
            Err(LoadGenError::UnknownSog { .. })
        ));
    }

    #[test]
    fn zero_load_rejected() {
        let chain = MarkovChain::new(vec![0.0], vec![vec![1.0]]).unwrap();
        let oc = OperatingCondition {
            name: "dead ship".into(),
            hotel_load: 0.0,
            sog_states: vec![0.0],
            security_active: false,
        };
        assert!(matches!(
            sample_profile(&chain, &[(oc, 2)], &cfg(2), &params(0.05), 1),
            Err(LoadGenError::NonPositiveLoad(1))
        ));
    }

    #[test]
    fn restricted_sampling_stays_admissible() {
        let chain = MarkovChain::new(
            vec![0.0, 8.0, 12.0, 16.0],
            vec![
                vec![0.1, 0.3, 0.3, 0.3],
                vec![0.2, 0.2, 0.3, 0.3],
                vec![0.0, 0.0, 0.0, 1.0],
                vec![0.25, 0.25, 0.25, 0.25],
            ],
        )
        .unwrap();
        let slow = OperatingCondition {
            name: "low speed".into(),
            hotel_load: 3.5,
            sog_states: vec![0.0, 8.0],
            security_active: true,
        };
        let fast = OperatingCondition {
            name: "navigation".into(),
            hotel_load: 4.0,
            sog_states: vec![12.0, 16.0],
            security_active: true,
        };
        for seed in 0..20 {
            let p = sample_profile(
                &chain,
                &[(slow.clone(), 30), (fast.clone(), 30), (slow.clone(), 40)],
                &cfg(100),
                &params(0.05),
                seed,
            )
            .unwrap();
            for (t, s) in p.steps.iter().enumerate() {
                let allowed = if (30..60).contains(&t) { &fast } else { &slow };
                assert!(allowed.sog_states.contains(&s.sog), "seed {seed} step {t}");
            }
        }
    }

    #[test]
    fn empirical_transitions_converge() {
        let chain = MarkovChain::new(
            vec![0.0, 8.0, 14.0],
            vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.5, 0.3], vec![0.05, 0.15, 0.8]],
        )
        .unwrap();
        let all = OperatingCondition {
            name: "any".into(),
            hotel_load: 2.0,
            sog_states: chain.states.clone(),
            security_active: false,
        };
        let n = 100_000;
        let p = sample_profile(&chain, &[(all, n)], &cfg(n), &params(0.05), 2024).unwrap();
        let sogs: Vec<f64> = p.steps.iter().map(|s| s.sog).collect();
        let est = estimate_chain(&sogs, &chain.states).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let diff = (est.transition[i][j] - chain.transition[i][j]).abs();
                assert!(diff < 0.02, "entry ({i},{j}) off by {diff}");
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let config = reference_scenario();
        let p = reference_profile(&config);
        let text = p.to_csv_string();
        assert!(text.starts_with("t,oc,sog_kn,p_prop_mw,p_hotel_mw,p_load_mw,v\n"));
        let back = LoadProfile::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let bad_v = "t,oc,sog_kn,p_prop_mw,p_hotel_mw,p_load_mw,v\n1,h,0,0,3,3,2\n";
        assert!(LoadProfile::read_csv(bad_v.as_bytes()).is_err());
        let zero = "t,oc,sog_kn,p_prop_mw,p_hotel_mw,p_load_mw,v\n1,h,0,0,0,0,0\n";
        assert!(matches!(
            LoadProfile::read_csv(zero.as_bytes()),
            Err(LoadGenError::NonPositiveLoad(1))
        ));
        assert!(LoadProfile::read_csv("t,oc\n".as_bytes()).is_err());
    }
}
