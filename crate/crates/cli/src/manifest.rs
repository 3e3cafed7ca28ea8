//! Run manifest: where the inputs came from, their hashes and the solver
//! options, written before the solve so every output directory can be
//! reproduced.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use scuc::loadgen::{LoadModel, LoadProfile, REFERENCE_LOAD_MODEL_JSON};
use scuc::report::LoadFactorMode;
use scuc::scenario::{ScenarioConfig, REFERENCE_SCENARIO_JSON};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A JSON or CSV input: a file on disk, or the bundled default when
/// `path` is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRef {
    pub path: Option<PathBuf>,
    pub sha256: String,
}

impl SourceRef {
    fn read(path: Option<&Path>, bundled: &str) -> Result<(SourceRef, String)> {
        let text = match path {
            None => bundled.to_string(),
            Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        };
        let path = path
            .map(|p| fs::canonicalize(p).with_context(|| format!("resolving {}", p.display())))
            .transpose()?;
        Ok((SourceRef { path, sha256: sha256_hex(text.as_bytes()) }, text))
    }

    fn label(&self) -> String {
        match &self.path {
            Some(p) => p.display().to_string(),
            None => "bundled".to_string(),
        }
    }

    /// Re-reads the source and checks it still hashes the same.
    fn reread(&self, bundled: &str) -> Result<String> {
        let (now, text) = SourceRef::read(self.path.as_deref(), bundled)?;
        if now.sha256 != self.sha256 {
            bail!("{} changed since the manifest was written", self.label());
        }
        Ok(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileRef {
    File { source: SourceRef },
    Generated { oc_schedule: SourceRef, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub gap: f64,
    pub nodes: usize,
    pub time_limit: f64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub scenario: SourceRef,
    pub profile: ProfileRef,
    /// Hash of the profile as solved, in the `simulate-load` CSV layout.
    pub profile_sha256: String,
    pub no_bess: bool,
    pub solver: SolverSettings,
    pub lf_mode: LoadFactorMode,
    pub out_dir: PathBuf,
}

/// Where to take the scenario and the load profile from.
#[derive(Debug, Clone)]
pub struct InputSpec {
    pub scenario: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    pub oc_schedule: Option<PathBuf>,
    pub seed: u64,
    pub no_bess: bool,
}

/// Validated inputs ready for the pipeline.
pub struct Inputs {
    pub config: ScenarioConfig,
    pub profile: LoadProfile,
    pub scenario_ref: SourceRef,
    pub profile_ref: ProfileRef,
    pub profile_sha256: String,
}

fn parse_scenario(text: &str, no_bess: bool) -> Result<ScenarioConfig> {
    let config = ScenarioConfig::from_json(text).context("invalid scenario")?;
    Ok(if no_bess { config.without_bess() } else { config })
}

fn finish(config: ScenarioConfig, profile: LoadProfile, scenario_ref: SourceRef, profile_ref: ProfileRef) -> Result<Inputs> {
    if profile.len() != config.horizon {
        bail!("profile has {} steps, the scenario horizon is {}", profile.len(), config.horizon);
    }
    let profile_sha256 = sha256_hex(profile.to_csv_string().as_bytes());
    Ok(Inputs { config, profile, scenario_ref, profile_ref, profile_sha256 })
}

fn generate(config: &ScenarioConfig, text: &str, seed: u64) -> Result<LoadProfile> {
    let model = LoadModel::from_json(text).context("invalid operating schedule")?;
    model.generate(config, seed).context("generating the load profile")
}

impl InputSpec {
    pub fn resolve(&self) -> Result<Inputs> {
        let (scenario_ref, text) = SourceRef::read(self.scenario.as_deref(), REFERENCE_SCENARIO_JSON)?;
        let config = parse_scenario(&text, self.no_bess)?;
        let (profile, profile_ref) = match &self.profile {
            Some(path) => {
                let (source, text) = SourceRef::read(Some(path), "")?;
                let profile = LoadProfile::read_csv(text.as_bytes())
                    .with_context(|| format!("reading profile {}", path.display()))?;
                (profile, ProfileRef::File { source })
            }
            None => {
                let (oc_schedule, text) = SourceRef::read(self.oc_schedule.as_deref(), REFERENCE_LOAD_MODEL_JSON)?;
                let profile = generate(&config, &text, self.seed)?;
                (profile, ProfileRef::Generated { oc_schedule, seed: self.seed })
            }
        };
        finish(config, profile, scenario_ref, profile_ref)
    }
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Inputs named by the manifest, refused if any file changed.
    pub fn resolve(&self) -> Result<Inputs> {
        let config = parse_scenario(&self.scenario.reread(REFERENCE_SCENARIO_JSON)?, self.no_bess)?;
        let profile = match &self.profile {
            ProfileRef::File { source } => {
                let text = source.reread("")?;
                LoadProfile::read_csv(text.as_bytes()).context("reading profile")?
            }
            ProfileRef::Generated { oc_schedule, seed } => {
                generate(&config, &oc_schedule.reread(REFERENCE_LOAD_MODEL_JSON)?, *seed)?
            }
        };
        let inputs = finish(config, profile, self.scenario.clone(), self.profile.clone())?;
        if inputs.profile_sha256 != self.profile_sha256 {
            bail!("regenerated profile differs from the one recorded in the manifest");
        }
        Ok(inputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn bundled_inputs_resolve() {
        let spec = InputSpec { scenario: None, profile: None, oc_schedule: None, seed: 42, no_bess: false };
        let a = spec.resolve().unwrap();
        let b = InputSpec { no_bess: true, ..spec }.resolve().unwrap();
        assert_eq!(a.profile.len(), 24);
        assert!(a.scenario_ref.path.is_none());
        assert_eq!(a.profile_sha256, b.profile_sha256);
        assert!(b.config.bess.is_none());
    }

    #[test]
    fn changed_file_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        fs::write(&path, REFERENCE_SCENARIO_JSON).unwrap();
        let spec = InputSpec { scenario: Some(path.clone()), profile: None, oc_schedule: None, seed: 7, no_bess: false };
        let inputs = spec.resolve().unwrap();
        let manifest = RunManifest {
            tool_version: String::new(),
            scenario: inputs.scenario_ref,
            profile: inputs.profile_ref,
            profile_sha256: inputs.profile_sha256,
            no_bess: false,
            solver: SolverSettings { gap: 0.01, nodes: 1, time_limit: 1.0, workers: 1 },
            lf_mode: LoadFactorMode::UnitStep,
            out_dir: PathBuf::new(),
        };
        assert!(manifest.resolve().is_ok());
        fs::write(&path, REFERENCE_SCENARIO_JSON.replace("\"n_segments\"", " \"n_segments\"")).unwrap();
        let err = manifest.resolve().err().unwrap();
        assert!(err.to_string().contains("changed"), "{err}");
    }
}
