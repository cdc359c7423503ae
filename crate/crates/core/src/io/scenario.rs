//! Scenario description (TOML, schema `qsts-scenario/1`).
//!
//! ```toml
//! schema = "qsts-scenario/1"
//! feeder = "desk8500-mini.toml"   # relative to this file
//! dt_s = 60
//!
//! [profiles]
//! source = "synthetic"
//! seed = 8500
//!
//! [function]
//! type = "volt_var"
//!
//! [sweep]
//! study_set = true
//!
//! [harmonics]
//! timesteps = [720, 780]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, IoError, SimError};
use crate::harmonics::{HarmonicComponent, HarmonicSpectrum};
use crate::inverter::InverterFunctionConfig;
use crate::profiles::{self, ProfileSet, DEFAULT_SEED};
use crate::qsts::{ControlOptions, ControlOrder, FunctionAssignment, Scenario};

use super::profiles_csv::read_profile;

pub const SCENARIO_SCHEMA: &str = "qsts-scenario/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: String,
    #[serde(default)]
    pub name: String,
    pub feeder: PathBuf,
    #[serde(default = "sixty")]
    pub dt_s: f64,
    /// Defaults to the length of the irradiance profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default)]
    pub profiles: ProfileSpec,
    /// Function applied to every inverter; the feeder's own settings when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<InverterFunctionConfig>,
    #[serde(default = "yes")]
    pub pv_enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonics: Option<HarmonicsSpec>,
    #[serde(default)]
    pub control: ControlSpec,
}

fn sixty() -> f64 {
    60.0
}
fn yes() -> bool {
    true
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn peak() -> f64 {
    1000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// Generated cloudy day.
    Synthetic {
        #[serde(default = "default_seed")]
        seed: u64,
    },
    /// Generated day with irradiance switching between zero and `peak_w_m2`.
    Oscillating {
        #[serde(default = "default_seed")]
        seed: u64,
        period_steps: usize,
        #[serde(default = "peak")]
        peak_w_m2: f64,
    },
    /// Series read from CSV files, paths relative to the scenario file.
    Csv {
        irradiance: PathBuf,
        temperature: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        frequency: Option<PathBuf>,
        loads: BTreeMap<String, PathBuf>,
    },
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Synthetic { seed: DEFAULT_SEED }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Include the nine standard functions.
    #[serde(default)]
    pub study_set: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub functions: Vec<InverterFunctionConfig>,
}

impl SweepSpec {
    pub fn configs(&self) -> Vec<InverterFunctionConfig> {
        let mut out = if self.study_set {
            InverterFunctionConfig::study_set()
        } else {
            Vec::new()
        };
        out.extend(self.functions.iter().cloned());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumEntry {
    pub order: u32,
    pub magnitude_pct: f64,
    #[serde(default)]
    pub angle_deg: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicsSpec {
    pub timesteps: Vec<usize>,
    /// Inverter current spectrum; a typical PV spectrum when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<SpectrumEntry>>,
}

impl HarmonicsSpec {
    pub fn spectrum(&self) -> HarmonicSpectrum {
        match &self.spectrum {
            None => HarmonicSpectrum::default(),
            Some(entries) => HarmonicSpectrum {
                components: entries
                    .iter()
                    .map(|e| HarmonicComponent {
                        order: e.order,
                        magnitude: e.magnitude_pct / 100.0,
                        angle_deg: e.angle_deg,
                    })
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderSpec {
    RegulatorsFirst,
    CapacitorsFirst,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<OrderSpec>,
}

impl ControlSpec {
    pub fn options(&self) -> Result<ControlOptions, SimError> {
        let mut o = ControlOptions::default();
        if let Some(d) = self.damping {
            if !(d > 0.0 && d <= 1.0) {
                return Err(SimError::InvalidScenario(format!("damping must be in (0, 1], got {d}")));
            }
            o.damping = d;
        }
        if let Some(m) = self.max_iterations {
            if m == 0 {
                return Err(SimError::InvalidScenario("max_iterations must be at least 1".into()));
            }
            o.max_iterations = m;
        }
        if let Some(order) = self.order {
            o.order = match order {
                OrderSpec::RegulatorsFirst => ControlOrder::RegulatorsFirst,
                OrderSpec::CapacitorsFirst => ControlOrder::CapacitorsFirst,
            };
        }
        Ok(o)
    }
}

impl ScenarioFile {
    pub fn from_toml_str(text: &str) -> Result<Self, IoError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| IoError::parse("scenario", e.to_string()))?;
        if file.schema != SCENARIO_SCHEMA {
            return Err(IoError::parse(
                "scenario",
                format!("field `schema`: expected \"{SCENARIO_SCHEMA}\", found \"{}\"", file.schema),
            ));
        }
        Ok(file)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

/// A scenario file resolved against the file system.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub file: ScenarioFile,
    pub scenario: Scenario,
    pub sweep: Vec<InverterFunctionConfig>,
    pub harmonic_timesteps: Vec<usize>,
    pub spectrum: HarmonicSpectrum,
}

/// Builds the profile set; `seed` overrides the file's seed for generated
/// profiles.
pub fn build_profiles(spec: &ProfileSpec, base: &Path, dt_s: f64, seed: Option<u64>) -> Result<ProfileSet, Error> {
    Ok(match spec {
        ProfileSpec::Synthetic { seed: s } => profiles::synthetic_day(seed.unwrap_or(*s), dt_s),
        ProfileSpec::Oscillating {
            seed: s,
            period_steps,
            peak_w_m2,
        } => {
            let mut set = profiles::synthetic_day(seed.unwrap_or(*s), dt_s);
            set.irradiance =
                profiles::oscillating_irradiance(dt_s, set.irradiance.len(), *period_steps, *peak_w_m2);
            set
        }
        ProfileSpec::Csv {
            irradiance,
            temperature,
            frequency,
            loads,
        } => ProfileSet {
            irradiance: read_profile(&base.join(irradiance), "irradiance")?,
            temperature: read_profile(&base.join(temperature), "temperature")?,
            frequency: frequency
                .as_ref()
                .map(|f| read_profile(&base.join(f), "frequency"))
                .transpose()?,
            loads: loads
                .iter()
                .map(|(name, p)| Ok((name.clone(), read_profile(&base.join(p), name)?)))
                .collect::<Result<_, Error>>()?,
        },
    })
}

pub fn load_scenario(path: &Path, seed: Option<u64>) -> Result<LoadedScenario, Error> {
    let text = super::read_text(path)?;
    let file = ScenarioFile::from_toml_str(&text).map_err(|e| match e {
        IoError::Parse { message, .. } => IoError::parse(format!("scenario {}", path.display()), message),
        other => other,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let network = super::load_feeder(&base.join(&file.feeder))?;
    let profiles = build_profiles(&file.profiles, base, file.dt_s, seed)?;
    let steps = file.steps.unwrap_or(profiles.irradiance.len());
    let mut scenario = Scenario::new(Arc::new(network), Arc::new(profiles), file.dt_s, steps);
    scenario.pv_enabled = file.pv_enabled;
    scenario.options = file.control.options()?;
    if let Some(f) = &file.function {
        scenario.functions = FunctionAssignment::All(f.clone());
    }
    scenario.validate()?;
    let sweep = file.sweep.as_ref().map(|s| s.configs()).unwrap_or_default();
    let (harmonic_timesteps, spectrum) = match &file.harmonics {
        Some(h) => (h.timesteps.clone(), h.spectrum()),
        None => (Vec::new(), HarmonicSpectrum::default()),
    };
    spectrum.validate().map_err(Error::Harmonics)?;
    Ok(LoadedScenario {
        file,
        scenario,
        sweep,
        harmonic_timesteps,
        spectrum,
    })
}
