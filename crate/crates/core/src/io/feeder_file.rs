//! On-disk feeder description (TOML, schema `qsts-feeder/1`).
//!
//! Impedance matrices are total ohms for the segment, split into `r` and `x`
//! row arrays ordered by the segment's phases (A before B before C).

use serde::{Deserialize, Serialize};

use crate::error::IoError;
use crate::inverter::InverterFunctionConfig;
use crate::phase::PhaseSet;

pub const FEEDER_SCHEMA: &str = "qsts-feeder/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederDescription {
    pub schema: String,
    #[serde(default)]
    pub name: String,
    pub source_bus: String,
    #[serde(default = "one")]
    pub source_pu: f64,
    #[serde(default, rename = "bus")]
    pub buses: Vec<BusSpec>,
    #[serde(default, rename = "line")]
    pub lines: Vec<LineSpec>,
    #[serde(default, rename = "regulator")]
    pub regulators: Vec<RegulatorSpec>,
    #[serde(default, rename = "capacitor")]
    pub capacitors: Vec<CapacitorSpec>,
    #[serde(default, rename = "load")]
    pub loads: Vec<LoadSpec>,
    #[serde(default, rename = "pv")]
    pub pv_units: Vec<PvSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusSpec {
    pub id: String,
    pub phases: PhaseSet,
    pub base_kv: f64,
    #[serde(default = "v_min_default")]
    pub v_min_pu: f64,
    #[serde(default = "v_max_default")]
    pub v_max_pu: f64,
    /// Distance from the substation, used only for plotting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_km: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub phases: PhaseSet,
    #[serde(default)]
    pub length_km: f64,
    pub r: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegulatorSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub phases: PhaseSet,
    #[serde(default = "setpoint_default")]
    pub setpoint_pu: f64,
    #[serde(default = "bandwidth_default")]
    pub bandwidth_pu: f64,
    #[serde(default = "tap_min_default")]
    pub tap_min: i32,
    #[serde(default = "tap_max_default")]
    pub tap_max: i32,
    #[serde(default = "step_default")]
    pub step_pu: f64,
    #[serde(default = "tap_limit_default")]
    pub daily_tap_limit: u32,
    #[serde(default)]
    pub substation_ltc: bool,
    /// Initial tap per phase in the order of `phases`; zeros when omitted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_taps: Vec<i32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacitorMode {
    Fixed,
    Switched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitorSpec {
    pub id: String,
    pub bus: String,
    pub phases: PhaseSet,
    /// kVAR per phase at nominal voltage, one entry per phase in `phases`.
    pub kvar: Vec<f64>,
    pub mode: CapacitorMode,
    #[serde(default = "cap_on_default")]
    pub on_pu: f64,
    #[serde(default = "cap_off_default")]
    pub off_pu: f64,
    #[serde(default = "cap_switch_limit_default")]
    pub daily_switch_limit: u32,
    /// Allowable reactive injection at the node (all banks on that bus).
    pub q_max_node_kvar: f64,
    #[serde(default)]
    pub per_phase_switching: bool,
    #[serde(default)]
    pub initially_on: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    pub id: String,
    pub bus: String,
    pub phases: PhaseSet,
    pub kw: Vec<f64>,
    pub kvar: Vec<f64>,
    #[serde(default = "profile_default")]
    pub profile: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvSpec {
    pub id: String,
    pub bus: String,
    pub phases: PhaseSet,
    pub p_rated_kw: f64,
    pub s_inverter_kva: f64,
    #[serde(default = "temp_coeff_default")]
    pub temp_coeff_per_degc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<InverterFunctionConfig>,
}

fn one() -> f64 {
    1.0
}
fn v_min_default() -> f64 {
    0.95
}
fn v_max_default() -> f64 {
    1.05
}
fn setpoint_default() -> f64 {
    1.0167
}
fn bandwidth_default() -> f64 {
    0.0167
}
fn tap_min_default() -> i32 {
    -16
}
fn tap_max_default() -> i32 {
    16
}
fn step_default() -> f64 {
    0.00625
}
fn tap_limit_default() -> u32 {
    273
}
fn cap_on_default() -> f64 {
    0.97
}
fn cap_off_default() -> f64 {
    1.03
}
fn cap_switch_limit_default() -> u32 {
    10
}
fn profile_default() -> String {
    "default".to_string()
}
fn temp_coeff_default() -> f64 {
    -0.004
}

impl FeederDescription {
    pub fn from_toml_str(text: &str) -> Result<Self, IoError> {
        let desc: FeederDescription = toml::from_str(text).map_err(|e| IoError::Parse {
            what: "feeder".into(),
            message: e.to_string(),
        })?;
        if desc.schema != FEEDER_SCHEMA {
            return Err(IoError::Parse {
                what: "feeder".into(),
                message: format!(
                    "field `schema`: expected \"{FEEDER_SCHEMA}\", found \"{}\"",
                    desc.schema
                ),
            });
        }
        desc.check_duplicate_ids()?;
        Ok(desc)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("feeder description serializes")
    }

    fn check_duplicate_ids(&self) -> Result<(), IoError> {
        fn dup<'a>(kind: &str, ids: impl Iterator<Item = &'a String>) -> Result<(), IoError> {
            let mut seen = std::collections::BTreeSet::new();
            for id in ids {
                if !seen.insert(id.as_str()) {
                    return Err(IoError::Parse {
                        what: "feeder".into(),
                        message: format!("duplicate {kind} id '{id}'"),
                    });
                }
            }
            Ok(())
        }
        dup("bus", self.buses.iter().map(|b| &b.id))?;
        dup(
            "branch",
            self.lines.iter().map(|l| &l.id).chain(self.regulators.iter().map(|r| &r.id)),
        )?;
        dup("capacitor", self.capacitors.iter().map(|c| &c.id))?;
        dup("load", self.loads.iter().map(|l| &l.id))?;
        dup("pv", self.pv_units.iter().map(|p| &p.id))?;
        Ok(())
    }
}
