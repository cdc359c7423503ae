//! Per-run result bundle: `run.toml` metadata plus CSV series.
//!
//! | file            | one row per                          |
//! |-----------------|--------------------------------------|
//! | voltages.csv    | timestep, bus, phase                 |
//! | inverters.csv   | timestep, PV unit                    |
//! | devices.csv     | logged device action                 |
//! | losses.csv      | timestep                             |
//! | harmonics.csv   | snapshot, element, phase, order      |
//! | thd.csv         | snapshot, element, phase             |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controllers::{DeviceRef, LoggedAction, NoteKind};
use crate::error::IoError;
use crate::feeder::Network;
use crate::harmonics::HarmonicResult;
use crate::inverter::InverterFunctionConfig;
use crate::metrics::RunDigest;
use crate::phase::Phase;
use crate::qsts::RunResult;

use super::{from_csv, read_text, to_csv, write_text};

pub const RUN_SCHEMA: &str = "qsts-run/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub schema: String,
    pub label: String,
    pub feeder: String,
    pub pv_enabled: bool,
    pub dt_s: f64,
    pub steps: usize,
    pub regulators: Vec<String>,
    pub capacitors: Vec<String>,
    pub pv_units: Vec<String>,
    pub initial_taps: Vec<Vec<i32>>,
    pub flagged_power_flow: usize,
    pub flagged_control: usize,
    #[serde(default, rename = "function")]
    pub functions: Vec<InverterFunctionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageRow {
    pub timestep: usize,
    pub bus: String,
    pub phase: String,
    pub v_pu: f64,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverterRow {
    pub timestep: usize,
    pub pv: String,
    pub p_avail_kw: f64,
    pub p_kw: f64,
    pub q_kvar: f64,
    pub v_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRow {
    pub timestep: usize,
    pub device: String,
    /// Empty for ganged capacitor operations.
    pub phase: String,
    /// `tap`, `on`, `off`, or a note kind.
    pub action: String,
    pub delta: Option<i32>,
    pub position: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub timestep: usize,
    pub p_loss_kw: f64,
    pub q_loss_kvar: f64,
    pub source_p_kw: f64,
    pub source_q_kvar: f64,
    pub violations: usize,
    pub control_iterations: usize,
    pub power_flow_converged: bool,
    pub control_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicRow {
    pub timestep: usize,
    /// `bus` (volts) or `line` (amps).
    pub kind: String,
    pub element: String,
    pub phase: String,
    pub order: u32,
    pub magnitude: f64,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThdRow {
    pub timestep: usize,
    pub kind: String,
    pub element: String,
    pub phase: String,
    pub thd_pct: f64,
}

fn phase_str(p: Option<Phase>) -> String {
    p.map(|p| p.letter().to_string()).unwrap_or_default()
}

pub fn run_meta(network: &Network, run: &RunResult) -> RunMeta {
    RunMeta {
        schema: RUN_SCHEMA.into(),
        label: run.label.clone(),
        feeder: network.name.clone(),
        pv_enabled: run.pv_enabled,
        dt_s: run.dt_s,
        steps: run.len(),
        regulators: network.regulators.iter().map(|r| r.id.clone()).collect(),
        capacitors: network.capacitors.iter().map(|c| c.id.clone()).collect(),
        pv_units: network.pv_units.iter().map(|p| p.id.clone()).collect(),
        initial_taps: run.initial_taps.iter().map(|t| t.to_vec()).collect(),
        flagged_power_flow: run.flagged_power_flow(),
        flagged_control: run.flagged_control(),
        functions: run.functions.clone(),
    }
}

pub fn voltage_rows(network: &Network, run: &RunResult) -> Vec<VoltageRow> {
    let mut rows = Vec::new();
    for ts in &run.timesteps {
        for (b, bus) in network.buses.iter().enumerate() {
            for p in bus.phases.iter() {
                let v = ts.solution.v_pu(b, p);
                rows.push(VoltageRow {
                    timestep: ts.timestep,
                    bus: bus.id.clone(),
                    phase: p.letter().to_string(),
                    v_pu: v.norm(),
                    angle_deg: v.arg().to_degrees(),
                });
            }
        }
    }
    rows
}

pub fn inverter_rows(network: &Network, run: &RunResult) -> Vec<InverterRow> {
    let mut rows = Vec::new();
    for ts in &run.timesteps {
        for (i, pv) in network.pv_units.iter().enumerate() {
            rows.push(InverterRow {
                timestep: ts.timestep,
                pv: pv.id.clone(),
                p_avail_kw: ts.p_avail_kw[i],
                p_kw: ts.outputs[i].p_kw,
                q_kvar: ts.outputs[i].q_kvar,
                v_pu: ts.solution.mean_vmag_pu(pv.bus, pv.phases.iter()),
            });
        }
    }
    rows
}

pub fn device_rows(network: &Network, run: &RunResult) -> Vec<DeviceRow> {
    run.log
        .entries
        .iter()
        .map(|e| {
            let device = match e.device {
                DeviceRef::Regulator(r) => network.regulators[r].id.clone(),
                DeviceRef::Capacitor(c) => network.capacitors[c].id.clone(),
            };
            let (action, delta, position) = match e.action {
                LoggedAction::Tap { delta, position } => ("tap".to_string(), Some(delta), Some(position)),
                LoggedAction::Switch { on } => ((if on { "on" } else { "off" }).to_string(), None, None),
                LoggedAction::Note { kind } => (kind.as_str().to_string(), None, None),
            };
            DeviceRow {
                timestep: e.timestep,
                device,
                phase: phase_str(e.phase),
                action,
                delta,
                position,
            }
        })
        .collect()
}

pub fn loss_rows(run: &RunResult) -> Vec<LossRow> {
    run.timesteps
        .iter()
        .map(|ts| LossRow {
            timestep: ts.timestep,
            p_loss_kw: ts.losses.0,
            q_loss_kvar: ts.losses.1,
            source_p_kw: ts.solution.source_power.re,
            source_q_kvar: ts.solution.source_power.im,
            violations: ts.violations.len(),
            control_iterations: ts.control_iterations,
            power_flow_converged: !ts.flags.power_flow_unconverged,
            control_converged: !ts.flags.control_unconverged,
        })
        .collect()
}

pub fn harmonic_rows(network: &Network, snapshots: &[(usize, HarmonicResult)]) -> (Vec<HarmonicRow>, Vec<ThdRow>) {
    let mut rows = Vec::new();
    let mut thd = Vec::new();
    for (t, res) in snapshots {
        for (b, bus) in network.buses.iter().enumerate() {
            for p in bus.phases.iter() {
                let k = p.index();
                let mut push = |order: u32, v: num_complex::Complex64| {
                    rows.push(HarmonicRow {
                        timestep: *t,
                        kind: "bus".into(),
                        element: bus.id.clone(),
                        phase: p.letter().to_string(),
                        order,
                        magnitude: v.norm(),
                        angle_deg: v.arg().to_degrees(),
                    })
                };
                push(1, res.fundamental_voltages[b][k]);
                for (&h, v) in &res.bus_voltages {
                    push(h, v[b][k]);
                }
                thd.push(ThdRow {
                    timestep: *t,
                    kind: "bus".into(),
                    element: bus.id.clone(),
                    phase: p.letter().to_string(),
                    thd_pct: res.thd_v(b, p),
                });
            }
        }
        for (l, line) in network.lines.iter().enumerate() {
            for p in line.phases.iter() {
                let k = p.index();
                let mut push = |order: u32, i: num_complex::Complex64| {
                    rows.push(HarmonicRow {
                        timestep: *t,
                        kind: "line".into(),
                        element: line.id.clone(),
                        phase: p.letter().to_string(),
                        order,
                        magnitude: i.norm(),
                        angle_deg: i.arg().to_degrees(),
                    })
                };
                push(1, res.fundamental_currents[l][k]);
                for (&h, i) in &res.line_currents {
                    push(h, i[l][k]);
                }
                thd.push(ThdRow {
                    timestep: *t,
                    kind: "line".into(),
                    element: line.id.clone(),
                    phase: p.letter().to_string(),
                    thd_pct: res.thd_i(l, p),
                });
            }
        }
    }
    (rows, thd)
}

/// Writes the whole bundle for one run into `dir`.
pub fn write_run_bundle(
    dir: &Path,
    network: &Network,
    run: &RunResult,
    harmonics: &[(usize, HarmonicResult)],
) -> Result<(), IoError> {
    let meta = toml::to_string(&run_meta(network, run)).expect("run metadata serializes");
    write_text(&dir.join("run.toml"), &meta)?;
    write_text(&dir.join("voltages.csv"), &to_csv(voltage_rows(network, run)))?;
    write_text(&dir.join("inverters.csv"), &to_csv(inverter_rows(network, run)))?;
    write_text(&dir.join("devices.csv"), &to_csv(device_rows(network, run)))?;
    write_text(&dir.join("losses.csv"), &to_csv(loss_rows(run)))?;
    if !harmonics.is_empty() {
        let (rows, thd) = harmonic_rows(network, harmonics);
        write_text(&dir.join("harmonics.csv"), &to_csv(rows))?;
        write_text(&dir.join("thd.csv"), &to_csv(thd))?;
    }
    Ok(())
}

pub fn read_meta(dir: &Path) -> Result<RunMeta, IoError> {
    let path = dir.join("run.toml");
    let text = read_text(&path)?;
    let meta: RunMeta = toml::from_str(&text).map_err(|e| IoError::parse(path.display().to_string(), e.to_string()))?;
    if meta.schema != RUN_SCHEMA {
        return Err(IoError::parse(
            path.display().to_string(),
            format!("expected schema \"{RUN_SCHEMA}\", found \"{}\"", meta.schema),
        ));
    }
    Ok(meta)
}

pub fn read_voltages(dir: &Path) -> Result<Vec<VoltageRow>, IoError> {
    from_csv(&dir.join("voltages.csv"))
}

pub fn read_inverters(dir: &Path) -> Result<Vec<InverterRow>, IoError> {
    from_csv(&dir.join("inverters.csv"))
}

pub fn read_devices(dir: &Path) -> Result<Vec<DeviceRow>, IoError> {
    from_csv(&dir.join("devices.csv"))
}

pub fn read_losses(dir: &Path) -> Result<Vec<LossRow>, IoError> {
    from_csv(&dir.join("losses.csv"))
}

pub fn read_harmonics(dir: &Path) -> Result<Vec<HarmonicRow>, IoError> {
    from_csv(&dir.join("harmonics.csv"))
}

pub fn read_thd(dir: &Path) -> Result<Vec<ThdRow>, IoError> {
    from_csv(&dir.join("thd.csv"))
}

fn note_kind(s: &str) -> Option<NoteKind> {
    [NoteKind::BudgetExhausted, NoteKind::LimitClamped, NoteKind::NodeCapBinding]
        .into_iter()
        .find(|k| k.as_str() == s)
}

/// Recomputes the report inputs from the CSV files alone.
pub fn read_digest(dir: &Path) -> Result<(RunMeta, RunDigest), IoError> {
    let meta = read_meta(dir)?;
    let devices_path = dir.join("devices.csv");
    let bad = |row: usize, msg: String| IoError::parse(devices_path.display().to_string(), format!("row {row}: {msg}"));
    let mut regulator_ops = vec![[0u32; 3]; meta.regulators.len()];
    let mut capacitor_ops = vec![0u32; meta.capacitors.len()];
    for (i, row) in read_devices(dir)?.iter().enumerate() {
        let phase = if row.phase.is_empty() {
            None
        } else {
            Some(row.phase.parse::<Phase>().map_err(|_| bad(i + 2, format!("bad phase '{}'", row.phase)))?)
        };
        if let Some(r) = meta.regulators.iter().position(|id| *id == row.device) {
            match (row.action.as_str(), phase, row.delta) {
                ("tap", Some(p), Some(d)) => regulator_ops[r][p.index()] += d.unsigned_abs(),
                (a, _, _) if note_kind(a).is_some() => {}
                _ => return Err(bad(i + 2, format!("malformed regulator action '{}'", row.action))),
            }
        } else if let Some(c) = meta.capacitors.iter().position(|id| *id == row.device) {
            match row.action.as_str() {
                "on" | "off" => capacitor_ops[c] += 1,
                a if note_kind(a).is_some() => {}
                a => return Err(bad(i + 2, format!("malformed capacitor action '{a}'"))),
            }
        } else {
            return Err(bad(i + 2, format!("unknown device '{}'", row.device)));
        }
    }
    let losses = read_losses(dir)?;
    let mut generating = vec![false; losses.len()];
    for row in read_inverters(dir)? {
        if row.p_avail_kw > 0.0 {
            if let Some(g) = generating.get_mut(row.timestep) {
                *g = true;
            }
        }
    }
    let digest = RunDigest {
        label: meta.label.clone(),
        dt_s: meta.dt_s,
        regulator_ops,
        capacitor_ops,
        p_loss_kw: losses.iter().map(|r| r.p_loss_kw).collect(),
        generating,
        violations: losses.iter().map(|r| r.violations).sum(),
        flagged_power_flow: losses.iter().filter(|r| !r.power_flow_converged).count(),
        flagged_control: losses.iter().filter(|r| !r.control_converged).count(),
    };
    Ok((meta, digest))
}
