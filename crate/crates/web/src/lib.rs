//! Browser bindings for the feeder simulator: an inverter curve explorer, a
//! steady-state voltage profile and a one-day run on the bundled desk feeder.

use std::sync::Arc;

use wasm_bindgen::prelude::*;

use qsts_core::fixtures::desk_feeder;
use qsts_core::inverter::{step, InverterFunctionConfig, InverterInputs, InverterRating, InverterState};
use qsts_core::metrics::RunDigest;
use qsts_core::profiles::{synthetic_day, Profile, ProfileSet};
use qsts_core::qsts::{run_series, Scenario};
use qsts_core::Network;

/// Nameplate used by the curve explorer, matching the desk feeder's units.
const RATING: InverterRating = InverterRating {
    p_rated_kw: 1000.0,
    s_rated_kva: 1200.0,
};

fn function(label: &str) -> Result<InverterFunctionConfig, JsError> {
    InverterFunctionConfig::study_set()
        .into_iter()
        .find(|f| f.label() == label)
        .ok_or_else(|| JsError::new(&format!("unknown function '{label}'")))
}

fn js<E: std::fmt::Display>(e: E) -> JsError {
    JsError::new(&e.to_string())
}

/// Labels of the nine standard functions, newline separated.
#[wasm_bindgen]
pub fn function_labels() -> String {
    InverterFunctionConfig::study_set().iter().map(|f| f.label()).collect::<Vec<_>>().join("\n")
}

/// First-step output of `label` over `n` voltages from `v_lo` to `v_hi` pu
/// with `p_avail_kw` available: P values followed by Q values.
#[wasm_bindgen]
pub fn curve(label: &str, v_lo: f64, v_hi: f64, n: usize, p_avail_kw: f64) -> Result<Vec<f64>, JsError> {
    let config = function(label)?;
    let n = n.max(2);
    let mut p = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    for i in 0..n {
        let v = v_lo + (v_hi - v_lo) * i as f64 / (n - 1) as f64;
        let inputs = InverterInputs {
            v_pu: v,
            p_avail_kw,
            freq_hz: 60.0,
            dt_s: 60.0,
        };
        let (out, _) = step(&config, RATING, inputs, &InverterState::default()).map_err(js)?;
        p.push(out.p_kw);
        q.push(out.q_kvar);
    }
    p.extend(q);
    Ok(p)
}

/// The bundled desk feeder, kept alive between calls.
#[wasm_bindgen]
pub struct Feeder {
    network: Arc<Network>,
}

#[wasm_bindgen]
impl Feeder {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Feeder {
        Feeder {
            network: Arc::new(desk_feeder()),
        }
    }

    /// Bus ids in breadth-first order from the source, newline separated.
    pub fn bus_ids(&self) -> String {
        self.network.downstream_ids().join("\n")
    }

    /// Mean phase voltage (pu) at every bus, in `bus_ids` order, after a few
    /// control steps at constant irradiance and load multiplier.
    pub fn profile(&self, label: &str, irradiance_w_m2: f64, load_scale: f64) -> Result<Vec<f64>, JsError> {
        let steps = 5;
        let mut profiles = ProfileSet::flat(60.0, steps, irradiance_w_m2);
        for p in profiles.loads.values_mut() {
            *p = Profile::constant("default", 60.0, load_scale, steps);
        }
        let scenario =
            Scenario::new(self.network.clone(), Arc::new(profiles), 60.0, steps).with_function(function(label)?);
        let run = run_series(&scenario).map_err(js)?;
        let sol = &run.timesteps.last().expect("at least one step").solution;
        Ok(self
            .network
            .downstream_order()
            .iter()
            .map(|&b| sol.mean_vmag_pu(b, self.network.buses[b].phases.iter()))
            .collect())
    }

    /// Runs one synthetic day with `label` on every inverter.
    pub fn day(&self, label: &str, seed: u32) -> Result<DaySummary, JsError> {
        let profiles = synthetic_day(u64::from(seed), 60.0);
        let steps = profiles.irradiance.len();
        let scenario =
            Scenario::new(self.network.clone(), Arc::new(profiles), 60.0, steps).with_function(function(label)?);
        let run = run_series(&scenario).map_err(js)?;
        let digest = RunDigest::from_run(&run, &self.network);
        Ok(DaySummary {
            taps: digest.regulator_ops.iter().flatten().sum(),
            switches: digest.capacitor_ops.iter().sum(),
            violations: digest.violations as u32,
            loss_kw: digest.p_loss_kw.clone(),
            pv_kw: run.timesteps.iter().map(|t| t.outputs.iter().map(|o| o.p_kw).sum()).collect(),
            pv_kvar: run.timesteps.iter().map(|t| t.outputs.iter().map(|o| o.q_kvar).sum()).collect(),
        })
    }
}

impl Default for Feeder {
    fn default() -> Self {
        Feeder::new()
    }
}

/// Totals and per-minute series from one day.
#[wasm_bindgen]
pub struct DaySummary {
    taps: u32,
    switches: u32,
    violations: u32,
    loss_kw: Vec<f64>,
    pv_kw: Vec<f64>,
    pv_kvar: Vec<f64>,
}

#[wasm_bindgen]
impl DaySummary {
    #[wasm_bindgen(getter)]
    pub fn taps(&self) -> u32 {
        self.taps
    }

    #[wasm_bindgen(getter)]
    pub fn switches(&self) -> u32 {
        self.switches
    }

    #[wasm_bindgen(getter)]
    pub fn violations(&self) -> u32 {
        self.violations
    }

    /// Feeder active losses per step, kW.
    #[wasm_bindgen(getter)]
    pub fn loss_kw(&self) -> Vec<f64> {
        self.loss_kw.clone()
    }

    /// Total PV active output per step, kW.
    #[wasm_bindgen(getter)]
    pub fn pv_kw(&self) -> Vec<f64> {
        self.pv_kw.clone()
    }

    /// Total PV reactive output per step, kVAR.
    #[wasm_bindgen(getter)]
    pub fn pv_kvar(&self) -> Vec<f64> {
        self.pv_kvar.clone()
    }
}
