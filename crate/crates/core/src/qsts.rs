//! Quasi-static time-series engine.
//!
//! Each timestep iterates power flow, inverter functions and legacy device
//! controllers to a fixed point. Inverter output updates are damped inside
//! the loop; controller memories (filters, ramps, moving averages) advance
//! once per timestep, after the operating point is settled.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_complex::Complex64;

use crate::controllers::{
    apply_switches, capacitor_decide, check_voltage_limits, regulator_decide, DailyCounters, DeviceActionLog,
    DeviceNote, DeviceRef, NoteKind, ViolationRecord,
};
use crate::error::{HarmonicsError, InverterError, SimError};
use crate::harmonics::{harmonic_solution, HarmonicInputs, HarmonicResult, HarmonicSpectrum};
use crate::feeder::Network;
use crate::inverter::{
    apply_kva_limit, pv_available_power, step, InverterFunctionConfig, InverterInputs, InverterOutput, InverterRating,
    InverterState, KvaPrecedence,
};
use crate::phase::Phase;
use crate::power_flow::{solve_with, total_losses, InjectionSet, Solution, SolverOptions};
use crate::profiles::ProfileSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlOrder {
    RegulatorsFirst,
    CapacitorsFirst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOptions {
    /// Relaxation factor on inverter output updates inside one timestep.
    pub damping: f64,
    pub max_iterations: usize,
    pub q_tolerance_kvar: f64,
    pub p_tolerance_kw: f64,
    pub order: ControlOrder,
    pub solver: SolverOptions,
}

impl Default for ControlOptions {
    fn default() -> Self {
        ControlOptions {
            damping: 0.5,
            max_iterations: 50,
            q_tolerance_kvar: 1.0,
            p_tolerance_kw: 1.0,
            order: ControlOrder::RegulatorsFirst,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionAssignment {
    /// Same function on every inverter.
    All(InverterFunctionConfig),
    /// Per-unit map keyed by PV id.
    PerPv(BTreeMap<String, InverterFunctionConfig>),
    /// Use each unit's function from the feeder file (unity PF if absent).
    FromFeeder,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub network: Arc<Network>,
    pub profiles: Arc<ProfileSet>,
    pub dt_s: f64,
    pub steps: usize,
    pub functions: FunctionAssignment,
    pub pv_enabled: bool,
    pub options: ControlOptions,
}

impl Scenario {
    pub fn new(network: Arc<Network>, profiles: Arc<ProfileSet>, dt_s: f64, steps: usize) -> Self {
        Scenario {
            network,
            profiles,
            dt_s,
            steps,
            functions: FunctionAssignment::FromFeeder,
            pv_enabled: true,
            options: ControlOptions::default(),
        }
    }

    pub fn with_function(&self, config: InverterFunctionConfig) -> Self {
        Scenario {
            functions: FunctionAssignment::All(config),
            ..self.clone()
        }
    }

    pub fn baseline(&self) -> Self {
        Scenario {
            pv_enabled: false,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return Err(SimError::InvalidScenario(format!("time step must be positive, got {}", self.dt_s)));
        }
        self.profiles.check_covers(self.dt_s, self.steps)?;
        if self.pv_enabled {
            self.resolve_functions()?;
        }
        Ok(())
    }

    /// Function configuration per PV unit, in feeder order.
    pub fn resolve_functions(&self) -> Result<Vec<InverterFunctionConfig>, SimError> {
        let configs: Vec<InverterFunctionConfig> = match &self.functions {
            FunctionAssignment::All(c) => vec![c.clone(); self.network.pv_units.len()],
            FunctionAssignment::PerPv(map) => self
                .network
                .pv_units
                .iter()
                .map(|pv| {
                    map.get(&pv.id)
                        .cloned()
                        .ok_or_else(|| SimError::InvalidScenario(format!("no function assigned to PV '{}'", pv.id)))
                })
                .collect::<Result<_, _>>()?,
            FunctionAssignment::FromFeeder => self
                .network
                .pv_units
                .iter()
                .map(|pv| pv.function.clone().unwrap_or(InverterFunctionConfig::constant_pf(1.0)))
                .collect(),
        };
        for c in &configs {
            c.validate()?;
        }
        Ok(configs)
    }

    /// Load injections for timestep `t` (consumption negative).
    pub fn load_injections(&self, t: usize) -> InjectionSet {
        let net = &self.network;
        let mut inj = InjectionSet::zeros(net.buses.len());
        for load in &net.loads {
            let m = self.profiles.load_multiplier(&load.profile, t);
            for p in load.phases.iter() {
                let k = p.index();
                inj.add(load.bus, p, -Complex64::new(load.kw[k], load.kvar[k]) * m);
            }
        }
        inj
    }

    /// Load injections plus the given inverter outputs.
    pub fn injections_at(&self, t: usize, outputs: &[InverterOutput]) -> InjectionSet {
        let mut inj = self.load_injections(t);
        if self.pv_enabled {
            add_pv(&self.network, &mut inj, outputs);
        }
        inj
    }

    pub fn available_power(&self, t: usize) -> Vec<f64> {
        let g = self.profiles.irradiance.at(t);
        let temp = self.profiles.temperature.at(t);
        self.network
            .pv_units
            .iter()
            .map(|pv| {
                if self.pv_enabled {
                    pv_available_power(g, temp, pv.p_rated_kw, pv.temp_coeff_per_degc)
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn day_of(&self, t: usize) -> u64 {
        (t as f64 * self.dt_s / crate::profiles::DAY_S).floor() as u64
    }
}

fn add_pv(network: &Network, inj: &mut InjectionSet, outputs: &[InverterOutput]) {
    for (pv, out) in network.pv_units.iter().zip(outputs) {
        let share = Complex64::new(out.p_kw, out.q_kvar) / pv.phases.len() as f64;
        for p in pv.phases.iter() {
            inj.add(pv.bus, p, share);
        }
    }
}

fn rating_of(network: &Network, i: usize) -> InverterRating {
    let pv = &network.pv_units[i];
    InverterRating {
        p_rated_kw: pv.p_rated_kw,
        s_rated_kva: pv.s_inverter_kva,
    }
}

/// Mutable device and controller state carried between timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub taps: Vec<[i32; 3]>,
    pub cap_states: Vec<[bool; 3]>,
    pub inverter_states: Vec<InverterState>,
    pub outputs: Vec<InverterOutput>,
    pub pv_voltage_pu: Vec<f64>,
    pub counters: DailyCounters,
    active_notes: BTreeSet<(DeviceRef, Option<Phase>, NoteKind)>,
}

impl SimState {
    pub fn initial(network: &Network) -> Self {
        let n = network.pv_units.len();
        SimState {
            taps: network.initial_taps(),
            cap_states: network.initial_cap_states(),
            inverter_states: vec![InverterState::default(); n],
            outputs: vec![InverterOutput::default(); n],
            pv_voltage_pu: vec![network.source_pu; n],
            counters: DailyCounters::new(network),
            active_notes: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TimestepFlags {
    pub power_flow_unconverged: bool,
    pub control_unconverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimestepResult {
    pub timestep: usize,
    pub solution: Solution,
    pub p_avail_kw: Vec<f64>,
    pub outputs: Vec<InverterOutput>,
    pub taps: Vec<[i32; 3]>,
    pub cap_states: Vec<[bool; 3]>,
    /// (kW, kVAR); NaN when the power flow did not converge.
    pub losses: (f64, f64),
    pub violations: Vec<ViolationRecord>,
    pub control_iterations: usize,
    pub flags: TimestepFlags,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub label: String,
    pub pv_enabled: bool,
    pub dt_s: f64,
    pub timesteps: Vec<TimestepResult>,
    pub log: DeviceActionLog,
    pub initial_taps: Vec<[i32; 3]>,
    pub functions: Vec<InverterFunctionConfig>,
    pub wall_clock_s: f64,
}

impl RunResult {
    pub fn len(&self) -> usize {
        self.timesteps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timesteps.is_empty()
    }

    pub fn flagged_power_flow(&self) -> usize {
        self.timesteps.iter().filter(|t| t.flags.power_flow_unconverged).count()
    }

    pub fn flagged_control(&self) -> usize {
        self.timesteps.iter().filter(|t| t.flags.control_unconverged).count()
    }

    /// Equality of everything except wall-clock metadata.
    pub fn same_outputs(&self, other: &RunResult) -> bool {
        self.label == other.label
            && self.pv_enabled == other.pv_enabled
            && self.timesteps == other.timesteps
            && self.log == other.log
            && self.initial_taps == other.initial_taps
            && self.functions == other.functions
    }
}

fn inverter_inputs(scenario: &Scenario, t: usize, v_pu: f64, p_avail: f64) -> InverterInputs {
    InverterInputs {
        v_pu,
        p_avail_kw: p_avail,
        freq_hz: scenario.profiles.frequency_at(t),
        dt_s: scenario.dt_s,
    }
}

fn pv_terminal_voltages(network: &Network, solution: &Solution) -> Vec<f64> {
    network
        .pv_units
        .iter()
        .map(|pv| solution.mean_vmag_pu(pv.bus, pv.phases.iter()))
        .collect()
}

/// Advances one timestep; `state` holds the device and controller memory
/// from the previous timestep and is updated in place.
pub fn run_timestep(
    scenario: &Scenario,
    configs: &[InverterFunctionConfig],
    t: usize,
    state: &mut SimState,
    log: &mut DeviceActionLog,
) -> Result<TimestepResult, SimError> {
    let net = &*scenario.network;
    let opts = scenario.options;
    state.counters.roll_over(scenario.day_of(t));
    let p_avail = scenario.available_power(t);
    let load_inj = scenario.load_injections(t);
    let n_pv = if scenario.pv_enabled { net.pv_units.len() } else { 0 };

    // Starting guess: functions evaluated at last timestep's terminal voltage.
    let mut outputs = vec![InverterOutput::default(); net.pv_units.len()];
    let mut stepped = state.inverter_states.clone();
    for i in 0..n_pv {
        let inputs = inverter_inputs(scenario, t, state.pv_voltage_pu[i], p_avail[i]);
        let (out, _) = step(&configs[i], rating_of(net, i), inputs, &state.inverter_states[i])?;
        outputs[i] = out;
    }

    let mut flags = TimestepFlags::default();
    let mut iterations = 0;
    let mut last_notes: Vec<DeviceNote> = Vec::new();
    let solution = loop {
        iterations += 1;
        let mut inj = load_inj.clone();
        if scenario.pv_enabled {
            add_pv(net, &mut inj, &outputs);
        }
        let sol = solve_with(net, &inj, &state.taps, &state.cap_states, opts.solver)?;
        if !sol.converged {
            flags.power_flow_unconverged = true;
            break sol;
        }

        let v_pv = pv_terminal_voltages(net, &sol);
        let mut next = outputs.clone();
        let mut inverter_settled = true;
        for i in 0..n_pv {
            let inputs = inverter_inputs(scenario, t, v_pv[i], p_avail[i]);
            let (out, st) = step(&configs[i], rating_of(net, i), inputs, &state.inverter_states[i])?;
            stepped[i] = st;
            let dq = out.q_kvar - outputs[i].q_kvar;
            let dp = out.p_kw - outputs[i].p_kw;
            if dq.abs() >= opts.q_tolerance_kvar || dp.abs() >= opts.p_tolerance_kw {
                inverter_settled = false;
            }
            let p = outputs[i].p_kw + opts.damping * dp;
            let q = outputs[i].q_kvar + opts.damping * dq;
            let (p, q) = apply_kva_limit(p, q, net.pv_units[i].s_inverter_kva, KvaPrecedence::WattPriority);
            next[i] = InverterOutput { p_kw: p, q_kvar: q };
        }

        let mut tap_actions = Vec::new();
        let mut switch_actions = Vec::new();
        let mut notes = Vec::new();
        let decide_regs = |tap_actions: &mut Vec<_>, notes: &mut Vec<_>| {
            for r in 0..net.regulators.len() {
                let d = regulator_decide(&sol, net, r, &state.taps[r], &state.counters);
                tap_actions.extend(d.actions);
                notes.extend(d.notes);
            }
        };
        let decide_caps = |switch_actions: &mut Vec<_>, notes: &mut Vec<_>| {
            for c in 0..net.capacitors.len() {
                let d = capacitor_decide(&sol, net, c, &state.cap_states, &state.counters);
                switch_actions.extend(d.actions);
                notes.extend(d.notes);
            }
        };
        match opts.order {
            ControlOrder::RegulatorsFirst => {
                decide_regs(&mut tap_actions, &mut notes);
                decide_caps(&mut switch_actions, &mut notes);
            }
            ControlOrder::CapacitorsFirst => {
                decide_caps(&mut switch_actions, &mut notes);
                decide_regs(&mut tap_actions, &mut notes);
            }
        }
        last_notes = notes;

        let devices_quiet = tap_actions.is_empty() && switch_actions.is_empty();
        if devices_quiet && inverter_settled {
            break sol;
        }
        if iterations >= opts.max_iterations {
            flags.control_unconverged = true;
            break sol;
        }
        for a in &tap_actions {
            state.taps[a.regulator][a.phase.index()] = a.resulting_position;
            state.counters.record_tap(a);
            log.push_tap(t, a);
        }
        for a in &switch_actions {
            state.counters.record_switch(a);
            log.push_switch(t, a);
        }
        apply_switches(net, &mut state.cap_states, &switch_actions);
        outputs = next;
    };

    // Notes are logged when a condition first appears.
    let current: BTreeSet<_> = last_notes.iter().map(|n| (n.device, n.phase, n.kind)).collect();
    for n in &last_notes {
        if !state.active_notes.contains(&(n.device, n.phase, n.kind)) {
            log.push_note(t, n);
        }
    }
    state.active_notes = current;

    if !flags.power_flow_unconverged {
        // Commit controller memory, anchored to the outputs actually applied.
        for i in 0..n_pv {
            let mut st = stepped[i].clone();
            st.p_prev = outputs[i].p_kw;
            st.q_prev = outputs[i].q_kvar;
            state.inverter_states[i] = st;
        }
        state.pv_voltage_pu = pv_terminal_voltages(net, &solution);
    }
    state.outputs = outputs.clone();

    let losses = total_losses(&solution).unwrap_or((f64::NAN, f64::NAN));
    let violations = if flags.power_flow_unconverged {
        Vec::new()
    } else {
        check_voltage_limits(&solution, net, t)
    };
    Ok(TimestepResult {
        timestep: t,
        solution,
        p_avail_kw: p_avail,
        outputs,
        taps: state.taps.clone(),
        cap_states: state.cap_states.clone(),
        losses,
        violations,
        control_iterations: iterations,
        flags,
    })
}

/// Label used for a scenario's run directory and report rows.
pub fn scenario_label(scenario: &Scenario) -> String {
    if !scenario.pv_enabled {
        return "baseline".to_string();
    }
    match &scenario.functions {
        FunctionAssignment::All(c) => c.label(),
        FunctionAssignment::PerPv(_) => "per_pv".to_string(),
        FunctionAssignment::FromFeeder => "feeder_functions".to_string(),
    }
}

/// Wall-clock timer; reads zero on wasm32, where std has no clock.
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        return 0.0;
    }
}

pub fn run_series(scenario: &Scenario) -> Result<RunResult, SimError> {
    scenario.validate()?;
    let started = Stopwatch::start();
    let configs = if scenario.pv_enabled {
        scenario.resolve_functions()?
    } else {
        Vec::new()
    };
    let net = &*scenario.network;
    let mut state = SimState::initial(net);
    let mut log = DeviceActionLog::default();
    let mut timesteps = Vec::with_capacity(scenario.steps);
    for t in 0..scenario.steps {
        timesteps.push(run_timestep(scenario, &configs, t, &mut state, &mut log)?);
    }
    Ok(RunResult {
        label: scenario_label(scenario),
        pv_enabled: scenario.pv_enabled,
        dt_s: scenario.dt_s,
        timesteps,
        log,
        initial_taps: net.initial_taps(),
        functions: configs,
        wall_clock_s: started.seconds(),
    })
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub baseline: RunResult,
    pub runs: Vec<(InverterFunctionConfig, RunResult)>,
}

/// One run per configuration plus the no-PV baseline, all on identical
/// profiles.
pub fn sweep_functions(scenario: &Scenario, configs: &[InverterFunctionConfig]) -> Result<SweepResult, SimError> {
    if configs.is_empty() {
        return Err(SimError::EmptySweep);
    }
    let mut labels = BTreeSet::new();
    for c in configs {
        c.validate().map_err(|e: InverterError| SimError::Inverter(e))?;
        if !labels.insert(c.label()) {
            return Err(SimError::InvalidScenario(format!("function '{}' appears twice in the sweep", c.label())));
        }
    }
    let mut jobs: Vec<Scenario> = vec![scenario.baseline()];
    jobs.extend(configs.iter().map(|c| scenario.with_function(c.clone())));

    #[cfg(feature = "parallel")]
    let mut results: Vec<RunResult> = {
        use rayon::prelude::*;
        jobs.par_iter().map(run_series).collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let mut results: Vec<RunResult> = jobs.iter().map(run_series).collect::<Result<_, _>>()?;

    let baseline = results.remove(0);
    Ok(SweepResult {
        baseline,
        runs: configs.iter().cloned().zip(results).collect(),
    })
}

/// Harmonic scan around the recorded operating point of timestep `t`.
pub fn harmonic_snapshot(
    scenario: &Scenario,
    run: &RunResult,
    t: usize,
    spectrum: &HarmonicSpectrum,
) -> Result<HarmonicResult, HarmonicsError> {
    let ts = &run.timesteps[t];
    let loads = scenario.load_injections(t);
    let inputs = HarmonicInputs {
        network: &scenario.network,
        fundamental: &ts.solution,
        loads: &loads,
        pv_outputs: &ts.outputs,
        taps: &ts.taps,
        cap_states: &ts.cap_states,
    };
    harmonic_solution(&inputs, spectrum)
}
