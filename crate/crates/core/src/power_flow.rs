//! Unbalanced backward/forward sweep power flow for radial feeders.
//!
//! Internally everything is volts and amperes; reported voltages are per unit
//! on each bus's line-to-neutral base. Loads and inverter outputs are
//! constant-PQ; capacitor banks inject their rated kVAR when on.

use num_complex::Complex64;

use crate::error::PowerFlowError;
use crate::feeder::{Branch, Network};
use crate::phase::{Phase, PhaseVec, ZERO3};

pub const DEFAULT_TOLERANCE_PU: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 200;

/// Net complex power injections per bus and phase (kW + j kVAR).
/// Generation is positive, consumption negative.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionSet {
    pub kva: Vec<PhaseVec>,
}

impl InjectionSet {
    pub fn zeros(bus_count: usize) -> Self {
        InjectionSet {
            kva: vec![ZERO3; bus_count],
        }
    }

    pub fn add(&mut self, bus: usize, phase: Phase, s: Complex64) {
        self.kva[bus][phase.index()] += s;
    }

    pub fn total(&self) -> Complex64 {
        self.kva.iter().flat_map(|v| v.iter()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tolerance_pu: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance_pu: DEFAULT_TOLERANCE_PU,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Bus voltages in volts.
    pub voltages: Vec<PhaseVec>,
    /// Base line-to-neutral volts per bus.
    pub base_volts: Vec<f64>,
    /// Series current per line in amperes, flowing from `from` to `to`.
    pub line_currents: Vec<PhaseVec>,
    /// Regulator current on the regulated (load) side.
    pub regulator_currents: Vec<PhaseVec>,
    /// Complex power entering each line at its sending end (kVA).
    pub line_power_from: Vec<PhaseVec>,
    /// Complex power entering each line at its receiving end (kVA); negative
    /// real part for forward flow.
    pub line_power_to: Vec<PhaseVec>,
    /// Specified injections including capacitor banks (kVA).
    pub bus_injections: Vec<PhaseVec>,
    /// Total complex power delivered by the source (kVA).
    pub source_power: Complex64,
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch_pu: f64,
}

impl Solution {
    pub fn v_pu(&self, bus: usize, phase: Phase) -> Complex64 {
        self.voltages[bus][phase.index()] / self.base_volts[bus]
    }

    pub fn vmag_pu(&self, bus: usize, phase: Phase) -> f64 {
        self.v_pu(bus, phase).norm()
    }

    /// Mean magnitude over the listed phases.
    pub fn mean_vmag_pu(&self, bus: usize, phases: impl Iterator<Item = Phase>) -> f64 {
        let (sum, n) = phases.fold((0.0, 0usize), |(s, n), p| (s + self.vmag_pu(bus, p), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Current through a series element on its receiving side.
    pub fn branch_current(&self, b: Branch) -> PhaseVec {
        match b {
            Branch::Line(i) => self.line_currents[i],
            Branch::Regulator(i) => self.regulator_currents[i],
        }
    }

    pub fn total_injection(&self) -> Complex64 {
        self.bus_injections.iter().flat_map(|v| v.iter()).sum()
    }
}

/// Total series losses (kW, kVAR) of a converged solution.
pub fn total_losses(solution: &Solution) -> Result<(f64, f64), PowerFlowError> {
    if !solution.converged {
        return Err(PowerFlowError::UnconvergedSolution);
    }
    let s: Complex64 = solution
        .line_power_from
        .iter()
        .zip(&solution.line_power_to)
        .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x + y))
        .sum();
    Ok((s.re, s.im))
}

/// Adds the capacitor contributions for the given on/off states.
pub fn with_capacitors(network: &Network, injections: &InjectionSet, cap_states: &[[bool; 3]]) -> InjectionSet {
    let mut out = injections.clone();
    for (bank, state) in network.capacitors.iter().zip(cap_states) {
        for p in bank.phases.iter() {
            if state[p.index()] {
                out.add(bank.bus, p, Complex64::new(0.0, bank.kvar[p.index()]));
            }
        }
    }
    out
}

pub fn solve(
    network: &Network,
    injections: &InjectionSet,
    tap_positions: &[[i32; 3]],
    cap_states: &[[bool; 3]],
) -> Result<Solution, PowerFlowError> {
    solve_with(network, injections, tap_positions, cap_states, SolverOptions::default())
}

pub fn solve_with(
    network: &Network,
    injections: &InjectionSet,
    tap_positions: &[[i32; 3]],
    cap_states: &[[bool; 3]],
    options: SolverOptions,
) -> Result<Solution, PowerFlowError> {
    let n = network.buses.len();
    for line in &network.lines {
        let zero = (0..line.z.dim()).all(|i| (0..line.z.dim()).all(|j| line.z.get(i, j).norm() == 0.0));
        if zero {
            return Err(PowerFlowError::SingularSegment { line: line.id.clone() });
        }
    }
    let inj = with_capacitors(network, injections, cap_states);
    for (i, v) in inj.kva.iter().enumerate() {
        if v.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(PowerFlowError::NonFiniteInjection {
                bus: network.buses[i].id.clone(),
            });
        }
    }
    let ratios: Vec<[f64; 3]> = network
        .regulators
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let taps = tap_positions.get(i).copied().unwrap_or(r.initial_taps);
            let mut a = [1.0; 3];
            for p in r.phases.iter() {
                a[p.index()] = r.ratio(taps[p.index()]);
            }
            a
        })
        .collect();
    let base_volts: Vec<f64> = network.buses.iter().map(|b| b.base_volts()).collect();
    let order = network.downstream_order();

    // Flat start: source voltage carried through the tap ratios.
    let mut v = vec![ZERO3; n];
    v[network.source] = network.source_voltage();
    for &bus in order.iter().skip(1) {
        let parent = network.parent_branch(bus).expect("non-source bus has a parent");
        let (from, _) = network.branch_ends(parent);
        let phases = network.buses[bus].phases;
        for p in phases.iter() {
            let k = p.index();
            v[bus][k] = match parent {
                Branch::Line(_) => v[from][k],
                Branch::Regulator(r) => v[from][k] * ratios[r][k],
            };
        }
    }

    // Current delivered by each branch on its receiving side, indexed by bus.
    let mut branch_in = vec![ZERO3; n];
    let mut converged = false;
    let mut iterations = 0;
    let mut mismatch = f64::INFINITY;
    while iterations < options.max_iterations {
        iterations += 1;
        // Backward sweep: accumulate currents from the leaves.
        for &bus in order.iter().rev() {
            let mut acc = ZERO3;
            for p in network.buses[bus].phases.iter() {
                let k = p.index();
                // Current drawn by the bus: -conj(S/V).
                acc[k] = -(inj.kva[bus][k] * 1e3 / v[bus][k]).conj();
            }
            for &child in network.child_branches(bus) {
                let (_, to) = network.branch_ends(child);
                for p in network.branch_phases(child).iter() {
                    let k = p.index();
                    acc[k] += match child {
                        Branch::Line(_) => branch_in[to][k],
                        Branch::Regulator(r) => branch_in[to][k] * ratios[r][k],
                    };
                }
            }
            branch_in[bus] = acc;
        }
        // Forward sweep: voltages from the source outward.
        mismatch = 0.0;
        for &bus in order.iter().skip(1) {
            let parent = network.parent_branch(bus).unwrap();
            let (from, _) = network.branch_ends(parent);
            let mut new_v = ZERO3;
            match parent {
                Branch::Line(l) => {
                    let line = &network.lines[l];
                    let phases: Vec<Phase> = line.phases.iter().collect();
                    let current: Vec<Complex64> = phases.iter().map(|p| branch_in[bus][p.index()]).collect();
                    let drop = line.z.mul_vec(&current);
                    for (i, p) in phases.iter().enumerate() {
                        new_v[p.index()] = v[from][p.index()] - drop[i];
                    }
                }
                Branch::Regulator(r) => {
                    for p in network.regulators[r].phases.iter() {
                        new_v[p.index()] = v[from][p.index()] * ratios[r][p.index()];
                    }
                }
            }
            for p in network.buses[bus].phases.iter() {
                let k = p.index();
                let d = (new_v[k] - v[bus][k]).norm() / base_volts[bus];
                mismatch = if d.is_finite() { mismatch.max(d) } else { f64::INFINITY };
                v[bus][k] = new_v[k];
            }
        }
        if !mismatch.is_finite() {
            break;
        }
        if mismatch < options.tolerance_pu {
            converged = true;
            break;
        }
    }

    // Final branch currents consistent with the final voltages.
    for &bus in order.iter().rev() {
        let mut acc = ZERO3;
        for p in network.buses[bus].phases.iter() {
            let k = p.index();
            acc[k] = -(inj.kva[bus][k] * 1e3 / v[bus][k]).conj();
        }
        for &child in network.child_branches(bus) {
            let (_, to) = network.branch_ends(child);
            for p in network.branch_phases(child).iter() {
                let k = p.index();
                acc[k] += match child {
                    Branch::Line(_) => branch_in[to][k],
                    Branch::Regulator(r) => branch_in[to][k] * ratios[r][k],
                };
            }
        }
        branch_in[bus] = acc;
    }

    let mut line_currents = vec![ZERO3; network.lines.len()];
    let mut line_power_from = vec![ZERO3; network.lines.len()];
    let mut line_power_to = vec![ZERO3; network.lines.len()];
    for (i, line) in network.lines.iter().enumerate() {
        for p in line.phases.iter() {
            let k = p.index();
            let current = branch_in[line.to][k];
            line_currents[i][k] = current;
            line_power_from[i][k] = v[line.from][k] * current.conj() / 1e3;
            line_power_to[i][k] = -v[line.to][k] * current.conj() / 1e3;
        }
    }
    let regulator_currents = network
        .regulators
        .iter()
        .map(|r| {
            let mut c = ZERO3;
            for p in r.phases.iter() {
                c[p.index()] = branch_in[r.to][p.index()];
            }
            c
        })
        .collect();
    let source_current = branch_in[network.source];
    let source_power = network.buses[network.source]
        .phases
        .iter()
        .map(|p| v[network.source][p.index()] * source_current[p.index()].conj() / 1e3)
        .sum();

    Ok(Solution {
        voltages: v,
        base_volts,
        line_currents,
        regulator_currents,
        line_power_from,
        line_power_to,
        bus_injections: inj.kva,
        source_power,
        converged,
        iterations,
        max_mismatch_pu: mismatch,
    })
}
