//! Current-injection harmonic analysis at selected timesteps.
//!
//! At each order h above the fundamental, series reactances scale by h while
//! resistances stay fixed, the source is an ideal short, loads become the
//! constant impedance that draws their fundamental power, switched-on
//! capacitors become susceptances scaled by h and regulators stay ideal ratio
//! changers. Inverters inject a fixed fraction of their fundamental current.
//! Because the network is radial, each order is solved exactly with one
//! upward pass of Norton equivalents and one downward voltage pass.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::HarmonicsError;
use crate::feeder::{Branch, Network};
use crate::inverter::InverterOutput;
use crate::phase::{Phase, PhaseMatrix, PhaseSet, PhaseVec, ZERO3};
use crate::power_flow::{InjectionSet, Solution};

/// One harmonic component of the inverter current spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicComponent {
    pub order: u32,
    /// Magnitude as a fraction of the fundamental current.
    pub magnitude: f64,
    /// Phase offset in degrees, added to h times the fundamental angle.
    pub angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSpectrum {
    pub components: Vec<HarmonicComponent>,
}

impl Default for HarmonicSpectrum {
    /// Typical grid-tied PV inverter spectrum.
    fn default() -> Self {
        let c = |order, pct: f64| HarmonicComponent {
            order,
            magnitude: pct / 100.0,
            angle_deg: 0.0,
        };
        HarmonicSpectrum {
            components: vec![c(3, 1.5), c(5, 2.5), c(7, 1.5), c(11, 0.7), c(13, 0.5)],
        }
    }
}

impl HarmonicSpectrum {
    pub fn validate(&self) -> Result<(), HarmonicsError> {
        let mut seen = Vec::new();
        for c in &self.components {
            if c.order < 2 || seen.contains(&c.order) || !(c.magnitude >= 0.0 && c.magnitude.is_finite()) {
                return Err(HarmonicsError::UnknownOrder(c.order));
            }
            seen.push(c.order);
        }
        Ok(())
    }

    pub fn orders(&self) -> Vec<u32> {
        self.components.iter().map(|c| c.order).collect()
    }
}

/// Operating point the harmonic scan linearises around.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicInputs<'a> {
    pub network: &'a Network,
    pub fundamental: &'a Solution,
    /// Load-only injections (kVA, consumption negative) at the fundamental.
    pub loads: &'a InjectionSet,
    pub pv_outputs: &'a [InverterOutput],
    pub taps: &'a [[i32; 3]],
    pub cap_states: &'a [[bool; 3]],
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicResult {
    pub orders: Vec<u32>,
    /// Bus voltages in volts, per order.
    pub bus_voltages: BTreeMap<u32, Vec<PhaseVec>>,
    /// Line currents in amps, per order.
    pub line_currents: BTreeMap<u32, Vec<PhaseVec>>,
    pub fundamental_voltages: Vec<PhaseVec>,
    pub fundamental_currents: Vec<PhaseVec>,
}

fn thd(fundamental: Complex64, harmonics: impl Iterator<Item = Complex64>) -> f64 {
    let m1 = fundamental.norm();
    if m1 == 0.0 {
        return 0.0;
    }
    harmonics.map(|h| h.norm_sqr()).sum::<f64>().sqrt() / m1 * 100.0
}

impl HarmonicResult {
    /// Voltage THD in percent at a bus phase.
    pub fn thd_v(&self, bus: usize, phase: Phase) -> f64 {
        let k = phase.index();
        thd(
            self.fundamental_voltages[bus][k],
            self.bus_voltages.values().map(|v| v[bus][k]),
        )
    }

    /// Current THD in percent on a line phase.
    pub fn thd_i(&self, line: usize, phase: Phase) -> f64 {
        let k = phase.index();
        thd(
            self.fundamental_currents[line][k],
            self.line_currents.values().map(|i| i[line][k]),
        )
    }

    pub fn voltage_at(&self, order: u32, bus: usize) -> Result<PhaseVec, HarmonicsError> {
        self.bus_voltages
            .get(&order)
            .map(|v| v[bus])
            .ok_or(HarmonicsError::UnknownOrder(order))
    }
}

fn embed(z: &PhaseMatrix, phases: PhaseSet) -> PhaseMatrix {
    let mut m = PhaseMatrix::zeros(3);
    for (i, pi) in phases.iter().enumerate() {
        for (j, pj) in phases.iter().enumerate() {
            m.set(pi.index(), pj.index(), z.get(i, j));
        }
    }
    m
}

fn sub(a: &PhaseVec, b: &PhaseVec) -> PhaseVec {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn to_vec3(v: Vec<Complex64>) -> PhaseVec {
    [v[0], v[1], v[2]]
}

fn masked(v: PhaseVec, phases: PhaseSet) -> PhaseVec {
    let mut out = ZERO3;
    for p in phases.iter() {
        out[p.index()] = v[p.index()];
    }
    out
}

/// Harmonic currents injected by each inverter, amps, per bus.
fn source_currents(inputs: &HarmonicInputs, component: &HarmonicComponent) -> Vec<PhaseVec> {
    let net = inputs.network;
    let h = component.order as f64;
    let mut j = vec![ZERO3; net.buses.len()];
    for (pv, out) in net.pv_units.iter().zip(inputs.pv_outputs) {
        let s_phase = Complex64::new(out.p_kw, out.q_kvar) * 1000.0 / pv.phases.len() as f64;
        for p in pv.phases.iter() {
            let v = inputs.fundamental.voltages[pv.bus][p.index()];
            if v.norm() == 0.0 {
                continue;
            }
            let i1 = (s_phase / v).conj();
            let angle = h * i1.arg() + component.angle_deg.to_radians();
            j[pv.bus][p.index()] += Complex64::from_polar(component.magnitude * i1.norm(), angle);
        }
    }
    j
}

/// Shunt admittances (siemens, per phase) of loads and capacitors at order h.
fn shunt_admittances(inputs: &HarmonicInputs, h: f64) -> Vec<PhaseVec> {
    let net = inputs.network;
    let mut y = vec![ZERO3; net.buses.len()];
    for (b, bus) in net.buses.iter().enumerate() {
        for p in bus.phases.iter() {
            let k = p.index();
            let s_load = -inputs.loads.kva[b][k] * 1000.0;
            let v2 = inputs.fundamental.voltages[b][k].norm_sqr();
            if s_load.norm() > 0.0 && v2 > 0.0 {
                let z1 = v2 / s_load.conj();
                y[b][k] += 1.0 / Complex64::new(z1.re, z1.im * h);
            }
        }
    }
    for (c, bank) in net.capacitors.iter().enumerate() {
        let vb = net.buses[bank.bus].base_volts();
        for p in bank.phases.iter() {
            let k = p.index();
            if inputs.cap_states[c][k] {
                y[bank.bus][k] += Complex64::new(0.0, bank.kvar[k] * 1000.0 / (vb * vb) * h);
            }
        }
    }
    y
}

fn ratio_matrix(net: &Network, r: usize, taps: &[[i32; 3]]) -> [f64; 3] {
    let reg = &net.regulators[r];
    let mut a = [1.0; 3];
    for p in reg.phases.iter() {
        a[p.index()] = reg.ratio(taps[r][p.index()]);
    }
    a
}

fn solve_order(inputs: &HarmonicInputs, component: &HarmonicComponent) -> (Vec<PhaseVec>, Vec<PhaseVec>) {
    let net = inputs.network;
    let h = component.order as f64;
    let n = net.buses.len();
    let shunts = shunt_admittances(inputs, h);
    let sources = source_currents(inputs, component);

    // Upward pass: current drawn by the subtree at b is y_eq[b] V_b - j_eq[b].
    let mut y_eq: Vec<PhaseMatrix> = shunts.iter().map(|s| PhaseMatrix::diagonal(s)).collect();
    let mut j_eq: Vec<PhaseVec> = sources;
    // Per child: (Y', J') as seen from the parent side.
    let mut seen_from_parent: Vec<Option<(PhaseMatrix, PhaseVec)>> = vec![None; n];
    let z_h: Vec<PhaseMatrix> = net
        .lines
        .iter()
        .map(|l| embed(&l.z.with_reactance_scaled(h), l.phases))
        .collect();
    for &b in net.downstream_order().iter().rev() {
        let Some(branch) = net.parent_branch(b) else { continue };
        let (parent, _) = net.branch_ends(branch);
        let (y, j) = match branch {
            Branch::Line(l) => {
                let m = PhaseMatrix::identity(3).add(&y_eq[b].mul(&z_h[l]));
                let m_inv = m.inverse().expect("series-shunt matrix is invertible");
                (m_inv.mul(&y_eq[b]), to_vec3(m_inv.mul_vec(&j_eq[b])))
            }
            Branch::Regulator(r) => {
                let a = ratio_matrix(net, r, inputs.taps);
                let a_m = PhaseMatrix::diagonal(&a.map(|x| Complex64::new(x, 0.0)));
                let jb = [j_eq[b][0] * a[0], j_eq[b][1] * a[1], j_eq[b][2] * a[2]];
                (a_m.mul(&y_eq[b]).mul(&a_m), jb)
            }
        };
        y_eq[parent] = y_eq[parent].add(&y);
        for k in 0..3 {
            j_eq[parent][k] += j[k];
        }
        seen_from_parent[b] = Some((y, j));
    }

    // Downward pass from the shorted source.
    let mut v = vec![ZERO3; n];
    let mut i_line = vec![ZERO3; net.lines.len()];
    for &b in net.downstream_order() {
        let Some(branch) = net.parent_branch(b) else { continue };
        let (parent, _) = net.branch_ends(branch);
        let (y, j) = seen_from_parent[b].as_ref().expect("set in upward pass");
        let drawn = sub(&to_vec3(y.mul_vec(&v[parent])), j);
        let phases = net.buses[b].phases;
        match branch {
            Branch::Line(l) => {
                let line_phases = net.lines[l].phases;
                i_line[l] = masked(drawn, line_phases);
                v[b] = masked(sub(&v[parent], &to_vec3(z_h[l].mul_vec(&i_line[l]))), phases);
            }
            Branch::Regulator(r) => {
                let a = ratio_matrix(net, r, inputs.taps);
                v[b] = masked([v[parent][0] * a[0], v[parent][1] * a[1], v[parent][2] * a[2]], phases);
            }
        }
    }
    (v, i_line)
}

/// Solves every order of the spectrum around a converged fundamental.
pub fn harmonic_solution(inputs: &HarmonicInputs, spectrum: &HarmonicSpectrum) -> Result<HarmonicResult, HarmonicsError> {
    if !inputs.fundamental.converged {
        return Err(HarmonicsError::UnconvergedFundamental);
    }
    spectrum.validate()?;
    let mut bus_voltages = BTreeMap::new();
    let mut line_currents = BTreeMap::new();
    for c in &spectrum.components {
        let (v, i) = solve_order(inputs, c);
        bus_voltages.insert(c.order, v);
        line_currents.insert(c.order, i);
    }
    Ok(HarmonicResult {
        orders: spectrum.orders(),
        bus_voltages,
        line_currents,
        fundamental_voltages: inputs.fundamental.voltages.clone(),
        fundamental_currents: inputs.fundamental.line_currents.clone(),
    })
}
