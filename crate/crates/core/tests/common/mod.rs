//! Shared test oracles: an admittance-based Newton-Raphson power flow and
//! the closed-form two-bus solution.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use qsts_core::feeder::{Branch, Network};
use qsts_core::phase::{Phase, PhaseVec, ZERO3};
use qsts_core::power_flow::{with_capacitors, InjectionSet};

/// Nominal load injections (unit multiplier) plus `pv_kva` split evenly over
/// each PV unit's phases.
pub fn nominal_injections(net: &Network, pv_kva: &[Complex64]) -> InjectionSet {
    let mut inj = InjectionSet::zeros(net.buses.len());
    for load in &net.loads {
        for p in load.phases.iter() {
            let k = p.index();
            inj.add(load.bus, p, -Complex64::new(load.kw[k], load.kvar[k]));
        }
    }
    for (pv, s) in net.pv_units.iter().zip(pv_kva) {
        for p in pv.phases.iter() {
            inj.add(pv.bus, p, s / pv.phases.len() as f64);
        }
    }
    inj
}

fn ratios(net: &Network, taps: &[[i32; 3]]) -> Vec<[f64; 3]> {
    net.regulators
        .iter()
        .zip(taps)
        .map(|(r, t)| [r.ratio(t[0]), r.ratio(t[1]), r.ratio(t[2])])
        .collect()
}

/// Bus-phase pairs whose voltage is an independent unknown: every bus fed by
/// a line. Buses behind a regulator follow their upstream bus.
fn unknowns(net: &Network) -> Vec<(usize, Phase)> {
    let mut out = Vec::new();
    for &bus in net.downstream_order() {
        if let Some(Branch::Line(_)) = net.parent_branch(bus) {
            for p in net.buses[bus].phases.iter() {
                out.push((bus, p));
            }
        }
    }
    out
}

fn voltages(net: &Network, a: &[[f64; 3]], vars: &[(usize, Phase)], x: &DVector<f64>) -> Vec<PhaseVec> {
    let mut v = vec![ZERO3; net.buses.len()];
    v[net.source] = net.source_voltage();
    for (i, &(bus, p)) in vars.iter().enumerate() {
        v[bus][p.index()] = Complex64::new(x[2 * i], x[2 * i + 1]);
    }
    for &bus in net.downstream_order() {
        if let Some(Branch::Regulator(r)) = net.parent_branch(bus) {
            let from = net.regulators[r].from;
            for p in net.regulators[r].phases.iter() {
                v[bus][p.index()] = v[from][p.index()] * a[r][p.index()];
            }
        }
    }
    v
}

/// Kirchhoff current mismatch (A) at every bus and phase: specified
/// injection current minus current leaving through lines. Mismatch at a
/// regulated bus is carried to its upstream bus through the ideal ratio.
fn mismatch(net: &Network, a: &[[f64; 3]], inj: &InjectionSet, v: &[PhaseVec]) -> Vec<PhaseVec> {
    let mut r = vec![ZERO3; net.buses.len()];
    for (bus, s) in inj.kva.iter().enumerate() {
        for p in net.buses[bus].phases.iter() {
            let k = p.index();
            r[bus][k] = (s[k] * 1e3 / v[bus][k]).conj();
        }
    }
    for line in &net.lines {
        let y = line.z.inverse().expect("line impedance invertible");
        let phases: Vec<Phase> = line.phases.iter().collect();
        let dv: Vec<Complex64> = phases.iter().map(|p| v[line.from][p.index()] - v[line.to][p.index()]).collect();
        let i = y.mul_vec(&dv);
        for (n, p) in phases.iter().enumerate() {
            r[line.from][p.index()] -= i[n];
            r[line.to][p.index()] += i[n];
        }
    }
    for &bus in net.downstream_order().iter().rev() {
        if let Some(Branch::Regulator(g)) = net.parent_branch(bus) {
            let reg = &net.regulators[g];
            for p in reg.phases.iter() {
                let k = p.index();
                let carried = r[bus][k] * a[g][k];
                r[reg.from][k] += carried;
                r[bus][k] = Complex64::new(0.0, 0.0);
            }
        }
    }
    r
}

fn residual(
    net: &Network,
    a: &[[f64; 3]],
    inj: &InjectionSet,
    vars: &[(usize, Phase)],
    x: &DVector<f64>,
) -> DVector<f64> {
    let v = voltages(net, a, vars, x);
    let r = mismatch(net, a, inj, &v);
    let mut f = DVector::zeros(2 * vars.len());
    for (i, &(bus, p)) in vars.iter().enumerate() {
        f[2 * i] = r[bus][p.index()].re;
        f[2 * i + 1] = r[bus][p.index()].im;
    }
    f
}

/// Full Newton-Raphson on the nodal current equations in rectangular
/// coordinates, with a central-difference Jacobian. Returns bus voltages in
/// volts.
pub fn newton_oracle(net: &Network, injections: &InjectionSet, taps: &[[i32; 3]], caps: &[[bool; 3]]) -> Vec<PhaseVec> {
    let inj = with_capacitors(net, injections, caps);
    let a = ratios(net, taps);
    let vars = unknowns(net);
    let n = 2 * vars.len();
    // Flat start through the tap ratios.
    let mut x = DVector::zeros(n);
    {
        let mut flat = vec![ZERO3; net.buses.len()];
        flat[net.source] = net.source_voltage();
        for &bus in net.downstream_order().iter().skip(1) {
            let parent = net.parent_branch(bus).unwrap();
            let (from, _) = net.branch_ends(parent);
            for p in net.buses[bus].phases.iter() {
                let k = p.index();
                flat[bus][k] = match parent {
                    Branch::Line(_) => flat[from][k],
                    Branch::Regulator(r) => flat[from][k] * a[r][k],
                };
            }
        }
        for (i, &(bus, p)) in vars.iter().enumerate() {
            x[2 * i] = flat[bus][p.index()].re;
            x[2 * i + 1] = flat[bus][p.index()].im;
        }
    }
    let base = net.buses.iter().map(|b| b.base_volts()).fold(0.0, f64::max);
    for _ in 0..40 {
        let f = residual(net, &a, &inj, &vars, &x);
        let h = 1e-7 * base;
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let col = (residual(net, &a, &inj, &vars, &xp) - residual(net, &a, &inj, &vars, &xm)) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let dx = jac.lu().solve(&(-f)).expect("Jacobian is nonsingular");
        x += &dx;
        if dx.amax() < 1e-12 * base {
            break;
        }
    }
    voltages(net, &a, &vars, &x)
}

/// Receiving-end voltage magnitude and angle (relative to the source) of a
/// single-phase line with impedance `r + jx` ohms carrying a constant-power
/// load `p + jq` watts/vars from a source of `vs` volts.
pub fn two_bus_closed_form(vs: f64, r: f64, x: f64, p: f64, q: f64) -> (f64, f64) {
    // |Vr|^4 + (2(PR + QX) - |Vs|^2)|Vr|^2 + (P^2 + Q^2)(R^2 + X^2) = 0,
    // taking the high-voltage root.
    let b = 2.0 * (p * r + q * x) - vs * vs;
    let c = (p * p + q * q) * (r * r + x * x);
    let vr2 = (-b + (b * b - 4.0 * c).sqrt()) / 2.0;
    let vr = vr2.sqrt();
    // Vs = Vr + (R + jX)(P - jQ)/Vr with Vr on the real axis.
    let delta = (x * p - r * q).atan2(vr2 + r * p + x * q);
    (vr, -delta)
}
