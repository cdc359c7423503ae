use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use qsts_core::feeder::{build_network, Branch, Network};
use qsts_core::fixtures::desk_feeder;
use qsts_core::harmonics::{harmonic_solution, HarmonicComponent, HarmonicInputs, HarmonicResult, HarmonicSpectrum};
use qsts_core::inverter::{InverterFunctionConfig, InverterOutput};
use qsts_core::io::feeder_file::FeederDescription;
use qsts_core::phase::{Phase, PhaseVec, ZERO3};
use qsts_core::power_flow::{solve, InjectionSet, Solution};
use qsts_core::profiles::ProfileSet;
use qsts_core::qsts::{harmonic_snapshot, run_series, RunResult, Scenario};

/// One converged midday operating point on the desk feeder.
fn desk_operating_point() -> (Scenario, RunResult) {
    let net = Arc::new(desk_feeder());
    let scenario = Scenario::new(net, Arc::new(ProfileSet::flat(60.0, 3, 850.0)), 60.0, 3)
        .with_function(InverterFunctionConfig::volt_var());
    let run = run_series(&scenario).unwrap();
    (scenario, run)
}

fn scan(scenario: &Scenario, run: &RunResult, outputs: &[InverterOutput], spectrum: &HarmonicSpectrum) -> HarmonicResult {
    let ts = run.timesteps.last().unwrap();
    let loads = scenario.load_injections(run.len() - 1);
    let inputs = HarmonicInputs {
        network: &scenario.network,
        fundamental: &ts.solution,
        loads: &loads,
        pv_outputs: outputs,
        taps: &ts.taps,
        cap_states: &ts.cap_states,
    };
    harmonic_solution(&inputs, spectrum).unwrap()
}

fn scaled(spectrum: &HarmonicSpectrum, k: f64) -> HarmonicSpectrum {
    HarmonicSpectrum {
        components: spectrum
            .components
            .iter()
            .map(|c| HarmonicComponent {
                magnitude: c.magnitude * k,
                ..*c
            })
            .collect(),
    }
}

fn max_norm(r: &HarmonicResult) -> f64 {
    r.bus_voltages.values().flatten().flatten().map(|v| v.norm()).fold(0.0, f64::max)
}

#[test]
fn no_injection_means_no_distortion() {
    let (scenario, run) = desk_operating_point();
    let spectrum = scaled(&HarmonicSpectrum::default(), 0.0);
    let r = scan(&scenario, &run, &run.timesteps.last().unwrap().outputs, &spectrum);
    assert_eq!(max_norm(&r), 0.0);
    for line in r.line_currents.values().flatten().flatten() {
        assert_eq!(line.norm(), 0.0);
    }
    for (b, bus) in scenario.network.buses.iter().enumerate() {
        for p in bus.phases.iter() {
            assert_eq!(r.thd_v(b, p), 0.0);
        }
    }
}

#[test]
fn harmonic_voltages_are_linear_in_the_injections() {
    let (scenario, run) = desk_operating_point();
    let outputs = run.timesteps.last().unwrap().outputs.clone();
    let spectrum = HarmonicSpectrum::default();
    let base = scan(&scenario, &run, &outputs, &spectrum);
    let doubled = scan(&scenario, &run, &outputs, &scaled(&spectrum, 2.0));
    let only = |i: usize| {
        let mut o = vec![InverterOutput::default(); outputs.len()];
        o[i] = outputs[i];
        scan(&scenario, &run, &o, &spectrum)
    };
    let (first, second) = (only(0), only(1));
    let scale = max_norm(&base);
    assert!(scale > 0.0);
    for h in spectrum.orders() {
        let v = &base.bus_voltages[&h];
        for b in 0..v.len() {
            for k in 0..3 {
                let x = v[b][k];
                assert!((doubled.bus_voltages[&h][b][k] - 2.0 * x).norm() <= 1e-10 * scale);
                let sum = first.bus_voltages[&h][b][k] + second.bus_voltages[&h][b][k];
                assert!((sum - x).norm() <= 1e-10 * scale);
            }
        }
    }
}

#[test]
fn fundamental_entries_equal_the_power_flow() {
    let (scenario, run) = desk_operating_point();
    let r = harmonic_snapshot(&scenario, &run, 2, &HarmonicSpectrum::default()).unwrap();
    let sol = &run.timesteps[2].solution;
    assert_eq!(r.fundamental_voltages, sol.voltages);
    assert_eq!(r.fundamental_currents, sol.line_currents);
}

#[test]
fn single_line_fifth_harmonic_by_hand() {
    let desc = FeederDescription::from_toml_str(
        r#"
schema = "qsts-feeder/1"
source_bus = "S"
[[bus]]
id = "S"
phases = "ABC"
base_kv = 7.2
[[bus]]
id = "P"
phases = "ABC"
base_kv = 7.2
[[line]]
id = "SP"
from = "S"
to = "P"
phases = "ABC"
r = [[0.4, 0.0, 0.0], [0.0, 0.4, 0.0], [0.0, 0.0, 0.4]]
x = [[0.9, 0.0, 0.0], [0.0, 0.9, 0.0], [0.0, 0.0, 0.9]]
[[pv]]
id = "PV"
bus = "P"
phases = "ABC"
p_rated_kw = 900
s_inverter_kva = 1000
"#,
    )
    .unwrap();
    let net = build_network(&desc).unwrap();
    let out = InverterOutput { p_kw: 900.0, q_kvar: -150.0 };
    let mut inj = InjectionSet::zeros(2);
    for p in Phase::ALL {
        inj.add(1, p, Complex64::new(out.p_kw, out.q_kvar) / 3.0);
    }
    let sol = solve(&net, &inj, &[], &[]).unwrap();
    let spectrum = HarmonicSpectrum {
        components: vec![HarmonicComponent {
            order: 5,
            magnitude: 0.02,
            angle_deg: 0.0,
        }],
    };
    let loads = InjectionSet::zeros(2);
    let inputs = HarmonicInputs {
        network: &net,
        fundamental: &sol,
        loads: &loads,
        pv_outputs: &[out],
        taps: &[],
        cap_states: &[],
    };
    let r = harmonic_solution(&inputs, &spectrum).unwrap();
    for p in Phase::ALL {
        let v1 = sol.voltages[1][p.index()];
        let i1 = (Complex64::new(300e3, -50e3) / v1).conj();
        let expected = 0.02 * i1.norm() * Complex64::new(0.4, 5.0 * 0.9).norm();
        let got = r.voltage_at(5, 1).unwrap()[p.index()].norm();
        assert!((got - expected).abs() <= 1e-9 * expected, "{got} vs {expected}");
    }
}

/// Dense nodal solve of the order-h network: line admittances, the same
/// shunt and injection models, regulators as ideal ratio constraints and the
/// source bus grounded.
fn nodal_oracle(net: &Network, sol: &Solution, loads: &InjectionSet, outputs: &[InverterOutput], taps: &[[i32; 3]], caps: &[[bool; 3]], c: &HarmonicComponent) -> Vec<PhaseVec> {
    let h = c.order as f64;
    let n = net.buses.len();
    let mut y_sh = vec![ZERO3; n];
    let mut j = vec![ZERO3; n];
    for (b, bus) in net.buses.iter().enumerate() {
        for p in bus.phases.iter() {
            let k = p.index();
            let s = -loads.kva[b][k] * 1e3;
            if s.norm() > 0.0 {
                let z1 = sol.voltages[b][k].norm_sqr() / s.conj();
                y_sh[b][k] += 1.0 / Complex64::new(z1.re, h * z1.im);
            }
        }
    }
    for (i, bank) in net.capacitors.iter().enumerate() {
        let vb = net.buses[bank.bus].base_volts();
        for p in bank.phases.iter() {
            if caps[i][p.index()] {
                y_sh[bank.bus][p.index()] += Complex64::new(0.0, h * bank.kvar[p.index()] * 1e3 / (vb * vb));
            }
        }
    }
    for (pv, out) in net.pv_units.iter().zip(outputs) {
        for p in pv.phases.iter() {
            let s = Complex64::new(out.p_kw, out.q_kvar) * 1e3 / pv.phases.len() as f64;
            let i1 = (s / sol.voltages[pv.bus][p.index()]).conj();
            j[pv.bus][p.index()] += Complex64::from_polar(c.magnitude * i1.norm(), h * i1.arg() + c.angle_deg.to_radians());
        }
    }
    let ratio = |r: usize, k: usize| net.regulators[r].ratio(taps[r][k]);
    let vars: Vec<(usize, Phase)> = net
        .downstream_order()
        .iter()
        .filter(|&&b| matches!(net.parent_branch(b), Some(Branch::Line(_))))
        .flat_map(|&b| net.buses[b].phases.iter().map(move |p| (b, p)))
        .collect();
    let m = vars.len();
    let voltages = |x: &DVector<Complex64>| {
        let mut v = vec![ZERO3; n];
        for (i, &(b, p)) in vars.iter().enumerate() {
            v[b][p.index()] = x[i];
        }
        for &b in net.downstream_order() {
            if let Some(Branch::Regulator(r)) = net.parent_branch(b) {
                let from = net.regulators[r].from;
                for p in net.regulators[r].phases.iter() {
                    v[b][p.index()] = v[from][p.index()] * ratio(r, p.index());
                }
            }
        }
        v
    };
    // Residual is affine in the unknowns, so its columns give the matrix.
    let residual = |x: &DVector<Complex64>, with_sources: bool| {
        let v = voltages(x);
        let mut r = vec![ZERO3; n];
        for b in 0..n {
            for k in 0..3 {
                r[b][k] = -y_sh[b][k] * v[b][k] + if with_sources { j[b][k] } else { Complex64::new(0.0, 0.0) };
            }
        }
        for line in &net.lines {
            let z = line.z.with_reactance_scaled(h);
            let y = z.inverse().unwrap();
            let ph: Vec<Phase> = line.phases.iter().collect();
            let dv: Vec<Complex64> = ph.iter().map(|p| v[line.from][p.index()] - v[line.to][p.index()]).collect();
            let i = y.mul_vec(&dv);
            for (q, p) in ph.iter().enumerate() {
                r[line.from][p.index()] -= i[q];
                r[line.to][p.index()] += i[q];
            }
        }
        for &b in net.downstream_order().iter().rev() {
            if let Some(Branch::Regulator(g)) = net.parent_branch(b) {
                let reg = &net.regulators[g];
                for p in reg.phases.iter() {
                    let k = p.index();
                    let carried = r[b][k] * ratio(g, k);
                    r[reg.from][k] += carried;
                }
            }
        }
        DVector::from_iterator(m, vars.iter().map(|&(b, p)| r[b][p.index()]))
    };
    let zero = DVector::from_element(m, Complex64::new(0.0, 0.0));
    let rhs = -residual(&zero, true);
    let mut a = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
    for col in 0..m {
        let mut e = zero.clone();
        e[col] = Complex64::new(1.0, 0.0);
        a.set_column(col, &residual(&e, false));
    }
    let x = a.lu().solve(&rhs).unwrap();
    voltages(&x)
}

#[test]
fn radial_solve_matches_a_dense_nodal_solve() {
    let (scenario, run) = desk_operating_point();
    let net = &scenario.network;
    let t = run.len() - 1;
    let ts = &run.timesteps[t];
    let loads = scenario.load_injections(t);
    let spectrum = HarmonicSpectrum::default();
    let r = harmonic_snapshot(&scenario, &run, t, &spectrum).unwrap();
    for c in &spectrum.components {
        let want = nodal_oracle(net, &ts.solution, &loads, &ts.outputs, &ts.taps, &ts.cap_states, c);
        let got = &r.bus_voltages[&c.order];
        let scale = want.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
        for (b, bus) in net.buses.iter().enumerate() {
            for p in bus.phases.iter() {
                let d = (got[b][p.index()] - want[b][p.index()]).norm();
                assert!(d <= 1e-9 * scale, "h{} {} {:?}: {d:e}", c.order, bus.id, p);
            }
        }
    }
}
